/** Spawns the core CLI without blocking the event loop.
 *
 * The command comes from TOPOLOSS_CLI (whitespace-split) or defaults to
 * `python3 -m topoloss.cli`. Every invocation works in its own temp
 * directory, so concurrent calls never share state.
 */

import { execFile } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { errorForExit } from "./errors.js";

function cliCommand(): string[] {
  const override = process.env.TOPOLOSS_CLI;
  if (override && override.trim()) {
    return override.trim().split(/\s+/);
  }
  return ["python3", "-m", "topoloss.cli"];
}

export function runCli(args: string[]): Promise<string> {
  const [command, ...prefix] = cliCommand();
  return new Promise((resolve, reject) => {
    execFile(
      command,
      [...prefix, ...args],
      { maxBuffer: 64 * 1024 * 1024 },
      (error, stdout, stderr) => {
        if (error) {
          const code = typeof error.code === "number" ? error.code : -1;
          reject(errorForExit(code, stderr || error.message));
        } else {
          resolve(stdout);
        }
      },
    );
  });
}

export async function withScratchDir<T>(work: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "topoloss-"));
  try {
    return await work(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}
