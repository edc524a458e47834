/** Node bindings for the topoloss core.
 *
 * Three operations cross the boundary as dense caller-owned buffers:
 * sublevel persistence of a volume, the transport distance between two
 * diagrams, and the combined focal+topological loss. Buffers are copied
 * during the call; nothing is retained. All work happens in a child
 * process, so long computations never block the host runtime and
 * concurrent calls are safe.
 */

import { readFile, writeFile } from "node:fs/promises";
import { join } from "node:path";

import { DiagramRow, encodeDiagram, parseDiagram } from "./diagram.js";
import { ValidationError } from "./errors.js";
import { runCli, withScratchDir } from "./runner.js";
import { Dims, encodeLabels, encodeVolume } from "./vol1.js";

export { DiagramRow, parseDiagram, encodeDiagram } from "./diagram.js";
export { Dims, encodeVolume, encodeLabels, decodeVolume } from "./vol1.js";
export { ValidationError, IoFormatError, UsageError, ResourceLimitError } from "./errors.js";

/** Must match the core library version; checked via coreVersion(). */
export const VERSION = "0.1.0";

export interface WassersteinOptions {
  mu?: number;
  p?: number;
  mode?: "paper-literal" | "diagonal-augmented";
  stabilization?: "naive" | "log-domain";
  tol?: number;
  maxIter?: number;
}

/** Mirrors the core's loss-config JSON schema; every key optional. */
export interface TaflOptions {
  lambda?: number;
  alpha?: number;
  gamma?: number;
  reduction?: "mean" | "sum";
  prob_floor?: number;
  mu?: number;
  epsilon?: number;
  max_iter?: number;
  tol?: number;
  p?: number;
  stabilization?: "naive" | "log-domain";
  cardinality_mode?: "paper-literal" | "diagonal-augmented";
  homology_dims?: number[];
  classes?: number[] | null;
  top_k?: number;
}

export interface TopoTerm {
  class: number;
  dim: number;
  distance: number;
  converged: boolean;
  n1: number;
  n2: number;
}

export interface LossReport {
  focal: number;
  lambda: number;
  topo_total: number;
  topo_breakdown: TopoTerm[];
  total: number;
}

/** Core library version string, read from the CLI. */
export async function coreVersion(): Promise<string> {
  const out = await runCli(["--version"]);
  const match = out.match(/version\s+(\S+)/);
  if (!match) {
    throw new ValidationError(`cannot parse core version from: ${out.trim()}`);
  }
  return match[1];
}

/** Sublevel persistence pairs of a dense x-fastest float64 volume buffer. */
export async function ffiPersistence(
  values: Float64Array,
  dims: Dims,
  maxDim: 0 | 1 | 2 = 2,
): Promise<DiagramRow[]> {
  const encoded = encodeVolume(values, dims);
  return withScratchDir(async (dir) => {
    const volPath = join(dir, "volume.vol");
    const csvPath = join(dir, "diagram.csv");
    await writeFile(volPath, encoded);
    await runCli(["pd", volPath, "--max-dim", String(maxDim), "--out", csvPath]);
    return parseDiagram(await readFile(csvPath, "utf-8"));
  });
}

/** Transport distance between two diagrams given as (dim, birth, death) rows. */
export async function ffiWasserstein(
  diagram1: readonly DiagramRow[],
  diagram2: readonly DiagramRow[],
  options: WassersteinOptions = {},
): Promise<number> {
  const args: string[] = [];
  if (options.mu !== undefined) args.push("--mu", String(options.mu));
  if (options.p !== undefined) args.push("--p", String(options.p));
  if (options.mode !== undefined) args.push("--mode", options.mode);
  if (options.stabilization !== undefined) args.push("--stabilization", options.stabilization);
  if (options.tol !== undefined) args.push("--tol", String(options.tol));
  if (options.maxIter !== undefined) args.push("--max-iter", String(options.maxIter));
  return withScratchDir(async (dir) => {
    const p1 = join(dir, "d1.csv");
    const p2 = join(dir, "d2.csv");
    await writeFile(p1, encodeDiagram(diagram1));
    await writeFile(p2, encodeDiagram(diagram2));
    const out = await runCli(["dist", p1, p2, ...args]);
    return Number(out.trim());
  });
}

/** Combined loss of per-class probability buffers against a label buffer. */
export async function ffiTafl(
  probBuffers: readonly Float64Array[],
  labels: Uint8Array,
  dims: Dims,
  options: TaflOptions = {},
): Promise<LossReport> {
  if (probBuffers.length < 2) {
    throw new ValidationError("need at least two per-class probability buffers");
  }
  const encodedProbs = probBuffers.map((buf) => encodeVolume(buf, dims));
  const encodedLabels = encodeLabels(labels, dims, probBuffers.length);
  return withScratchDir(async (dir) => {
    const probPaths: string[] = [];
    for (let c = 0; c < encodedProbs.length; c++) {
      const path = join(dir, `p${c}.vol`);
      await writeFile(path, encodedProbs[c]);
      probPaths.push(path);
    }
    const gtPath = join(dir, "gt.vol");
    await writeFile(gtPath, encodedLabels);
    const outPath = join(dir, "report.json");
    const args = ["loss", "--probs", probPaths.join(","), "--gt", gtPath, "--out", outPath];
    if (Object.keys(options).length > 0) {
      const cfgPath = join(dir, "config.json");
      await writeFile(cfgPath, JSON.stringify(options));
      args.push("--config", cfgPath);
    }
    await runCli(args);
    return JSON.parse(await readFile(outPath, "utf-8")) as LossReport;
  });
}
