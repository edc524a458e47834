/** Persistence-diagram CSV encode/parse (header dim,birth,death; inf deaths). */

import { ValidationError } from "./errors.js";

/** One persistence pair; death is Infinity for essential classes. */
export type DiagramRow = [dim: number, birth: number, death: number];

function formatValue(x: number): string {
  if (x === Infinity) {
    return "inf";
  }
  if (!Number.isFinite(x)) {
    throw new ValidationError(`diagram value ${x} is not representable`);
  }
  // shortest round-trip decimal; the core parses it exactly
  return String(x);
}

export function encodeDiagram(rows: readonly DiagramRow[]): string {
  const lines = ["dim,birth,death"];
  for (const [dim, birth, death] of rows) {
    if (!Number.isInteger(dim) || dim < 0 || dim > 2) {
      throw new ValidationError(`diagram dimension must be 0, 1 or 2, got ${dim}`);
    }
    if (!(birth < death)) {
      throw new ValidationError(`diagram rows need birth < death, got (${birth}, ${death})`);
    }
    lines.push(`${dim},${formatValue(birth)},${formatValue(death)}`);
  }
  return lines.join("\n") + "\n";
}

export function parseDiagram(csv: string): DiagramRow[] {
  const lines = csv.split("\n").filter((line) => line.length > 0);
  if (lines[0] !== "dim,birth,death") {
    throw new ValidationError(`bad diagram header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const parts = line.split(",");
    if (parts.length !== 3) {
      throw new ValidationError(`bad diagram row: ${line}`);
    }
    const death = parts[2] === "inf" ? Infinity : Number(parts[2]);
    const row: DiagramRow = [Number(parts[0]), Number(parts[1]), death];
    if (row.some((x) => Number.isNaN(x))) {
      throw new ValidationError(`bad diagram row: ${line}`);
    }
    return row;
  });
}
