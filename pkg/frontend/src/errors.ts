/** Typed host exceptions, one per core error category. */

/** Input rejected before reaching the core (NaN buffers, size mismatches). */
export class ValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ValidationError";
  }
}

/** Core exit 1: missing files, malformed streams, inconsistent inputs. */
export class IoFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "IoFormatError";
  }
}

/** Core exit 2: bad flags or configuration values. */
export class UsageError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "UsageError";
  }
}

/** Core exit 3: a resource cap was hit (oversized complex). */
export class ResourceLimitError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ResourceLimitError";
  }
}

export function errorForExit(code: number, stderr: string): Error {
  const message = stderr.trim() || `core exited with code ${code}`;
  switch (code) {
    case 1:
      return new IoFormatError(message);
    case 2:
      return new UsageError(message);
    case 3:
      return new ResourceLimitError(message);
    default:
      return new Error(message);
  }
}
