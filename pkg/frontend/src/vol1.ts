/** VOL1 encode/decode for dense host buffers.
 *
 * Buffers are caller-owned, dense float64 (or uint8 for labels), laid out
 * x-fastest: index = x + nx*(y + ny*z). They are copied during the call and
 * never retained.
 */

import { ValidationError } from "./errors.js";

export interface Dims {
  nx: number;
  ny: number;
  nz: number;
}

const MAGIC = Buffer.from("VOL1", "ascii");
const DTYPE_FLOAT64 = 1;
const DTYPE_LABELS = 2;

function checkDims(dims: Dims, length: number, what: string): number {
  const { nx, ny, nz } = dims;
  for (const d of [nx, ny, nz]) {
    if (!Number.isInteger(d) || d < 1) {
      throw new ValidationError(`dims must be positive integers, got ${nx}x${ny}x${nz}`);
    }
  }
  const voxels = nx * ny * nz;
  if (length !== voxels) {
    throw new ValidationError(
      `${what} has ${length} entries but dims ${nx}x${ny}x${nz} need ${voxels}`,
    );
  }
  return voxels;
}

function header(dims: Dims, dtype: number, extra?: number): Buffer {
  const head = Buffer.alloc(17 + (extra === undefined ? 0 : 1));
  MAGIC.copy(head, 0);
  head.writeUInt32LE(dims.nx, 4);
  head.writeUInt32LE(dims.ny, 8);
  head.writeUInt32LE(dims.nz, 12);
  head.writeUInt8(dtype, 16);
  if (extra !== undefined) {
    head.writeUInt8(extra, 17);
  }
  return head;
}

export function encodeVolume(values: Float64Array, dims: Dims): Buffer {
  const voxels = checkDims(dims, values.length, "volume buffer");
  for (let i = 0; i < voxels; i++) {
    if (!Number.isFinite(values[i])) {
      throw new ValidationError(`volume buffer has a non-finite value at index ${i}`);
    }
  }
  const payload = Buffer.alloc(8 * voxels);
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  for (let i = 0; i < voxels; i++) {
    view.setFloat64(8 * i, values[i], true);
  }
  return Buffer.concat([header(dims, DTYPE_FLOAT64), payload]);
}

export function encodeLabels(labels: Uint8Array, dims: Dims, numClasses: number): Buffer {
  const voxels = checkDims(dims, labels.length, "label buffer");
  if (!Number.isInteger(numClasses) || numClasses < 2 || numClasses > 255) {
    throw new ValidationError(`num_classes must be in [2, 255], got ${numClasses}`);
  }
  for (let i = 0; i < voxels; i++) {
    if (labels[i] >= numClasses) {
      throw new ValidationError(
        `label ${labels[i]} at index ${i} out of range for ${numClasses} classes`,
      );
    }
  }
  return Buffer.concat([header(dims, DTYPE_LABELS, numClasses), Buffer.from(labels)]);
}

export function decodeVolume(data: Buffer): { dims: Dims; values: Float64Array } {
  if (data.length < 17 || !data.subarray(0, 4).equals(MAGIC)) {
    throw new ValidationError("not a VOL1 stream");
  }
  const dims = {
    nx: data.readUInt32LE(4),
    ny: data.readUInt32LE(8),
    nz: data.readUInt32LE(12),
  };
  if (data.readUInt8(16) !== DTYPE_FLOAT64) {
    throw new ValidationError("not a float64 VOL1 stream");
  }
  const voxels = dims.nx * dims.ny * dims.nz;
  if (data.length !== 17 + 8 * voxels) {
    throw new ValidationError("VOL1 payload size mismatch");
  }
  const values = new Float64Array(voxels);
  const view = new DataView(data.buffer, data.byteOffset + 17, 8 * voxels);
  for (let i = 0; i < voxels; i++) {
    values[i] = view.getFloat64(8 * i, true);
  }
  return { dims, values };
}
