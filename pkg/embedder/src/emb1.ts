import fs from "node:fs";
import os from "node:os";

import { DataError } from "./types.js";

export const EMB1_MAGIC = "EMB1";
export const EMB1_VERSION = 1;
export const FLAG_NORMALIZED = 1;
export const FLAG_HAS_IDS = 2;
export const HEADER_SIZE = 24;

export interface Emb1Matrix {
  n: number;
  d: number;
  normalized: boolean;
  rows: Float32Array; // n*d row-major
  ids?: BigUint64Array;
}

function assertLittleEndian(): void {
  if (os.endianness() !== "LE") {
    throw new DataError("EMB1 export requires a little-endian host");
  }
}

export function writeEmb1(path: string, matrix: Emb1Matrix): void {
  assertLittleEndian();
  const { n, d, rows, ids } = matrix;
  if (rows.length !== n * d) {
    throw new DataError(`payload length ${rows.length} does not match n*d = ${n * d}`);
  }
  if (ids !== undefined && ids.length !== n) {
    throw new DataError(`id block length ${ids.length} does not match n = ${n}`);
  }
  const header = Buffer.alloc(HEADER_SIZE);
  header.write(EMB1_MAGIC, 0, "ascii");
  header.writeUInt32LE(EMB1_VERSION, 4);
  header.writeBigUInt64LE(BigInt(n), 8);
  header.writeUInt32LE(d, 16);
  let flags = matrix.normalized ? FLAG_NORMALIZED : 0;
  if (ids !== undefined) flags |= FLAG_HAS_IDS;
  header.writeUInt32LE(flags, 20);
  const chunks = [header, Buffer.from(rows.buffer, rows.byteOffset, rows.byteLength)];
  if (ids !== undefined) {
    chunks.push(Buffer.from(ids.buffer, ids.byteOffset, ids.byteLength));
  }
  fs.writeFileSync(path, Buffer.concat(chunks));
}

export function readEmb1(path: string): Emb1Matrix {
  assertLittleEndian();
  let blob: Buffer;
  try {
    blob = fs.readFileSync(path);
  } catch (err) {
    throw new DataError(`cannot read ${path}: ${(err as Error).message}`);
  }
  if (blob.length < HEADER_SIZE) throw new DataError(`${path}: shorter than the header`);
  if (blob.toString("ascii", 0, 4) !== EMB1_MAGIC) throw new DataError(`${path}: bad magic`);
  if (blob.readUInt32LE(4) !== EMB1_VERSION) throw new DataError(`${path}: unsupported version`);
  const n = Number(blob.readBigUInt64LE(8));
  const d = blob.readUInt32LE(16);
  const flags = blob.readUInt32LE(20);
  const hasIds = (flags & FLAG_HAS_IDS) !== 0;
  const expected = HEADER_SIZE + 4 * n * d + (hasIds ? 8 * n : 0);
  if (blob.length !== expected) {
    throw new DataError(`${path}: expected ${expected} bytes, found ${blob.length}`);
  }
  const payload = blob.subarray(HEADER_SIZE, HEADER_SIZE + 4 * n * d);
  const rows = new Float32Array(payload.buffer.slice(payload.byteOffset, payload.byteOffset + payload.byteLength));
  let ids: BigUint64Array | undefined;
  if (hasIds) {
    const tail = blob.subarray(HEADER_SIZE + 4 * n * d);
    ids = new BigUint64Array(tail.buffer.slice(tail.byteOffset, tail.byteOffset + tail.byteLength));
  }
  return { n, d, normalized: (flags & FLAG_NORMALIZED) !== 0, rows, ids };
}
