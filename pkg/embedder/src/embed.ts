import { writeEmb1 } from "./emb1.js";
import { Encoder } from "./encoder.js";
import { readRecords } from "./jsonl.js";
import { DataError, DatasetRecord } from "./types.js";

export interface EmbedOptions {
  batchSize: number;
  includeResponse: boolean;
}

export function encodingText(record: DatasetRecord, includeResponse: boolean): string {
  // The instruction carries the task semantics; appending the response is an
  // ablation knob, off by default.
  if (includeResponse && record.response) return `${record.instruction}\n${record.response}`;
  return record.instruction;
}

function normalizeRow(row: Float32Array, index: number): Float32Array {
  let sumSquares = 0;
  for (let i = 0; i < row.length; i++) sumSquares += row[i] * row[i];
  const norm = Math.sqrt(sumSquares);
  if (norm === 0) throw new DataError(`zero-norm embedding for record at position ${index}`);
  const out = new Float32Array(row.length);
  for (let i = 0; i < row.length; i++) out[i] = row[i] / norm;
  return out;
}

/**
 * Encode every record's text and write a normalized EMB1 matrix whose row
 * order matches the record order and whose id block carries the record ids.
 */
export async function embedRecords(
  recordsPath: string,
  outPath: string,
  encoder: Encoder,
  options: EmbedOptions,
): Promise<{ n: number; d: number }> {
  const records = readRecords(recordsPath);
  const d = encoder.dim;
  const rows = new Float32Array(records.length * d);
  const ids = new BigUint64Array(records.length);
  for (let start = 0; start < records.length; start += options.batchSize) {
    const batch = records.slice(start, start + options.batchSize);
    const encoded = await encoder.encodeBatch(batch.map((r) => encodingText(r, options.includeResponse)));
    encoded.forEach((raw, offset) => {
      if (raw.length !== d) {
        throw new DataError(`encoder returned dimension ${raw.length}, expected ${d}`);
      }
      const index = start + offset;
      rows.set(normalizeRow(raw, index), index * d);
      ids[index] = BigInt(records[index].id);
    });
  }
  writeEmb1(outPath, { n: records.length, d, normalized: true, rows, ids });
  return { n: records.length, d };
}
