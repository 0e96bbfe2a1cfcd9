import fs from "node:fs";

import { DataError, DatasetRecord } from "./types.js";

/** Split file contents into non-empty JSONL lines, keeping 1-based numbers. */
export function readLines(path: string): Array<{ line: number; text: string }> {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf8");
  } catch (err) {
    throw new DataError(`cannot read ${path}: ${(err as Error).message}`);
  }
  const out: Array<{ line: number; text: string }> = [];
  raw.split(/\r?\n/).forEach((text, idx) => {
    if (text.trim().length > 0) out.push({ line: idx + 1, text });
  });
  return out;
}

/** Parse one JSONL line into a raw object, reporting file and line on failure. */
export function parseLine(path: string, line: number, text: string): Record<string, unknown> {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new DataError(`invalid JSON (${(err as Error).message})`, path, line);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new DataError("not a JSON object", path, line);
  }
  return obj as Record<string, unknown>;
}

/**
 * Read dataset records. `id` defaults to the 0-based line index; the
 * instruction field is required and must be non-empty text.
 */
export function readRecords(path: string): DatasetRecord[] {
  const lines = readLines(path);
  if (lines.length === 0) throw new DataError(`${path}: no records`);
  const records: DatasetRecord[] = [];
  const seen = new Set<number>();
  lines.forEach(({ line, text }, index) => {
    const obj = parseLine(path, line, text);
    const instruction = obj.instruction;
    if (typeof instruction !== "string" || instruction.length === 0) {
      throw new DataError("missing field `instruction`", path, line);
    }
    const response = obj.response ?? obj.output;
    if (response !== undefined && typeof response !== "string") {
      throw new DataError("response must be text", path, line);
    }
    let id = index;
    if (obj.id !== undefined) {
      if (typeof obj.id !== "number" || !Number.isInteger(obj.id) || obj.id < 0) {
        throw new DataError("id must be a non-negative integer", path, line);
      }
      id = obj.id;
    }
    if (seen.has(id)) throw new DataError(`duplicate id ${id}`, path, line);
    seen.add(id);
    const record: DatasetRecord = { id, instruction };
    if (typeof response === "string") record.response = response;
    if (typeof obj.source === "string") record.source = obj.source;
    records.push(record);
  });
  return records;
}

export function writeRecords(path: string, records: DatasetRecord[]): void {
  const lines = records.map((rec) => JSON.stringify(rec));
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf8");
}
