import fs from "node:fs";

import { parseLine, readLines } from "./jsonl.js";
import { DataError, DatasetRecord } from "./types.js";

export type FilterMode = "auto" | "metadata" | "fenced";

export interface PrepareOptions {
  filterTag?: string;
  filterMode: FilterMode;
}

export interface SourceCount {
  path: string;
  read: number;
  kept: number;
}

export interface Manifest {
  sources: SourceCount[];
  total: number;
  filter: {
    tag: string | null;
    mode: FilterMode;
    decided_by: { metadata: number; fenced: number };
  };
}

const FENCE = /```([A-Za-z][\w+.-]*)/g;

function metadataTags(raw: Record<string, unknown>): string[] | undefined {
  for (const key of ["lang", "language", "tags"]) {
    const value = raw[key];
    if (typeof value === "string") return [value];
    if (Array.isArray(value)) return value.filter((v): v is string => typeof v === "string");
  }
  return undefined;
}

function fencedLanguages(...texts: Array<string | undefined>): string[] {
  const langs: string[] = [];
  for (const text of texts) {
    if (!text) continue;
    for (const match of text.matchAll(FENCE)) langs.push(match[1]);
  }
  return langs;
}

/** Decide whether a record survives the language filter; returns the route taken. */
export function matchesFilter(
  raw: Record<string, unknown>,
  record: DatasetRecord,
  tag: string,
  mode: FilterMode,
): { keep: boolean; via: "metadata" | "fenced" } {
  const wanted = tag.toLowerCase();
  const meta = metadataTags(raw);
  const useMetadata = mode === "metadata" || (mode === "auto" && meta !== undefined);
  if (useMetadata) {
    const keep = (meta ?? []).some((v) => v.toLowerCase() === wanted);
    return { keep, via: "metadata" };
  }
  const keep = fencedLanguages(record.instruction, record.response).some(
    (v) => v.toLowerCase() === wanted,
  );
  return { keep, via: "fenced" };
}

/**
 * Concatenate datasets, optionally keeping only records matching a language
 * tag, reassign sequential ids, and report per-source counts. Instruction and
 * response text pass through unchanged.
 */
export function prepare(
  inputs: string[],
  outPath: string,
  manifestPath: string | undefined,
  options: PrepareOptions,
): Manifest {
  const kept: DatasetRecord[] = [];
  const sources: SourceCount[] = [];
  const decided = { metadata: 0, fenced: 0 };
  for (const path of inputs) {
    const lines = readLines(path);
    let read = 0;
    let keptHere = 0;
    lines.forEach(({ line, text }, index) => {
      const raw = parseLine(path, line, text);
      if (typeof raw.instruction !== "string" || raw.instruction.length === 0) {
        throw new DataError("missing field `instruction`", path, line);
      }
      const response = raw.response ?? raw.output;
      if (response !== undefined && typeof response !== "string") {
        throw new DataError("response must be text", path, line);
      }
      read += 1;
      const record: DatasetRecord = { id: index, instruction: raw.instruction };
      if (typeof response === "string") record.response = response;
      if (typeof raw.source === "string") record.source = raw.source;
      if (options.filterTag) {
        const { keep, via } = matchesFilter(raw, record, options.filterTag, options.filterMode);
        decided[via] += 1;
        if (!keep) return;
      }
      kept.push(record); // id reassigned sequentially below
      keptHere += 1;
    });
    sources.push({ path, read, kept: keptHere });
  }
  kept.forEach((record, index) => {
    record.id = index;
  });
  const lines = kept.map((rec) => JSON.stringify(rec));
  fs.writeFileSync(outPath, lines.join("\n") + (lines.length ? "\n" : ""), "utf8");
  const manifest: Manifest = {
    sources,
    total: kept.length,
    filter: {
      tag: options.filterTag ?? null,
      mode: options.filterMode,
      decided_by: decided,
    },
  };
  if (manifestPath) {
    fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n", "utf8");
  }
  return manifest;
}
