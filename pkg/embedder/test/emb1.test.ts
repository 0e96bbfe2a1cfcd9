import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { HEADER_SIZE, readEmb1, writeEmb1 } from "../src/emb1.js";

let dir: string;
beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "emb1-"));
});
afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

describe("EMB1 round trip", () => {
  it("recovers header, payload, and ids", () => {
    const rows = Float32Array.from([1, 0, 0, 0, 1, 0]);
    const ids = BigUint64Array.from([5n, 9n]);
    const file = path.join(dir, "m.emb1");
    writeEmb1(file, { n: 2, d: 3, normalized: true, rows, ids });
    const back = readEmb1(file);
    expect(back.n).toBe(2);
    expect(back.d).toBe(3);
    expect(back.normalized).toBe(true);
    expect(Array.from(back.rows)).toEqual(Array.from(rows));
    expect(Array.from(back.ids ?? [])).toEqual([5n, 9n]);
  });

  it("writes the documented byte layout", () => {
    const file = path.join(dir, "m.emb1");
    writeEmb1(file, { n: 2, d: 3, normalized: true, rows: new Float32Array(6), ids: new BigUint64Array(2) });
    const blob = fs.readFileSync(file);
    expect(blob.length).toBe(HEADER_SIZE + 4 * 6 + 8 * 2);
    expect(blob.toString("ascii", 0, 4)).toBe("EMB1");
    expect(blob.readUInt32LE(4)).toBe(1);
    expect(Number(blob.readBigUInt64LE(8))).toBe(2);
    expect(blob.readUInt32LE(16)).toBe(3);
    expect(blob.readUInt32LE(20)).toBe(3); // normalized | has-ids
  });

  it("rejects payload length mismatches", () => {
    expect(() =>
      writeEmb1(path.join(dir, "bad.emb1"), { n: 2, d: 3, normalized: true, rows: new Float32Array(5) }),
    ).toThrow(/payload length/);
  });

  it("rejects truncated files", () => {
    const file = path.join(dir, "short.emb1");
    writeEmb1(file, { n: 2, d: 3, normalized: true, rows: new Float32Array(6) });
    fs.truncateSync(file, HEADER_SIZE + 4);
    expect(() => readEmb1(file)).toThrow(/expected/);
  });
});
