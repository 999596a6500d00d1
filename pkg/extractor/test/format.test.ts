import { mkdtempSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { normalized, readStore, writeStore, type Store } from "../src/format.js";

function sampleStore(dim = 6): Store {
  const text = (seed: number) =>
    normalized(Float32Array.from({ length: dim }, (_, i) => Math.sin(seed + i) + 0.2));
  const vec = (seed: number) =>
    Float32Array.from({ length: dim }, (_, i) => 5 * Math.cos(seed * 3 + i));
  return {
    dim,
    classes: [
      { name: "macaw", textEmbedding: text(1) },
      { name: "lorikeet", textEmbedding: text(2) },
    ],
    records: [
      { classId: 0, split: 0, vector: vec(1) },
      { classId: 0, split: 0, vector: vec(2) },
      { classId: 0, split: 1, vector: vec(3) },
      { classId: 1, split: 0, vector: vec(4) },
      { classId: 1, split: 0, vector: vec(5) },
      { classId: 1, split: 1, vector: vec(6) },
    ],
  };
}

describe("store format", () => {
  it("round-trips exactly", () => {
    const dir = mkdtempSync(join(tmpdir(), "rapfemb-"));
    const path = join(dir, "toy.rapfemb");
    const store = sampleStore();
    writeStore(store, path);
    const loaded = readStore(path);
    expect(loaded.dim).toBe(store.dim);
    expect(loaded.classes.map((c) => c.name)).toEqual(["macaw", "lorikeet"]);
    loaded.classes.forEach((cls, i) => {
      expect(Array.from(cls.textEmbedding)).toEqual(Array.from(store.classes[i].textEmbedding));
    });
    loaded.records.forEach((rec, i) => {
      expect(rec.classId).toBe(store.records[i].classId);
      expect(rec.split).toBe(store.records[i].split);
      expect(Array.from(rec.vector)).toEqual(Array.from(store.records[i].vector));
    });
  });

  it("writes the documented byte layout", () => {
    const dir = mkdtempSync(join(tmpdir(), "rapfemb-"));
    const path = join(dir, "size.rapfemb");
    const store = sampleStore(8);
    writeStore(store, path);
    const catalogBytes = (2 + 5 + 32) + (2 + 8 + 32); // names "macaw", "lorikeet"
    const expected = 20 + catalogBytes + 8 + 6 * (4 + 1 + 32);
    expect(statSync(path).size).toBe(expected);
  });

  it("normalizes text embeddings to unit norm", () => {
    const raw = Float32Array.from([3, 4, 0, 0]);
    const unit = normalized(raw);
    const norm = Math.hypot(...unit);
    expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
    expect(unit[0]).toBeCloseTo(0.6, 6);
  });

  it("rejects malformed files", () => {
    const dir = mkdtempSync(join(tmpdir(), "rapfemb-"));
    const path = join(dir, "bad.bin");
    writeStore(sampleStore(), path);
    const truncated = join(dir, "short.bin");
    const bytes = require("node:fs").readFileSync(path);
    require("node:fs").writeFileSync(truncated, bytes.subarray(0, bytes.length - 2));
    expect(() => readStore(truncated)).toThrow(/record section/);
  });

  it("rejects dimension mismatches at write time", () => {
    const store = sampleStore();
    store.records[0] = { classId: 0, split: 0, vector: new Float32Array(3) };
    expect(() => writeStore(store, "/tmp/never.bin")).toThrow(/dim/);
  });
});
