/**
 * RAPF-EMB v1 binary store, bit-compatible with the training engine's loader.
 *
 * Layout (little-endian):
 *   magic        8 bytes ASCII "RAPFEMB1"
 *   version      u32 = 1
 *   dim          u32
 *   num_classes  u32
 *   per class:   u16 name byte length, UTF-8 name, dim x f32 text embedding
 *   num_records  u64
 *   per record:  u32 class_id, u8 split (0=train, 1=test), dim x f32 vector
 *
 * Text embeddings are L2-normalized before writing; image embeddings are
 * written exactly as produced by the backbone.
 */

import { writeFileSync, readFileSync } from "node:fs";

export const MAGIC = "RAPFEMB1";
export const VERSION = 1;
export const SPLIT_TRAIN = 0;
export const SPLIT_TEST = 1;

export interface StoreClass {
  name: string;
  textEmbedding: Float32Array; // stored unit-norm
}

export interface StoreRecord {
  classId: number;
  split: 0 | 1;
  vector: Float32Array;
}

export interface Store {
  dim: number;
  classes: StoreClass[];
  records: StoreRecord[];
}

export function normalized(vector: ArrayLike<number>): Float32Array {
  let sumSq = 0;
  for (let i = 0; i < vector.length; i++) sumSq += vector[i] * vector[i];
  const norm = Math.sqrt(sumSq);
  if (!(norm > 0)) throw new Error("cannot normalize a zero text embedding");
  const out = new Float32Array(vector.length);
  for (let i = 0; i < vector.length; i++) out[i] = vector[i] / norm;
  return out;
}

export function writeStore(store: Store, path: string): void {
  const { dim, classes, records } = store;
  for (const cls of classes) {
    if (cls.textEmbedding.length !== dim)
      throw new Error(`class ${cls.name}: text embedding dim ${cls.textEmbedding.length} != ${dim}`);
  }
  for (const rec of records) {
    if (rec.vector.length !== dim)
      throw new Error(`record of class ${rec.classId}: vector dim ${rec.vector.length} != ${dim}`);
    if (rec.classId < 0 || rec.classId >= classes.length)
      throw new Error(`record references class ${rec.classId} outside catalog`);
  }

  const nameBufs = classes.map((c) => Buffer.from(c.name, "utf-8"));
  let size = 8 + 12;
  for (const nb of nameBufs) size += 2 + nb.length + 4 * dim;
  size += 8 + records.length * (4 + 1 + 4 * dim);

  const buf = Buffer.alloc(size);
  let off = 0;
  off += buf.write(MAGIC, off, "ascii");
  off = buf.writeUInt32LE(VERSION, off);
  off = buf.writeUInt32LE(dim, off);
  off = buf.writeUInt32LE(classes.length, off);
  classes.forEach((cls, i) => {
    const nb = nameBufs[i];
    if (nb.length > 0xffff) throw new Error(`class name too long: ${cls.name}`);
    off = buf.writeUInt16LE(nb.length, off);
    off += nb.copy(buf, off);
    for (let d = 0; d < dim; d++) off = buf.writeFloatLE(cls.textEmbedding[d], off);
  });
  off = Number(buf.writeBigUInt64LE(BigInt(records.length), off));
  for (const rec of records) {
    off = buf.writeUInt32LE(rec.classId, off);
    off = buf.writeUInt8(rec.split, off);
    for (let d = 0; d < dim; d++) off = buf.writeFloatLE(rec.vector[d], off);
  }
  if (off !== size) throw new Error(`internal writer error: wrote ${off} of ${size} bytes`);
  writeFileSync(path, buf);
}

export function readStore(path: string): Store {
  const buf = readFileSync(path);
  if (buf.length < 20 || buf.toString("ascii", 0, 8) !== MAGIC)
    throw new Error(`${path}: not a RAPF-EMB file`);
  let off = 8;
  const version = buf.readUInt32LE(off);
  off += 4;
  if (version !== VERSION) throw new Error(`${path}: unsupported version ${version}`);
  const dim = buf.readUInt32LE(off);
  off += 4;
  const numClasses = buf.readUInt32LE(off);
  off += 4;

  const classes: StoreClass[] = [];
  for (let i = 0; i < numClasses; i++) {
    const nameLen = buf.readUInt16LE(off);
    off += 2;
    const name = buf.toString("utf-8", off, off + nameLen);
    off += nameLen;
    const textEmbedding = new Float32Array(dim);
    for (let d = 0; d < dim; d++) {
      textEmbedding[d] = buf.readFloatLE(off);
      off += 4;
    }
    classes.push({ name, textEmbedding });
  }

  const numRecords = Number(buf.readBigUInt64LE(off));
  off += 8;
  const expected = off + numRecords * (4 + 1 + 4 * dim);
  if (expected !== buf.length)
    throw new Error(`${path}: record section holds ${buf.length - off} bytes, expected ${expected - off}`);
  const records: StoreRecord[] = [];
  for (let r = 0; r < numRecords; r++) {
    const classId = buf.readUInt32LE(off);
    off += 4;
    const split = buf.readUInt8(off) as 0 | 1;
    off += 1;
    const vector = new Float32Array(dim);
    for (let d = 0; d < dim; d++) {
      vector[d] = buf.readFloatLE(off);
      off += 4;
    }
    records.push({ classId, split, vector });
  }
  return { dim, classes, records };
}
