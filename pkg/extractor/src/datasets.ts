/**
 * Dataset readers. Every reader yields the same shape: an ordered class
 * list, each with lazily-loaded train/test images. Class ids are assigned
 * by sorted class name, so repeated extractions are stable.
 *
 * - "folder" (also imagenet-r and cub200 once arranged the usual way):
 *   root/train/<class>/* and root/test/<class>/* with common image
 *   extensions.
 * - "cifar100": the binary distribution — train.bin and test.bin holding
 *   3074-byte records (coarse label, fine label, 32x32x3 planar RGB) plus
 *   fine_label_names.txt.
 */

import { readFileSync, readdirSync, statSync, existsSync } from "node:fs";
import { join } from "node:path";

import type { ImageInput } from "./embedders.js";

export interface DatasetImage {
  split: 0 | 1;
  load: () => ImageInput;
}

export interface DatasetClass {
  name: string;
  images: DatasetImage[];
}

export type DatasetKind = "cifar100" | "imagenet-r" | "cub200" | "folder";

const IMAGE_EXTENSIONS = new Set([".jpg", ".jpeg", ".png", ".bmp", ".webp"]);

function isImageFile(name: string): boolean {
  const dot = name.lastIndexOf(".");
  return dot >= 0 && IMAGE_EXTENSIONS.has(name.slice(dot).toLowerCase());
}

function listClassDirs(root: string): string[] {
  return readdirSync(root)
    .filter((entry) => statSync(join(root, entry)).isDirectory())
    .sort();
}

export function loadFolderDataset(root: string): DatasetClass[] {
  const trainRoot = join(root, "train");
  const testRoot = join(root, "test");
  if (!existsSync(trainRoot) || !existsSync(testRoot))
    throw new Error(`${root}: expected train/ and test/ subdirectories of class folders`);
  const names = new Set<string>([...listClassDirs(trainRoot), ...listClassDirs(testRoot)]);
  if (names.size === 0) throw new Error(`${root}: no class folders found`);

  const classes: DatasetClass[] = [];
  for (const name of [...names].sort()) {
    const images: DatasetImage[] = [];
    for (const [splitRoot, split] of [
      [trainRoot, 0],
      [testRoot, 1],
    ] as const) {
      const dir = join(splitRoot, name);
      if (!existsSync(dir)) continue;
      for (const file of readdirSync(dir).filter(isImageFile).sort()) {
        const path = join(dir, file);
        images.push({ split, load: () => ({ kind: "file", path, bytes: readFileSync(path) }) });
      }
    }
    classes.push({ name, images });
  }
  return classes;
}

const CIFAR_RECORD = 2 + 3 * 32 * 32;

function cifarRecords(path: string, split: 0 | 1, perClass: DatasetImage[][]): void {
  const buf = readFileSync(path);
  if (buf.length % CIFAR_RECORD !== 0)
    throw new Error(`${path}: size ${buf.length} is not a multiple of ${CIFAR_RECORD}`);
  const count = buf.length / CIFAR_RECORD;
  for (let r = 0; r < count; r++) {
    const off = r * CIFAR_RECORD;
    const fine = buf.readUInt8(off + 1);
    if (fine >= perClass.length)
      throw new Error(`${path}: record ${r} has label ${fine} outside the name list`);
    perClass[fine].push({
      split,
      load: () => {
        // planar RGB -> interleaved, as image processors expect
        const planes = buf.subarray(off + 2, off + CIFAR_RECORD);
        const pixels = new Uint8Array(3 * 32 * 32);
        for (let p = 0; p < 32 * 32; p++) {
          pixels[3 * p] = planes[p];
          pixels[3 * p + 1] = planes[1024 + p];
          pixels[3 * p + 2] = planes[2048 + p];
        }
        return { kind: "pixels", width: 32, height: 32, channels: 3, pixels };
      },
    });
  }
}

export function loadCifar100(root: string): DatasetClass[] {
  const namesPath = join(root, "fine_label_names.txt");
  if (!existsSync(namesPath))
    throw new Error(`${root}: missing fine_label_names.txt (binary CIFAR-100 layout)`);
  const names = readFileSync(namesPath, "utf-8")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  if (names.length === 0) throw new Error(`${namesPath}: no class names`);

  const perClass: DatasetImage[][] = names.map(() => []);
  cifarRecords(join(root, "train.bin"), 0, perClass);
  cifarRecords(join(root, "test.bin"), 1, perClass);
  // CIFAR labels index the name list directly; keep that order
  return names.map((name, i) => ({ name, images: perClass[i] }));
}

export function loadDataset(kind: DatasetKind, root: string): DatasetClass[] {
  if (kind === "cifar100") return loadCifar100(root);
  // imagenet-r and cub200 are distributed as folders of class folders; once
  // split into train/ and test/ they read identically to a generic folder set
  return loadFolderDataset(root);
}
