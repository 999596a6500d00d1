/**
 * Extraction job: run every class name through the prompt template and the
 * text encoder, every image through the image encoder, and write a
 * RAPF-EMB v1 file. Text embeddings are normalized before writing; image
 * embeddings are written raw.
 */

import { makeEmbedder, type Embedder } from "./embedders.js";
import { loadDataset, type DatasetKind } from "./datasets.js";
import { normalized, writeStore, SPLIT_TRAIN, type Store, type StoreRecord } from "./format.js";

export interface ExtractJob {
  dataset: DatasetKind;
  root: string;
  model: string; // "hash" or a CLIP checkpoint id (ViT-B/16 by default)
  template: string; // must contain exactly one [CLS] placeholder
  out: string;
  device?: string;
  hashDim?: number; // dimension of the hash embedder
}

export function fillTemplate(template: string, className: string): string {
  const first = template.indexOf("[CLS]");
  if (first < 0 || template.indexOf("[CLS]", first + 1) >= 0)
    throw new Error(`template must contain exactly one [CLS] placeholder: ${template}`);
  return template.replace("[CLS]", className);
}

export interface ExtractSummary {
  classes: number;
  dim: number;
  trainRecords: number;
  testRecords: number;
}

export async function runExtract(
  job: ExtractJob,
  embedder?: Embedder,
): Promise<ExtractSummary> {
  fillTemplate(job.template, "probe"); // fail fast on a bad template
  const classes = loadDataset(job.dataset, job.root);
  const backend = embedder ?? (await makeEmbedder(job.model, job.hashDim ?? 512, job.device));

  const store: Store = { dim: backend.dim, classes: [], records: [] };
  let trainRecords = 0;
  for (let classId = 0; classId < classes.length; classId++) {
    const cls = classes[classId];
    const text = await backend.embedText(fillTemplate(job.template, cls.name));
    store.classes.push({ name: cls.name, textEmbedding: normalized(text) });
    for (const image of cls.images) {
      const vector = await backend.embedImage(image.load());
      store.records.push({ classId, split: image.split, vector } as StoreRecord);
      if (image.split === SPLIT_TRAIN) trainRecords++;
    }
  }
  writeStore(store, job.out);
  return {
    classes: classes.length,
    dim: backend.dim,
    trainRecords,
    testRecords: store.records.length - trainRecords,
  };
}
