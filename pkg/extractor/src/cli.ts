#!/usr/bin/env node
/** CLI: rapf-extract extract --dataset <kind> --root <dir> --out <file> */

import { parseArgs } from "node:util";

import { runExtract } from "./extract.js";
import type { DatasetKind } from "./datasets.js";

const USAGE = `usage: rapf-extract extract --dataset cifar100|imagenet-r|cub200|folder \\
    --root <dataset dir> --out <file.rapfemb> \\
    [--model Xenova/clip-vit-base-patch16 | hash] \\
    [--template "a photo of a [CLS]"] [--device cpu] [--hash-dim 512]`;

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (command !== "extract") {
    console.error(USAGE);
    return 2;
  }
  const { values } = parseArgs({
    args: rest,
    options: {
      dataset: { type: "string" },
      root: { type: "string" },
      model: { type: "string", default: "Xenova/clip-vit-base-patch16" },
      template: { type: "string", default: "a photo of a [CLS]" },
      out: { type: "string" },
      device: { type: "string" },
      "hash-dim": { type: "string", default: "512" },
    },
  });
  if (!values.dataset || !values.root || !values.out) {
    console.error(USAGE);
    return 2;
  }
  try {
    const summary = await runExtract({
      dataset: values.dataset as DatasetKind,
      root: values.root,
      model: values.model!,
      template: values.template!,
      out: values.out,
      device: values.device,
      hashDim: Number(values["hash-dim"]),
    });
    console.log(
      `wrote ${values.out}: ${summary.classes} classes, dim ${summary.dim}, ` +
        `${summary.trainRecords} train + ${summary.testRecords} test records`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "",
);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
