/**
 * Embedding backends behind one interface.
 *
 * `clip:<model-id>` uses @xenova/transformers (install it separately; model
 * weights are fetched from the Hugging Face hub or a local cache on first
 * use). `hash` is a deterministic, dependency-free embedder for tests and
 * toy pipelines: vectors are derived from a SHA-256 of the input, so the
 * same input always maps to the same vector and nothing is downloaded.
 */

import { createHash } from "node:crypto";

export type ImageInput =
  | { kind: "file"; path: string; bytes: Buffer }
  | { kind: "pixels"; width: number; height: number; channels: number; pixels: Uint8Array };

export interface Embedder {
  readonly dim: number;
  embedText(text: string): Promise<Float32Array>;
  embedImage(image: ImageInput): Promise<Float32Array>;
}

/** Expand a SHA-256 digest into `dim` floats via counter-mode rehashing. */
function hashToFloats(seed: Buffer, dim: number, scale: number): Float32Array {
  const out = new Float32Array(dim);
  let block = Buffer.alloc(0);
  let counter = 0;
  let used = 32;
  for (let i = 0; i < dim; i++) {
    if (used + 4 > block.length) {
      const h = createHash("sha256");
      h.update(seed);
      const ctr = Buffer.alloc(4);
      ctr.writeUInt32LE(counter++);
      h.update(ctr);
      block = h.digest();
      used = 0;
    }
    const u = block.readUInt32LE(used);
    used += 4;
    // uniform in [-1, 1), scaled; adequate as a stand-in embedding
    out[i] = scale * ((u / 0xffffffff) * 2 - 1);
  }
  return out;
}

export class HashEmbedder implements Embedder {
  readonly dim: number;

  constructor(dim = 512) {
    this.dim = dim;
  }

  async embedText(text: string): Promise<Float32Array> {
    return hashToFloats(
      createHash("sha256").update("text:").update(text, "utf-8").digest(),
      this.dim,
      1.0,
    );
  }

  async embedImage(image: ImageInput): Promise<Float32Array> {
    const h = createHash("sha256").update("image:");
    if (image.kind === "file") h.update(image.bytes);
    else h.update(Buffer.from(image.pixels));
    // image embeddings are unnormalized; give them a backbone-like scale
    return hashToFloats(h.digest(), this.dim, 8.0);
  }
}

interface ClipModules {
  tokenizer: any;
  textModel: any;
  processor: any;
  visionModel: any;
  rawImage: any;
}

export class ClipEmbedder implements Embedder {
  readonly dim: number;
  private readonly mods: ClipModules;

  private constructor(mods: ClipModules, dim: number) {
    this.mods = mods;
    this.dim = dim;
  }

  /**
   * Loads a CLIP checkpoint (e.g. "Xenova/clip-vit-base-patch16", the
   * ViT-B/16 weights) through @xenova/transformers. Raises a descriptive
   * error when the package is not installed or the weights cannot be
   * fetched.
   */
  static async load(modelId: string, device?: string): Promise<ClipEmbedder> {
    let tf: any;
    try {
      tf = await import("@xenova/transformers");
    } catch {
      throw new Error(
        "the clip backend needs @xenova/transformers; run `npm install @xenova/transformers` " +
          "or use --model hash for the deterministic test embedder",
      );
    }
    if (device) tf.env.backends ??= {};
    const tokenizer = await tf.AutoTokenizer.from_pretrained(modelId);
    const textModel = await tf.CLIPTextModelWithProjection.from_pretrained(modelId);
    const processor = await tf.AutoProcessor.from_pretrained(modelId);
    const visionModel = await tf.CLIPVisionModelWithProjection.from_pretrained(modelId);
    const probe = await textModel(tokenizer(["probe"], { padding: true, truncation: true }));
    const dim = probe.text_embeds.dims.at(-1);
    return new ClipEmbedder(
      { tokenizer, textModel, processor, visionModel, rawImage: tf.RawImage },
      dim,
    );
  }

  async embedText(text: string): Promise<Float32Array> {
    const inputs = this.mods.tokenizer([text], { padding: true, truncation: true });
    const out = await this.mods.textModel(inputs);
    return new Float32Array(out.text_embeds.data);
  }

  async embedImage(image: ImageInput): Promise<Float32Array> {
    let raw;
    if (image.kind === "file") {
      raw = await this.mods.rawImage.read(image.path);
    } else {
      raw = new this.mods.rawImage(image.pixels, image.width, image.height, image.channels);
    }
    const inputs = await this.mods.processor(raw);
    const out = await this.mods.visionModel(inputs);
    return new Float32Array(out.image_embeds.data);
  }
}

export async function makeEmbedder(model: string, dim: number, device?: string): Promise<Embedder> {
  if (model === "hash") return new HashEmbedder(dim);
  return ClipEmbedder.load(model, device);
}
