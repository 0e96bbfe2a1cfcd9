import { EncoderError } from "./types.js";

export interface Encoder {
  readonly name: string;
  readonly dim: number;
  encodeBatch(texts: string[]): Promise<Float32Array[]>;
}

const FNV_OFFSET = 0x811c9dc5;
const FNV_PRIME = 0x01000193;

function fnv1a(text: string): number {
  let hash = FNV_OFFSET;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, FNV_PRIME) >>> 0;
  }
  return hash >>> 0;
}

function* hashedFeatures(text: string): Generator<string> {
  const words = text.toLowerCase().split(/\s+/).filter((w) => w.length > 0);
  for (const word of words) {
    yield `w:${word}`;
    for (let i = 0; i + 3 <= word.length; i++) {
      yield `g:${word.slice(i, i + 3)}`;
    }
  }
}

/**
 * Deterministic offline encoder: word and character-trigram counts hashed
 * onto `dim` buckets. No semantics, but stable, fast, and unit-normalizable,
 * which is what the export pipeline and its consumers need for testing.
 */
export function hashEncoder(dim: number): Encoder {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new EncoderError(`hash encoder dimension must be a positive integer, got ${dim}`);
  }
  return {
    name: `hash-${dim}`,
    dim,
    async encodeBatch(texts: string[]): Promise<Float32Array[]> {
      return texts.map((text) => {
        const vec = new Float32Array(dim);
        let any = false;
        for (const feature of hashedFeatures(text)) {
          vec[fnv1a(feature) % dim] += 1;
          any = true;
        }
        if (!any) vec[fnv1a(text) % dim] = 1; // whitespace-only text still embeds
        return vec;
      });
    },
  };
}

/** Sentence-transformer encoder backed by @huggingface/transformers. */
async function transformersEncoder(model: string): Promise<Encoder> {
  let pipeline: any;
  try {
    ({ pipeline } = await import("@huggingface/transformers"));
  } catch (err) {
    throw new EncoderError(
      `encoder load failure: @huggingface/transformers is not installed (${(err as Error).message})`,
    );
  }
  let extractor: any;
  try {
    extractor = await pipeline("feature-extraction", model);
  } catch (err) {
    throw new EncoderError(`encoder load failure: cannot load ${model} (${(err as Error).message})`);
  }
  let dim = 0;
  const encodeBatch = async (texts: string[]): Promise<Float32Array[]> => {
    const output = await extractor(texts, { pooling: "mean", normalize: false });
    const [count, width] = output.dims.length === 2 ? output.dims : [1, output.dims[0]];
    dim = width;
    const flat = output.data as Float32Array;
    const rows: Float32Array[] = [];
    for (let i = 0; i < count; i++) {
      rows.push(Float32Array.from(flat.subarray(i * width, (i + 1) * width)));
    }
    return rows;
  };
  // probe once so the dimension is known before the first real batch
  await encodeBatch(["probe"]);
  if (dim < 1) throw new EncoderError(`encoder load failure: ${model} reports dimension 0`);
  return { name: model, dim, encodeBatch };
}

/**
 * Resolve a model name to an encoder. Names of the form ``hash-<dim>`` give
 * the deterministic offline encoder; anything else is loaded through
 * @huggingface/transformers (requires the package and model files).
 */
export async function loadEncoder(model: string): Promise<Encoder> {
  const match = /^hash-(\d+)$/.exec(model);
  if (match) return hashEncoder(Number(match[1]));
  return transformersEncoder(model);
}
