/**
 * Backbone slots the extractor can fill.
 *
 * True DINO checkpoints are not bundled; each slot is served by the
 * deterministic descriptor in features.ts at the slot's output width, and
 * the recorded model tag carries a "surrogate" marker so files produced
 * here are never mistaken for real network embeddings downstream.
 */

export interface BackboneSpec {
  /** CLI-facing name. */
  slug: string;
  /** Output embedding width. */
  dim: number;
  /** Resample grids concatenated by the descriptor (384 dims each). */
  grids: readonly number[];
  /** Tag written into the emitted embedding file's "model" field. */
  modelTag: string;
}

export const BACKBONES: Record<string, BackboneSpec> = {
  'dino-vits16': {
    slug: 'dino-vits16',
    dim: 384,
    grids: [64],
    modelTag: 'dino-vits16-surrogate-v1',
  },
  'dino-vitb16': {
    slug: 'dino-vitb16',
    dim: 768,
    grids: [64, 32],
    modelTag: 'dino-vitb16-surrogate-v1',
  },
};

export const DEFAULT_BACKBONE = 'dino-vits16';

export function resolveBackbone(tag: string | undefined): BackboneSpec {
  const slug = tag ?? DEFAULT_BACKBONE;
  const spec = BACKBONES[slug];
  if (!spec) {
    const known = Object.keys(BACKBONES).sort().join(', ');
    throw new UsageError(`unknown backbone ${JSON.stringify(slug)} (known: ${known})`);
  }
  return spec;
}

/** Bad request input; the CLI maps this to exit code 2. */
export class UsageError extends Error {}
