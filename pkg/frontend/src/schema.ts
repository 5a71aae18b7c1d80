/**
 * Embedding file schema shared with the planner's discrepancy reader.
 */

import { z } from 'zod';

export const embeddingFileSchema = z
  .object({
    model: z.string(),
    dim: z.number().int().positive(),
    embedding: z.array(z.number().finite()),
    source: z.string(),
  })
  .refine((obj) => obj.embedding.length === obj.dim, {
    message: 'embedding length must equal dim',
  });

export type EmbeddingFile = z.infer<typeof embeddingFileSchema>;

export function validateEmbeddingFile(obj: unknown): EmbeddingFile {
  return embeddingFileSchema.parse(obj);
}

/** Unit-norm check used by tests and the extract postcondition. */
export function l2Norm(values: readonly number[]): number {
  let sq = 0;
  for (const v of values) sq += v * v;
  return Math.sqrt(sq);
}
