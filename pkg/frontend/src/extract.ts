import { mkdtempSync, readFileSync, renameSync, rmSync, writeFileSync } from 'node:fs';
import { dirname, join } from 'node:path';

import { UsageError, resolveBackbone } from './backbones.js';
import { extractFeatures } from './features.js';
import { decodeImage } from './image.js';
import { validateEmbeddingFile, type EmbeddingFile } from './schema.js';

export interface ExtractRequest {
  imagePath: string;
  /** Backbone slot; defaults to the small ViT-16 slot (dim 384). */
  backboneTag?: string;
  outputPath: string;
}

/**
 * Decode the image, run the descriptor, and write the embedding JSON.
 * Output is written atomically (temp file + rename).
 */
export function extract(request: ExtractRequest): EmbeddingFile {
  const spec = resolveBackbone(request.backboneTag);
  let data: Buffer;
  try {
    data = readFileSync(request.imagePath);
  } catch (err) {
    // unreadable input is a request problem, not an I/O crash
    throw new UsageError(`cannot read image ${request.imagePath}: ${(err as Error).message}`);
  }
  const image = decodeImage(new Uint8Array(data.buffer, data.byteOffset, data.length));
  const features = extractFeatures(image, spec.grids);

  const file: EmbeddingFile = {
    model: spec.modelTag,
    dim: spec.dim,
    embedding: Array.from(features),
    source: request.imagePath,
  };
  validateEmbeddingFile(file);

  const tmpDir = mkdtempSync(join(dirname(request.outputPath) || '.', '.tmp-embed-'));
  const tmpFile = join(tmpDir, 'out.json');
  try {
    writeFileSync(tmpFile, JSON.stringify(file) + '\n');
    renameSync(tmpFile, request.outputPath);
  } finally {
    rmSync(tmpDir, { recursive: true, force: true });
  }
  return file;
}
