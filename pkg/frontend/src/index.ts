export { decodeImage, ImageDecodeError, type RgbImage } from './image.js';
export {
  extractFeatures,
  gridDescriptor,
  resizeBilinear,
  GRID_DESCRIPTOR_DIM,
} from './features.js';
export {
  BACKBONES,
  DEFAULT_BACKBONE,
  resolveBackbone,
  UsageError,
  type BackboneSpec,
} from './backbones.js';
export { embeddingFileSchema, validateEmbeddingFile, l2Norm, type EmbeddingFile } from './schema.js';
export { extract, type ExtractRequest } from './extract.js';
export {
  previewPair,
  resolvePipeline,
  PipelineError,
  PipelineUnavailableError,
  type PreviewRequest,
} from './preview.js';
export { main } from './cli.js';
