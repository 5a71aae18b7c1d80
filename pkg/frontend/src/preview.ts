/**
 * Best-effort preview-image generation through an external diffusion
 * pipeline. The toolkit itself never runs diffusion; it shells out to an
 * executable that accepts
 *
 *   <pipeline> --prompt <s> --lora <p> --seed <n> --out <image path>
 *
 * and writes one image per call. The executable comes from --pipeline or
 * the EST_EMBED_PIPELINE environment variable.
 */

import { spawnSync } from 'node:child_process';
import { accessSync, constants, existsSync, mkdirSync } from 'node:fs';
import { join } from 'node:path';

/** No usable pipeline executable; the CLI maps this to exit code 4. */
export class PipelineUnavailableError extends Error {}

/** The pipeline ran and failed, or broke its output contract. */
export class PipelineError extends Error {}

export interface PreviewRequest {
  prompt: string;
  contentLora: string;
  styleLora: string;
  seed: number;
  outDir: string;
  pipeline?: string;
}

export function resolvePipeline(explicit?: string): string {
  const candidate = explicit ?? process.env.EST_EMBED_PIPELINE;
  if (!candidate) {
    throw new PipelineUnavailableError(
      'pipeline unavailable: pass --pipeline or set EST_EMBED_PIPELINE',
    );
  }
  try {
    accessSync(candidate, constants.X_OK);
  } catch {
    throw new PipelineUnavailableError(
      `pipeline unavailable: ${candidate} is not an executable`,
    );
  }
  return candidate;
}

/** One image per single-LoRA configuration, same prompt and seed for both. */
export function previewPair(request: PreviewRequest): [string, string] {
  const pipeline = resolvePipeline(request.pipeline);
  mkdirSync(request.outDir, { recursive: true });

  const outputs: string[] = [];
  for (const [role, lora] of [
    ['content', request.contentLora],
    ['style', request.styleLora],
  ] as const) {
    const out = join(request.outDir, `${role}.png`);
    const run = spawnSync(
      pipeline,
      ['--prompt', request.prompt, '--lora', lora, '--seed', String(request.seed), '--out', out],
      { stdio: ['ignore', 'inherit', 'inherit'] },
    );
    if (run.error) {
      throw new PipelineError(`pipeline failed to start: ${run.error.message}`);
    }
    if (run.status !== 0) {
      throw new PipelineError(`pipeline exited with status ${run.status} for ${role} image`);
    }
    if (!existsSync(out)) {
      throw new PipelineError(`pipeline reported success but wrote no file at ${out}`);
    }
    outputs.push(out);
  }
  return [outputs[0], outputs[1]];
}
