/**
 * Deterministic hand-crafted image descriptor.
 *
 * Fills the embedding-backbone slot without shipping pretrained network
 * weights. The descriptor is built from resampled luminance, oriented
 * gradients, and color statistics, then L2-normalized. Two properties are
 * load-bearing and tested:
 *
 *  - determinism: identical bytes in, bit-identical vector out (only
 *    +, -, *, / and sqrt are used, in fixed order, so results do not
 *    depend on engine-specific transcendental implementations);
 *  - fixed output width per backbone slot (384 or 768).
 */

import type { RgbImage } from './image.js';

/** One 384-wide descriptor per sampling grid; grids are concatenated. */
export const GRID_DESCRIPTOR_DIM = 384;

export function resizeBilinear(img: RgbImage, size: number): RgbImage {
  const { width, height, pixels } = img;
  const out = new Float64Array(size * size * 3);
  const xScale = width / size;
  const yScale = height / size;
  for (let y = 0; y < size; y++) {
    let sy = (y + 0.5) * yScale - 0.5;
    if (sy < 0) sy = 0;
    if (sy > height - 1) sy = height - 1;
    const y0 = Math.floor(sy);
    const y1 = y0 + 1 < height ? y0 + 1 : y0;
    const fy = sy - y0;
    for (let x = 0; x < size; x++) {
      let sx = (x + 0.5) * xScale - 0.5;
      if (sx < 0) sx = 0;
      if (sx > width - 1) sx = width - 1;
      const x0 = Math.floor(sx);
      const x1 = x0 + 1 < width ? x0 + 1 : x0;
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = pixels[3 * (y0 * width + x0) + c];
        const p01 = pixels[3 * (y0 * width + x1) + c];
        const p10 = pixels[3 * (y1 * width + x0) + c];
        const p11 = pixels[3 * (y1 * width + x1) + c];
        const top = p00 + (p01 - p00) * fx;
        const bottom = p10 + (p11 - p10) * fx;
        out[3 * (y * size + x) + c] = top + (bottom - top) * fy;
      }
    }
  }
  return { width: size, height: size, pixels: out };
}

function luminancePlane(img: RgbImage): Float64Array {
  const n = img.width * img.height;
  const lum = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    lum[i] =
      0.299 * img.pixels[3 * i] +
      0.587 * img.pixels[3 * i + 1] +
      0.114 * img.pixels[3 * i + 2];
  }
  return lum;
}

function histogramBin(value: number, bins: number): number {
  let b = Math.floor(value * bins);
  if (b >= bins) b = bins - 1;
  if (b < 0) b = 0;
  return b;
}

/**
 * Octant of the gradient direction, boundaries at 45-degree multiples.
 * Sign and magnitude comparisons only, no trigonometry.
 */
function orientationOctant(gx: number, gy: number): number {
  const ax = gx < 0 ? -gx : gx;
  const ay = gy < 0 ? -gy : gy;
  if (gx >= 0 && gy >= 0) return ay < ax ? 0 : 1;
  if (gx < 0 && gy >= 0) return ay >= ax ? 2 : 3;
  if (gx < 0) return ay < ax ? 4 : 5;
  return ay >= ax ? 6 : 7;
}

function l2NormalizeInPlace(vec: Float64Array, start: number, end: number): void {
  let sq = 0;
  for (let i = start; i < end; i++) sq += vec[i] * vec[i];
  if (sq > 0) {
    const inv = 1 / Math.sqrt(sq);
    for (let i = start; i < end; i++) vec[i] *= inv;
  }
}

function scaleInPlace(vec: Float64Array, start: number, end: number, factor: number): void {
  for (let i = start; i < end; i++) vec[i] *= factor;
}

/** 384 doubles describing one G x G resample of the image; G must be a multiple of 8. */
export function gridDescriptor(img: RgbImage, grid: number): Float64Array {
  if (grid % 8 !== 0 || grid < 8) {
    throw new Error(`grid size must be a positive multiple of 8, got ${grid}`);
  }
  const small = resizeBilinear(img, grid);
  const lum = luminancePlane(small);
  const g = grid;
  const n = g * g;

  // gradients: central differences inside, one-sided at the borders
  const gxPlane = new Float64Array(n);
  const gyPlane = new Float64Array(n);
  for (let y = 0; y < g; y++) {
    for (let x = 0; x < g; x++) {
      const i = y * g + x;
      const xl = x > 0 ? lum[i - 1] : lum[i];
      const xr = x < g - 1 ? lum[i + 1] : lum[i];
      const yu = y > 0 ? lum[i - g] : lum[i];
      const yd = y < g - 1 ? lum[i + g] : lum[i];
      gxPlane[i] = xr - xl;
      gyPlane[i] = yd - yu;
    }
  }

  const out = new Float64Array(GRID_DESCRIPTOR_DIM);
  let base = 0;

  // block 1: 8x8 cell mean luminance (64)
  {
    const cell = g / 8;
    for (let i = 0; i < n; i++) {
      const cy = Math.floor(Math.floor(i / g) / cell);
      const cx = Math.floor((i % g) / cell);
      out[base + cy * 8 + cx] += lum[i];
    }
    const inv = 1 / (cell * cell);
    scaleInPlace(out, base, base + 64, inv);
    l2NormalizeInPlace(out, base, base + 64);
    base += 64;
  }

  // block 2: magnitude-weighted orientation histogram, 4x4 cells x 8 octants (128)
  {
    const cell = g / 4;
    for (let i = 0; i < n; i++) {
      const gx = gxPlane[i];
      const gy = gyPlane[i];
      const mag = Math.sqrt(gx * gx + gy * gy);
      if (mag === 0) continue;
      const cy = Math.floor(Math.floor(i / g) / cell);
      const cx = Math.floor((i % g) / cell);
      out[base + (cy * 4 + cx) * 8 + orientationOctant(gx, gy)] += mag;
    }
    l2NormalizeInPlace(out, base, base + 128);
    base += 128;
  }

  // block 3: global 64-bin luminance histogram (64)
  {
    for (let i = 0; i < n; i++) out[base + histogramBin(lum[i], 64)] += 1;
    scaleInPlace(out, base, base + 64, 1 / n);
    l2NormalizeInPlace(out, base, base + 64);
    base += 64;
  }

  // block 4: 16-bin histogram per color channel (48)
  {
    for (let i = 0; i < n; i++) {
      for (let c = 0; c < 3; c++) {
        out[base + c * 16 + histogramBin(small.pixels[3 * i + c], 16)] += 1;
      }
    }
    scaleInPlace(out, base, base + 48, 1 / n);
    l2NormalizeInPlace(out, base, base + 48);
    scaleInPlace(out, base, base + 48, 0.75);
    base += 48;
  }

  // block 5: 4x4 cell luminance standard deviation (16)
  {
    const cell = g / 4;
    const sums = new Float64Array(16);
    const sqSums = new Float64Array(16);
    for (let i = 0; i < n; i++) {
      const cy = Math.floor(Math.floor(i / g) / cell);
      const cx = Math.floor((i % g) / cell);
      sums[cy * 4 + cx] += lum[i];
      sqSums[cy * 4 + cx] += lum[i] * lum[i];
    }
    const count = cell * cell;
    for (let k = 0; k < 16; k++) {
      const mean = sums[k] / count;
      const variance = sqSums[k] / count - mean * mean;
      out[base + k] = variance > 0 ? Math.sqrt(variance) : 0;
    }
    l2NormalizeInPlace(out, base, base + 16);
    scaleInPlace(out, base, base + 16, 0.5);
    base += 16;
  }

  // block 6: 4x4 cell mean gradient magnitude (16)
  {
    const cell = g / 4;
    for (let i = 0; i < n; i++) {
      const gx = gxPlane[i];
      const gy = gyPlane[i];
      const cy = Math.floor(Math.floor(i / g) / cell);
      const cx = Math.floor((i % g) / cell);
      out[base + cy * 4 + cx] += Math.sqrt(gx * gx + gy * gy);
    }
    scaleInPlace(out, base, base + 16, 1 / (cell * cell));
    l2NormalizeInPlace(out, base, base + 16);
    scaleInPlace(out, base, base + 16, 0.5);
    base += 16;
  }

  // block 7: 2x2 cells x 12-bin chromaticity histogram (48)
  {
    const cell = g / 2;
    for (let i = 0; i < n; i++) {
      const r = small.pixels[3 * i];
      const gr = small.pixels[3 * i + 1];
      const b = small.pixels[3 * i + 2];
      const s = r + gr + b;
      let pr: number, pg: number;
      if (s > 0) {
        pr = r / s;
        pg = gr / s;
      } else {
        pr = 1 / 3;
        pg = 1 / 3;
      }
      const bin = histogramBin(pr, 4) * 3 + histogramBin(pg, 3);
      const cy = Math.floor(Math.floor(i / g) / cell);
      const cx = Math.floor((i % g) / cell);
      out[base + (cy * 2 + cx) * 12 + bin] += 1;
    }
    scaleInPlace(out, base, base + 48, 1 / n);
    l2NormalizeInPlace(out, base, base + 48);
    scaleInPlace(out, base, base + 48, 0.75);
    base += 48;
  }

  return out;
}

/** Concatenated grid descriptors, L2-normalized to unit length. */
export function extractFeatures(img: RgbImage, grids: readonly number[]): Float64Array {
  const out = new Float64Array(GRID_DESCRIPTOR_DIM * grids.length);
  grids.forEach((grid, k) => {
    out.set(gridDescriptor(img, grid), k * GRID_DESCRIPTOR_DIM);
  });
  // the luminance histogram block always carries mass, so the norm is nonzero
  l2NormalizeInPlace(out, 0, out.length);
  return out;
}
