/** Vector -> location token sequence, matching the core encoder. */

import { BoundHandle, DenseNetParams } from "./artifact.js";
import { DataFormatError, DimensionMismatchError } from "./errors.js";

function forward(net: DenseNetParams, input: Float64Array): Float64Array {
  let h = input;
  const nLayers = net.weights.length;
  for (let layer = 0; layer < nLayers; layer++) {
    const w = net.weights[layer];
    const b = net.biases[layer];
    const out = new Float64Array(b.length);
    for (let j = 0; j < out.length; j++) {
      let acc = 0.0;
      for (let i = 0; i < h.length; i++) {
        acc += h[i] * w[i][j];
      }
      acc += b[j];
      out[j] = layer < nLayers - 1 && acc < 0.0 ? 0.0 : acc;
    }
    h = out;
  }
  return h;
}

function nearestCodeword(residual: Float64Array, codebook: Float64Array[]): number {
  let best = 0;
  let bestDist = Infinity;
  for (let k = 0; k < codebook.length; k++) {
    const word = codebook[k];
    let d = 0.0;
    for (let i = 0; i < residual.length; i++) {
      const diff = word[i] - residual[i];
      d += diff * diff;
    }
    if (d < bestDist) {
      bestDist = d;
      best = k; // strict < keeps the lowest index on ties
    }
  }
  return best;
}

/** Codeword indices for one semantic vector. */
export function encode(handle: BoundHandle, vector: ArrayLike<number>): number[] {
  const inputDim = handle.config.encoder_dims[0];
  if (vector.length !== inputDim) {
    throw new DimensionMismatchError(
      `expected a vector of dimension ${inputDim}, got ${vector.length}`,
    );
  }
  const x = Float64Array.from(vector as ArrayLike<number>);
  for (const v of x) {
    if (!Number.isFinite(v)) {
      throw new DataFormatError("input vector has non-finite entries");
    }
  }
  let residual = forward(handle.encoder, x);
  const indices: number[] = [];
  for (const codebook of handle.codebooks) {
    const idx = nearestCodeword(residual, codebook);
    indices.push(idx);
    const word = codebook[idx];
    const next = new Float64Array(residual.length);
    for (let i = 0; i < residual.length; i++) {
      next[i] = residual[i] - word[i];
    }
    residual = next;
  }
  return indices;
}

/** Order-preserving batch encode. */
export function encodeBatch(handle: BoundHandle, vectors: ArrayLike<number>[]): number[][] {
  return vectors.map((v) => encode(handle, v));
}

/** Render indices as '<a_i><b_j>...' with consecutive letter prefixes. */
export function renderTokenIndices(indices: ArrayLike<number>): string {
  if (indices.length > 26) {
    throw new DataFormatError("token rendering supports at most 26 layers");
  }
  let out = "";
  for (let n = 0; n < indices.length; n++) {
    out += `<${String.fromCharCode(97 + n)}_${indices[n]}>`;
  }
  return out;
}
