/** Codebook artifact loading and validation. */

import { readFileSync } from "node:fs";

import { DataFormatError, VersionMismatchError } from "./errors.js";

export const SUPPORTED_ARTIFACT_VERSION = 1;
const CODEBOOK_FORMAT = "trajtok.codebook";

export interface DenseNetParams {
  dims: number[];
  weights: Float64Array[][]; // weights[layer][row] -> Float64Array of fan_out
  biases: Float64Array[];
}

export interface RQConfigRecord {
  n_layers: number;
  codebook_size: number;
  code_dim: number;
  encoder_dims: number[];
  alpha: number;
  learning_rate: number;
  batch_size: number;
  seed: number;
  epochs: number;
  weight_decay: number;
}

/** Immutable handle over a loaded codebook stack. */
export interface BoundHandle {
  readonly version: number;
  readonly config: RQConfigRecord;
  readonly codebooks: Float64Array[][]; // codebooks[layer][codeword]
  readonly encoder: DenseNetParams;
  readonly decoder: DenseNetParams;
}

function toMatrix(rows: number[][], what: string): Float64Array[] {
  if (!Array.isArray(rows)) {
    throw new DataFormatError(`${what}: expected a matrix`);
  }
  return rows.map((row) => Float64Array.from(row));
}

function toNet(rec: { dims: number[]; weights: number[][][]; biases: number[][] }): DenseNetParams {
  return {
    dims: rec.dims.map((d) => Number(d)),
    weights: rec.weights.map((w) => toMatrix(w, "network weights")),
    biases: rec.biases.map((b) => Float64Array.from(b)),
  };
}

export function loadCodebook(path: string): BoundHandle {
  let parsed: any;
  try {
    parsed = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new DataFormatError(`${path}: not readable as JSON (${String(err)})`);
  }
  if (parsed?.format !== CODEBOOK_FORMAT) {
    throw new DataFormatError(`${path}: not a codebook artifact`);
  }
  if (parsed.version !== SUPPORTED_ARTIFACT_VERSION) {
    throw new VersionMismatchError(
      `${path}: artifact version ${parsed.version} is not supported ` +
        `(expected ${SUPPORTED_ARTIFACT_VERSION})`,
    );
  }
  const config = parsed.config as RQConfigRecord;
  const codebooks: Float64Array[][] = parsed.codebooks.map((cb: number[][]) =>
    toMatrix(cb, "codebook"),
  );
  if (codebooks.length !== config.n_layers) {
    throw new DataFormatError(`${path}: codebook count does not match config`);
  }
  for (const cb of codebooks) {
    if (cb.length !== config.codebook_size || cb.some((w) => w.length !== config.code_dim)) {
      throw new DataFormatError(`${path}: codebook shape does not match config`);
    }
  }
  return {
    version: parsed.version,
    config,
    codebooks,
    encoder: toNet(parsed.encoder),
    decoder: toNet(parsed.decoder),
  };
}
