/** Distribution and sequence metrics, numerically matching the core. */

import { DataFormatError } from "./errors.js";

/** Discrete distribution as label -> probability. */
export type Dist = Record<string, number>;

function alignSupports(p: Dist, q: Dist): [number[], number[]] {
  const labels = Array.from(new Set([...Object.keys(p), ...Object.keys(q)])).sort();
  const pa = labels.map((l) => p[l] ?? 0.0);
  const qa = labels.map((l) => q[l] ?? 0.0);
  for (const v of [...pa, ...qa]) {
    if (!Number.isFinite(v) || v < 0) {
      throw new DataFormatError("probabilities must be finite and non-negative");
    }
  }
  return [pa, qa];
}

/** Total variation distance over the union-aligned support. */
export function tvd(p: Dist, q: Dist): number {
  const [pa, qa] = alignSupports(p, q);
  let total = 0.0;
  for (let i = 0; i < pa.length; i++) {
    total += Math.abs(pa[i] - qa[i]);
  }
  return 0.5 * total;
}

/** KL(P || Q) with the 0*log(0/.) = 0 convention. */
export function klDivergence(p: number[], q: number[], logBase = 2.0): number {
  if (p.length !== q.length) {
    throw new DataFormatError("KL inputs must share a support");
  }
  let total = 0.0;
  for (let i = 0; i < p.length; i++) {
    if (p[i] === 0.0) continue;
    if (q[i] === 0.0) {
      throw new DataFormatError("KL undefined: P has mass where Q has none");
    }
    total += p[i] * Math.log(p[i] / q[i]);
  }
  return total / Math.log(logBase);
}

/** Jensen-Shannon distance (sqrt of the divergence), base-2 logs by default. */
export function jsd(p: Dist, q: Dist, logBase = 2.0): number {
  const [pa, qa] = alignSupports(p, q);
  let div = 0.0;
  for (let i = 0; i < pa.length; i++) {
    const s = pa[i] + qa[i];
    if (pa[i] > 0.0) {
      div += 0.5 * pa[i] * Math.log((2.0 * pa[i]) / s);
    }
    if (qa[i] > 0.0) {
      div += 0.5 * qa[i] * Math.log((2.0 * qa[i]) / s);
    }
  }
  div /= Math.log(logBase);
  return Math.sqrt(Math.max(div, 0.0));
}

function ngramCounts(seq: ReadonlyArray<string | number>, n: number): Map<string, number> {
  const counts = new Map<string, number>();
  for (let i = 0; i + n <= seq.length; i++) {
    const key = JSON.stringify(seq.slice(i, i + n));
    counts.set(key, (counts.get(key) ?? 0) + 1);
  }
  return counts;
}

/**
 * BLEU with uniform weights, clipped modified precisions, and brevity
 * penalty min(1, e^(1 - r/c)). Any zero precision yields 0 unless a
 * positive smoothing epsilon is supplied.
 */
export function bleu(
  candidate: ReadonlyArray<string | number>,
  reference: ReadonlyArray<string | number>,
  maxN = 4,
  smoothEps = 0.0,
): number {
  if (candidate.length === 0) {
    throw new DataFormatError("empty candidate sequence");
  }
  if (maxN < 1) {
    throw new DataFormatError("maxN must be >= 1");
  }
  const c = candidate.length;
  const r = reference.length;
  let logPrecisionSum = 0.0;
  for (let n = 1; n <= maxN; n++) {
    const candCounts = ngramCounts(candidate, n);
    const refCounts = ngramCounts(reference, n);
    let clipped = 0;
    for (const [gram, count] of candCounts) {
      clipped += Math.min(count, refCounts.get(gram) ?? 0);
    }
    const total = Math.max(c - n + 1, 0);
    const numer = total === 0 ? smoothEps : clipped > 0 ? clipped : smoothEps;
    if (numer <= 0) {
      return 0.0;
    }
    logPrecisionSum += Math.log(numer / Math.max(total, 1));
  }
  const bp = Math.min(1.0, Math.exp(1.0 - r / c));
  return bp * Math.exp(logPrecisionSum / maxN);
}

/** Fraction of cases whose truth appears in the top-k candidates. */
export function hitRateAtK(
  rankings: ReadonlyArray<ReadonlyArray<string | number>>,
  truths: ReadonlyArray<string | number>,
  k: number,
): number {
  if (k < 1) {
    throw new DataFormatError("k must be >= 1");
  }
  if (rankings.length === 0 || rankings.length !== truths.length) {
    throw new DataFormatError("rankings and truths must be non-empty and equal-length");
  }
  let hits = 0;
  for (let i = 0; i < rankings.length; i++) {
    if (rankings[i].length === 0) {
      throw new DataFormatError("empty ranking");
    }
    if (rankings[i].slice(0, k).includes(truths[i])) {
      hits += 1;
    }
  }
  return hits / rankings.length;
}
