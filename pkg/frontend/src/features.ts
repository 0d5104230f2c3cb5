/** Trajectory feature extraction, mirroring the core definitions. */

import { DataFormatError } from "./errors.js";

export interface TimePeriod {
  name: string;
  ranges: [number, number][]; // half-open slot ranges
}

/** night 22:00-06:00, morning, afternoon, evening. */
export const DEFAULT_PERIODS: TimePeriod[] = [
  { name: "night", ranges: [[44, 48], [0, 12]] },
  { name: "morning", ranges: [[12, 24]] },
  { name: "afternoon", ranges: [[24, 36]] },
  { name: "evening", ranges: [[36, 44]] },
];

export type VisitPoint = [slot: number, location: string];

export interface FeatureSet {
  frequentLocations: string[];
  periodProbSteps: Record<string, number>; // multiples of 5%
  periodFrequent: Record<string, string[]>;
  length: number;
}

function inPeriod(period: TimePeriod, slot: number): boolean {
  return period.ranges.some(([lo, hi]) => lo <= slot && slot < hi);
}

/** Round count/total to the nearest 5% step, half up (integer-exact). */
export function roundToFivePercent(count: number, total: number): number {
  if (total <= 0) {
    throw new DataFormatError("total must be positive");
  }
  return Math.floor((count * 40 + total) / (2 * total));
}

function frequent(points: VisitPoint[], cap: number | null): string[] {
  const counts = new Map<string, number>();
  const firstSlot = new Map<string, number>();
  for (const [slot, key] of points) {
    counts.set(key, (counts.get(key) ?? 0) + 1);
    const seen = firstSlot.get(key);
    if (seen === undefined || slot < seen) {
      firstSlot.set(key, slot);
    }
  }
  const repeated = Array.from(counts.entries())
    .filter(([, c]) => c > 1)
    .map(([k]) => k)
    .sort((a, b) => {
      const byCount = (counts.get(b) ?? 0) - (counts.get(a) ?? 0);
      if (byCount !== 0) return byCount;
      const byFirst = (firstSlot.get(a) ?? 0) - (firstSlot.get(b) ?? 0);
      if (byFirst !== 0) return byFirst;
      return a < b ? -1 : a > b ? 1 : 0;
    });
  return cap === null ? repeated : repeated.slice(0, cap);
}

/**
 * Frequent locations (visited more than once, capped at topK), per-period
 * visit probabilities rounded to 5% steps, per-period frequent lists, and
 * the point count.
 */
export function extractFeatures(
  points: VisitPoint[],
  periods: TimePeriod[] = DEFAULT_PERIODS,
  topK = 3,
): FeatureSet {
  if (points.length === 0) {
    throw new DataFormatError("cannot extract features from an empty trajectory");
  }
  const total = points.length;
  const periodProbSteps: Record<string, number> = {};
  const periodFrequent: Record<string, string[]> = {};
  for (const period of periods) {
    const sub = points.filter(([slot]) => inPeriod(period, slot));
    periodProbSteps[period.name] = roundToFivePercent(sub.length, total);
    periodFrequent[period.name] = frequent(sub, null);
  }
  return {
    frequentLocations: frequent(points, topK),
    periodProbSteps,
    periodFrequent,
    length: total,
  };
}
