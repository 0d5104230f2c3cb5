/** Distribution-matching rewards and group-relative advantages. */

import { DataFormatError } from "./errors.js";
import { DEFAULT_PERIODS, FeatureSet, TimePeriod, VisitPoint, extractFeatures } from "./features.js";

export interface FeatureSpec {
  periods: TimePeriod[];
  topK: number;
  includeLength: boolean;
}

export const DEFAULT_SPEC: FeatureSpec = {
  periods: DEFAULT_PERIODS,
  topK: 3,
  includeLength: true,
};

export interface RewardBreakdown {
  matchedFeatures: number;
  rDistribution: number;
  rLength: number;
  total: number;
}

type Component = string | number | null | string[];

function featureVector(features: FeatureSet, spec: FeatureSpec): Map<string, Component> {
  const vec = new Map<string, Component>();
  for (let i = 0; i < spec.topK; i++) {
    vec.set(`frequent_location_${i + 1}`, features.frequentLocations[i] ?? null);
  }
  for (const p of spec.periods) {
    vec.set(`period_probability:${p.name}`, features.periodProbSteps[p.name]);
  }
  for (const p of spec.periods) {
    vec.set(`period_frequent:${p.name}`, features.periodFrequent[p.name]);
  }
  if (spec.includeLength) {
    vec.set("length", features.length);
  }
  return vec;
}

function componentsEqual(a: Component, b: Component): boolean {
  if (Array.isArray(a) && Array.isArray(b)) {
    return a.length === b.length && a.every((x, i) => x === b[i]);
  }
  return a === b;
}

/** Count of feature components equal between the two trajectories. */
export function rewardDistribution(
  traj: VisitPoint[],
  truth: VisitPoint[],
  spec: FeatureSpec = DEFAULT_SPEC,
): number {
  if (truth.length === 0) {
    throw new DataFormatError("ground-truth trajectory is empty");
  }
  if (traj.length === 0) {
    return 0;
  }
  const got = featureVector(extractFeatures(traj, spec.periods, spec.topK), spec);
  const want = featureVector(extractFeatures(truth, spec.periods, spec.topK), spec);
  let matched = 0;
  for (const [name, value] of want) {
    if (componentsEqual(got.get(name) ?? null, value)) {
      matched += 1;
    }
  }
  return matched;
}

/** -|len(traj) - len(truth)| / len(truth); zero (not -0) when equal. */
export function rewardLength(traj: VisitPoint[], truth: VisitPoint[]): number {
  if (truth.length < 1) {
    throw new DataFormatError("ground-truth trajectory is empty");
  }
  const gap = Math.abs(traj.length - truth.length);
  return gap === 0 ? 0.0 : -gap / truth.length;
}

export function totalReward(
  traj: VisitPoint[],
  truth: VisitPoint[],
  spec: FeatureSpec = DEFAULT_SPEC,
): RewardBreakdown {
  const matched = rewardDistribution(traj, truth, spec);
  const rLength = rewardLength(traj, truth);
  return {
    matchedFeatures: matched,
    rDistribution: matched,
    rLength,
    total: matched + rLength,
  };
}

/**
 * Standardize rewards within a group: (r - mean) / population std; a
 * zero-variance group yields all-zero advantages. Deviations are centered
 * twice so the mean's rounding residue cannot leak through a vanishing
 * std (mirrors the core implementation).
 */
export function groupAdvantages(rewards: ReadonlyArray<number>): number[] {
  const n = rewards.length;
  if (n < 2) {
    throw new DataFormatError("advantage groups need at least 2 members");
  }
  let mean = 0.0;
  for (const r of rewards) mean += r;
  mean /= n;
  let devs = rewards.map((r) => r - mean);
  let residue = 0.0;
  for (const d of devs) residue += d;
  residue /= n;
  devs = devs.map((d) => d - residue);
  let variance = 0.0;
  for (const d of devs) variance += d * d;
  variance /= n;
  if (variance === 0.0) {
    return new Array(n).fill(0.0);
  }
  const std = Math.sqrt(variance);
  return devs.map((d) => d / std);
}
