import { describe, expect, it } from "vitest";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { readFileSync } from "node:fs";

import {
  DataFormatError,
  VisitPoint,
  extractFeatures,
  groupAdvantages,
  totalReward,
} from "../src/index.js";

const here = dirname(fileURLToPath(import.meta.url));
const read = (name: string) =>
  JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8"));

const featureCases = read("feature_cases.json") as {
  points: [number, string][];
  expected: {
    frequent_locations: string[];
    period_prob_steps: Record<string, number>;
    period_frequent: Record<string, string[]>;
    length: number;
  };
}[];

const rewardCases = read("reward_cases.json") as {
  rewards: {
    traj: [number, string][];
    truth: [number, string][];
    matched_features: number;
    r_distribution: number;
    r_length: number;
    total: number;
  }[];
  advantages: { rewards: number[]; expected: number[] }[];
};

const TOL = 1e-12;

describe("feature extraction parity", () => {
  it("matches the core on every fixture", () => {
    for (const c of featureCases) {
      const got = extractFeatures(c.points as VisitPoint[]);
      expect(got.frequentLocations).toEqual(c.expected.frequent_locations);
      expect(got.periodProbSteps).toEqual(c.expected.period_prob_steps);
      expect(got.periodFrequent).toEqual(c.expected.period_frequent);
      expect(got.length).toBe(c.expected.length);
    }
  });

  it("rejects empty trajectories", () => {
    expect(() => extractFeatures([])).toThrowError(DataFormatError);
  });
});

describe("reward parity", () => {
  it("matches the core on every fixture", () => {
    for (const c of rewardCases.rewards) {
      const got = totalReward(c.traj as VisitPoint[], c.truth as VisitPoint[]);
      expect(got.matchedFeatures).toBe(c.matched_features);
      expect(got.rDistribution).toBe(c.r_distribution);
      expect(Math.abs(got.rLength - c.r_length)).toBeLessThan(TOL);
      expect(Math.abs(got.total - c.total)).toBeLessThan(TOL);
    }
  });

  it("identity trajectories max the distribution reward at (K, 0)", () => {
    const traj: VisitPoint[] = [
      [2, "A"],
      [2, "A"],
      [13, "B"],
      [25, "C"],
      [40, "B"],
    ];
    const got = totalReward(traj, traj);
    expect(got.matchedFeatures).toBe(12);
    expect(got.rLength).toBe(0.0);
    expect(got.total).toBe(12.0);
  });

  it("rejects an empty ground truth", () => {
    expect(() => totalReward([[1, "A"]], [])).toThrowError(DataFormatError);
  });
});

describe("group advantages parity", () => {
  it("matches the core within 1e-12", () => {
    for (const c of rewardCases.advantages) {
      const got = groupAdvantages(c.rewards);
      expect(got).toHaveLength(c.expected.length);
      for (let i = 0; i < got.length; i++) {
        expect(Math.abs(got[i] - c.expected[i])).toBeLessThan(TOL);
      }
    }
  });

  it("zero-variance groups yield zeros", () => {
    expect(groupAdvantages([3.0, 3.0, 3.0])).toEqual([0.0, 0.0, 0.0]);
  });

  it("advantages sum to zero", () => {
    for (const c of rewardCases.advantages) {
      const sum = groupAdvantages(c.rewards).reduce((a, b) => a + b, 0.0);
      expect(Math.abs(sum)).toBeLessThan(1e-9);
    }
  });

  it("rejects undersized groups", () => {
    expect(() => groupAdvantages([1.0])).toThrowError(DataFormatError);
  });
});
