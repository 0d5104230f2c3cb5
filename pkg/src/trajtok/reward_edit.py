"""Distribution-matching rewards, group-relative advantages, and the
minimal-edit refinement engine.

The reward counts exactly-matching feature components between a candidate
trajectory and the ground truth (each match is worth +1) and penalizes
length deviation by -|len difference| / true length. The refiner is a
deterministic greedy loop over single edits (modify / add / delete of one
point) that repairs feature mismatches against a target feature set; a
breadth-first oracle over the same action space provides true minimal
edit counts on small instances for verification.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DataError
from .mobility_stats import (
    DEFAULT_PERIODS,
    StatFeatureSet,
    TimePeriod,
    extract_features,
    round_to_five_percent,
    validate_partition,
)

N_SLOTS = 48

Point = tuple[int, str]  # (half-hour slot, location key)


@dataclass(frozen=True)
class FeatureSpec:
    """Which feature components participate in matching and rewards."""

    periods: tuple[TimePeriod, ...] = DEFAULT_PERIODS
    top_k: int = 3
    include_length: bool = True

    def component_names(self) -> list[str]:
        names = [f"frequent_location_{i + 1}" for i in range(self.top_k)]
        names += [f"period_probability:{p.name}" for p in self.periods]
        names += [f"period_frequent:{p.name}" for p in self.periods]
        if self.include_length:
            names.append("length")
        return names

    @property
    def n_components(self) -> int:
        return self.top_k + 2 * len(self.periods) + (1 if self.include_length else 0)


def feature_vector(features: StatFeatureSet, spec: FeatureSpec = FeatureSpec()) -> dict:
    """Flatten a StatFeatureSet into named, exactly-comparable components."""
    vec: dict = {}
    for i in range(spec.top_k):
        vec[f"frequent_location_{i + 1}"] = (
            features.frequent_locations[i] if i < len(features.frequent_locations) else None
        )
    for p in spec.periods:
        vec[f"period_probability:{p.name}"] = features.period_prob_steps[p.name]
    for p in spec.periods:
        vec[f"period_frequent:{p.name}"] = tuple(features.period_frequent[p.name])
    if spec.include_length:
        vec["length"] = features.length
    return vec


@dataclass(frozen=True)
class RewardBreakdown:
    matched_features: int
    r_distribution: float
    r_length: float
    total: float

    def to_record(self) -> dict:
        return {
            "matched_features": self.matched_features,
            "r_distribution": self.r_distribution,
            "r_length": self.r_length,
            "total": self.total,
        }


def _as_points(traj) -> list[Point]:
    if hasattr(traj, "points"):
        return [(p.slot, p.location_key) for p in traj.points]
    return [(int(s), str(k)) for s, k in traj]


def _match_vector(traj, spec: FeatureSpec) -> dict | None:
    points = _as_points(traj)
    if not points:
        return None
    return feature_vector(extract_features(points, spec.periods, spec.top_k), spec)


def reward_distribution(traj, truth, spec: FeatureSpec = FeatureSpec()) -> int:
    """Count of feature components equal between the two trajectories."""
    got = _match_vector(traj, spec)
    want = _match_vector(truth, spec)
    if want is None:
        raise DataError("ground-truth trajectory is empty")
    if got is None:
        return 0
    return sum(1 for name in spec.component_names() if got[name] == want[name])


def reward_length(traj, truth) -> float:
    """-|len(traj) - len(truth)| / len(truth); zero when lengths agree."""
    n, n_true = len(_as_points(traj)), len(_as_points(truth))
    if n_true < 1:
        raise DataError("ground-truth trajectory is empty")
    gap = abs(n - n_true)
    return -(gap / n_true) if gap else 0.0  # avoid -0.0 in exports


def total_reward(traj, truth, spec: FeatureSpec = FeatureSpec()) -> RewardBreakdown:
    matched = reward_distribution(traj, truth, spec)
    r_len = reward_length(traj, truth)
    return RewardBreakdown(matched, float(matched), r_len, float(matched) + r_len)


def group_advantages(rewards: Sequence[float]) -> list[float]:
    """Standardize rewards within a group: (r - mean) / population std.

    Zero-variance groups get all-zero advantages. Deviations are centered
    twice: the second pass removes the one-ulp rounding residue of the
    mean, so constant groups standardize to exact zeros instead of
    blowing up the residue by a vanishing std.
    """
    n = len(rewards)
    if n < 2:
        raise DataError("advantage groups need at least 2 members")
    mean = math.fsum(rewards) / n
    devs = [r - mean for r in rewards]
    residue = math.fsum(devs) / n
    devs = [d - residue for d in devs]
    var = math.fsum(d * d for d in devs) / n
    if var == 0.0:
        return [0.0] * n
    std = math.sqrt(var)
    return [d / std for d in devs]


# --- edit engine ---

_KIND_RANK = {"modify": 0, "add": 1, "delete": 2}


@dataclass(frozen=True)
class EditOp:
    kind: str  # modify | add | delete
    index: int
    payload: Point | None = None  # new (slot, location) for modify/add

    def to_record(self) -> dict:
        rec: dict = {"kind": self.kind, "index": self.index}
        if self.payload is not None:
            rec["slot"], rec["location"] = self.payload
        return rec


def apply_edit(points: Sequence[Point], op: EditOp) -> list[Point]:
    """Apply one edit, keeping points sorted by slot (stable)."""
    pts = list(points)
    if op.kind == "delete":
        if not 0 <= op.index < len(pts):
            raise DataError(f"delete index {op.index} out of bounds")
        del pts[op.index]
        return pts
    if op.payload is None:
        raise DataError(f"{op.kind} requires a (slot, location) payload")
    slot, loc = op.payload
    if not 0 <= slot < N_SLOTS:
        raise DataError(f"slot {slot} out of range")
    if op.kind == "modify":
        if not 0 <= op.index < len(pts):
            raise DataError(f"modify index {op.index} out of bounds")
        pts[op.index] = (slot, loc)
        return sorted(pts, key=lambda p: p[0])
    if op.kind == "add":
        if not 0 <= op.index <= len(pts):
            raise DataError(f"add index {op.index} out of bounds")
        pts.insert(op.index, (slot, loc))
        return sorted(pts, key=lambda p: p[0])
    raise DataError(f"unknown edit kind {op.kind!r}")


def apply_edits(points: Sequence[Point], ops: Iterable[EditOp]) -> list[Point]:
    pts = list(points)
    for op in ops:
        pts = apply_edit(pts, op)
    return pts


@dataclass
class RefineResult:
    final: tuple[Point, ...]
    edit_log: list[tuple[EditOp, str]] = field(default_factory=list)
    iterations: int = 0
    satisfied: bool = False
    diagnostic: str | None = None

    @property
    def ops(self) -> list[EditOp]:
        return [op for op, _ in self.edit_log]

    def to_record(self) -> dict:
        return {
            "final": [[s, l] for s, l in self.final],
            "edits": [dict(op.to_record(), reason=reason) for op, reason in self.edit_log],
            "iterations": self.iterations,
            "satisfied": self.satisfied,
            "diagnostic": self.diagnostic,
        }


def _fast_vector(points: Sequence[Point], spec: FeatureSpec) -> dict:
    """Inlined feature_vector(extract_features(...)) for the edit-search hot loop.

    Must stay equivalent to the canonical mobility_stats path; a property
    test pins the equivalence.
    """
    counts: dict[str, int] = {}
    first_slot: dict[str, int] = {}
    per_period: dict[str, list[Point]] = {p.name: [] for p in spec.periods}
    for slot, key in points:
        counts[key] = counts.get(key, 0) + 1
        if key not in first_slot or slot < first_slot[key]:
            first_slot[key] = slot
        for p in spec.periods:
            if p.contains(slot):
                per_period[p.name].append((slot, key))
                break
    repeated = sorted(
        (k for k, c in counts.items() if c > 1),
        key=lambda k: (-counts[k], first_slot[k], k),
    )
    vec: dict = {}
    for i in range(spec.top_k):
        vec[f"frequent_location_{i + 1}"] = repeated[i] if i < len(repeated) else None
    total = len(points)
    for p in spec.periods:
        vec[f"period_probability:{p.name}"] = round_to_five_percent(len(per_period[p.name]), total)
    for p in spec.periods:
        sub = per_period[p.name]
        sub_counts: dict[str, int] = {}
        sub_first: dict[str, int] = {}
        for slot, key in sub:
            sub_counts[key] = sub_counts.get(key, 0) + 1
            if key not in sub_first or slot < sub_first[key]:
                sub_first[key] = slot
        vec[f"period_frequent:{p.name}"] = tuple(
            sorted(
                (k for k, c in sub_counts.items() if c > 1),
                key=lambda k: (-sub_counts[k], sub_first[k], k),
            )
        )
    if spec.include_length:
        vec["length"] = total
    return vec


def _mismatches(points: Sequence[Point], target_vec: dict, spec: FeatureSpec) -> list[str]:
    if not points:
        return list(target_vec)
    got = _fast_vector(points, spec)
    return [name for name in spec.component_names() if got[name] != target_vec[name]]


def allowed_locations_for(history, baseline, target_features: StatFeatureSet) -> tuple[str, ...]:
    """Locations usable by edits: history plus baseline plus any location the
    target feature set mentions."""
    keys = {k for _, k in _as_points(history)} if history is not None else set()
    keys |= {k for _, k in _as_points(baseline)}
    keys |= set(target_features.frequent_locations)
    for locs in target_features.period_frequent.values():
        keys |= set(locs)
    return tuple(sorted(keys))


def _candidate_edits(points: Sequence[Point], allowed: Sequence[str], slots: Sequence[int]):
    """All single edits in deterministic tie-break order: modify < add < delete,
    then index, slot, location."""
    for i in range(len(points)):
        for slot in slots:
            for loc in allowed:
                if (slot, loc) != points[i]:
                    yield EditOp("modify", i, (slot, loc))
    for slot in slots:
        insert_at = bisect_right([p[0] for p in points], slot)
        for loc in allowed:
            yield EditOp("add", insert_at, (slot, loc))
    for i in range(len(points)):
        if len(points) > 1:
            yield EditOp("delete", i)


def _edit_sort_key(points: Sequence[Point], op: EditOp):
    if op.kind == "delete":
        slot, loc = points[op.index]
    else:
        slot, loc = op.payload
    return (_KIND_RANK[op.kind], op.index, slot, loc)


def refine_loop(
    baseline,
    target_features: StatFeatureSet,
    allowed_locations: Sequence[str],
    budget: int,
    spec: FeatureSpec = FeatureSpec(),
) -> RefineResult:
    """Greedy single-edit hill climbing toward the target feature set.

    Each iteration scores every candidate edit by the feature-mismatch
    count it leaves behind and applies the best strictly-improving one
    (ties broken by the deterministic edit ordering). Stops when all
    components match, no edit improves, or the budget runs out.
    """
    if budget < 1:
        raise DataError("budget must be >= 1")
    validate_partition(spec.periods)
    allowed = tuple(sorted(set(allowed_locations)))
    target_vec = feature_vector(target_features, spec)
    wanted = set(target_features.frequent_locations)
    for locs in target_features.period_frequent.values():
        wanted |= set(locs)
    points = _as_points(baseline)
    result = RefineResult(final=tuple(points))
    current = _mismatches(points, target_vec, spec)
    if not current:
        result.satisfied = True
        return result
    if not allowed and wanted:
        raise DataError("allowed-location set is empty but the target features require locations")
    missing = sorted(wanted - set(allowed))
    if missing:
        result.diagnostic = (
            f"target features require locations outside the allowed set: {', '.join(missing)}"
        )

    slots = range(N_SLOTS)
    for _ in range(budget):
        result.iterations += 1
        best: tuple[int, tuple, EditOp, list[str]] | None = None
        for op in _candidate_edits(points, allowed, slots):
            after = _mismatches(apply_edit(points, op), target_vec, spec)
            if len(after) >= len(current):
                continue
            key = (len(after), _edit_sort_key(points, op))
            if best is None or key < (best[0], best[1]):
                best = (len(after), _edit_sort_key(points, op), op, after)
        if best is None:
            break
        _, _, op, after = best
        repaired = sorted(set(current) - set(after))
        reason = (
            f"feature mismatches {len(current)} -> {len(after)}"
            + (f"; repaired: {', '.join(repaired)}" if repaired else "")
        )
        points = apply_edit(points, op)
        result.edit_log.append((op, reason))
        current = after
        if not current:
            break

    result.final = tuple(points)
    result.satisfied = not current
    return result


def minimal_edit_oracle(
    baseline,
    target_features: StatFeatureSet,
    allowed_locations: Sequence[str],
    max_depth: int = 3,
    spec: FeatureSpec = FeatureSpec(),
) -> int | None:
    """Exhaustive BFS for the true minimum edit count reaching a full match.

    Tractability bounds: baseline length <= 6, at most 5 allowed
    locations, depth <= 3; candidate slots are restricted to one
    representative per time period. Returns None when no edit sequence
    within the depth bound satisfies the target.
    """
    validate_partition(spec.periods)
    points = tuple(sorted(_as_points(baseline)))
    if len(points) > 6:
        raise DataError("oracle bound exceeded: baseline longer than 6 points")
    allowed = tuple(sorted(set(allowed_locations)))
    if len(allowed) > 5:
        raise DataError("oracle bound exceeded: more than 5 allowed locations")
    if max_depth > 3:
        raise DataError("oracle bound exceeded: max_depth > 3")
    target_vec = feature_vector(target_features, spec)
    rep_slots = tuple(sorted(p.representative_slot for p in spec.periods))

    def matched(state: tuple[Point, ...]) -> bool:
        return not _mismatches(list(state), target_vec, spec)

    frontier = {points}
    seen = {points}
    if matched(points):
        return 0
    for depth in range(1, max_depth + 1):
        nxt: set[tuple[Point, ...]] = set()
        for state in frontier:
            for op in _candidate_edits(list(state), allowed, rep_slots):
                new_state = tuple(sorted(apply_edit(list(state), op)))
                if new_state in seen:
                    continue
                seen.add(new_state)
                if matched(new_state):
                    return depth
                nxt.add(new_state)
        frontier = nxt
        if not frontier:
            break
    return None
