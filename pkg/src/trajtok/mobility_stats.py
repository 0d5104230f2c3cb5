"""Statistical trajectory features, their text summaries, and scenario cohorts.

The feature set here backs prompt construction, the distribution-matching
reward, and the edit-based refiner: frequent locations, per-period visit
probabilities rounded to the nearest 5%, per-period frequent locations,
and trajectory length.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataError

N_SLOTS = 48


@dataclass(frozen=True)
class TimePeriod:
    """Named union of half-open half-hour slot ranges.

    The default partition puts night at 22:00-06:00 (slots [44,48) and
    [0,12)), with morning/afternoon/evening splitting the remaining day.
    """

    name: str
    ranges: tuple[tuple[int, int], ...]

    def contains(self, slot: int) -> bool:
        return any(lo <= slot < hi for lo, hi in self.ranges)

    def slots(self) -> list[int]:
        return [s for lo, hi in self.ranges for s in range(lo, hi)]

    @property
    def representative_slot(self) -> int:
        return min(self.slots())


DEFAULT_PERIODS: tuple[TimePeriod, ...] = (
    TimePeriod("night", ((44, 48), (0, 12))),
    TimePeriod("morning", ((12, 24),)),
    TimePeriod("afternoon", ((24, 36),)),
    TimePeriod("evening", ((36, 44),)),
)


_VALIDATED_PARTITIONS: set[tuple[TimePeriod, ...]] = set()


def validate_partition(periods: Sequence[TimePeriod]) -> None:
    """Periods must tile [0, 48) exactly once."""
    key = tuple(periods)
    if key in _VALIDATED_PARTITIONS:
        return
    seen: dict[int, str] = {}
    for period in periods:
        for s in period.slots():
            if s < 0 or s >= N_SLOTS:
                raise DataError(f"period {period.name!r} contains out-of-range slot {s}")
            if s in seen:
                raise DataError(f"slot {s} covered by both {seen[s]!r} and {period.name!r}")
            seen[s] = period.name
    if len(seen) != N_SLOTS:
        missing = sorted(set(range(N_SLOTS)) - set(seen))
        raise DataError(f"partition does not cover slots {missing}")
    _VALIDATED_PARTITIONS.add(key)


def period_of(slot: int, periods: Sequence[TimePeriod] = DEFAULT_PERIODS) -> TimePeriod:
    for period in periods:
        if period.contains(slot):
            return period
    raise DataError(f"slot {slot} not covered by any period")


def round_to_five_percent(count: int, total: int) -> int:
    """Round count/total to the nearest 5% step (half up); returns the step index 0..20."""
    if total <= 0:
        raise DataError("total must be positive")
    return (count * 40 + total) // (2 * total)


@dataclass(frozen=True)
class StatFeatureSet:
    """The statistical features of one trajectory window."""

    frequent_locations: tuple[str, ...]
    period_prob_steps: dict[str, int]  # period name -> multiples of 5%
    period_frequent: dict[str, tuple[str, ...]]
    length: int

    @property
    def period_probs(self) -> dict[str, float]:
        return {name: steps * 0.05 for name, steps in self.period_prob_steps.items()}

    def to_record(self) -> dict:
        return {
            "frequent_locations": list(self.frequent_locations),
            "period_probs": {k: v * 5 / 100.0 for k, v in sorted(self.period_prob_steps.items())},
            "period_frequent": {k: list(v) for k, v in sorted(self.period_frequent.items())},
            "length": self.length,
        }


def _normalize_visits(traj) -> list[tuple[tuple[int, int], int, str]]:
    """Coerce a trajectory-like input to [(time coordinate, slot, location key)].

    Accepts objects exposing ``points``, bare iterables of point-like
    objects (with ``day_offset``, ``slot``, ``location_key``), or
    iterables of (slot, key) pairs treated as a single-day sequence.
    """
    items = traj.points if hasattr(traj, "points") else list(traj)
    visits = []
    for item in items:
        if hasattr(item, "slot"):
            visits.append(
                ((getattr(item, "day_offset", 0), item.slot), item.slot, item.location_key)
            )
        else:
            slot, key = item
            visits.append(((0, int(slot)), int(slot), str(key)))
    return visits


def _frequent(visits: Sequence[tuple[tuple[int, int], int, str]], cap: int | None) -> tuple[str, ...]:
    """Locations visited more than once, by count desc then earliest visit then key.

    'Earliest visit' compares time coordinates, so reordering simultaneous
    points never changes the result.
    """
    counts = Counter(key for _, _, key in visits)
    first_seen: dict[str, tuple[int, int]] = {}
    for tcoord, _, key in visits:
        if key not in first_seen or tcoord < first_seen[key]:
            first_seen[key] = tcoord
    repeated = [k for k, c in counts.items() if c > 1]
    repeated.sort(key=lambda k: (-counts[k], first_seen[k], k))
    return tuple(repeated[:cap] if cap is not None else repeated)


def extract_features(
    traj,
    periods: Sequence[TimePeriod] = DEFAULT_PERIODS,
    top_k: int = 3,
) -> StatFeatureSet:
    """Compute the feature set of a trajectory (see module docstring)."""
    visits = _normalize_visits(traj)
    if not visits:
        raise DataError("cannot extract features from an empty trajectory")
    validate_partition(periods)
    total = len(visits)

    prob_steps = {}
    per_period_frequent = {}
    for period in periods:
        in_period = [v for v in visits if period.contains(v[1])]
        prob_steps[period.name] = round_to_five_percent(len(in_period), total)
        per_period_frequent[period.name] = _frequent(in_period, cap=None)

    return StatFeatureSet(
        frequent_locations=_frequent(visits, cap=top_k),
        period_prob_steps=prob_steps,
        period_frequent=per_period_frequent,
        length=total,
    )


SUMMARY_HEADER = "Summary of the spatio-temporal trajectory features:"
PREFERENCES_HEADER = "Summary of the trajectory preferences for this user:"
NO_REPEAT_SENTENCE = "No location was visited more than once"


def render_feature_block(
    features: StatFeatureSet,
    periods: Sequence[TimePeriod] = DEFAULT_PERIODS,
    header: str = SUMMARY_HEADER,
) -> str:
    """Render the filled summary template; byte-deterministic."""
    freq = ", ".join(features.frequent_locations) if features.frequent_locations else "None"
    probs = ", ".join(
        f"{p.name}: {features.period_prob_steps[p.name] * 5}%" for p in periods
    )
    per_period = "; ".join(
        f"{p.name}: "
        + (", ".join(features.period_frequent[p.name]) or NO_REPEAT_SENTENCE)
        for p in periods
    )
    return (
        f"{header}\n"
        f"- Most frequently visited locations (visited more than once): {freq}\n"
        f"- Probability of visits by time period (rounded to 5%): {probs}\n"
        f"- Frequently visited locations during each time period: {per_period}."
    )


def render_summary(features: StatFeatureSet, periods: Sequence[TimePeriod] = DEFAULT_PERIODS) -> str:
    return render_feature_block(features, periods, header=SUMMARY_HEADER)


class ScenarioLabel(enum.Enum):
    LATE_NIGHT_COMMUTER = "late_night_commuter"
    TEMP_PLAN_NEW = "temp_plan_new"
    TEMP_PLAN_CANCELLED = "temp_plan_cancelled"
    WEEKEND_USER = "weekend_user"
    NONE = "none"


def _weekday_visits(traj) -> list[tuple[int, int, str]]:
    items = traj.points if hasattr(traj, "points") else list(traj)
    out = []
    for item in items:
        if hasattr(item, "slot"):
            out.append((item.weekday, item.slot, item.location_key))
        else:
            w, s, k = item
            out.append((int(w), int(s), str(k)))
    return out


def classify_scenario(
    history,
    future,
    periods: Sequence[TimePeriod] = DEFAULT_PERIODS,
    night_threshold: float = 0.75,
    top_k: int = 3,
) -> set[ScenarioLabel]:
    """Assign scenario cohort labels to a (2-day history, 1-day future) pair.

    - late-night commuter: night-period trips exceed the threshold share
      of all trips in the pair;
    - temporary new plan: some future location is outside the history's
      top-k most frequent locations;
    - temporary cancelled plan: some history top-k location never appears
      in the future day;
    - weekend user: history covers Thursday and Friday, future is Saturday.
    """
    hist = _weekday_visits(history)
    fut = _weekday_visits(future)
    if not hist or not fut:
        raise DataError("history and future windows must be non-empty")
    if len({w for w, _, _ in fut}) != 1:
        raise DataError("future window must cover exactly one day")

    labels: set[ScenarioLabel] = set()
    night = next(p for p in periods if p.name == "night")
    all_visits = hist + fut
    night_trips = sum(1 for _, slot, _ in all_visits if night.contains(slot))
    if night_trips / len(all_visits) > night_threshold:
        labels.add(ScenarioLabel.LATE_NIGHT_COMMUTER)

    hist_counts = Counter(key for _, _, key in hist)
    first_seen: dict[str, int] = {}
    for idx, (_, _, key) in enumerate(hist):
        first_seen.setdefault(key, idx)
    top = sorted(hist_counts, key=lambda k: (-hist_counts[k], first_seen[k], k))[:top_k]
    future_locs = {key for _, _, key in fut}
    if any(loc not in top for loc in future_locs):
        labels.add(ScenarioLabel.TEMP_PLAN_NEW)
    if any(loc not in future_locs for loc in top):
        labels.add(ScenarioLabel.TEMP_PLAN_CANCELLED)

    hist_days = {w for w, _, _ in hist}
    fut_day = next(iter({w for w, _, _ in fut}))
    if hist_days == {3, 4} and fut_day == 5:  # Thu+Fri -> Sat, Monday=0
        labels.add(ScenarioLabel.WEEKEND_USER)

    return labels or {ScenarioLabel.NONE}
