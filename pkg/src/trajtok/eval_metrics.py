"""Distribution and sequence metrics for generated-trajectory evaluation.

Covers hit rate at k for next-location prediction, BLEU over token
sequences, total variation distance, and the Jensen-Shannon distance
(square root of the divergence, base-2 logs by default so values land in
[0, 1]). ``evaluate_generation`` runs the whole harness over paired
trajectory cohorts on a time channel (48 half-hour buckets) and a
location channel (visit frequencies over the location vocabulary).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

from .errors import DataError

N_TIME_SLOTS = 48


@dataclass(frozen=True)
class Distribution:
    """Discrete probability distribution over labeled support points."""

    labels: tuple[Hashable, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.probs):
            raise DataError("labels and probs must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise DataError("duplicate support labels")
        if any(not math.isfinite(p) or p < 0 for p in self.probs):
            raise DataError("probabilities must be finite and non-negative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"probabilities sum to {total!r}, not 1")

    @staticmethod
    def from_counts(counts: Mapping[Hashable, float]) -> "Distribution":
        total = math.fsum(counts.values())
        if total <= 0:
            raise DataError("cannot normalize empty or zero counts")
        labels = tuple(sorted(counts, key=str))
        return Distribution(labels, tuple(counts[l] / total for l in labels))


def align_supports(p: Distribution, q: Distribution) -> tuple[tuple, tuple, tuple]:
    """Union-align two distributions, zero-filling missing labels."""
    labels = tuple(sorted(set(p.labels) | set(q.labels), key=str))
    pm = dict(zip(p.labels, p.probs))
    qm = dict(zip(q.labels, q.probs))
    return (
        labels,
        tuple(pm.get(l, 0.0) for l in labels),
        tuple(qm.get(l, 0.0) for l in labels),
    )


def hit_rate_at_k(rankings: Sequence[Sequence[Hashable]], truths: Sequence[Hashable], k: int) -> float:
    """Fraction of cases whose true label appears in the top-k candidates."""
    if k < 1:
        raise DataError("k must be >= 1")
    if not rankings or len(rankings) != len(truths):
        raise DataError("rankings and truths must be non-empty and equal-length")
    hits = 0
    for ranked, truth in zip(rankings, truths):
        if not ranked:
            raise DataError("empty ranking")
        if truth in list(ranked)[:k]:
            hits += 1
    return hits / len(rankings)


def _ngram_counts(seq: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def bleu(
    candidate: Sequence[Hashable],
    reference: Sequence[Hashable],
    max_n: int = 4,
    smooth_eps: float = 0.0,
) -> float:
    """BLEU with uniform n-gram weights and brevity penalty min(1, e^(1-r/c)).

    Modified n-gram precisions are clipped against reference counts. With
    the default ``smooth_eps=0`` any zero precision yields a score of 0;
    a positive epsilon is added to zero numerators instead.
    """
    if len(candidate) == 0:
        raise DataError("empty candidate sequence")
    if max_n < 1:
        raise DataError("max_n must be >= 1")
    c, r = len(candidate), len(reference)
    log_precisions = []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(candidate, n)
        ref_counts = _ngram_counts(reference, n)
        clipped = sum(min(cnt, ref_counts[g]) for g, cnt in cand_counts.items())
        total = max(c - n + 1, 0)
        if total == 0:
            numer = smooth_eps
        else:
            numer = clipped if clipped > 0 else smooth_eps
        if numer <= 0:
            return 0.0
        log_precisions.append(math.log(numer / max(total, 1)))
    bp = min(1.0, math.exp(1.0 - r / c))
    return bp * math.exp(math.fsum(log_precisions) / max_n)


def kl_divergence(p: Sequence[float], q: Sequence[float], log_base: float = 2.0) -> float:
    """KL(P || Q) = sum p_i log(p_i / q_i), with the 0*log(0/.) = 0 convention."""
    if len(p) != len(q):
        raise DataError("KL inputs must share a support")
    total = 0.0
    for pi, qi in zip(p, q):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise DataError("KL undefined: P has mass where Q has none")
        total += pi * math.log(pi / qi)
    return total / math.log(log_base)


def tvd(p: Distribution, q: Distribution) -> float:
    """Total variation distance (1/2) * sum |P(i) - Q(i)| over the aligned support."""
    _, pa, qa = align_supports(p, q)
    return 0.5 * math.fsum(abs(a - b) for a, b in zip(pa, qa))


def jsd(p: Distribution, q: Distribution, log_base: float = 2.0) -> float:
    """Jensen-Shannon distance: sqrt of (KL(P||M) + KL(Q||M)) / 2 with M the midpoint.

    Each KL term is evaluated as p_i * log(2 p_i / (p_i + q_i)), which is the
    same rounded value as p_i * log(p_i / m_i) but survives subnormal masses
    whose midpoint would underflow to zero.
    """
    _, pa, qa = align_supports(p, q)
    div = 0.0
    for a, b in zip(pa, qa):
        s = a + b
        if a > 0.0:
            div += 0.5 * a * math.log(2.0 * a / s)
        if b > 0.0:
            div += 0.5 * b * math.log(2.0 * b / s)
    div /= math.log(log_base)
    return math.sqrt(max(div, 0.0))


@dataclass
class ChannelReport:
    bleu: float
    tvd: float
    jsd: float


@dataclass
class EvalReport:
    time: ChannelReport
    location: ChannelReport
    n_pairs: int
    time_counts: dict = field(default_factory=dict)
    location_counts_generated: dict = field(default_factory=dict)
    location_counts_truth: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "time_bleu": self.time.bleu,
            "time_tvd": self.time.tvd,
            "time_jsd": self.time.jsd,
            "location_bleu": self.location.bleu,
            "location_tvd": self.location.tvd,
            "location_jsd": self.location.jsd,
            "n_pairs": self.n_pairs,
        }


def _slot_distribution(slot_seqs: Sequence[Sequence[int]]) -> Distribution:
    counts = Counter()
    for seq in slot_seqs:
        counts.update(seq)
    full = {slot: counts.get(slot, 0) for slot in range(N_TIME_SLOTS)}
    total = sum(full.values())
    if total == 0:
        raise DataError("no points in cohort")
    return Distribution(tuple(range(N_TIME_SLOTS)), tuple(full[s] / total for s in range(N_TIME_SLOTS)))


def _mean_bleu(pairs: Sequence[tuple[Sequence, Sequence]], max_n: int, corpus_level: bool) -> float:
    if corpus_level:
        # pool all pairs into one clipped-precision computation
        c = sum(len(cand) for cand, _ in pairs)
        r = sum(len(ref) for _, ref in pairs)
        if c == 0:
            raise DataError("empty candidate cohort")
        log_precisions = []
        for n in range(1, max_n + 1):
            clipped = 0
            total = 0
            for cand, ref in pairs:
                cand_counts = _ngram_counts(cand, n)
                ref_counts = _ngram_counts(ref, n)
                clipped += sum(min(cnt, ref_counts[g]) for g, cnt in cand_counts.items())
                total += max(len(cand) - n + 1, 0)
            if clipped == 0 or total == 0:
                return 0.0
            log_precisions.append(math.log(clipped / total))
        bp = min(1.0, math.exp(1.0 - r / c))
        return bp * math.exp(math.fsum(log_precisions) / max_n)
    return math.fsum(bleu(cand, ref, max_n=max_n) for cand, ref in pairs) / len(pairs)


def evaluate_generation(
    generated,
    truth,
    max_n: int = 4,
    corpus_bleu: bool = False,
    per_user: bool = False,
) -> EvalReport:
    """Score generated trajectories against ground truth, paired by (user, window).

    Time channel: distributions over the 48 half-hour buckets, pooled
    across the cohort (or averaged per user with ``per_user``), plus BLEU
    over slot-index sequences. Location channel: the same over location
    keys. Inputs are sequences of objects exposing ``user_id``,
    ``window_start_day`` and ``points`` (each point exposing ``slot`` and
    a ``location_key``), or plain (slots, keys) pair tuples.
    """
    gen = _index_cohort(generated)
    tru = _index_cohort(truth)
    if not gen:
        raise DataError("empty cohort")
    if set(gen) != set(tru):
        missing = sorted(set(gen) ^ set(tru), key=str)[:3]
        raise DataError(f"generated/truth cohorts not paired; first mismatched keys: {missing}")
    keys = sorted(gen, key=str)

    slot_pairs = [(gen[k][0], tru[k][0]) for k in keys]
    loc_pairs = [(gen[k][1], tru[k][1]) for k in keys]

    if per_user:
        time_tvd = math.fsum(
            tvd(_slot_distribution([g]), _slot_distribution([t])) for g, t in slot_pairs
        ) / len(keys)
        time_jsd = math.fsum(
            jsd(_slot_distribution([g]), _slot_distribution([t])) for g, t in slot_pairs
        ) / len(keys)
        loc_tvd = math.fsum(
            tvd(_loc_distribution([g]), _loc_distribution([t])) for g, t in loc_pairs
        ) / len(keys)
        loc_jsd = math.fsum(
            jsd(_loc_distribution([g]), _loc_distribution([t])) for g, t in loc_pairs
        ) / len(keys)
    else:
        gen_time = _slot_distribution([p[0] for p in slot_pairs])
        tru_time = _slot_distribution([p[1] for p in slot_pairs])
        gen_loc = _loc_distribution([p[0] for p in loc_pairs])
        tru_loc = _loc_distribution([p[1] for p in loc_pairs])
        time_tvd, time_jsd = tvd(gen_time, tru_time), jsd(gen_time, tru_time)
        loc_tvd, loc_jsd = tvd(gen_loc, tru_loc), jsd(gen_loc, tru_loc)

    report = EvalReport(
        time=ChannelReport(_mean_bleu(slot_pairs, max_n, corpus_bleu), time_tvd, time_jsd),
        location=ChannelReport(_mean_bleu(loc_pairs, max_n, corpus_bleu), loc_tvd, loc_jsd),
        n_pairs=len(keys),
    )
    report.time_counts = _pooled_counts(p[0] for p in slot_pairs)
    report.location_counts_generated = _pooled_counts(p[0] for p in loc_pairs)
    report.location_counts_truth = _pooled_counts(p[1] for p in loc_pairs)
    return report


def _loc_distribution(key_seqs: Sequence[Sequence[str]]) -> Distribution:
    counts = Counter()
    for seq in key_seqs:
        counts.update(seq)
    if not counts:
        raise DataError("no points in cohort")
    return Distribution.from_counts(counts)


def _pooled_counts(seqs) -> dict:
    counts = Counter()
    for seq in seqs:
        counts.update(seq)
    return {str(k): v for k, v in sorted(counts.items(), key=lambda kv: str(kv[0]))}


def _index_cohort(cohort) -> dict:
    indexed = {}
    for item in cohort:
        if hasattr(item, "points"):
            key = (item.user_id, item.window_start_day)
            slots = [p.slot for p in item.points]
            locs = [p.location_key for p in item.points]
        else:
            key, slots, locs = item
            slots, locs = list(slots), list(locs)
        if key in indexed:
            raise DataError(f"duplicate cohort key {key!r}")
        indexed[key] = (slots, locs)
    return indexed
