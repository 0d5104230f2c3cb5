"""Instruction-tuning corpus exporters.

Four corpora: bidirectional geographic pairs (see token_align),
understanding+prediction, understanding+generation, and self-reflection
records built around the edit engine. Sequence embeddings are consumed as
opaque vectors and embedded verbatim; absent that, the literal
placeholder marker stays in the prompt.
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

from .errors import DataError
from .mobility_stats import (
    DEFAULT_PERIODS,
    PREFERENCES_HEADER,
    SUMMARY_HEADER,
    extract_features,
    render_feature_block,
)
from .reward_edit import allowed_locations_for, refine_loop
from .templates import (
    REASONING_HEADER_TEMPLATE,
    SELF_REFLECTION_TEMPLATE,
    SEQUENCE_PLACEHOLDER,
    UNDERSTANDING_GENERATION_TEMPLATE,
    UNDERSTANDING_PREDICTION_TEMPLATE,
    render_generated_day,
    render_history_text,
    token_pattern,
)
from .traj_pipeline import Trajectory

SeqMap = Mapping[tuple[str, int], Sequence[float]]


def _sequence_text(traj: Trajectory, seq_map: SeqMap | None) -> str:
    if seq_map is None:
        return SEQUENCE_PLACEHOLDER
    key = (traj.user_id, traj.window_start_day)
    if key not in seq_map:
        return SEQUENCE_PLACEHOLDER
    return json.dumps([float(x) for x in seq_map[key]])


def split_window(traj: Trajectory, history_days: int = 2):
    """(history points, future points) by day offset within the window."""
    history = [p for p in traj.points if p.day_offset < history_days]
    future = [p for p in traj.points if p.day_offset >= history_days]
    return history, future


def prediction_records(
    trajectories: Sequence[Trajectory],
    periods=DEFAULT_PERIODS,
    seq_map: SeqMap | None = None,
) -> list[dict]:
    """Next-location records: the prompt carries the trajectory text minus its
    last point; the completion is the feature block plus that point's location."""
    records = []
    for traj in trajectories:
        if len(traj.points) < 2:
            continue
        context, target = traj.points[:-1], traj.points[-1]
        features = extract_features(context, periods)
        completion = (
            render_feature_block(features, periods, header=SUMMARY_HEADER)
            + "\n"
            + target.location_key
        )
        records.append(
            {
                "task": "prediction",
                "user_id": traj.user_id,
                "window_start_day": traj.window_start_day,
                "instruction": UNDERSTANDING_PREDICTION_TEMPLATE.format(
                    traj_data=render_history_text(context),
                    sequence=_sequence_text(traj, seq_map),
                ),
                "input": "",
                "output": completion,
            }
        )
    return records


def generation_records(
    trajectories: Sequence[Trajectory],
    periods=DEFAULT_PERIODS,
    seq_map: SeqMap | None = None,
    history_days: int = 2,
) -> list[dict]:
    """Next-day generation records conditioned on a two-day history."""
    records = []
    for traj in trajectories:
        history, future = split_window(traj, history_days)
        if not history or not future:
            continue
        features = extract_features(history, periods)
        completion = (
            render_feature_block(features, periods, header=PREFERENCES_HEADER)
            + "\n"
            + render_generated_day([(p.slot, p.location_key) for p in future])
        )
        records.append(
            {
                "task": "generation",
                "user_id": traj.user_id,
                "window_start_day": traj.window_start_day,
                "instruction": UNDERSTANDING_GENERATION_TEMPLATE.format(
                    sequence=_sequence_text(traj, seq_map),
                    history_text=render_history_text(history),
                ),
                "input": "",
                "output": completion,
            }
        )
    return records


def baseline_from_history(history) -> list[tuple[int, str]]:
    """Zero-scenario baseline: replay the most recent history day's pattern."""
    if not history:
        return []
    last_day = max(p.day_offset for p in history)
    points = [(p.slot, p.location_key) for p in history if p.day_offset == last_day]
    return sorted(points)


def reflection_records(
    trajectories: Sequence[Trajectory],
    periods=DEFAULT_PERIODS,
    budget: int = 10,
    history_days: int = 2,
    baselines: Mapping[tuple[str, int], Sequence[tuple[int, str]]] | None = None,
) -> list[dict]:
    """Self-reflection records: prompt = reasoning template with the four data
    slots filled; completion = edit-log summary plus the refined trajectory."""
    records = []
    for traj in trajectories:
        history, future = split_window(traj, history_days)
        if not history or not future:
            continue
        key = (traj.user_id, traj.window_start_day)
        if baselines is not None and key in baselines:
            baseline = [(int(s), str(k)) for s, k in baselines[key]]
        else:
            baseline = baseline_from_history(history)
        target_features = extract_features([(p.slot, p.location_key) for p in future], periods)
        history_pairs = [(p.slot, p.location_key) for p in history]
        allowed = allowed_locations_for(history_pairs, baseline, target_features)
        result = refine_loop(baseline, target_features, allowed, budget)

        n_layers = 4
        for p in traj.points:
            if p.token_seq is not None:
                n_layers = len(p.token_seq)
                break
        instruction = (
            REASONING_HEADER_TEMPLATE
            + "\n\n"
            + SELF_REFLECTION_TEMPLATE.format(
                constraint=f"use at most {budget} modification steps",
                token_pattern=token_pattern(n_layers),
                data1=render_history_text(history),
                data2=render_generated_day(baseline),
                data3=render_feature_block(
                    extract_features(history_pairs, periods), periods, header=SUMMARY_HEADER
                ),
                data4=render_feature_block(target_features, periods, header=SUMMARY_HEADER),
            )
        )
        if result.edit_log:
            summary_lines = [
                f"Step {i}: {op.kind} at index {op.index}"
                + (f" -> (slot {op.payload[0]}, location {op.payload[1]})" if op.payload else "")
                + f" ({reason})"
                for i, (op, reason) in enumerate(result.edit_log, start=1)
            ]
        else:
            summary_lines = ["No modification is required; the baseline already matches the target features."]
        output = (
            "<think>\n" + "\n".join(summary_lines) + "\n</think>"
            "<answer>\n" + render_generated_day(result.final) + "\n</answer>"
        )
        records.append(
            {
                "task": "reflection",
                "user_id": traj.user_id,
                "window_start_day": traj.window_start_day,
                "instruction": instruction,
                "input": "",
                "output": output,
                "satisfied": result.satisfied,
                "edits": len(result.edit_log),
            }
        )
    return records


def load_sequence_embeddings(path) -> dict[tuple[str, int], list[float]]:
    """Opaque per-window vectors: {user_id, window_start_day, values}."""
    from .io_utils import iter_jsonl

    out: dict[tuple[str, int], list[float]] = {}
    for lineno, rec in iter_jsonl(path):
        try:
            key = (str(rec["user_id"]), int(rec["window_start_day"]))
            values = [float(x) for x in rec["values"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad sequence-embedding record ({exc})") from exc
        if key in out:
            raise DataError(f"{path}: line {lineno}: duplicate window key {key}")
        out[key] = values
    return out
