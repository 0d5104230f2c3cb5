"""Batch command-line surface over the pipeline.

Commands: preprocess, build-codebook, tokenize, align, export-sft,
evaluate, reward, refine. Every run writes a manifest (resolved config,
input digests, output digests) into the output directory. Flag values
override config-file values, which override the built-in defaults. Exit
codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, NumericsError, TrajtokError
from .eval_metrics import evaluate_generation
from .geo_profile import encode_profile_fallback, import_embeddings, load_profiles
from .io_utils import read_json, sha256_file, write_json, write_jsonl
from .mobility_stats import DEFAULT_PERIODS
from .reward_edit import (
    allowed_locations_for,
    group_advantages,
    refine_loop,
    total_reward,
)
from .rq_codebook import (
    LocationTokenSeq,
    RQConfig,
    codebook_report,
    encode_batch,
    load_codebook,
    render_token_indices,
    save_codebook,
    token_names,
    train_rqvae,
)
from .sft_export import (
    generation_records,
    load_sequence_embeddings,
    prediction_records,
    reflection_records,
    split_window,
)
from .token_align import (
    AlignConfig,
    HashedBaseEmbedder,
    align_loss,
    build_pmi,
    export_bidirectional_pairs,
    init_token_embeddings,
    make_projector,
    optimize_embeddings,
    save_embedding_table,
)
from .traj_pipeline import (
    DEFAULT_CELL_SIZE_M,
    DEFAULT_MAX_POINTS,
    DEFAULT_MIN_POINTS,
    DEFAULT_STRIDE_DAYS,
    DEFAULT_WINDOW_DAYS,
    CityGrid,
    assign_grid,
    attach_tokens,
    load_trajectories,
    load_visits,
    save_trajectories,
    window_trajectories,
)

logger = logging.getLogger("trajtok")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _add_global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="global random seed (default 0)")
    p.add_argument("--config", default=None, help="JSON config file; flags override it")
    p.add_argument("--strict", action="store_true", default=None,
                   help="fail on malformed input records instead of skipping")
    p.add_argument("--out-dir", default=None, help="output directory (default '.')")


class Run:
    """Resolved configuration plus manifest bookkeeping for one command."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        file_cfg = read_json(args.config) if args.config else {}
        if not isinstance(file_cfg, dict):
            raise DataError("config file must hold a JSON object")
        self._global_cfg = {k: v for k, v in file_cfg.items() if not isinstance(v, dict)}
        self._cmd_cfg = file_cfg.get(command.replace("-", "_"), {})
        if not isinstance(self._cmd_cfg, dict):
            raise DataError(f"config section {command!r} must be an object")
        self.inputs: dict[str, dict] = {}
        self.outputs: dict[str, str] = {}
        self.config_used: dict = {}
        self.out_dir = Path(self.get("out_dir", "."))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.seed = int(self.get("seed", 0))
        self.strict = bool(self.get("strict", False))

    def get(self, name: str, default):
        flag = getattr(self.args, name, None)
        if flag is not None:
            value = flag
        elif name in self._cmd_cfg:
            value = self._cmd_cfg[name]
        elif name in self._global_cfg:
            value = self._global_cfg[name]
        else:
            value = default
        if name != "out_dir":  # keep manifests location-independent
            self.config_used[name] = value
        return value

    def track_input(self, name: str, path) -> Path:
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing {name} input: {path} (run the upstream command first)")
        self.inputs[name] = {"file": path.name, "sha256": sha256_file(path)}
        return path

    def out_path(self, name: str) -> Path:
        return self.out_dir / name

    def finish(self) -> None:
        for name in sorted(os.listdir(self.out_dir)):
            p = self.out_dir / name
            if p.is_file() and name != "manifest.json":
                self.outputs[name] = sha256_file(p)
        write_json(
            self.out_dir / "manifest.json",
            {
                "command": self.command,
                "version": __version__,
                "config": self.config_used,
                "inputs": self.inputs,
                "outputs": self.outputs,
            },
        )


def _load_city(run: Run, path) -> CityGrid:
    return CityGrid.from_record(read_json(run.track_input("city", path)))


def cmd_preprocess(args) -> int:
    run = Run("preprocess", args)
    city = _load_city(run, args.city)
    visits = load_visits(run.track_input("visits", args.visits), strict=run.strict)
    if not visits:
        logger.warning("no visits parsed from %s; writing empty trajectory file", args.visits)
    trajectories = window_trajectories(
        visits,
        city,
        window_days=int(run.get("window_days", DEFAULT_WINDOW_DAYS)),
        stride_days=int(run.get("stride_days", DEFAULT_STRIDE_DAYS)),
        min_points=int(run.get("min_points", DEFAULT_MIN_POINTS)),
        max_points=int(run.get("max_points", DEFAULT_MAX_POINTS)),
        cell_size_m=float(run.get("cell_size", city.cell_size_m)),
    )
    n = save_trajectories(run.out_path("trajectories.jsonl"), trajectories)
    print(f"preprocess: {len(visits)} visits -> {n} trajectory windows")
    run.finish()
    return 0


def _corpus_vectors(run: Run, args) -> tuple[list[str], np.ndarray]:
    """(sorted location ids, vector matrix) from --embeddings or --profiles."""
    if getattr(args, "embeddings", None):
        table = import_embeddings(run.track_input("embeddings", args.embeddings))
        ids = sorted(table)
        return ids, np.stack([table[i].values for i in ids])
    if getattr(args, "profiles", None):
        profiles = load_profiles(run.track_input("profiles", args.profiles), strict=run.strict)
        dim = int(run.get("dim", 2048))
        ids = sorted(p.location_id for p in profiles)
        by_id = {p.location_id: p for p in profiles}
        vecs = [encode_profile_fallback(by_id[i], d=dim, seed=run.seed).values for i in ids]
        return ids, np.stack(vecs)
    raise DataError("provide --embeddings or --profiles")


def cmd_build_codebook(args) -> int:
    run = Run("build-codebook", args)
    ids, X = _corpus_vectors(run, args)
    encoder_dims = run.get("encoder_dims", None)
    if encoder_dims is None:
        default = list(RQConfig().encoder_dims)
        encoder_dims = default if X.shape[1] == default[0] else [X.shape[1], int(run.get("code_dim", 64))]
    elif isinstance(encoder_dims, str):
        encoder_dims = [int(d) for d in encoder_dims.split(",")]
    config = RQConfig(
        n_layers=int(run.get("n_layers", 4)),
        codebook_size=int(run.get("codebook_size", 512)),
        code_dim=int(run.get("code_dim", encoder_dims[-1])),
        encoder_dims=tuple(encoder_dims),
        alpha=float(run.get("alpha", 0.25)),
        learning_rate=float(run.get("learning_rate", 1e-3)),
        batch_size=int(run.get("batch_size", 1024)),
        seed=run.seed,
        epochs=int(run.get("epochs", 20)),
        weight_decay=float(run.get("weight_decay", 0.01)),
    )
    stack = train_rqvae(X, config)
    save_codebook(stack, run.out_path("codebook.json"))
    write_jsonl(
        run.out_path("training_log.jsonl"),
        ({"epoch": i, **losses} for i, losses in enumerate(stack.epoch_losses)),
    )
    report = codebook_report(stack, X)
    write_json(run.out_path("codebook_report.json"), report.to_record())
    print(
        f"build-codebook: trained on {len(X)} vectors; "
        f"final rec loss {stack.epoch_losses[-1]['rec']:.6g}; "
        f"collision rate {report.collision_rate:.4f}"
    )
    run.finish()
    return 0


def cmd_tokenize(args) -> int:
    run = Run("tokenize", args)
    stack = load_codebook(run.track_input("codebook", args.codebook))
    ids, X = _corpus_vectors(run, args)
    indices = encode_batch(X, stack)
    write_jsonl(
        run.out_path("tokens.jsonl"),
        (
            {
                "location_id": loc,
                "indices": [int(i) for i in row],
                "rendered": render_token_indices(row),
            }
            for loc, row in zip(ids, indices)
        ),
    )
    print(f"tokenize: {len(ids)} locations tokenized")
    if getattr(args, "trajectories", None):
        if not getattr(args, "city", None) or not getattr(args, "profiles", None):
            raise DataError("annotating trajectories requires --city and --profiles")
        city = _load_city(run, args.city)
        profiles = {
            p.location_id: p
            for p in load_profiles(run.track_input("profiles", args.profiles), strict=run.strict)
        }
        cell_tokens: dict[tuple[int, int], tuple[int, ...]] = {}
        for loc, row in zip(ids, indices):
            profile = profiles.get(loc)
            if profile is None:
                continue
            cell = assign_grid(profile.center_lat, profile.center_lon, city)
            cell_tokens[cell] = tuple(int(i) for i in row)
        trajectories = load_trajectories(run.track_input("trajectories", args.trajectories))
        annotated = attach_tokens(trajectories, cell_tokens)
        save_trajectories(run.out_path("tokenized.jsonl"), annotated)
        print(f"tokenize: annotated {len(annotated)} trajectory windows")
    run.finish()
    return 0


def _tokens_map(run: Run, path) -> dict[str, tuple[int, ...]]:
    from .io_utils import iter_jsonl

    out: dict[str, tuple[int, ...]] = {}
    for lineno, rec in iter_jsonl(run.track_input("tokens", path)):
        try:
            out[str(rec["location_id"])] = tuple(int(i) for i in rec["indices"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad tokens record ({exc})") from exc
    if not out:
        raise DataError(f"{path}: no token records")
    return out


def cmd_align(args) -> int:
    run = Run("align", args)
    stack = load_codebook(run.track_input("codebook", args.codebook))
    tokens = _tokens_map(run, args.tokens)
    targets = import_embeddings(run.track_input("targets", args.targets))
    missing = sorted(set(tokens) - set(targets))
    if missing:
        raise DataError(f"locations without target vectors: {missing[:3]}")

    cfg = AlignConfig(
        lambda_prior=float(run.get("lambda_prior", 0.1)),
        lambda_coh=float(run.get("lambda_coh", 0.01)),
        learning_rate=float(run.get("learning_rate", 0.1)),
        epochs=int(run.get("epochs", 200)),
        seed=run.seed,
        neighborhood_radius_cells=int(run.get("radius", 1)),
    )
    vocabulary = token_names(stack.config.n_layers, stack.config.codebook_size)
    embedder = HashedBaseEmbedder(d_emb=int(run.get("d_emb", 64)), seed=run.seed)
    table = init_token_embeddings(vocabulary, embedder)

    pmi = None
    if getattr(args, "profiles", None) and getattr(args, "city", None):
        city = _load_city(run, args.city)
        profiles = load_profiles(run.track_input("profiles", args.profiles), strict=run.strict)
        grid = {
            p.location_id: assign_grid(p.center_lat, p.center_lon, city)
            for p in profiles
            if p.location_id in tokens
        }
        pmi = build_pmi(
            {loc: tokens[loc] for loc in grid},
            grid,
            radius=cfg.neighborhood_radius_cells,
        )

    dataset = [(tokens[loc], targets[loc].values) for loc in sorted(tokens)]
    d_out = len(dataset[0][1])
    table.projector = make_projector(d_out, table.d_emb, cfg.seed)
    start = align_loss(table, dataset, table.projector, pmi, cfg)
    optimized = optimize_embeddings(table, dataset, pmi, cfg)
    end = align_loss(optimized, dataset, optimized.projector, pmi, cfg)
    save_embedding_table(optimized, run.out_path("embedding_table.json"))
    write_json(
        run.out_path("align_log.json"),
        {
            "start": {"total": start.total, "main": start.main, "prior": start.prior, "coh": start.coh},
            "end": {"total": end.total, "main": end.main, "prior": end.prior, "coh": end.coh},
            "n_samples": len(dataset),
            "n_positive_pairs": 0 if pmi is None else len(pmi.positive_pairs()),
        },
    )
    print(f"align: total loss {start.total:.6g} -> {end.total:.6g} over {cfg.epochs} epochs")
    run.finish()
    return 0


def cmd_export_sft(args) -> int:
    run = Run("export-sft", args)
    corpus = args.corpus
    periods = DEFAULT_PERIODS
    if corpus == "geo":
        tokens = _tokens_map(run, args.tokens)
        profiles = {
            p.location_id: p
            for p in load_profiles(run.track_input("profiles", args.profiles), strict=run.strict)
        }
        seqs = {loc: LocationTokenSeq(idx) for loc, idx in tokens.items()}
        records = export_bidirectional_pairs(seqs, profiles)
        out_name = "sft_geo.jsonl"
    else:
        trajectories = load_trajectories(run.track_input("trajectories", args.trajectories))
        seq_map = None
        if getattr(args, "sequence_embeddings", None):
            seq_map = load_sequence_embeddings(
                run.track_input("sequence_embeddings", args.sequence_embeddings)
            )
        if corpus == "prediction":
            records = prediction_records(trajectories, periods, seq_map)
            out_name = "sft_prediction.jsonl"
        elif corpus == "generation":
            records = generation_records(trajectories, periods, seq_map)
            out_name = "sft_generation.jsonl"
        elif corpus == "reflection":
            records = reflection_records(
                trajectories, periods, budget=int(run.get("budget", 10))
            )
            out_name = "sft_reflection.jsonl"
        else:
            raise DataError(f"unknown corpus {corpus!r}")
    n = write_jsonl(run.out_path(out_name), records)
    print(f"export-sft: wrote {n} {corpus} records to {out_name}")
    run.finish()
    return 0


def cmd_evaluate(args) -> int:
    run = Run("evaluate", args)
    generated = load_trajectories(run.track_input("generated", args.generated))
    truth = load_trajectories(run.track_input("truth", args.truth))
    report = evaluate_generation(
        generated,
        truth,
        max_n=int(run.get("max_n", 4)),
        corpus_bleu=bool(run.get("corpus_bleu", False)),
        per_user=bool(run.get("per_user", False)),
    )
    write_jsonl(run.out_path("eval_report.jsonl"), [report.to_record()])
    write_json(
        run.out_path("eval_plot_data.json"),
        {
            "time_counts": report.time_counts,
            "location_counts_generated": report.location_counts_generated,
            "location_counts_truth": report.location_counts_truth,
        },
    )
    r = report.to_record()
    print(
        "evaluate: time bleu/tvd/jsd = "
        f"{r['time_bleu']:.4f}/{r['time_tvd']:.4f}/{r['time_jsd']:.4f}; "
        "location bleu/tvd/jsd = "
        f"{r['location_bleu']:.4f}/{r['location_tvd']:.4f}/{r['location_jsd']:.4f}"
    )
    run.finish()
    return 0


def cmd_reward(args) -> int:
    run = Run("reward", args)
    generated = load_trajectories(run.track_input("generated", args.generated))
    truth = {(t.user_id, t.window_start_day): t for t in load_trajectories(run.track_input("truth", args.truth))}
    groups: dict[tuple[str, int], list] = {}
    for traj in generated:
        groups.setdefault((traj.user_id, traj.window_start_day), []).append(traj)
    rows = []
    with_adv = bool(run.get("advantages", False))
    for key in sorted(groups, key=str):
        if key not in truth:
            raise DataError(f"no ground-truth window for {key}")
        breakdowns = [total_reward(t, truth[key]) for t in groups[key]]
        advantages = None
        if with_adv and len(breakdowns) >= 2:
            advantages = group_advantages([b.total for b in breakdowns])
        for i, b in enumerate(breakdowns):
            row = {"sample_id": f"{key[0]}:{key[1]}#{i}", **b.to_record()}
            if advantages is not None:
                row["advantage"] = advantages[i]
            rows.append(row)
    write_jsonl(run.out_path("rewards.jsonl"), rows)
    print(f"reward: scored {len(rows)} generated trajectories")
    run.finish()
    return 0


def cmd_refine(args) -> int:
    run = Run("refine", args)
    trajectories = load_trajectories(run.track_input("trajectories", args.trajectories))
    budget = int(run.get("budget", 10))
    rows = []
    from .mobility_stats import extract_features
    from .sft_export import baseline_from_history

    baselines = {}
    if getattr(args, "generated", None):
        for t in load_trajectories(run.track_input("generated", args.generated)):
            baselines[(t.user_id, t.window_start_day)] = [
                (p.slot, p.location_key) for p in t.points
            ]
    for traj in trajectories:
        history, future = split_window(traj)
        if not history or not future:
            continue
        key = (traj.user_id, traj.window_start_day)
        baseline = baselines.get(key) or baseline_from_history(history)
        target = extract_features([(p.slot, p.location_key) for p in future])
        allowed = allowed_locations_for(
            [(p.slot, p.location_key) for p in history], baseline, target
        )
        result = refine_loop(baseline, target, allowed, budget)
        rows.append(
            {"user_id": traj.user_id, "window_start_day": traj.window_start_day, **result.to_record()}
        )
    n = write_jsonl(run.out_path("refine.jsonl"), rows)
    satisfied = sum(1 for r in rows if r["satisfied"])
    print(f"refine: {satisfied}/{n} windows satisfied within budget {budget}")
    run.finish()
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="trajtok", description=__doc__)
    parser.add_argument("--version", action="version", version=f"trajtok {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="raw visits -> canonical trajectory windows")
    p.add_argument("--visits", required=True, help="line-delimited raw visit records")
    p.add_argument("--city", required=True, help="city grid JSON config")
    p.add_argument("--cell-size", dest="cell_size", type=float, default=None,
                   help=f"grid cell size in metres (default {DEFAULT_CELL_SIZE_M:g})")
    p.add_argument("--window-days", dest="window_days", type=int, default=None,
                   help=f"sliding window length in days (default {DEFAULT_WINDOW_DAYS})")
    p.add_argument("--stride-days", dest="stride_days", type=int, default=None,
                   help=f"window stride in days (default {DEFAULT_STRIDE_DAYS})")
    p.add_argument("--min-points", dest="min_points", type=int, default=None,
                   help=f"drop windows with fewer points (default {DEFAULT_MIN_POINTS})")
    p.add_argument("--max-points", dest="max_points", type=int, default=None,
                   help=f"keep the most recent points up to this count (default {DEFAULT_MAX_POINTS})")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("build-codebook", help="train the residual-quantized autoencoder")
    p.add_argument("--embeddings", default=None, help="semantic vectors file")
    p.add_argument("--profiles", default=None, help="location profiles (fallback encoder)")
    p.add_argument("--dim", type=int, default=None, help="fallback vector dimension (default 2048)")
    p.add_argument("--n-layers", dest="n_layers", type=int, default=None, help="codebook layers (default 4)")
    p.add_argument("--codebook-size", dest="codebook_size", type=int, default=None,
                   help="codewords per layer (default 512)")
    p.add_argument("--code-dim", dest="code_dim", type=int, default=None, help="codeword dimension (default 64)")
    p.add_argument("--encoder-dims", dest="encoder_dims", default=None,
                   help="comma-separated MLP dims (default 2048,1024,512,256,128,64)")
    p.add_argument("--alpha", type=float, default=None, help="commitment weight (default 0.25)")
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None,
                   help="AdamW learning rate (default 1e-3)")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None, help="batch size (default 1024)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 20)")
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None,
                   help="decoupled weight decay (default 0.01)")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_build_codebook)

    p = sub.add_parser("tokenize", help="assign location token sequences with a trained codebook")
    p.add_argument("--codebook", required=True, help="codebook artifact from build-codebook")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--profiles", default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--trajectories", default=None, help="annotate this trajectory file with tokens")
    p.add_argument("--city", default=None, help="city grid JSON (required with --trajectories)")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("align", help="stage-1 token-embedding alignment")
    p.add_argument("--codebook", required=True)
    p.add_argument("--tokens", required=True, help="tokens file from tokenize")
    p.add_argument("--targets", required=True, help="pre-quantization semantic vectors")
    p.add_argument("--profiles", default=None, help="profiles for PMI grid positions")
    p.add_argument("--city", default=None)
    p.add_argument("--lambda-prior", dest="lambda_prior", type=float, default=None)
    p.add_argument("--lambda-coh", dest="lambda_coh", type=float, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--d-emb", dest="d_emb", type=int, default=None, help="token embedding dim (default 64)")
    p.add_argument("--radius", type=int, default=None, help="PMI neighborhood radius in cells (default 1)")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("export-sft", help="emit instruction-tuning corpora")
    p.add_argument("--corpus", required=True, choices=["geo", "prediction", "generation", "reflection"])
    p.add_argument("--tokens", default=None, help="tokens file (geo corpus)")
    p.add_argument("--profiles", default=None, help="profiles file (geo corpus)")
    p.add_argument("--trajectories", default=None, help="trajectory windows (other corpora)")
    p.add_argument("--sequence-embeddings", dest="sequence_embeddings", default=None,
                   help="opaque per-window vectors embedded verbatim")
    p.add_argument("--budget", type=int, default=None, help="refinement edit budget (default 10)")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_export_sft)

    p = sub.add_parser("evaluate", help="score generated trajectories against ground truth")
    p.add_argument("--generated", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--max-n", dest="max_n", type=int, default=None, help="BLEU n-gram order (default 4)")
    p.add_argument("--corpus-bleu", dest="corpus_bleu", action="store_true", default=None,
                   help="corpus-level BLEU instead of the sentence-averaged default")
    p.add_argument("--per-user", dest="per_user", action="store_true", default=None,
                   help="average per-user distribution metrics instead of pooling")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("reward", help="distribution/length rewards and group advantages")
    p.add_argument("--generated", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--advantages", action="store_true", default=None,
                   help="standardize rewards within same-window groups")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_reward)

    p = sub.add_parser("refine", help="run the minimal-edit refinement loop per window")
    p.add_argument("--trajectories", required=True, help="3-day windows; day 3 provides target features")
    p.add_argument("--generated", default=None, help="optional baseline trajectories")
    p.add_argument("--budget", type=int, default=None, help="edit budget (default 10)")
    _add_global_flags(p)
    p.set_defaults(fn=cmd_refine)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NumericsError as exc:
        sys.stderr.write(f"trajtok {args.command}: numerical failure: {exc}\n")
        return 3
    except (DataError, TrajtokError) as exc:
        sys.stderr.write(f"trajtok {args.command}: {exc}\n")
        return 2
    except FileNotFoundError as exc:
        sys.stderr.write(f"trajtok {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
