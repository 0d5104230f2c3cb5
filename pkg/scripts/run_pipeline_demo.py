#!/usr/bin/env python3
"""End-to-end demo on synthetic data.

Generates a toy city (profiles + visit logs), then drives the CLI through
preprocess -> build-codebook -> tokenize -> align -> export-sft ->
evaluate -> reward -> refine, leaving every artifact under --out.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from trajtok.cli import main as cli_main
from trajtok.geo_profile import encode_profile_fallback, export_embeddings, save_profiles
from trajtok.io_utils import write_json, write_jsonl
from trajtok.synthetic import make_city, make_location_profiles, make_visits


def run(*argv):
    argv = [str(a) for a in argv]
    code = cli_main(argv)
    if code != 0:
        sys.exit(f"command failed ({code}): trajtok {' '.join(argv)}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_out", help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--users", type=int, default=5)
    parser.add_argument("--days", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    city = make_city()
    write_json(out / "city.json", city.to_record())
    profiles = make_location_profiles(32, city, seed=args.seed)
    save_profiles(out / "profiles.jsonl", profiles)
    visits = make_visits(profiles, n_users=args.users, days=args.days, seed=args.seed)
    write_jsonl(
        out / "visits.jsonl",
        (
            {"user_id": v.user_id, "timestamp": v.timestamp, "lat": v.lat, "lon": v.lon}
            for v in visits
        ),
    )
    vectors = {p.location_id: encode_profile_fallback(p, d=48, seed=args.seed) for p in profiles}
    export_embeddings(out / "targets.jsonl", vectors)
    print(f"demo inputs: {len(profiles)} locations, {len(visits)} visits -> {out}")

    run("preprocess", "--visits", out / "visits.jsonl", "--city", out / "city.json",
        "--out-dir", out / "pre", "--seed", args.seed)
    run("build-codebook", "--profiles", out / "profiles.jsonl", "--dim", 48,
        "--n-layers", 2, "--codebook-size", 8, "--code-dim", 16,
        "--encoder-dims", "48,16", "--learning-rate", 0.01, "--batch-size", 32,
        "--epochs", 10, "--seed", args.seed, "--out-dir", out / "cb")
    run("tokenize", "--codebook", out / "cb" / "codebook.json",
        "--profiles", out / "profiles.jsonl", "--dim", 48, "--seed", args.seed,
        "--trajectories", out / "pre" / "trajectories.jsonl", "--city", out / "city.json",
        "--out-dir", out / "tok")
    run("align", "--codebook", out / "cb" / "codebook.json",
        "--tokens", out / "tok" / "tokens.jsonl", "--targets", out / "targets.jsonl",
        "--profiles", out / "profiles.jsonl", "--city", out / "city.json",
        "--epochs", 30, "--d-emb", 16, "--seed", args.seed, "--out-dir", out / "align")
    run("export-sft", "--corpus", "geo", "--tokens", out / "tok" / "tokens.jsonl",
        "--profiles", out / "profiles.jsonl", "--out-dir", out / "sft_geo")
    for corpus in ("prediction", "generation", "reflection"):
        run("export-sft", "--corpus", corpus,
            "--trajectories", out / "tok" / "tokenized.jsonl", "--out-dir", out / f"sft_{corpus}")
    run("evaluate", "--generated", out / "tok" / "tokenized.jsonl",
        "--truth", out / "tok" / "tokenized.jsonl", "--out-dir", out / "eval")
    run("reward", "--generated", out / "pre" / "trajectories.jsonl",
        "--truth", out / "pre" / "trajectories.jsonl", "--out-dir", out / "reward")
    run("refine", "--trajectories", out / "pre" / "trajectories.jsonl",
        "--budget", 10, "--out-dir", out / "refine")
    print(f"demo complete; artifacts under {out}/")


if __name__ == "__main__":
    main()
