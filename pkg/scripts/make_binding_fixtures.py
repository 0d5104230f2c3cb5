#!/usr/bin/env python3
"""Generate the shared fixture corpus for the frontend bindings.

Everything the TypeScript parity suite asserts against is produced here by
the core package (token sequences via the actual CLI), so the bindings are
tested against real artifacts and real expected outputs.
"""

import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from trajtok.eval_metrics import Distribution, bleu, hit_rate_at_k, jsd, tvd
from trajtok.io_utils import read_jsonl, write_json
from trajtok.mobility_stats import extract_features
from trajtok.reward_edit import group_advantages, total_reward
from trajtok.rq_codebook import RQConfig, save_codebook, train_rqvae
from trajtok.synthetic import make_cluster_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"),
    )
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20260810)

    # --- codebook artifact + encode expectations (via the CLI) ---
    X, _, centers = make_cluster_corpus(16, 48, 24, separation=8.0, spread=0.05, seed=21)
    config = RQConfig(
        n_layers=3, codebook_size=16, code_dim=8, encoder_dims=(24, 12, 8),
        alpha=0.25, learning_rate=5e-3, batch_size=128, seed=9, epochs=15,
    )
    stack = train_rqvae(X, config)
    save_codebook(stack, out / "codebook.json")

    bad = json.loads((out / "codebook.json").read_text())
    bad["version"] = 999
    (out / "codebook_v999.json").write_text(json.dumps(bad, sort_keys=True, separators=(",", ":")) + "\n")

    # 1,000 query vectors: cluster points plus noise, tokenized by the CLI
    queries = np.vstack(
        [
            centers[rng.integers(len(centers), size=1000 - 100)]
            + rng.normal(0.0, 0.05, size=(900, 24)),
            rng.normal(0.0, 4.0, size=(100, 24)),
        ]
    )
    with tempfile.TemporaryDirectory() as td:
        emb_path = Path(td) / "queries.jsonl"
        with open(emb_path, "w") as fh:
            for i, row in enumerate(queries):
                fh.write(json.dumps({"location_id": f"v-{i:04d}", "values": row.tolist()}) + "\n")
        subprocess.run(
            [
                sys.executable, "-m", "trajtok.cli", "tokenize",
                "--codebook", str(out / "codebook.json"),
                "--embeddings", str(emb_path),
                "--out-dir", td,
            ],
            check=True,
            cwd=Path(__file__).resolve().parent.parent,
            env={"PYTHONPATH": str(Path(__file__).resolve().parent.parent / "src"), "PATH": "/usr/bin:/bin"},
        )
        tokens = {rec["location_id"]: rec for rec in read_jsonl(Path(td) / "tokens.jsonl")}
    write_json(
        out / "encode_cases.json",
        {
            "vectors": [row.tolist() for row in queries],
            "expected_indices": [tokens[f"v-{i:04d}"]["indices"] for i in range(len(queries))],
            "expected_rendered": [tokens[f"v-{i:04d}"]["rendered"] for i in range(len(queries))],
        },
    )

    # --- metric expectations ---
    dist_cases = []
    for _ in range(60):
        n = int(rng.integers(2, 9))
        labels = [f"c{j}" for j in range(n)]
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        if rng.random() < 0.3:
            q[int(rng.integers(n))] = 0.0
            q = q / q.sum()
        P = Distribution(tuple(labels), tuple(p))
        Q = Distribution(tuple(labels), tuple(q))
        dist_cases.append(
            {
                "p": dict(zip(labels, p.tolist())),
                "q": dict(zip(labels, q.tolist())),
                "tvd": tvd(P, Q),
                "jsd": jsd(P, Q),
            }
        )
    dist_cases.append(
        {"p": {"a": 0.7, "b": 0.3}, "q": {"a": 0.5, "b": 0.5},
         "tvd": tvd(Distribution(("a", "b"), (0.7, 0.3)), Distribution(("a", "b"), (0.5, 0.5))),
         "jsd": jsd(Distribution(("a", "b"), (0.7, 0.3)), Distribution(("a", "b"), (0.5, 0.5)))}
    )

    bleu_cases = []
    for _ in range(60):
        cand = [int(x) for x in rng.integers(0, 5, size=rng.integers(1, 12))]
        ref = [int(x) for x in rng.integers(0, 5, size=rng.integers(1, 12))]
        max_n = int(rng.integers(1, 5))
        bleu_cases.append(
            {"candidate": cand, "reference": ref, "max_n": max_n, "expected": bleu(cand, ref, max_n=max_n)}
        )
    bleu_cases.append(
        {"candidate": [1, 2, 3, 4], "reference": [1, 2, 3, 4], "max_n": 4, "expected": 1.0}
    )

    hit_cases = []
    for _ in range(20):
        m = int(rng.integers(1, 8))
        rankings = [[int(x) for x in rng.permutation(6)] for _ in range(m)]
        truths = [int(rng.integers(6)) for _ in range(m)]
        k = int(rng.integers(1, 7))
        hit_cases.append(
            {"rankings": rankings, "truths": truths, "k": k,
             "expected": hit_rate_at_k(rankings, truths, k)}
        )

    write_json(out / "metric_cases.json", {"distributions": dist_cases, "bleu": bleu_cases, "hit_rate": hit_cases})

    # --- feature extraction expectations ---
    feature_cases = []
    for _ in range(40):
        n = int(rng.integers(1, 20))
        points = [
            [int(rng.integers(48)), f"L{int(rng.integers(6))}"] for _ in range(n)
        ]
        points.sort()
        fs = extract_features([(s, k) for s, k in points])
        feature_cases.append(
            {
                "points": points,
                "expected": {
                    "frequent_locations": list(fs.frequent_locations),
                    "period_prob_steps": dict(sorted(fs.period_prob_steps.items())),
                    "period_frequent": {k: list(v) for k, v in sorted(fs.period_frequent.items())},
                    "length": fs.length,
                },
            }
        )
    write_json(out / "feature_cases.json", feature_cases)

    # --- reward and advantage expectations ---
    reward_cases = []
    for _ in range(40):
        n = int(rng.integers(1, 15))
        m = int(rng.integers(1, 15))
        traj = sorted([[int(rng.integers(48)), f"L{int(rng.integers(4))}"] for _ in range(n)])
        truth = sorted([[int(rng.integers(48)), f"L{int(rng.integers(4))}"] for _ in range(m)])
        b = total_reward([(s, k) for s, k in traj], [(s, k) for s, k in truth])
        reward_cases.append(
            {"traj": traj, "truth": truth, "matched_features": b.matched_features,
             "r_distribution": b.r_distribution, "r_length": b.r_length, "total": b.total}
        )
    identity = sorted([[2, "A"], [2, "A"], [13, "B"], [25, "C"], [40, "B"]])
    b = total_reward([(s, k) for s, k in identity], [(s, k) for s, k in identity])
    reward_cases.append(
        {"traj": identity, "truth": identity, "matched_features": b.matched_features,
         "r_distribution": b.r_distribution, "r_length": b.r_length, "total": b.total}
    )

    advantage_cases = []
    for _ in range(25):
        size = int(rng.integers(2, 10))
        rewards = [float(x) for x in rng.normal(0, 5, size=size)]
        advantage_cases.append({"rewards": rewards, "expected": group_advantages(rewards)})
    advantage_cases.append({"rewards": [0.0, 2.0], "expected": [-1.0, 1.0]})
    advantage_cases.append({"rewards": [1.0, 1.0, 1.0], "expected": [0.0, 0.0, 0.0]})
    write_json(out / "reward_cases.json", {"rewards": reward_cases, "advantages": advantage_cases})

    print(f"binding fixtures written to {out}")


if __name__ == "__main__":
    main()
