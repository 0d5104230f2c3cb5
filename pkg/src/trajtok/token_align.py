"""Alignment of codeword-token embeddings with the original semantic space.

New tokens start at the mean of their surface-string piece embeddings.
A composite loss then refines them: a cosine hinge between the projected
mean embedding of each location ID and its pre-quantization semantic
vector, an anchor penalty on deviation from the initial embeddings, and a
PMI-weighted coherence term pulling geographically co-occurring tokens
together. Also exports the bidirectional (location description <-> token
ID) instruction pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from . import ARTIFACT_FORMAT_VERSION
from .errors import ArtifactError, DataError, NumericsError
from .geo_profile import LocationProfile, render_profile_text
from .io_utils import read_json, write_json
from .rq_codebook import LocationTokenSeq
from .templates import ID2LOC_TEMPLATE, LOC2ID_TEMPLATE


class BaseEmbedder(Protocol):
    """Maps surface strings to piece lists and pieces to d_emb vectors."""

    d_emb: int

    def split(self, surface: str) -> list[str]: ...

    def embed(self, piece: str) -> np.ndarray: ...


class HashedBaseEmbedder:
    """Deterministic character-trigram embedder; no vocabulary needed."""

    def __init__(self, d_emb: int = 64, seed: int = 0):
        if d_emb < 2:
            raise DataError("d_emb must be >= 2")
        self.d_emb = d_emb
        self.seed = seed

    def split(self, surface: str) -> list[str]:
        if len(surface) < 3:
            return [surface]
        return [surface[i : i + 3] for i in range(len(surface) - 2)]

    def embed(self, piece: str) -> np.ndarray:
        digest = hashlib.blake2b(
            piece.encode("utf-8"), digest_size=8, key=self.seed.to_bytes(8, "little")
        ).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
        return rng.normal(0.0, 1.0, size=self.d_emb) / np.sqrt(self.d_emb)


class TableBaseEmbedder:
    """Greedy longest-match splitter over an imported piece-vector table."""

    def __init__(self, table: Mapping[str, np.ndarray]):
        if not table:
            raise DataError("empty base-embedding table")
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        dims = {v.shape for v in self.table.values()}
        if len(dims) != 1:
            raise DataError("base-embedding table has mixed dimensions")
        self.d_emb = int(next(iter(dims))[0])
        self._max_len = max(len(k) for k in self.table)

    def split(self, surface: str) -> list[str]:
        pieces = []
        at = 0
        while at < len(surface):
            for size in range(min(self._max_len, len(surface) - at), 0, -1):
                piece = surface[at : at + size]
                if piece in self.table:
                    pieces.append(piece)
                    at += size
                    break
            else:
                raise DataError(f"no table piece matches {surface[at:]!r} in {surface!r}")
        return pieces

    def embed(self, piece: str) -> np.ndarray:
        try:
            return self.table[piece]
        except KeyError:
            raise DataError(f"piece {piece!r} not in base-embedding table") from None


@dataclass
class Projector:
    """Single affine map from embedding space to the target semantic space."""

    weight: np.ndarray  # (d_out, d_emb)
    bias: np.ndarray  # (d_out,)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.weight @ z + self.bias

    def to_record(self) -> dict:
        return {"weight": self.weight.tolist(), "bias": self.bias.tolist()}

    @staticmethod
    def from_record(rec: dict) -> "Projector":
        return Projector(
            np.asarray(rec["weight"], dtype=np.float64),
            np.asarray(rec["bias"], dtype=np.float64),
        )


@dataclass
class EmbeddingTable:
    tokens: list[str]
    vectors: np.ndarray  # (n_tokens, d_emb)
    initial_vectors: np.ndarray  # frozen e_t^(0)
    projector: Projector | None = None
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        if len(self.tokens) != len(self.vectors):
            raise DataError("token/vector count mismatch")
        if self.vectors.shape != self.initial_vectors.shape:
            raise DataError("vectors and initial_vectors shape mismatch")
        if not np.all(np.isfinite(self.vectors)):
            raise NumericsError("non-finite embedding")
        self.initial_vectors.setflags(write=False)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise DataError("duplicate token names")

    @property
    def d_emb(self) -> int:
        return int(self.vectors.shape[1])

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(
            tokens=list(self.tokens),
            vectors=self.vectors.copy(),
            initial_vectors=self.initial_vectors.copy(),
            projector=None
            if self.projector is None
            else Projector(self.projector.weight.copy(), self.projector.bias.copy()),
        )


def init_token_embeddings(tokens: Sequence[str], base_embedder: BaseEmbedder) -> EmbeddingTable:
    """Each token starts at the mean embedding of its surface-string pieces."""
    if not tokens:
        raise DataError("empty token list")
    rows = []
    for token in tokens:
        pieces = base_embedder.split(token)
        if not pieces:
            raise DataError(f"token {token!r} split into no pieces")
        rows.append(np.mean([base_embedder.embed(p) for p in pieces], axis=0))
    vectors = np.asarray(rows, dtype=np.float64)
    return EmbeddingTable(list(tokens), vectors.copy(), vectors.copy())


@dataclass
class CooccurrenceModel:
    pair_counts: dict[tuple[str, str], int]
    token_counts: dict[str, int]
    total_windows: int
    pmi_floor: float = 0.0

    def pmi(self, t: str, u: str) -> float:
        key = (t, u) if t <= u else (u, t)
        joint = self.pair_counts.get(key, 0)
        if joint == 0:
            return self.pmi_floor
        ct, cu = self.token_counts.get(t, 0), self.token_counts.get(u, 0)
        value = float(np.log(joint * self.total_windows / (ct * cu)))
        return max(value, self.pmi_floor)

    def positive_pairs(self) -> list[tuple[str, str, float]]:
        """The pair set of the coherence loss: distinct pairs with PMI above 0."""
        out = []
        for (t, u), _ in sorted(self.pair_counts.items()):
            if t == u:
                continue
            w = self.pmi(t, u)
            if w > 0.0:
                out.append((t, u, w))
        return out


def build_pmi(
    locations: Mapping[str, LocationTokenSeq | Sequence[int] | Sequence[str]],
    grid_positions: Mapping[str, tuple[int, int]],
    radius: int = 1,
    pmi_floor: float = 0.0,
) -> CooccurrenceModel:
    """Token co-occurrence over grid neighborhoods.

    A window is the set of locations within Chebyshev distance ``radius``
    of an occupied cell; tokens co-occur when they appear in the location
    IDs of the same window. Probabilities are window-presence frequencies.
    """
    if not locations:
        raise DataError("empty location set")
    token_sets: dict[str, tuple[str, ...]] = {}
    for loc_id, tokens in locations.items():
        if loc_id not in grid_positions:
            raise DataError(f"location {loc_id!r} has no grid cell")
        if isinstance(tokens, LocationTokenSeq):
            names = tuple(
                f"<{chr(ord('a') + n)}_{i}>" for n, i in enumerate(tokens.indices)
            )
        elif tokens and isinstance(next(iter(tokens)), str):
            names = tuple(str(t) for t in tokens)
        else:
            names = tuple(f"<{chr(ord('a') + n)}_{int(i)}>" for n, i in enumerate(tokens))
        token_sets[loc_id] = names

    by_cell: dict[tuple[int, int], list[str]] = {}
    for loc_id in sorted(token_sets):
        by_cell.setdefault(tuple(grid_positions[loc_id]), []).append(loc_id)

    pair_counts: dict[tuple[str, str], int] = {}
    token_counts: dict[str, int] = {}
    cells = sorted(by_cell)
    for row, col in cells:
        present: set[str] = set()
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                for loc_id in by_cell.get((row + dr, col + dc), ()):
                    present.update(token_sets[loc_id])
        ordered = sorted(present)
        for i, t in enumerate(ordered):
            token_counts[t] = token_counts.get(t, 0) + 1
            for u in ordered[i + 1 :]:
                key = (t, u)
                pair_counts[key] = pair_counts.get(key, 0) + 1
    return CooccurrenceModel(pair_counts, token_counts, len(cells), pmi_floor)


@dataclass(frozen=True)
class AlignConfig:
    lambda_prior: float = 0.1
    lambda_coh: float = 0.01
    learning_rate: float = 0.1
    epochs: int = 200
    seed: int = 0
    neighborhood_radius_cells: int = 1

    def __post_init__(self):
        if self.lambda_prior < 0 or self.lambda_coh < 0:
            raise DataError("loss weights must be non-negative")


@dataclass
class AlignLoss:
    total: float
    main: float
    prior: float
    coh: float


def _batch_token_rows(table: EmbeddingTable, batch) -> list[tuple[list[int], np.ndarray]]:
    rows = []
    for sample_idx, (tokens, target) in enumerate(batch):
        if isinstance(tokens, LocationTokenSeq):
            names = [f"<{chr(ord('a') + n)}_{i}>" for n, i in enumerate(tokens.indices)]
        elif tokens and isinstance(tokens[0], str):
            names = [str(t) for t in tokens]
        else:
            names = [f"<{chr(ord('a') + n)}_{int(i)}>" for n, i in enumerate(tokens)]
        try:
            idx = [table.index[n] for n in names]
        except KeyError as exc:
            raise DataError(f"sample {sample_idx}: unknown token {exc.args[0]!r}") from exc
        y = np.asarray(
            target.values if hasattr(target, "values") else target, dtype=np.float64
        )
        rows.append((idx, y))
    return rows


def align_loss(
    table: EmbeddingTable,
    batch,
    projector: Projector,
    pmi: CooccurrenceModel | None,
    cfg: AlignConfig,
) -> AlignLoss:
    loss, _, _, _ = align_loss_and_grads(table, batch, projector, pmi, cfg)
    return loss


def align_loss_and_grads(
    table: EmbeddingTable,
    batch,
    projector: Projector,
    pmi: CooccurrenceModel | None,
    cfg: AlignConfig,
) -> tuple[AlignLoss, np.ndarray, np.ndarray, np.ndarray]:
    """Composite loss and analytic gradients (d vectors, d W, d b).

    The cosine hinge contributes per sample max(0, 1 - cos(projected mean
    embedding, target)); the anchor term averages squared displacement
    from the initial embeddings over all tokens; the coherence term
    averages PMI-weighted squared distances over the positive-PMI pair
    set.
    """
    if not batch:
        raise DataError("empty alignment batch")
    rows = _batch_token_rows(table, batch)
    E = table.vectors
    W, b = projector.weight, projector.bias
    grad_E = np.zeros_like(E)
    grad_W = np.zeros_like(W)
    grad_b = np.zeros_like(b)

    main_sum = 0.0
    B = len(rows)
    for sample_idx, (token_rows, y) in enumerate(rows):
        z = E[token_rows].mean(axis=0)
        y_hat = W @ z + b
        ny, nt = float(np.linalg.norm(y_hat)), float(np.linalg.norm(y))
        if ny == 0.0 or nt == 0.0:
            raise DataError(
                f"sample {sample_idx}: cosine undefined (zero-norm "
                f"{'projection' if ny == 0.0 else 'target'})"
            )
        cos = float(y_hat @ y) / (ny * nt)
        hinge = max(0.0, 1.0 - cos)
        main_sum += hinge
        if hinge > 0.0:
            dcos_dyhat = y / (ny * nt) - cos * y_hat / (ny * ny)
            dyhat = -dcos_dyhat / B
            grad_W += np.outer(dyhat, z)
            grad_b += dyhat
            dz = W.T @ dyhat
            share = 1.0 / len(token_rows)
            for r in token_rows:
                grad_E[r] += dz * share
    main = main_sum / B

    M = len(table.tokens)
    disp = E - table.initial_vectors
    prior = float((disp**2).sum()) / M
    grad_E += cfg.lambda_prior * 2.0 * disp / M

    coh = 0.0
    if pmi is not None:
        pairs = pmi.positive_pairs()
        if pairs:
            inv = 1.0 / len(pairs)
            for t, u, w in pairs:
                it = table.index.get(t)
                iu = table.index.get(u)
                if it is None or iu is None:
                    continue
                diff = E[it] - E[iu]
                coh += w * float((diff**2).sum())
                g = cfg.lambda_coh * inv * 2.0 * w * diff
                grad_E[it] += g
                grad_E[iu] -= g
            coh *= inv

    total = main + cfg.lambda_prior * prior + cfg.lambda_coh * coh
    return AlignLoss(total, main, prior, coh), grad_E, grad_W, grad_b


def make_projector(d_out: int, d_emb: int, seed: int) -> Projector:
    rng = np.random.default_rng(seed)
    return Projector(rng.normal(0.0, 1.0 / np.sqrt(d_emb), size=(d_out, d_emb)), np.zeros(d_out))


def optimize_embeddings(
    table: EmbeddingTable,
    dataset,
    pmi: CooccurrenceModel | None,
    cfg: AlignConfig,
) -> EmbeddingTable:
    """Full-batch gradient descent on embeddings and projector.

    Steps that would increase the total loss are reverted with a halved
    learning rate, so the final loss never exceeds the initial one.
    Deterministic under the config seed.
    """
    out = table.copy()
    if out.projector is None:
        if not dataset:
            raise DataError("empty alignment dataset")
        d_out = len(np.asarray(dataset[0][1].values if hasattr(dataset[0][1], "values") else dataset[0][1]))
        out.projector = make_projector(d_out, out.d_emb, cfg.seed)
    if cfg.epochs == 0:
        return out

    lr = cfg.learning_rate
    loss, gE, gW, gb = align_loss_and_grads(out, dataset, out.projector, pmi, cfg)
    current = loss.total
    for _ in range(cfg.epochs):
        if not np.isfinite(current):
            raise NumericsError("NaN alignment loss")
        cand_E = out.vectors - lr * gE
        cand_W = out.projector.weight - lr * gW
        cand_b = out.projector.bias - lr * gb
        candidate = EmbeddingTable(
            tokens=list(out.tokens),
            vectors=cand_E,
            initial_vectors=out.initial_vectors.copy(),
            projector=Projector(cand_W, cand_b),
        )
        new_loss, nE, nW, nb = align_loss_and_grads(candidate, dataset, candidate.projector, pmi, cfg)
        if new_loss.total <= current:
            out = candidate
            current = new_loss.total
            gE, gW, gb = nE, nW, nb
        else:
            lr *= 0.5
    return out


def export_bidirectional_pairs(
    locations: Mapping[str, LocationTokenSeq],
    profiles: Mapping[str, LocationProfile],
) -> list[dict]:
    """Two instruction records per location: description->ID and ID->description."""
    records = []
    for loc_id in sorted(locations):
        if loc_id not in profiles:
            raise DataError(f"location {loc_id!r} has tokens but no profile")
        tokens = locations[loc_id]
        rendered = tokens.render() if isinstance(tokens, LocationTokenSeq) else str(tokens)
        text = render_profile_text(profiles[loc_id])
        records.append(
            {
                "task": "loc2id",
                "location_id": loc_id,
                "instruction": LOC2ID_TEMPLATE.format(location=text),
                "input": "",
                "output": rendered,
            }
        )
        records.append(
            {
                "task": "id2loc",
                "location_id": loc_id,
                "instruction": ID2LOC_TEMPLATE.format(index=rendered),
                "input": "",
                "output": text,
            }
        )
    missing = sorted(set(profiles) - set(locations))
    if missing:
        raise DataError(f"profiles without token sequences: {missing[:3]}")
    return records


EMBEDDINGS_FORMAT = "trajtok.embedding_table"


def save_embedding_table(table: EmbeddingTable, path) -> None:
    write_json(
        path,
        {
            "format": EMBEDDINGS_FORMAT,
            "version": ARTIFACT_FORMAT_VERSION,
            "tokens": table.tokens,
            "vectors": table.vectors.tolist(),
            "initial_vectors": table.initial_vectors.tolist(),
            "projector": None if table.projector is None else table.projector.to_record(),
        },
    )


def load_embedding_table(path) -> EmbeddingTable:
    rec = read_json(path)
    if not isinstance(rec, dict) or rec.get("format") != EMBEDDINGS_FORMAT:
        raise ArtifactError(f"{path}: not an embedding-table artifact")
    if rec.get("version") != ARTIFACT_FORMAT_VERSION:
        raise ArtifactError(f"{path}: unsupported artifact version {rec.get('version')!r}")
    return EmbeddingTable(
        tokens=[str(t) for t in rec["tokens"]],
        vectors=np.asarray(rec["vectors"], dtype=np.float64),
        initial_vectors=np.asarray(rec["initial_vectors"], dtype=np.float64),
        projector=None if rec["projector"] is None else Projector.from_record(rec["projector"]),
    )
