"""Residual-quantized autoencoder: semantic vectors to discrete location IDs.

An encoder MLP maps each semantic vector to a code-space vector that is
then quantized through a cascade of codebooks: every layer picks the
nearest codeword to the incoming residual and passes the difference on.
The codeword indices form the location's token sequence; the summed
codewords feed a mirrored decoder MLP for reconstruction.

Training minimizes reconstruction error plus the residual-quantization
loss. Stop-gradient semantics: the quantization term moves only
codewords, the commitment term moves only the encoder path, and the
reconstruction gradient crosses the quantizer as if it were the identity
(straight-through).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ARTIFACT_FORMAT_VERSION
from .errors import ArtifactError, DataError, NumericsError
from .io_utils import read_json, write_json
from .nn import AdamW, DenseNet

_ENCODE_CHUNK = 256


def render_token_indices(indices) -> str:
    """Render codeword indices as '<a_i><b_j>...' with consecutive letter prefixes."""
    if len(indices) > 26:
        raise DataError("token rendering supports at most 26 layers")
    return "".join(f"<{chr(ord('a') + n)}_{int(i)}>" for n, i in enumerate(indices))


def token_names(n_layers: int, codebook_size: int) -> list[str]:
    """All layer-major codeword token strings, '<a_0>' ... '<{prefix}_{K-1}>'."""
    if n_layers > 26:
        raise DataError("token naming supports at most 26 layers")
    return [
        f"<{chr(ord('a') + n)}_{k}>" for n in range(n_layers) for k in range(codebook_size)
    ]


@dataclass(frozen=True)
class LocationTokenSeq:
    indices: tuple[int, ...]

    def render(self) -> str:
        return render_token_indices(self.indices)

    def __post_init__(self):
        if any(i < 0 for i in self.indices):
            raise DataError("token indices must be non-negative")


@dataclass(frozen=True)
class RQConfig:
    n_layers: int = 4
    codebook_size: int = 512
    code_dim: int = 64
    encoder_dims: tuple[int, ...] = (2048, 1024, 512, 256, 128, 64)
    alpha: float = 0.25
    learning_rate: float = 1e-3
    batch_size: int = 1024
    seed: int = 0
    epochs: int = 20
    weight_decay: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "encoder_dims", tuple(int(d) for d in self.encoder_dims))
        if self.n_layers < 1:
            raise DataError("n_layers must be >= 1")
        if self.codebook_size < 2:
            raise DataError("codebook_size must be >= 2")
        if self.encoder_dims[-1] != self.code_dim:
            raise DataError(
                f"last encoder dim {self.encoder_dims[-1]} must equal code_dim {self.code_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.encoder_dims[0]

    @property
    def decoder_dims(self) -> tuple[int, ...]:
        return tuple(reversed(self.encoder_dims))

    def to_record(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "codebook_size": self.codebook_size,
            "code_dim": self.code_dim,
            "encoder_dims": list(self.encoder_dims),
            "alpha": self.alpha,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "epochs": self.epochs,
            "weight_decay": self.weight_decay,
        }

    @staticmethod
    def from_record(rec: dict) -> "RQConfig":
        return RQConfig(**{**rec, "encoder_dims": tuple(rec["encoder_dims"])})


@dataclass
class CodebookStack:
    codebooks: list[np.ndarray]  # n_layers arrays of shape (K, code_dim)
    encoder: DenseNet
    decoder: DenseNet
    config: RQConfig
    epoch_losses: list[dict] = field(default_factory=list)

    def validate(self) -> None:
        cfg = self.config
        if len(self.codebooks) != cfg.n_layers:
            raise DataError("codebook count does not match config")
        for cb in self.codebooks:
            if cb.shape != (cfg.codebook_size, cfg.code_dim):
                raise DataError(f"codebook shape {cb.shape} does not match config")
            if not np.all(np.isfinite(cb)):
                raise NumericsError("non-finite codeword")


def quantize_layer(residual: np.ndarray, codebook: np.ndarray) -> tuple[int, np.ndarray]:
    """Nearest codeword by squared L2 (lowest index on ties) and the new residual."""
    residual = np.asarray(residual, dtype=np.float64)
    codebook = np.asarray(codebook, dtype=np.float64)
    if residual.ndim != 1 or codebook.ndim != 2 or codebook.shape[1] != residual.shape[0]:
        raise DataError(
            f"dimension mismatch: residual {residual.shape} vs codebook {codebook.shape}"
        )
    if not np.all(np.isfinite(residual)):
        raise NumericsError("non-finite residual")
    dists = ((codebook - residual) ** 2).sum(axis=1)
    index = int(np.argmin(dists))
    return index, residual - codebook[index]


def _nearest_batch(residuals: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    out = np.empty(len(residuals), dtype=np.int64)
    for start in range(0, len(residuals), _ENCODE_CHUNK):
        chunk = residuals[start : start + _ENCODE_CHUNK]
        d = ((chunk[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=2)
        out[start : start + _ENCODE_CHUNK] = np.argmin(d, axis=1)
    return out


def cascade_quantize(
    r0: np.ndarray, codebooks: list[np.ndarray]
) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """Run the residual cascade on a batch.

    Returns (indices of shape (B, N), per-layer input residuals, summed
    quantized vectors).
    """
    r = np.asarray(r0, dtype=np.float64)
    batch = r.ndim == 2
    if not batch:
        r = r[None, :]
    indices = np.empty((r.shape[0], len(codebooks)), dtype=np.int64)
    r_ins: list[np.ndarray] = []
    quantized = np.zeros_like(r)
    for n, cb in enumerate(codebooks):
        r_ins.append(r)
        idx = _nearest_batch(r, cb)
        indices[:, n] = idx
        chosen = cb[idx]
        quantized = quantized + chosen
        r = r - chosen
    return indices, r_ins, quantized


def encode_location(v: np.ndarray, stack: CodebookStack) -> tuple[LocationTokenSeq, np.ndarray]:
    """Token sequence and quantized code-space sum for one semantic vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != stack.config.input_dim:
        raise DataError(
            f"expected vector of dim {stack.config.input_dim}, got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise NumericsError("non-finite input vector")
    r0 = stack.encoder(v[None, :])
    indices, _, quantized = cascade_quantize(r0, stack.codebooks)
    return LocationTokenSeq(tuple(int(i) for i in indices[0])), quantized[0]


def encode_batch(vectors: np.ndarray, stack: CodebookStack) -> np.ndarray:
    """Token index matrix (len(vectors), n_layers) for a vector batch."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != stack.config.input_dim:
        raise DataError(f"expected (batch, {stack.config.input_dim}) input, got {X.shape}")
    r0 = stack.encoder(X)
    indices, _, _ = cascade_quantize(r0, stack.codebooks)
    return indices


def rq_loss(residuals, codewords, alpha: float) -> float:
    """Quantization plus commitment loss over the layer cascade.

    Value is sum_n(||r_n - v_n||^2 + alpha * ||r_n - v_n||^2); the two
    terms differ only in gradient routing (see module docstring), which
    the training step implements.
    """
    if len(residuals) != len(codewords):
        raise DataError("residual and codeword lists must have equal length")
    total = 0.0
    for r, v in zip(residuals, codewords):
        r = np.asarray(r, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if r.shape != v.shape:
            raise DataError("residual/codeword shape mismatch")
        err = float(((r - v) ** 2).sum())
        total += err + alpha * err
    return total


def rec_loss(E: np.ndarray, E_hat: np.ndarray, decoder: DenseNet) -> float:
    """Squared reconstruction error ||E - decoder(E_hat)||^2."""
    E = np.asarray(E, dtype=np.float64)
    E_hat = np.asarray(E_hat, dtype=np.float64)
    out = decoder(E_hat[None, :])[0]
    if out.shape != E.shape:
        raise DataError(f"decoder output shape {out.shape} does not match target {E.shape}")
    return float(((E - out) ** 2).sum())


def training_step_grads(stack: CodebookStack, X: np.ndarray, alpha: float):
    """Losses and parameter gradients for one mini-batch.

    Gradient routing: reconstruction -> decoder params, then straight
    through the quantizer into the encoder; commitment -> encoder only;
    quantization term -> codewords only.
    """
    B = len(X)
    r0, enc_cache = stack.encoder.forward(X)
    indices, r_ins, quantized = cascade_quantize(r0, stack.codebooks)
    x_hat, dec_cache = stack.decoder.forward(quantized)

    diff = x_hat - X
    rec = float((diff**2).sum() / B)
    r_outs = []
    quant_err = 0.0
    for n, cb in enumerate(stack.codebooks):
        chosen = cb[indices[:, n]]
        out = r_ins[n] - chosen
        r_outs.append(out)
        quant_err += float((out**2).sum())
    rq = (1.0 + alpha) * quant_err / B

    d_xhat = 2.0 * diff / B
    d_quantized, dec_grads = stack.decoder.backward(dec_cache, d_xhat)
    dr0 = d_quantized + (2.0 * alpha / B) * sum(r_outs)
    _, enc_grads = stack.encoder.backward(enc_cache, dr0)

    cb_grads = []
    for n, cb in enumerate(stack.codebooks):
        g = np.zeros_like(cb)
        np.add.at(g, indices[:, n], (2.0 / B) * (cb[indices[:, n]] - r_ins[n]))
        cb_grads.append(g)

    stats = {"rec": rec, "rq": rq, "total": rec + rq}
    aux = {"indices": indices, "r_ins": r_ins, "r_outs": r_outs}
    return stats, enc_grads + dec_grads + cb_grads, aux


def evaluate_stack(stack: CodebookStack, X: np.ndarray, alpha: float) -> dict:
    """Mean per-sample losses over a corpus (no gradients)."""
    rec_sum = 0.0
    quant_sum = 0.0
    for start in range(0, len(X), 4096):
        chunk = X[start : start + 4096]
        r0 = stack.encoder(chunk)
        indices, r_ins, quantized = cascade_quantize(r0, stack.codebooks)
        x_hat = stack.decoder(quantized)
        rec_sum += float(((x_hat - chunk) ** 2).sum())
        for n, cb in enumerate(stack.codebooks):
            quant_sum += float(((r_ins[n] - cb[indices[:, n]]) ** 2).sum())
    rec = rec_sum / len(X)
    rq = (1.0 + alpha) * quant_sum / len(X)
    return {"rec": rec, "rq": rq, "total": rec + rq}


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy D^2-sampling seeding; duplicate picks get a tiny jitter."""
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            j = int(rng.integers(n))
        else:
            j = int(rng.choice(n, p=d2 / total))
        centers[i] = points[j]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    scale = max(float(points.std()), 1e-3)
    seen: set[bytes] = set()
    for i in range(k):
        key = centers[i].tobytes()
        if key in seen:
            centers[i] = centers[i] + rng.normal(0.0, 1e-6 * scale, size=points.shape[1])
        seen.add(key)
    return centers


def train_rqvae(vectors, config: RQConfig, log=None) -> CodebookStack:
    """Train the full stack by mini-batch AdamW; deterministic under the seed.

    Per-epoch corpus losses land in ``stack.epoch_losses``; entry 0 is the
    pre-training baseline. Codewords unused for a whole epoch are
    re-seeded from the last batch's residuals.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise DataError("training corpus must be a non-empty 2-D array")
    if X.shape[1] != config.input_dim:
        raise DataError(f"corpus dim {X.shape[1]} does not match encoder input {config.input_dim}")
    if not np.all(np.isfinite(X)):
        raise NumericsError("non-finite training vector")

    rng = np.random.default_rng(config.seed)
    encoder = DenseNet(list(config.encoder_dims), rng)
    decoder = DenseNet(list(config.decoder_dims), rng)

    first = X[: config.batch_size]
    r = encoder(first)
    codebooks: list[np.ndarray] = []
    for _ in range(config.n_layers):
        cb = _kmeanspp(r, config.codebook_size, rng)
        codebooks.append(cb)
        idx = _nearest_batch(r, cb)
        r = r - cb[idx]

    stack = CodebookStack(codebooks, encoder, decoder, config)

    params = encoder.parameters() + decoder.parameters() + codebooks
    decay_mask = []
    for net in (encoder, decoder):
        decay_mask += [True, False] * net.n_layers  # decay weights, not biases
    decay_mask += [False] * config.n_layers  # never decay codewords
    cb_param_offset = len(params) - config.n_layers
    opt = AdamW(params, lr=config.learning_rate, weight_decay=config.weight_decay,
                decay_mask=decay_mask)

    stack.epoch_losses = [evaluate_stack(stack, X, config.alpha)]
    if log:
        log(0, stack.epoch_losses[0])
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(len(X))
        usage = [np.zeros(config.codebook_size, dtype=np.int64) for _ in range(config.n_layers)]
        last_r_ins: list[np.ndarray] | None = None
        for start in range(0, len(X), config.batch_size):
            batch = X[perm[start : start + config.batch_size]]
            stats, grads, aux = training_step_grads(stack, batch, config.alpha)
            if not np.isfinite(stats["total"]):
                raise NumericsError(
                    f"NaN/inf loss at epoch {epoch}, batch offset {start}: {stats}"
                )
            opt.step(grads)
            for n in range(config.n_layers):
                usage[n] += np.bincount(aux["indices"][:, n], minlength=config.codebook_size)
            last_r_ins = aux["r_ins"]
        for n in range(config.n_layers):
            dead = np.flatnonzero(usage[n] == 0)
            if len(dead) and last_r_ins is not None:
                donors = rng.integers(len(last_r_ins[n]), size=len(dead))
                stack.codebooks[n][dead] = last_r_ins[n][donors]
                opt.reset_state(cb_param_offset + n, dead)
        stack.epoch_losses.append(evaluate_stack(stack, X, config.alpha))
        if log:
            log(epoch, stack.epoch_losses[-1])
    return stack


@dataclass
class CodebookReport:
    per_layer_usage: list[list[int]]
    n_vectors: int
    n_distinct_vectors: int
    n_distinct_sequences: int
    collision_rate: float

    def to_record(self) -> dict:
        return {
            "per_layer_usage": self.per_layer_usage,
            "n_vectors": self.n_vectors,
            "n_distinct_vectors": self.n_distinct_vectors,
            "n_distinct_sequences": self.n_distinct_sequences,
            "collision_rate": self.collision_rate,
        }


def codebook_report(stack: CodebookStack, vectors) -> CodebookReport:
    """Codeword usage histograms and the sequence collision rate.

    The collision rate is the fraction of distinct input vectors whose
    full token sequence is shared with some other distinct vector.
    """
    X = np.asarray(vectors, dtype=np.float64)
    indices = encode_batch(X, stack)
    usage = [
        np.bincount(indices[:, n], minlength=stack.config.codebook_size).tolist()
        for n in range(stack.config.n_layers)
    ]
    seq_by_vector: dict[bytes, tuple[int, ...]] = {}
    for row, idx in zip(X, indices):
        seq_by_vector.setdefault(row.tobytes(), tuple(int(i) for i in idx))
    seq_counts: dict[tuple[int, ...], int] = {}
    for seq in seq_by_vector.values():
        seq_counts[seq] = seq_counts.get(seq, 0) + 1
    n_distinct = len(seq_by_vector)
    colliding = sum(1 for seq in seq_by_vector.values() if seq_counts[seq] > 1)
    return CodebookReport(
        per_layer_usage=usage,
        n_vectors=len(X),
        n_distinct_vectors=n_distinct,
        n_distinct_sequences=len(seq_counts),
        collision_rate=colliding / n_distinct if n_distinct else 0.0,
    )


ARTIFACT_FORMAT = "trajtok.codebook"


def save_codebook(stack: CodebookStack, path) -> None:
    stack.validate()
    write_json(
        path,
        {
            "format": ARTIFACT_FORMAT,
            "version": ARTIFACT_FORMAT_VERSION,
            "config": stack.config.to_record(),
            "codebooks": [cb.tolist() for cb in stack.codebooks],
            "encoder": stack.encoder.to_record(),
            "decoder": stack.decoder.to_record(),
        },
    )


def load_codebook(path) -> CodebookStack:
    rec = read_json(path)
    if not isinstance(rec, dict) or rec.get("format") != ARTIFACT_FORMAT:
        raise ArtifactError(f"{path}: not a codebook artifact")
    if rec.get("version") != ARTIFACT_FORMAT_VERSION:
        raise ArtifactError(
            f"{path}: unsupported artifact version {rec.get('version')!r} "
            f"(expected {ARTIFACT_FORMAT_VERSION})"
        )
    config = RQConfig.from_record(rec["config"])
    stack = CodebookStack(
        codebooks=[np.asarray(cb, dtype=np.float64) for cb in rec["codebooks"]],
        encoder=DenseNet.from_record(rec["encoder"]),
        decoder=DenseNet.from_record(rec["decoder"]),
        config=config,
    )
    stack.validate()
    return stack
