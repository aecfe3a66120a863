"""Fusion of per-modality embeddings under arbitrary missingness.

Three strategies share one interface. Concatenation lays the four embedding
slots side by side and zero-fills absent ones. Mean vector pushes each
present embedding through its own extender network and averages the
results, so any subset of modalities lands in the same space. Tensor fusion
reduces each embedding to a short vector, appends a constant 1, and takes
the four-way outer product; an absent modality contributes the bare
constant slot, which leaves the other modalities' cross terms intact. With
every modality absent from the product the fused vector would collapse to a
single 1 in the last position (index 6560 at the default widths), but
masks with no present modality are rejected before that can happen.

Training-time modality dropout hides a random subset of the present
modalities and redraws whenever the draw would hide all of them. The
reconstruction loss compares decoded embeddings against the originally
available ones, dropout mask ignored, so the model is pushed to rebuild
exactly what it was shown before hiding. Its normalizer is the total count
of available modality instances in the batch.

All gradients are hand-derived, including the backward pass through the
four-way outer product.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import MODALITIES, N_MODALITIES, ModalityId
from .errors import ConfigError, DataError, NumericalError
from .nets import DenseNet, GradientSet, init_net, net_from_dict, net_to_dict
from .survival import SurvivalBatch, cox_loss, cox_loss_grad

FUSION_KINDS = ("concat", "mean", "tensor")
CHECKPOINT_FORMAT = "fusion-v1"
NORM_EPS = 1e-12  # guards the derivative of the unsquared norm

_FUSION_SALT = 0xF05E


@dataclass(frozen=True)
class FusionStrategy:
    """Which fusion to build and the widths of its pieces."""

    kind: str
    embed_dim: int = 32
    extended_dim: int = 128   # mean vector: extender output width
    reduced_dim: int = 8      # tensor: per-modality width before the product
    extender_hidden: int = 64
    reducer_hidden: int = 16
    head_hidden: int = 64
    recon_hidden: int = 64

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ConfigError(f"unknown fusion strategy {self.kind!r}, expected one of {FUSION_KINDS}")

    @property
    def fused_dim(self) -> int:
        if self.kind == "concat":
            return N_MODALITIES * self.embed_dim
        if self.kind == "mean":
            return self.extended_dim
        return (self.reduced_dim + 1) ** N_MODALITIES


@dataclass
class DropoutPolicy:
    rate: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ConfigError("dropout rate must lie in [0, 1)")


class FusionModel:
    """Fusion networks for one strategy: body nets, hazard head, optional decoder."""

    def __init__(self, strategy: FusionStrategy, extenders, reducers,
                 hazard_head: DenseNet, recon_head: DenseNet | None, lam: float = 1.0):
        self.strategy = strategy
        self.extenders = extenders
        self.reducers = reducers
        self.hazard_head = hazard_head
        self.recon_head = recon_head
        self.lam = float(lam)

    def parts(self) -> list[tuple[str, DenseNet]]:
        """Named subnetworks in a fixed order; the unit of optimization."""
        out = []
        if self.strategy.kind == "mean":
            out += [(f"extender_{m.label}", self.extenders[m]) for m in MODALITIES]
        elif self.strategy.kind == "tensor":
            out += [(f"reducer_{m.label}", self.reducers[m]) for m in MODALITIES]
        out.append(("hazard_head", self.hazard_head))
        if self.recon_head is not None:
            out.append(("recon_head", self.recon_head))
        return out

    def copy(self) -> "FusionModel":
        ext = {m: n.copy() for m, n in self.extenders.items()} if self.extenders else None
        red = {m: n.copy() for m, n in self.reducers.items()} if self.reducers else None
        recon = self.recon_head.copy() if self.recon_head is not None else None
        return FusionModel(self.strategy, ext, red, self.hazard_head.copy(), recon, self.lam)

    def flat_params(self) -> np.ndarray:
        return np.concatenate([net.flat_params() for _, net in self.parts()])

    def set_flat_params(self, p: np.ndarray) -> None:
        ofs = 0
        for _, net in self.parts():
            n = net.param_count()
            net.set_flat_params(p[ofs:ofs + n])
            ofs += n
        if ofs != p.shape[0]:
            raise ConfigError("flat parameter vector has wrong length")


def init_fusion_model(strategy: FusionStrategy, seed, recon: bool = False, lam: float = 1.0) -> FusionModel:
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    else:
        base = np.random.SeedSequence([_FUSION_SALT, int(seed)])
    seeds = iter(base.spawn(N_MODALITIES + 2))
    s = strategy
    extenders = reducers = None
    if s.kind == "mean":
        extenders = {m: init_net((s.embed_dim, s.extender_hidden, s.extended_dim), "relu",
                                 next(seeds), output_activation="identity") for m in MODALITIES}
    elif s.kind == "tensor":
        reducers = {m: init_net((s.embed_dim, s.reducer_hidden, s.reduced_dim), "relu",
                                next(seeds), output_activation="identity") for m in MODALITIES}
    else:
        for _ in MODALITIES:
            next(seeds)
    hazard_head = init_net((s.fused_dim, s.head_hidden, 1), "relu", next(seeds),
                           output_activation="identity")
    recon_head = None
    if recon:
        recon_head = init_net((s.fused_dim, s.recon_hidden, N_MODALITIES * s.embed_dim), "relu",
                              next(seeds), output_activation="identity")
    return FusionModel(s, extenders, reducers, hazard_head, recon_head, lam)


def modality_dropout(mask: np.ndarray, policy: DropoutPolicy, rng) -> np.ndarray:
    """Randomly hide present modalities, never all of them.

    Each present modality survives independently with probability 1 - rate;
    a draw that hides everything is rejected and redrawn, so the result is
    the subset distribution conditioned on being non-empty.
    """
    mask = np.asarray(mask)
    if mask.shape != (N_MODALITIES,):
        raise DataError(f"mask must have {N_MODALITIES} entries")
    present = mask.astype(bool)
    if not present.any():
        raise DataError("mask has no available modality")
    if not policy.enabled or policy.rate == 0.0:
        return mask.astype(np.int64).copy()
    while True:
        keep = (rng.random(N_MODALITIES) >= policy.rate) & present
        if keep.any():
            return keep.astype(np.int64)


@dataclass
class FuseTape:
    """Bookkeeping from one fuse() call, consumed by the backward pass."""

    present: tuple
    net_tapes: dict = field(default_factory=dict)
    factors: np.ndarray | None = None  # tensor: the four (reduced+1) vectors


def _check_fuse_inputs(model: FusionModel, embeddings, mask) -> list[ModalityId]:
    mask = np.asarray(mask)
    present = [m for m in MODALITIES if mask[m]]
    if not present:
        raise DataError("cannot fuse with no present modality")
    keys = set(embeddings.keys())
    if keys != set(present):
        raise DataError("embeddings must cover exactly the masked-in modalities")
    e = model.strategy.embed_dim
    for m in present:
        if np.asarray(embeddings[m]).shape != (e,):
            raise DataError(f"{m.label} embedding must have width {e}")
    return present


def fuse(model: FusionModel, embeddings, mask) -> tuple[np.ndarray, FuseTape]:
    """Combine present-modality embeddings into one fused vector.

    ``embeddings`` maps exactly the modalities where ``mask`` is 1 to their
    vectors. Accumulation always walks modalities in fixed id order, so the
    result is independent of the caller's key order, bit for bit.
    """
    s = model.strategy
    present = _check_fuse_inputs(model, embeddings, mask)
    tape = FuseTape(present=tuple(present))
    if s.kind == "concat":
        h = np.zeros(s.fused_dim)
        for m in present:
            h[m * s.embed_dim:(m + 1) * s.embed_dim] = embeddings[m]
        return h, tape
    if s.kind == "mean":
        acc = np.zeros(s.extended_dim)
        for m in present:
            y, t = model.extenders[m].forward(np.asarray(embeddings[m], dtype=np.float64))
            acc += y
            tape.net_tapes[m] = t
        return acc / len(present), tape
    # tensor: reduce, append the constant slot, then the 4-way outer product
    factors = np.zeros((N_MODALITIES, s.reduced_dim + 1))
    factors[:, s.reduced_dim] = 1.0
    for m in present:
        y, t = model.reducers[m].forward(np.asarray(embeddings[m], dtype=np.float64))
        factors[m, :s.reduced_dim] = y
        tape.net_tapes[m] = t
    tape.factors = factors
    h = np.einsum("i,j,k,l->ijkl", factors[0], factors[1], factors[2], factors[3]).ravel()
    return h, tape


def _tensor_factor_grads(dh: np.ndarray, factors: np.ndarray, rd: int) -> list[np.ndarray]:
    u = dh.reshape((rd + 1,) * N_MODALITIES)
    f0, f1, f2, f3 = factors
    return [np.einsum("ijkl,j,k,l->i", u, f1, f2, f3),
            np.einsum("ijkl,i,k,l->j", u, f0, f2, f3),
            np.einsum("ijkl,i,j,l->k", u, f0, f1, f3),
            np.einsum("ijkl,i,j,k->l", u, f0, f1, f2)]


def fuse_backward(model: FusionModel, tape: FuseTape, dh: np.ndarray):
    """Push a fused-vector gradient back to body nets and input embeddings.

    Returns ({part name: GradientSet}, {modality: input gradient}).
    """
    s = model.strategy
    grads: dict[str, GradientSet] = {}
    dx: dict[ModalityId, np.ndarray] = {}
    if s.kind == "concat":
        for m in tape.present:
            dx[m] = dh[m * s.embed_dim:(m + 1) * s.embed_dim].copy()
        return grads, dx
    if s.kind == "mean":
        upstream = dh / len(tape.present)
        for m in tape.present:
            g, d_in = model.extenders[m].backward(tape.net_tapes[m], upstream)
            grads[f"extender_{m.label}"] = g
            dx[m] = d_in
        return grads, dx
    factor_grads = _tensor_factor_grads(dh, tape.factors, s.reduced_dim)
    for m in tape.present:
        g, d_in = model.reducers[m].backward(tape.net_tapes[m], factor_grads[m][:s.reduced_dim])
        grads[f"reducer_{m.label}"] = g
        dx[m] = d_in
    return grads, dx


def predict_hazard(model: FusionModel, h: np.ndarray) -> float:
    y, _ = model.hazard_head.forward(h)
    return float(y[0])


def reconstruct(model: FusionModel, h: np.ndarray) -> np.ndarray:
    """Decode a fused vector back to all four embedding slots, shape (4, embed)."""
    if model.recon_head is None:
        raise ConfigError("model has no reconstruction head")
    y, _ = model.recon_head.forward(h)
    return y.reshape(N_MODALITIES, model.strategy.embed_dim)


def recon_loss(decoded: np.ndarray, targets: np.ndarray, alpha: np.ndarray) -> float:
    """Availability-masked reconstruction loss over one batch.

    ``decoded`` and ``targets`` are (n, 4, embed); ``alpha`` is the (n, 4)
    original availability. Each available slot contributes the plain
    (unsquared) euclidean distance; the sum is divided by the total number
    of available slots in the batch. Slots with alpha 0 contribute exactly
    nothing, whatever values they hold.
    """
    decoded = np.asarray(decoded, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    n = decoded.shape[0]
    if decoded.shape != targets.shape or alpha.shape != (n, N_MODALITIES):
        raise DataError("decoded, targets, and alpha shapes do not line up")
    denom = alpha.sum()
    if denom == 0:
        raise DataError("batch has no available modality instances")
    norms = np.linalg.norm(decoded - targets, axis=2)
    loss = float((alpha * norms).sum() / denom)
    if not np.isfinite(loss):
        raise NumericalError("non-finite reconstruction loss")
    return loss


def recon_loss_grad(decoded: np.ndarray, targets: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Gradient of ``recon_loss`` with respect to ``decoded``, same shape."""
    decoded = np.asarray(decoded, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    denom = alpha.sum()
    if denom == 0:
        raise DataError("batch has no available modality instances")
    diff = decoded - targets
    norms = np.linalg.norm(diff, axis=2)
    scale = alpha / (norms + NORM_EPS) / denom
    return diff * scale[:, :, None]


def total_loss(cox: float, recon: float, lam: float) -> float:
    out = cox + lam * recon
    if not np.isfinite(out):
        raise NumericalError("non-finite total loss")
    return out


# ── per-sample training plumbing ─────────────────────────────────────────────

@dataclass
class FusionSample:
    """One record prepared for fusion training.

    ``embeddings`` holds every originally available modality (these are also
    the reconstruction targets); ``mask`` is the training-time view after
    modality dropout and is never wider than the availability.
    """

    embeddings: dict
    mask: np.ndarray
    time: float
    event: float

    @property
    def alpha(self) -> np.ndarray:
        return np.array([1.0 if m in self.embeddings else 0.0 for m in MODALITIES])


@dataclass
class SampleForward:
    h: np.ndarray
    fuse_tape: FuseTape
    score: float
    head_tape: list
    decoded: np.ndarray | None
    recon_tape: list | None


def forward_sample(model: FusionModel, sample: FusionSample) -> SampleForward:
    visible = {m: sample.embeddings[m] for m in MODALITIES
               if sample.mask[m] and m in sample.embeddings}
    h, fuse_tape = fuse(model, visible, sample.mask)
    y, head_tape = model.hazard_head.forward(h)
    decoded = recon_tape = None
    if model.recon_head is not None:
        flat, recon_tape = model.recon_head.forward(h)
        decoded = flat.reshape(N_MODALITIES, model.strategy.embed_dim)
    return SampleForward(h, fuse_tape, float(y[0]), head_tape, decoded, recon_tape)


class FusionGrads:
    """Gradients for every part of a fusion model, accumulated in place."""

    def __init__(self, model: FusionModel):
        self.by_part = {name: GradientSet.zeros_like(net) for name, net in model.parts()}

    def accumulate(self, name: str, grads: GradientSet) -> None:
        self.by_part[name].add(grads)


def backward_sample(model: FusionModel, fwd: SampleForward, d_score: float,
                    d_decoded: np.ndarray | None, out: FusionGrads):
    """Accumulate one sample's parameter gradients; returns embedding grads."""
    head_grads, dh = model.hazard_head.backward(fwd.head_tape, np.array([d_score]))
    out.accumulate("hazard_head", head_grads)
    if d_decoded is not None:
        if model.recon_head is None:
            raise ConfigError("reconstruction gradient without a reconstruction head")
        recon_grads, dh_recon = model.recon_head.backward(fwd.recon_tape, d_decoded.ravel())
        out.accumulate("recon_head", recon_grads)
        dh = dh + dh_recon
    body_grads, dx = fuse_backward(model, fwd.fuse_tape, dh)
    for name, g in body_grads.items():
        out.accumulate(name, g)
    return dx


def batch_losses(model: FusionModel, samples: list) -> tuple[float, float, float, list]:
    """Forward a batch; returns (total, cox, recon, per-sample forwards)."""
    forwards = [forward_sample(model, s) for s in samples]
    sb = SurvivalBatch(np.array([f.score for f in forwards]),
                       np.array([s.time for s in samples]),
                       np.array([s.event for s in samples]))
    cox = cox_loss(sb)
    recon = 0.0
    if model.recon_head is not None:
        decoded, targets, alpha = _recon_arrays(model, samples, forwards)
        recon = recon_loss(decoded, targets, alpha)
    return total_loss(cox, recon, model.lam), cox, recon, forwards


def _recon_arrays(model: FusionModel, samples: list, forwards: list):
    e = model.strategy.embed_dim
    n = len(samples)
    decoded = np.stack([f.decoded for f in forwards])
    targets = np.zeros((n, N_MODALITIES, e))
    alpha = np.zeros((n, N_MODALITIES))
    for i, s in enumerate(samples):
        for m, x in s.embeddings.items():
            targets[i, m] = x
            alpha[i, m] = 1.0
    return decoded, targets, alpha


def batch_loss_and_grads(model: FusionModel, samples: list):
    """One full training step's worth of math, no parameter updates.

    Returns (total, cox, recon, FusionGrads, per-sample embedding grads).
    Reconstruction targets are treated as constants, gradients flow into the
    decoder and the fused representation but not through the target side.
    """
    forwards = [forward_sample(model, s) for s in samples]
    sb = SurvivalBatch(np.array([f.score for f in forwards]),
                       np.array([s.time for s in samples]),
                       np.array([s.event for s in samples]))
    cox = cox_loss(sb)
    d_scores = cox_loss_grad(sb)
    recon = 0.0
    d_decoded = [None] * len(samples)
    if model.recon_head is not None:
        decoded, targets, alpha = _recon_arrays(model, samples, forwards)
        recon = recon_loss(decoded, targets, alpha)
        d_dec = model.lam * recon_loss_grad(decoded, targets, alpha)
        d_decoded = list(d_dec)
    grads = FusionGrads(model)
    dxs = []
    for k, fwd in enumerate(forwards):
        dxs.append(backward_sample(model, fwd, d_scores[k], d_decoded[k], grads))
    return total_loss(cox, recon, model.lam), cox, recon, grads, dxs


# ── model size ───────────────────────────────────────────────────────────────

@dataclass
class Footprint:
    parts: dict
    total_params: int
    total_bytes: int


def model_footprint(model: FusionModel) -> Footprint:
    """Float64 parameter counts per part and in total."""
    parts = {name: net.param_count() for name, net in model.parts()}
    total = sum(parts.values())
    return Footprint(parts, total, total * 8)


# ── checkpoints ──────────────────────────────────────────────────────────────

def fusion_to_dict(model: FusionModel) -> dict:
    s = model.strategy
    return {
        "format": CHECKPOINT_FORMAT,
        "strategy": {"kind": s.kind, "embed_dim": s.embed_dim, "extended_dim": s.extended_dim,
                     "reduced_dim": s.reduced_dim, "extender_hidden": s.extender_hidden,
                     "reducer_hidden": s.reducer_hidden, "head_hidden": s.head_hidden,
                     "recon_hidden": s.recon_hidden},
        "lam": model.lam,
        "parts": {name: net_to_dict(net) for name, net in model.parts()},
    }


def fusion_from_dict(payload: dict, origin: str = "payload") -> FusionModel:
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{origin}: not a fusion checkpoint (format {payload.get('format')!r})")
    strategy = FusionStrategy(**payload["strategy"])
    parts = {name: net_from_dict(blob) for name, blob in payload["parts"].items()}
    extenders = reducers = None
    if strategy.kind == "mean":
        extenders = {m: parts[f"extender_{m.label}"] for m in MODALITIES}
    elif strategy.kind == "tensor":
        reducers = {m: parts[f"reducer_{m.label}"] for m in MODALITIES}
    return FusionModel(strategy, extenders, reducers, parts["hazard_head"],
                       parts.get("recon_head"), payload["lam"])


def save_fusion(model: FusionModel, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(fusion_to_dict(model), fh)


def load_fusion(path: str) -> FusionModel:
    with open(path) as fh:
        payload = json.load(fh)
    return fusion_from_dict(payload, origin=path)
