"""Finite-difference verification of every analytic gradient in the package.

Each check compares hand-derived gradients against central differences on
batches of randomized instances and reports the worst relative error seen.
The network checks cover every layer geometry the fusion strategies and
encoders instantiate at default widths; large networks are probed on a
random subset of coordinates to keep the whole suite under a minute.

Central differences are only meaningful away from activation kinks, so
instances whose relu or selu pre-activations sit within a guard band of
zero are redrawn before measuring. Zero-bias initialization makes an
exactly-dead layer reachable, which would otherwise park every downstream
pre-activation exactly on the kink.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import DEFAULT_SCHEMA, MODALITIES
from .fusion import (FusionSample, FusionStrategy, batch_loss_and_grads,
                     batch_losses, init_fusion_model, recon_loss, recon_loss_grad)
from .nets import init_net
from .survival import SurvivalBatch, cox_loss, cox_loss_grad

DEFAULT_TOLERANCE = 1e-4
DEFAULT_STEP = 1e-5
_COORDS_PER_INSTANCE = 24
_KINK_GUARD = 1e-3  # min |pre-activation| for a valid finite-difference point
_MAX_REDRAWS = 200


@dataclass
class CheckResult:
    name: str
    instances: int
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _fd_coords(f, p: np.ndarray, coords: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros(len(coords))
    for k, j in enumerate(coords):
        saved = p[j]
        p[j] = saved + h
        hi = f()
        p[j] = saved - h
        lo = f()
        p[j] = saved
        out[k] = (hi - lo) / (2 * h)
    return out


def _check_cox(rng, instances: int, h: float) -> float:
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 21))
        hz = rng.normal(0, 1.5, n)
        times = rng.exponential(200.0, n) + 1e-3
        if rng.random() < 0.3:  # force ties
            times[: n // 2] = times[0]
        events = rng.integers(0, 2, n).astype(np.int64)
        if events.sum() == 0:
            events[int(rng.integers(0, n))] = 1
        analytic = cox_loss_grad(SurvivalBatch(hz, times, events))
        numeric = np.zeros(n)
        for j in range(n):
            saved = hz[j]
            hz[j] = saved + h
            hi = cox_loss(SurvivalBatch(hz, times, events))
            hz[j] = saved - h
            lo = cox_loss(SurvivalBatch(hz, times, events))
            hz[j] = saved
            numeric[j] = (hi - lo) / (2 * h)
        worst = max(worst, _rel_err(analytic, numeric))
    return worst


def _check_recon(rng, instances: int, h: float) -> float:
    worst = 0.0
    for _ in range(instances):
        n, e = int(rng.integers(1, 7)), int(rng.integers(2, 9))
        decoded = rng.normal(0, 1, (n, len(MODALITIES), e))
        targets = rng.normal(0, 1, (n, len(MODALITIES), e))
        alpha = rng.integers(0, 2, (n, len(MODALITIES))).astype(float)
        if alpha.sum() == 0:
            alpha[0, 0] = 1.0
        analytic = recon_loss_grad(decoded, targets, alpha)
        flat = decoded.reshape(-1)
        coords = rng.choice(flat.size, size=min(_COORDS_PER_INSTANCE, flat.size), replace=False)
        numeric = _fd_coords(lambda: recon_loss(decoded, targets, alpha), flat, coords, h)
        worst = max(worst, _rel_err(analytic.reshape(-1)[coords], numeric))
    return worst


def _random_samples(rng, n: int, embed_dim: int) -> list[FusionSample]:
    samples = []
    for i in range(n):
        avail = rng.integers(0, 2, len(MODALITIES))
        if avail.sum() == 0:
            avail[int(rng.integers(0, len(MODALITIES)))] = 1
        emb = {m: rng.normal(0, 1, embed_dim) for m in MODALITIES if avail[m]}
        mask = avail.copy()
        if mask.sum() > 1 and rng.random() < 0.5:  # emulate dropout: hide one
            mask[int(rng.choice(np.flatnonzero(mask)))] = 0
        t = float(rng.exponential(100.0) + 1e-3)
        samples.append(FusionSample(emb, mask, t, float(i == 0 or rng.random() < 0.5)))
    return samples


def _tape_kink_gap(tapes) -> float:
    gap = np.inf
    for tape in tapes:
        for _, z in tape[:-1]:  # hidden layers only; outputs are identity
            gap = min(gap, float(np.min(np.abs(z))))
    return gap


def _forward_tapes(fwd) -> list:
    tapes = [fwd.head_tape] + list(fwd.fuse_tape.net_tapes.values())
    if fwd.recon_tape is not None:
        tapes.append(fwd.recon_tape)
    return tapes


def _check_total(rng, instances: int, h: float) -> float:
    dims = dict(embed_dim=4, extended_dim=8, reduced_dim=3,
                extender_hidden=6, reducer_hidden=5, head_hidden=5, recon_hidden=6)
    worst = 0.0
    kinds = ("concat", "mean", "tensor")
    for k in range(instances):
        strategy = FusionStrategy(kinds[k % 3], **dims)
        for _ in range(_MAX_REDRAWS):
            model = init_fusion_model(strategy, int(rng.integers(0, 2**31)),
                                      recon=bool(k % 2), lam=0.7)
            samples = _random_samples(rng, 4, dims["embed_dim"])
            _, _, _, forwards = batch_losses(model, samples)
            if min(_tape_kink_gap(_forward_tapes(f)) for f in forwards) >= _KINK_GUARD:
                break
        _, _, _, grads, _ = batch_loss_and_grads(model, samples)
        analytic = np.concatenate([grads.by_part[name].flat() for name, _ in model.parts()])
        p = model.flat_params()
        coords = rng.choice(p.size, size=min(_COORDS_PER_INSTANCE, p.size), replace=False)

        def loss_at():
            model.set_flat_params(p)
            return batch_losses(model, samples)[0]

        numeric = _fd_coords(loss_at, p, coords, h)
        model.set_flat_params(p)
        worst = max(worst, _rel_err(analytic[coords], numeric))
    return worst


def _net_configs():
    schema = DEFAULT_SCHEMA
    e = schema.embed_dim
    configs = []
    for raw in sorted(set(schema.raw_dims)):
        configs.append((f"encoder ({raw}->{e})", (raw, 64, e), "selu", None))
    configs.append((f"stage-1 head ({e}->1)", (e, 1), "identity", None))
    for kind in ("concat", "mean", "tensor"):
        s = FusionStrategy(kind, embed_dim=e)
        fused = s.fused_dim
        if kind == "mean":
            configs.append((f"extender ({e}->{s.extended_dim})",
                            (e, s.extender_hidden, s.extended_dim), "relu", "identity"))
        if kind == "tensor":
            configs.append((f"reducer ({e}->{s.reduced_dim})",
                            (e, s.reducer_hidden, s.reduced_dim), "relu", "identity"))
        configs.append((f"{kind} hazard head ({fused}->1)",
                        (fused, s.head_hidden, 1), "relu", "identity"))
        configs.append((f"{kind} recon head ({fused}->{4 * e})",
                        (fused, s.recon_hidden, 4 * e), "relu", "identity"))
    seen, out = set(), []
    for name, dims, act, out_act in configs:
        if dims not in seen:
            seen.add(dims)
            out.append((name, dims, act, out_act))
    return out


def _check_net(rng, dims, activation, output_activation, instances: int, h: float) -> float:
    worst = 0.0
    for _ in range(instances):
        for _ in range(_MAX_REDRAWS):
            net = init_net(dims, activation, int(rng.integers(0, 2**31)),
                           output_activation=output_activation)
            x = rng.normal(0, 1, dims[0])
            _, tape = net.forward(x)
            if _tape_kink_gap([tape]) >= _KINK_GUARD:
                break
        w = rng.normal(0, 1, dims[-1])
        grads, _ = net.backward(tape, w)
        analytic = grads.flat()
        p = net.flat_params()
        coords = rng.choice(p.size, size=min(_COORDS_PER_INSTANCE, p.size), replace=False)

        def loss_at():
            net.set_flat_params(p)
            return float(w @ net.forward(x)[0])

        numeric = _fd_coords(loss_at, p, coords, h)
        net.set_flat_params(p)
        worst = max(worst, _rel_err(analytic[coords], numeric))
    return worst


def run_gradient_checks(seed: int = 0, instances: int = 50,
                        h: float = DEFAULT_STEP, tolerance: float = DEFAULT_TOLERANCE,
                        progress=None) -> list[CheckResult]:
    """Run every gradient check; returns one result per check."""
    notify = progress or (lambda msg: None)
    ss = np.random.SeedSequence([0x6AD, seed])
    results = []

    def add(name, worst):
        results.append(CheckResult(name, instances, worst, tolerance))
        notify(f"{'PASS' if results[-1].passed else 'FAIL'} {name}: max rel err {worst:.3g}")

    streams = iter(ss.spawn(3 + len(_net_configs())))
    add("cox_loss", _check_cox(np.random.default_rng(next(streams)), instances, h))
    add("recon_loss", _check_recon(np.random.default_rng(next(streams)), instances, h))
    add("total_loss", _check_total(np.random.default_rng(next(streams)), instances, h))
    for name, dims, act, out_act in _net_configs():
        add(name, _check_net(np.random.default_rng(next(streams)), dims, act, out_act, instances, h))
    return results
