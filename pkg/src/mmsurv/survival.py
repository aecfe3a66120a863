"""Cox partial-likelihood loss and concordance evaluation.

The loss is the negative Cox partial log-likelihood over one batch, with
risk sets formed inside the batch: for an event at time t_i the risk set is
every sample j with t_j >= t_i, ties included (Breslow handling, tied events
share the full risk set). Log-sum-exp terms subtract the in-set maximum, so
the loss is invariant to a constant shift of all hazards and safe for large
scores.

The concordance index is Harrell's: a pair (i, j) is comparable when
t_i < t_j and sample i had the event; it scores 1 when risk_i > risk_j and
0.5 on tied risks. Pairs with tied times are not comparable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError


@dataclass
class SurvivalBatch:
    """Aligned hazards, times, and event indicators for one batch."""

    hazards: np.ndarray
    times: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        self.hazards = np.asarray(self.hazards, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.events = np.asarray(self.events, dtype=np.float64)
        n = self.hazards.shape[0]
        if self.hazards.ndim != 1 or self.times.shape != (n,) or self.events.shape != (n,):
            raise DataError("hazards, times, and events must be aligned 1-d arrays")
        if n == 0:
            raise DataError("empty batch")
        if not np.isfinite(self.hazards).all():
            raise NumericalError("non-finite hazard scores")
        if not np.isfinite(self.times).all() or (self.times <= 0).any():
            raise DataError("survival times must be finite and positive")
        if not np.isin(self.events, (0.0, 1.0)).all():
            raise DataError("event indicators must be 0 or 1")

    @property
    def n(self) -> int:
        return self.hazards.shape[0]

    @property
    def n_events(self) -> int:
        return int(self.events.sum())


def risk_set(times: np.ndarray, i: int) -> np.ndarray:
    """Indices of samples still at risk at times[i], sample i included."""
    times = np.asarray(times, dtype=np.float64)
    if not 0 <= i < times.shape[0]:
        raise DataError(f"index {i} out of range for {times.shape[0]} samples")
    return np.flatnonzero(times >= times[i])

def cox_loss(batch: SurvivalBatch) -> float:
    """Negative Cox partial log-likelihood of one batch."""
    if batch.n_events == 0:
        raise DataError("batch has no events, Cox loss undefined")
    f = batch.hazards
    at_risk = batch.times[None, :] >= batch.times[:, None]  # row i: risk set of sample i
    event_rows = batch.events == 1.0
    scores = np.where(at_risk[event_rows], f[None, :], -np.inf)
    mx = scores.max(axis=1)
    lse = mx + np.log(np.exp(scores - mx[:, None]).sum(axis=1))
    loss = float(-(f[event_rows] - lse).sum())
    if not np.isfinite(loss):
        raise NumericalError("non-finite Cox loss")
    return loss


def cox_loss_grad(batch: SurvivalBatch) -> np.ndarray:
    """Gradient of ``cox_loss`` with respect to each hazard score."""
    if batch.n_events == 0:
        raise DataError("batch has no events, Cox loss undefined")
    f = batch.hazards
    at_risk = batch.times[None, :] >= batch.times[:, None]
    event_rows = batch.events == 1.0
    scores = np.where(at_risk[event_rows], f[None, :], -np.inf)
    mx = scores.max(axis=1)
    expd = np.exp(scores - mx[:, None])
    weights = expd / expd.sum(axis=1, keepdims=True)  # softmax within each risk set
    grad = -batch.events + weights.sum(axis=0)
    if not np.isfinite(grad).all():
        raise NumericalError("non-finite Cox gradient")
    return grad


def concordance_index(risks: np.ndarray, times: np.ndarray, events: np.ndarray) -> float:
    """Harrell's c-index of risk scores against observed outcomes."""
    risks = np.asarray(risks, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=np.float64)
    n = risks.shape[0]
    if times.shape != (n,) or events.shape != (n,):
        raise DataError("risks, times, and events must be aligned 1-d arrays")
    if not np.isfinite(risks).all():
        raise NumericalError("non-finite risk scores")
    comparable = (times[:, None] < times[None, :]) & (events[:, None] == 1.0)
    count = comparable.sum()
    if count == 0:
        raise DataError("no comparable pairs, c-index undefined")
    higher = risks[:, None] > risks[None, :]
    tied = risks[:, None] == risks[None, :]
    credit = np.where(higher, 1.0, np.where(tied, 0.5, 0.0))
    return float(credit[comparable].sum() / count)
