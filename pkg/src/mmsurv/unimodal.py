"""Stage 1: per-modality encoders trained on the Cox objective.

Each modality gets its own small SELU encoder mapping raw features to a
32-dimensional embedding, topped during training by a single affine scoring
layer. Training runs only on the records where the modality is present, so
a rarely observed modality simply trains on fewer samples. After stage 1
the scoring layer is discarded and the frozen encoder produces embeddings
for the fusion stage.

An embedding table is just a cohort whose feature blocks are embeddings
(every block width equals the embedding width), which keeps one file format
for raw cohorts and precomputed embeddings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, ModalityId, PatientRecord, embedding_schema
from .config import TrainConfig, TrainingTrace
from .errors import DataError
from .nets import DenseNet, GradientSet, OptimizerState, init_net, net_from_dict, net_to_dict, optimizer_step
from .survival import SurvivalBatch, concordance_index, cox_loss, cox_loss_grad

ENCODER_HIDDEN = 64
CHECKPOINT_FORMAT = "unimodal-v1"

_STAGE1_SALT = 0x51A6E1


@dataclass
class UnimodalEncoder:
    """A trained per-modality encoder plus its stage-1 scoring head."""

    modality: ModalityId
    encoder: DenseNet
    head: DenseNet
    trace: TrainingTrace | None = field(default=None, repr=False)

    def embed(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.encoder.forward(x)
        return y

    def score(self, x: np.ndarray) -> float:
        y, _ = self.head.forward(self.embed(x))
        return float(y[0])


def _validation_split(n: int, val_fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    n_val = int(round(n * val_fraction))
    perm = rng.permutation(n)
    return perm[n_val:], perm[:n_val]


def has_comparable_pair(times: np.ndarray, events: np.ndarray) -> bool:
    """Whether a c-index is defined for these outcomes at all."""
    event_times = times[events == 1]
    return event_times.size > 0 and times.max() > event_times.min()


def train_unimodal(cohort: Cohort, modality: ModalityId, config: TrainConfig) -> UnimodalEncoder:
    """Train one modality's encoder on the records where it is present."""
    rows = [(r.features[modality], r.time, float(r.event))
            for r in cohort.records if r.has(modality)]
    if not rows:
        raise DataError(f"no records carry {modality.label}, nothing to train on")
    if sum(e for _, _, e in rows) == 0:
        raise DataError(f"records carrying {modality.label} have zero observed events")
    raw_dim = cohort.schema.dim(modality)
    embed_dim = cohort.schema.embed_dim

    ss = np.random.SeedSequence([_STAGE1_SALT, config.seed, int(modality)])
    init_seed, head_seed, split_seed, shuffle_seed = ss.spawn(4)
    encoder = init_net((raw_dim, ENCODER_HIDDEN, embed_dim), "selu", init_seed)
    head = init_net((embed_dim, 1), "identity", head_seed)

    train_idx, val_idx = _validation_split(len(rows), config.val_fraction,
                                           np.random.default_rng(split_seed))
    val = [rows[i] for i in val_idx]
    train = [rows[i] for i in train_idx]
    use_val = len(val) >= 2 and has_comparable_pair(np.array([t for _, t, _ in val]),
                                                    np.array([e for _, _, e in val]))

    opt_enc = OptimizerState(config.optimizer, config.stage1_lr, encoder)
    opt_head = OptimizerState(config.optimizer, config.stage1_lr, head)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    trace = TrainingTrace()
    best_ci, best_params, stale = -np.inf, None, 0
    for epoch in range(config.stage1_epochs):
        order = shuffle_rng.permutation(len(train))
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, len(train), config.stage1_batch):
            batch = [train[i] for i in order[start:start + config.stage1_batch]]
            if sum(e for _, _, e in batch) == 0:
                continue  # Cox loss needs at least one event
            scores, tapes = [], []
            for x, _, _ in batch:
                emb, tape_e = encoder.forward(x)
                f, tape_h = head.forward(emb)
                scores.append(f[0])
                tapes.append((tape_e, tape_h))
            sb = SurvivalBatch(np.array(scores),
                               np.array([t for _, t, _ in batch]),
                               np.array([e for _, _, e in batch]))
            dF = cox_loss_grad(sb)
            g_enc = GradientSet.zeros_like(encoder)
            g_head = GradientSet.zeros_like(head)
            for k, (tape_e, tape_h) in enumerate(tapes):
                gh, d_emb = head.backward(tape_h, np.array([dF[k]]))
                ge, _ = encoder.backward(tape_e, d_emb)
                g_head.add(gh)
                g_enc.add(ge)
            optimizer_step(encoder, g_enc, opt_enc)
            optimizer_step(head, g_head, opt_head)
            epoch_loss += cox_loss(sb)
            n_batches += 1
        val_ci = None
        if use_val:
            risks = np.array([float(head.forward(encoder.forward(x)[0])[0][0]) for x, _, _ in val])
            val_ci = concordance_index(risks,
                                       np.array([t for _, t, _ in val]),
                                       np.array([e for _, _, e in val]))
        trace.log(epoch, epoch_loss / max(n_batches, 1), val_ci)
        if use_val:
            if val_ci > best_ci:
                best_ci, best_params, stale = val_ci, (encoder.copy(), head.copy()), 0
            else:
                stale += 1
                if stale > config.patience:
                    break
    if best_params is not None:
        encoder, head = best_params
    return UnimodalEncoder(modality, encoder, head, trace)


def export_embeddings(encoders, cohort: Cohort) -> Cohort:
    """Embed every present modality of every record with frozen encoders.

    Returns a cohort over the embedding schema with identical ids, times,
    events, and availability. Missing modalities stay missing, nothing is
    imputed here.
    """
    needed = set()
    for r in cohort.records:
        for m in ModalityId:
            if r.has(m):
                needed.add(m)
    missing = sorted(m.label for m in needed if m not in encoders)
    if missing:
        raise DataError("no encoder for modalities present in cohort: " + ", ".join(missing))
    for m in needed:
        if encoders[m].encoder.input_dim != cohort.schema.dim(m):
            raise DataError(f"{m.label} encoder expects {encoders[m].encoder.input_dim} features, "
                            f"cohort provides {cohort.schema.dim(m)}")
    records = []
    for r in cohort.records:
        feats = tuple(encoders[m].embed(r.features[m]) if r.has(m) else None for m in ModalityId)
        records.append(PatientRecord(r.id, r.time, r.event, feats))
    return Cohort(embedding_schema(cohort.schema), records, cohort.ground_truth_risk)


def save_unimodal(model: UnimodalEncoder, path: str) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "modality": model.modality.label,
        "encoder": net_to_dict(model.encoder),
        "head": net_to_dict(model.head),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_unimodal(path: str) -> UnimodalEncoder:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a stage-1 checkpoint (format {payload.get('format')!r})")
    return UnimodalEncoder(ModalityId.from_name(payload["modality"]),
                           net_from_dict(payload["encoder"]),
                           net_from_dict(payload["head"]))
