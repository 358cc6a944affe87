"""Evaluation metrics for presentation attack detection, plus the live score.

A record is accepted as bona fide when its score reaches the threshold.
APCER is the worst per-instrument acceptance rate among attacks, BPCER the
bona fide rejection rate, ACER their mean. HTER averages the rejection rate
with the acceptance rate pooled over all attacks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

LIVING = "living"
ATTACK = "attack"


@dataclass(frozen=True)
class EvalRecord:
    """One scored sample: score in [0, 1], its label, and the PAI tag."""

    score: float
    label: str
    attack_kind: Optional[str] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be finite in [0, 1], got {self.score!r}")
        if self.label not in (LIVING, ATTACK):
            raise ValueError(f"label must be {LIVING!r} or {ATTACK!r}, "
                             f"got {self.label!r}")


def masked_depth_term(fused: Sequence, masks: Sequence) -> float:
    """Mean masked depth over the sequence, each frame normalized by its mask size."""
    if len(fused) != len(masks) or not fused:
        raise ValueError(f"{len(fused)} depth maps vs {len(masks)} masks")
    terms = []
    for grid, mask in zip(fused, masks):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(getattr(mask, "values", mask))
        if grid.shape != values.shape:
            raise ValueError(f"mask shape {values.shape} does not match "
                             f"depth shape {grid.shape}")
        count = values.sum()
        if count == 0:
            raise ValueError("empty face mask")
        terms.append(np.abs(grid * values).sum() / count)
    return float(np.mean(terms))


def living_score(b_hat: float, fused: Sequence, masks: Sequence,
                 beta: float) -> float:
    """Final live score: beta * b_hat + (1 - beta) * mean masked depth."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta * b_hat + (1.0 - beta) * masked_depth_term(fused, masks)


def _split(records: Sequence[EvalRecord]):
    living = [r for r in records if r.label == LIVING]
    attacks = [r for r in records if r.label == ATTACK]
    if not living or not attacks:
        raise ValueError("need at least one living and one attack record")
    return living, attacks


def _accepted(record: EvalRecord, threshold: float) -> bool:
    return record.score >= threshold


def apcer_bpcer_acer(records: Sequence[EvalRecord],
                     threshold: float) -> tuple[float, float, float]:
    """Worst per-PAI acceptance rate, bona fide rejection rate, and their mean."""
    living, attacks = _split(records)
    by_pai: dict[Optional[str], list[EvalRecord]] = {}
    for rec in attacks:
        by_pai.setdefault(rec.attack_kind, []).append(rec)
    apcer = max(sum(_accepted(r, threshold) for r in group) / len(group)
                for group in by_pai.values())
    bpcer = sum(not _accepted(r, threshold) for r in living) / len(living)
    return apcer, bpcer, (apcer + bpcer) / 2.0


def hter(records: Sequence[EvalRecord], threshold: float) -> float:
    """Half total error rate; attacks pooled into one false-acceptance rate."""
    living, attacks = _split(records)
    frr = sum(not _accepted(r, threshold) for r in living) / len(living)
    far = sum(_accepted(r, threshold) for r in attacks) / len(attacks)
    return (frr + far) / 2.0


def metrics_summary(records: Sequence[EvalRecord], threshold: float) -> dict:
    """All metrics in one JSON-ready dict with fixed keys."""
    apcer, bpcer, acer = apcer_bpcer_acer(records, threshold)
    living, attacks = _split(records)
    per_pai = {}
    for rec in attacks:
        per_pai.setdefault(rec.attack_kind or ATTACK, []).append(rec)
    return {
        "threshold": threshold,
        "apcer": apcer,
        "bpcer": bpcer,
        "acer": acer,
        "hter": hter(records, threshold),
        "per_pai_apcer": {
            kind: sum(_accepted(r, threshold) for r in group) / len(group)
            for kind, group in sorted(per_pai.items())
        },
        "n_living": len(living),
        "n_attack": len(attacks),
    }


def read_records_csv(path) -> list[EvalRecord]:
    """Load records from a CSV with columns score,label,attack_kind."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["score", "label", "attack_kind"]
        if reader.fieldnames is None or list(reader.fieldnames) != expected:
            raise ValueError(f"records CSV must have columns {expected}, "
                             f"got {reader.fieldnames}")
        for line_no, row in enumerate(reader, start=2):
            try:
                score = float(row["score"])
            except (TypeError, ValueError):
                raise ValueError(f"line {line_no}: bad score {row['score']!r}")
            kind = row["attack_kind"] or None
            try:
                records.append(EvalRecord(score, row["label"], kind))
            except ValueError as exc:
                raise ValueError(f"line {line_no}: {exc}")
    if not records:
        raise ValueError("records CSV holds no data rows")
    return records


def write_records_csv(records: Sequence[EvalRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score", "label", "attack_kind"])
        for rec in records:
            writer.writerow([repr(float(rec.score)), rec.label,
                             rec.attack_kind or ""])
