"""Wake-word detection scoring: FRR + FAR at a threshold, and sweeps.

A system fires on an utterance when its score is >= the threshold. The
false reject rate is the fraction of wake utterances not fired on; the
false alarm rate is the fraction of non-wake utterances fired on; the
headline number is their sum.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, ValidationError

LABEL_WAKE = "wake"
LABEL_NON_WAKE = "non-wake"
LABELS = (LABEL_WAKE, LABEL_NON_WAKE)


@dataclass(frozen=True)
class ScoredUtterance:
    utterance_id: str
    label: str
    score: float

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise InputError(f"label must be one of {LABELS}, got {self.label!r}")
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"score {self.score} for {self.utterance_id!r} outside [0, 1]")


@dataclass
class LabeledScores:
    """Scored utterances with unique ids and both classes representable."""

    entries: tuple[ScoredUtterance, ...]

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        if not entries:
            raise InputError("no scored utterances given")
        seen: set[str] = set()
        for e in entries:
            if e.utterance_id in seen:
                raise InputError(f"duplicate utterance id {e.utterance_id!r}")
            seen.add(e.utterance_id)
        object.__setattr__(self, "entries", entries)

    def class_scores(self) -> tuple[np.ndarray, np.ndarray]:
        wake = np.array([e.score for e in self.entries if e.label == LABEL_WAKE])
        non_wake = np.array([e.score for e in self.entries if e.label == LABEL_NON_WAKE])
        return wake, non_wake


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    frr: float
    far: float
    score: float


def score(entries: LabeledScores, threshold: float) -> OperatingPoint:
    """FRR, FAR, and their sum at one threshold (fires when score >= threshold)."""
    if not 0.0 <= threshold <= 1.0:
        raise InputError(f"threshold {threshold} outside [0, 1]")
    wake, non_wake = entries.class_scores()
    if wake.size == 0 or non_wake.size == 0:
        raise InputError("need at least one wake and one non-wake utterance")
    frr = float(np.count_nonzero(wake < threshold)) / wake.size
    far = float(np.count_nonzero(non_wake >= threshold)) / non_wake.size
    return OperatingPoint(threshold=float(threshold), frr=frr, far=far, score=frr + far)


def sweep(entries: LabeledScores) -> list[OperatingPoint]:
    """Operating points at every distinct score cut.

    Thresholds are the distinct scores (each accepts everything at or above
    it) plus one reject-all cut just above the highest score; the sweep
    therefore contains the global minimizer of FRR + FAR.
    """
    wake, non_wake = entries.class_scores()
    if wake.size == 0 or non_wake.size == 0:
        raise InputError("need at least one wake and one non-wake utterance")
    all_scores = np.concatenate([wake, non_wake])
    cuts = np.unique(all_scores)
    cuts = np.append(cuts, np.nextafter(cuts[-1], np.inf))
    wake_sorted = np.sort(wake)
    non_wake_sorted = np.sort(non_wake)
    points = []
    for t in cuts:
        frr = float(np.searchsorted(wake_sorted, t, side="left")) / wake.size
        far = float(non_wake.size - np.searchsorted(non_wake_sorted, t, side="left")) / non_wake.size
        points.append(OperatingPoint(threshold=float(t), frr=frr, far=far, score=frr + far))
    return points


def best_point(points: Sequence[OperatingPoint]) -> OperatingPoint:
    """The minimizing operating point (first one on ties)."""
    if not points:
        raise InputError("empty sweep")
    return min(points, key=lambda p: (p.score, p.threshold))


def average_scores(systems: Sequence[LabeledScores]) -> LabeledScores:
    """Per-utterance arithmetic mean of several systems' scores."""
    if not systems:
        raise InputError("no systems to average")
    base = {e.utterance_id: e.label for e in systems[0].entries}
    sums = {uid: 0.0 for uid in base}
    for k, system in enumerate(systems):
        ids = {e.utterance_id for e in system.entries}
        if ids != set(base):
            raise InputError(f"system {k} has a different utterance id set")
        for e in system.entries:
            if base[e.utterance_id] != e.label:
                raise InputError(
                    f"label mismatch for {e.utterance_id!r} between systems 0 and {k}"
                )
            sums[e.utterance_id] += e.score
    n = len(systems)
    entries = tuple(
        ScoredUtterance(utterance_id=e.utterance_id, label=e.label, score=sums[e.utterance_id] / n)
        for e in systems[0].entries
    )
    return LabeledScores(entries=entries)


# --- files ---------------------------------------------------------------------


def read_scores_csv(path: str | Path) -> LabeledScores:
    """Read ``id,label,score`` rows (header required, label wake/non-wake)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "label", "score"]:
            raise ValidationError(f"{path}: expected header 'id,label,score', got {reader.fieldnames}")
        entries = []
        for row_num, row in enumerate(reader, start=2):
            try:
                entries.append(
                    ScoredUtterance(
                        utterance_id=row["id"],
                        label=row["label"].strip(),
                        score=float(row["score"]),
                    )
                )
            except (TypeError, ValueError, InputError) as exc:
                raise ValidationError(f"{path}: line {row_num}: {exc}")
    return LabeledScores(entries=tuple(entries))


def write_sweep_csv(path: str | Path, points: Sequence[OperatingPoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "frr", "far", "score"])
        for p in points:
            writer.writerow([repr(p.threshold), repr(p.frr), repr(p.far), repr(p.score)])


def write_report_json(path: str | Path, point: OperatingPoint) -> None:
    payload = {
        "threshold": point.threshold,
        "frr": point.frr,
        "far": point.far,
        "score": point.score,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_point(point: OperatingPoint) -> str:
    """Human-readable summary with rates in percent, two decimals."""
    return (
        f"threshold {point.threshold:.6g}: FRR {100 * point.frr:.2f}% "
        f"+ FAR {100 * point.far:.2f}% = score {100 * point.score:.2f}%"
    )
