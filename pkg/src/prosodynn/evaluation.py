"""Precision, recall and F-score on the boundary tag, plus a text report."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .features import LEVELS, TAG_INDEX, tag_indices

BOUNDARY = TAG_INDEX["B"]


def f_score(p: float, r: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class PrfMetrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f_score(self) -> float:
        return f_score(self.precision, self.recall)

    @property
    def degenerate(self) -> bool:
        """True when a denominator was zero and a metric was set to 0 by convention."""
        return self.tp + self.fp == 0 or self.tp + self.fn == 0

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "precision": self.precision,
                "recall": self.recall, "f_score": self.f_score, "degenerate": self.degenerate}


def score_prf(pred, gold) -> PrfMetrics:
    """Count boundary hits over paired tag sequences (lists of sequences)."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sequences vs {len(gold)} gold")
    tp = fp = fn = 0
    for n, (p, g) in enumerate(zip(pred, gold)):
        if len(p) != len(g):
            raise ValueError(f"sequence {n}: predicted length {len(p)} vs gold {len(g)}")
        pb = tag_indices(p) == BOUNDARY
        gb = tag_indices(g) == BOUNDARY
        tp += int((pb & gb).sum())
        fp += int((pb & ~gb).sum())
        fn += int((~pb & gb).sum())
    return PrfMetrics(tp, fp, fn)


def percent(x: float) -> str:
    """Percentage rounded half-up to two decimals."""
    return str((Decimal(repr(x)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_report(metrics: dict) -> str:
    levels = [lv for lv in LEVELS if lv in metrics]
    if not levels:
        raise ValueError("no levels to report")
    rows = [("Boundary", "P (%)", "R (%)", "F (%)")]
    for lv in levels:
        m = metrics[lv]
        rows.append((lv, percent(m.precision), percent(m.recall), percent(m.f_score)))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = [" | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def emit_report(metrics: dict, path=None, kv_path=None) -> str:
    """Format the table, optionally writing it and a key=value dump to disk."""
    text = format_report(metrics)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if kv_path is not None:
        with open(kv_path, "w", encoding="utf-8") as fh:
            for lv in LEVELS:
                if lv in metrics:
                    for k, v in metrics[lv].as_dict().items():
                        fh.write(f"{lv}.{k}={v}\n")
    return text
