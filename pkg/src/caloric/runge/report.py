"""Error accounting shared by the approximation stages."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class StageRecord:
    label: str
    error: float
    tolerance: float | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self):
        doc = {"label": self.label, "error": self.error}
        if self.tolerance is not None:
            doc["tolerance"] = self.tolerance
        if self.meta:
            doc["meta"] = self.meta
        return doc


@dataclass
class ApproxReport:
    """Measured sup error plus the per-stage ledger that bounds it."""

    sup_error: float = 0.0
    residual_norm: float = 0.0
    pole_count: int = 0
    stages: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add_stage(self, label, error, tolerance=None, **meta):
        self.stages.append(StageRecord(label, float(error),
                                       None if tolerance is None else float(tolerance),
                                       dict(meta)))

    def ledger_total(self):
        return float(sum(s.error for s in self.stages))

    def ledger_bounds_total(self, slack=1e-12):
        """Triangle inequality: the stage sum must dominate the sup error."""
        if not self.stages:
            return True
        return self.sup_error <= self.ledger_total() + slack

    def to_json(self):
        return {
            "sup_error": self.sup_error,
            "residual_norm": self.residual_norm,
            "pole_count": self.pole_count,
            "stages": [s.to_json() for s in self.stages],
            "flags": list(self.flags),
            "notes": dict(self.notes),
        }
