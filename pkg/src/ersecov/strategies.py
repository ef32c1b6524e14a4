"""Strategy labels and the dispatch from a label to a fitted estimate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import UNIMPLEMENTED_LABELS, lin1p_estimate, linc_estimate, sample_estimate
from .erse import DEFAULT_DELTA, CovarianceEstimate, ErseConfig, erse
from .spectral import sample_moments

IMPLEMENTED_LABELS = ("SAMPLE", "EW", "LIN1P", "LINC", "ERSE")
# Row order of the comparison tables.
TABLE_ORDER = ("EW", "SAMPLE", "LIN1P", "LIN2P", "LINC", "LIND", "LINM",
               "GIS", "LIS", "QIS", "ERSE")


class UnknownStrategyError(ValueError):
    def __init__(self, label: str):
        super().__init__(
            f"unknown estimator {label!r}; implemented: {', '.join(IMPLEMENTED_LABELS)}; "
            f"recognized but not implemented: {', '.join(UNIMPLEMENTED_LABELS)}"
        )


@dataclass(frozen=True)
class StrategySpec:
    label: str
    params: dict = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        label = self.label.upper()
        if label not in IMPLEMENTED_LABELS and label not in UNIMPLEMENTED_LABELS:
            raise UnknownStrategyError(self.label)
        params = dict(self.params)
        if label == "ERSE":
            params["delta"] = float(params.get("delta", DEFAULT_DELTA))
            ErseConfig(delta=params["delta"])
        elif params:
            raise ValueError(f"{label} takes no parameters, got {sorted(params)}")
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "params", params)

    @property
    def implemented(self) -> bool:
        return self.label in IMPLEMENTED_LABELS

    @property
    def name(self) -> str:
        if self.label == "ERSE" and self.params["delta"] != DEFAULT_DELTA:
            return f"ERSE(delta={self.params['delta']:g})"
        return self.label

    def fit(self, window) -> CovarianceEstimate | None:
        """Fit on a ``T x n`` return window; ``None`` for equal weights."""
        if not self.implemented:
            raise NotImplementedError(f"{self.label} is not implemented")
        x = np.asarray(getattr(window, "returns", window), dtype=float)
        if self.label == "EW":
            return None
        if self.label == "LIN1P":
            return lin1p_estimate(x)
        if self.label == "LINC":
            return linc_estimate(x)
        m = sample_moments(x)
        if self.label == "SAMPLE":
            return sample_estimate(m)
        return erse(m, ErseConfig(delta=self.params["delta"]))


def parse_strategy(text: str) -> StrategySpec:
    """Parse ``label[:key=value,...]``, e.g. ``erse:delta=0.3``."""
    label, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"bad estimator parameter {item!r} in {text!r}")
        try:
            params[key.strip().lower()] = float(value)
        except ValueError:
            raise ValueError(f"parameter {key!r} in {text!r} is not a number") from None
    return StrategySpec(label.strip(), params)


def default_strategies() -> list[StrategySpec]:
    return [StrategySpec(label) for label in TABLE_ORDER]
