"""Loading, cleaning and combining monthly return panels.

Input files follow the layout of the Ken French data library tables once
the preamble has been stripped: a header row of asset names, a first
column of ``YYYYMM`` labels and a numeric body in percent.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import IngestError, PanelMismatchError

logger = logging.getLogger(__name__)

DEFAULT_MISSING_MARKERS = frozenset({-99.99, -999.0})


@dataclass(frozen=True)
class MissingPolicy:
    missing_markers: frozenset = DEFAULT_MISSING_MARKERS
    max_missing_per_asset: int = 10
    fill_value: float = 0.0

    def __post_init__(self):
        if self.max_missing_per_asset < 0:
            raise ValueError("max_missing_per_asset must be >= 0")
        if not math.isfinite(self.fill_value):
            raise ValueError("fill_value must be finite")
        object.__setattr__(
            self, "missing_markers", frozenset(float(m) for m in self.missing_markers)
        )


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """A dated ``T x n`` matrix of periodic returns in percent.

    ``dates`` are opaque ``YYYYMM`` labels; only their order is used.
    ``name`` is used to prefix asset identifiers when panels are combined.
    """

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    returns: np.ndarray
    provenance: str = ""
    name: str = "panel"
    dropped: tuple[str, ...] = field(default=())

    def __post_init__(self):
        dates = tuple(str(d) for d in self.dates)
        assets = tuple(str(a) for a in self.assets)
        returns = np.array(self.returns, dtype=float, copy=True)
        if returns.ndim != 2 or returns.shape != (len(dates), len(assets)):
            raise IngestError(
                f"returns shape {returns.shape} does not match "
                f"{len(dates)} dates x {len(assets)} assets"
            )
        if len(assets) < 2 or len(dates) < 2:
            raise IngestError(
                f"a panel needs at least 2 assets and 2 periods, got "
                f"n={len(assets)}, T={len(dates)}"
            )
        if len(set(assets)) != len(assets):
            dupes = sorted({a for a in assets if assets.count(a) > 1})
            raise IngestError(f"duplicate asset identifiers: {dupes}")
        keys = [_date_key(d) for d in dates]
        for i in range(1, len(keys)):
            if keys[i] <= keys[i - 1]:
                raise IngestError(
                    f"dates not strictly increasing at row {i}: "
                    f"{dates[i - 1]} -> {dates[i]}"
                )
        if not np.all(np.isfinite(returns)):
            raise IngestError("returns contain non-finite cells")
        returns.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "dropped", tuple(self.dropped))

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_periods(self) -> int:
        return len(self.dates)

    def window(self, start: int, stop: int) -> "ReturnsPanel":
        """Rows ``[start, stop)`` as a new panel."""
        return ReturnsPanel(
            self.dates[start:stop],
            self.assets,
            self.returns[start:stop],
            provenance=self.provenance,
            name=self.name,
        )

    def select(self, columns: Sequence[int]) -> "ReturnsPanel":
        """Keep only the given asset columns, in the given order."""
        columns = list(columns)
        return ReturnsPanel(
            self.dates,
            [self.assets[j] for j in columns],
            self.returns[:, columns],
            provenance=f"{self.provenance}; subset of {len(columns)} assets",
            name=self.name,
        )

    def equals(self, other: "ReturnsPanel") -> bool:
        return (
            self.dates == other.dates
            and self.assets == other.assets
            and np.array_equal(self.returns, other.returns)
        )


def _date_key(label: str) -> int:
    try:
        return int(label)
    except ValueError:
        raise IngestError(f"date label {label!r} is not a YYYYMM integer") from None


def _parse_yyyymm(cell: str, row: int) -> str:
    text = cell.strip()
    if len(text) != 6 or not text.isdigit() or not 1 <= int(text[4:]) <= 12:
        raise IngestError(f"row {row}, column 1: {cell!r} is not a YYYYMM date")
    return text


def load_returns_csv(path, policy: MissingPolicy | None = None) -> ReturnsPanel:
    """Read a returns file and apply the missing-data rule.

    Assets with more than ``policy.max_missing_per_asset`` missing cells are
    dropped; remaining missing cells become ``policy.fill_value``.  Row and
    column numbers in error messages are 1-based and count the header row.
    """
    policy = policy or MissingPolicy()
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise IngestError(f"{path}: expected a header row and at least one data row")

    header = [c.strip() for c in rows[0]]
    raw_assets = header[1:]
    n_raw = len(raw_assets)
    dates: list[str] = []
    body = np.empty((len(rows) - 1, n_raw))
    missing = np.zeros((len(rows) - 1, n_raw), dtype=bool)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != n_raw + 1:
            raise IngestError(
                f"{path}: row {lineno} has {len(row)} cells, header has {n_raw + 1}"
            )
        dates.append(_parse_yyyymm(row[0], lineno))
        for j, cell in enumerate(row[1:]):
            try:
                value = float(cell)
            except ValueError:
                raise IngestError(
                    f"{path}: row {lineno}, column {j + 2} ({raw_assets[j]}): "
                    f"malformed number {cell!r}"
                ) from None
            if not math.isfinite(value) or value in policy.missing_markers:
                missing[i, j] = True
            body[i, j] = value

    counts = missing.sum(axis=0)
    keep = counts <= policy.max_missing_per_asset
    dropped = tuple(a for a, k in zip(raw_assets, keep) if not k)
    if keep.sum() < 2:
        raise IngestError(
            f"{path}: only {int(keep.sum())} asset(s) survive the missing-data rule"
        )
    body = np.where(missing, policy.fill_value, body)[:, keep]
    assets = [a for a, k in zip(raw_assets, keep) if k]
    if dropped:
        logger.info("%s: dropped %d asset(s): %s", path, len(dropped), ", ".join(dropped))
    provenance = f"{path}; dropped={list(dropped)}"
    return ReturnsPanel(dates, assets, body, provenance=provenance, name=path.stem,
                        dropped=dropped)


def save_returns_csv(panel: ReturnsPanel, path) -> None:
    """Write a panel in the same layout ``load_returns_csv`` reads."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *panel.assets])
        for date, row in zip(panel.dates, panel.returns):
            writer.writerow([date, *(repr(float(x)) for x in row)])


def synthesize_panel(panels: Sequence[ReturnsPanel], name: str | None = None) -> ReturnsPanel:
    """Concatenate panels column-wise.

    Every asset id becomes ``"<panel name>:<asset>"`` so that ids stay unique
    even when sources share column names.
    """
    if not panels:
        raise PanelMismatchError("no panels to combine")
    base = panels[0]
    for p in panels[1:]:
        if p.dates != base.dates:
            if len(p.dates) != len(base.dates):
                pos = min(len(p.dates), len(base.dates))
            else:
                pos = next(i for i, (a, b) in enumerate(zip(base.dates, p.dates)) if a != b)
            raise PanelMismatchError(
                f"panel {p.name!r} dates differ from {base.name!r} at position {pos}"
            )
    assets = [f"{p.name}:{a}" for p in panels for a in p.assets]
    returns = np.hstack([p.returns for p in panels])
    name = name or "+".join(p.name for p in panels)
    provenance = "synthesized from " + "; ".join(f"[{p.provenance}]" for p in panels)
    return ReturnsPanel(base.dates, assets, returns, provenance=provenance, name=name)


class CorrelationRecord(NamedTuple):
    date: str
    mean_corr: float
    min_corr: float
    flagged: bool = False


def rolling_correlation_report(panel: ReturnsPanel, window: int) -> list[CorrelationRecord]:
    """Mean and minimum pairwise correlation over a trailing window.

    The record dated at row ``t`` uses rows ``t - window`` to ``t - 1``, so
    the first record is the ``window + 1``-th period.  Pairs involving an
    asset that is constant inside the window are skipped and the record is
    flagged.
    """
    T = panel.n_periods
    if not 2 <= window <= T:
        raise ValueError(f"window must lie in [2, {T}], got {window}")
    x = panel.returns
    n = panel.n_assets
    upper = np.triu_indices(n, k=1)
    records = []
    for t in range(window, T):
        block = x[t - window:t]
        centered = block - block.mean(axis=0)
        std = np.sqrt((centered**2).sum(axis=0) / (window - 1))
        ok = std > 0
        flagged = not ok.all()
        if flagged:
            bad = [panel.assets[j] for j in np.flatnonzero(~ok)]
            logger.warning("%s: zero variance in window ending before %s: %s",
                           panel.name, panel.dates[t], bad)
        z = np.zeros_like(centered)
        z[:, ok] = centered[:, ok] / std[ok]
        corr = z.T @ z / (window - 1)
        valid = ok[upper[0]] & ok[upper[1]]
        pairs = np.clip(corr[upper][valid], -1.0, 1.0)
        if pairs.size == 0:
            records.append(CorrelationRecord(panel.dates[t], math.nan, math.nan, True))
            continue
        records.append(
            CorrelationRecord(panel.dates[t], float(pairs.mean()), float(pairs.min()), flagged)
        )
    return records


def write_correlation_report(records: Sequence[CorrelationRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "mean_corr", "min_corr"])
        for r in records:
            writer.writerow([r.date, repr(r.mean_corr), repr(r.min_corr)])


def panel_summary(panel: ReturnsPanel) -> dict:
    """Descriptive statistics in the layout of a dataset summary table."""
    x = panel.returns
    corr = np.corrcoef(x, rowvar=False)
    off = corr[np.triu_indices(panel.n_assets, k=1)]
    return {
        "n_assets": panel.n_assets,
        "n_months": panel.n_periods,
        "average_mean": float(x.mean(axis=0).mean()),
        "average_variance": float(x.var(axis=0, ddof=1).mean()),
        "max_correlation": float(off.max()),
        "mean_correlation": float(off.mean()),
        "min_correlation": float(off.min()),
    }
