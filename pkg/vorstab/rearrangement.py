"""Rearrangement classes on unequal cells and the energy ascent over a class.

Values are matched by cumulative measure: sort the source by value, sort the
target cells by an order key, and give each target cell the average of the
source quantile function over the cell's cumulative-measure interval. With
equal cells this is a plain permutation.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from vorstab.elliptic import (
    CirculationVector,
    EllipticContext,
    apply_P,
    as_circulation,
    energy,
    h_gamma,
)
from vorstab.errors import AscentError, GridError
from vorstab.grid import ScalarField, lp_norm
from vorstab.logging import get_logger
from vorstab.storage.fields import write_field
from vorstab.storage.paths import ASCENT_NAME

__all__ = [
    "CellList",
    "AscentReport",
    "distribution",
    "quantile_distance",
    "equimeasurable",
    "transport_rearrange",
    "rearrange_cells",
    "follower",
    "class_defect",
    "in_class",
    "burton_ascent",
]

logger = get_logger(component="rearrangement")

_TOTAL_RTOL = 1e-9


@dataclass(frozen=True, slots=True)
class CellList:
    """Flattened ``(value, measure)`` pairs."""

    values: np.ndarray
    measures: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        measures = np.asarray(self.measures, dtype=float).ravel()
        if values.shape != measures.shape:
            raise GridError("values and measures must have the same length")
        if values.size == 0 or np.any(measures <= 0):
            raise GridError("cell measures must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "measures", measures)

    @classmethod
    def from_field(cls, f: ScalarField) -> "CellList":
        return cls(f.values, f.grid.measures)

    @property
    def total(self) -> float:
        return float(self.measures.sum())

    def order(self, key: np.ndarray | None = None) -> np.ndarray:
        """Stable ascending order by ``key`` (default: own values), ties by index."""
        key = self.values if key is None else np.asarray(key, dtype=float).ravel()
        return np.argsort(key, kind="stable")

    def sorted(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted values and their cumulative measures."""
        idx = self.order()
        return self.values[idx], np.cumsum(self.measures[idx])


def _check_totals(a: CellList, b: CellList) -> None:
    if abs(a.total - b.total) > _TOTAL_RTOL * max(a.total, b.total):
        raise GridError(f"total measures differ: {a.total} vs {b.total}")


def _pieces(*cums: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Common refinement of several cumulative partitions of the same interval."""
    total = cums[0][-1]
    scaled = [c * (total / c[-1]) for c in cums]
    breaks = np.unique(np.concatenate([[0.0], *scaled]))
    lengths = np.diff(breaks)
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    keep = lengths > 0
    lengths, mids = lengths[keep], mids[keep]
    idx = [
        np.minimum(np.searchsorted(c, mids, side="right"), c.size - 1) for c in scaled
    ]
    return lengths, mids, idx


def _matched_averages(
    src_sorted: np.ndarray, src_cum: np.ndarray, tgt_cum: np.ndarray
) -> np.ndarray:
    lengths, _, (si, ti) = _pieces(src_cum, tgt_cum)
    mass = np.bincount(ti, weights=lengths * src_sorted[si], minlength=tgt_cum.size)
    size = np.bincount(ti, weights=lengths, minlength=tgt_cum.size)
    return mass / size


def rearrange_cells(source: CellList, target: CellList) -> np.ndarray:
    """Source values rearranged onto the target cells, increasing with target values."""
    _check_totals(source, target)
    src_sorted, src_cum = source.sorted()
    idx = target.order()
    averages = _matched_averages(src_sorted, src_cum, np.cumsum(target.measures[idx]))
    out = np.empty_like(averages)
    out[idx] = averages
    return out


def distribution(f: ScalarField, s: float) -> float:
    """Measure of the set where ``f > s``."""
    return float(np.sum(f.grid.measures[f.values > s]))


def quantile_distance(f: ScalarField | CellList, g: ScalarField | CellList) -> float:
    """L1 distance between the quantile functions of ``f`` and ``g``."""
    a = f if isinstance(f, CellList) else CellList.from_field(f)
    b = g if isinstance(g, CellList) else CellList.from_field(g)
    _check_totals(a, b)
    av, ac = a.sorted()
    bv, bc = b.sorted()
    lengths, _, (ia, ib) = _pieces(ac, bc)
    return float(np.sum(lengths * np.abs(av[ia] - bv[ib])))


def equimeasurable(f: ScalarField, g: ScalarField, tol: float = 1e-10) -> bool:
    return quantile_distance(f, g) <= tol


def transport_rearrange(source: ScalarField, order: ScalarField) -> ScalarField:
    """Rearrangement of ``source`` increasing with respect to ``order``."""
    if source.grid != order.grid:
        raise GridError("fields live on different grids")
    values = rearrange_cells(
        CellList.from_field(source), CellList(order.values, order.grid.measures)
    )
    return source.with_values(values.reshape(source.grid.shape))


def follower(w: ScalarField, reference: ScalarField, p: float = 2.0) -> ScalarField:
    """Member of the class of ``reference`` nearest to ``w`` in ``L^p``."""
    if p < 1:
        raise GridError(f"p must be >= 1, got {p}")
    return transport_rearrange(reference, order=w)


def class_defect(seed: ScalarField, f: ScalarField) -> float:
    """L1 distance from ``f`` to the seed's class member ordered like ``f``."""
    matched = transport_rearrange(seed, order=f)
    return float(np.sum(np.abs(f.values - matched.values) * f.grid.measures))


def in_class(seed: ScalarField, f: ScalarField, tol: float = 1e-10) -> bool:
    return class_defect(seed, f) <= tol * max(lp_norm(seed, 1.0), 1e-300)


@dataclass(slots=True)
class AscentReport:
    """Trajectory of an energy ascent over a rearrangement class."""

    iterations: int
    energies: list[float]
    residuals: list[float]
    class_defects: list[float]
    final: ScalarField = field(repr=False)
    residual: float
    cause: str
    gamma: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "energies": self.energies,
            "residuals": self.residuals,
            "class_defects": self.class_defects,
            "residual": self.residual,
            "cause": self.cause,
            "gamma": self.gamma,
            "grid": self.final.grid.params(),
        }

    def save(self, out_dir: str | Path) -> list[Path]:
        """Write ``ascent.json`` and ``final.csv``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        field_path = write_field(self.final, out_dir / "final.csv")
        path = out_dir / ASCENT_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return [field_path, path]


def burton_ascent(
    ctx: EllipticContext,
    seed: ScalarField,
    gamma: CirculationVector | Sequence[float] | None = None,
    max_iters: int = 500,
    fp_tol: float | None = None,
    class_tol: float = 1e-10,
) -> AscentReport:
    """Maximize the energy over the class of ``seed`` at fixed circulation.

    Each step replaces the iterate by the seed rearranged to increase with
    the potential ``P v + h_gamma``. The energy never decreases.
    """
    gamma = as_circulation(ctx.grid, gamma)
    if max_iters < 0:
        raise GridError(f"max_iters must be >= 0, got {max_iters}")
    if fp_tol is None:
        fp_tol = 1e-8 * lp_norm(seed, 2.0)
    h = h_gamma(ctx, gamma)
    seed_l1 = max(lp_norm(seed, 1.0), 1e-300)

    v = seed
    energies = [energy(ctx, v, gamma)]
    residuals: list[float] = []
    defects = [0.0]
    cause = "max_iters"
    iterations = 0
    while True:
        candidate = transport_rearrange(seed, order=apply_P(ctx, v) + h)
        residual = lp_norm(v - candidate, 2.0)
        residuals.append(residual)
        if residual <= fp_tol:
            cause = "fixed_point"
            break
        if iterations >= max_iters:
            break
        v = candidate
        iterations += 1
        value = energy(ctx, v, gamma)
        scale = max(abs(value), abs(energies[-1]), 1e-300)
        if value < energies[-1] - 1e-10 * scale:
            raise AscentError(
                f"energy decreased at iteration {iterations}: "
                f"{energies[-1]:.15g} -> {value:.15g}"
            )
        defect = class_defect(seed, v)
        if defect > class_tol * seed_l1:
            raise AscentError(
                f"iterate {iterations} left the rearrangement class, defect {defect:.3e}"
            )
        energies.append(value)
        defects.append(defect)
        logger.debug("ascent_step", iteration=iterations, energy=value, residual=residual)

    report = AscentReport(
        iterations=iterations,
        energies=energies,
        residuals=residuals,
        class_defects=defects,
        final=v,
        residual=residuals[-1],
        cause=cause,
        gamma=gamma.to_list(),
    )
    logger.info(
        "ascent_finished",
        iterations=iterations,
        cause=cause,
        energy=energies[-1],
        residual=report.residual,
    )
    return report
