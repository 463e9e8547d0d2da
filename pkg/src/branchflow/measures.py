"""Finite atomic measures and transport problem instances."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .cost import CostParams

EPS_POS = 1e-9
EPS_MASS = 1e-9


def _as_point(pos: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in pos)


@dataclass(frozen=True)
class AtomicMeasure:
    """A finite sum of weighted point masses.

    Atoms are kept sorted lexicographically by position. Construction does
    not reject invalid data (nonpositive masses, duplicate positions); those
    are reported by :meth:`violations` so that problem files can be
    validated without raising.
    """

    atoms: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __post_init__(self):
        atoms = tuple(sorted((_as_point(p), float(m)) for p, m in self.atoms))
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[float], float]]) -> AtomicMeasure:
        return cls(tuple((tuple(p), m) for p, m in pairs))

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __add__(self, other: AtomicMeasure) -> AtomicMeasure:
        merged: list[list] = [[p, m] for p, m in self.atoms]
        for p, m in other.atoms:
            for item in merged:
                if _close(item[0], p):
                    item[1] += m
                    break
            else:
                merged.append([p, m])
        return AtomicMeasure(tuple((p, m) for p, m in merged))

    @property
    def positions(self) -> list[tuple[float, ...]]:
        return [p for p, _ in self.atoms]

    @property
    def masses(self) -> list[float]:
        return [m for _, m in self.atoms]

    @property
    def dimension(self) -> int | None:
        return len(self.atoms[0][0]) if self.atoms else None

    def violations(self) -> list[str]:
        out = []
        dims = {len(p) for p, _ in self.atoms}
        if len(dims) > 1:
            out.append("mixed dimensions")
        if any(d < 1 for d in dims):
            out.append("empty position")
        for p, m in self.atoms:
            if not (m > 0):
                out.append(f"nonpositive mass at {list(p)}")
        for i in range(len(self.atoms)):
            for j in range(i + 1, len(self.atoms)):
                if _close(self.atoms[i][0], self.atoms[j][0]):
                    out.append(f"duplicate position {list(self.atoms[i][0])}")
        return out


def _close(p: Sequence[float], q: Sequence[float], eps: float = EPS_POS) -> bool:
    if len(p) != len(q):
        return False
    return float(np.linalg.norm(np.subtract(p, q))) <= eps


def total_mass(m: AtomicMeasure) -> float:
    return float(sum(m.masses))


@dataclass(frozen=True)
class TransportProblem:
    source: AtomicMeasure
    sink: AtomicMeasure
    params: CostParams | None = None

    def __add__(self, other: TransportProblem) -> TransportProblem:
        return TransportProblem(self.source + other.source, self.sink + other.sink, self.params)

    @property
    def dimension(self) -> int | None:
        return self.source.dimension or self.sink.dimension


def mass_tolerance(p: TransportProblem) -> float:
    return EPS_MASS * max(total_mass(p.source), total_mass(p.sink), 1.0)


def validate_problem(p: TransportProblem) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    report = [f"source: {v}" for v in p.source.violations()]
    report += [f"sink: {v}" for v in p.sink.violations()]
    d1, d2 = p.source.dimension, p.sink.dimension
    if d1 is not None and d2 is not None and d1 != d2:
        report.append("dimension mismatch between source and sink")
    gap = abs(total_mass(p.source) - total_mass(p.sink))
    if gap > mass_tolerance(p):
        report.append(f"mass mismatch: source {total_mass(p.source)!r} vs sink {total_mass(p.sink)!r}")
    return report

