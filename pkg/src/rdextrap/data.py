"""Sample containers and subsample selection for multi-cutoff RD data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingArmError

SIDE_LEFT = "left_of_c"
SIDE_RIGHT = "right_of_c"
SIDE_ALL = "all"
SIDES = (SIDE_LEFT, SIDE_RIGHT, SIDE_ALL)

CUTOFF_ATOL = 1e-9


@dataclass(frozen=True)
class RdSample:
    """One observation: outcome, running variable, cutoff label, treatment."""

    y: float
    x: float
    c: float
    d: int


@dataclass(frozen=True)
class RdData:
    """Columnar view of an RD sample.

    Arrays share a common length; ``y`` and ``x`` must be finite and ``d``
    binary. Rows that the estimators never select (for example treated
    observations of the highest-cutoff group) may be present.
    """

    y: np.ndarray
    x: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        c = np.asarray(self.c, dtype=float)
        d = np.asarray(self.d)
        n = y.size
        if not (x.size == n and c.size == n and d.size == n):
            raise ValueError("y, x, c, d must have equal lengths")
        if n and not (np.isfinite(y).all() and np.isfinite(x).all() and np.isfinite(c).all()):
            raise ValueError("y, x, c must be finite")
        if n and not np.isin(np.unique(d), (0, 1)).all():
            raise ValueError("d must be binary")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d.astype(np.int8))

    def __len__(self) -> int:
        return self.y.size

    @property
    def cutoffs(self) -> np.ndarray:
        """Sorted distinct cutoff labels present in the data."""
        return np.unique(self.c)

    @classmethod
    def from_samples(cls, samples) -> "RdData":
        rows = list(samples)
        return cls(
            y=np.array([s.y for s in rows], dtype=float),
            x=np.array([s.x for s in rows], dtype=float),
            c=np.array([s.c for s in rows], dtype=float),
            d=np.array([s.d for s in rows]),
        )

    def to_samples(self) -> list[RdSample]:
        return [
            RdSample(y=float(y), x=float(x), c=float(c), d=int(d))
            for y, x, c, d in zip(self.y, self.x, self.c, self.d)
        ]


@dataclass(frozen=True)
class Subsample:
    """Rows matching a ``(d, c, side)`` selector, sorted by ``x``.

    ``row_id`` indexes back into the parent data so bootstrap multipliers can
    be aligned by observation identity across subsamples.
    """

    x: np.ndarray
    y: np.ndarray
    d: np.ndarray
    row_id: np.ndarray
    selector: tuple
    n_parent: int

    def __len__(self) -> int:
        return self.x.size

    @property
    def x_range(self) -> tuple:
        return float(self.x[0]), float(self.x[-1])

    def with_target(self, values: np.ndarray) -> "Subsample":
        """Same rows with a different regression target (e.g. treatment)."""
        values = np.asarray(values, dtype=float)
        if values.size != self.x.size:
            raise ValueError("target length mismatch")
        return Subsample(
            x=self.x, y=values, d=self.d, row_id=self.row_id,
            selector=self.selector, n_parent=self.n_parent,
        )

    def restrict(self, mask: np.ndarray, label=None) -> "Subsample":
        """Keep the masked rows; raise MissingArmError when none survive."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            d, c, side = self.selector
            raise MissingArmError(d, c, label or side)
        return Subsample(
            x=self.x[mask], y=self.y[mask], d=self.d[mask], row_id=self.row_id[mask],
            selector=self.selector if label is None else (self.selector[0], self.selector[1], label),
            n_parent=self.n_parent,
        )


def subsample(data: RdData, d=None, c=None, side=SIDE_ALL, require_nonempty=True) -> Subsample:
    """Select rows with treatment ``d``, cutoff label ``c``, on ``side`` of their cutoff."""
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    mask = np.ones(len(data), dtype=bool)
    if d is not None:
        mask &= data.d == d
    if c is not None:
        mask &= np.abs(data.c - float(c)) <= CUTOFF_ATOL
    if side == SIDE_LEFT:
        mask &= data.x < data.c
    elif side == SIDE_RIGHT:
        mask &= data.x >= data.c
    idx = np.flatnonzero(mask)
    if idx.size == 0 and require_nonempty:
        raise MissingArmError(d, c, side)
    order = np.argsort(data.x[idx], kind="stable")
    idx = idx[order]
    return Subsample(
        x=data.x[idx],
        y=data.y[idx],
        d=data.d[idx],
        row_id=idx,
        selector=(d, c, side),
        n_parent=len(data),
    )
