"""Kernel families, moment tables, and equivalent kernels for local fits.

The equivalent kernels are the effective weighting functions of the local
quadratic estimator. The interior form annihilates the second moment,
which is what makes the bias-corrected local linear fit behave like a
quadratic fit in linearized variance formulas; the boundary form plays the
same role when data sit on one side of the evaluation point only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidKernelError

FAMILIES = ("triangular", "epanechnikov", "uniform")

_DEGENERACY_FLOOR = 1e-14


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric second-order kernel supported on [-1, 1]."""

    family: str = "triangular"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidKernelError(
                f"unknown kernel family {self.family!r}; choose one of {FAMILIES}"
            )


@dataclass(frozen=True)
class KernelMoments:
    """Moments pi_r = int w^r K(w) dw over [-1, 1] and nu_r over [0, 1].

    ``roughness`` is int K(w)^2 dw, used by the plug-in bandwidth constants.
    """

    pi: tuple
    nu: tuple
    roughness: float


def eval_kernel(spec: KernelSpec, w):
    """Evaluate K(w); zero outside [-1, 1]."""
    w = np.asarray(w, dtype=float)
    aw = np.abs(w)
    if spec.family == "triangular":
        out = np.maximum(0.0, 1.0 - aw)
    elif spec.family == "epanechnikov":
        out = np.where(aw <= 1.0, 0.75 * (1.0 - w * w), 0.0)
    else:
        out = np.where(aw <= 1.0, 0.5, 0.0)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _moments_cached(family: str) -> KernelMoments:
    # Closed forms per family; the test suite cross-checks them by quadrature.
    r = np.arange(7, dtype=float)
    if family == "triangular":
        pi_even = 2.0 / ((r + 1.0) * (r + 2.0))
        nu = 1.0 / ((r + 1.0) * (r + 2.0))
        rough = 2.0 / 3.0
    elif family == "epanechnikov":
        pi_even = 3.0 / ((r + 1.0) * (r + 3.0))
        nu = 1.5 / ((r + 1.0) * (r + 3.0))
        rough = 3.0 / 5.0
    else:
        pi_even = 1.0 / (r + 1.0)
        nu = 0.5 / (r + 1.0)
        rough = 0.5
    pi = np.where(np.arange(7) % 2 == 0, pi_even, 0.0)
    return KernelMoments(pi=tuple(pi), nu=tuple(nu), roughness=float(rough))


def moments(spec: KernelSpec) -> KernelMoments:
    """Two-sided and one-sided polynomial moments of the kernel."""
    return _moments_cached(spec.family)


def roughness(spec: KernelSpec) -> float:
    return moments(spec).roughness


def _interior_coefficients(mom: KernelMoments):
    denom = mom.pi[4] - mom.pi[2] ** 2
    if denom <= _DEGENERACY_FLOOR:
        raise InvalidKernelError("degenerate kernel: pi_4 - pi_2^2 is not positive")
    return mom.pi[4] / denom, mom.pi[2] / denom


def equivalent_kernel_interior(spec: KernelSpec, w):
    """Interior local-quadratic equivalent kernel.

    Integrates to one and has a vanishing second moment.
    """
    a, b = _interior_coefficients(moments(spec))
    w = np.asarray(w, dtype=float)
    out = (a - b * w * w) * eval_kernel(spec, w)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _boundary_row(family: str) -> np.ndarray:
    # First row of S^{-1} with S the one-sided moment matrix over [0, 1].
    nu = _moments_cached(family).nu
    s = np.array([[nu[j + k] for k in range(3)] for j in range(3)])
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > 1e12:
        raise InvalidKernelError("one-sided moment matrix is singular or ill conditioned")
    return np.linalg.solve(s, np.array([1.0, 0.0, 0.0]))


def equivalent_kernel_boundary(spec: KernelSpec, w):
    """Left-boundary local-quadratic equivalent kernel, supported on [0, 1].

    Defined for evaluation points whose data lie on one side only; callers
    with data below the evaluation point pass the folded argument |w|.
    Satisfies the first three one-sided moment conditions.
    """
    row = _boundary_row(spec.family)
    w = np.asarray(w, dtype=float)
    poly = row[0] + row[1] * w + row[2] * w * w
    out = np.where((w >= 0.0) & (w <= 1.0), poly * eval_kernel(spec, w), 0.0)
    return out if out.ndim else float(out)
