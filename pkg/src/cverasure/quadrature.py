"""Two-dimensional quadrature for phase-space overlap integrals.

Every integral the fidelity module needs has the form

    I(kappa) = 1/(2 pi) * iint m(u) exp(i kappa . u) du

with ``m`` a product of Gaussians and low-order polynomials whose Gaussian
envelope ``exp(-u^T Q u)`` is known.  Two rules are provided:

* Gauss-Hermite on the tensor grid ``v = L^T u`` (``Q = L L^T``), which is
  exact for Gaussian-times-polynomial integrands once ``order`` exceeds half
  the polynomial degree.
* A trapezoid (rectangle) rule on ``[-cutoff, cutoff]^2`` with step halving
  until successive estimates agree to ``tolerance``.  It is spectrally
  accurate for smooth decaying integrands and also copes with the oscillating
  phase, which Gauss-Hermite aliases once ``|kappa|`` outgrows the node
  spacing.

Both rules evaluate ``m`` once on a tensor grid; the phase is separable, so
all ``kappa`` are handled with a single matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

GAUSS_HERMITE = "gauss-hermite"
ADAPTIVE = "adaptive"


class QuadratureError(ArithmeticError):
    """Adaptive refinement did not reach the requested tolerance."""

    def __init__(self, message: str, estimate):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = GAUSS_HERMITE
    order: int = 48
    tolerance: float = 1e-10
    cutoff: float = 12.0
    max_intervals: int = 4096

    def __post_init__(self):
        aliases = {"gh": GAUSS_HERMITE, "adaptive": ADAPTIVE, "oracle": ADAPTIVE}
        object.__setattr__(self, "method", aliases.get(self.method, self.method))
        if self.method not in (GAUSS_HERMITE, ADAPTIVE):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.order < 8:
            raise ValueError("Gauss-Hermite order must be >= 8")
        if not (self.tolerance > 0 and self.cutoff > 0):
            raise ValueError("tolerance and cutoff must be positive")


@lru_cache(maxsize=32)
def hermite_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int exp(-v^2) f(v) dv``, read-only."""
    v, w = np.polynomial.hermite.hermgauss(order)
    v.setflags(write=False)
    w.setflags(write=False)
    return v, w


def _phase_sum(grid: np.ndarray, axis: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """``sum_ab grid[a, b] exp(i (k_x axis_a + k_p axis_b))`` for each row of kappa."""
    ex = np.exp(1j * np.outer(kappa[:, 0], axis))
    ep = np.exp(1j * np.outer(kappa[:, 1], axis))
    return np.sum((ex @ grid) * ep, axis=1)


def gauss_hermite(
    modulus: Callable[[np.ndarray], np.ndarray],
    Q: np.ndarray,
    order: int,
    kappa: np.ndarray | None = None,
) -> np.ndarray:
    """Gauss-Hermite estimate of ``I(kappa)`` with envelope ``Q``.

    Args:
        modulus: vectorised integrand; receives points of shape
            ``(*batch, order, order, 2)``.
        Q: symmetric positive-definite envelope, shape ``(*batch, 2, 2)``.
        order: nodes per axis.
        kappa: optional ``(J, 2)`` phase vectors (only without batch dims).

    Returns:
        ndarray of shape ``batch`` (no ``kappa``) or ``(J,)``.
    """
    Q = np.asarray(Q, dtype=float)
    v, w = hermite_rule(order)
    L = np.linalg.cholesky(Q)
    # u = L^{-T} v, so that u^T Q u = |v|^2
    Linv_t = np.linalg.inv(np.swapaxes(L, -1, -2))
    vv = np.stack(np.meshgrid(v, v, indexing="ij"), axis=-1)
    batch = Q.shape[:-2]
    T = Linv_t.reshape(batch + (1, 1, 2, 2))
    u = np.matmul(T, vv[..., None])[..., 0]
    scale = np.outer(w * np.exp(v * v), w * np.exp(v * v)) / (2 * math.pi)
    det = np.prod(np.diagonal(L, axis1=-2, axis2=-1), axis=-1)
    grid = modulus(u) * scale / det[..., None, None]
    if kappa is None:
        return grid.sum(axis=(-2, -1))
    if batch:
        raise ValueError("phase vectors are not supported with batched envelopes")
    # kappa . u = (L^{-1} kappa) . v
    kv = np.asarray(kappa, dtype=float) @ Linv_t
    return _phase_sum(grid, v, kv)


def _trapezoid_grid(modulus, cutoff: float, n: int):
    x = np.linspace(-cutoff, cutoff, n + 1)
    h = x[1] - x[0]
    wt = np.full(n + 1, h)
    wt[[0, -1]] *= 0.5
    uu = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    return x, modulus(uu) * np.outer(wt, wt) / (2 * math.pi)


def _probe_rows(kappa: np.ndarray, k: int = 16) -> np.ndarray:
    """Rows of kappa with the largest and smallest norms (refinement probes)."""
    if len(kappa) <= 2 * k:
        return np.arange(len(kappa))
    order = np.argsort(np.hypot(kappa[:, 0], kappa[:, 1]))
    return np.concatenate([order[:k], order[-k:]])


def adaptive_rectangle(
    modulus: Callable[[np.ndarray], np.ndarray],
    cutoff: float,
    tolerance: float,
    kappa: np.ndarray | None = None,
    n0: int = 64,
    max_intervals: int = 4096,
) -> np.ndarray:
    """Trapezoid estimate of ``I(kappa)`` with step halving.

    The starting step resolves the largest phase frequency.  Refinement is
    driven by the rows of ``kappa`` with extreme norms; the final grid is then
    applied to every row.

    Raises:
        QuadratureError: if ``max_intervals`` is reached first.
    """
    if kappa is None:
        kap = np.zeros((1, 2))
    else:
        kap = np.asarray(kappa, dtype=float).reshape(-1, 2)
    kmax = float(np.max(np.abs(kap))) if kap.size else 0.0
    n = n0
    while 2 * cutoff / n > 2 * math.pi / (kmax + 12.0):
        n *= 2
    probes = kap[_probe_rows(kap)]
    x, grid = _trapezoid_grid(modulus, cutoff, n)
    prev = _phase_sum(grid, x, probes)
    while True:
        if 2 * n > max_intervals:
            raise QuadratureError(f"no convergence with {n} intervals per axis", prev)
        x2, grid2 = _trapezoid_grid(modulus, cutoff, 2 * n)
        cur = _phase_sum(grid2, x2, probes)
        if np.max(np.abs(cur - prev)) < tolerance:
            break
        n, x, grid, prev = 2 * n, x2, grid2, cur
    if kappa is None:
        return cur[0]
    return _phase_sum(grid2, x2, kap)


def integrate(
    modulus: Callable[[np.ndarray], np.ndarray],
    Q: np.ndarray,
    q: QuadratureSpec,
    kappa: np.ndarray | None = None,
) -> np.ndarray:
    """Dispatch to the rule selected by ``q``."""
    if q.method == GAUSS_HERMITE:
        return gauss_hermite(modulus, Q, q.order, kappa)
    return adaptive_rectangle(modulus, q.cutoff, q.tolerance, kappa, max_intervals=q.max_intervals)
