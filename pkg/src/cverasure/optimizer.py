"""Nested optimization of the code: gains per pattern, then the resource per ``Pe``.

The inner problem maximises each pattern's mean fidelity over the correction
gains.  Its solutions are tabulated once over a grid of resources in a
:class:`GainDictionary`.  The outer problem picks, for every erasure
probability, the resource maximising the total fidelity: first on the grid,
then by a local derivative-free refinement that re-optimises the gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .fidelity import (
    DEFAULT_ENSEMBLE,
    EnsembleSpec,
    PatternFidelities,
    direct_transmission_fidelity,
    mean_fidelity,
    mean_fidelity_many,
    postselect_conditional_fidelity,
    postselect_fidelity,
    total_fidelity,
    total_from_values,
)
from .pipeline import E1, E2, E3, E12, E13, E23, E123, NONE, PATTERNS, ErasurePattern, Gains
from .quadrature import QuadratureSpec
from .states import DomainError, ResourceKind, ResourceSpec

#: The integrands are Gaussians times quartics, for which 16 nodes are already exact.
OPTIMIZER_QUADRATURE = QuadratureSpec(order=16)

GAIN_BOUND = 2.0
GAIN_STEP = 0.05
GAIN_XTOL = 1e-4
DIAGONAL_TOL = 1e-3
#: Refinements must beat the incumbent by more than this to be accepted.
IMPROVEMENT = 1e-12
#: Objective tolerance of the resource simplex, also its acceptance margin.
OBJECTIVE_TOL = 1e-8

V_MAX = 9.0
DELTA_MIN = -math.pi / 2

#: Patterns whose optimum is fixed at zero gain.
FIXED_PATTERNS = (NONE, E3, E123)
OPTIMIZED_PATTERNS = (E1, E2, E12, E13, E23)

FAMILIES = (ResourceKind.TMSV, ResourceKind.SQUEEZED_BELL)


class OptimizationError(RuntimeError):
    """An optimum failed one of its structural checks."""


def make_resource(family: ResourceKind, V: float, delta: float = 0.0) -> ResourceSpec:
    family = ResourceKind(family)
    if family is ResourceKind.TMSV:
        return ResourceSpec.tmsv(V)
    if family is ResourceKind.SQUEEZED_BELL:
        return ResourceSpec.squeezed_bell(V, delta)
    raise ValueError(f"{family.value!r} is not an optimisable resource family")


def default_v_grid(v_max: float = V_MAX, step: float = 0.1) -> np.ndarray:
    n = int(round((v_max - 1.0) / step))
    return np.round(np.linspace(1.0, 1.0 + n * step, n + 1), 12)


def default_delta_grid(points: int = 64) -> np.ndarray:
    return -math.pi / 2 + math.pi * np.arange(points) / points


def _closest_to_zero(values: np.ndarray, grid: np.ndarray) -> int:
    """Index of the maximum, ties (within ``IMPROVEMENT``) broken towards ``|g| = 0``."""
    best = values.max()
    ties = np.flatnonzero(values >= best - IMPROVEMENT)
    return int(ties[np.argmin(np.abs(grid[ties]))])


def _line_search(f, lo: float, hi: float) -> tuple[float, float]:
    res = optimize.minimize_scalar(lambda g: -f(g), bounds=(lo, hi), method="bounded", options={"xatol": GAIN_XTOL / 4})
    return float(res.x), float(-res.fun)


def optimize_gains(
    pattern: ErasurePattern,
    spec: ResourceSpec,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = OPTIMIZER_QUADRATURE,
    warm_start: Gains | None = None,
) -> tuple[Gains, float]:
    """Maximise one pattern's mean fidelity over the gains.

    A coarse scan of the diagonal ``gx = gp`` (step 0.05 on ``[-2, 2]``) is
    followed by a bounded line search and a 2D coordinate refinement that
    checks the optimum stays on the diagonal.  With ``warm_start`` the scan is
    replaced by a line search in a small window around the given gains; if
    the result lands on the window edge the full scan runs after all.

    Returns:
        ``(gains, fidelity)``.

    Raises:
        OptimizationError: the refined optimum is off the diagonal.
    """

    def diag(g):
        return float(mean_fidelity_many(pattern, g, g, spec, ens, q))

    g = fbest = None
    if warm_start is not None:
        g0 = 0.5 * (warm_start.gx + warm_start.gp)
        lo, hi = max(-GAIN_BOUND, g0 - 0.1), min(GAIN_BOUND, g0 + 0.1)
        g, fbest = _line_search(diag, lo, hi)
        if (g - lo < 1e-3 and lo > -GAIN_BOUND) or (hi - g < 1e-3 and hi < GAIN_BOUND):
            g = None
    if g is None:
        grid = np.round(np.arange(-GAIN_BOUND, GAIN_BOUND + GAIN_STEP / 2, GAIN_STEP), 12)
        coarse = mean_fidelity_many(pattern, grid, grid, spec, ens, q)
        i = _closest_to_zero(coarse, grid)
        g, fbest = float(grid[i]), float(coarse[i])
        lo, hi = max(-GAIN_BOUND, g - GAIN_STEP), min(GAIN_BOUND, g + GAIN_STEP)
        gl, fl = _line_search(diag, lo, hi)
        if fl > fbest + IMPROVEMENT:
            g, fbest = gl, fl
    gx, gp, fbest = _coordinate_refine(pattern, spec, ens, q, g, g, fbest)
    if abs(gx - gp) >= DIAGONAL_TOL:
        raise OptimizationError(
            f"pattern {pattern.label}, {spec.label()}: optimum ({gx:.6g}, {gp:.6g}) is off the diagonal"
        )
    return Gains(gx, gp), fbest


def _coordinate_refine(pattern, spec, ens, q, gx, gp, fbest, step=1e-2):
    """Compass search in ``(gx, gp)``; each poll evaluates four neighbours at once."""
    moves = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    while step >= GAIN_XTOL / 2:
        cand = np.clip(np.array([gx, gp]) + step * moves, -GAIN_BOUND, GAIN_BOUND)
        vals = mean_fidelity_many(pattern, cand[:, 0], cand[:, 1], spec, ens, q)
        k = int(np.argmax(vals))
        if vals[k] > fbest + IMPROVEMENT:
            gx, gp, fbest = float(cand[k, 0]), float(cand[k, 1]), float(vals[k])
        else:
            step /= 2
    return gx, gp, fbest


def optimal_pattern_fidelities(
    spec: ResourceSpec,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = OPTIMIZER_QUADRATURE,
    warm_start: Mapping[ErasurePattern, Gains] | None = None,
) -> PatternFidelities:
    """All eight mean fidelities at their optimal gains.

    No-erasure, mode-3' and all-erased patterns are evaluated at zero gain,
    where the first two reach one and the third does not depend on gain.
    """
    values, gains = {}, {}
    for p in FIXED_PATTERNS:
        gains[p] = Gains()
        values[p] = mean_fidelity(p, gains[p], spec, ens, q)
    for p in OPTIMIZED_PATTERNS:
        start = warm_start.get(p) if warm_start else None
        gains[p], values[p] = optimize_gains(p, spec, ens, q, start)
    return PatternFidelities(values, spec, ens.sigma, gains)


@dataclass(frozen=True)
class GainDictionary:
    """Optimal gains and fidelities over a grid of resources.

    Arrays are indexed ``[pattern, iV, idelta]`` with patterns in the order of
    :data:`~cverasure.pipeline.PATTERNS`.  A TMSV dictionary has the single
    delta value 0.
    """

    family: ResourceKind
    sigma: float
    v_grid: np.ndarray
    delta_grid: np.ndarray
    gx: np.ndarray
    gp: np.ndarray
    fidelity: np.ndarray

    def __post_init__(self):
        shape = (len(PATTERNS), len(self.v_grid), len(self.delta_grid))
        for name in ("gx", "gp", "fidelity"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("v_grid", "delta_grid"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def index(self, V: float, delta: float = 0.0) -> tuple[int, int]:
        iv = np.flatnonzero(np.isclose(self.v_grid, V, rtol=0, atol=1e-9))
        idl = np.flatnonzero(np.isclose(self.delta_grid, delta, rtol=0, atol=1e-9))
        if not (iv.size and idl.size):
            raise KeyError(f"(V={V}, delta={delta}) is not a grid point")
        return int(iv[0]), int(idl[0])

    def lookup(self, pattern: ErasurePattern, V: float, delta: float = 0.0) -> tuple[Gains, float]:
        iv, idl = self.index(V, delta)
        k = PATTERNS.index(pattern)
        return Gains(self.gx[k, iv, idl], self.gp[k, iv, idl]), float(self.fidelity[k, iv, idl])

    def spec_at(self, iv: int, idl: int) -> ResourceSpec:
        return make_resource(self.family, self.v_grid[iv], self.delta_grid[idl])

    def pattern_fidelities(self, iv: int, idl: int) -> PatternFidelities:
        values = {p: float(self.fidelity[k, iv, idl]) for k, p in enumerate(PATTERNS)}
        gains = {p: Gains(self.gx[k, iv, idl], self.gp[k, iv, idl]) for k, p in enumerate(PATTERNS)}
        return PatternFidelities(values, self.spec_at(iv, idl), self.sigma, gains)

    def values(self) -> dict[ErasurePattern, np.ndarray]:
        """Per-pattern fidelity arrays over the ``(V, delta)`` grid."""
        return {p: self.fidelity[k] for k, p in enumerate(PATTERNS)}


def build_gain_dictionary(
    family: ResourceKind,
    v_grid: Sequence[float],
    delta_grid: Sequence[float] = (0.0,),
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = OPTIMIZER_QUADRATURE,
) -> GainDictionary:
    """Run :func:`optimize_gains` for every pattern at every grid resource.

    Every grid point is optimised from scratch, so the result only depends on
    the grids.
    """
    family = ResourceKind(family)
    v_grid = np.asarray(v_grid, dtype=float)
    delta_grid = np.asarray(delta_grid if family is ResourceKind.SQUEEZED_BELL else (0.0,), dtype=float)
    if v_grid.size == 0 or np.any(v_grid < 1.0):
        raise DomainError("V grid must be non-empty and >= 1")
    if np.any(delta_grid < DELTA_MIN) or np.any(delta_grid >= math.pi / 2):
        raise DomainError("delta grid must lie in [-pi/2, pi/2)")
    shape = (len(PATTERNS), v_grid.size, delta_grid.size)
    gx, gp, fid = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for iv, V in enumerate(v_grid):
        for idl, delta in enumerate(delta_grid):
            pf = optimal_pattern_fidelities(make_resource(family, V, delta), ens, q)
            for k, p in enumerate(PATTERNS):
                gx[k, iv, idl], gp[k, iv, idl] = pf.gains[p].gx, pf.gains[p].gp
                fid[k, iv, idl] = pf.values[p]
    return GainDictionary(family, ens.sigma, v_grid, delta_grid, gx, gp, fid)


@dataclass(frozen=True)
class ResourceOptimum:
    V: float
    delta: float
    total: float
    fidelities: PatternFidelities
    grid_total: float


def _grid_argmax(totals: np.ndarray, d: GainDictionary) -> tuple[int, int]:
    """Grid maximum; ties go to the smallest V, then to the delta nearest zero."""
    best = totals.max()
    iv, idl = np.nonzero(totals >= best - IMPROVEMENT)
    order = np.lexsort((np.abs(d.delta_grid[idl]), d.v_grid[iv]))
    return int(iv[order[0]]), int(idl[order[0]])


def optimize_resource(
    Pe: float,
    d: GainDictionary,
    ens: EnsembleSpec | None = None,
    q: QuadratureSpec = OPTIMIZER_QUADRATURE,
    refine: bool = True,
) -> ResourceOptimum:
    """Maximise the total fidelity over the resource at erasure probability ``Pe``.

    The dictionary grid is searched first.  The optimum is then refined by a
    bounded line search in V at the grid delta and, for squeezed-Bell states,
    by a bounded Nelder-Mead simplex in ``(V, delta)``.  Gains are re-optimised
    at every trial resource.  Each stage is kept only if it beats the
    incumbent; the simplex must win by more than its objective tolerance.
    """
    Pe = float(Pe)
    if not 0.0 <= Pe <= 1.0:
        raise DomainError(f"erasure probability must lie in [0, 1], got {Pe!r}")
    ens = ens or EnsembleSpec(d.sigma)
    totals = total_from_values(Pe, d.values())
    iv, idl = _grid_argmax(totals, d)
    pf = d.pattern_fidelities(iv, idl)
    best = ResourceOptimum(float(d.v_grid[iv]), float(d.delta_grid[idl]), float(totals[iv, idl]), pf, float(totals[iv, idl]))
    if not refine or Pe in (0.0, 1.0):
        # the total is flat in the resource at both ends
        return best

    cache: dict[tuple[float, float], PatternFidelities] = {}

    def evaluate(V, delta):
        key = (float(V), float(delta))
        if key not in cache:
            cache[key] = optimal_pattern_fidelities(make_resource(d.family, V, delta), ens, q, pf.gains)
        return total_fidelity(Pe, cache[key]), cache[key]

    v_lo, v_hi = float(d.v_grid[0]), float(d.v_grid[-1])
    if v_hi > v_lo:
        lo = float(d.v_grid[max(iv - 1, 0)])
        hi = float(d.v_grid[min(iv + 1, len(d.v_grid) - 1)])
        res = optimize.minimize_scalar(
            lambda V: -evaluate(V, best.delta)[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-4}
        )
        total, cand_pf = evaluate(float(res.x), best.delta)
        if total > best.total + IMPROVEMENT:
            best = ResourceOptimum(float(res.x), best.delta, total, cand_pf, best.grid_total)
    if d.family is ResourceKind.SQUEEZED_BELL:
        # V = v_lo + (v_hi - v_lo) sin^2 t and delta taken mod pi keep the
        # simplex inside the box without pinning it to a face
        span = v_hi - v_lo

        def to_box(z):
            return v_lo + span * math.sin(z[0]) ** 2, _wrap_delta(z[1])

        t0 = math.asin(math.sqrt((best.V - v_lo) / span)) if span > 0 else 0.0
        start = np.array([[t0, best.delta], [t0 + 0.1, best.delta], [t0, best.delta + math.pi / 64]])
        res = optimize.minimize(
            lambda z: -evaluate(*to_box(z))[0],
            x0=start[0],
            method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": OBJECTIVE_TOL, "initial_simplex": start},
        )
        V, delta = to_box(res.x)
        total, cand_pf = evaluate(V, delta)
        if total > best.total + OBJECTIVE_TOL:
            best = ResourceOptimum(V, delta, total, cand_pf, best.grid_total)
    return best


def _wrap_delta(delta: float) -> float:
    """Map ``delta`` onto ``[-pi/2, pi/2)``, where the resource is pi-periodic."""
    return (delta + math.pi / 2) % math.pi - math.pi / 2


@dataclass(frozen=True)
class ProtocolResult:
    """Optimised protocol curves for one resource family.

    ``pattern_fidelity`` maps pattern labels to the per-``Pe`` mean fidelities
    at the optimal resource.  Post-selection uses the largest grid V (and, for
    squeezed-Bell states, the grid delta that maximises the single-erasure
    fidelities) with optimal gains.
    """

    family: ResourceKind
    sigma: float
    pe: np.ndarray
    total: np.ndarray
    v_opt: np.ndarray
    delta_opt: np.ndarray
    direct: np.ndarray
    postselect: np.ndarray
    postselect_conditional: np.ndarray
    v_postselect: float
    delta_postselect: float
    pattern_fidelity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        bad = np.flatnonzero(self.total < self.postselect - 1e-9)
        if bad.size:
            raise OptimizationError(f"post-selection beats the optimised protocol at Pe={self.pe[bad]}")


def postselect_resource(d: GainDictionary) -> tuple[int, int]:
    """Grid point used for post-selection: largest V, best single-erasure delta."""
    iv = len(d.v_grid) - 1
    single = d.fidelity[PATTERNS.index(E1), iv] + d.fidelity[PATTERNS.index(E2), iv]
    ties = np.flatnonzero(single >= single.max() - IMPROVEMENT)
    return iv, int(ties[np.argmin(np.abs(d.delta_grid[ties]))])


def protocol_sweep(
    pe_grid: Sequence[float],
    families: Sequence[ResourceKind] = FAMILIES,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = OPTIMIZER_QUADRATURE,
    v_grid: Sequence[float] | None = None,
    delta_grid: Sequence[float] | None = None,
    dictionaries: Mapping[ResourceKind, GainDictionary] | None = None,
    refine: bool = True,
) -> dict[ResourceKind, ProtocolResult]:
    """Optimised total, direct and post-selected fidelities over ``pe_grid``."""
    pe = np.asarray(pe_grid, dtype=float)
    v_grid = default_v_grid() if v_grid is None else np.asarray(v_grid, dtype=float)
    delta_grid = default_delta_grid() if delta_grid is None else np.asarray(delta_grid, dtype=float)
    dictionaries = dict(dictionaries or {})
    results = {}
    for family in map(ResourceKind, families):
        d = dictionaries.get(family) or build_gain_dictionary(family, v_grid, delta_grid, ens, q)
        ps_pf = d.pattern_fidelities(*postselect_resource(d))
        rows = [optimize_resource(x, d, ens, q, refine) for x in pe]
        results[family] = ProtocolResult(
            family=family,
            sigma=ens.sigma,
            pe=pe,
            total=np.array([r.total for r in rows]),
            v_opt=np.array([r.V for r in rows]),
            delta_opt=np.array([r.delta for r in rows]),
            direct=np.array([direct_transmission_fidelity(x, ens) for x in pe]),
            postselect=np.array([postselect_fidelity(x, ps_pf) for x in pe]),
            postselect_conditional=np.array([postselect_conditional_fidelity(x, ps_pf) for x in pe]),
            v_postselect=ps_pf.spec.V,
            delta_postselect=ps_pf.spec.delta,
            pattern_fidelity={p.label: np.array([r.fidelities.values[p] for r in rows]) for p in PATTERNS},
        )
    return results
