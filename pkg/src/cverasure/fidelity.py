"""Fidelities of coherent inputs after the code, per pattern and in total.

The fidelity with a coherent input is the CF overlap

    F(alpha) = 1/(2 pi) iint chi_alpha(x, p) chi_out(-x, -p) dx dp.

Averaged over the Gaussian ensemble ``P(alpha) = exp(-|alpha|^2/sigma)/(pi sigma)``
all alpha dependence sits in the phases of the coherent factors.  Their
average is the Gaussian kernel ``exp(-sigma |W u|^2 / 2)`` with
``W = I - sum_k A_k`` over the argmaps ``A_k`` of the signal factors in
``chi_out``, so the mean fidelity is one real Gaussian-times-polynomial
integral.  :func:`mean_fidelity_oracle` recomputes it the slow way, by
integrating ``F(alpha)`` over the ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .pipeline import (
    E1,
    E2,
    E3,
    E12,
    E13,
    E23,
    E123,
    NONE,
    PATTERNS,
    CFExpression,
    CFFactor,
    EnsembleKernel,
    ErasurePattern,
    Gains,
    Vacuum,
    decoded_expression,
    measure_and_correct_many,
)
from .quadrature import ADAPTIVE, QuadratureError, QuadratureSpec, integrate
from .states import SQRT2, DomainError, ResourceSpec

#: Allowed excursion of a raw fidelity outside ``[0, 1]`` before it is an error.
RANGE_SLACK = 1e-9
#: Allowed imaginary residue of a fidelity integral.
IMAG_SLACK = 1e-9


class FidelityRangeError(ArithmeticError):
    """A computed fidelity left ``[0, 1]`` (or the real axis) beyond the slack."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Gaussian ensemble of coherent amplitudes with variance ``sigma``."""

    sigma: float = 10.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"ensemble variance must be positive, got {self.sigma!r}")

    def density(self, alpha):
        alpha = np.asarray(alpha)
        return np.exp(-np.abs(alpha) ** 2 / self.sigma) / (math.pi * self.sigma)


DEFAULT_ENSEMBLE = EnsembleSpec()
DEFAULT_QUADRATURE = QuadratureSpec()
ORACLE_QUADRATURE = QuadratureSpec(ADAPTIVE)


def _checked(value):
    """Validate raw fidelities against ``[0, 1]`` and return them clamped and real."""
    value = np.asarray(value)
    if np.iscomplexobj(value):
        resid = float(np.max(np.abs(value.imag), initial=0.0))
        if resid > IMAG_SLACK:
            raise FidelityRangeError(f"imaginary residue {resid:.3e} exceeds {IMAG_SLACK}")
        value = value.real
    if value.size and (value.min() < -RANGE_SLACK or value.max() > 1 + RANGE_SLACK):
        raise FidelityRangeError(f"fidelity range [{value.min():.12g}, {value.max():.12g}] leaves [0, 1]")
    value = np.clip(value, 0.0, 1.0)
    return float(value) if value.ndim == 0 else value


def _overlap(out: CFExpression) -> tuple[CFExpression, np.ndarray]:
    """Modulus of ``chi_alpha(u) chi_out(-u)`` and the signal map ``W``."""
    if out.free_dim != 2:
        raise ValueError(f"fidelity needs a 2-argument output CF, got {out.free_dim}")
    neg = out.negated()
    w = np.eye(2)
    for f in neg.coherent_factors():
        w = w + f.argmap
    return neg.modulus_part().with_factors([CFFactor(Vacuum(), np.eye(2))]), w


def _phase_vectors(w: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Rows ``kappa`` with ``exp(i kappa . u)`` the phase of every signal factor at ``alpha``."""
    return SQRT2 * (np.outer(alphas.real, w[1]) - np.outer(alphas.imag, w[0]))


def fidelity_coherent(out: CFExpression, alpha: complex, q: QuadratureSpec = ORACLE_QUADRATURE) -> float:
    """Fidelity between ``|alpha>`` and the state with CF ``out``.

    The signal factors of ``out`` keep their own amplitudes, so this also
    measures the overlap with a state prepared from a different input.

    Raises:
        QuadratureError: adaptive quadrature did not converge.
        FidelityRangeError: the integral is not a probability.
    """
    m, _ = _overlap(out)
    neg = out.negated()
    kappa = _phase_vectors(np.eye(2), np.array([complex(alpha)]))
    for f in neg.coherent_factors():
        kappa = kappa + _phase_vectors(f.argmap, np.array([f.base.alpha]))
    return _checked(integrate(m.evaluate, m.gaussian_form(), q, kappa)[0])


def fidelity_profile(out: CFExpression, alphas, q: QuadratureSpec = ORACLE_QUADRATURE) -> np.ndarray:
    """``F(alpha)`` over many inputs, with the signal in ``out`` tracking the input.

    Equal to ``fidelity_coherent(out.with_signal(a), a, q)`` for each ``a``;
    the alpha-independent modulus is evaluated on one grid.
    """
    alphas = np.asarray(alphas, dtype=complex).ravel()
    m, w = _overlap(out)
    return _checked(integrate(m.evaluate, m.gaussian_form(), q, _phase_vectors(w, alphas)))


@lru_cache(maxsize=256)
def _decoded(pattern: ErasurePattern, spec: ResourceSpec) -> CFExpression:
    return decoded_expression(pattern, spec)


def output_many(pattern: ErasurePattern, spec: ResourceSpec, gx, gp) -> CFExpression:
    """Output CF with argmaps batched over the gain arrays ``gx``, ``gp``."""
    return measure_and_correct_many(_decoded(pattern, spec), gx, gp)


def averaged_integrand(out: CFExpression, ens: EnsembleSpec) -> CFExpression:
    """Ensemble-averaged overlap integrand of ``out`` (argmaps may be batched)."""
    m, w = _overlap(out)
    return m.with_factors([CFFactor(EnsembleKernel(ens.sigma), w)])


def mean_fidelity_many(
    pattern: ErasurePattern,
    gx,
    gp,
    spec: ResourceSpec,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> np.ndarray:
    """:func:`mean_fidelity` for arrays of gains (broadcast together)."""
    gx, gp = np.broadcast_arrays(np.asarray(gx, dtype=float), np.asarray(gp, dtype=float))
    integrand = averaged_integrand(output_many(pattern, spec, gx, gp), ens)
    if q.method != ADAPTIVE:
        return _checked(integrate(integrand.evaluate, integrand.gaussian_form(), q))
    out = np.empty(gx.shape)
    for idx in np.ndindex(gx.shape):
        one = averaged_integrand(output_many(pattern, spec, gx[idx], gp[idx]), ens)
        out[idx] = _checked(integrate(one.evaluate, one.gaussian_form(), q))
    return out


def mean_fidelity(
    pattern: ErasurePattern,
    g: Gains,
    spec: ResourceSpec,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """Ensemble-averaged fidelity of one erasure pattern.

    Args:
        pattern: modes erased in the channel.
        g: correction gains.
        spec: shared entangled resource.
        ens: coherent-amplitude ensemble.
        q: quadrature rule for the reduced 2D integral.

    Returns:
        float in ``[0, 1]``.
    """
    return float(mean_fidelity_many(pattern, g.gx, g.gp, spec, ens, q))


def mean_fidelity_oracle(
    pattern: ErasurePattern,
    g: Gains,
    spec: ResourceSpec,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = ORACLE_QUADRATURE,
    tolerance: float = 1e-9,
    n0: int = 48,
    max_intervals: int = 384,
) -> float:
    """Mean fidelity by brute force: ``F(alpha)`` integrated against ``P(alpha)``.

    The outer integral is a trapezoid rule over a square in the alpha plane
    that holds all but ``exp(-32)`` of the ensemble weight; the step is halved
    until two levels agree to ``tolerance``.  The inner fidelities come from
    :func:`fidelity_profile`.

    Raises:
        QuadratureError: no convergence within ``max_intervals`` per axis.
    """
    out = output_many(pattern, spec, g.gx, g.gp)
    half = math.sqrt(32.0 * ens.sigma)
    n = n0
    prev = None
    while True:
        a = np.linspace(-half, half, n + 1)
        h = a[1] - a[0]
        ar, ai = np.meshgrid(a, a, indexing="ij")
        alpha = ar + 1j * ai
        weight = ens.density(alpha) * h * h
        weight[[0, -1], :] *= 0.5
        weight[:, [0, -1]] *= 0.5
        # beyond this radius the weight is below exp(-32) relative to the peak
        keep = np.abs(alpha) ** 2 <= 32.0 * ens.sigma
        f = np.zeros(alpha.shape)
        f[keep] = fidelity_profile(out, alpha[keep], q)
        est = float(np.sum(weight * f))
        if prev is not None and abs(est - prev) < tolerance:
            return _checked(est)
        if 2 * n > max_intervals:
            raise QuadratureError(f"ensemble average unconverged at {n} intervals", est)
        prev, n = est, 2 * n


def vacuum_mean_fidelity(ens: EnsembleSpec = DEFAULT_ENSEMBLE) -> float:
    """Mean fidelity of the ensemble with the vacuum, ``1/(1 + sigma)``."""
    return 1.0 / (1.0 + ens.sigma)


@dataclass(frozen=True)
class PatternFidelities:
    """Mean fidelities of all eight patterns for one resource and gain choice.

    Entries must lie in ``[0, 1 + RANGE_SLACK]``; the no-erasure entry must be
    one and the all-erased entry the vacuum value.
    """

    values: Mapping[ErasurePattern, float]
    spec: ResourceSpec
    sigma: float
    gains: Mapping[ErasurePattern, Gains] = field(default_factory=dict)

    def __post_init__(self):
        missing = [p.label for p in PATTERNS if p not in self.values]
        if missing:
            raise ValueError(f"missing patterns {missing}")
        for p, v in self.values.items():
            if not -RANGE_SLACK <= v <= 1 + RANGE_SLACK:
                raise FidelityRangeError(f"pattern {p.label}: fidelity {v!r} outside [0, 1]")
        if abs(self.values[NONE] - 1.0) > 1e-8:
            raise ValueError("no-erasure fidelity must be 1")
        if abs(self.values[E123] - 1.0 / (1.0 + self.sigma)) > 1e-8:
            raise ValueError("all-erased fidelity must equal the vacuum value")

    def __getitem__(self, pattern: ErasurePattern) -> float:
        return self.values[pattern]

    def as_dict(self) -> dict[str, float]:
        return {p.label: float(self.values[p]) for p in PATTERNS}


def pattern_fidelities(
    spec: ResourceSpec,
    gains: Mapping[ErasurePattern, Gains] | None = None,
    ens: EnsembleSpec = DEFAULT_ENSEMBLE,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
) -> PatternFidelities:
    """Evaluate every pattern at the given gains (zero where none is given)."""
    gains = dict(gains or {})
    used = {p: gains.get(p, Gains()) for p in PATTERNS}
    values = {p: mean_fidelity(p, used[p], spec, ens, q) for p in PATTERNS}
    return PatternFidelities(values, spec, ens.sigma, used)


def _check_probability(Pe: float) -> float:
    Pe = float(Pe)
    if not 0.0 <= Pe <= 1.0:
        raise DomainError(f"erasure probability must lie in [0, 1], got {Pe!r}")
    return Pe


def pattern_weights(Pe) -> dict[ErasurePattern, np.ndarray]:
    """Probability of each pattern when every mode is lost independently with ``Pe``."""
    Pe = np.asarray(Pe, dtype=float)
    if np.any((Pe < 0.0) | (Pe > 1.0)):
        raise DomainError(f"erasure probability must lie in [0, 1], got {Pe!r}")
    s = 1.0 - Pe
    return {p: Pe ** len(p) * s ** (3 - len(p)) for p in PATTERNS}


def total_from_values(Pe, values: Mapping[ErasurePattern, np.ndarray]) -> np.ndarray:
    """Total fidelity from per-pattern entries, which may be arrays.

    No-erasure and mode-3' erasure runs enter with fidelity one whatever their
    entries say; the {1', 2'} and all-erased cases use their entries.
    """
    w = pattern_weights(Pe)
    total = w[NONE] + w[E3]
    for p in (E1, E2, E12, E13, E23, E123):
        total = total + w[p] * np.asarray(values[p])
    return total


def total_fidelity(Pe: float, pf: PatternFidelities) -> float:
    """Protocol fidelity averaged over erasure patterns with independent losses."""
    return _checked(total_from_values(_check_probability(Pe), pf.values))


def direct_transmission_fidelity(Pe: float, ens: EnsembleSpec = DEFAULT_ENSEMBLE) -> float:
    """Sending the signal on a single mode: vacuum with probability ``Pe``."""
    Pe = _check_probability(Pe)
    return (1.0 - Pe) + Pe * vacuum_mean_fidelity(ens)


def success_probability(Pe: float) -> float:
    """Probability that at most one mode is erased."""
    Pe = _check_probability(Pe)
    return (1.0 - Pe) ** 3 + 3.0 * Pe * (1.0 - Pe) ** 2


def postselect_fidelity(Pe: float, pf: PatternFidelities) -> float:
    """Success-weighted fidelity when runs with two or more erasures are discarded.

    Discarded runs count with fidelity zero, so this is the success
    probability times :func:`postselect_conditional_fidelity`.
    """
    Pe = _check_probability(Pe)
    s = 1.0 - Pe
    f = pf.values
    return _checked(s**3 + Pe * s**2 * (f[E1] + f[E2] + 1.0))


def postselect_conditional_fidelity(Pe: float, pf: PatternFidelities) -> float:
    """Mean fidelity conditioned on success; ``nan`` when success is impossible."""
    p = success_probability(Pe)
    if p == 0.0:
        return math.nan
    return postselect_fidelity(Pe, pf) / p
