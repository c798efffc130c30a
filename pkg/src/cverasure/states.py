"""Characteristic functions of the states used by the erasure code.

Complex CF arguments and real phase-space coordinates are related by
``lam = (x + 1j*p) / sqrt(2)``.  All CF functions are numpy-vectorised over
their complex arguments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

#: Two-mode squeezing phase used throughout the code.
PHI = math.pi

SQRT2 = math.sqrt(2.0)


class DomainError(ValueError):
    """Raised for unphysical parameters (e.g. a variance below one)."""


def phase_to_complex(x, p):
    """Map quadrature coordinates ``(x, p)`` to the complex argument."""
    return (np.asarray(x) + 1j * np.asarray(p)) / SQRT2


def complex_to_phase(lam):
    """Map a complex CF argument to its quadrature coordinates ``(x, p)``."""
    lam = np.asarray(lam)
    x = (lam + np.conj(lam)) / SQRT2
    p = 1j * (np.conj(lam) - lam) / SQRT2
    return x.real, p.real


def variance_to_r(V: float) -> float:
    """Squeezing magnitude ``r`` with ``cosh(2r) = V``."""
    if not V >= 1.0:
        raise DomainError(f"entanglement variance must be >= 1, got {V!r}")
    return 0.5 * math.acosh(V)


def bogoliubov(lam1, lam2, r: float, phi: float = PHI):
    """Two-mode squeezing transform of a pair of CF arguments.

    Args:
        lam1, lam2: complex arguments of the two modes (array-like).
        r: squeezing magnitude.
        phi: squeezing phase.

    Returns:
        tuple: ``(lam1', lam2')`` with
        ``lam_j' = cosh(r) lam_j + exp(i phi) sinh(r) conj(lam_k)``.
    """
    ch, sh = math.cosh(r), math.sinh(r)
    rot = complex(math.cos(phi), math.sin(phi))
    lam1 = np.asarray(lam1)
    lam2 = np.asarray(lam2)
    return ch * lam1 + rot * sh * np.conj(lam2), ch * lam2 + rot * sh * np.conj(lam1)


def cf_vacuum(lam):
    return np.exp(-0.5 * np.abs(lam) ** 2)


def cf_coherent(lam, alpha):
    lam = np.asarray(lam)
    return np.exp(-0.5 * np.abs(lam) ** 2 + lam * np.conj(alpha) - np.conj(lam) * alpha)


def _squeezed_pair(lam_a, lam_b, r, delta):
    a, b = bogoliubov(lam_a, lam_b, r)
    na = np.abs(a) ** 2
    nb = np.abs(b) ** 2
    gauss = np.exp(-0.5 * (na + nb))
    if delta == 0.0:
        return gauss
    c, s = math.cos(delta), math.sin(delta)
    # (cos^2 + sin^2)^(-1/2) prefactor: identically one, kept for fidelity to the source form.
    norm = (c * c + s * s) ** -0.5
    bracket = c * c + 2.0 * c * s * np.real(a * b) + s * s * (1.0 - na) * (1.0 - nb)
    return norm * gauss * bracket


def cf_tmsv(lam_a, lam_b, V: float):
    """Two-mode squeezed vacuum CF (real valued, ``<= 1``)."""
    return _squeezed_pair(lam_a, lam_b, variance_to_r(V), 0.0)


def cf_squeezed_bell(lam_a, lam_b, V: float, delta: float):
    """Squeezed Bell state CF: two-mode squeezing of ``cos d|00> + sin d|11>``."""
    return _squeezed_pair(lam_a, lam_b, variance_to_r(V), float(delta))


class ResourceKind(str, enum.Enum):
    TMSV = "tmsv"
    SQUEEZED_BELL = "sb"
    VACUUM_PAIR = "vacuum"


@dataclass(frozen=True)
class ResourceSpec:
    """The bipartite entangled state shared between the encoder modes.

    Use the :meth:`tmsv`, :meth:`squeezed_bell` and :meth:`vacuum_pair`
    constructors rather than building instances directly.  ``r`` is derived
    from ``V`` once at construction.
    """

    kind: ResourceKind
    V: float = 1.0
    delta: float = 0.0
    r: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = ResourceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        V = float(self.V)
        delta = float(self.delta)
        if kind is ResourceKind.VACUUM_PAIR:
            if V != 1.0 or delta != 0.0:
                raise DomainError("a vacuum pair takes no V or delta")
        if kind is ResourceKind.TMSV and delta != 0.0:
            raise DomainError("a TMSV resource takes no delta")
        if not -math.pi / 2 <= delta < math.pi / 2:
            raise DomainError(f"delta must lie in [-pi/2, pi/2), got {delta!r}")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "r", variance_to_r(V))

    @classmethod
    def tmsv(cls, V: float) -> "ResourceSpec":
        return cls(ResourceKind.TMSV, V)

    @classmethod
    def squeezed_bell(cls, V: float, delta: float) -> "ResourceSpec":
        return cls(ResourceKind.SQUEEZED_BELL, V, delta)

    @classmethod
    def vacuum_pair(cls) -> "ResourceSpec":
        return cls(ResourceKind.VACUUM_PAIR)

    def label(self) -> str:
        if self.kind is ResourceKind.VACUUM_PAIR:
            return "vacuum"
        if self.kind is ResourceKind.TMSV:
            return f"tmsv:V={self.V:.12g}"
        return f"sb:V={self.V:.12g},delta={self.delta:.12g}"


def cf_resource(spec: ResourceSpec, lam_a, lam_b):
    """Evaluate the CF of ``spec`` at the argument pair ``(lam_a, lam_b)``."""
    if spec.kind is ResourceKind.VACUUM_PAIR:
        return cf_vacuum(lam_a) * cf_vacuum(lam_b)
    return _squeezed_pair(lam_a, lam_b, spec.r, spec.delta)


@lru_cache(maxsize=1024)
def bogoliubov_matrix(r: float, phi: float = PHI) -> np.ndarray:
    """Real 4x4 matrix of :func:`bogoliubov` acting on ``(xA, pA, xB, pB)`` (read-only)."""
    out = np.empty((4, 4))
    for col, unit in enumerate(np.eye(4)):
        la = phase_to_complex(unit[0], unit[1])
        lb = phase_to_complex(unit[2], unit[3])
        a, b = bogoliubov(la, lb, r, phi)
        out[0:2, col] = complex_to_phase(a)
        out[2:4, col] = complex_to_phase(b)
    out.setflags(write=False)
    return out
