"""Output characteristic function of the three-mode erasure code.

Every stage of the protocol acts on the CF arguments only, so a state is
carried around as a :class:`CFExpression`: a product of leaf CFs, each fed a
real linear map (its *argmap*) of a shared vector of free phase-space
arguments ``(x1, p1, x2, p2, x3, p3)``.  Argmaps may carry leading batch
dimensions; evaluation broadcasts over them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .states import (
    SQRT2,
    ResourceSpec,
    bogoliubov_matrix,
    cf_coherent,
    cf_resource,
    cf_vacuum,
    phase_to_complex,
)

MODES = (1, 2, 3)


# ---------------------------------------------------------------------------
# patterns and gains


@dataclass(frozen=True, order=True)
class ErasurePattern:
    """Subset of the transmitted modes 1', 2', 3' lost in the channel."""

    erased: tuple[int, ...] = ()

    def __post_init__(self):
        modes = tuple(sorted(set(int(m) for m in self.erased)))
        if any(m not in MODES for m in modes):
            raise ValueError(f"modes must be drawn from {MODES}, got {self.erased!r}")
        object.__setattr__(self, "erased", modes)

    def __len__(self):
        return len(self.erased)

    def __contains__(self, mode):
        return mode in self.erased

    @property
    def label(self) -> str:
        return "".join(map(str, self.erased)) or "none"

    def __str__(self):
        return self.label

    @classmethod
    def parse(cls, text: str) -> "ErasurePattern":
        """Parse ``none``, ``all``, ``2``, ``13``, ``1,3`` or ``1&3``."""
        t = text.strip().lower().replace("'", "")
        if t in ("none", "", "{}", "0"):
            return cls(())
        if t == "all":
            return cls(MODES)
        digits = [c for c in t if c not in ",& {}"]
        if not digits or any(c not in "123" for c in digits) or len(set(digits)) != len(digits):
            raise ValueError(f"cannot parse erasure pattern {text!r}")
        return cls(tuple(int(c) for c in digits))


#: All eight patterns in canonical order.
PATTERNS: tuple[ErasurePattern, ...] = tuple(
    ErasurePattern(c) for k in range(4) for c in itertools.combinations(MODES, k)
)
NONE, E1, E2, E3, E12, E13, E23, E123 = PATTERNS


@dataclass(frozen=True)
class Gains:
    """Correction gains applied after the dual homodyne syndrome measurement."""

    gx: float = 0.0
    gp: float = 0.0

    def __post_init__(self):
        gx, gp = float(self.gx), float(self.gp)
        if not (math.isfinite(gx) and math.isfinite(gp)):
            raise ValueError(f"gains must be finite, got ({self.gx!r}, {self.gp!r})")
        object.__setattr__(self, "gx", gx)
        object.__setattr__(self, "gp", gp)

    @classmethod
    def diagonal(cls, g: float) -> "Gains":
        return cls(g, g)

    def __neg__(self):
        return Gains(-self.gx, -self.gp)


# ---------------------------------------------------------------------------
# leaf CFs


@dataclass(frozen=True)
class Vacuum:
    arity = 2

    def __call__(self, args):
        return cf_vacuum(phase_to_complex(args[..., 0], args[..., 1]))

    def gaussian_form(self):
        return 0.25 * np.eye(2)


@dataclass(frozen=True)
class Coherent:
    alpha: complex = 0j
    arity = 2

    def __call__(self, args):
        return cf_coherent(phase_to_complex(args[..., 0], args[..., 1]), self.alpha)

    def gaussian_form(self):
        return 0.25 * np.eye(2)


@dataclass(frozen=True)
class Resource:
    spec: ResourceSpec
    arity = 4

    def __call__(self, args):
        la = phase_to_complex(args[..., 0], args[..., 1])
        lb = phase_to_complex(args[..., 2], args[..., 3])
        return cf_resource(self.spec, la, lb)

    def gaussian_form(self):
        b = bogoliubov_matrix(self.spec.r)
        return 0.25 * b.T @ b


@dataclass(frozen=True)
class EnsembleKernel:
    """``exp(-sigma |lam|^2)``: the coherent-ensemble average of a CF phase."""

    sigma: float
    arity = 2

    def __call__(self, args):
        return np.exp(-0.5 * self.sigma * (args[..., 0] ** 2 + args[..., 1] ** 2))

    def gaussian_form(self):
        return 0.5 * self.sigma * np.eye(2)


@dataclass(frozen=True, eq=False)
class CFFactor:
    base: Vacuum | Coherent | Resource | EnsembleKernel
    argmap: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.argmap, dtype=float)
        if a.ndim < 2 or a.shape[-2] != self.base.arity:
            raise ValueError(f"argmap rows {a.shape} do not match arity {self.base.arity}")
        if not np.all(np.isfinite(a)):
            raise ValueError("argmap entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "argmap", a)


def _apply(argmap: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``argmap @ u`` broadcasting argmap batch dims against point dims of ``u``."""
    batch = argmap.ndim - 2
    npoints = u.ndim - 1 - batch
    if npoints < 0:
        raise ValueError("argument array has fewer dims than the argmap batch")
    a = argmap.reshape(argmap.shape[:batch] + (1,) * npoints + argmap.shape[batch:])
    return np.matmul(a, u[..., None])[..., 0]


def _snap(a: np.ndarray) -> np.ndarray:
    """Round entries within 1e-14 of a multiple of 1/4 onto it.

    Products of beam-splitter entries such as ``(1/sqrt2)**2`` land one ulp
    off 0, 1/2 or 1; snapping makes exact cancellations exact.
    """
    q = np.round(4.0 * a) / 4.0
    return np.where(np.abs(a - q) < 1e-14, q, a)


@dataclass(frozen=True)
class CFExpression:
    """Product of leaf CFs over ``free_dim`` shared real arguments.

    ``stage`` records where in the protocol the expression sits and is used
    only for structural checks.
    """

    free_dim: int
    factors: tuple[CFFactor, ...]
    stage: str = "free"

    def __post_init__(self):
        for f in self.factors:
            if f.argmap.shape[-1] != self.free_dim:
                raise ValueError("argmap column count must equal free_dim")

    def evaluate(self, u) -> np.ndarray:
        """Evaluate at free-argument vectors ``u`` of shape ``(..., free_dim)``."""
        u = np.asarray(u, dtype=float)
        out = np.ones(u.shape[:-1], dtype=complex)
        for f in self.factors:
            out = out * f.base(_apply(f.argmap, u))
        return out[()] if out.ndim == 0 else out

    __call__ = evaluate

    def substitute(self, m, free_dim: int | None = None, stage: str | None = None) -> "CFExpression":
        """Compose every argmap with the linear map ``m`` (new args -> old args)."""
        m = np.asarray(m, dtype=float)
        fd = m.shape[-1] if free_dim is None else free_dim
        return CFExpression(
            fd,
            tuple(CFFactor(f.base, _snap(np.matmul(f.argmap, m))) for f in self.factors),
            self.stage if stage is None else stage,
        )

    def with_factors(self, extra: Iterable[CFFactor], stage: str | None = None) -> "CFExpression":
        return CFExpression(self.free_dim, self.factors + tuple(extra), stage or self.stage)

    def negated(self) -> "CFExpression":
        return self.substitute(-np.eye(self.free_dim))

    def gaussian_form(self) -> np.ndarray:
        """Matrix ``Q`` with ``|expr(u)| <= poly(u) * exp(-u^T Q u)``."""
        q = np.zeros((self.free_dim, self.free_dim))
        for f in self.factors:
            a = f.argmap
            q = q + np.swapaxes(a, -1, -2) @ f.base.gaussian_form() @ a
        return q

    def coherent_factors(self) -> list[CFFactor]:
        return [f for f in self.factors if isinstance(f.base, Coherent)]

    def with_signal(self, alpha: complex) -> "CFExpression":
        """Same expression with every coherent factor set to amplitude ``alpha``."""
        return CFExpression(
            self.free_dim,
            tuple(
                CFFactor(Coherent(complex(alpha)), f.argmap) if isinstance(f.base, Coherent) else f
                for f in self.factors
            ),
            self.stage,
        )

    def modulus_part(self) -> "CFExpression":
        """Coherent factors replaced by their modulus (a vacuum CF at the same argmap)."""
        return CFExpression(
            self.free_dim,
            tuple(CFFactor(Vacuum(), f.argmap) if isinstance(f.base, Coherent) else f for f in self.factors),
            self.stage,
        )


# ---------------------------------------------------------------------------
# pipeline stages


def _selector(rows: Sequence[int], dim: int = 6) -> np.ndarray:
    a = np.zeros((len(rows), dim))
    a[np.arange(len(rows)), rows] = 1.0
    return a


def _mode_cols(mode: int) -> list[int]:
    return [2 * (mode - 1), 2 * (mode - 1) + 1]


def _mode_map(c: np.ndarray) -> np.ndarray:
    """Lift a real 3x3 map on complex mode arguments to the 6 quadrature args."""
    return np.kron(np.asarray(c, dtype=float), np.eye(2))


_H = 1.0 / SQRT2

#: Balanced beam splitter on modes 1, 2 (encoding, BS1).
BS1 = _mode_map([[_H, _H, 0.0], [_H, -_H, 0.0], [0.0, 0.0, 1.0]])

#: Decoding BS2 on modes 1, 2 followed by BS3 on modes 2, 3.
BS23 = _mode_map([[_H, 0.5, 0.5], [_H, -0.5, -0.5], [0.0, _H, -_H]])

#: The composed decoder as typeset (first argument ``(lam1 + lam2)/sqrt 2``);
#: kept for regression tests only, it is not a passive transformation.
BS23_PRINTED = _mode_map([[_H, _H, 0.0], [_H, -0.5, -0.5], [0.0, _H, -_H]])


def _require(expr: CFExpression, stage: str, free_dim: int = 6):
    if expr.free_dim != free_dim or expr.stage != stage:
        raise ValueError(
            f"expected a {free_dim}-argument expression at stage {stage!r}, "
            f"got {expr.free_dim} arguments at stage {expr.stage!r}"
        )


def initial_expression(alpha: complex, spec: ResourceSpec) -> CFExpression:
    """``chi_s(lam1) chi_AB(lam2, lam3)`` before encoding."""
    return CFExpression(
        6,
        (
            CFFactor(Coherent(complex(alpha)), _selector([0, 1])),
            CFFactor(Resource(spec), _selector([2, 3, 4, 5])),
        ),
        stage="initial",
    )


def apply_bs1(expr: CFExpression) -> CFExpression:
    _require(expr, "initial")
    return expr.substitute(BS1, stage="encoded")


def apply_erasures(expr: CFExpression, pattern: ErasurePattern) -> CFExpression:
    """Replace each erased mode by vacuum.

    The erased mode's arguments are zeroed in every existing factor and a
    vacuum CF on those arguments is appended.
    """
    _require(expr, "encoded")
    keep = np.eye(6)
    extra = []
    for m in pattern.erased:
        cols = _mode_cols(m)
        keep[cols, cols] = 0.0
        extra.append(CFFactor(Vacuum(), _selector(cols)))
    return expr.substitute(keep, stage="channel").with_factors(extra)


def apply_bs2_bs3(expr: CFExpression, printed: bool = False) -> CFExpression:
    _require(expr, "channel")
    return expr.substitute(BS23_PRINTED if printed else BS23, stage="decoded")


def measurement_map(gx, gp) -> np.ndarray:
    """6x2 map ``(x, p) -> (x, p, sqrt2 gx x, 0, 0, sqrt2 gp p)``.

    ``gx`` and ``gp`` may be arrays of equal shape, giving a batch of maps.
    """
    gx = np.asarray(gx, dtype=float)
    gp = np.asarray(gp, dtype=float)
    gx, gp = np.broadcast_arrays(gx, gp)
    m = np.zeros(gx.shape + (6, 2))
    m[..., 0, 0] = 1.0
    m[..., 1, 1] = 1.0
    m[..., 2, 0] = SQRT2 * gx
    m[..., 5, 1] = SQRT2 * gp
    return m


def measure_and_correct(expr: CFExpression, g: Gains) -> CFExpression:
    """Integrate out the syndrome and apply the corrective displacement.

    After the delta-function reduction the output CF is the decoded CF with
    mode-2 arguments ``(sqrt2 gx x, 0)`` and mode-3 arguments
    ``(0, sqrt2 gp p)``.
    """
    _require(expr, "decoded")
    return expr.substitute(measurement_map(g.gx, g.gp), stage="output")


def measure_and_correct_many(expr: CFExpression, gx, gp) -> CFExpression:
    """Batched :func:`measure_and_correct` over arrays of gains."""
    _require(expr, "decoded")
    return expr.substitute(measurement_map(gx, gp), free_dim=2, stage="output")


def decoded_expression(pattern: ErasurePattern, spec: ResourceSpec, alpha: complex = 0j) -> CFExpression:
    return apply_bs2_bs3(apply_erasures(apply_bs1(initial_expression(alpha, spec)), pattern))


def output_cf_pipeline(pattern: ErasurePattern, g: Gains, spec: ResourceSpec, alpha: complex) -> CFExpression:
    """Output CF built by running the full encode/erase/decode/measure chain."""
    return measure_and_correct(decoded_expression(pattern, spec, alpha), g)


# ---------------------------------------------------------------------------
# direct transcription of the output CF table


def _d(a, b):
    return np.array([[a, 0.0], [0.0, b]])


def _pair(first, second):
    return np.vstack([first, second])


_Z = np.zeros((2, 2))


def output_cf_table1(
    pattern: ErasurePattern, g: Gains, spec: ResourceSpec, alpha: complex, printed: bool = False
) -> CFExpression:
    """Output CF written down directly from the closed-form table.

    The rows for "no erasure" and "all modes erased" carry no gains: they
    hold for the decoder setting ``g = 0`` and ``g`` is ignored for them.
    ``printed=True`` reproduces the typeset row for erasures on 1' and 3',
    whose last vacuum factor is inconsistent with the pipeline.
    """
    gx, gp = float(g.gx), float(g.gp)
    s, r = Coherent(complex(alpha)), Resource(spec)
    vac = Vacuum()
    plus = _d((1 + gx) / 2, (1 + gp) / 2)
    minus = _d((1 - gx) / 2, (1 - gp) / 2)
    vplus = _d((1 + gx) / SQRT2, (1 + gp) / SQRT2)
    vminus = _d((1 - gx) / SQRT2, (1 - gp) / SQRT2)
    corr = _d(gx, -gp)
    rows = {
        NONE: [(s, np.eye(2))],
        E1: [(s, minus), (r, _pair(-minus, corr)), (vac, vplus)],
        E2: [(s, plus), (r, _pair(plus, corr)), (vac, vminus)],
        E3: [(s, np.eye(2)), (r, _pair(_d(gx, gp), _Z)), (vac, corr)],
        E12: [(r, _pair(_Z, corr)), (vac, vplus), (vac, vminus)],
        E13: [
            (s, minus),
            (r, _pair(-minus, _Z)),
            (vac, vplus),
            (vac, _d((1 + gx) / SQRT2, (1 - gp) / SQRT2) if printed else corr),
        ],
        E23: [(s, plus), (r, _pair(plus, _Z)), (vac, vminus), (vac, corr)],
        E123: [(vac, np.eye(2))],
    }
    return CFExpression(2, tuple(CFFactor(b, a) for b, a in rows[pattern]), stage="output")


# ---------------------------------------------------------------------------
# verification harness


GAINLESS_ROWS = (NONE, E123)

_CHECK_RESOURCES = (
    [ResourceSpec.tmsv(v) for v in (1.0, 3.0, 9.0)]
    + [ResourceSpec.squeezed_bell(v, d) for v in (1.0, 3.0, 9.0) for d in (0.0, 0.4)]
    + [ResourceSpec.vacuum_pair()]
)


@dataclass
class EquivalenceReport:
    tolerance: float
    samples: int
    max_deviation: dict[str, float] = field(default_factory=dict)
    worst: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.max_deviation.values())

    @property
    def overall(self) -> float:
        return max(self.max_deviation.values(), default=0.0)

    def failures(self) -> list[str]:
        return [
            f"pattern {k}: deviation {v:.3e} at {self.worst[k]}"
            for k, v in self.max_deviation.items()
            if not v < self.tolerance
        ]


def check_equivalence(
    samples: int = 1000,
    tolerance: float = 1e-12,
    seed: int = 0,
    patterns: Sequence[ErasurePattern] = PATTERNS,
    printed: bool = False,
) -> EquivalenceReport:
    """Compare pipeline and table constructions at random points.

    Samples cycle through ``patterns`` and a fixed set of resources; gains,
    signal amplitude and the probe point ``(x, p)`` are drawn uniformly from
    ``[-2, 2]^2``, ``|alpha| <= 3`` and ``[-4, 4]^2``.  Gains are pinned to
    zero for the two rows that carry none.
    """
    rng = np.random.default_rng(seed)
    report = EquivalenceReport(tolerance, samples)
    for p in patterns:
        report.max_deviation[p.label] = 0.0
        report.worst[p.label] = "-"
    for i in range(samples):
        pattern = patterns[i % len(patterns)]
        spec = _CHECK_RESOURCES[(i // len(patterns)) % len(_CHECK_RESOURCES)]
        gx, gp = rng.uniform(-2, 2, 2)
        if pattern in GAINLESS_ROWS:
            gx = gp = 0.0
        alpha = 3 * math.sqrt(rng.uniform()) * np.exp(2j * math.pi * rng.uniform())
        u = rng.uniform(-4, 4, 2)
        g = Gains(gx, gp)
        a = output_cf_pipeline(pattern, g, spec, alpha).evaluate(u)
        b = output_cf_table1(pattern, g, spec, alpha, printed=printed).evaluate(u)
        dev = float(abs(a - b))
        if dev >= report.max_deviation[pattern.label]:
            report.max_deviation[pattern.label] = dev
            report.worst[pattern.label] = (
                f"{spec.label()} g=({gx:.4f},{gp:.4f}) alpha={alpha:.4f} (x,p)=({u[0]:.4f},{u[1]:.4f})"
            )
    return report


def mode_symmetry_deviation(samples: int = 200, seed: int = 1, printed: bool = False) -> float:
    """Max ``|row 1(-g) - row 2(g)|`` and ``|row 13(-g) - row 23(g)|`` of the table.

    Both differences vanish for any resource with an even CF; the printed
    1'&3' row breaks the second one.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        spec = _CHECK_RESOURCES[i % len(_CHECK_RESOURCES)]
        g = Gains(*rng.uniform(-2, 2, 2))
        alpha = complex(*rng.uniform(-2, 2, 2))
        u = rng.uniform(-4, 4, 2)
        for a, b in ((E1, E2), (E13, E23)):
            lhs = output_cf_table1(a, -g, spec, alpha, printed=printed).evaluate(u)
            rhs = output_cf_table1(b, g, spec, alpha, printed=printed).evaluate(u)
            worst = max(worst, float(abs(lhs - rhs)))
    return worst
