"""Command-line interface: one-off evaluations, figure sweeps and a self-test.

Usage::

    python -m cverasure table --pattern 2 --resource tmsv:V=9 --g 1
    python -m cverasure sweep-v --v-grid 1:9:0.5 --out fig2.csv
    python -m cverasure protocol --pe-grid 0:1:0.01 --out fig3.csv
    python -m cverasure postselect --out fig4.csv
    python -m cverasure selftest

Settings come from flags, then from ``--config FILE`` (flat ``key=value``
lines), then from the built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .fidelity import (
    EnsembleSpec,
    fidelity_coherent,
    mean_fidelity,
    mean_fidelity_oracle,
    postselect_conditional_fidelity,
    postselect_fidelity,
    vacuum_mean_fidelity,
)
from .optimizer import (
    FAMILIES,
    build_gain_dictionary,
    make_resource,
    optimal_pattern_fidelities,
    optimize_gains,
    protocol_sweep,
)
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
    ErasurePattern,
    Gains,
    check_equivalence,
    mode_symmetry_deviation,
    output_cf_pipeline,
)
from .quadrature import QuadratureSpec
from .states import DomainError, ResourceKind, ResourceSpec

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

#: Gauss-Hermite order used by sweeps unless ``--quad-order`` is given.
SWEEP_ORDER = 16
SWEEP_PATTERNS = (E1, E2, E13, E23)


class UsageError(ValueError):
    """Malformed command-line or config value (exit code 2)."""


# ---------------------------------------------------------------------------
# parsing helpers


def parse_grid(text: str) -> np.ndarray:
    """Parse ``a:b:step`` (inclusive of ``b``), a comma list, or a single number."""
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            if step <= 0 or b < a:
                raise UsageError(f"grid {text!r} needs a <= b and step > 0")
            n = (b - a) / step
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise UsageError(f"grid {text!r}: step does not divide the range")
            return np.round(np.linspace(a, b, int(round(n)) + 1), 12)
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"cannot parse grid {text!r}") from exc


_FAMILY_ALIASES = {
    "tmsv": ResourceKind.TMSV,
    "sb": ResourceKind.SQUEEZED_BELL,
    "squeezed-bell": ResourceKind.SQUEEZED_BELL,
    "vacuum": ResourceKind.VACUUM_PAIR,
}


def parse_family(text: str) -> ResourceKind:
    try:
        return _FAMILY_ALIASES[text.strip().lower()]
    except KeyError:
        raise UsageError(f"unknown resource family {text!r}") from None


def parse_resource(text: str) -> ResourceSpec:
    """Parse ``FAMILY[:V=..,delta=..]``, e.g. ``tmsv:V=9`` or ``sb:V=3,delta=0.4``."""
    family, _, rest = text.partition(":")
    kind = parse_family(family)
    params = {}
    for item in filter(None, (t.strip() for t in rest.split(","))):
        key, eq, value = item.partition("=")
        key = key.strip().lower()
        if not eq or key not in ("v", "delta"):
            raise UsageError(f"bad resource parameter {item!r} in {text!r}")
        try:
            params[key] = float(value)
        except ValueError:
            raise UsageError(f"bad number {value!r} in {text!r}") from None
    try:
        if kind is ResourceKind.VACUUM_PAIR:
            if params:
                raise UsageError("the vacuum pair takes no parameters")
            return ResourceSpec.vacuum_pair()
        if kind is ResourceKind.TMSV:
            if "delta" in params:
                raise UsageError("a TMSV resource takes no delta")
            return ResourceSpec.tmsv(params.get("v", 9.0))
        return ResourceSpec.squeezed_bell(params.get("v", 9.0), params.get("delta", 0.0))
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def parse_alpha(text: str) -> complex:
    """Parse ``RE+IMi`` (``j`` also accepted)."""
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse amplitude {text!r}") from None


def parse_pattern(text: str) -> ErasurePattern:
    try:
        return ErasurePattern.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def parse_config_file(path: str) -> dict[str, str]:
    """Read flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{n}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    sigma: float = 10.0
    vmax: float = 9.0
    quad: str = "gh"
    quad_order: int | None = None
    quad_tol: float = 1e-10
    v_grid: str | None = None
    pe_grid: str = "0:1:0.01"
    delta_points: int = 64
    families: str = "tmsv,sb"
    postselect_v: str = "3,5,7,9"
    format: str = "csv"
    out: str | None = None
    seed: int = 0

    @property
    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(self.sigma)

    def quadrature(self, sweep: bool = False) -> QuadratureSpec:
        order = self.quad_order or (SWEEP_ORDER if sweep else QuadratureSpec.order)
        return QuadratureSpec(self.quad, order=order, tolerance=self.quad_tol)

    def v_values(self) -> np.ndarray:
        grid = parse_grid(self.v_grid or f"1:{self.vmax:g}:0.1")
        if grid.size == 0 or grid.min() < 1.0 or grid.max() > self.vmax + 1e-12:
            raise UsageError(f"V grid must lie in [1, {self.vmax:g}]")
        return grid

    def pe_values(self) -> np.ndarray:
        grid = parse_grid(self.pe_grid)
        if grid.size == 0 or grid.min() < 0.0 or grid.max() > 1.0:
            raise UsageError("Pe grid must lie in [0, 1]")
        return grid

    def delta_values(self) -> np.ndarray:
        if self.delta_points < 1:
            raise UsageError("delta-points must be positive")
        return -math.pi / 2 + math.pi * np.arange(self.delta_points) / self.delta_points

    def family_values(self) -> list[ResourceKind]:
        fams = [parse_family(t) for t in self.families.split(",") if t.strip()]
        if not fams or any(f not in FAMILIES for f in fams):
            raise UsageError("families must be drawn from tmsv, sb")
        return fams

    def metadata(self) -> dict:
        return {
            "version": __version__,
            "sigma": self.sigma,
            "vmax": self.vmax,
            "quad": self.quad,
            "quad_order": self.quad_order,
            "v_grid": self.v_grid or f"1:{self.vmax:g}:0.1",
            "pe_grid": self.pe_grid,
            "delta_points": self.delta_points,
            "families": self.families,
        }


_CONFIG_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        for key, raw in parse_config_file(args.config).items():
            if key not in _CONFIG_TYPES:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = raw
    for key in _CONFIG_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    conv = {"sigma": float, "vmax": float, "quad_tol": float, "quad_order": int, "delta_points": int, "seed": int}
    try:
        typed = {k: conv[k](v) if k in conv else str(v) for k, v in values.items()}
        cfg = RunConfig(**typed)
        cfg.ensemble
        cfg.quadrature()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if cfg.format not in ("csv", "json"):
        raise UsageError(f"unknown format {cfg.format!r}")
    if cfg.vmax < 1.0:
        raise UsageError("vmax must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else f"{float(value):.12g}"
    return str(value)


def _json_value(value):
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(f"{float(value):.12g}")
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


@dataclass
class Dataset:
    columns: list[str]
    rows: list[list]
    metadata: dict

    def render(self, fmt: str) -> str:
        if fmt == "json":
            doc = {
                "metadata": {k: _json_value(v) for k, v in self.metadata.items()},
                "columns": self.columns,
                "rows": [[_json_value(v) for v in row] for row in self.rows],
            }
            return json.dumps(doc, indent=1) + "\n"
        buf = io.StringIO()
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {_fmt(v)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text)


def gnuplot_script(csv_path: str, x: str, y: str, key: str, columns: Sequence[str]) -> str:
    """Companion gnuplot script drawing column ``y`` against ``x``, one curve per ``key``."""
    ix, iy, ik = (columns.index(c) + 1 for c in (x, y, key))
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"set xlabel '{x}'\nset ylabel '{y}'\n"
        f"keys = system(\"grep -v '^#' {csv_path} | tail -n +2 | cut -d, -f{ik} | sort -u\")\n"
        f"plot for [k in keys] '{csv_path}' using {ix}:(stringcolumn({ik}) eq k ? ${iy} : 1/0) "
        "with lines title k\n"
    )


# ---------------------------------------------------------------------------
# commands


def cmd_table(args, cfg: RunConfig) -> Dataset:
    pattern = parse_pattern(args.pattern)
    spec = parse_resource(args.resource)
    g = args.g if args.g is not None else 0.0
    gains = Gains(args.gx if args.gx is not None else g, args.gp if args.gp is not None else g)
    alpha = parse_alpha(args.alpha)
    out = output_cf_pipeline(pattern, gains, spec, alpha)
    f_alpha = fidelity_coherent(out, alpha, QuadratureSpec("adaptive", tolerance=cfg.quad_tol))
    f_mean = mean_fidelity(pattern, gains, spec, cfg.ensemble, cfg.quadrature())
    rows = [["F_alpha", f_alpha, ""], ["F_mean", f_mean, ""]]
    for probe in args.probe or []:
        try:
            x, p = (float(t) for t in probe.split(","))
        except ValueError:
            raise UsageError(f"probe must be 'x,p', got {probe!r}") from None
        val = complex(out.evaluate(np.array([x, p])))
        rows.append([f"chi_out({x:g},{p:g})", val.real, val.imag])
    meta = cfg.metadata() | {
        "command": "table",
        "pattern": pattern.label,
        "resource": spec.label(),
        "gx": gains.gx,
        "gp": gains.gp,
        "alpha": f"{alpha.real:.12g}{alpha.imag:+.12g}i",
    }
    return Dataset(["quantity", "value", "imag"], rows, meta)


def _best_delta(pattern, V, d, ens, q):
    """Best squeezed-Bell delta on the grid at one V, refined by a bounded line search."""
    from scipy import optimize

    iv = d.index(V, d.delta_grid[0])[0]
    k = PATTERNS.index(pattern)
    f = d.fidelity[k, iv]
    ties = np.flatnonzero(f >= f.max() - 1e-12)
    j = int(ties[np.argmin(np.abs(d.delta_grid[ties]))])
    best = (float(d.delta_grid[j]), Gains(d.gx[k, iv, j], d.gp[k, iv, j]), float(f[j]))
    if len(d.delta_grid) < 2:
        return best
    step = float(d.delta_grid[1] - d.delta_grid[0])
    lo, hi = best[0] - step, min(best[0] + step, math.pi / 2 - 1e-9)
    lo = max(lo, -math.pi / 2)

    def neg(delta):
        return -optimize_gains(pattern, make_resource(ResourceKind.SQUEEZED_BELL, V, delta), ens, q, best[1])[1]

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
    delta = float(res.x)
    g, fid = optimize_gains(pattern, make_resource(ResourceKind.SQUEEZED_BELL, V, delta), ens, q, best[1])
    return (delta, g, fid) if fid > best[2] + 1e-12 else best


def cmd_sweep_v(args, cfg: RunConfig) -> Dataset:
    ens, q = cfg.ensemble, cfg.quadrature(sweep=True)
    v_grid = cfg.v_values()
    rows = []
    for family in cfg.family_values():
        d = build_gain_dictionary(family, v_grid, cfg.delta_values(), ens, q)
        for V in v_grid:
            for pattern in SWEEP_PATTERNS:
                if family is ResourceKind.TMSV:
                    g, fid = d.lookup(pattern, V)
                    delta = math.nan
                else:
                    delta, g, fid = _best_delta(pattern, V, d, ens, q)
                rows.append([V, pattern.label, family.value, delta, g.gx, g.gp, fid])
    rows.sort(key=lambda r: (r[2], r[1], r[0]))
    meta = cfg.metadata() | {"command": "sweep-v"}
    return Dataset(["V", "pattern", "resource_family", "delta_opt", "gx_opt", "gp_opt", "F_mean"], rows, meta)


def cmd_protocol(args, cfg: RunConfig) -> Dataset:
    ens = cfg.ensemble
    results = protocol_sweep(
        cfg.pe_values(),
        cfg.family_values(),
        ens,
        cfg.quadrature(sweep=True),
        v_grid=cfg.v_values(),
        delta_grid=cfg.delta_values(),
    )
    rows = []
    f12_zero = vacuum_mean_fidelity(ens)
    for family, r in results.items():
        for i, pe in enumerate(r.pe):
            delta = r.delta_opt[i] if family is ResourceKind.SQUEEZED_BELL else math.nan
            rows.append(
                [pe, family.value, r.total[i], r.direct[i], r.v_opt[i], delta, r.postselect[i],
                 r.pattern_fidelity["12"][i], f12_zero]
            )
    meta = cfg.metadata() | {"command": "protocol", "F_12_zero_gain": "F_12 with gains fixed at zero"}
    cols = ["Pe", "family", "F_total", "F_direct", "V_opt", "delta_opt", "F_postselect", "F_12_opt", "F_12_zero_gain"]
    return Dataset(cols, rows, meta)


def cmd_postselect(args, cfg: RunConfig) -> Dataset:
    ens, q = cfg.ensemble, cfg.quadrature(sweep=True)
    pe = cfg.pe_values()
    v_fixed = sorted(set(parse_grid(cfg.postselect_v).tolist()) | {cfg.vmax})
    if min(v_fixed) < 1.0 or max(v_fixed) > cfg.vmax:
        raise UsageError(f"post-selection V values must lie in [1, {cfg.vmax:g}]")
    results = protocol_sweep(pe, cfg.family_values(), ens, q, v_grid=cfg.v_values(), delta_grid=cfg.delta_values())
    rows = []
    for family, r in results.items():
        for V in v_fixed:
            if family is ResourceKind.TMSV:
                pf, delta = optimal_pattern_fidelities(make_resource(family, V), ens, q), math.nan
            else:
                d = build_gain_dictionary(family, [V], cfg.delta_values(), ens, q)
                single = d.fidelity[PATTERNS.index(E1), 0] + d.fidelity[PATTERNS.index(E2), 0]
                j = int(np.argmax(single))
                pf, delta = d.pattern_fidelities(0, j), float(d.delta_grid[j])
            for i, x in enumerate(pe):
                rows.append([x, family.value, V, delta, postselect_fidelity(x, pf),
                             postselect_conditional_fidelity(x, pf), r.total[i]])
    meta = cfg.metadata() | {
        "command": "postselect",
        "F_postselect_conditional": "non-canonical: success-conditional mean, not weighted by success probability",
    }
    cols = ["Pe", "family", "V", "delta", "F_postselect", "F_postselect_conditional", "F_total_optimized"]
    return Dataset(cols, rows, meta)


def run_selftest(cfg: RunConfig, printed: bool = False, samples: int = 1000) -> tuple[bool, list[str]]:
    """Run the verification checks; returns ``(passed, report lines)``."""
    lines, ok = [], True

    def record(name, value, limit, passed=None):
        nonlocal ok
        passed = value < limit if passed is None else passed
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} (limit {limit:.1e})")

    rep = check_equivalence(samples=samples, seed=cfg.seed, printed=printed)
    record("pipeline/table equivalence", rep.overall, rep.tolerance)
    lines.extend(f"  {msg}" for msg in rep.failures())
    record("mode symmetry 1'<->2', 13<->23", mode_symmetry_deviation(seed=cfg.seed + 1, printed=printed), 1e-12)

    ens = cfg.ensemble
    q_ref = QuadratureSpec(order=QuadratureSpec.order)
    q_cmp = cfg.quadrature()
    rng = np.random.default_rng(cfg.seed)
    specs = [ResourceSpec.tmsv(9.0), ResourceSpec.squeezed_bell(3.0, 0.4), ResourceSpec.vacuum_pair()]
    dev = 0.0
    for spec in specs:
        for p in PATTERNS:
            g = Gains(*rng.uniform(-1, 1, 2))
            dev = max(dev, abs(mean_fidelity(p, g, spec, ens, q_ref) - mean_fidelity(p, g, spec, ens, q_cmp)))
    record(f"quadrature {q_cmp.method}/{q_cmp.order} vs gauss-hermite/{q_ref.order}", dev, 1e-8)

    dev = 0.0
    for spec, p, g in ((specs[0], E2, Gains(1, 1)), (specs[1], E13, Gains(-0.4, -0.4)), (specs[2], E23, Gains(0.7, 0.7))):
        dev = max(dev, abs(mean_fidelity(p, g, spec, ens, q_ref) - mean_fidelity_oracle(p, g, spec, ens)))
    record("ensemble kernel vs nested quadrature", dev, 1e-7)

    dev = 0.0
    for spec in specs:
        dev = max(dev, abs(mean_fidelity(NONE, Gains(), spec, ens) - 1.0))
        dev = max(dev, abs(mean_fidelity(E3, Gains(), spec, ens) - 1.0))
        dev = max(dev, abs(mean_fidelity(E123, Gains(), spec, ens) - vacuum_mean_fidelity(ens)))
        dev = max(dev, abs(mean_fidelity(E12, Gains(), spec, ens) - vacuum_mean_fidelity(ens)))
    record("exact rows (none, 3', all, 12 at g=0)", dev, 1e-9)

    dev = 0.0
    for spec in specs:
        for _ in range(4):
            g = Gains(*rng.uniform(-1.5, 1.5, 2))
            dev = max(dev, abs(mean_fidelity(E1, -g, spec, ens) - mean_fidelity(E2, g, spec, ens)))
            dev = max(dev, abs(mean_fidelity(E13, -g, spec, ens) - mean_fidelity(E23, g, spec, ens)))
    record("gain symmetry of fidelities", dev, 1e-10)

    dev = 0.0
    for V in range(1, 10):
        exact = 1.0 / (1.0 + V - math.sqrt(V * V - 1.0))
        dev = max(dev, abs(mean_fidelity(E2, Gains(1, 1), ResourceSpec.tmsv(V), EnsembleSpec(10.0)) - exact))
    record("closed form pattern 2', TMSV, g=1", dev, 1e-8)
    return ok, lines


def cmd_selftest(args, cfg: RunConfig) -> int:
    ok, lines = run_selftest(cfg, printed=args.use_printed_erratum)
    if cfg.format == "json":
        text = json.dumps({"passed": ok, "checks": lines}, indent=1) + "\n"
    else:
        text = "\n".join(lines + [f"selftest {'passed' if ok else 'FAILED'}"]) + "\n"
    write_output(text, cfg.out)
    return EXIT_OK if ok else EXIT_FAILURE


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags take precedence")
    common.add_argument("--sigma", type=float, help="ensemble variance (default 10)")
    common.add_argument("--vmax", type=float, help="largest entanglement variance (default 9)")
    common.add_argument("--quad", choices=["gh", "adaptive"], help="quadrature rule (default gh)")
    common.add_argument("--quad-order", type=int, help="Gauss-Hermite order (default 48; sweeps 16)")
    common.add_argument("--quad-tol", type=float, help="adaptive quadrature tolerance (default 1e-10)")
    common.add_argument("--v-grid", help="V grid a:b:step (default 1:VMAX:0.1)")
    common.add_argument("--pe-grid", help="erasure probability grid a:b:step (default 0:1:0.01)")
    common.add_argument("--delta-points", type=int, help="squeezed-Bell delta grid size (default 64)")
    common.add_argument("--families", help="comma list of tmsv, sb (default both)")
    common.add_argument("--postselect-v", help="fixed V values for post-selection (default 3,5,7,9)")
    common.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--seed", type=int, help="seed for sampled test points (default 0)")
    common.add_argument("--gnuplot", help="also write a gnuplot script for the CSV output")

    parser = argparse.ArgumentParser(prog="cverasure", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table", parents=[common], help="evaluate one pattern, resource and gain")
    t.add_argument("--pattern", default="none", help="erased modes: none, 1, 2, 3, 12, 13, 23, all")
    t.add_argument("--resource", default="tmsv:V=9", help="FAMILY[:V=..,delta=..] (tmsv, sb, vacuum)")
    t.add_argument("--g", type=float, help="diagonal gain gx = gp")
    t.add_argument("--gx", type=float, help="x gain (overrides --g)")
    t.add_argument("--gp", type=float, help="p gain (overrides --g)")
    t.add_argument("--alpha", default="0", help="input amplitude RE+IMi")
    t.add_argument("--probe", action="append", help="evaluate chi_out at x,p (repeatable)")

    sub.add_parser("sweep-v", parents=[common], help="optimal per-pattern fidelity against V")
    sub.add_parser("protocol", parents=[common], help="optimised total fidelity against Pe")
    sub.add_parser("postselect", parents=[common], help="post-selected fidelity against Pe")
    s = sub.add_parser("selftest", parents=[common], help="run the verification checks")
    s.add_argument("--use-printed-erratum", action="store_true", help="use the uncorrected 1'&3' row")
    return parser


_PLOTS = {
    "sweep-v": ("V", "F_mean", "pattern"),
    "protocol": ("Pe", "F_total", "family"),
    "postselect": ("Pe", "F_postselect", "V"),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "selftest":
            return cmd_selftest(args, cfg)
        handler = {"table": cmd_table, "sweep-v": cmd_sweep_v, "protocol": cmd_protocol, "postselect": cmd_postselect}
        data = handler[args.command](args, cfg)
        write_output(data.render(cfg.format), cfg.out)
        if args.gnuplot and args.command in _PLOTS and cfg.format == "csv" and cfg.out:
            Path(args.gnuplot).write_text(gnuplot_script(cfg.out, *_PLOTS[args.command], data.columns))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"{parser.prog}: I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"{parser.prog}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK
