"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure (a ``FAILED``
marker is left next to any partial artifacts).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import closed_forms as cf
from .geometry import DomainError, make_annular_domain, make_rectangle_domain, read_field, write_field
from .limits import (
    Window,
    extract_delta_wing,
    run_sweep,
    sweep_plots,
    write_sweep_csv,
)
from .morse_rado import (
    GraphFamily,
    LeafCoincidenceError,
    RectangleCurve,
    VerticalPlane,
    count_critical_points_graph,
    count_critical_points_rotational,
    with_rhs,
    write_report_csv,
)
from .ode_solitons import ProfileError, bowl_profile, catenoid_profile, write_bowl_csv, write_profile_csv
from .solver import SolverConfig, solve, write_solution
from .svg import contour_plot, line_plot, write_svg

OUT_ENV = "TRANSLATOR_LAB_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def decimal(text: str) -> float:
    """Finite decimal literal; expressions such as pi/4 are not parsed."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return v


def decimal_list(text: str) -> tuple[float, ...]:
    return tuple(decimal(t) for t in text.split(",") if t.strip())


# ---------------------------------------------------------------------------
# config files

@dataclass
class ExperimentConfig:
    """Effective parameters of one invocation, as written to ``config.txt``."""

    command: str
    params: dict = dc_field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"command = {self.command}"]
        lines += [f"{k} = {self.params[k]}" for k in sorted(self.params)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        kv = parse_config_text(text)
        command = kv.pop("command", None)
        if command is None:
            raise UsageError("config has no 'command' entry")
        return cls(command=command, params=kv)


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# parser


def _solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--newton-tol", type=decimal)
    g.add_argument("--max-newton-iters", type=int)
    g.add_argument("--damping", type=decimal)
    g.add_argument("--continuation-steps", type=int)
    g.add_argument("--linear-tol", type=decimal)
    g.add_argument("--divergence-height", type=decimal)
    g.add_argument("--scheme", choices=("divergence", "strong"))
    g.add_argument("--linear-solver", choices=("direct", "gmres"))


def _sweep_args(p):
    p.add_argument("--b", type=decimal)
    p.add_argument("--Ls", type=decimal_list)
    p.add_argument("--dx", type=decimal)
    p.add_argument("--ny", type=int)
    p.add_argument("--window", type=decimal_list, help="W,Y half-widths of the comparison window")


# built-in defaults, applied after command line and config file
DEFAULTS = {
    "solve": {"shape": "rect"},
    "sweep": {"dx": 0.125, "ny": 65},
    "deltawing": {"dx": 0.125, "ny": 65},
    "bowl": {"rmax": 5.0, "h": 1e-3},
    "catenoid": {"smax": 5.0, "h": 1e-3},
    "morserado": {"foliation": "plane", "angle": 0.0, "cluster_radius": 3, "tol": 1e-9},
    "verify": {"level": "desk", "repeat": 2},
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="translator-lab", description="Numerics for translating solitons.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file; command-line flags take precedence")
        p.add_argument("--out", help=f"output directory (relative paths resolve under ${OUT_ENV})")
        return p

    p = command("solve", "zero-boundary Dirichlet solve on a rectangle or annulus")
    p.add_argument("--shape", choices=("rect", "annulus"))
    p.add_argument("--L", type=decimal)
    p.add_argument("--b", type=decimal)
    p.add_argument("--a", type=decimal)
    p.add_argument("--A", type=decimal)
    p.add_argument("--B", type=decimal)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    _solver_args(p)

    p = command("sweep", "center heights of u_L,b along an L schedule")
    _sweep_args(p)
    _solver_args(p)

    p = command("deltawing", "renormalized limit, Cauchy gap and tilt for b > pi/2")
    _sweep_args(p)
    _solver_args(p)

    p = command("bowl", "integrate the bowl profile")
    p.add_argument("--rmax", type=decimal)
    p.add_argument("--h", type=decimal)

    p = command("catenoid", "integrate a translating catenoid profile")
    p.add_argument("--lambda", dest="lambda", type=decimal)
    p.add_argument("--smax", type=decimal)
    p.add_argument("--h", type=decimal)

    p = command("morserado", "tangency count against a minimal foliation")
    p.add_argument("--field", help="translator-field v1 file of a graph")
    p.add_argument("--catenoid-lambda", type=decimal, help="count on W(lambda) instead of a field")
    p.add_argument("--foliation", choices=("plane", "grimreaper", "tilted", "bowl"))
    p.add_argument("--angle", type=decimal, help="degrees: plane direction or leaf rotation")
    p.add_argument("--tilt-b", type=decimal, help="strip half-width of the tilted leaves")
    p.add_argument("--cluster-radius", type=int)
    p.add_argument("--tol", type=decimal)
    p.add_argument("--euler-char", type=int, help="with --boundary, also report the Morse-Rado bound")
    p.add_argument("--boundary", help="rectangles as 'A,B;a,b' (half-widths)")

    p = command("verify", "run the acceptance criteria")
    p.add_argument("--level", choices=("desk", "quick"))
    p.add_argument("--repeat", type=int)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def resolve_args(parser, argv) -> argparse.Namespace:
    """Merge command line, config file and built-in defaults (in that order)."""
    args = parser.parse_args(argv)
    sp = _subparser(parser, args.command)
    actions = {a.dest: a for a in sp._actions if a.dest not in ("help",)}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        kv = parse_config_text(text)
        cmd = kv.pop("command", args.command)
        if cmd != args.command:
            raise UsageError(f"config is for '{cmd}', not '{args.command}'")
        for key, raw in kv.items():
            if key not in actions or key == "config":
                raise UsageError(f"unknown config key '{key}' for '{args.command}'")
            if getattr(args, key) is not None:
                continue
            act = actions[key]
            try:
                value = act.type(raw) if act.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key '{key}': {exc}") from None
            if act.choices is not None and value not in act.choices:
                raise UsageError(f"config key '{key}': invalid choice {value!r}")
            setattr(args, key, value)
    for key, value in DEFAULTS.get(args.command, {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def effective_config(args) -> ExperimentConfig:
    skip = {"command", "config", "verbose"}
    params = {k: _fmt_value(v) for k, v in sorted(vars(args).items()) if k not in skip and v is not None}
    return ExperimentConfig(command=args.command, params=params)


def solver_config(args) -> SolverConfig:
    kw = {}
    for name in ("newton_tol", "max_newton_iters", "damping", "continuation_steps",
                 "linear_tol", "divergence_height", "scheme", "linear_solver"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def output_dir(args) -> Path:
    out = Path(args.out or f"{args.command}_out")
    root = os.environ.get(OUT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    return out


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m for m in missing))


# ---------------------------------------------------------------------------
# commands

def cmd_solve(args, out: Path) -> int:
    cfg = solver_config(args)
    if args.shape == "rect":
        _need(args, "L", "b", "nx", "ny")
        dom = make_rectangle_domain(args.L, args.b, args.nx, args.ny)
    else:
        _need(args, "a", "b", "A", "B", "nx", "ny")
        dom = make_annular_domain(args.a, args.b, args.A, args.B, args.nx, args.ny)
    sol = solve(dom, cfg)
    write_solution(sol, out)
    write_svg(contour_plot(sol.field, 12, title=f"u ({args.shape})"), out / "contour.svg")
    print(f"converged={sol.converged} center_height={sol.center_height:.10g} "
          f"residual={sol.residual_norm:.3g} t_reached={sol.t_reached:.6g}")
    if not sol.converged:
        raise NumericalFailure(f"solver failed: {sol.failure or 'not converged'} "
                               f"at t={sol.t_reached:.6g}")
    return EXIT_OK


def _run_sweep(args):
    _need(args, "b", "Ls")
    window = None
    if args.window is not None:
        if len(args.window) != 2:
            raise UsageError("--window takes two numbers W,Y")
        window = Window(*args.window)
    return run_sweep(args.b, args.Ls, window=window, dx=args.dx, ny=args.ny, cfg=solver_config(args))


def _write_sweep(sweep, out: Path):
    if sweep.solutions:
        write_sweep_csv(sweep, out / "sweep.csv")
        for name, text in sweep_plots(sweep).items():
            write_svg(text, out / name)
    inc = ", ".join(f"{v:.6g}" for v in sweep.increments)
    print(f"center heights: {', '.join(f'{v:.10g}' for v in sweep.center_heights)}")
    # the classifier is a heuristic near b = pi/2; show the raw numbers
    print(f"increments: {inc or '-'}; unbounded (floor 0.05): {sweep.center_unbounded()}")


def cmd_sweep(args, out: Path) -> int:
    sweep = _run_sweep(args)
    _write_sweep(sweep, out)
    if not sweep.complete:
        raise NumericalFailure(sweep.diagnostic or "sweep incomplete")
    return EXIT_OK


def cmd_deltawing(args, out: Path) -> int:
    _need(args, "b")
    if not args.b > math.pi / 2:
        raise UsageError("deltawing needs b > pi/2")
    sweep = _run_sweep(args)
    _write_sweep(sweep, out)
    if not sweep.complete:
        raise NumericalFailure(sweep.diagnostic or "sweep incomplete")
    wing = extract_delta_wing(sweep)
    write_field(wing.limit_field, out / "limit_field.txt")
    write_svg(contour_plot(wing.limit_field, 16, title=f"renormalized limit, b={args.b:.6g}"),
              out / "limit_contour.svg")
    summary = {
        "b": _fmt_value(wing.b),
        "cauchy_gap": _fmt_value(wing.cauchy_gap),
        "measured_tilt": _fmt_value(wing.measured_tilt),
        "tilt_target": _fmt_value(cf.tilt_slope(wing.b)),
        "center_unbounded": _fmt_value(wing.center_unbounded),
        "non_convergent": _fmt_value(wing.non_convergent),
        "tilt_unreliable": _fmt_value(wing.tilt_unreliable),
    }
    (out / "deltawing.txt").write_text("".join(f"{k} = {v}\n" for k, v in summary.items()),
                                       encoding="utf-8")
    print(f"cauchy_gap={wing.cauchy_gap:.4g} tilt={wing.measured_tilt:.6g} "
          f"(target {cf.tilt_slope(wing.b):.6g}) unbounded={wing.center_unbounded}")
    return EXIT_OK


def cmd_bowl(args, out: Path) -> int:
    try:
        prof = bowl_profile(args.rmax, args.h)
    except ProfileError as exc:
        raise UsageError(str(exc)) from None
    write_bowl_csv(prof, out / "bowl.csv")
    write_svg(line_plot([("-u(r)", prof.r, -prof.u)], title="bowl soliton profile",
                        xlabel="r", ylabel="z"), out / "bowl.svg")
    print(f"u({prof.r[-1]:g}) = {prof.u[-1]:.10g}, u'({prof.r[-1]:g}) = {prof.du[-1]:.10g}")
    return EXIT_OK


def cmd_catenoid(args, out: Path) -> int:
    _need(args, "lambda")
    lam = getattr(args, "lambda")
    try:
        c = catenoid_profile(lam, args.smax, args.h)
    except ProfileError as exc:
        raise NumericalFailure(str(exc)) from None
    write_profile_csv(c, out / "profile.csv")
    write_svg(line_plot([("upper", *c.wing("upper")), ("lower", *c.wing("lower"))],
                        title=f"translating catenoid, neck {lam:g}", xlabel="r", ylabel="z"),
              out / "profile.svg")
    print(f"neck r(0) = {c.r[c.neck_index]:.17g}, min r = {float(np.min(c.r)):.17g}")
    return EXIT_OK


def _foliation(args):
    if args.foliation == "plane":
        return VerticalPlane.at_angle(args.angle)
    ang = math.radians(args.angle)
    if args.foliation == "grimreaper":
        return GraphFamily(cf.Rotated(cf.GrimReaper(), angle=ang))
    if args.foliation == "tilted":
        _need(args, "tilt_b")
        return GraphFamily(cf.Rotated(cf.TiltedGrimReaper(args.tilt_b), angle=ang))
    return GraphFamily(bowl_profile(50.0, 0.01))


def _boundary(text: str):
    curves = []
    for part in text.split(";"):
        vals = decimal_list(part)
        if len(vals) != 2:
            raise UsageError("--boundary entries are 'half_width,half_height'")
        curves.append(RectangleCurve(*vals))
    return curves


def cmd_morserado(args, out: Path) -> int:
    fol = _foliation(args)
    if args.catenoid_lambda is not None:
        if not isinstance(fol, VerticalPlane):
            raise UsageError("catenoids are counted against vertical planes only")
        rep = count_critical_points_rotational(catenoid_profile(args.catenoid_lambda, 5.0, 1e-3), fol)
        field = None
    else:
        _need(args, "field")
        try:
            field = read_field(args.field)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read field: {exc}") from None
        try:
            rep = count_critical_points_graph(field, fol, tol=args.tol, cluster_radius=args.cluster_radius)
        except LeafCoincidenceError as exc:
            raise NumericalFailure(str(exc)) from None
    if args.boundary is not None:
        _need(args, "euler_char")
        try:
            rep = with_rhs(rep, _boundary(args.boundary), fol, args.euler_char)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    write_report_csv(rep, out / "report.csv")
    if field is not None:
        pts = [(p.x, p.y, f"m={p.multiplicity}") for p in rep.points]
        write_svg(contour_plot(field, 12, title="tangencies", points=pts), out / "overlay.svg")
    print(f"total={rep.total} rhs={rep.rhs} points={len(rep.points)}")
    for note in rep.notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_verify(args, out: Path) -> int:
    from .acceptance import format_table, verify

    results = verify(args.level, out, repeat=args.repeat)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "deltawing": cmd_deltawing,
    "bowl": cmd_bowl,
    "catenoid": cmd_catenoid,
    "morserado": cmd_morserado,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = resolve_args(parser, argv)
    except UsageError as exc:
        print(f"translator-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.verbose:
        import logging
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    out = None
    try:
        out = output_dir(args)
        (out / "config.txt").write_text(effective_config(args).to_text(), encoding="utf-8")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"translator-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, cf.StripDomainError) as exc:
        print(f"translator-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"translator-lab: numerical failure: {exc}", file=sys.stderr)
        if out is not None:
            (out / "FAILED").write_text(f"{exc}\n", encoding="utf-8")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
