"""Command-line interface.

    bornbarrier transform      --scene S [--p X Y Z ...] [--numeric]
    bornbarrier uprime         --scene S [--seed N --samples N --batches N]
    bornbarrier oracle         --scene S [--compare]
    bornbarrier lattice        --scene S --grid N --spacing H [--dump PATH]
    bornbarrier scaling-sweep  --scene S [--lambda L ...] [--evaluator mc|born]
    bornbarrier force          --scene S --region-index I [--fd-step H]

Exit codes: 0 success, 2 validation/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .born import BornQuadSpec, born_convergence, born_total
from .errors import BadConfig, NumericalError, ValidationError
from .forces import default_step, force, force_balance
from .lattice import GridSpec, dump_field, lattice_pair_correction, perturbation_residual, solve_green
from .montecarlo import McConfig, free_potential, scaling_sweep, total_correction
from .scene import load_scene, scene_digest, validate_scene
from .spectral import multi_region_transform, numeric_transform

CONVENTION = "static-G=1/(4πr); FT=e^{−ipx}, (2π)⁻³ inverse"
UNITS = "lengths in scene units; momenta in inverse scene units; U' has units of length times charge²"


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", required=True, help="scene config file")
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--threads", type=int, default=1)

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--samples", type=int, default=2_000_000)
    mc.add_argument("--batches", type=int, default=32)
    mc.add_argument("--tail-scale", type=float, default=0.7)

    quad = argparse.ArgumentParser(add_help=False)
    quad.add_argument("--quad-points", type=int, default=96, help="Born quadrature nodes per axis")
    quad.add_argument("--quad-rule", choices=("gauss-legendre", "midpoint"), default="gauss-legendre")

    parser = argparse.ArgumentParser(prog="bornbarrier", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("transform", parents=[common], help="barrier Fourier transform at given momenta")
    p.add_argument("--p", nargs=3, type=float, action="append", metavar=("X", "Y", "Z"))
    p.add_argument("--numeric", action="store_true", help="also show brute-force quadrature per region")
    p.add_argument("--numeric-points", type=int, default=64)

    sub.add_parser("uprime", parents=[common, mc], help="momentum-space Monte Carlo for U'")

    p = sub.add_parser("oracle", parents=[common, quad, mc], help="position-space Born quadrature for U'")
    p.add_argument("--compare", action="store_true", help="also run the Monte Carlo and report |Δ|/σ")

    p = sub.add_parser("lattice", parents=[common], help="finite-difference solves and residual scaling")
    p.add_argument("--grid", type=int, default=65)
    p.add_argument("--spacing", type=float, required=True)
    p.add_argument("--boundary", choices=("free", "dirichlet-zero"), default="free")
    p.add_argument("--dump", metavar="PATH", help="write the free propagator of source 0 as flat binary")

    p = sub.add_parser("scaling-sweep", parents=[common, mc, quad], help="U' under uniform rescaling")
    p.add_argument("--lambda", dest="lambdas", type=float, action="append")
    p.add_argument("--evaluator", choices=("mc", "born"), default="mc")
    p.add_argument("--csv", metavar="PATH", help="write the sweep table as CSV ('-' for stdout)")

    p = sub.add_parser("force", parents=[common, mc, quad], help="force on a region by central differences")
    p.add_argument("--region-index", type=int, default=0)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--evaluator", choices=("born", "mc"), default="born")
    p.add_argument("--balance", action="store_true", help="also report the sum of all forces")
    return parser


def _mc_config(args) -> McConfig:
    return McConfig(n_samples=args.samples, n_batches=args.batches, seed=args.seed,
                    tail_scale=args.tail_scale, threads=args.threads)


def _quad_spec(args) -> BornQuadSpec:
    return BornQuadSpec(n_points=args.quad_points, rule=args.quad_rule)


def _est(e) -> dict:
    return {"value": e.value, "std_error": e.std_error, "n_samples": e.n_samples}


def _fmt_complex(z: complex) -> str:
    sign = "-" if z.imag < 0 else "+"
    return f"{z.real:.6f} {sign} {abs(z.imag):.6f}i"


# ---------------------------------------------------------------------------
# subcommands: each returns (results dict, table lines)


def _cmd_transform(args, scene):
    if not scene.regions:
        raise ValidationError("scene has no regions")
    momenta = args.p or [[0.0, 0.0, 0.0]]
    rows, lines = [], []
    for p in momenta:
        val = multi_region_transform(scene.regions, p)
        row = {"p": list(p), "re": val.real, "im": val.imag}
        line = f"p = ({p[0]:g}, {p[1]:g}, {p[2]:g})   j~ = {_fmt_complex(val)}"
        if args.numeric:
            num = sum(numeric_transform(r, p, 6.0 * r.max_axis + 2.0, args.numeric_points) for r in scene.regions)
            row["numeric"] = {"re": num.real, "im": num.imag}
            row["rel_diff"] = abs(num - val) / abs(val) if val else abs(num)
            line += f"   numeric = {_fmt_complex(num)}   rel.diff = {row['rel_diff']:.2e}"
        rows.append(row)
        lines.append(line)
    return {"values": rows}, lines


def _mc_results(scene, cfg):
    tc = total_correction(scene, cfg)
    pairs = [
        {"j": pc.source_index_j, "l": pc.source_index_l, **_est(pc.estimate),
         "imag": pc.imag.value, "imag_std_error": pc.imag.std_error, "rejected": pc.rejected}
        for pc in tc.pairs
    ]
    return tc, {
        "pairs": pairs,
        "total": _est(tc.estimate),
        "self_part": _est(tc.self_part),
        "cross_part": _est(tc.cross_part),
        "imag_total": _est(tc.imag),
        "rejected": tc.rejected,
    }


def _cmd_uprime(args, scene):
    cfg = _mc_config(args)
    tc, res = _mc_results(scene, cfg)
    u0 = free_potential(scene) if len(scene.sources) > 1 else 0.0
    res["U0"] = u0
    res["gamma_Uprime"] = _est(tc.estimate.scaled(scene.gamma))
    lines = [f"{'j':>3} {'l':>3} {'value':>14} {'std_error':>11} {'n_samples':>10} {'imag/σ':>8} {'rejected':>8}"]
    for r in res["pairs"]:
        isig = r["imag"] / r["imag_std_error"] if r["imag_std_error"] else 0.0
        lines.append(f"{r['j']:>3} {r['l']:>3} {r['value']:>14.6e} {r['std_error']:>11.3e} "
                     f"{r['n_samples']:>10d} {isig:>8.2f} {r['rejected']:>8d}")
    t = tc.estimate
    lines += [
        f"U' total   = {t.value:.6e} ± {t.std_error:.2e}  (self {tc.self_part.value:.4e}, cross {tc.cross_part.value:.4e})",
        f"U0         = {u0:.6e}",
        f"gamma*U'   = {scene.gamma * t.value:.6e} ± {scene.gamma * t.std_error:.2e}",
    ]
    return res, lines


def _cmd_oracle(args, scene):
    spec = _quad_spec(args)
    bt = born_total(scene, spec)
    conv = born_convergence(scene, BornQuadSpec(half_extent_factor=spec.half_extent_factor,
                                                n_points=max(spec.n_points // 2, 2), rule=spec.rule), levels=2)
    res = {
        "pairs": [{"j": j, "l": l, "value": v} for j, l, v in bt.pairs],
        "total": bt.value,
        "self_part": bt.self_part,
        "cross_part": bt.cross_part,
        "convergence": {"n_points": list(conv.n_points), "values": list(conv.values)},
    }
    lines = [f"{'j':>3} {'l':>3} {'born':>14}"]
    lines += [f"{j:>3} {l:>3} {v:>14.8e}" for j, l, v in bt.pairs]
    lines.append(f"U' total (born) = {bt.value:.8e}   change n/2→n: {conv.changes[0]:.2e}")
    if args.compare:
        tc, mres = _mc_results(scene, _mc_config(args))
        sigma = tc.estimate.std_error
        disc = abs(tc.estimate.value - bt.value) / sigma if sigma > 0 else math.inf
        res["monte_carlo"] = mres
        res["discrepancy_sigma"] = disc
        lines.append(f"U' total (mc)   = {tc.estimate.value:.8e} ± {sigma:.2e}")
        lines.append(f"|Δ|/σ = {disc:.3f}")
    return res, lines


def _cmd_lattice(args, scene):
    validate_scene(scene)
    if not scene.regions or not scene.sources:
        raise ValidationError("lattice needs at least one region and one source")
    half = 0.5 * (args.grid - 1) * args.spacing
    grid = GridSpec(args.grid, args.spacing, (-half, -half, -half), args.boundary)
    n = len(scene.sources)
    spec = BornQuadSpec()
    bt = born_total(scene, spec)
    born = {(j, l): v for j, l, v in bt.pairs}
    rows, lines = [], [f"{'j':>3} {'l':>3} {'lattice':>14} {'born':>14} {'rel.diff':>10}"]
    for j in range(n):
        for l in range(j, n):
            lat = lattice_pair_correction(grid, scene, j, l)
            rel = lat / born[(j, l)] - 1.0
            rows.append({"j": j, "l": l, "lattice": lat, "born": born[(j, l)], "rel_diff": rel})
            lines.append(f"{j:>3} {l:>3} {lat:>14.8e} {born[(j, l)]:>14.8e} {rel:>10.2e}")
    res = {"grid": {"n": grid.n, "spacing": grid.spacing, "origin": list(grid.origin),
                    "boundary": grid.boundary}, "pairs": rows}
    if scene.gamma > 0 and n >= 2:
        r1, r2 = perturbation_residual(grid, scene, scene.sources[0].position, scene.sources[1].position)
        res["residual"] = {"gamma": r1, "half_gamma": r2, "ratio": r1 / r2 if r2 else math.inf}
        lines.append(f"residual(γ) = {r1:.4e}   residual(γ/2) = {r2:.4e}   ratio = {res['residual']['ratio']:.3f}")
    if args.dump:
        g0 = solve_green(grid, 0.0, scene.regions, scene.sources[0].position)
        dump_field(g0, args.dump)
        res["dump"] = args.dump
        lines.append(f"free propagator of source 0 written to {args.dump}")
    return res, lines


def _sweep_csv(sweep) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "value", "std_error", "n_samples"])
    for lam, e in sweep.rows():
        w.writerow([repr(lam), repr(e.value), repr(e.std_error), e.n_samples])
    return buf.getvalue()


def _cmd_sweep(args, scene):
    lambdas = args.lambdas or [0.5, 1.0, 2.0, 4.0]
    cfg = _mc_config(args) if args.evaluator == "mc" else _quad_spec(args)
    sweep = scaling_sweep(scene, lambdas, cfg)
    res = {
        "evaluator": args.evaluator,
        "rows": [{"lambda": lam, **_est(e)} for lam, e in sweep.rows()],
        "exponent": sweep.fit.exponent,
        "exponent_error": sweep.fit.exponent_error,
    }
    lines = [f"{'lambda':>8} {'U_prime':>14} {'std_error':>11}"]
    lines += [f"{lam:>8g} {e.value:>14.6e} {e.std_error:>11.3e}" for lam, e in sweep.rows()]
    lines.append(f"fitted exponent = {sweep.fit.exponent:.4f} ± {sweep.fit.exponent_error:.4f}")
    if args.csv:
        text = _sweep_csv(sweep)
        if args.csv == "-":
            sys.stdout.write(text)
        else:
            with open(args.csv, "w") as fh:
                fh.write(text)
        res["csv"] = args.csv
    return res, lines


def _cmd_force(args, scene):
    validate_scene(scene)
    cfg = _mc_config(args) if args.evaluator == "mc" else _quad_spec(args)
    h = args.fd_step if args.fd_step is not None else default_step(scene)
    f = force(scene, args.region_index, h, cfg)
    res = {"region_index": args.region_index, "fd_step": h, "evaluator": args.evaluator, "force": f.tolist()}
    lines = [f"force on region {args.region_index} (fd-step {h:g}, {args.evaluator}) = "
             f"({f[0]:.6e}, {f[1]:.6e}, {f[2]:.6e})"]
    if args.balance:
        total, scale, _ = force_balance(scene, h, cfg)
        res["balance"] = {"sum": total.tolist(), "relative": float(np.max(np.abs(total)) / scale) if scale else 0.0}
        lines.append(f"sum of all forces = ({total[0]:.3e}, {total[1]:.3e}, {total[2]:.3e})  "
                     f"relative {res['balance']['relative']:.2e}")
    return res, lines


COMMANDS = {
    "transform": _cmd_transform,
    "uprime": _cmd_uprime,
    "oracle": _cmd_oracle,
    "lattice": _cmd_lattice,
    "scaling-sweep": _cmd_sweep,
    "force": _cmd_force,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    t0 = time.perf_counter()
    try:
        scene = validate_scene(load_scene(args.scene))
        results, lines = COMMANDS[args.command](args, scene)
    except BadConfig as exc:
        print(f"BadConfig: {exc}", file=stderr)
        return 2
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=stderr)
        return 2
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=stderr)
        return 3
    elapsed = time.perf_counter() - t0
    config = {k: v for k, v in vars(args).items() if k not in ("command",)}
    report = {
        "subcommand": args.command,
        "scene_digest": scene_digest(scene),
        "convention": CONVENTION,
        "units": UNITS,
        "config": config,
        "results": results,
        "timings": {"wall_seconds": elapsed},
    }
    if args.format == "json":
        json.dump(report, stdout, indent=2, default=float)
        stdout.write("\n")
    elif not (args.command == "scaling-sweep" and args.csv == "-"):
        print(f"# {args.command}  scene {report['scene_digest'][:16]}  convention: {CONVENTION}", file=stdout)
        for line in lines:
            print(line, file=stdout)
        print(f"# wall time {elapsed:.2f} s", file=stdout)
    return 0


def main():  # pragma: no cover - console entry point
    sys.exit(run())
