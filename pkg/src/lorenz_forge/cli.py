"""Command-line interface: ``lorenz-forge {henon,model,replay} ...``.

Exit codes: 0 success, 2 invalid input (flags, configuration, violated
model condition), 3 numerical failure (escape, chart exit, no convergence).
Commands that write a file (``--out``) also write ``<file>.manifest.json``;
``lorenz-forge replay <manifest>`` re-runs the command and compares digests.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import io
from .dynamics import Budget
from .errors import ChartExit, ComputationError, DomainError, LorenzForgeError, ValidationError
from .henon3d import (
    Henon3DParams,
    default_seed,
    find_codim3_point,
    henon_fixed_points,
    henon_step,
    lyapunov_spectrum,
    multipliers,
)
from .hetero_model import (
    Case,
    MuVector,
    build_model,
    condition_report,
    config_to_dict,
    demo_config,
    load_config,
)
from .rescaling import from_henon, params_invert_corrected, predicted_decay, residual_sup
from .return_map import ReturnIndex, admissible_window, compose, jacobian_product, return_jacobian
from .scanner import (
    HENON_AXES,
    Axis,
    DomainReport,
    GridSpec,
    HenonBox,
    SeedPolicy,
    henon_scan,
    index_ladder,
    map_domains,
    verify_domain,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _finite(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return v


def _positive(text):
    v = _count(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _axis(text):
    parts = text.split(":")
    if len(parts) != 4 or parts[0] not in HENON_AXES:
        raise argparse.ArgumentTypeError(f"expected NAME:MIN:MAX:COUNT with NAME in {HENON_AXES}, got {text!r}")
    try:
        return Axis(parts[0], _finite(parts[1]), _finite(parts[2]), _positive(parts[3]))
    except (argparse.ArgumentTypeError, DomainError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fixed(text):
    name, _, value = text.partition("=")
    if name not in HENON_AXES or not value:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {HENON_AXES}, got {text!r}")
    return name, _finite(value)


# ----------------------------------------------------------------------------
# output


def _emit(args, text: str, started: float) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    manifest = io.RunManifest(args.command, _resolved(args), getattr(args, "_config_doc", None))
    io.write_artifact(args.out, text, manifest, started)


_NOT_RECORDED = {"handler", "out", "threads", "_config_doc", "config", "demo", "group", "sub", "command"}


def _resolved(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _NOT_RECORDED}


def _budget(args) -> Budget:
    try:
        return Budget(args.n_transient, args.n_iterates, args.escape_radius, args.q_max, args.closure_tol,
                      args.eps, args.eps)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc


def _henon_params(args) -> Henon3DParams:
    return Henon3DParams(args.m1, args.m2, args.b)


# ----------------------------------------------------------------------------
# henon


def cmd_henon_iterate(args, started):
    p = _henon_params(args)
    s = (args.x0, args.y0, args.z0)
    states = []
    for _ in range(args.n):
        s = henon_step(s, p)
        states.append(s)
    _emit(args, io.orbit_csv(states), started)


def cmd_henon_fixed_points(args, started):
    p = _henon_params(args)
    pts = [{"state": list(fp), "multipliers": [complex(m) for m in multipliers(p, fp)]} for fp in henon_fixed_points(p)]
    _emit(args, io.dumps(io.document("FixedPoints", {"params": p, "fixed_points": pts})), started)


def cmd_henon_lyapunov(args, started):
    p = _henon_params(args)
    seed = default_seed(p) if args.x0 is None else (args.x0, args.y0 or 0.0, args.z0 or 0.0)
    spec = lyapunov_spectrum(p, seed, args.n_transient, args.n_iterates, args.escape_radius)
    _emit(args, io.dumps(io.document("LyapunovSpectrum", {"params": p, "seed": list(seed), "spectrum": spec})),
          started)


def cmd_henon_scan(args, started):
    fixed = dict(args.fixed or [])
    grid = GridSpec(args.axis1, args.axis2, fixed, _budget(args), SeedPolicy(args.seed_policy))
    cells = henon_scan(grid, threads=args.threads)
    _emit(args, io.scan_csv(cells), started)


def cmd_henon_codim3(args, started):
    p, fp = find_codim3_point()
    mult = multipliers(p, fp)
    img = henon_step(fp, p)
    want = np.array([-1.0, -1.0, 1.0])
    got = np.sort_complex(np.asarray(mult, dtype=complex)).real
    payload = {
        "M1": p.m1, "B": p.b, "M2": p.m2,
        "fixed_point": list(fp),
        "multipliers": [complex(m) for m in mult],
        "residuals": {
            "fixed_point": max(abs(a - b) for a, b in zip(img, fp)),
            "multipliers": float(np.max(np.abs(got - want))),
        },
    }
    _emit(args, io.dumps(io.document("Codim3Point", payload)), started)


# ----------------------------------------------------------------------------
# model


def _load(args):
    if args.demo is not None:
        cfg = demo_config(args.demo)
    elif args.config is not None:
        cfg = load_config(args.config)
    else:
        raise DomainError("one of --config or --demo is required")
    args._config_doc = config_to_dict(cfg)
    return cfg


def _mu(args) -> MuVector:
    return MuVector(args.mu1, args.mu2, args.mu3)


def _numerics(cfg) -> dict:
    return io.resolve_numerics(cfg.numerics)


def _check_case(args, model):
    if args.case is not None and Case(args.case) is not model.case_tag:
        raise DomainError(f"configuration is {model.case_tag.value}, not {args.case}")


def cmd_model_check(args, started):
    cfg = _load(args)
    report = condition_report(cfg)
    lines = [f"{r.name:<4} {'ok' if r.ok else 'FAILED':<6} {r.detail}" for r in report]
    sys.stdout.write("\n".join(lines) + "\n")
    failed = [r for r in report if not r.ok]
    if failed:
        sys.stderr.write(f"condition {failed[0].name} violated: {failed[0].detail}\n")
        return EXIT_INVALID
    _numerics(cfg)
    return EXIT_OK


def cmd_model_classify_case(args, started):
    model = build_model(_load(args))
    sys.stdout.write(model.case_tag.value + "\n")


def cmd_model_return_map(args, started):
    model = build_model(_load(args), _mu(args))
    _check_case(args, model)
    idx = ReturnIndex(args.i, args.j)
    win = admissible_window(model, idx)
    payload = {
        "idx": idx,
        "mu": model.mu,
        "window": {"y_interval": win.y_interval, "v_interval": win.v_interval, "x_box": win.x_box,
                   "i0": win.i0, "j0": win.j0},
        "jacobian_product": jacobian_product(model, idx),
    }
    if args.point is not None:
        payload["point"] = list(args.point)
        payload["image"] = [float(v) for v in compose(model, idx, args.point)]
        payload["jacobian"] = return_jacobian(model, idx, args.point).astype(float)
    _emit(args, io.dumps(io.document("ReturnMap", payload)), started)


def cmd_model_rescale_residual(args, started):
    cfg = _load(args)
    num = _numerics(cfg)
    halfwidth = args.halfwidth if args.halfwidth is not None else num["residual_halfwidth"]
    grid = args.grid if args.grid is not None else num["residual_grid"]
    model0 = build_model(cfg)
    _check_case(args, model0)
    case = model0.case_tag

    def at(idx):
        if args.target is None:
            model = build_model(cfg, _mu(args))
            return model.mu, residual_sup(model, idx, box_halfwidth=halfwidth, grid_n=grid)
        target = from_henon(case, Henon3DParams(*args.target))
        mu, rmap = params_invert_corrected(cfg, idx, target, tol=num["invert_tol"])
        return mu, residual_sup(rmap.model, idx, rescaled=rmap, box_halfwidth=halfwidth, grid_n=grid)

    idx = ReturnIndex(args.i, args.j)
    mu, res = at(idx)
    sys.stdout.write(f"residual_sup {io.fmt(res)}\n")
    payload = {"idx": idx, "mu": mu, "residual": res, "predicted": predicted_decay(build_model(cfg, mu), idx),
               "box_halfwidth": halfwidth, "grid_n": grid}
    if args.ladder:
        if args.target is None:
            raise DomainError("--ladder needs --target (the rungs hold its Bij fixed)")
        lad = index_ladder(model0, args.target[2], args.i + args.ladder - 1, min_rung=args.i)
        rows = []
        for r in lad.rungs:
            mu_r, res_r = at(r.idx)
            rows.append({"idx": r.idx, "residual": res_r, "predicted": predicted_decay(build_model(cfg, mu_r), r.idx)})
        n = np.array([r["idx"].i + r["idx"].j for r in rows], dtype=float)
        fit = {}
        if len(rows) >= 2:
            fit = {
                "slope": float(np.polyfit(n, np.log([r["residual"] for r in rows]), 1)[0]),
                "predicted_slope": float(np.polyfit(n, np.log([r["predicted"] for r in rows]), 1)[0]),
            }
            sys.stdout.write(f"ladder_slope {io.fmt(fit['slope'])} predicted {io.fmt(fit['predicted_slope'])}\n")
        payload["ladder"] = rows
        payload["fit"] = fit
    if args.out is not None:
        _emit(args, io.dumps(io.document("RescaleResidual", payload)), started)


def cmd_model_domain_map(args, started):
    cfg = _load(args)
    num = _numerics(cfg)
    model = build_model(cfg)
    case = Case(args.case) if args.case is not None else model.case_tag
    box = HenonBox(tuple(args.m1), tuple(args.m2), tuple(args.b))
    target_bij = box.center.b
    lad = index_ladder(model, target_bij, args.max_rung, min_rung=args.min_rung)
    reports = map_domains(cfg, case, lad, box, verify=not args.no_verify, budget=Budget(**num["verify_budget"]),
                          threads=args.threads, residual_box=num["residual_halfwidth"],
                          residual_grid=num["residual_grid"])
    payload = {
        "case": case,
        "box": {"m1": box.m1, "m2": box.m2, "b": box.b},
        "ladder": [{"idx": r.idx, "defect": r.defect, "mu3": r.mu3} for r in lad.rungs],
        "domains": reports,
        "first_confirmed": next((r.idx for r in reports if r.confirmed), None),
    }
    _emit(args, io.dumps(io.document("DomainReports", payload)), started)


def cmd_model_verify(args, started):
    cfg = _load(args)
    num = _numerics(cfg)
    model = build_model(cfg)
    case = Case(args.case) if args.case is not None else model.case_tag
    target = from_henon(case, Henon3DParams(*args.target))
    idx = ReturnIndex(args.i, args.j)
    mu, _ = params_invert_corrected(cfg, idx, target, tol=num["invert_tol"])
    rep = verify_domain(cfg, case, DomainReport(idx, target, mu_corrected=mu), Budget(**num["verify_budget"]))
    payload = {"idx": idx, "target": target, "mu_corrected": mu, "report": rep}
    _emit(args, io.dumps(io.document("AttractorReport", payload)), started)


# ----------------------------------------------------------------------------
# replay


def cmd_replay(args, started):
    manifest = io.RunManifest.load(args.manifest)
    if len(manifest.outputs) != 1:
        raise DomainError("manifest must record exactly one output")
    (name, digest), = manifest.outputs.items()
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(args.out) if args.out else Path(tmp) / name
        argv = _argv_from(manifest, out, Path(tmp))
        code = main(argv)
        if code != EXIT_OK:
            return code
        got = io.sha256_file(out)
    if got != digest:
        sys.stderr.write(f"replay mismatch: {name} has sha256 {got}, manifest records {digest}\n")
        return EXIT_NUMERIC
    sys.stdout.write(f"replay ok: {name} sha256 {got}\n")
    return EXIT_OK


def _argv_from(manifest, out: Path, tmp: Path) -> list[str]:
    """Rebuild a command line from the recorded arguments."""
    sub_parser = build_parser().commands.get(manifest.command)
    if sub_parser is None:
        raise DomainError(f"manifest names an unknown command {manifest.command!r}")
    argv = [*manifest.command.split(" "), "--out", str(out)]
    if manifest.config is not None:
        cfg_path = tmp / "config.json"
        cfg_path.write_text(json.dumps(manifest.config))
        argv += ["--config", str(cfg_path)]
    for action in sub_parser._actions:
        dest = action.dest
        if dest not in manifest.arguments or not action.option_strings:
            continue
        value = manifest.arguments[dest]
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is None:
            continue
        elif action.nargs in ("*", "+") or isinstance(action.nargs, int):
            argv.append(flag)
            argv += [_arg_text(v) for v in value]
        elif action.dest == "fixed":
            for name, v in value:
                argv += [flag, f"{name}={io.fmt(v)}"]
        else:
            argv += [flag, _arg_text(value)]
    return argv


def _arg_text(v) -> str:
    if isinstance(v, dict) and set(v) == {"name", "lo", "hi", "count"}:
        return f"{v['name']}:{io.fmt(v['lo'])}:{io.fmt(v['hi'])}:{v['count']}"
    if isinstance(v, float):
        return io.fmt(v)
    return str(v)


# ----------------------------------------------------------------------------
# parser


def _add_out(p):
    p.add_argument("--out", type=Path, help="write the result here (plus a .manifest.json); default stdout")


def _add_params(p, required=True):
    for name in HENON_AXES:
        p.add_argument(f"--{name}", type=_finite, required=required)


def _add_budget(p):
    b = Budget()
    p.add_argument("--n-transient", type=_count, default=b.n_transient)
    p.add_argument("--n-iterates", type=_positive, default=b.n_iterates)
    p.add_argument("--escape-radius", type=_finite, default=b.escape_radius)
    p.add_argument("--q-max", type=_positive, default=b.q_max)
    p.add_argument("--closure-tol", type=_finite, default=b.closure_tol)
    p.add_argument("--eps", type=_finite, default=b.eps_pos, help="zero/positive threshold for exponents")


def _add_model(p, index=False, mu=False):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="model configuration (JSON)")
    src.add_argument("--demo", choices=[c.value for c in Case], help="use a shipped demo configuration")
    p.add_argument("--case", choices=[c.value for c in Case], help="expected case (checked)")
    if index:
        p.add_argument("--i", type=_positive, required=True)
        p.add_argument("--j", type=_positive, required=True)
    if mu:
        p.add_argument("--mu1", type=_finite, default=0.0)
        p.add_argument("--mu2", type=_finite, default=0.0)
        p.add_argument("--mu3", type=_finite, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lorenz-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=_positive, default=None,
                        help="worker threads (default: LORENZ_FORGE_THREADS or available parallelism)")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)
    #: "group sub" -> subcommand parser (replay rebuilds argv from it)
    parser.commands = {}

    def group(name, help_text):
        inner = groups.add_parser(name, help=help_text).add_subparsers(dest="sub", required=True, parser_class=_Parser)
        inner.group_name = name
        return inner

    def sub(inner, name, handler, help_text):
        command = f"{inner.group_name} {name}"
        p = inner.add_parser(name, help=help_text)
        p.set_defaults(handler=handler, command=command)
        parser.commands[command] = p
        return p

    h = group("henon", "3D Henon map")
    p = sub(h, "iterate", cmd_henon_iterate, "iterate and write the orbit as CSV")
    _add_params(p)
    p.add_argument("--n", type=_count, required=True)
    for name in ("x0", "y0", "z0"):
        p.add_argument(f"--{name}", type=_finite, default=0.0)
    _add_out(p)

    p = sub(h, "fixed-points", cmd_henon_fixed_points, "fixed points and multipliers (JSON)")
    _add_params(p)
    _add_out(p)

    p = sub(h, "lyapunov", cmd_henon_lyapunov, "Lyapunov spectrum of one orbit (JSON)")
    _add_params(p)
    for name in ("x0", "y0", "z0"):
        p.add_argument(f"--{name}", type=_finite, default=None, help="seed (default: fixed point + 1e-3)")
    p.add_argument("--n-transient", type=_count, default=Budget().n_transient)
    p.add_argument("--n-iterates", type=_positive, default=Budget().n_iterates)
    p.add_argument("--escape-radius", type=_finite, default=Budget().escape_radius)
    _add_out(p)

    p = sub(h, "scan", cmd_henon_scan, "classify a 2D parameter grid (CSV)")
    p.add_argument("--axis1", type=_axis, required=True, help="NAME:MIN:MAX:COUNT")
    p.add_argument("--axis2", type=_axis, required=True, help="NAME:MIN:MAX:COUNT")
    p.add_argument("--fixed", type=_fixed, action="append", help="NAME=VALUE for the third parameter")
    p.add_argument("--seed-policy", choices=[s.value for s in SeedPolicy], default=SeedPolicy.FIXED_POINT.value)
    _add_budget(p)
    _add_out(p)

    p = sub(h, "codim3", cmd_henon_codim3, "the point with multipliers (-1, -1, +1) (JSON)")
    _add_out(p)

    m = group("model", "heteroclinic-cycle models")
    p = sub(m, "check", cmd_model_check, "report the structural conditions")
    _add_model(p)
    p = sub(m, "classify-case", cmd_model_classify_case, "print the degenerate case")
    _add_model(p)

    p = sub(m, "return-map", cmd_model_return_map, "window, Jacobian product and optional evaluation (JSON)")
    _add_model(p, index=True, mu=True)
    p.add_argument("--point", type=_finite, nargs=3, metavar=("X1", "X2", "Y"))
    _add_out(p)

    p = sub(m, "rescale-residual", cmd_model_rescale_residual, "residual against the limit map")
    _add_model(p, index=True, mu=True)
    p.add_argument("--target", type=_finite, nargs=3, metavar=("M1", "M2", "B"),
                   help="Henon-side target; mu is then solved so the measured limit parameters hit it")
    p.add_argument("--halfwidth", type=_finite, default=None)
    p.add_argument("--grid", type=_positive, default=None)
    p.add_argument("--ladder", type=_positive, default=0, help="also evaluate this many ladder rungs and fit")
    _add_out(p)

    p = sub(m, "domain-map", cmd_model_domain_map, "parameter domains along an index ladder (JSON)")
    _add_model(p)
    for name in HENON_AXES:
        p.add_argument(f"--{name}", type=_finite, nargs=2, required=True, metavar=("MIN", "MAX"))
    p.add_argument("--max-rung", type=_positive, required=True)
    p.add_argument("--min-rung", type=_positive, default=None)
    p.add_argument("--no-verify", action="store_true")
    _add_out(p)

    p = sub(m, "verify", cmd_model_verify, "classify the return map at a Henon-side target (JSON)")
    _add_model(p, index=True)
    p.add_argument("--target", type=_finite, nargs=3, metavar=("M1", "M2", "B"), required=True)
    _add_out(p)

    r = groups.add_parser("replay", help="re-run a manifest and compare output digests")
    r.add_argument("manifest", type=Path)
    r.add_argument("--out", type=Path, default=None)
    r.set_defaults(handler=cmd_replay, command="replay")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.time()
    try:
        code = args.handler(args, started)
    except ChartExit as exc:
        sys.stderr.write(f"chart exit at stage {exc.stage}: {exc}\n")
        return EXIT_NUMERIC
    except (ValidationError, DomainError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except (ComputationError, LorenzForgeError, ArithmeticError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK if code is None else int(code)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
