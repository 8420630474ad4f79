"""Command-line interface.

Exit codes: 0 all checks pass, 1 a verification failed, 2 configuration
error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .aniso_core import AnisotropicCoefficients
from .config import ConfigError, ScenarioConfig, preset_config
from .elliptic import ConvergenceError
from .harness import DEFAULT_LORENTZ
from .parabolic import StepFailure
from .profiles import GridFunction
from .radial import smallest_dirichlet_eigenvalue
from .rearrange import decreasing_rearrangement
from .runner import EXIT_CONFIG, EXIT_PASS, EXIT_SOLVER, EXIT_VERIFY, compare_directories, elliptic_comparison, run_scenario

log = logging.getLogger("anisoparab")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load(args, config: str | None = None) -> ScenarioConfig:
    """Config from --config (or the given path) or --preset, with CLI overrides applied."""
    path = config or args.config
    if path and args.preset:
        raise ConfigError("<cli>", "give either --config or --preset, not both")
    if path:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"{path}: invalid JSON ({exc})") from exc
        base = Path(path).parent
        if args.seed is not None and isinstance(doc.get("u0"), dict) and doc["u0"].get("preset") == "random":
            doc["u0"]["seed"] = args.seed
    elif args.preset:
        doc = preset_config(args.preset, args.seed)
        base = Path.cwd()
    else:
        raise ConfigError("<cli>", "a --config file or --preset name is required")
    tol = dict(doc.get("tolerances") or {})
    if args.tol_elliptic is not None:
        tol["elliptic"] = args.tol_elliptic
    if args.tol_radial is not None:
        tol["radial"] = args.tol_radial
    if args.margin is not None:
        tol["margin"] = args.margin
    if tol:
        doc["tolerances"] = tol
    return ScenarioConfig.from_dict(doc, base)


def _cmd_lambda(args) -> int:
    c = AnisotropicCoefficients(args.alphas, args.exponents)
    print(repr(c.lambda_const))
    return EXIT_PASS


def _cmd_eigen(args) -> int:
    print(repr(smallest_dirichlet_eigenvalue(args.radius, args.dim)))
    return EXIT_PASS


def _cmd_rearrange(args) -> int:
    prof = decreasing_rearrangement(GridFunction.from_csv(args.field))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        prof.to_csv(args.out)
    else:
        print("s,level")
        for s, v in zip(prof.breakpoints[1:], prof.levels):
            print(f"{float(s)!r},{float(v)!r}")
    return EXIT_PASS


def _cmd_elliptic(args) -> int:
    cfg = _load(args)
    res, w, z = elliptic_comparison(cfg, args.lam)
    summary = {"D": res.D, "argmax_s": res.argmax_s, "eta": res.eta, "passed": res.passed,
               "iterations": res.iterations, "lambda": args.lam}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
        w.to_csv(out / "anisotropic.csv")
        z.to_csv(out / "symmetrized.csv")
    print(f"D = {res.D:.6e}  eta = {res.eta:.3e}  {'PASS' if res.passed else 'FAIL'}")
    return EXIT_PASS if res.passed else EXIT_VERIFY


def _run_one(config: str | None, args) -> tuple[str, int, str]:
    label = config or args.preset
    try:
        cfg = _load(args, config)
        out = args.out
        if out is not None and config is not None and len(args.configs or []) > 1:
            out = str(Path(out) / Path(config).stem)
        result = run_scenario(cfg, out)
    except ConfigError as exc:
        return label, EXIT_CONFIG, f"config error: {exc}"
    except (StepFailure, ConvergenceError) as exc:
        return label, EXIT_SOLVER, f"solver failure: {exc}"
    s = result.report.summary()
    msg = f"max D = {s['max_D']:.3e}  eta = {s['eta']:.3e}  checks = {s['checks']}  {'PASS' if s['passed'] else 'FAIL'}"
    return label, result.exit_code, msg


def _cmd_parabolic(args) -> int:
    configs = list(args.configs or [])
    if args.config:
        configs.insert(0, args.config)
    if not configs:
        configs = [None]
    if len(configs) > 1 and args.jobs > 1:
        # scenarios are independent; one worker each
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, configs, [args] * len(configs)))
    else:
        results = [_run_one(c, args) for c in configs]
    for label, _, msg in results:
        print(f"{label}: {msg}")
    return max(code for _, code, _ in results)


def _cmd_compare(args) -> int:
    pq = DEFAULT_LORENTZ if args.lorentz else None
    report = compare_directories(args.u_dir, args.v_dir, args.margin, pq_list=pq)
    if args.out:
        report.write(args.out)
    s = report.summary()
    print(f"max D = {s['max_D']:.3e}  eta = {s['eta']:.3e}  {'PASS' if s['passed'] else 'FAIL'}")
    return EXIT_PASS if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--preset", help="named scenario preset (zero, model-p2, decay-p2)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol-elliptic", type=float, dest="tol_elliptic")
    common.add_argument("--tol-radial", type=float, dest="tol_radial")
    common.add_argument("--margin", type=float, help="comparison margin eta (default c(h + delta + sqrt(eps)))")
    common.add_argument("--seed", type=int, help="seed for random presets")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="anisoparab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lambda", parents=[common], help="print the symmetrization constant")
    p.add_argument("--alphas", type=_floats, required=True)
    p.add_argument("--exponents", type=_floats, required=True)
    p.set_defaults(func=_cmd_lambda)

    p = sub.add_parser("eigen", parents=[common], help="first Dirichlet eigenvalue of the ball")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=2)
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("rearrange", parents=[common], help="grid field CSV -> decreasing profile CSV")
    p.add_argument("field")
    p.set_defaults(func=_cmd_rearrange)

    p = sub.add_parser("elliptic", parents=[common], help="stationary solve compared with its radial counterpart")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.set_defaults(func=_cmd_elliptic)

    p = sub.add_parser("parabolic", parents=[common], help="full scenario run")
    p.add_argument("configs", nargs="*", help="additional scenario files, run independently")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_parabolic)

    p = sub.add_parser("compare", parents=[common], help="compare two saved trajectory directories")
    p.add_argument("u_dir")
    p.add_argument("v_dir")
    p.add_argument("--lorentz", action="store_true", help="also tabulate the default Lorentz norms")
    p.set_defaults(func=_cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, ConvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
