"""Command line front-end.

Four subcommands cover the workflow: `normal-form` puts a skew matrix
into block form, `build` constructs the commuting family for a model,
`verify` runs the full verification pass over a family file, `simulate`
integrates one trajectory and reports conservation drifts.

Exit codes: 0 success, 1 verification or tolerance failure (including
integrator step failures), 2 input error.  All artifacts are
deterministic for a fixed config and seed and embed the tool version,
the config echo, and the seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, sampling
from .errors import InputError, StepError
from .exactpoly import parse_rational
from .flow import drift_report, integrate, picture_map, project_initial, write_csv
from .integral_family import IntegralFamily, commuting_basis
from .magnetic_model import MagneticModel, skew_normal_form
from .verify import run_verification

_STREAM_SIMULATE = 4
DEFAULT_DRIFT_TOL = 1e-5


def _parse_alphas(text: str):
    parts = [chunk.strip() for chunk in text.split(",")]
    if not all(parts):
        raise InputError(f"malformed alpha list: {text!r}")
    return tuple(parse_rational(part) for part in parts)


def _artifact(kind: str, config: dict, seed: int, payload: dict) -> dict:
    out = {
        "artifact": kind,
        "version": __version__,
        "seed": seed,
        "config": config,
    }
    out.update(payload)
    return out


def _write_json(path: str, obj: dict):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def cmd_normal_form(args) -> int:
    data = _load_json(args.infile)
    if isinstance(data, dict):
        for key in ("omega", "matrix"):
            if key in data:
                data = data[key]
                break
        else:
            raise InputError(f"{args.infile} must contain an 'omega' matrix")
    try:
        omega = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{args.infile} does not contain a numeric matrix") from None
    form = skew_normal_form(omega)
    config = {"command": "normal-form", "in": args.infile, "out": args.out}
    _write_json(args.out, _artifact("skew-normal-form", config, 0, {"normal_form": form.to_dict()}))
    return 0


def cmd_build(args) -> int:
    alphas = _parse_alphas(args.alpha)
    model = MagneticModel(n=args.n, alphas=alphas)
    family = commuting_basis(model)
    config = {"command": "build", "n": args.n, "alpha": args.alpha, "out": args.out}
    _write_json(args.out, _artifact("integral-family", config, 0, {"family": family.to_dict()}))
    return 0


def cmd_verify(args) -> int:
    data = _load_json(args.family)
    payload = data.get("family", data) if isinstance(data, dict) else None
    if not isinstance(payload, dict):
        raise InputError(f"{args.family} does not contain a family")
    family = IntegralFamily.from_dict(payload)
    report = run_verification(family, samples=args.samples, seed=args.seed)
    config = {
        "command": "verify",
        "family": args.family,
        "samples": args.samples,
        "seed": args.seed,
        "report": args.report,
    }
    _write_json(
        args.report,
        _artifact("verification-report", config, args.seed, {"report": report.to_dict()}),
    )
    status = "PASS" if report.passed else "FAIL"
    print(f"verification {status} (report: {args.report})")
    return 0 if report.passed else 1


def _initial_state(args, model: MagneticModel):
    if args.init is not None:
        data = _load_json(args.init)
        try:
            x = np.array(data["x"], dtype=float)
            p = np.array(data["p"], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise InputError(f"{args.init} must contain float arrays 'x' and 'p'") from None
        if x.shape != (model.n + 1,) or p.shape != (model.n + 1,):
            raise InputError(f"initial state must have {model.n + 1} components")
        x, p = project_initial(x, p)
        if not args.no_normalize:
            norm = float(np.linalg.norm(p))
            if norm == 0.0:
                raise InputError("initial momentum is zero; cannot normalize")
            p = p / norm
        return x, p
    rng = sampling.generator(args.seed, _STREAM_SIMULATE)
    return sampling.constrained_point(rng, model.n)


def cmd_simulate(args) -> int:
    alphas = _parse_alphas(args.alpha)
    model = MagneticModel(n=args.n, alphas=alphas)
    family = commuting_basis(model)
    x0, p0 = _initial_state(args, model)

    config = {
        "command": "simulate",
        "n": args.n,
        "alpha": args.alpha,
        "dt": args.dt,
        "steps": args.steps,
        "record_every": args.record_every,
        "tol": args.tol,
        "init": args.init,
        "check_picture": args.check_picture,
        "out": args.out,
    }
    record = integrate(
        model, x0, p0, dt=args.dt, steps=args.steps,
        record_every=args.record_every, family=family,
    )
    drift = drift_report(record)
    if args.check_picture:
        drift["picture"] = drift_report(picture_map(record, model))

    csv_path = f"{args.out}.csv"
    write_csv(record, csv_path, extra_meta={
        "version": __version__, "seed": args.seed, "config": config,
    })
    drift_path = f"{args.out}.drift.json"
    rel_drifts = [entry["max_rel_drift"] for entry in drift["series"].values()]
    if args.check_picture:
        rel_drifts += [entry["max_rel_drift"] for entry in drift["picture"]["series"].values()]
    passed = all(d <= args.tol for d in rel_drifts)
    _write_json(drift_path, _artifact("drift-report", config, args.seed, {
        "drift": drift,
        "tol": args.tol,
        "passed": passed,
    }))
    status = "PASS" if passed else "FAIL"
    print(f"simulate {status} (max relative drift {max(rel_drifts):.3e}, tol {args.tol:g})")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magneflow",
        description="Commuting integrals and constrained integration for "
        "magnetic geodesic flow on the sphere.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    nf = sub.add_parser("normal-form", help="block-diagonalize a skew matrix")
    nf.add_argument("--in", dest="infile", required=True, metavar="FILE")
    nf.add_argument("--out", required=True, metavar="FILE")
    nf.set_defaults(func=cmd_normal_form)

    build = sub.add_parser("build", help="construct the commuting family")
    build.add_argument("--n", type=int, required=True)
    build.add_argument("--alpha", required=True, metavar="CSV",
                       help="comma-separated exact fractions, one per plane")
    build.add_argument("--out", required=True, metavar="FILE")
    build.set_defaults(func=cmd_build)

    verify = sub.add_parser("verify", help="verify a family file")
    verify.add_argument("--family", required=True, metavar="FILE")
    verify.add_argument("--samples", type=int, default=100)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--report", required=True, metavar="FILE")
    verify.set_defaults(func=cmd_verify)

    sim = sub.add_parser("simulate", help="integrate one trajectory")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--alpha", required=True, metavar="CSV")
    sim.add_argument("--dt", type=float, required=True)
    sim.add_argument("--steps", type=int, required=True)
    group = sim.add_mutually_exclusive_group()
    group.add_argument("--init", metavar="FILE",
                       help="JSON file with initial 'x' and 'p' arrays")
    group.add_argument("--seed", type=int, default=0)
    sim.add_argument("--record-every", type=int, default=1)
    sim.add_argument("--tol", type=float, default=DEFAULT_DRIFT_TOL)
    sim.add_argument("--check-picture", action="store_true",
                     help="also check kinetic-energy conservation in the shifted picture")
    sim.add_argument("--no-normalize", action="store_true",
                     help="keep the momentum scale of --init instead of |P|=1")
    sim.add_argument("--out", required=True, metavar="PREFIX",
                     help="output prefix; writes PREFIX.csv and PREFIX.drift.json")
    sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 on --help; keep its code.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StepError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # malformed inputs must never produce a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
