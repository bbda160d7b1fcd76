"""Command-line interface: ``coadjoint <command> [options]``.

Exit codes: 0 success, 2 parse/usage error, 3 invariant violation,
4 numerical failure (threshold missed, divisor reached, blow-up).

Trajectory CSV layout: a first line ``# {json metadata}``, a header row, then
one row per sample with columns ``t``, ``Re_Zij, Im_Zij`` for every entry of
``Z`` in row-major order, ``H`` and ``detK`` (= det Z^dag Z).
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .embeddings import (
    EmbeddingInvariantError,
    EmbeddingSpec,
    FlagRecoveryError,
    _generic_su_eigenvalues,
    certify,
    certify_two_step,
    so6_lagrangian_set,
    so_upsilon_set,
    su_grassmann_set,
    triangle_locus,
)
from .geodesics import (
    DivisorError,
    closed_form_trajectory,
    geodesic_residual,
    magnetic_geodesic,
    polar_decompose,
)
from .lie_core import CartanSpec, Family, GroupFamily
from .orbits import orbit_dim, stabilizer_dim
from .spinchain import BlowUpError, NonNestedError, SpinChainConfig, Trajectory, integrate, random_state

EXIT_OK, EXIT_PARSE, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").strip("()[]").split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").strip("()[]").split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _group(args) -> GroupFamily:
    if args.group is None:
        raise CliError("--group is required", EXIT_PARSE)
    try:
        return GroupFamily.parse(args.group, args.n)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc


def _default_eigenvalues(group: GroupFamily, mult) -> list[float]:
    if group.family is Family.SU:
        return list(_generic_su_eigenvalues(mult))
    return [float(k) for k in range(len(mult), 0, -1)]


def _write(path: Path, text: str, force: bool) -> None:
    if path.exists() and not force:
        raise CliError(f"{path} exists; pass --force to overwrite", EXIT_PARSE)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        _write(Path(args.out), text + "\n", args.force)
    print(text)


# ---------------------------------------------------------------------------

def cmd_orbit_info(args) -> int:
    group = _group(args)
    if args.mult is None:
        raise CliError("--mult is required", EXIT_PARSE)
    eig = args.eig if args.eig is not None else _default_eigenvalues(group, args.mult)
    try:
        spec = CartanSpec(group, args.mult, eig)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVARIANT) from exc
    _emit({
        "family": group.family.value,
        "group": str(group),
        "n": group.n,
        "multiplicities": list(spec.multiplicities),
        "eigenvalues": list(spec.eigenvalues),
        "orbit_dim": orbit_dim(spec),
        "stabilizer_dim": stabilizer_dim(spec),
        "algebra_dim": group.dim,
    }, args)
    return EXIT_OK


BUILTINS = ("su-grassmann", "so-upsilon", "so6-lagrangian", "two-step-so")


def _builtin_spec(args) -> EmbeddingSpec:
    name = args.builtin
    if name == "so6-lagrangian":
        return so6_lagrangian_set()
    if args.n is None or args.mult is None:
        raise CliError(f"builtin {name} needs --n and --mult", EXIT_PARSE)
    if name == "su-grassmann":
        return su_grassmann_set(args.n, args.mult, args.eig)
    family = Family(args.family) if args.family else Family.SO_EVEN
    return so_upsilon_set(args.n, args.mult, family, args.eig)


def cmd_check_embedding(args) -> int:
    tol = args.tol if args.tol is not None else 1e-9
    if args.builtin == "two-step-so":
        if args.n is None:
            raise CliError("two-step-so needs --n", EXIT_PARSE)
        report = certify_two_step(args.n, args.samples, args.seed)
        report.update(builtin="two-step-so", tolerance=tol,
                      isotropic=report["isotropy_residual"] < tol and report["moment_residual"] < tol)
        _emit(report, args)
        return EXIT_OK if report["isotropic"] else EXIT_NUMERICAL
    if args.spec:
        try:
            spec = EmbeddingSpec.from_json(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read spec: {exc}", EXIT_PARSE) from exc
    elif args.builtin:
        spec = _builtin_spec(args)
    else:
        raise CliError("give --spec FILE or --builtin NAME", EXIT_PARSE)
    cert = certify(spec, args.samples, args.seed)
    report = {"certificate": cert.to_dict(), "spec": spec.to_dict(), "tolerance": tol,
              "isotropic": cert.isotropic(tol)}
    _emit(report, args)
    return EXIT_OK if cert.isotropic(tol) else EXIT_NUMERICAL


def _chain_config(args) -> SpinChainConfig:
    if args.config:
        try:
            return SpinChainConfig.from_dict(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read config: {exc}", EXIT_PARSE) from exc
    n = args.n or 2
    p = args.p if args.p is not None else [1.0] * n
    if len(p) != n:
        raise CliError(f"--p needs {n} entries", EXIT_PARSE)
    if args.alpha is not None:
        if len(args.alpha) != n * n:
            raise CliError(f"--alpha needs {n * n} entries (row-major)", EXIT_PARSE)
        return SpinChainConfig.from_matrix(p, np.reshape(args.alpha, (n, n)))
    levels = args.levels if args.levels is not None else [1.0 + 0.5 * k for k in range(n - 1)]
    return SpinChainConfig.from_levels(p, levels)


def _initial_state(args, config: SpinChainConfig) -> np.ndarray:
    return random_state(config, args.seed)


def _suffixed(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}_{tag}{path.suffix}")


def _write_traj(traj: Trajectory, path: Path, fmt: str, force: bool, extra: dict) -> None:
    meta = traj.metadata()
    meta.update(extra)
    if fmt == "csv":
        _write(path, traj.to_csv(meta), force)
    else:
        d = traj.to_dict()
        d["metadata"] = meta
        _write(path, json.dumps(d) + "\n", force)


def _grid(args) -> tuple[float, float]:
    t_end = args.t_end if args.t_end is not None else 10.0
    dt = args.dt if args.dt is not None else 1e-3
    if dt <= 0 or t_end <= 0:
        raise CliError("--t-end and --dt must be positive", EXIT_PARSE)
    return t_end, dt


def _resolve(args, mode: str) -> None:
    args.mode = args.mode or mode
    if args.format is None:
        args.format = "csv" if args.out and Path(args.out).suffix.lower() == ".csv" else "json"


def cmd_simulate(args) -> int:
    _resolve(args, "numeric")
    config = _chain_config(args)
    t_end, dt = _grid(args)
    Z0 = _initial_state(args, config)
    tol = args.tol if args.tol is not None else 1e-5
    trajs = {}
    if args.mode in ("numeric", "both"):
        trajs["numeric"] = integrate(config, Z0, t_end, dt, record_every=args.record_every)
    if args.mode in ("closed_form", "both"):
        if not config.nested:
            raise CliError("closed_form requires nested couplings alpha_ij = alpha_max(i,j)",
                           EXIT_INVARIANT)
        steps = int(round(t_end / dt))
        times = dt * args.record_every * np.arange(steps // args.record_every + 1)
        trajs["closed_form"] = closed_form_trajectory(Z0, config, times)
    summary = {"config": config.to_dict(), "mode": args.mode, "t_end": t_end, "dt": dt,
               "seed": args.seed, "tolerance": tol}
    ok = True
    for name, tr in trajs.items():
        summary[name] = {"energy_drift": tr.energy_drift(), "norm_drift": tr.norm_drift(),
                         "min_detK": float(tr.det_gram().min())}
        ok &= tr.norm_drift() < 1e-9 and tr.energy_drift() < 1e-7
    if len(trajs) == 2:
        dev = trajs["numeric"].max_deviation(trajs["closed_form"])
        summary["max_deviation"] = dev
        ok &= dev < tol
    summary["ok"] = bool(ok)
    if args.out:
        out = Path(args.out)
        stamp = {"timestamp": _timestamp(), "seed": args.seed}
        if len(trajs) == 1:
            (name, tr), = trajs.items()
            _write_traj(tr, out, args.format, args.force, stamp)
        else:
            for name, tr in trajs.items():
                _write_traj(tr, _suffixed(out, name), args.format, args.force, stamp)
            _write(_suffixed(out.with_suffix(".json"), "summary"),
                   json.dumps(dict(summary, **stamp), indent=2, sort_keys=True) + "\n", args.force)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_geodesic(args) -> int:
    _resolve(args, "closed_form")
    config = _chain_config(args)
    config.require_nested()
    t_end, dt = _grid(args)
    Z0 = _initial_state(args, config)
    tol = args.tol if args.tol is not None else 1e-8
    steps = int(round(t_end / dt))
    times = dt * args.record_every * np.arange(steps // args.record_every + 1)
    summary = {"config": config.to_dict(), "mode": args.mode, "t_end": t_end, "dt": dt,
               "seed": args.seed, "tolerance": tol, "q": config.charges().tolist()}
    ok = True
    results = {}
    if args.mode in ("closed_form", "both"):
        geo = magnetic_geodesic(Z0, config, times)
        results["closed_form"] = geo.U
        summary["closed_form"] = {"ev_deviation": geo.ev_deviation,
                                  "unitarity_residual": geo.unitarity_residual(),
                                  "min_singular": geo.min_singular}
        ok &= geo.ev_deviation < tol
    if args.mode in ("numeric", "both"):
        tr = integrate(config, Z0, t_end, dt, record_every=args.record_every)
        U = []
        for t, Z in zip(tr.times, tr.states):
            try:
                U.append(polar_decompose(Z).U)
            except DivisorError as exc:
                raise DivisorError(f"trajectory reaches the divisor at t = {t:.6g}",
                                   exc.min_singular, float(t)) from exc
        results["numeric"] = np.array(U)
        summary["numeric"] = {"energy_drift": tr.energy_drift(), "norm_drift": tr.norm_drift()}
        if args.record_every == 1 and len(tr) >= 3:
            summary["numeric"]["geodesic_residual"] = geodesic_residual(tr)
    if len(results) == 2:
        dev = float(np.abs(results["numeric"] - results["closed_form"]).max())
        summary["max_deviation"] = dev
        ok &= dev < max(tol, 1e-5)
    summary["ok"] = bool(ok)
    if args.out:
        out = Path(args.out)
        stamp = {"timestamp": _timestamp(), "seed": args.seed, "unitary": True,
                 "q": config.charges().tolist()}
        for name, U in results.items():
            path = out if len(results) == 1 else _suffixed(out, name)
            _write_traj(Trajectory(times, U, config, {"method": name}), path, args.format,
                        args.force, stamp)
        if len(results) == 2:
            _write(_suffixed(out.with_suffix(".json"), "summary"),
                   json.dumps(dict(summary, timestamp=stamp["timestamp"]), indent=2,
                              sort_keys=True) + "\n", args.force)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_triangle(args) -> int:
    if args.weights is None or len(args.weights) != 3:
        raise CliError("--weights needs three positive numbers", EXIT_PARSE)
    try:
        loc = triangle_locus(*args.weights)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVARIANT) from exc
    report = {"weights": list(args.weights), "kind": loc.kind.value}
    if loc.witness is not None:
        report["witness"] = loc.witness.tolist()
        report["residual"] = loc.residual(args.weights)
    _emit(report, args)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coadjoint",
        description=__doc__.split("\n\n", 1)[0],
        epilog=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None, help="acceptance tolerance override")
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="default: from the --out suffix, json otherwise")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    group_args = argparse.ArgumentParser(add_help=False)
    group_args.add_argument("--group", help='e.g. "SU(3)", "SO(6)", "Sp(2)", or SU/SO_even/SO_odd/Sp with --n')
    group_args.add_argument("--n", type=int, default=None)
    group_args.add_argument("--mult", type=_ints, default=None, help="block multiplicities, e.g. 1,1,2")
    group_args.add_argument("--eig", type=_floats, default=None, help="eigenvalues, one per block")

    p = sub.add_parser("orbit-info", parents=[common, group_args], help="orbit and stabilizer dimensions")
    p.set_defaults(func=cmd_orbit_info)

    p = sub.add_parser("check-embedding", parents=[common, group_args],
                       help="certify an isotropic embedding")
    p.add_argument("--spec", default=None, help="embedding spec JSON file")
    p.add_argument("--builtin", choices=BUILTINS, default=None)
    p.add_argument("--family", choices=[f.value for f in Family if f is not Family.SU], default=None,
                   help="family for so-upsilon")
    p.add_argument("--samples", type=int, default=20)
    p.set_defaults(func=cmd_check_embedding)

    chain = argparse.ArgumentParser(add_help=False)
    chain.add_argument("--config", default=None, help="spin chain config JSON {p, levels} or {p, alpha}")
    chain.add_argument("--n", type=int, default=None, help="number of sites")
    chain.add_argument("--p", type=_floats, default=None, help="normalizations p_i")
    chain.add_argument("--levels", type=_floats, default=None,
                       help="nested couplings alpha_2..alpha_n")
    chain.add_argument("--alpha", type=_floats, default=None, help="full coupling matrix, row-major")
    chain.add_argument("--t-end", type=float, default=None)
    chain.add_argument("--dt", type=float, default=None)
    chain.add_argument("--mode", choices=("numeric", "closed_form", "both"), default=None,
                       help="simulate: default numeric; geodesic: default closed_form")
    chain.add_argument("--record-every", type=int, default=1)

    p = sub.add_parser("simulate", parents=[common, chain], help="integrate the spin chain")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("geodesic", parents=[common, chain], help="magnetic geodesic U(t)")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("triangle", parents=[common], help="moment locus on three spheres")
    p.add_argument("--weights", type=_floats, default=None, help="alpha,beta,gamma")
    p.set_defaults(func=cmd_triangle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (EmbeddingInvariantError, NonNestedError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DivisorError, BlowUpError, FlagRecoveryError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
