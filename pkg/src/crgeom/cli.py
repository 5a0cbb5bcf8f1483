"""Command-line entry point.

    crgeom invariants        [flags]
    crgeom flow cartan       [flags]
    crgeom flow yamabe       [flags]
    crgeom monopole-residual [flags]
    crgeom verify [--suite NAME] [flags]

Exit codes: 0 ok, 1 configuration error, 2 numerical-contract failure, 3 flow stall.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import conventions as _conv

__all__ = ["main", "cmd_invariants", "cmd_flow", "cmd_monopole", "cmd_verify", "EXIT_OK", "EXIT_CONFIG",
           "EXIT_NUMERICAL", "EXIT_STALL"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_STALL = 0, 1, 2, 3


class NumericalFailure(RuntimeError):
    pass


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _emit(cfg, name, payload):
    """Write ``payload`` as sorted JSON to the output dir and echo it to stdout."""
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, name), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


def _solver_residuals(ph, pkg):
    res = {f"ph.{k}": float(v) for k, v in ph.residuals.items()}
    res.update({f"cartan.{k}": float(v) for k, v in pkg.residuals.items()})
    return res


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_invariants(cfg) -> int:
    from .cartan import solve_cartan, transgression_mu
    from .invariants import coarser, mu_pseudohermitian, rigidity_certificate
    from .pseudohermitian import build_coframe, cartan_tensor, solve_ph

    conv = _conv.load()
    m = cfg.manifold()
    u, E = cfg.structure(m)
    tol = cfg.tol("solver")

    def solve(man, uu, EE):
        ph = solve_ph(build_coframe(uu, EE, tol=tol), conv, tol=tol)
        return ph, solve_cartan(ph)

    ph, pkg = solve(m, u, E)
    Q = cartan_tensor(ph)
    rep = mu_pseudohermitian(ph)
    tg = transgression_mu(pkg)
    err = 0.0    # the polynomial backend is exact
    if m.is_grid:
        cm = m.with_backend(coarser(m.backend))
        err = None
        if cm != m:
            uc, Ec = cfg.structure(cm)
            err = abs(rep.mu - mu_pseudohermitian(solve(cm, uc, Ec)[0]).mu)
    cert = rigidity_certificate(ph, cfg.tol("std_torsion"))
    residuals = _solver_residuals(ph, pkg)
    payload = {
        "manifold": m.describe(),
        "W": {"mean": ph.W.mean().real, "min": ph.W.inf_real(), "max": ph.W.max_real(), "std": ph.W.std()},
        "torsion": {"sup_A11": ph.A11.sup()},
        "sup_Q11": Q.sup(),
        "spherical": bool(Q.sup() < cfg.tol("std_Q")),
        "mu_ph": rep.as_dict() | {"error_estimate": err},
        "mu_cartan": {"mu": tg.mu, "mu_middle": tg.mu_middle, "imag": tg.imag},
        "rigidity": cert.as_dict(),
        "residuals": residuals,
    }
    _emit(cfg, "invariants.json", payload)
    bad = [k for k in ("ph.admissibility", "ph.reconstruction", "cartan.eq2_dtheta1", "cartan.eq3_line1")
           if residuals[k] > tol]
    if bad:
        raise NumericalFailure(f"solver residual {bad[0]} = {residuals[bad[0]]:.3g} above {tol:.3g}")
    return EXIT_OK


def _cartan_start(cfg, basis, conv):
    from .fields import constant

    m = basis.manifold
    _, E = cfg.structure(m)
    f = cfg["flow"]
    if E is None:
        return basis.random(np.random.default_rng(cfg.seed), f["amplitude"]), 0.0
    if not m.is_grid:
        raise cfg.error("backend", "the Cartan flow runs on the grid backend")
    c = basis.coefficients(E)
    off = (E - basis.field(c)).sup() if E.sup() > 0 else 0.0
    return c, off


def cmd_flow(cfg, which: str) -> int:
    from .fields import constant
    from .flows import SliceBasis, cartan_state, load_checkpoint, run_flow, yamabe_state

    conv = _conv.load()
    m = cfg.manifold()
    if not m.is_grid:
        raise cfg.error("name", "flows run on the grid backend; use --backend grid")
    f = cfg["flow"]
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, f"flow_{which}.csv")
    ck_dir = os.path.join(cfg.out_dir, "checkpoints") if f["checkpoint_every"] else None
    basis = SliceBasis(m, f["slice_degree"]) if which == "cartan" else None
    extra = {}
    if f["restart"]:
        path = os.path.join(cfg.base_dir, f["restart"])
        try:
            state = load_checkpoint(path, m, basis, conv)
        except (OSError, KeyError, ValueError) as exc:
            raise cfg.error("restart", f"cannot restart from {f['restart']!r}: {exc}")
        if state.kind != which:
            raise cfg.error("restart", f"checkpoint holds a {state.kind} flow, not {which}")
        append = True
    elif which == "cartan":
        c0, off = _cartan_start(cfg, basis, conv)
        extra["slice_projection_residual"] = off
        state = cartan_state(basis, c0, f["dt0"], conv=conv)
        append = False
    else:
        u, E = cfg.structure(m)
        state = yamabe_state(u, E if E is not None else constant(m, 0.0), f["dt0"], conv=conv,
                             normalized=bool(f["normalized"]), band=f["band"],
                             orientation=int(f["orientation"]))
        append = False
    res = run_flow(state, f["max_steps"], basis, csv_path, ck_dir, f["checkpoint_every"], f["mu_slack"],
                   f["dt_min"], f["fixed_point_tol"], conv, append=append)
    payload = {
        "flow": which,
        "accepted": res.accepted,
        "stalled": res.stalled,
        "fixed_point": res.fixed_point,
        "final": {"t": res.state.t, "step": res.state.step, **res.state.monitors},
        "csv": os.path.basename(csv_path),
        "manifold": m.describe(),
        **extra,
    }
    if which == "cartan":
        payload["slice"] = {"max_degree": basis.max_degree, "dimension": basis.size}
    _emit(cfg, f"flow_{which}.json", payload)
    return EXIT_STALL if res.stalled else EXIT_OK


def cmd_monopole(cfg) -> int:
    from .exterior import FormField
    from .fields import constant, random_polynomial
    from .monopole import MonopoleFields, gauge_transform, obstruction_report, residuals
    from .pseudohermitian import build_coframe, solve_ph

    conv = _conv.load()
    m = cfg.manifold()
    u, E = cfg.structure(m)
    tol = cfg.tol("solver")
    ph = solve_ph(build_coframe(u, E, tol=tol), conv, tol=tol)
    mp = cfg["monopole"]
    zero = constant(m, 0.0)
    alpha = cfg.field(mp["alpha"], m, "alpha", charge=None, default=zero)
    beta = cfg.field(mp["beta1bar"], m, "beta1bar", charge=None, default=zero)
    if mp["a"] is None:
        a = ph.cf.coframe.zero_form(1)
    else:
        if not (isinstance(mp["a"], list) and len(mp["a"]) == 2):
            raise cfg.error("a", "monopole.a must be [a_theta, a_1] (the theta^1bar part is conj(a_1))")
        a0 = cfg.field(mp["a"][0], m, "a", real=True, charge=None, default=zero)
        a1 = cfg.field(mp["a"][1], m, "a", charge=None, default=zero)
        a = FormField(ph.cf.coframe, 1, [a0, a1, a1.conj()])
    mf = MonopoleFields(ph, alpha, beta, a)
    rep = residuals(mf).report()
    payload = {"residuals": rep, "obstruction": obstruction_report(ph, cfg.tol("std_torsion")),
               "manifold": m.describe()}
    if mp["gauge_check"] and m.is_grid:
        gamma = random_polynomial(m, np.random.default_rng(cfg.seed), 3, 4, 1.0, real=True)
        moved = residuals(gauge_transform(mf, gamma)).report()
        drift = max(abs(rep[k][n] - moved[k][n]) for k in rep for n in ("sup", "l2"))
        payload["gauge_drift"] = drift
        if drift > cfg.tol("gauge") * max(1.0, max(rep[k]["sup"] for k in rep)):
            _emit(cfg, "monopole_residual.json", payload)
            raise NumericalFailure(f"gauge drift {drift:.3g} above {cfg.tol('gauge'):.3g}")
    _emit(cfg, "monopole_residual.json", payload)
    return EXIT_OK


def cmd_verify(cfg, suite: str) -> int:
    from .verify import run_suite

    try:
        checks = run_suite(suite, cfg.settings())
    except KeyError as exc:
        raise cfg.error("suite", exc.args[0])
    for c in checks:
        tag = "PASS" if c.passed else "FAIL"
        print(f"[{tag}] {c.suite}.{c.name}: measured {c.measured:.3g} (tolerance {c.tolerance:.3g})",
              file=sys.stderr)
    failed = [c for c in checks if not c.passed]
    payload = {"suite": suite, "passed": not failed, "checks": [c.as_dict() for c in checks],
               "first_failure": f"{failed[0].suite}.{failed[0].name}" if failed else None}
    _emit(cfg, "verify.json", payload)
    if failed:
        raise NumericalFailure(f"invariant {failed[0].suite}.{failed[0].name} failed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="JSON run configuration")
    p.add_argument("--backend", choices=("poly", "grid"), default=d)
    p.add_argument("--resolution", metavar="N1xN2xN3", default=d, help="grid resolution (eta x xi1 x xi2)")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory")
    p.add_argument("--seed", metavar="U64", type=int, default=d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crgeom", description="Pseudohermitian and CR invariants on S^3 and lens spaces.")
    _common(parser, True)
    sub = parser.add_subparsers(dest="command", required=True)
    parent = argparse.ArgumentParser(add_help=False)
    _common(parent, True)
    sub.add_parser("invariants", parents=[parent], help="W, torsion, Q, mu and the rigidity certificate")
    fl = sub.add_parser("flow", parents=[parent], help="run a flow")
    fl.add_argument("which", choices=("cartan", "yamabe"))
    sub.add_parser("monopole-residual", parents=[parent], help="residuals of the monopole equations")
    ve = sub.add_parser("verify", parents=[parent], help="run verification suites")
    ve.add_argument("--suite", default=None, help="suite name or 'all'")
    return parser


def _overrides(ns):
    from .config import parse_resolution

    ov = {}
    if getattr(ns, "backend", None):
        ov[("backend", "name")] = ns.backend
    if getattr(ns, "resolution", None):
        ov[("backend", "resolution")] = parse_resolution(ns.resolution)
    if getattr(ns, "out", None):
        ov[("output", "dir")] = ns.out
    if getattr(ns, "seed", None) is not None:
        ov[(None, "seed")] = ns.seed
    if getattr(ns, "suite", None):
        ov[("verify", "suite")] = ns.suite
    return ov


def main(argv=None) -> int:
    from .cartan import CartanSolveError
    from .config import ConfigError, load_config
    from .fields import NonInvariantError
    from .flows import CalibrationError, FlowError, FlowStall
    from .pseudohermitian import AdmissibilityError

    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(getattr(ns, "config", None), _overrides(ns))
        if ns.command == "invariants":
            return cmd_invariants(cfg)
        if ns.command == "flow":
            return cmd_flow(cfg, ns.which)
        if ns.command == "monopole-residual":
            return cmd_monopole(cfg)
        return cmd_verify(cfg, cfg["verify"]["suite"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowStall as exc:
        print(f"flow stall: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (NumericalFailure, AdmissibilityError, CartanSolveError, FlowError, CalibrationError,
            NonInvariantError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
