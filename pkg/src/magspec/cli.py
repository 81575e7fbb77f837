"""Command-line experiment runner.

Usage::

    magspec <subcommand> --config run.yaml [--out DIR] [--threads N] [--seed N]

Subcommands: ``eigs``, ``lemma-suite``, ``identity``, ``limit-magnetic``,
``limit-electric``, ``recover-da``, ``recover-v``, ``gauge-check`` and
``uniqueness``.  Each writes CSV/JSON artifacts and ``summary.json`` into
the output directory.  Exit status: 0 when every check passes, 1 on a failed
check or a compute error, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .domain import boundary_function, curl
from .gauge import gauge_transform, obstruction_check
from .hamiltonian import assemble, eigensolve
from .presets import sample_preset, sample_scalar
from .recovery import (RecoverySource, SweepConfig, fourier_grid, recover_curl,
                       recover_potential, uniqueness_sweep)
from .ansatz import isozaki_params
from .representation import check_resolution, identity_residual, tau_sweep
from .resolvent import gradient_bound_check, u_norm_decay, z_mu_decay
from .tables import ConvergenceTable, fmt, write_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {exc}")


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _json(path, obj):
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else fmt(x)
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    return obj


def emit_plotdata(table: ConvergenceTable, out_dir, stem, x_name="tau"):
    """Two-column ``x y`` files for ``abs_error`` and ``rel_error`` plus a manifest."""
    if len(table) == 0:
        raise ValueError("refusing to emit plot data for an empty table")
    os.makedirs(out_dir, exist_ok=True)
    curves = []
    for col in ("abs_error", "rel_error"):
        ys = getattr(table, col)
        name = f"{stem}_{col}.dat"
        with open(os.path.join(out_dir, name), "w") as fh:
            for x, y in zip(table.parameter, ys):
                fh.write(f"{fmt(x)} {fmt(y)}\n")
        curves.append({"file": name, "x": x_name, "y": col})
    _json(os.path.join(out_dir, f"{stem}_manifest.json"), {"curves": curves})
    return [c["file"] for c in curves]


def read_plotdata(path):
    xs, ys = [], []
    with open(path) as fh:
        for line in fh:
            a, b = line.split()
            xs.append(float(a))
            ys.append(float(b))
    return np.array(xs), np.array(ys)


# ---------------------------------------------------------------------------
# operator construction


def build_operators(cfg: ExperimentConfig):
    d = cfg.domain
    A1, V1 = sample_preset(d, cfg.operator1, require_collar=True)
    if cfg.operator2 == {"gauge_of": 1}:
        p = sample_scalar(d, cfg.gauge_p)
        A2, V2 = gauge_transform(A1, V1, p)
    else:
        A2, V2 = sample_preset(d, cfg.operator2, require_collar=True)
    return assemble(d, A1, V1), assemble(d, A2, V2)


def _datum(cfg):
    k = cfg.datum_k
    return boundary_function(cfg.domain, lambda x, y: np.exp(1j * (k[0] * x + k[1] * y)))


def _spectra(cfg, op1, op2, K=None):
    K = cfg.K if K is None else K
    if K is None:
        raise ValueError("solver.K is required for this subcommand")
    return (_stage("eigensolve", eigensolve, op1, K, tol=cfg.tol),
            _stage("eigensolve", eigensolve, op2, K, tol=cfg.tol))


# ---------------------------------------------------------------------------
# subcommands


def cmd_eigs(cfg, out, threads):
    op, _ = build_operators(cfg)
    K = cfg.K or 10
    spec = _stage("eigensolve", eigensolve, op, K, tol=cfg.tol)
    write_csv(os.path.join(out, "eigenvalues.csv"), ["k", "lambda", "residual"],
              [[k + 1, spec.eigenvalues[k], spec.residuals[k]] for k in range(spec.K)])
    header, rows = spec.csv_rows()
    write_csv(os.path.join(out, "traces.csv"), header, rows)
    H = op.H
    herm = float(abs(H - H.conj().T).max()) if H.nnz else 0.0
    gram = float(np.max(np.abs(spec.gram() - np.eye(spec.K))))
    checks = {"hermiticity_error": herm, "orthonormality_error": gram,
              "hermitian": herm == 0.0,
              "orthonormal": gram < cfg.tolerances["orthonormality"]}
    d = cfg.domain
    if not np.any(op.A.a1) and not np.any(op.A.a2) and not np.any(op.V.values):
        p = np.arange(1, K + 2)
        exact = np.sort((np.pi * p[:, None] / d.L1) ** 2 + (np.pi * p[None, :] / d.L2) ** 2,
                        axis=None)[:K]
        rel = float(np.max(np.abs(spec.eigenvalues - exact) / exact))
        checks.update({"max_rel_error_vs_laplacian": rel,
                       "laplacian_match": rel < cfg.tolerances["eig_rel"]})
    return checks


def cmd_lemma_suite(cfg, out, threads):
    op1, op2 = build_operators(cfg)
    f = _datum(cfg)
    un = _stage("u_norm_decay", u_norm_decay, op1, cfg.lambdas, f)
    un.to_csv(os.path.join(out, "u_norm.csv"))
    vmax, amax = (max(a, b) for a, b in zip(op1.potential_bounds(), op2.potential_bounds()))
    bound = -vmax - 6 * amax**2
    mu_star = cfg.mu_star if cfg.mu_star is not None else bound - 1.0
    mus = [m for m in cfg.lambdas if m < mu_star]
    if not mus:
        raise ValueError(f"no ladder value lies below mu_star = {mu_star!r}")
    zt = _stage("z_mu_decay", z_mu_decay, op1, op2, mus, f)
    zt.to_csv(os.path.join(out, "z_mu.csv"))
    rows = [[lam, _stage("gradient_bound", gradient_bound_check, op1, lam, f)]
            for lam in cfg.lambdas if lam < bound]
    write_csv(os.path.join(out, "gradient_bound.csv"), ["lambda", "ratio"], rows)
    ratios = [r[1] for r in rows]
    return {"u_norm_decreasing": un.strictly_decreasing("measured"),
            "z_mu_decreasing": zt.strictly_decreasing("measured"), "mu_star": mu_star,
            "u_norms": [abs(m) for m in un.measured], "z_mu_norms": [abs(m) for m in zt.measured],
            "gradient_ratios": ratios,
            # the bound is uniform in lambda: ratios may fall but must not grow
            "gradient_bounded": bool(not ratios or max(ratios) <= 10 * ratios[0])}


def cmd_identity(cfg, out, threads):
    op1, op2 = build_operators(cfg)
    rows = []
    worst = 0.0
    for xi in cfg.xi:
        for tau in cfg.taus:
            frame = isozaki_params(xi, tau, cfg.orientation)
            t = _stage("identity", identity_residual, op1, op2, frame)
            r1, r2 = t.rel_residual(1), t.rel_residual(2)
            worst = max(worst, r1, r2)
            rows.append([xi[0], xi[1], tau, r1, r2, t.abs_residual(1), t.abs_residual(2)])
    write_csv(os.path.join(out, "identity.csv"),
              ["xi1", "xi2", "tau", "rel_residual_1", "rel_residual_2", "abs_residual_1",
               "abs_residual_2"], rows)
    return {"max_rel_residual": worst, "residual_ok": worst < cfg.tolerances["identity_rel"]}


def _limit(cfg, out, threads, mode):
    op1, op2 = build_operators(cfg)
    if not cfg.xi or not cfg.taus:
        raise ValueError("frame.xi and frame.taus are required")
    for t in cfg.taus:
        check_resolution(cfg.domain, t)
    tol = cfg.tolerances[f"limit_{mode}_final"]
    spec1 = spec2 = None
    if cfg.route in ("spectral", "both"):
        spec1, spec2 = _spectra(cfg, op1, op2)
    checks = {"per_xi": []}
    ok = True
    for i, xi in enumerate(cfg.xi):
        entry = {"xi": xi}
        direct = None
        if cfg.route in ("direct", "both"):
            direct = _stage(f"limit-{mode}", tau_sweep, op1, op2, xi, cfg.taus, mode=mode,
                            orientation=cfg.orientation, threads=threads)
            stem = f"limit_{mode}_xi{i}_direct"
            direct.to_csv(os.path.join(out, stem + ".csv"))
            emit_plotdata(direct, out, stem)
            rel = direct.rel_error
            dec = direct.strictly_decreasing()
            entry.update({"direct_rel_error": rel, "direct_decreasing": dec,
                          "direct_final_ok": bool(rel[-1] < tol)})
            ok &= dec and bool(rel[-1] < tol)
        if cfg.route in ("spectral", "both"):
            spec_t = _stage(f"limit-{mode}-spectral", tau_sweep, op1, op2, xi, cfg.taus,
                            mode=mode, source="spectral", spec1=spec1, spec2=spec2, K=cfg.K,
                            orientation=cfg.orientation, threads=threads)
            stem = f"limit_{mode}_xi{i}_spectral"
            spec_t.to_csv(os.path.join(out, stem + ".csv"))
            emit_plotdata(spec_t, out, stem)
            entry.update({"spectral_rel_error": spec_t.rel_error,
                          "tail_indicator": spec_t.meta["tail_indicator"]})
            if direct is not None:
                gap = np.abs(np.array(spec_t.measured) - np.array(direct.measured))
                rel = gap / np.abs(np.array(direct.measured))
                within = bool(np.all(gap <= np.array(spec_t.meta["tail_indicator"])))
                entry.update({"route_gap": gap, "route_rel_gap": rel, "route_within_tail": within,
                              "route_rel_ok": bool(np.all(rel < cfg.tolerances["gstar_rel"]))})
                ok &= within and bool(np.all(rel < cfg.tolerances["gstar_rel"]))
        checks["per_xi"].append(entry)
    checks["all_ok"] = bool(ok)
    return checks


def cmd_limit_magnetic(cfg, out, threads):
    return _limit(cfg, out, threads, "magnetic")


def cmd_limit_electric(cfg, out, threads):
    return _limit(cfg, out, threads, "electric")


def _source(cfg, op1, op2, threads):
    spec1 = spec2 = None
    if cfg.recovery_mode == "spectral":
        spec1, spec2 = _spectra(cfg, op1, op2)
    return RecoverySource(op1, op2, cfg.recovery_mode, spec1, spec2,
                          cfg.taus or None, cfg.K, True, threads)


def _grid(cfg):
    return fourier_grid(cfg.domain, cfg.lattice_half, cfg.lattice_period)


def _write_field(path, domain, est, ref):
    X, Y = domain.mesh()
    rows = [[i, j, X[i, j], Y[i, j], est[i, j], ref[i, j]]
            for i in range(domain.N1) for j in range(domain.N2)]
    write_csv(path, ["i", "j", "x", "y", "estimate", "reference"], rows)


def cmd_recover_da(cfg, out, threads):
    op1, op2 = build_operators(cfg)
    rep = _stage("recover-da", recover_curl, _source(cfg, op1, op2, threads), _grid(cfg))
    _json(os.path.join(out, "recover_da.json"), rep.as_dict())
    _write_field(os.path.join(out, "curl_field.csv"), cfg.domain, rep.estimate.values,
                 rep.reference.values)
    return {"rel_l2_error": rep.rel_l2_error, "asymmetry": rep.asymmetry,
            "error_ok": rep.rel_l2_error < cfg.tolerances["recover_curl"]}


def cmd_recover_v(cfg, out, threads):
    op1, op2 = build_operators(cfg)
    rep = _stage("recover-v", recover_potential, _source(cfg, op1, op2, threads), _grid(cfg))
    _json(os.path.join(out, "recover_v.json"), rep.as_dict())
    _write_field(os.path.join(out, "potential_field.csv"), cfg.domain, rep.estimate.values,
                 rep.reference.values)
    return {"rel_l2_error": rep.rel_l2_error, "asymmetry": rep.asymmetry,
            "error_ok": rep.rel_l2_error < cfg.tolerances["recover_potential"]}


def cmd_gauge_check(cfg, out, threads):
    if cfg.gauge_p is None:
        raise ValueError("gauge-check needs gauge.p")
    op1, _ = build_operators(cfg)
    p = sample_scalar(cfg.domain, cfg.gauge_p)
    rep = _stage("obstruction", obstruction_check, op1, p, cfg.gauge_K)
    A2, V2 = gauge_transform(op1.A, op1.V, p)
    opg = assemble(cfg.domain, A2, V2)
    rc = _stage("curl-null", recover_curl, RecoverySource(op1, opg, threads=threads), _grid(cfg))
    scale = float(np.sqrt(np.sum(curl(op1.A).values ** 2) * cfg.domain.cell_area))
    null = rc.estimate_norm() / scale if scale > 0 else rc.estimate_norm()
    _json(os.path.join(out, "gauge_check.json"), {**rep.as_dict(), "curl_null": null})
    t = cfg.tolerances
    return {**rep.as_dict(), "curl_null": null,
            "eigen_ok": rep.comparison.max_rel_eigen_gap < t["gauge_rel_eigen_gap"],
            "trace_ok": rep.comparison.max_rel_trace_distance < t["gauge_rel_trace"],
            "potentials_differ": rep.potential_difference > 0,
            "curl_null_ok": null < t["curl_null"]}


def cmd_uniqueness(cfg, out, threads):
    op1, op2 = build_operators(cfg)
    spec1, spec2 = _spectra(cfg, op1, op2)
    # the sweep runs every lattice frequency through the tau ladder, so its
    # default lattice is small unless the config asks for one explicitly
    explicit = "lattice" in (cfg.raw.get("frame") or {})
    sc = SweepConfig(half=cfg.lattice_half if explicit else SweepConfig.half,
                     period=cfg.lattice_period, taus=cfg.taus or None, K=cfg.K,
                     source="direct" if cfg.recovery_mode == "direct" else "spectral",
                     curl_tol=cfg.tolerances["sweep_curl"],
                     potential_tol=cfg.tolerances["sweep_potential"], threads=threads)
    rep = _stage("uniqueness", uniqueness_sweep, op1, op2, spec1, spec2, sc)
    _json(os.path.join(out, "uniqueness.json"), rep.as_dict())
    return {"sweep_passed": rep.passed, "stages": [s.as_dict() for s in rep.stages]}


COMMANDS = {
    "eigs": cmd_eigs,
    "lemma-suite": cmd_lemma_suite,
    "identity": cmd_identity,
    "limit-magnetic": cmd_limit_magnetic,
    "limit-electric": cmd_limit_electric,
    "recover-da": cmd_recover_da,
    "recover-v": cmd_recover_v,
    "gauge-check": cmd_gauge_check,
    "uniqueness": cmd_uniqueness,
}


def _passed(checks):
    return all(v for k, v in checks.items() if isinstance(v, bool) and k != "hermitian") \
        and checks.get("hermitian", True)


def build_parser():
    ap = argparse.ArgumentParser(prog="magspec", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML experiment file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0,
                    help="seed recorded in the summary (the solvers are deterministic)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    try:
        checks = COMMANDS[args.command](cfg, out, args.threads)
    except StageError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        _json(os.path.join(out, "summary.json"),
              {"command": args.command, "passed": False, "failed_stage": exc.stage,
               "error": str(exc.__cause__)})
        return EXIT_FAIL
    except (ValueError, RuntimeError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        _json(os.path.join(out, "summary.json"),
              {"command": args.command, "passed": False, "failed_stage": args.command,
               "error": str(exc)})
        return EXIT_FAIL
    passed = _passed(checks) if "all_ok" not in checks else checks["all_ok"]
    if "sweep_passed" in checks:
        passed = checks["sweep_passed"]
    _json(os.path.join(out, "summary.json"),
          {"command": args.command, "passed": passed, "seed": args.seed, "checks": checks})
    print(f"{args.command}: {'pass' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
