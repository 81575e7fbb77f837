"""Experiment configuration files (YAML) with line-referenced diagnostics.

Example::

    domain: {L1: 1.0, L2: 1.0, N1: 65, N2: 65, w: 0.1}
    operator1:
      A: {kind: swirl, center: [0.0, 0.0], radius: 0.33, amplitude: 0.3}
      V: {kind: bump, center: [0.0, 0.0], radius: 0.33, amplitude: 2.0}
    operator2: zero
    frame: {xi: [[2.5, 2.5]], taus: [8, 16, 32], route: direct}
    solver: {K: 300}
    output: {dir: out}

Blocks: ``domain`` (``L1 L2 N1 N2 w``, optional ``centered``),
``operator1``/``operator2`` (``zero``, ``{A: ..., V: ...}`` presets, or
``{gauge_of: 1}`` for the gauge transform of operator 1 by ``gauge.p``),
``frame`` (``xi`` list, ``taus`` ladder, ``orientation``, ``route`` one of
``direct``/``spectral``/``both``, ``lattice: {half, period}``,
``recovery_mode`` one of ``oracle``/``spectral``/``direct``), ``solver``
(``K``, ``tol``, ``lambdas``, ``mu_star``), ``datum`` (``k`` wave vector of
the boundary datum ``exp(i k.x)``), ``gauge`` (``p`` scalar preset, ``K``),
``tolerances`` (overrides of :data:`DEFAULT_TOLERANCES`) and ``output``
(``dir``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .domain import Domain2D, build_domain, centered_domain
from .presets import scalar_sampler, support_clear_of_collar, vector_sampler
from .representation import RESOLUTION

DEFAULT_TOLERANCES = {
    "eig_rel": 0.02,
    "orthonormality": 1e-10,
    "identity_rel": 1e-2,
    "limit_magnetic_final": 0.15,
    "limit_electric_final": 0.10,
    "gstar_rel": 0.05,
    "gauge_rel_eigen_gap": 1e-3,
    "gauge_rel_trace": 1e-2,
    "curl_null": 1e-2,
    "recover_curl": 0.10,
    "recover_potential": 0.05,
    "sweep_curl": 5e-2,
    "sweep_potential": 5e-2,
}

TOP_KEYS = ("domain", "operator1", "operator2", "frame", "solver", "datum", "gauge",
            "tolerances", "output")


class ConfigError(ValueError):
    def __init__(self, message, path="<config>", line=None):
        self.path, self.line, self.message = path, line, message
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")


@dataclass
class ExperimentConfig:
    path: str
    domain: Domain2D
    operator1: object
    operator2: object
    xi: list
    taus: list
    orientation: int = 1
    route: str = "direct"
    lattice_half: int = 8
    lattice_period: Optional[float] = None
    recovery_mode: str = "oracle"
    K: Optional[int] = None
    tol: float = 1e-8
    lambdas: list = field(default_factory=lambda: [-10.0, -100.0, -1000.0, -10000.0])
    mu_star: Optional[float] = None
    datum_k: tuple = (1.0, 2.0)
    gauge_p: Optional[dict] = None
    gauge_K: int = 20
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)


def _line_map(text):
    """``{key path: 1-based line}`` for every mapping key and sequence item."""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = path + (i,)
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, ())
    return lines


class _Ctx:
    def __init__(self, path, lines):
        self.path, self.lines = path, lines

    def fail(self, msg, *key):
        line = None
        key = tuple(key)
        while key and line is None:
            line = self.lines.get(key)
            key = key[:-1]
        raise ConfigError(msg, self.path, line)


def _num(ctx, block, key, *path, kind=float, default=None, positive=False):
    if key not in block:
        if default is None:
            ctx.fail(f"missing required key '{key}'", *path)
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.fail(f"'{key}' must be a number, got {v!r}", *path, key)
    if kind is int and int(v) != v:
        ctx.fail(f"'{key}' must be an integer, got {v!r}", *path, key)
    if positive and v <= 0:
        ctx.fail(f"'{key}' must be positive, got {v!r}", *path, key)
    return kind(v)


def _operator(ctx, spec, name, domain):
    if spec is None or spec == "zero":
        return "zero"
    if isinstance(spec, dict) and "gauge_of" in spec:
        if name != "operator2" or spec["gauge_of"] != 1:
            ctx.fail("only operator2 may be declared as 'gauge_of: 1'", name)
        return {"gauge_of": 1}
    if not isinstance(spec, dict) or not set(spec) <= {"A", "V", "require_collar"}:
        ctx.fail(f"{name} must be 'zero', {{A: ..., V: ...}} or {{gauge_of: 1}}", name)
    try:
        sA = vector_sampler(spec.get("A"))
    except (ValueError, KeyError, TypeError) as exc:
        ctx.fail(f"bad vector preset: {exc}", name, "A")
    try:
        scalar_sampler(spec.get("V"))
    except (ValueError, KeyError, TypeError) as exc:
        ctx.fail(f"bad scalar preset: {exc}", name, "V")
    if spec.get("require_collar", True) and not support_clear_of_collar(domain, sA.support):
        ctx.fail(f"vector preset reaches the collar of width {domain.w}", name, "A")
    return {"A": spec.get("A"), "V": spec.get("V")}


def parse_config(text: str, path="<config>") -> ExperimentConfig:
    """Parse and validate configuration text; raises :class:`ConfigError`."""
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", path,
                          mark.line + 1 if mark is not None else None) from None
    ctx = _Ctx(path, lines)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path, 1)
    for k in data:
        if k not in TOP_KEYS:
            ctx.fail(f"unknown block '{k}' (expected one of {', '.join(TOP_KEYS)})", k)

    db = data.get("domain")
    if not isinstance(db, dict):
        ctx.fail("missing 'domain' block", "domain")
    L1 = _num(ctx, db, "L1", "domain", positive=True)
    L2 = _num(ctx, db, "L2", "domain", positive=True)
    N1 = _num(ctx, db, "N1", "domain", kind=int)
    N2 = _num(ctx, db, "N2", "domain", kind=int)
    w = _num(ctx, db, "w", "domain", positive=True)
    try:
        dom = (centered_domain(L1, L2, N1, N2, w) if db.get("centered", True)
               else build_domain(L1, L2, N1, N2, w))
    except ValueError as exc:
        ctx.fail(str(exc), "domain")

    op1 = _operator(ctx, data.get("operator1", "zero"), "operator1", dom)
    op2 = _operator(ctx, data.get("operator2", "zero"), "operator2", dom)

    fb = data.get("frame") or {}
    if not isinstance(fb, dict):
        ctx.fail("'frame' must be a mapping", "frame")
    xi = fb.get("xi", [])
    if not isinstance(xi, list) or any(not isinstance(x, list) or len(x) != 2 for x in xi):
        ctx.fail("'xi' must be a list of [xi1, xi2] pairs", "frame", "xi")
    xi = [[float(a), float(b)] for a, b in xi]
    for i, x in enumerate(xi):
        if x == [0.0, 0.0]:
            ctx.fail("frequency xi = 0 is not allowed", "frame", "xi", i)
    taus = fb.get("taus", [])
    if not isinstance(taus, list) or any(isinstance(t, bool) or not isinstance(t, (int, float))
                                         for t in taus):
        ctx.fail("'taus' must be a list of numbers", "frame", "taus")
    taus = [float(t) for t in taus]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        ctx.fail("'taus' must be strictly increasing", "frame", "taus")
    tmax = RESOLUTION / dom.h
    for i, t in enumerate(taus):
        if t > tmax * (1 + 1e-12):
            ctx.fail(f"tau={t!r} violates tau*h <= {RESOLUTION} (tau_max={tmax!r} on this grid)",
                     "frame", "taus", i)
        for x in xi:
            if t <= float(np.hypot(*x)):
                ctx.fail(f"tau={t!r} must exceed |xi|={float(np.hypot(*x))!r}", "frame", "taus", i)
    orientation = fb.get("orientation", 1)
    if orientation not in (1, -1):
        ctx.fail("'orientation' must be 1 or -1", "frame", "orientation")
    route = fb.get("route", "direct")
    if route not in ("direct", "spectral", "both"):
        ctx.fail("'route' must be direct, spectral or both", "frame", "route")
    rmode = fb.get("recovery_mode", "oracle")
    if rmode not in ("oracle", "spectral", "direct"):
        ctx.fail("'recovery_mode' must be oracle, spectral or direct", "frame", "recovery_mode")
    lat = fb.get("lattice") or {}
    half = _num(ctx, lat, "half", "frame", "lattice", kind=int, default=8)
    if half < 1:
        ctx.fail("'half' must be >= 1", "frame", "lattice", "half")
    period = lat.get("period")
    if period is not None:
        period = _num(ctx, lat, "period", "frame", "lattice", positive=True)

    sb = data.get("solver") or {}
    K = sb.get("K")
    if K is not None:
        K = _num(ctx, sb, "K", "solver", kind=int, positive=True)
        if K > dom.n_interior:
            ctx.fail(f"K={K} exceeds the {dom.n_interior} interior nodes", "solver", "K")
    if route in ("spectral", "both") and K is None:
        ctx.fail("spectral route needs solver.K", "frame", "route")
    tol = _num(ctx, sb, "tol", "solver", positive=True, default=1e-8)
    lambdas = sb.get("lambdas", [-10.0, -100.0, -1000.0, -10000.0])
    if not isinstance(lambdas, list) or not lambdas:
        ctx.fail("'lambdas' must be a nonempty list", "solver", "lambdas")
    lambdas = [float(v) for v in lambdas]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        ctx.fail("'lambdas' must be strictly decreasing", "solver", "lambdas")
    mu_star = sb.get("mu_star")
    if mu_star is not None:
        mu_star = _num(ctx, sb, "mu_star", "solver")

    datum = data.get("datum") or {}
    k = datum.get("k", [1.0, 2.0])
    if (not isinstance(k, list) or len(k) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in k)):
        ctx.fail("'datum.k' must be a pair of numbers", "datum", "k")

    gb = data.get("gauge") or {}
    gp = gb.get("p")
    if gp is not None:
        try:
            scalar_sampler(gp)
        except (ValueError, KeyError, TypeError) as exc:
            ctx.fail(f"bad gauge preset: {exc}", "gauge", "p")
    if op2 == {"gauge_of": 1} and gp is None:
        ctx.fail("operator2 'gauge_of' needs gauge.p", "operator2")
    gK = _num(ctx, gb, "K", "gauge", kind=int, positive=True, default=20)

    tols = dict(DEFAULT_TOLERANCES)
    tb = data.get("tolerances") or {}
    for key in tb:
        if key not in tols:
            ctx.fail(f"unknown tolerance '{key}'", "tolerances", key)
        tols[key] = _num(ctx, tb, key, "tolerances", positive=True)

    ob = data.get("output") or {}
    out_dir = str(ob.get("dir", "out"))

    return ExperimentConfig(path, dom, op1, op2, xi, taus, int(orientation), route, half, period,
                            rmode, K, tol, lambdas, mu_star, (float(k[0]), float(k[1])), gp, gK,
                            tols, out_dir, data)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from None
    return parse_config(text, str(path))
