"""Batch command-line front end.

Every command reads a line-oriented config file (``key = value``, ``#``
comments, JSON syntax for arrays), validates it against the command's
schema (unknown keys are rejected), and writes CSV with a ``#``-prefixed
header block echoing the fully resolved config, the package version and the
seed.  The header also carries a timestamp, which is the one field excluded
from reproducibility comparisons: rerunning a config with the same seed
yields a byte-identical CSV body.

Chain specs: ``two-point:p,q``, ``cycle:N,q``, ``torus:N,d``, ``inline``
(with ``q = [[...]]`` and optional ``pi = [...]`` keys), or ``file:PATH``
pointing at the structured-text chain format (fields n, Q, pi).

Weight specs: ``log``, ``power:<m>``, ``harmonic``, ``one``, ``pair``.
Entropy specs: ``heat``, ``renyi:<m>``, ``hilbertian:identity``,
``hilbertian:power:<m>``.

Errors are reported on stderr as single-line records
``error=<code> detail=<text>`` with a distinct exit status per error class.
"""

from __future__ import annotations

import argparse
import datetime
import io
import json
import sys

import numpy as np

from . import __version__, convexity, flow, metric, torus
from .chain import build_chain, chain_from_text, cycle_chain, two_point_chain
from .entropy import pair_from_name
from .errors import ConfigError, PmeflowError
from .weights import check_weight_properties, theta_from_name

REQUIRED = object()

_SCHEMAS = {
    "distance": {
        "chain": ("str", REQUIRED),
        "q": ("mat", None),
        "pi": ("vec", None),
        "weight": ("str", REQUIRED),
        "entropy": ("str", None),
        "rho0": ("vec", REQUIRED),
        "rho1": ("vec", REQUIRED),
        "steps": ("int", 16),
        "emit_path": ("bool", False),
        "out": ("str", None),
    },
    "geodesic": {
        "chain": ("str", REQUIRED),
        "q": ("mat", None),
        "pi": ("vec", None),
        "weight": ("str", REQUIRED),
        "entropy": ("str", None),
        "rho0": ("vec", REQUIRED),
        "psi0": ("vec", REQUIRED),
        "t_end": ("float", REQUIRED),
        "samples": ("int", 33),
        "out": ("str", None),
    },
    "solve-pme": {
        "chain": ("str", REQUIRED),
        "q": ("mat", None),
        "pi": ("vec", None),
        "entropy": ("str", REQUIRED),
        "rho0": ("vec", REQUIRED),
        "t_end": ("float", REQUIRED),
        "samples": ("int", 60),
        "out": ("str", None),
    },
    "kappa": {
        "chain": ("str", REQUIRED),
        "q": ("mat", None),
        "pi": ("vec", None),
        "weight": ("str", REQUIRED),
        "entropy": ("str", REQUIRED),
        "seed": ("int", REQUIRED),
        "starts": ("int", 64),
        "refine": ("int", 6),
        "out": ("str", None),
    },
    "two-point-kappa": {
        "chain": ("str", REQUIRED),
        "entropy": ("str", REQUIRED),
        "out": ("str", None),
    },
    "counterexample": {
        "n_list": ("ints", [6, 8, 10]),
        "q": ("float", 1.0),
        "eps": ("float", 1e-4),
        "out": ("str", None),
    },
    "check-inequalities": {
        "chain": ("str", REQUIRED),
        "q": ("mat", None),
        "pi": ("vec", None),
        "weight": ("str", REQUIRED),
        "entropy": ("str", REQUIRED),
        "kappa": ("float", REQUIRED),
        "lam": ("float", REQUIRED),
        "grid": ("int", 20),
        "steps": ("int", 16),
        "seed": ("int", None),
        "out": ("str", None),
    },
    "contraction": {
        "chain": ("str", REQUIRED),
        "q": ("mat", None),
        "pi": ("vec", None),
        "weight": ("str", REQUIRED),
        "entropy": ("str", REQUIRED),
        "rho0": ("vec", REQUIRED),
        "sigma0": ("vec", REQUIRED),
        "kappa": ("float", REQUIRED),
        "times": ("vec", REQUIRED),
        "steps": ("int", 16),
        "out": ("str", None),
    },
    "gh-study": {
        "m": ("float", REQUIRED),
        "n_list": ("ints", [8, 16, 32]),
        "cos0": ("vec", REQUIRED),
        "sin0": ("vec", []),
        "cos1": ("vec", REQUIRED),
        "sin1": ("vec", []),
        "steps": ("int", 32),
        "resolution": ("int", 4096),
        "out": ("str", None),
    },
    "validate-theta": {
        "weight": ("str", REQUIRED),
        "entropy": ("str", None),
        "grid_min": ("float", 1e-3),
        "grid_max": ("float", 1e3),
        "grid_points": ("int", 13),
        "out": ("str", None),
    },
}


def _parse_value(kind, raw, key):
    try:
        if kind == "str":
            return raw
        value = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"key {key!r}: unparseable value ({exc})") from exc
    if kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"key {key!r}: expected an integer")
        return value
    if kind == "float":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"key {key!r}: expected a number")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"key {key!r}: expected true/false")
        return value
    if kind == "vec":
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"key {key!r}: expected a numeric array")
        return [float(v) for v in value]
    if kind == "ints":
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"key {key!r}: expected an integer array")
        return value
    if kind == "mat":
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            raise ConfigError(f"key {key!r}: expected an array of arrays")
        return value
    raise ConfigError(f"key {key!r}: unknown schema type {kind}")  # pragma: no cover


def parse_config(text: str, command: str) -> dict:
    schema = _SCHEMAS[command]
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for command {command!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _parse_value(schema[key][0], value, key)
    config = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            config[key] = raw[key]
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} for command {command!r}")
        else:
            config[key] = default
    return config


def resolve_chain(config):
    spec = config["chain"]
    if spec == "inline":
        if config.get("q") is None:
            raise ConfigError("chain = inline requires a 'q' key")
        return build_chain(np.asarray(config["q"], dtype=float), pi=config.get("pi"))
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        try:
            text = open(path).read()
        except OSError as exc:
            raise ConfigError(f"cannot read chain file {path!r}: {exc}") from exc
        return chain_from_text(text)
    parts = spec.split(":")
    try:
        if parts[0] == "two-point" and len(parts) == 2:
            p, q = (float(v) for v in parts[1].split(","))
            return two_point_chain(p, q)
        if parts[0] == "cycle" and len(parts) == 2:
            n, q = parts[1].split(",")
            return cycle_chain(int(n), float(q))
        if parts[0] == "torus" and len(parts) == 2:
            n, d = (int(v) for v in parts[1].split(","))
            return torus.build_torus(n, d).chain
    except ValueError as exc:
        raise ConfigError(f"bad chain spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown chain spec {spec!r}")


def resolve_weight(config):
    pair = pair_from_name(config["entropy"]) if config.get("entropy") else None
    return theta_from_name(config["weight"], pair=pair)


class CsvWriter:
    def __init__(self, command, config):
        self.buf = io.StringIO()
        self.buf.write(f"# pmeflow {__version__}\n")
        self.buf.write(f"# command = {command}\n")
        for key in sorted(config):
            value = config[key]
            if isinstance(value, float):
                value = repr(value)
            elif isinstance(value, (list, bool)) or value is None:
                value = json.dumps(value)
            self.buf.write(f"# {key} = {value}\n")
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.buf.write(f"# timestamp = {stamp}\n")

    def row(self, *cells):
        self.buf.write(",".join(_fmt(c) for c in cells) + "\n")

    def emit(self, out_path):
        text = self.buf.getvalue()
        if out_path:
            with open(out_path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _fmt(c):
    if isinstance(c, float):
        return f"{c:.12g}"
    return str(c)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _cmd_distance(config):
    chain = resolve_chain(config)
    theta = resolve_weight(config)
    value, path = metric.distance(
        chain, theta, np.asarray(config["rho0"]), np.asarray(config["rho1"]), config["steps"]
    )
    writer = CsvWriter("distance", config)
    writer.row("value", "iterations", "feas_residual", "converged")
    writer.row(value, path.iterations, path.feas_residual, path.converged)
    if config["emit_path"]:
        n = path.densities.shape[1]
        writer.row(*(["t"] + [f"rho{i}" for i in range(n)]))
        for k, t in enumerate(path.times):
            writer.row(t, *path.densities[k])
    writer.emit(config["out"])
    return f"{value:.8f}"


def _cmd_geodesic(config):
    chain = resolve_chain(config)
    theta = resolve_weight(config)
    gp = metric.geodesic_shoot(
        chain,
        theta,
        np.asarray(config["rho0"]),
        np.asarray(config["psi0"]),
        config["t_end"],
        samples=config["samples"],
    )
    writer = CsvWriter("geodesic", config)
    n = gp.densities.shape[1]
    writer.row(*(["t"] + [f"rho{i}" for i in range(n)] + [f"psi{i}" for i in range(n)] + ["action"]))
    for i, t in enumerate(gp.times):
        writer.row(t, *gp.densities[i], *gp.potentials[i], gp.action_values[i])
    writer.emit(config["out"])
    return f"{gp.action_values[0]:.8f}"


def _cmd_solve_pme(config):
    chain = resolve_chain(config)
    pair = pair_from_name(config["entropy"])
    traj = flow.solve_pme(
        chain, pair, np.asarray(config["rho0"]), config["t_end"], samples=config["samples"]
    )
    writer = CsvWriter("solve-pme", config)
    n = traj.states.shape[1]
    writer.row(*(["t"] + [f"rho{i}" for i in range(n)] + ["mass_defect", "F", "I"]))
    for i, t in enumerate(traj.times):
        writer.row(t, *traj.states[i], traj.mass_defect[i], traj.entropy[i], traj.dissipation[i])
    writer.emit(config["out"])
    return f"{traj.entropy[-1]:.8f}"


def _cmd_kappa(config):
    chain = resolve_chain(config)
    pair = pair_from_name(config["entropy"])
    theta = resolve_weight({**config, "entropy": config["entropy"]})
    est = convexity.kappa_estimate(
        chain, pair, theta, seed=config["seed"], starts=config["starts"], refine=config["refine"]
    )
    writer = CsvWriter("kappa", config)
    writer.row("estimate", "converged")
    writer.row(est.value, est.converged)
    writer.row(*(["rho_min"] + [f"rho{i}" for i in range(chain.n)]))
    writer.row("", *est.rho)
    writer.row(*(["psi_min"] + [f"psi{i}" for i in range(chain.n)]))
    writer.row("", *est.psi)
    writer.row("origin", "value")
    for start in est.starts:
        writer.row(start.origin, start.value)
    writer.emit(config["out"])
    return f"{est.value:.8f}"


def _cmd_two_point_kappa(config):
    spec = config["chain"]
    if not spec.startswith("two-point:"):
        raise ConfigError("two-point-kappa needs chain = two-point:p,q")
    p, q = (float(v) for v in spec.split(":", 1)[1].split(","))
    if p <= 0 or q <= 0:
        raise ConfigError("two-point rates must be positive")
    pair = pair_from_name(config["entropy"])
    result = convexity.two_point_kappa(p, q, pair)
    writer = CsvWriter("two-point-kappa", config)
    writer.row("value", "alpha", "at_boundary")
    writer.row(result.value, result.alpha, result.at_boundary)
    writer.emit(config["out"])
    return f"{result.value:.6f}"


def _cmd_counterexample(config):
    writer = CsvWriter("counterexample", config)
    writer.row("N", "q", "eps", "A", "B", "ratio")
    last = None
    for n in config["n_list"]:
        r = convexity.circle_counterexample(n, config["q"], config["eps"])
        writer.row(r.n, r.q, r.eps, r.a_value, r.b_value, r.ratio)
        last = r
    writer.emit(config["out"])
    return f"{last.b_value:.8f}" if last else ""


def _cmd_check_inequalities(config):
    chain = resolve_chain(config)
    pair = pair_from_name(config["entropy"])
    theta = resolve_weight(config)
    count = config["grid"]
    if chain.n == 2:
        lo = 1e-3
        hi = (1.0 - lo * chain.pi[1]) / chain.pi[0]
        ra = np.linspace(lo, hi - 1e-3, count)
        grid = [np.array([r, (1.0 - r * chain.pi[0]) / chain.pi[1]]) for r in ra]
    else:
        if config["seed"] is None:
            raise ConfigError("check-inequalities on chains with n > 2 needs a seed")
        rng = np.random.default_rng(config["seed"])
        grid = [rng.dirichlet(np.ones(chain.n)) / chain.pi for _ in range(count)]
    writer = CsvWriter("check-inequalities", config)
    writer.row("index", "fwi_residual", "edi_residual")
    worst_fwi = -np.inf
    for i, rho in enumerate(grid):
        fwi = convexity.check_fwi(
            chain, pair, theta, rho, config["kappa"], n_steps=config["steps"]
        )
        edi = convexity.check_edi(chain, pair, rho, config["lam"])
        worst_fwi = max(worst_fwi, fwi)
        writer.row(i, fwi, edi)
    writer.emit(config["out"])
    return f"{worst_fwi:.3e}"


def _cmd_contraction(config):
    chain = resolve_chain(config)
    pair = pair_from_name(config["entropy"])
    theta = resolve_weight(config)
    ts, res = convexity.contraction_check(
        chain,
        pair,
        theta,
        np.asarray(config["rho0"]),
        np.asarray(config["sigma0"]),
        config["kappa"],
        config["times"],
        n_steps=config["steps"],
    )
    writer = CsvWriter("contraction", config)
    writer.row("t", "residual")
    for t, r in zip(ts, res):
        writer.row(t, r)
    writer.emit(config["out"])
    return f"{res.max():.3e}"


def _cmd_gh_study(config):
    d0 = torus.CircleDensity(tuple(config["cos0"]), tuple(config["sin0"]))
    d1 = torus.CircleDensity(tuple(config["cos1"]), tuple(config["sin1"]))
    rows = torus.gh_table(
        config["m"],
        config["n_list"],
        (d0, d1),
        n_steps=config["steps"],
        resolution=config["resolution"],
    )
    writer = CsvWriter("gh-study", config)
    writer.row("N", "W_N", "W2", "gap")
    for r in rows:
        writer.row(r.n_side, r.w_discrete, r.w_continuous, r.gap)
    writer.emit(config["out"])
    return f"{rows[-1].gap:.3e}"


def _cmd_validate_theta(config):
    pair = pair_from_name(config["entropy"]) if config.get("entropy") else None
    theta = theta_from_name(config["weight"], pair=pair)
    grid = np.logspace(
        np.log10(config["grid_min"]), np.log10(config["grid_max"]), config["grid_points"]
    )
    report = check_weight_properties(theta, grid)
    writer = CsvWriter("validate-theta", config)
    writer.row(
        "name", "symmetry_gap", "min_value", "monotone_violation",
        "max_hessian_eig", "doubling_violation", "c_theta", "diagonal_gap", "ok",
    )
    writer.row(
        report.name, report.symmetry_gap, report.min_value, report.monotone_violation,
        report.max_hessian_eig, report.doubling_violation, report.c_theta,
        report.diagonal_gap, report.ok(),
    )
    writer.emit(config["out"])
    return "ok" if report.ok() else "violations"


_COMMANDS = {
    "distance": _cmd_distance,
    "geodesic": _cmd_geodesic,
    "solve-pme": _cmd_solve_pme,
    "kappa": _cmd_kappa,
    "two-point-kappa": _cmd_two_point_kappa,
    "counterexample": _cmd_counterexample,
    "check-inequalities": _cmd_check_inequalities,
    "contraction": _cmd_contraction,
    "gh-study": _cmd_gh_study,
    "validate-theta": _cmd_validate_theta,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmeflow",
        description="Transport metrics and entropy gradient flows on finite reversible Markov chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the line-oriented config file")
        p.add_argument("--out", default=None, help="CSV output path (default: config 'out' or stdout)")
    args = parser.parse_args(argv)

    try:
        try:
            text = open(args.config).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        config = parse_config(text, args.command)
        if args.out is not None:
            config["out"] = args.out
        headline = _COMMANDS[args.command](config)
        if config.get("out"):
            print(headline)
        return 0
    except PmeflowError as exc:
        print(f"error={exc.code} detail={exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
