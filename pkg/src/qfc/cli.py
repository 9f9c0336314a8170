"""Command-line front end producing reproducible CSV/JSON artifacts.

Every artifact embeds the fully resolved configuration and the library
version: CSV files start with ``# qfc <version> config=<json>``, JSON files
carry top-level ``version`` and ``config`` keys.  Feeding the embedded config
back through ``--input`` reproduces the run byte for byte.

Exit codes: 0 success, 2 invalid input (JSON error report on stderr), 3
numerical budget exhausted (partial results written and flagged).
"""

from __future__ import annotations

import argparse
import cmath
import copy
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .detector import (DetectorTriadModel, LinearHeisenberg, TruncatedFock,
                       signal_fit)
from .fockbox import protocol_from_json, run_protocol, signal_derivative
from .quadrature import QuadratureError
from .smearing import (BipartiteSystem, bipartite_no_signalling, localization_report,
                       random_hermitian, random_unitary, smearing_FG, smearing_JK)
from .spacetime import Rule, causal_order, regions_from_json, validate_restriction
from .specfun import PrecisionLossError, scaled_pcfd
from .wavepacket import (Gaussian, Tabulated, falloff_fit, psi_1d, psi_3d_closed_form,
                         psi_3d_quadrature, psi_tabulated)
from .spacetime import SpacetimePoint

log = logging.getLogger("qfc")

C2_REFERENCE = 32.4697
EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3


class BudgetExhausted(Exception):
    """A numerical routine ran out of budget; ``partial`` holds what was computed."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


class Artifact:
    """Tabular rows plus a free-form summary for one run."""

    def __init__(self, columns, rows, summary=None):
        self.columns = list(columns)
        self.rows = rows
        self.summary = summary or {}


# --------------------------------------------------------------------------
# default configurations (the published parameters)

DEFAULTS = {
    "causal-order": {
        "d": 1,
        "regions": [
            {"kind": "ball", "label": "kick", "center": [-1.0, 0.0], "radius": 0.1},
            {"kind": "slab", "label": "measure", "t0": 0.0, "t1": 1.0},
            {"kind": "ball", "label": "field", "center": [1.5, 3.0], "radius": 0.1},
        ],
    },
    "wavepacket": {"d": 3, "k0": 10.0, "sigma": 1.0, "t": [0.0, 10.0, 20.0],
                   "z": [-5.0, 30.0], "n": 700, "method": "closed-form"},
    "falloff": {"k0": 10.0, "sigma": 1.0, "delta": 0.05, "t_range": [50.0, 200.0],
                "n_samples": 16},
    "protocol": {
        "model": {"L": 2 * math.pi, "modes": [[1.0], [-1.0]], "n_max": 3},
        "initial": {"one_particle": {"mode": 0}},
        "steps": [
            {"kind": "kick", "X": [-0.5, 0.3], "lambda": 0.0},
            {"kind": "rotate", "a": {"mode": 0}, "b": {"mode": 1}, "C": 0.0, "D": -1.0},
            {"kind": "field", "Y": [1.0, 2.5]},
        ],
    },
    "detector": {"w1": 1.0, "w2": 1.0, "Omega": 1.0, "x1": 0.0, "x2": 2 * math.pi,
                 "lambda1": 0.5, "T": math.sqrt(2) * math.pi, "backend": "linear",
                 "lambda2_grid": [0.0, 0.01, -0.01, 0.02, -0.02, 0.03, -0.03]},
    "smearing": {"kind": "JK", "k0": 10.0, "sigma": 1.0, "n_k": 1024, "x": [-20.0, 20.0],
                 "n_x": 801, "window": [-6.0, 6.0], "k": [1.0], "no_signalling_draws": 20},
    "specfun-probe": {"nu": -1.5, "z": [[0.0, 0.0], [1.0, 0.5], [-3.0, 12.0], [0.0, 100.0]],
                      "method": "auto"},
}

TOLERANCE_KEYS = {"rtol", "h", "dps"}


# --------------------------------------------------------------------------
# subcommand runners


def _tol(cfg, key, default):
    return float(cfg.get("tolerance", {}).get(key, default))


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(v) for v in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_causal_order(cfg, threads):
    regions = regions_from_json(cfg)
    res = causal_order(regions)
    ext = [i + 1 for i in res.linear_extension] if res.linear_extension else None
    verdicts = {}
    for rule in Rule:
        v = validate_restriction(regions, rule)
        verdicts[rule.value] = {"passed": v.passed, "reason": v.reason,
                                "offending": [i + 1 for i in v.offending] if v.offending else None}
    labels = [getattr(r, "label", "") or str(i + 1) for i, r in enumerate(regions)]
    rows = [[pos + 1, idx, labels[idx - 1]] for pos, idx in enumerate(ext or [])]
    summary = {"acyclic": res.acyclic, "linear_extension": ext,
               "relation": res.relation.astype(int).tolist(),
               "raw_relation": res.raw.astype(int).tolist(),
               "restrictions": verdicts}
    return Artifact(["position", "region", "label"], rows, summary)


def run_wavepacket(cfg, threads):
    d = int(cfg.get("d", 3))
    k0, sigma = float(cfg["k0"]), float(cfg["sigma"])
    z = np.linspace(float(cfg["z"][0]), float(cfg["z"][1]), int(cfg["n"]))
    method = cfg.get("method", "closed-form")
    rtol = _tol(cfg, "rtol", 1e-12 if method == "closed-form" else 1e-8)
    if d == 3:
        packet = Gaussian((0.0, 0.0, k0), sigma)
        if method == "closed-form":
            def ev(tz):
                return psi_3d_closed_form(packet, tz[0], tz[1], rtol=rtol)[0]
        elif method == "quadrature":
            dps = int(_tol(cfg, "dps", 50))

            def ev(tz):
                return psi_3d_quadrature(packet, tz[0], tz[1], rtol=rtol, dps=dps)
        else:
            raise ValueError(f"unknown method {method!r}")
    elif d == 1:
        packet = Gaussian((k0,), sigma)
        method = "quadrature"

        def ev(tz):
            return psi_1d(packet, SpacetimePoint(tz[0], (tz[1],)), rtol=min(rtol, 1e-9))
    else:
        raise ValueError("wavepacket supports d = 1 or d = 3")
    pts = [(float(t), float(zz)) for t in cfg["t"] for zz in z]
    rows = []
    try:
        values = _map(ev, pts, threads)
    except (PrecisionLossError, QuadratureError) as exc:
        raise BudgetExhausted(str(exc), Artifact(["t", "z", "re_psi", "im_psi", "method"], rows))
    for (t, zz), v in zip(pts, values):
        rows.append([t, zz, v.real, v.imag, method])
    return Artifact(["t", "z", "re_psi", "im_psi", "method"], rows)


def run_falloff(cfg, threads):
    packet = Gaussian((0.0, 0.0, float(cfg["k0"])), float(cfg["sigma"]))
    fit = falloff_fit(packet, float(cfg["delta"]), cfg["t_range"], int(cfg["n_samples"]))
    rows = [[t, e, fit.exponent] for t, e in zip(fit.t, fit.envelope)]
    return Artifact(["t", "envelope", "fit_exponent"], rows,
                    {"exponent": fit.exponent, "gamma_hat": fit.gamma_hat})


def run_protocol_cmd(cfg, threads):
    model, protocol = protocol_from_json(cfg)
    res = run_protocol(model, protocol)
    has_kick = any(s.get("kind") == "kick" for s in cfg["steps"])
    deriv = signal_derivative(model, protocol, h=_tol(cfg, "h", 1e-4)) if has_kick else None
    branches = [{"outcomes": list(k), "probability": p} for k, p in sorted(res.branches.items())]
    rows = [["expectation", res.expectation]]
    if deriv is not None:
        rows.append(["signal_derivative", deriv])
    rows += [["branch:" + "-".join(map(str, b["outcomes"])), b["probability"]] for b in branches]
    return Artifact(["quantity", "value"], rows,
                    {"expectation": res.expectation, "branches": branches,
                     "signal_derivative": deriv})


def _detector_model(cfg):
    b = cfg.get("backend", "linear")
    if b == "linear":
        backend = LinearHeisenberg()
    elif isinstance(b, dict):
        backend = TruncatedFock(int(b["n_det"]), int(b["n_field"]))
    else:
        raise ValueError(f"unknown backend {b!r}")
    fields = {k: float(cfg[k]) for k in ("w1", "w2", "Omega", "x1", "x2", "lambda1", "T")}
    return DetectorTriadModel(**fields, backend=backend)


def run_detector(cfg, threads):
    model = _detector_model(cfg)
    fit = signal_fit(model, cfg["lambda2_grid"])
    rows = [[l, e] for l, e in zip(fit.lambda2, fit.energies)]
    summary = {"c0": fit.c0, "c2": fit.c2, "c4": fit.c4, "c2_reference": C2_REFERENCE,
               "rel_err": abs(fit.c2 - C2_REFERENCE) / C2_REFERENCE,
               "parity_defect": fit.parity_defect,
               "spacelike": model.T < abs(model.x2 - model.x1)}
    return Artifact(["lambda2", "E1"], rows, summary)


def _report(profile, window):
    r = localization_report(profile, window)
    return {"tail_metric": r.tail_metric, "decay_classification": r.decay_classification}


def run_smearing(cfg, threads):
    x = np.linspace(float(cfg["x"][0]), float(cfg["x"][1]), int(cfg["n_x"]))
    window = tuple(float(v) for v in cfg["window"])
    kind = cfg.get("kind", "JK")
    if kind == "FG":
        F, G = smearing_FG(cfg["k"], x)
        rows = [list(r) for r in zip(x, F.values, G.values)]
        columns = ["x", "F", "G"]
        summary = {"F": _report(F, window), "G": _report(G, window)}
    elif kind == "JK":
        packet = Gaussian((float(cfg["k0"]),), float(cfg["sigma"]))
        tab = Tabulated.from_gaussian(packet, n=int(cfg["n_k"]))
        J, K = smearing_JK(tab, x, window)
        two_im = [2 * psi_tabulated(tab, SpacetimePoint(0.0, (xx,))).imag for xx in x]
        rows = [list(r) for r in zip(x, J.values, K.values, two_im)]
        columns = ["x", "J", "K", "2ImPsi"]
        summary = {"J": _report(J, window), "K": _report(K, window),
                   "max_K_minus_2ImPsi": float(np.max(np.abs(K.values - two_im)))}
    else:
        raise ValueError(f"unknown smearing kind {kind!r}")
    n_draws = int(cfg.get("no_signalling_draws", 0))
    if n_draws:
        rng = np.random.default_rng(int(cfg.get("seed", 0)))
        local, nonlocal_ = 0.0, []
        for _ in range(n_draws):
            dA, dB = (int(v) for v in rng.integers(2, 5, size=2))
            system = BipartiteSystem.random(rng, dA, dB)
            U1 = random_unitary(rng, dA)
            lams = rng.uniform(-2, 2, size=5)
            local = max(local, bipartite_no_signalling(system, U1, lams))
            nonlocal_.append(bipartite_no_signalling(system, U1, lams,
                                                     random_hermitian(rng, dA * dB)))
        summary["no_signalling"] = {"draws": n_draws, "max_deviation_local": local,
                                    "min_deviation_nonlocal": float(min(nonlocal_))}
    return Artifact(columns, rows, summary)


def run_specfun_probe(cfg, threads):
    nu = float(cfg["nu"])
    rtol = _tol(cfg, "rtol", 1e-12)
    columns = ["re_z", "im_z", "re_D", "im_D", "log_abs_D", "arg_D", "method", "converged"]
    rows = []
    for zz in cfg["z"]:
        z = complex(float(zz[0]), float(zz[1]))
        try:
            r = scaled_pcfd(nu, z, method=cfg.get("method", "auto"), rtol=rtol)
        except PrecisionLossError as exc:
            raise BudgetExhausted(str(exc), Artifact(columns, rows))
        logD = r.log_scaled - z * z / 4
        # |D| can leave double range (e.g. D(100i) ~ exp(2500)); keep the log form too
        v = cmath.exp(logD) if logD.real < 709 else complex(math.inf, math.inf)
        rows.append([z.real, z.imag, v.real, v.imag, logD.real,
                     math.remainder(logD.imag, 2 * math.pi), r.method, int(r.converged)])
    return Artifact(columns, rows)


RUNNERS = {
    "causal-order": run_causal_order,
    "wavepacket": run_wavepacket,
    "falloff": run_falloff,
    "protocol": run_protocol_cmd,
    "detector": run_detector,
    "smearing": run_smearing,
    "specfun-probe": run_specfun_probe,
}


# --------------------------------------------------------------------------
# serialisation


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def _config_line(config):
    return json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))


def render(artifact: Artifact, config: dict, fmt: str, partial: bool = False) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# qfc {__version__} config={_config_line(config)}\n")
        if partial:
            buf.write("# partial=1\n")
        buf.write(",".join(artifact.columns) + "\n")
        for row in artifact.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()
    doc = {"version": __version__, "config": _jsonable(config),
           "columns": artifact.columns,
           "rows": [[_jsonable(v) for v in row] for row in artifact.rows],
           "summary": _jsonable(artifact.summary)}
    if partial:
        doc["partial"] = True
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def read_embedded_config(path) -> dict:
    """Recover the resolved config stored in a CSV or JSON artifact."""
    text = Path(path).read_text()
    if text.startswith("# qfc "):
        first = text.split("\n", 1)[0]
        return json.loads(first.split("config=", 1)[1])
    return json.loads(text)["config"]


# --------------------------------------------------------------------------
# entry point


def _parse_tolerance(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"tolerance override {item!r} is not KEY=VAL")
        if key not in TOLERANCE_KEYS:
            raise ValueError(f"unknown tolerance key {key!r}; expected one of {sorted(TOLERANCE_KEYS)}")
        out[key] = float(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="JSON config; keys override the defaults")
    common.add_argument("--output", help="artifact path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="artifact format (default: from the output suffix, else csv)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomised draws (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--tolerance", action="append", metavar="KEY=VAL",
                        help="numerical tolerance override (rtol, h, dps)")
    parser = argparse.ArgumentParser(
        prog="qfc", description="Measurement interventions in free scalar field theory.")
    parser.add_argument("--version", action="version", version=f"qfc {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "causal-order": "causal relation and linear extension of intervention regions",
        "wavepacket": "one-particle wavefunction sweep of a Gaussian packet",
        "falloff": "power-law fit of the signal just outside the light cone",
        "protocol": "run an intervention protocol on a truncated box-mode Fock space",
        "detector": "two-detector energy and its quadratic coupling coefficient",
        "smearing": "smearing profiles, localization verdicts and no-signalling check",
        "specfun-probe": "tabulate the parabolic cylinder function",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def resolve_config(args) -> dict:
    config = copy.deepcopy(DEFAULTS[args.subcommand])
    if args.input:
        with open(args.input) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ValueError("config document must be a JSON object")
        if "config" in user and "version" in user:
            user = user["config"]  # a previous JSON artifact
        config.update(user)
    if args.seed is not None:
        config["seed"] = args.seed
    config["seed"] = int(config.get("seed", 0))
    if config["seed"] < 0:
        raise ValueError("seed must be non-negative")
    tol = dict(config.get("tolerance", {}))
    tol.update(_parse_tolerance(args.tolerance))
    config["tolerance"] = tol
    return config


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QFC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = args.format or ("json" if (args.output or "").endswith(".json") else "csv")
    try:
        if args.threads < 1:
            raise ValueError("--threads must be at least 1")
        config = resolve_config(args)
        artifact = RUNNERS[args.subcommand](config, args.threads)
    except BudgetExhausted as exc:
        log.error("numerical budget exhausted: %s", exc)
        _emit(render(exc.partial, config, fmt, partial=True), args.output)
        return EXIT_BUDGET
    except (ValueError, KeyError, TypeError, OSError, ArithmeticError) as exc:
        report = {"error": type(exc).__name__, "message": str(exc),
                  "subcommand": args.subcommand}
        sys.stderr.write(json.dumps(report) + "\n")
        return EXIT_INVALID
    _emit(render(artifact, config, fmt), args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
