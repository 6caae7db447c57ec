"""Command-line runner.

Every subcommand reads an optional flat JSON config (``--config``); flags given
on the command line override it.  Outputs are deterministic for a given
config and seed and carry ``config_hash``, ``seed`` and ``version``.

Exit codes: 0 success, 2 configuration error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cavity import CavityParams, reflection_coefficient, regime_classify
from .errors import ConfigError, CutoffTooSmall, ValidationFailure
from .metrics import CLASSICAL_BENCHMARK, average_fidelity_vs_ratio, fidelity_map, square_grid

EXIT_CONFIG = 2
EXIT_VALIDATION = 3

# per-command defaults; a key present here is also an accepted config key
DEFAULTS = {
    "channel": {"alpha": 1.5, "cutoff": 0},
    "teleport": {"alpha": 4.5, "beta": None, "trials": 1000},
    "fidelity-map": {"alpha": 3.0, "beta": None, "half_width": None, "points": 101},
    "noise-sweep": {
        "panel": "c",
        "alpha": 1.0,
        "alphas": [1.0, 2.0, 3.0],
        "gamma_phi_hz": 1e4,
        "gamma_hz": 0.0,
        "l_att_km": 25.5,
        "c_mps": 2.998e8,
        "d0_max_km": 30.0,
        "r_alpha": 0.03,
        "decays": [0.1, 0.3, 0.5],
        "points": 61,
        "convention": "reduced",
    },
    "cavity-sweep": {
        "g": 10.0,
        "kappa": 1.0,
        "gamma0": 0.1,
        "eta": 0.1,
        "delta_min": -20.0,
        "delta_max": 20.0,
        "points": 401,
    },
    "validate": {"alpha": 1.5, "beta": 0.5, "cutoff": 60},
}
COMMON = {"seed": 0, "out": None}


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags (in that order)."""
    allowed = {**COMMON, **DEFAULTS[command]}
    cfg = dict(allowed)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config: top level must be a JSON object")
        unknown = sorted(set(loaded) - set(allowed))
        if unknown:
            raise ConfigError(f"config: unknown keys for {command}: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _positive(cfg, key, allow_zero=False):
    v = cfg[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or math.isnan(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"{key}: expected a {'non-negative' if allow_zero else 'positive'} number, got {v!r}")
    return v


def _int_at_least(cfg, key, lo):
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"{key}: expected an integer >= {lo}, got {v!r}")
    return v


def _stamp(cfg: dict) -> dict:
    # the output path is not a parameter, so it stays out of the hash
    params = {k: v for k, v in cfg.items() if k != "out"}
    return {"config_hash": config_hash(params), "seed": cfg["seed"], "version": __version__}


def _emit(cfg: dict, text: str, meta: dict | None = None):
    """Write ``text`` to ``--out`` (plus a ``.meta.json`` sidecar) or stdout."""
    if cfg["out"]:
        path = Path(cfg["out"])
        path.write_text(text)
        if meta is not None:
            Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_channel(cfg: dict) -> int:
    from .fock_oracle import cross_validate, required_cutoff
    from .protocol import build_channel
    from .states import spin_density

    alpha = _positive(cfg, "alpha", allow_zero=True)
    cutoff = cfg["cutoff"] or required_cutoff(alpha)
    ket = build_channel(alpha)
    rho = spin_density(ket)
    out = {
        **_stamp(cfg),
        "alpha": alpha,
        "terms": ket.pretty(),
        "norm": ket.norm(),
        "spin1_purity": float(np.trace(rho @ rho).real),
        "cutoff": cutoff,
        "fock_deviation": cross_validate(ket, cutoff),
    }
    _emit(cfg, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_teleport(cfg: dict) -> int:
    from .protocol import run_experiment, summarize

    alpha = _positive(cfg, "alpha")
    beta = alpha / 3 if cfg["beta"] is None else _positive(cfg, "beta")
    cfg["beta"] = beta
    n = _int_at_least(cfg, "trials", 1)
    seed = _int_at_least(cfg, "seed", 0)
    if not alpha > beta:
        raise ConfigError(f"alpha: must exceed beta ({alpha} <= {beta})")
    stamp = _stamp(cfg)
    records = run_experiment(alpha, beta, n, seed)
    lines = [json.dumps({**r.to_json_dict(), "config_hash": stamp["config_hash"]}, sort_keys=True) for r in records]
    summary = {**stamp, "alpha": alpha, "beta": beta, **summarize(records)}
    _emit(cfg, "\n".join(lines) + "\n", summary)
    sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def cmd_fidelity_map(cfg: dict) -> int:
    alpha = _positive(cfg, "alpha")
    beta = alpha / 3 if cfg["beta"] is None else _positive(cfg, "beta")
    half = alpha + beta + 2 if cfg["half_width"] is None else _positive(cfg, "half_width")
    cfg.update(beta=beta, half_width=half)
    pts = _int_at_least(cfg, "points", 2)
    fmap = fidelity_map(alpha, beta, square_grid(half, pts))
    meta = {**_stamp(cfg), **fmap.metadata, "classical_benchmark": CLASSICAL_BENCHMARK}
    meta["classical_fraction"] = float(fmap.classical_mask().mean())
    _emit(cfg, fmap.to_csv(), meta)
    return 0


def cmd_noise_sweep(cfg: dict) -> int:
    from .noise import NoiseParams, average_fidelity_noisy, fidelity_vs_distance

    panel = cfg["panel"]
    pts = _int_at_least(cfg, "points", 2)
    conv = cfg["convention"]
    if conv not in ("reduced", "standard"):
        raise ConfigError(f"convention: expected 'reduced' or 'standard', got {conv!r}")
    if panel == "a":
        r_alpha = _positive(cfg, "r_alpha", allow_zero=True)
        if r_alpha > 1:
            raise ConfigError(f"r_alpha: panel a fixes alpha = 1, so r_alpha must be <= 1, got {r_alpha}")
        grid = np.linspace(0.0, 1.0, pts)
        header = ["gamma_phi_tau", "gamma_tau", "r_alpha", "f_bar", "benchmark"]
        rows = []
        for gpt in grid:
            for gt in grid:
                # tau = 1 s turns the decay products into rates
                p = NoiseParams(gamma_phi=gpt, gamma=gt, tau=1.0, r=r_alpha)
                rows.append([gpt, gt, r_alpha, average_fidelity_noisy(p, 1.0, conv), CLASSICAL_BENCHMARK])
    elif panel == "b":
        alpha = _positive(cfg, "alpha")
        header = ["decay", "r", "r_alpha", "f_bar", "benchmark"]
        rows = []
        for dec in cfg["decays"]:
            for r in np.linspace(0.0, 1.0, pts):
                p = NoiseParams(gamma_phi=dec, gamma=dec, tau=1.0, r=float(r))
                rows.append([dec, r, r * alpha, average_fidelity_noisy(p, alpha, conv), CLASSICAL_BENCHMARK])
    elif panel == "c":
        l_att = _positive(cfg, "l_att_km") * 1e3
        c = _positive(cfg, "c_mps")
        d0s = np.linspace(0.0, _positive(cfg, "d0_max_km") * 1e3, pts)
        header = ["alpha", "d0_km", "tau_s", "r_sq", "f_bar", "benchmark"]
        rows = []
        for alpha in cfg["alphas"]:
            for row in fidelity_vs_distance(alpha, cfg["gamma_phi_hz"], cfg["gamma_hz"], l_att, c, d0s, conv):
                rows.append([alpha, row["d0_km"], row["tau_s"], row["r_sq"], row["f_bar"], row["benchmark"]])
    else:
        raise ConfigError(f"panel: expected one of a, b, c, got {panel!r}")
    _emit(cfg, _csv(header, rows), {**_stamp(cfg), "panel": panel, "columns": header})
    return 0


def cmd_cavity_sweep(cfg: dict) -> int:
    try:
        base = CavityParams(g=cfg["g"], kappa=cfg["kappa"], gamma0=cfg["gamma0"], eta=cfg["eta"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cavity parameters: {exc}") from exc
    pts = _int_at_least(cfg, "points", 1)
    rows = []
    for d in np.linspace(cfg["delta_min"], cfg["delta_max"], pts):
        p = CavityParams(base.g, base.kappa, base.gamma0, base.eta, float(d))
        r = reflection_coefficient(p)
        rows.append([d, r.real, r.imag, abs(r), regime_classify(p).value])
    _emit(cfg, _csv(["delta_omega", "re_r", "im_r", "abs_r", "regime"], rows), _stamp(cfg))
    return 0


def run_validation(cfg: dict) -> dict:
    """All oracle cross-checks; returns a report with a ``failures`` list."""
    from .fock_oracle import cross_validate, evolve_protocol_fock, max_deviation
    from .noise import (
        NoiseParams,
        average_fidelity_bloch,
        average_fidelity_noisy,
        condition_and_trace,
        noisy_pipeline,
        teleported_density,
        unravelled_density,
    )
    from .protocol import InputQubit, build_channel, evolve_stages, prepare_input

    alpha, beta, cutoff = cfg["alpha"], cfg["beta"], cfg["cutoff"]
    checks = []

    def check(name, value, tol):
        checks.append({"name": name, "value": float(value), "tol": tol, "ok": bool(value <= tol)})

    q = InputQubit(1 / math.sqrt(2), 1 / math.sqrt(2), beta)
    try:
        channel = build_channel(alpha)
        stages = {"channel": channel, **evolve_stages(channel, prepare_input(q))}
        fock = evolve_protocol_fock(alpha, q.a, q.b, beta, cutoff)
        for name, ket in stages.items():
            check(f"fock_overlaps_{name}", cross_validate(ket, cutoff), 1e-8)
            check(f"fock_amplitudes_{name}", max_deviation(ket, fock[name]), 1e-8)
    except CutoffTooSmall as exc:
        checks.append({"name": "fock_cutoff", "ok": False, "error": f"CutoffTooSmall: {exc}"})

    sigmas = np.concatenate([[0.0, 1.0], np.logspace(-3, 3, 61)])
    check("quadrature_refinement", np.max(np.abs(average_fidelity_vs_ratio(sigmas) - average_fidelity_vs_ratio(sigmas, nodes=24))), 1e-9)

    rng = np.random.default_rng(cfg["seed"])
    worst_pipe = worst_unravel = worst_avg = 0.0
    for _ in range(5):
        p = NoiseParams(*rng.uniform(0, 1, 3), r=float(rng.uniform(0, 0.5)))
        qq = InputQubit.random(rng, beta)
        closed = teleported_density(qq, p, alpha)
        worst_pipe = max(worst_pipe, np.max(np.abs(condition_and_trace(noisy_pipeline(qq, p, alpha), alpha, beta, p) - closed)))
        worst_unravel = max(worst_unravel, np.max(np.abs(unravelled_density(qq, p, alpha) - closed)))
        worst_avg = max(worst_avg, abs(average_fidelity_noisy(p, alpha) - average_fidelity_bloch(p, alpha)))
    check("noisy_pipeline_vs_closed_form", worst_pipe, 1e-10)
    check("unravelled_vs_closed_form", worst_unravel, 1e-10)
    check("average_fidelity_vs_bloch_integral", worst_avg, 1e-8)

    failures = [c["name"] for c in checks if not c["ok"]]
    return {**_stamp(cfg), "checks": checks, "failures": failures}


def cmd_validate(cfg: dict) -> int:
    _positive(cfg, "alpha")
    _positive(cfg, "beta")
    _int_at_least(cfg, "cutoff", 1)
    report = run_validation(cfg)
    _emit(cfg, json.dumps(report, indent=2, sort_keys=True) + "\n")
    for c in report["checks"]:
        detail = c.get("error") or f"{c['value']:.3e} (tol {c['tol']:.0e})"
        sys.stderr.write(f"{'PASS' if c['ok'] else 'FAIL'}  {c['name']}: {detail}\n")
    if report["failures"]:
        raise ValidationFailure(report["failures"])
    return 0


COMMANDS = {
    "channel": cmd_channel,
    "teleport": cmd_teleport,
    "fidelity-map": cmd_fidelity_map,
    "noise-sweep": cmd_noise_sweep,
    "cavity-sweep": cmd_cavity_sweep,
    "validate": cmd_validate,
}


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridtele", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    types = {list: _float_list, str: str, int: int, float: float}
    for name, defaults in DEFAULTS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat JSON file of parameters")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path (default: stdout)")
        for key, default in defaults.items():
            kind = type(default) if default is not None else float
            if key in ("trials", "points", "cutoff"):
                kind = int
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=types[kind], default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except ValidationFailure as exc:
        sys.stderr.write(f"validation failed: {exc}\n")
        return EXIT_VALIDATION
