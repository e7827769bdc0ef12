"""Command-line front end: JSON configs in, JSON or CSV results out.

Exit statuses: 0 success, 1 a checked bound was violated, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import chain as chain_mod
from . import config as config_mod
from . import detect, measures, repeater
from .channels import channel_from_record, choi
from .config import DimensionError
from .states import DensityMatrix, PureState, matrix_from_record, max_entangled, state_from_record, state_to_record

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --- schemas -----------------------------------------------------------------

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_NUM_LIST = {"type": "array", "items": _NUM}

MATRIX = {
    "type": "object",
    "properties": {"shape": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2}, "re": _NUM_LIST, "im": _NUM_LIST},
    "required": ["shape", "re"],
    "additionalProperties": False,
}

CHANNEL = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "name": {"enum": ["identity", "depolarizing", "amplitude_damping", "dephasing"]},
                "d": {"type": "integer", "minimum": 1},
                "p": _NUM,
                "gamma": _NUM,
            },
            "required": ["name"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "d_in": _INT,
                "d_out": _INT,
                "kraus": {"type": "array", "items": MATRIX, "minItems": 1},
                "trace_preserving": {"type": "boolean"},
            },
            "required": ["d_in", "d_out", "kraus"],
            "additionalProperties": False,
        },
    ]
}

STATE = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"dims": {"type": "array", "items": _INT, "minItems": 1, "maxItems": 2}, "re": _NUM_LIST, "im": _NUM_LIST},
            "required": ["dims", "re"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"name": {"enum": ["phi_plus", "max_entangled"]}, "k": {"type": "integer", "minimum": 1}},
            "required": ["name"],
            "additionalProperties": False,
        },
    ]
}

FILTER = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "kind": {"enum": list(chain_mod.FILTER_KINDS)},
                "pairs": {"type": "array", "items": {"type": "array", "items": MATRIX, "minItems": 2, "maxItems": 2}},
                "accept": {"type": "array", "items": _INT},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "name": {"enum": ["pauli_twirl", "procrustean", "bernoulli", "random_local"]},
                "epsilon": _NUM,
                "q": _NUM,
                "seed": _INT,
            },
            "required": ["name"],
            "additionalProperties": False,
        },
    ]
}

GLOBAL = {
    "seed": _INT,
    "out": {"type": "string"},
    "format": {"enum": ["json", "csv"]},
    "tolerances": {"type": "object"},
}


def _schema(properties: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {**GLOBAL, **properties},
        "required": required,
        "additionalProperties": False,
    }


SCHEMAS = {
    "choi": _schema({"channel": CHANNEL}, ["channel"]),
    "chain": _schema(
        {
            "channel": CHANNEL,
            "n": {"type": "integer", "minimum": 1},
            "initial": STATE,
            "filters": {"oneOf": [FILTER, {"type": "array", "items": FILTER}]},
        },
        ["channel", "n"],
    ),
    "mc": _schema(
        {
            "channel": CHANNEL,
            "n": {"type": "integer", "minimum": 1},
            "initial": STATE,
            "filters": {"oneOf": [FILTER, {"type": "array", "items": FILTER}]},
            "threshold_c": _NUM,
            "trajectories": {"type": "integer", "minimum": 1},
        },
        ["channel", "n", "filters"],
    ),
    "scaling": _schema(
        {
            "p": _NUM,
            "n_values": {"type": "array", "items": _INT, "minItems": 1},
            "m_values": {"type": "array", "items": _INT, "minItems": 1},
            "strategy": {"enum": list(repeater.STRATEGIES)},
            "schedule": {"enum": list(repeater.SCHEDULES)},
            "beta": _NUM,
        },
        ["p", "n_values", "m_values"],
    ),
    "detect": _schema(
        {
            "channel": CHANNEL,
            "dim": {"type": "integer", "minimum": 2},
            "restarts": {"type": "integer", "minimum": 1},
            "fixed_point": {"type": "boolean"},
        },
        ["channel"],
    ),
    "kappa": _schema(
        {"channel": CHANNEL, "k": {"type": "integer", "minimum": 2}, "n_max": {"type": "integer", "minimum": 0}},
        ["channel"],
    ),
    "measure": _schema(
        {"state": STATE, "convex_roof": {"type": "boolean"}, "sep_upper": {"type": "boolean"}, "restarts": {"type": "integer", "minimum": 1}},
        ["state"],
    ),
}

_NULLABLE_NUM = {"type": ["number", "null"]}

OUTPUT_SCHEMAS = {
    "choi": {
        "type": "object",
        "required": ["command", "choi", "negativity", "sep_lower"],
        "properties": {"command": {"const": "choi"}, "choi": STATE["oneOf"][0], "negativity": _NUM, "concurrence": _NULLABLE_NUM},
    },
    "chain": {
        "type": "object",
        "required": ["command", "per_step", "summary", "verification"],
        "properties": {"command": {"const": "chain"}, "per_step": {"type": "array", "items": {"type": "object", "required": ["step"]}}},
    },
    "mc": {
        "type": "object",
        "required": ["command", "empirical_prob", "bound", "sigma", "consistent"],
        "properties": {"command": {"const": "mc"}, "empirical_prob": _NUM, "bound": _NUM, "sigma": _NUM, "consistent": {"type": "boolean"}},
    },
    "scaling": {
        "type": "object",
        "required": ["command", "rows", "m_min", "c0", "m_min_nondecreasing"],
        "properties": {"command": {"const": "scaling"}, "rows": {"type": "array"}, "c0": _NULLABLE_NUM},
    },
    "detect": {
        "type": "object",
        "required": ["command", "status", "best_residual", "basis", "recovery_verified", "fixed_point_gap"],
        "properties": {"command": {"const": "detect"}, "status": {"enum": ["certified_present", "not_found"]}, "best_residual": _NUM},
    },
    "kappa": {
        "type": "object",
        "required": ["command", "kappas", "theorem3_kappa", "bound_table"],
        "properties": {"command": {"const": "kappa"}, "bound_table": {"type": "array"}},
    },
    "measure": {
        "type": "object",
        "required": ["command", "measures"],
        "properties": {"command": {"const": "measure"}, "measures": {"type": "object"}},
    },
}


def validate(command: str, cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


# --- builders ----------------------------------------------------------------

def build_state(rec: dict | None, default_dims=(2, 2)):
    if rec is None:
        return max_entangled(default_dims[0])
    if "name" in rec:
        return max_entangled(rec.get("k", default_dims[0]) if rec["name"] == "max_entangled" else 2)
    return state_from_record(rec)


def build_filter(rec: dict, dims) -> chain_mod.FilterSpec:
    if "name" in rec:
        name = rec["name"]
        if name == "pauli_twirl":
            return chain_mod.pauli_twirl_filter()
        if name == "procrustean":
            return chain_mod.procrustean_filter(rec.get("epsilon", 0.5), dims[1])
        if name == "bernoulli":
            return chain_mod.bernoulli_filter(rec.get("q", 0.5), dims)
        return chain_mod.random_local_filter(dims, seed=rec.get("seed", 0))
    pairs = tuple((matrix_from_record(a), matrix_from_record(b)) for a, b in rec.get("pairs", []))
    return chain_mod.FilterSpec(rec["kind"], pairs, frozenset(rec.get("accept", [])))


def build_filters(rec, dims):
    if rec is None:
        return None
    if isinstance(rec, list):
        return [build_filter(r, dims) for r in rec]
    return build_filter(rec, dims)


def _chain_config(cfg: dict) -> chain_mod.ChainConfig:
    ch = channel_from_record(cfg["channel"])
    initial = build_state(cfg.get("initial"), (ch.d_in, ch.d_in))
    dims = tuple(initial.dims)
    return chain_mod.ChainConfig(
        channel=ch,
        n=cfg["n"],
        initial=initial,
        filters=build_filters(cfg.get("filters"), dims),
        threshold_c=cfg.get("threshold_c", 0.5),
        trajectories=cfg.get("trajectories", 1000),
        seed=cfg.get("seed", 0),
    )


# --- commands ----------------------------------------------------------------

def cmd_choi(cfg: dict) -> tuple[dict, str | None, int]:
    ch = channel_from_record(cfg["channel"])
    gamma = choi(ch)
    out = {
        "command": "choi",
        "channel": cfg["channel"],
        "choi": state_to_record(gamma),
        "negativity": measures.negativity(gamma),
        "sep_lower": measures.sep_distance_lower(gamma),
        "concurrence": measures.concurrence(gamma) if ch.d_in == 2 else None,
        "eof": measures.eof_two_qubit(gamma) if ch.d_in == 2 else None,
    }
    return out, None, EXIT_OK


def cmd_chain(cfg: dict):
    conf = _chain_config(cfg)
    result = chain_mod.run_deterministic(conf, keep_states=False)
    slack = config_mod.tol().bound_slack
    violations = []
    for rec in result.per_step:
        c, b = rec["concurrence"], rec["corollary1_bound"]
        if c is not None and b is not None and c > b + slack:
            violations.append({"step": rec["step"], "kind": "concurrence", "value": c, "bound": b})
        lo, t3 = rec["sep_lower"], rec["theorem3_bound"]
        if t3 is not None and lo > t3 + slack:
            violations.append({"step": rec["step"], "kind": "separability", "value": lo, "bound": t3})
    out = {"command": "chain", **result.to_dict(), "verification": {"violations": violations}}
    return out, result.to_csv(), EXIT_VIOLATION if violations else EXIT_OK


def cmd_mc(cfg: dict):
    res = chain_mod.run_slocc_monte_carlo(_chain_config(cfg))
    out = {"command": "mc", **res.to_dict()}
    return out, None, EXIT_OK if res.consistent else EXIT_VIOLATION


def cmd_scaling(cfg: dict):
    sweep = repeater.ScalingSweepConfig(
        p=cfg["p"],
        n_values=cfg["n_values"],
        m_values=cfg["m_values"],
        strategy=cfg.get("strategy", "distill_swap"),
        schedule=cfg.get("schedule", "binary_tree"),
        seed=cfg.get("seed", 0),
        beta=cfg.get("beta", 0.5),
    )
    res = repeater.simulate_scaling(sweep)
    out = {"command": "scaling", **res.to_dict()}
    return out, res.to_csv(), EXIT_OK


def cmd_detect(cfg: dict):
    ch = channel_from_record(cfg["channel"])
    rep = detect.detection_report(
        ch,
        dim=cfg.get("dim", 2),
        restarts=cfg.get("restarts", 50),
        seed=cfg.get("seed", 0),
        fixed_point=cfg.get("fixed_point", True),
    )
    return {"command": "detect", **rep}, None, EXIT_OK


def cmd_kappa(cfg: dict):
    ch = channel_from_record(cfg["channel"])
    kap = chain_mod.channel_kappas(ch)
    if "k" in cfg:
        if cfg["k"] not in kap:
            raise ConfigError(f"k must lie in [2, {ch.d_in}]")
        kap = {cfg["k"]: kap[cfg["k"]]}
    top = max(kap.values()) if kap else None
    slack = config_mod.tol().bound_slack
    usable = top if top is not None and slack < top < 1 - slack else None
    n_max = cfg.get("n_max", 10)
    table = [
        {"n": n, "theorem3_bound": measures.theorem3_bound(usable, n, ch.d_in) if usable is not None else None}
        for n in range(n_max + 1)
    ]
    out = {
        "command": "kappa",
        "kappas": {str(k): v for k, v in kap.items()},
        "theorem3_kappa": usable,
        "status": "applicable" if usable is not None else "inapplicable",
        "bound_table": table,
    }
    return out, None, EXIT_OK


def cmd_measure(cfg: dict):
    st = build_state(cfg["state"])
    if len(st.dims) != 2 or 1 in st.dims:
        raise DimensionError("measure needs a bipartite state")
    rho = st.density() if isinstance(st, PureState) else st
    res = measures.measure_report(rho)
    seed = cfg.get("seed", 0)
    restarts = cfg.get("restarts", 10)
    if cfg.get("convex_roof", False):
        res["eof_upper"] = measures.eof_convex_roof_upper(rho, restarts=restarts, seed=seed).value
    if cfg.get("sep_upper", False):
        res["sep_upper"] = measures.sep_distance_upper(rho, restarts=restarts, seed=seed).value
    return {"command": "measure", "dims": list(rho.dims), "measures": res}, None, EXIT_OK


COMMANDS = {
    "choi": cmd_choi,
    "chain": cmd_chain,
    "mc": cmd_mc,
    "scaling": cmd_scaling,
    "detect": cmd_detect,
    "kappa": cmd_kappa,
    "measure": cmd_measure,
}
CSV_COMMANDS = ("chain", "scaling")


# --- plumbing ----------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="echain", description="Entanglement decay along channel chains.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, help="output path (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--seed", type=int)
        p.add_argument("--channel", help="named channel")
        p.add_argument("--d", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--gamma", type=float)
    return parser


def _merge(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    cfg = copy.deepcopy(cfg)
    if args.channel is not None:
        ch = {"name": args.channel}
        for key in ("d", "p", "gamma"):
            if getattr(args, key) is not None:
                ch[key] = getattr(args, key)
        cfg["channel"] = ch
    elif args.command == "scaling" and args.p is not None:
        cfg["p"] = args.p
    elif any(getattr(args, k) is not None for k in ("d", "p", "gamma")):
        ch = dict(cfg.get("channel", {}))
        if "name" not in ch:
            raise ConfigError("--d/--p/--gamma need --channel or a named channel in the config")
        for key in ("d", "p", "gamma"):
            if getattr(args, key) is not None:
                ch[key] = getattr(args, key)
        cfg["channel"] = ch
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.format is not None:
        cfg["format"] = args.format
    if args.out is not None:
        cfg["out"] = str(args.out)
    return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (PureState, DensityMatrix)):
        return state_to_record(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(dumps({"error": kind, "message": message, "exit_status": code}))
    return code


def run(command: str, cfg: dict) -> tuple[dict, str | None, int]:
    """Validate ``cfg`` and execute ``command``; returns (json record, csv text or None, exit status)."""
    validate(command, cfg)
    fmt = cfg.get("format", "json")
    if fmt == "csv" and command not in CSV_COMMANDS:
        raise ConfigError(f"csv output is available for {CSV_COMMANDS} only")
    overrides = cfg.get("tolerances", {})
    try:
        config_mod.check_overrides(overrides, "tolerances")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with config_mod.override_tolerances(**overrides):
        return COMMANDS[command](cfg)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config_mod.set_tolerances(config_mod.load_tolerances())
        cfg = _merge(args)
        record, csv_text, status = run(args.command, cfg)
    except (ConfigError, DimensionError, ValueError, KeyError, TypeError) as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except (chain_mod.ChainError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL)
    text = csv_text if cfg.get("format", "json") == "csv" else dumps(record)
    _emit(text, cfg.get("out"))
    return status


if __name__ == "__main__":
    sys.exit(main())
