"""Run configuration: YAML schema, strict validation, model construction.

The file is a nested mapping with sections system / channel / costs / solver /
sim / output. Physics parameters (plant matrices, channel tables, costs, the
discount factor) have no defaults; only solver knobs and output settings do.
Unknown keys anywhere are rejected, and every validation error names the
offending field by its dotted path.
"""

import copy
from dataclasses import dataclass

import numpy as np
import yaml

from .belief_mdp import SolverConfig
from .channel import ChannelModel, make_gilbert_elliott, make_persistent_failure
from .lti_estimation import LtiSystem
from .sim import SimConfig


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted field name."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


_SOLVER_DEFAULTS = {"tau_max": 60, "grid_n": 200, "vi_tol": 1e-9,
                    "max_sweeps": 2000, "weight_eps": 0.01, "tie_break": "low"}
_OUTPUT_DEFAULTS = {"directory": "out", "emit_traces": False}


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected a mapping, got {type(obj).__name__}")
    return obj


def _reject_unknown(section, path, allowed):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")


def _get(section, path, key, required=True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    return section[key]


def _number(value, path, lo=None, hi=None, strict_lo=False, strict_hi=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    x = float(value)
    if lo is not None and (x <= lo if strict_lo else x < lo):
        raise ConfigError(path, f"must be {'>' if strict_lo else '>='} {lo}, got {x}")
    if hi is not None and (x >= hi if strict_hi else x > hi):
        raise ConfigError(path, f"must be {'<' if strict_hi else '<='} {hi}, got {x}")
    return x


def _integer(value, path, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(path, f"must be <= {hi}, got {value}")
    return value


def _matrix(value, path):
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"not a numeric array: {exc}") from None
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(1, -1)
    elif M.ndim != 2:
        raise ConfigError(path, f"expected a matrix, got ndim={M.ndim}")
    return M


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with constructed models."""

    system: LtiSystem
    channel: ChannelModel
    action_costs: np.ndarray
    c_stop: float | None
    solver: SolverConfig
    sim: SimConfig | None
    out_dir: str
    emit_traces: bool
    raw: dict

    @property
    def is_stopping(self) -> bool:
        return self.c_stop is not None

    def to_dict(self) -> dict:
        """Normalized configuration (defaults applied, numbers canonical);
        loading the serialized form reproduces this dict exactly."""
        return copy.deepcopy(self.raw)


def _parse_system(section):
    sec = _require_mapping(section, "system")
    _reject_unknown(sec, "system", ("A", "C", "Q", "R"))
    mats = {k: _matrix(_get(sec, "system", k), f"system.{k}") for k in ("A", "C", "Q", "R")}
    try:
        system = LtiSystem(**mats)
    except ValueError as exc:
        raise ConfigError("system", str(exc)) from None
    raw = {k: mats[k].tolist() for k in ("A", "C", "Q", "R")}
    return system, raw


def _parse_channel(section):
    sec = _require_mapping(section, "channel")
    ctype = _get(sec, "channel", "type")
    if ctype == "ge":
        _reject_unknown(sec, "channel", ("type", "p00", "p11", "lam_good", "lam_bad", "b0"))
        vals = {k: _number(_get(sec, "channel", k), f"channel.{k}", lo=0.0, hi=1.0)
                for k in ("p00", "p11", "lam_good", "lam_bad", "b0")}
        try:
            ch = make_gilbert_elliott(**vals)
        except ValueError as exc:
            raise ConfigError("channel", str(exc)) from None
        return ch, {"type": "ge", **vals}
    if ctype == "persistent":
        _reject_unknown(sec, "channel", ("type", "p_fail", "lam_good", "lam_bad", "b0"))
        vals = {k: _number(_get(sec, "channel", k), f"channel.{k}", lo=0.0, hi=1.0)
                for k in ("p_fail", "lam_good", "lam_bad", "b0")}
        try:
            ch = make_persistent_failure(**vals)
        except ValueError as exc:
            raise ConfigError("channel", str(exc)) from None
        return ch, {"type": "persistent", **vals}
    if ctype == "explicit":
        _reject_unknown(sec, "channel", ("type", "lam", "mode_kernel", "b0"))
        lam = _matrix(_get(sec, "channel", "lam"), "channel.lam")
        kern_raw = _get(sec, "channel", "mode_kernel")
        try:
            kern = np.asarray(kern_raw, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError("channel.mode_kernel", f"not numeric: {exc}") from None
        b0 = _number(_get(sec, "channel", "b0"), "channel.b0", lo=0.0, hi=1.0)
        try:
            ch = ChannelModel(lam=lam, mode_kernel=kern,
                              initial_mode_dist=np.array([1.0 - b0, b0]))
        except ValueError as exc:
            raise ConfigError("channel", str(exc)) from None
        return ch, {"type": "explicit", "lam": ch.lam.tolist(),
                    "mode_kernel": ch.mode_kernel.tolist(), "b0": b0}
    raise ConfigError("channel.type", f"must be ge, persistent, or explicit, got {ctype!r}")


def _parse_costs(section, n_actions):
    sec = _require_mapping(section, "costs")
    _reject_unknown(sec, "costs", ("c_a", "c_stop"))
    c_a = _get(sec, "costs", "c_a")
    if not isinstance(c_a, list) or not c_a:
        raise ConfigError("costs.c_a", "expected a nonempty list of per-action costs")
    costs = np.array([_number(v, f"costs.c_a[{i}]") for i, v in enumerate(c_a)])
    if len(costs) != n_actions:
        raise ConfigError("costs.c_a", f"length {len(costs)} does not match the "
                                       f"channel's {n_actions} action(s)")
    c_stop = None
    if "c_stop" in sec and sec["c_stop"] is not None:
        c_stop = _number(sec["c_stop"], "costs.c_stop")
        if n_actions != 1:
            raise ConfigError("costs.c_stop", "stopping mode requires a "
                                              "single-action channel")
        if costs[0] != 0.0:
            raise ConfigError("costs.c_a", "the continue action must cost 0 "
                                           "in stopping mode")
    raw = {"c_a": costs.tolist()}
    if c_stop is not None:
        raw["c_stop"] = c_stop
    return costs, c_stop, raw


def _parse_solver(section):
    sec = _require_mapping(section, "solver")
    _reject_unknown(sec, "solver", ("gamma",) + tuple(_SOLVER_DEFAULTS))
    gamma = _number(_get(sec, "solver", "gamma"), "solver.gamma",
                    lo=0.0, hi=1.0, strict_lo=True, strict_hi=True)
    kw = {"gamma": gamma}
    kw["tau_max"] = _integer(sec.get("tau_max", _SOLVER_DEFAULTS["tau_max"]),
                             "solver.tau_max", lo=1)
    kw["grid_n"] = _integer(sec.get("grid_n", _SOLVER_DEFAULTS["grid_n"]),
                            "solver.grid_n", lo=2)
    kw["vi_tol"] = _number(sec.get("vi_tol", _SOLVER_DEFAULTS["vi_tol"]),
                           "solver.vi_tol", lo=0.0, strict_lo=True)
    kw["max_sweeps"] = _integer(sec.get("max_sweeps", _SOLVER_DEFAULTS["max_sweeps"]),
                                "solver.max_sweeps", lo=1)
    kw["weight_eps"] = _number(sec.get("weight_eps", _SOLVER_DEFAULTS["weight_eps"]),
                               "solver.weight_eps", lo=0.0, strict_lo=True)
    tie = sec.get("tie_break", _SOLVER_DEFAULTS["tie_break"])
    if tie not in ("low", "high"):
        raise ConfigError("solver.tie_break", f"must be 'low' or 'high', got {tie!r}")
    kw["tie_break"] = tie
    return SolverConfig(**kw), dict(kw)


def _parse_sim(section):
    if section is None:
        return None, None
    sec = _require_mapping(section, "sim")
    _reject_unknown(sec, "sim", ("horizon", "n_runs", "seed"))
    horizon = _integer(_get(sec, "sim", "horizon"), "sim.horizon", lo=1)
    n_runs = _integer(_get(sec, "sim", "n_runs"), "sim.n_runs", lo=1)
    seed = _integer(_get(sec, "sim", "seed"), "sim.seed", lo=0, hi=(1 << 64) - 1)
    return SimConfig(horizon=horizon, n_runs=n_runs, seed=seed), \
        {"horizon": horizon, "n_runs": n_runs, "seed": seed}


def _parse_output(section):
    if section is None:
        section = {}
    sec = _require_mapping(section, "output")
    _reject_unknown(sec, "output", tuple(_OUTPUT_DEFAULTS))
    directory = sec.get("directory", _OUTPUT_DEFAULTS["directory"])
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "expected a nonempty string")
    emit = sec.get("emit_traces", _OUTPUT_DEFAULTS["emit_traces"])
    if not isinstance(emit, bool):
        raise ConfigError("output.emit_traces", "expected a boolean")
    return directory, emit


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed YAML mapping and build the models."""
    top = _require_mapping(data, "config")
    _reject_unknown(top, "config", ("system", "channel", "costs", "solver",
                                    "sim", "output"))
    for key in ("system", "channel", "costs", "solver"):
        if key not in top:
            raise ConfigError(key, "missing required section")
    system, raw_system = _parse_system(top["system"])
    channel, raw_channel = _parse_channel(top["channel"])
    action_costs, c_stop, raw_costs = _parse_costs(top["costs"], channel.n_actions)
    solver, raw_solver = _parse_solver(top["solver"])
    simcfg, raw_sim = _parse_sim(top.get("sim"))
    out_dir, emit = _parse_output(top.get("output"))
    raw = {"system": raw_system, "channel": raw_channel, "costs": raw_costs,
           "solver": raw_solver, "output": {"directory": out_dir, "emit_traces": emit}}
    if raw_sim is not None:
        raw["sim"] = raw_sim
    return RunConfig(system=system, channel=channel, action_costs=action_costs,
                     c_stop=c_stop, solver=solver, sim=simcfg, out_dir=out_dir,
                     emit_traces=emit, raw=raw)


def load_config(path) -> RunConfig:
    """Load and validate a YAML configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
            raise ConfigError("<file>", f"YAML parse error{where}: {exc}") from None
    if data is None:
        raise ConfigError("<file>", "configuration file is empty")
    return parse_config(data)
