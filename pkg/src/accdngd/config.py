"""Experiment configuration: an INI dialect with a fixed set of sections and keys.

Grammar (version 1)::

    [experiment]
    iterations = 5000          ; required, >= 1
    record_every = 10          ; default 1
    seed = 0                   ; master seed, default 0
    burn_in = auto             ; or an integer; auto = max(100, iterations // 10)
    preset_steps = relative    ; relative | absolute
    init_sd = 5.0              ; sd of the shared Gaussian initial point
    output = runs/fig1         ; optional

    [graph]
    spec = er:20,0.3           ; grid2d:RxC | kcycle:N,K | er:N,P[,SEED] | path:N | complete:N
    weights = laplacian        ; laplacian | metropolis (static graphs only)

    [objective]
    case = case1               ; case1 | case2 | case3
    seed = 7                   ; optional; default derives from the master seed
    samples_per_agent = 50     ; case1/case2 only
    dim = 3

    [time_varying]             ; optional; Metropolis weights are rebuilt every iteration
    remove_fraction = 0.75

    [algorithm:<label>]        ; one or more, run in file order
    method = acc_dngd_sc
    ; exactly one step source:
    preset = fig1_random_acc_dngd_sc
    eta = 1e-4                 ; or c = ... for harmonic / invsqrt rules
    eta_times_L = 0.1          ; or c_times_L = ...
    bound_fraction = 0.5       ; fraction of the provable step limit
    ; optional:
    schedule = fixed           ; fixed | vanishing | harmonic | invsqrt
    beta = 0.61
    t0 = 1
    alpha0 = 0.5               ; cngd_nsc
    init_mode = relaxed        ; acc_dngd_nsc: relaxed | exact

A ``[constants]`` section is accepted and ignored so that emitted ``meta.ini``
files parse back to the same configuration.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, fields, replace

from .algorithms import METHODS
from .exceptions import ParseError, ValidationError
from .presets import PRESETS

__all__ = ["ExperimentConfig", "AlgorithmSpec", "parse_config", "emit_config", "load_config", "GRAMMAR_VERSION"]

GRAMMAR_VERSION = 1
CASES = ("case1", "case2", "case3")
WEIGHTS = ("laplacian", "metropolis")
SCHEDULES = ("fixed", "vanishing", "harmonic", "invsqrt")
STEP_SOURCES = ("preset", "eta", "c", "eta_times_L", "c_times_L", "bound_fraction")


@dataclass(frozen=True)
class AlgorithmSpec:
    label: str
    method: str
    preset: str | None = None
    eta: float | None = None
    c: float | None = None
    eta_times_L: float | None = None
    c_times_L: float | None = None
    bound_fraction: float | None = None
    schedule: str | None = None
    beta: float | None = None
    t0: float | None = None
    alpha0: float | None = None
    init_mode: str | None = None

    @property
    def step_source(self) -> str:
        return next(k for k in STEP_SOURCES if getattr(self, k) is not None)


@dataclass(frozen=True)
class ExperimentConfig:
    iterations: int
    graph: str
    case: str
    algorithms: tuple
    record_every: int = 1
    seed: int = 0
    burn_in: int | None = None
    preset_steps: str = "relative"
    init_sd: float = 5.0
    output: str | None = None
    weights: str = "laplacian"
    objective_seed: int | None = None
    samples_per_agent: int | None = None
    dim: int | None = None
    remove_fraction: float | None = None

    @property
    def time_varying(self) -> bool:
        return self.remove_fraction is not None

    def effective_burn_in(self) -> int:
        return self.burn_in if self.burn_in is not None else max(100, self.iterations // 10)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


# (section, key) -> (attribute, converter)
_SCALAR_KEYS = {
    "experiment": {
        "iterations": ("iterations", int),
        "record_every": ("record_every", int),
        "seed": ("seed", int),
        "burn_in": ("burn_in", "burn_in"),
        "preset_steps": ("preset_steps", str),
        "init_sd": ("init_sd", float),
        "output": ("output", str),
    },
    "graph": {"spec": ("graph", str), "weights": ("weights", str)},
    "objective": {
        "case": ("case", str),
        "seed": ("objective_seed", int),
        "samples_per_agent": ("samples_per_agent", int),
        "dim": ("dim", int),
    },
    "time_varying": {"remove_fraction": ("remove_fraction", float)},
}
_ALGO_KEYS = {
    "method": str,
    "preset": str,
    "eta": float,
    "c": float,
    "eta_times_L": float,
    "c_times_L": float,
    "bound_fraction": float,
    "schedule": str,
    "beta": float,
    "t0": float,
    "alpha0": float,
    "init_mode": str,
}
_ALGO_RE = re.compile(r"algorithm:([A-Za-z0-9_.-]+)$")


def _key_lines(text):
    """Map (section, key) to 1-based line numbers for error messages."""
    out, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out[(section, None)] = no
        elif line and line[0] not in "#;" and section is not None:
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            out.setdefault((section, key), no)
    return out


def _convert(conv, raw, line, key):
    try:
        if conv == "burn_in":
            return None if raw.lower() == "auto" else int(raw)
        v = conv(raw)
    except ValueError:
        raise ParseError(f"cannot read {raw!r} as {getattr(conv, '__name__', conv)}", line, key) from None
    if isinstance(v, float) and not math.isfinite(v):
        raise ParseError(f"non-finite value {raw!r}", line, key)
    return v


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text; see the module docstring for the grammar."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before first section header", exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(str(exc).split(":")[0], exc.lineno, getattr(exc, "option", None)) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", line) from None
    lines = _key_lines(text)

    kw, algos = {}, []
    for section in cp.sections():
        if section == "constants":
            continue
        m = _ALGO_RE.match(section)
        if m:
            algos.append(_parse_algorithm(m.group(1), cp[section], lines, section))
            continue
        if section not in _SCALAR_KEYS:
            raise ParseError(f"unknown section [{section}]", lines.get((section, None)))
        table = _SCALAR_KEYS[section]
        for key, raw in cp[section].items():
            if key not in table:
                raise ParseError(f"unknown key in [{section}]", lines.get((section, key)), key)
            attr, conv = table[key]
            kw[attr] = _convert(conv, raw.strip(), lines.get((section, key)), key)
        if section == "time_varying" and "remove_fraction" not in kw:
            raise ValidationError("required when [time_varying] is present", "time_varying.remove_fraction")

    for attr, path in (("iterations", "experiment.iterations"), ("graph", "graph.spec"), ("case", "objective.case")):
        if attr not in kw:
            raise ValidationError("missing required key", path)
    cfg = ExperimentConfig(algorithms=tuple(algos), **kw)
    validate(cfg)
    return cfg


def _parse_algorithm(label, sec, lines, section):
    kw = {}
    for key, raw in sec.items():
        if key not in _ALGO_KEYS:
            raise ParseError(f"unknown key in [{section}]", lines.get((section, key)), key)
        kw[key] = _convert(_ALGO_KEYS[key], raw.strip(), lines.get((section, key)), key)
    if "method" not in kw and "preset" in kw and kw["preset"] in PRESETS:
        kw["method"] = PRESETS[kw["preset"]].method
    if "method" not in kw:
        raise ValidationError("missing required key", f"algorithm:{label}.method")
    return AlgorithmSpec(label=label, **kw)


def validate(cfg: ExperimentConfig) -> None:
    def bad(msg, path):
        raise ValidationError(msg, path)

    if cfg.iterations < 1:
        bad("must be >= 1", "experiment.iterations")
    if cfg.record_every < 1:
        bad("must be >= 1", "experiment.record_every")
    if cfg.burn_in is not None and cfg.burn_in < 0:
        bad("must be >= 0", "experiment.burn_in")
    if cfg.preset_steps not in ("relative", "absolute"):
        bad("must be relative or absolute", "experiment.preset_steps")
    if not cfg.init_sd >= 0:
        bad("must be >= 0", "experiment.init_sd")
    if cfg.weights not in WEIGHTS:
        bad(f"must be one of {WEIGHTS}", "graph.weights")
    if cfg.case not in CASES:
        bad(f"must be one of {CASES}", "objective.case")
    if cfg.remove_fraction is not None and not 0 <= cfg.remove_fraction < 1:
        bad("must lie in [0, 1)", "time_varying.remove_fraction")
    if not cfg.algorithms:
        bad("at least one [algorithm:<label>] section is required", "algorithm")
    seen = set()
    for a in cfg.algorithms:
        p = f"algorithm:{a.label}"
        if a.label in seen:
            bad("duplicate label", p)
        seen.add(a.label)
        if a.method not in METHODS:
            bad(f"unknown method; choose from {sorted(METHODS)}", p + ".method")
        given = [k for k in STEP_SOURCES if getattr(a, k) is not None]
        if len(given) != 1:
            bad(f"exactly one step source required among {STEP_SOURCES}, got {given or 'none'}", p)
        if a.preset is not None:
            if a.preset not in PRESETS:
                bad(f"unknown preset {a.preset!r}", p + ".preset")
            if PRESETS[a.preset].method != a.method:
                bad(f"preset is for {PRESETS[a.preset].method}", p + ".method")
            if a.schedule is not None or a.beta is not None or a.t0 is not None:
                bad("a preset fixes the schedule", p + ".schedule")
        for k in given:
            if k != "preset" and not getattr(a, k) > 0:
                bad("must be positive", f"{p}.{k}")
        if a.schedule is not None and a.schedule not in SCHEDULES:
            bad(f"must be one of {SCHEDULES}", p + ".schedule")
        if a.beta is not None and not 0 < a.beta < 2:
            bad("beta must lie in (0, 2)", p + ".beta")
        if a.t0 is not None and a.t0 < 1:
            bad("must be >= 1", p + ".t0")
        if a.alpha0 is not None and not 0 < a.alpha0 < 1:
            bad("must lie in (0, 1)", p + ".alpha0")
        if a.init_mode is not None and a.init_mode not in ("relaxed", "exact"):
            bad("must be relaxed or exact", p + ".init_mode")
        if a.bound_fraction is not None and a.method not in ("acc_dngd_sc", "acc_dngd_nsc"):
            bad("only defined for acc_dngd_sc and fixed-step acc_dngd_nsc", p + ".bound_fraction")


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    out = []

    def section(name, pairs):
        pairs = [(k, v) for k, v in pairs if v is not None]
        if pairs:
            out.append(f"[{name}]")
            out.extend(f"{k} = {_fmt(v)}" for k, v in pairs)
            out.append("")

    section("experiment", [
        ("iterations", cfg.iterations),
        ("record_every", cfg.record_every),
        ("seed", cfg.seed),
        ("burn_in", "auto" if cfg.burn_in is None else cfg.burn_in),
        ("preset_steps", cfg.preset_steps),
        ("init_sd", cfg.init_sd),
        ("output", cfg.output),
    ])
    section("graph", [("spec", cfg.graph), ("weights", cfg.weights)])
    section("objective", [
        ("case", cfg.case),
        ("seed", cfg.objective_seed),
        ("samples_per_agent", cfg.samples_per_agent),
        ("dim", cfg.dim),
    ])
    if cfg.time_varying:
        section("time_varying", [("remove_fraction", cfg.remove_fraction)])
    for a in cfg.algorithms:
        section(f"algorithm:{a.label}", [(f.name, getattr(a, f.name)) for f in fields(a) if f.name != "label"])
    return "\n".join(out)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
