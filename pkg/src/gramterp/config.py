"""Experiment configuration files.

A configuration is an INI file (parsed with :mod:`configparser`) with a
``[run]`` section, a ``[scenario]`` section and one section named after the
experiment kind.  Every key is optional; missing keys take the default of
the selected scale.  Unknown sections or keys are rejected with the line
they appear on.  See ``docs/formats.md`` for the full schema.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional

from .channel import SystemConfig, centered_active_set, sigma_from_snr
from .opcount import cost_bf, cost_gram

__all__ = [
    "KINDS",
    "SCALES",
    "ConfigError",
    "ScenarioConfig",
    "ExperimentConfig",
    "default_config",
    "parse_config",
    "load_config",
    "serialize_config",
    "base_count_at_fraction",
]

KINDS = ("mse", "ber", "complexity", "tradeoff", "validate")
SCALES = ("desk", "paper")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class ScenarioConfig:
    """System parameters of an experiment.

    ``active_start`` of ``None`` centres the active block in ``[0, W)``.
    ``csi_snr_db`` sets the abstract estimation-error level through
    ``SNR = U / (B sigma^2)``; ``None`` means perfect CSI.
    """

    num_bs_antennas: int
    num_users: int
    fft_size: int
    num_active: int
    delay_spread: int
    active_start: Optional[int] = None
    correlation: float = 0.0
    csi_snr_db: Optional[float] = None
    symbol_energy: float = 1.0

    def active_set(self) -> tuple:
        if self.active_start is None:
            return centered_active_set(self.fft_size, self.num_active)
        return tuple(range(self.active_start, self.active_start + self.num_active))

    @property
    def csi_error_std(self) -> float:
        if self.csi_snr_db is None:
            return 0.0
        return sigma_from_snr(10 ** (self.csi_snr_db / 10), self.num_bs_antennas, self.num_users)

    def system(self) -> SystemConfig:
        return SystemConfig(self.num_bs_antennas, self.num_users, self.fft_size,
                            self.delay_spread, self.active_set(), self.correlation,
                            self.csi_error_std, self.symbol_energy)


_SCENARIOS = {
    "desk": ScenarioConfig(32, 4, 256, 200, 16),
    "paper": ScenarioConfig(128, 8, 2048, 1200, 144),
}


def _ber_counts(L: int) -> list:
    return [max(1, L // 4), 2 * L - 1, 4 * L]


def _tradeoff_counts(sc: ScenarioConfig) -> list:
    """From L to |Omega|, denser near L, plus the 1st-order count at 45% of brute force."""
    L, n = sc.delay_spread, sc.num_active
    fr = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
    p45 = base_count_at_fraction(0.45, n, sc.num_bs_antennas, sc.num_users, "order1")
    return sorted({min(n, int(round(f * L))) for f in fr} | {p45, n})


def base_count_at_fraction(fraction: float, num_active: int, B: int, U: int,
                           method="order1") -> int:
    """Largest ``|P|`` whose Gram cost stays within ``fraction`` of brute force."""
    bf = cost_bf(num_active, B, U)
    best = 1
    for P in range(1, num_active + 1):
        if cost_gram(method, num_active, P, B, U) <= fraction * bf:
            best = P
    return best


def _kind_defaults(scale: str, sc: ScenarioConfig) -> Dict[str, Dict[str, Any]]:
    L, n = sc.delay_spread, sc.num_active
    paper = scale == "paper"
    return {
        "mse": {
            "bs_antennas": [16, 32, 64, 128] if paper else [16, 32, 64],
            "delay_spreads": [36, 72, 144] if paper else [4, 8, 16],
            "base_left": 500 if paper else 100,
            "base_right": 600 if paper else 112,
            "target": 512 if paper else 102,
            "entry_row": 0,
            "entry_col": 1,
            "trials": 100_000 if paper else 20_000,
            "nonideal_correlation": 0.1,
            "nonideal_snr_db": 25.0,
        },
        "ber": {
            "base_counts": _ber_counts(L),
            "methods": ["bf", "exact", "order0", "order1"],
            "csi": ["perfect", "estimated"],
            "snr_db": ([8.0, 10.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 20.0, 22.0,
                        24.0, 26.0, 30.0, 35.0, 40.0] if paper else
                       [4.0, 6.0, 8.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 18.0,
                        20.0, 22.0, 24.0, 26.0, 30.0, 35.0, 40.0]),
            "trials": 60 if paper else 300,
            "target_ber": 1e-3,
        },
        "complexity": {
            "base_fractions": [0.25, 0.5, 0.75, 1.0],
            "methods": ["bf", "exact", "order0", "order1"],
            "measure": True,
        },
        "tradeoff": {
            "base_counts": _tradeoff_counts(sc),
            "methods": ["order0", "order1"],
            "csi": "estimated",
            "snr_db": ([16.0, 17.0, 18.0, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0, 25.0, 26.0,
                        28.0, 30.0, 34.0] if paper else
                       [14.0, 16.0, 18.0, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0, 25.0, 26.0,
                        28.0, 30.0, 34.0]),
            "trials": 60 if paper else 300,
            "target_ber": 1e-3,
        },
        "validate": {
            "oracle_trials": 40_000,
            "oracle_sigmas": 4.0,
            "exact_tolerance": 1e-9,
            "bound_base_counts": [4, 8, 16, 31],
        },
    }


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    scale: str = "desk"
    seed: int = 0
    scenario: ScenarioConfig = field(default_factory=lambda: _SCENARIOS["desk"])
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.scale not in SCALES:
            raise ConfigError(f"unknown scale {self.scale!r}; expected one of {SCALES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        defaults = _kind_defaults(self.scale, self.scenario)[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown [{self.kind}] keys: {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.params)
        object.__setattr__(self, "params", merged)

    def __getitem__(self, key):
        return self.params[key]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def digest(self) -> str:
        """SHA-256 of the canonical serialization."""
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()


def default_config(kind: str, scale: str = "desk", seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig(kind, scale, seed, _SCENARIOS[scale], {})


# --- value codecs -------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _parse_like(text: str, template, key: str, optional_type=None):
    """Parse ``text`` to the type of ``template`` (or ``optional_type`` if it is None)."""
    text = text.strip()
    if template is None or optional_type is not None:
        if text.lower() == "none":
            return None
        return _parse_like(text, optional_type() if template is None else template, key)
    if isinstance(template, bool):
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    if isinstance(template, list):
        items = [t for t in (s.strip() for s in text.split(",")) if t]
        proto = template[0] if template else ""
        return [_parse_like(t, proto, key) for t in items]
    return text


_SCENARIO_OPTIONAL = {"active_start": int, "csi_snr_db": float}


def _line_numbers(text: str) -> Dict[tuple, int]:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), i)
    return where


def parse_config(text: str, scale: Optional[str] = None) -> ExperimentConfig:
    """Parse configuration text.

    ``scale`` overrides ``[run] scale`` (the CLI ``--scale`` flag).
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc), getattr(exc, "lineno", None)) from None
    lines = _line_numbers(text)

    def fail(msg, section, key=None):
        raise ConfigError(msg, lines.get((section, key)))

    if "run" not in parser:
        raise ConfigError("missing [run] section")
    run = parser["run"]
    for key in run:
        if key not in ("kind", "scale", "seed"):
            fail(f"unknown key {key!r} in [run]", "run", key)
    if "kind" not in run:
        fail("[run] must set kind", "run")
    kind = run["kind"].strip()
    if kind not in KINDS:
        fail(f"unknown experiment kind {kind!r}", "run", "kind")
    scale = scale or run.get("scale", "desk").strip()
    if scale not in SCALES:
        fail(f"unknown scale {scale!r}", "run", "scale")
    try:
        seed = int(run.get("seed", "0"))
    except ValueError:
        fail("seed must be an integer", "run", "seed")

    for sec in parser.sections():
        if sec not in ("run", "scenario", kind):
            fail(f"unknown section [{sec}] for a {kind} experiment", sec)

    scenario = _SCENARIOS[scale]
    if "scenario" in parser:
        names = {f.name for f in fields(ScenarioConfig)}
        updates = {}
        for key, raw in parser["scenario"].items():
            if key not in names:
                fail(f"unknown key {key!r} in [scenario]", "scenario", key)
            try:
                updates[key] = _parse_like(raw, getattr(scenario, key), key,
                                           _SCENARIO_OPTIONAL.get(key))
            except ValueError as exc:
                fail(str(exc), "scenario", key)
        scenario = replace(scenario, **updates)
        try:
            scenario.system()
        except ValueError as exc:
            fail(f"invalid scenario: {exc}", "scenario")

    defaults = _kind_defaults(scale, scenario)[kind]
    params = {}
    if kind in parser:
        for key, raw in parser[kind].items():
            if key not in defaults:
                fail(f"unknown key {key!r} in [{kind}]", kind, key)
            try:
                params[key] = _parse_like(raw, defaults[key], key)
            except ValueError as exc:
                fail(str(exc), kind, key)
    try:
        return ExperimentConfig(kind, scale, seed, scenario, params)
    except ConfigError as exc:
        raise ConfigError(str(exc), lines.get(("run", None))) from None


def load_config(path, scale: Optional[str] = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), scale)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    out = ["[run]", f"kind = {cfg.kind}", f"scale = {cfg.scale}", f"seed = {cfg.seed}", "",
           "[scenario]"]
    for f in fields(ScenarioConfig):
        out.append(f"{f.name} = {_fmt(getattr(cfg.scenario, f.name))}")
    out += ["", f"[{cfg.kind}]"]
    for key, val in cfg.params.items():
        out.append(f"{key} = {_fmt(val)}")
    return "\n".join(out) + "\n"
