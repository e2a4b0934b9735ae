"""Line-oriented `key = value` configuration for the batch experiments.

Keys map one-to-one onto ScanConfig fields; unknown keys are errors so that
typos cannot silently change a run.  hbar_list entries may be written either
as plain floats or as `2pi/N` (exact torus values).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

from ..rotor import ResonanceError, check_resonance

EXPERIMENTS = ("echo-series", "coupling-scan", "hbar-scan", "equilibrate",
               "bipartite", "rmt-check")
OMEGA0_PATTERN = re.compile(r"^(momentum_zero|random_pure:\d+|maximally_mixed:\d+)$")
TWO_PI_TOKEN = re.compile(r"^2\s*\*?\s*pi\s*/\s*(\d+)$", re.IGNORECASE)


class ConfigError(ValueError):
    pass


def parse_hbar_token(token: str) -> float:
    token = token.strip()
    m = TWO_PI_TOKEN.match(token)
    if m:
        return 2 * math.pi / int(m.group(1))
    try:
        return float(token)
    except ValueError as exc:
        raise ConfigError(f"bad hbar value {token!r}") from exc


@dataclass(frozen=True)
class ScanConfig:
    experiment: str = "echo-series"
    K: float = 5.0
    geometry: str = "torus"
    lattice_m: int = 0            # 0 = size the lattice from the expected localization length
    hbar_list: tuple = ()
    g_list: tuple = ()
    epsilon_nm: float = 0.1
    shift: float = 0.1            # unperturbed coupling term s_m * g_bar
    coupling: str = "linear"
    omega0: str = "momentum_zero"
    window_start: int = 500
    window_len: int = 5000
    realizations: int = 1
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    alpha_sq: float = 4.0
    omega_c: float = 1.0
    g_bar: float = 0.05
    cue_n: int = 32
    cue_samples: int = 10000

    def validated(self) -> "ScanConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        if self.geometry not in ("torus", "lattice"):
            raise ConfigError(f"geometry must be torus or lattice, got {self.geometry!r}")
        if self.coupling not in ("linear", "kicked"):
            raise ConfigError(f"coupling must be linear or kicked, got {self.coupling!r}")
        if not OMEGA0_PATTERN.match(self.omega0):
            raise ConfigError(
                f"omega0 must be momentum_zero, random_pure:<seed> or "
                f"maximally_mixed:<dim>, got {self.omega0!r}")
        if self.window_start < 0 or self.window_len < 1:
            raise ConfigError("window_start must be >= 0 and window_len >= 1")
        if self.workers < 1 or self.realizations < 1:
            raise ConfigError("workers and realizations must be >= 1")
        needs_hbar = self.experiment in ("echo-series", "coupling-scan", "hbar-scan",
                                         "equilibrate", "bipartite")
        if needs_hbar and not self.hbar_list:
            raise ConfigError(f"{self.experiment} needs a nonempty hbar_list")
        if self.experiment == "coupling-scan" and not self.g_list:
            raise ConfigError("coupling-scan needs a nonempty g_list")
        for h in self.hbar_list:
            if h <= 0:
                raise ConfigError(f"hbar value {h!r} must be positive")
            try:
                check_resonance(h)
            except ResonanceError as exc:
                raise ConfigError(str(exc)) from exc
            if self.geometry == "torus":
                n = round(2 * math.pi / h)
                if abs(2 * math.pi / n - h) > 1e-9 or n & (n - 1):
                    raise ConfigError(
                        f"torus hbar {h!r} must equal 2pi/N with N a power of two "
                        "(write it as 2pi/N in the config)")
        return self

    def torus_dims(self) -> list[int]:
        return [round(2 * math.pi / h) for h in self.hbar_list]

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(ScanConfig)}
_LIST_FIELDS = {"hbar_list", "g_list"}
_INT_FIELDS = {"lattice_m", "window_start", "window_len", "realizations",
               "seed", "workers", "cue_n", "cue_samples"}
_FLOAT_FIELDS = {"K", "epsilon_nm", "shift", "alpha_sq", "omega_c", "g_bar"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in _LIST_FIELDS:
        items = [s for s in (p.strip() for p in raw.split(",")) if s]
        if key == "hbar_list":
            return tuple(parse_hbar_token(s) for s in items)
        try:
            return tuple(float(s) for s in items)
        except ValueError as exc:
            raise ConfigError(f"bad float in {key}: {raw!r}") from exc
    if key in _INT_FIELDS:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc
    if key in _FLOAT_FIELDS:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from exc
    return raw


def parse_config_text(text: str, base: ScanConfig | None = None) -> ScanConfig:
    cfg = base or ScanConfig()
    updates = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _convert(key, raw)
    return replace(cfg, **updates)


def load_config(path, base: ScanConfig | None = None) -> ScanConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)
