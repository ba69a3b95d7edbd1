"""Flat run configuration with "paper" and "desk" presets.

Config files are ``key = value`` lines; ``#`` starts a comment. Every key must
be a field of :class:`Config`.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, MissingFile


@dataclass
class Config:
    preset: str = "desk"
    language: str = "java"
    # shared width
    d_e: int = 64
    # token encoder
    c_mode: str = "scratch"          # scratch | pretrained
    pretrained_path: str = ""
    freeze_encoder: bool = False
    L_c: int = 2
    head_c: int = 4
    d_model: int = 64
    d_k: int = 16
    d_v: int = 16
    d_ff: int = 128
    l_c: int = 64
    # graph encoder
    L_g: int = 2
    head_g: int = 4
    h_g: int = 64
    d_t: int = 16
    d_edge: int = 16
    l_g: int = 64
    gat_activation_outside: bool = False
    max_nodes: int = 5000
    max_kinds: int = 512
    control_patterns: str = "if,while,for,switch"
    # decoder
    L_d: int = 2
    heads_d: int = 4
    d_ff_d: int = 128
    l_s: int = 32
    fusion_ffn: bool = True
    # copy head
    copy_mode: str = "dual"          # dual | code | graph | none
    renormalize_leaf_copy: bool = True
    # training
    dropout: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 200
    patience: int = 5
    clip_norm: float = 5.0
    seed: int = 0
    # vocabulary
    vocab_min_count: int = 1
    vocab_max_size: int = 50000
    # inference
    beam_size: int = 6
    length_norm: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.language not in ("java", "python"):
            raise ConfigError(f"language must be java or python, got {self.language!r}")
        if self.c_mode not in ("scratch", "pretrained"):
            raise ConfigError(f"c_mode must be scratch or pretrained, got {self.c_mode!r}")
        if self.copy_mode not in ("dual", "code", "graph", "none"):
            raise ConfigError(f"unknown copy_mode {self.copy_mode!r}")
        for name, heads, width in (("d_model", self.head_c, self.d_model), ("d_e", self.heads_d, self.d_e),
                                   ("h_g", self.head_g, self.h_g)):
            if width % heads:
                raise ConfigError(f"{name}={width} is not divisible by {heads} heads")
        for name in ("l_c", "l_g", "l_s", "L_c", "L_g", "L_d", "beam_size", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def patterns(self) -> tuple[str, ...]:
        return tuple(p.strip() for p in self.control_patterns.split(",") if p.strip())

    def replace(self, **kw) -> "Config":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.to_dict().items())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# Large-scale values; the decoder keeps the base Transformer's 8 heads / 2048 feedforward.
PAPER = dict(
    preset="paper", d_e=768, L_c=12, head_c=12, d_model=768, d_k=64, d_v=64, d_ff=2048,
    L_g=4, head_g=8, h_g=768, d_t=128, d_edge=128, l_g=300, L_d=6, heads_d=8, d_ff_d=2048,
    dropout=0.2, learning_rate=1e-4, batch_size=32, beam_size=6,
)
PAPER_LANG = {"java": dict(l_c=400, l_s=100), "python": dict(l_c=300, l_s=80)}

DESK = dict(
    preset="desk", d_e=64, L_c=2, head_c=4, d_model=64, d_k=16, d_v=16, d_ff=128,
    L_g=2, head_g=4, h_g=64, d_t=16, d_edge=16, l_g=64, L_d=2, heads_d=4, d_ff_d=128,
    l_c=64, l_s=32, dropout=0.1, learning_rate=1e-3, batch_size=8, beam_size=6,
)


def preset(name: str = "desk", language: str = "java", **overrides) -> Config:
    if name == "paper":
        values = {**PAPER, **PAPER_LANG[language]}
    elif name == "desk":
        values = dict(DESK)
    else:
        raise ConfigError(f"unknown preset {name!r} (expected 'paper' or 'desk')")
    values["language"] = language
    values.update(overrides)
    _check_keys(values)
    return Config(**values)


_FIELDS = {f.name: f for f in fields(Config)}


def _check_keys(values):
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def coerce(key: str, raw):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = getattr(Config(), key)
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce(key, value)
    return out


def resolve(path=None, overrides: dict | None = None) -> Config:
    """Preset defaults <- config file <- explicit overrides; GYPSUM_SEED fills an unset seed."""
    values = {}
    if path is not None:
        if not Path(path).exists():
            raise MissingFile(f"config file not found: {path}")
        values.update(parse_config_text(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = coerce(k, v)
    if "seed" not in values and os.environ.get("GYPSUM_SEED"):
        values["seed"] = coerce("seed", os.environ["GYPSUM_SEED"])
    name = values.pop("preset", "desk")
    language = values.pop("language", "java")
    return preset(name, language, **values)
