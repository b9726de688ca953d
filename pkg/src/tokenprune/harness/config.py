"""Harness configuration: INI file sections, CLI flags, and their precedence.

Every key in ``KEYS`` can be set in a config file under its section or on the
command line as ``--key-name``. A flag beats the file, and the file beats the
built-in default.
"""

import argparse
import configparser
import os
from dataclasses import dataclass, field

from ..errors import ConfigError


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    text = str(text).strip()
    if not text:
        return None
    return tuple(int(x) for x in text.split(","))


def _frange(text):
    return parse_range(text, float)


def _irange(text):
    return parse_range(text, int)


def parse_range(text, kind=float):
    """``a``, ``a,b,c`` or inclusive ``a:b[:step]`` into a tuple of values."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"range must be start:stop[:step], got {text!r}")
        start, stop = kind(parts[0]), kind(parts[1])
        step = kind(parts[2]) if len(parts) == 3 else kind(1)
        if step <= 0:
            raise ValueError("range step must be positive")
        if stop < start:
            raise ValueError(f"range stop {stop} below start {start}")
        if kind is int:
            return tuple(range(start, stop + 1, step))
        n = int(round((stop - start) / step, 9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    return tuple(kind(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    parse: object
    default: object
    help: str = ""
    echo: bool = True  # False for keys that cannot change results


KEYS = (
    Key("model", "num_layers", int, 8, "transformer layers L"),
    Key("model", "hidden_dim", int, 64, "hidden size D"),
    Key("model", "num_heads", int, 4, "attention heads"),
    Key("model", "head_dim", int, 16, "per-head width (D = heads * head_dim)"),
    Key("model", "ffn_dim", int, 128, "FFN width m"),
    Key("model", "action_dim", int, 7, "action vector length"),
    Key("model", "temperature_slope", float, 0.75, "logit scale slope per layer"),
    Key("model", "model_seed", int, 0, "weight seed"),
    Key("episode", "timesteps", int, 20, "steps per episode T"),
    Key("episode", "num_tokens", int, 64, "visual tokens per step"),
    Key("episode", "semantic_groups", int, 4, "background + objects + distractor"),
    Key("episode", "transitions", int, 1, "subtask switches per episode"),
    Key("episode", "motion_amplitude", float, 0.35, "token drift per step"),
    Key("episode", "noise_sigma", float, 0.02, "embedding noise std"),
    Key("episode", "object_width", int, 18, "tokens per object"),
    Key("episode", "part_width", int, 0, "tokens per object part (0: 10%% of tokens)"),
    Key("episode", "distractor_width", int, 3, "tokens in the salient distractor"),
    Key("episode", "distractor_salience", float, 1.0, "distractor salience cue"),
    Key("episode", "part_coarse", float, 0.6, "coarse-feature scale on part tokens"),
    Key("episode", "num_query", int, 4, "query (action) tokens"),
    Key("episode", "num_text", int, 8, "text tokens"),
    Key("pruner", "prune_layer", _irange, (3,), "layer after which tokens are pruned"),
    Key("pruner", "deep_layers", _int_list, None, "deep layer set, e.g. 0,6,7"),
    Key("pruner", "lambda", float, 0.5, "fusion weight of the deep forecast"),
    Key("pruner", "gamma", float, 0.92, "keyframe cosine threshold"),
    Key("pruner", "rho", _frange, (0.8,), "prune ratio; list or a:b:step"),
    Key("variant", "variant", str, "full", "full | shallow_only | fixed_interval"),
    Key("variant", "interval", int, 4, "keyframe interval for fixed_interval"),
    Key("run", "episodes", int, 20, "episodes in the suite"),
    Key("run", "seed", int, 0, "suite seed"),
    Key("run", "workers", int, 1, "episode-level worker threads", echo=False),
    Key("run", "out", str, "", "output path (default: stdout)", echo=False),
    Key("run", "format", str, "json", "json | csv"),
    Key("run", "measure_core_loss", _bool, False, "run an unpruned reference pass per step"),
    Key("run", "core_fraction", float, 0.1, "core set size as a fraction of tokens"),
    Key("run", "max_offset", int, 10, "largest forecast offset"),
    Key("run", "continuous", _bool, False, "sweep with unrounded retained tokens"),
)

_BY_NAME = {k.name: k for k in KEYS}
SECTIONS = tuple(dict.fromkeys(k.section for k in KEYS))


def flag_name(key):
    return "--" + key.name.replace("_", "-")


def add_key_flags(parser):
    """One flag per key; defaults are None so unset flags are detectable."""
    for k in KEYS:
        dest = "key_" + k.name
        if k.parse is _bool:
            parser.add_argument(
                flag_name(k), dest=dest, default=None, action=argparse.BooleanOptionalAction,
                help=k.help,
            )
        else:
            parser.add_argument(flag_name(k), dest=dest, default=None, metavar="V", help=k.help)


@dataclass
class HarnessConfig:
    values: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]

    def echo(self):
        """Nested {section: {key: value}} for reports."""
        out = {s: {} for s in SECTIONS}
        for k in KEYS:
            if not k.echo:
                continue
            v = self.values[k.name]
            out[k.section][k.name] = list(v) if isinstance(v, tuple) else v
        return out


def _parse(key, raw, where):
    try:
        return key.parse(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{key.section}] {key.name}: bad value {raw!r} ({where}): {e}") from e


def read_config_file(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as f:
            cp.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e
    raw = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for name, value in cp.items(section):
            key = _BY_NAME.get(name)
            if key is None or key.section != section:
                raise ConfigError(f"unknown config key [{section}] {name} in {path}")
            raw[name] = value
    return raw


def resolve(args):
    """Merge defaults, the optional ``--config`` file and flags."""
    values = {k.name: k.default for k in KEYS}
    source = {k.name: "default" for k in KEYS}
    path = getattr(args, "config", None)
    if path:
        for name, raw in read_config_file(path).items():
            values[name] = _parse(_BY_NAME[name], raw, path)
            source[name] = "file"
    for k in KEYS:
        raw = getattr(args, "key_" + k.name, None)
        if raw is None:
            continue
        values[k.name] = raw if isinstance(raw, bool) else _parse(k, raw, flag_name(k))
        source[k.name] = "flag"
    return HarnessConfig(values=values, source=source)
