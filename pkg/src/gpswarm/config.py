"""Flat key-value config files.

One `key = value` pair per line, keys matching EnvConfig field names
(plus heuristic_* keys for the baseline controller gains). Values are
ints, floats, or whitespace/comma-separated float lists; `#` starts a
comment.
"""

from dataclasses import fields

from .env import EnvConfig
from .errors import ConfigError
from .basis import Workspace
from .policies import HeuristicConfig

_HEURISTIC_PREFIX = "heuristic_"


def _parse_value(text):
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError("empty value")
    vals = []
    for p in parts:
        try:
            vals.append(int(p))
        except ValueError:
            try:
                vals.append(float(p))
            except ValueError as exc:
                raise ConfigError(f"cannot parse {p!r} as a number") from exc
    return vals[0] if len(vals) == 1 else vals


def parse_config_text(text):
    """(EnvConfig, HeuristicConfig) from the flat key = value format."""
    env_fields = {f.name for f in fields(EnvConfig)}
    heur_fields = {f.name for f in fields(HeuristicConfig)}
    env_kw = {}
    heur_kw = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        parsed = _parse_value(value.strip())
        if key == "workspace":
            if not isinstance(parsed, list) or len(parsed) != 4:
                raise ConfigError("workspace needs 4 numbers: xmin ymin xmax ymax")
            env_kw["workspace"] = Workspace(*[float(v) for v in parsed])
        elif key == "length_scale_sq":
            if not isinstance(parsed, list) or len(parsed) != 2:
                raise ConfigError("length_scale_sq needs 2 numbers")
            env_kw["length_scale_sq"] = tuple(float(v) for v in parsed)
        elif key in env_fields:
            env_kw[key] = parsed
        elif key.startswith(_HEURISTIC_PREFIX) and key[len(_HEURISTIC_PREFIX) :] in heur_fields:
            heur_kw[key[len(_HEURISTIC_PREFIX) :]] = float(parsed)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        return EnvConfig(**env_kw), HeuristicConfig(**heur_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def dump_config(env_config, heuristic_config=None):
    """Config file text reproducing the given configs."""
    lines = []
    ws = env_config.workspace
    for f in fields(EnvConfig):
        val = getattr(env_config, f.name)
        if f.name == "workspace":
            lines.append(f"workspace = {ws.xmin!r} {ws.ymin!r} {ws.xmax!r} {ws.ymax!r}")
        elif f.name == "length_scale_sq":
            lines.append(f"length_scale_sq = {val[0]!r} {val[1]!r}")
        else:
            lines.append(f"{f.name} = {val!r}")
    if heuristic_config is not None:
        for f in fields(HeuristicConfig):
            lines.append(f"{_HEURISTIC_PREFIX}{f.name} = {getattr(heuristic_config, f.name)!r}")
    return "\n".join(lines) + "\n"


def save_config(path, env_config, heuristic_config=None):
    with open(path, "w") as fh:
        fh.write(dump_config(env_config, heuristic_config))
