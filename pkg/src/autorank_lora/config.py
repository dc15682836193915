"""Experiment configuration files.

The native format is flat ``key = value`` text; ``#`` starts a comment.
Keys are namespaced ``task.*``, ``train.*`` and ``output.*``::

    # default experiment
    task.d = 64
    task.profile = 4, 3, 2, 1
    train.restart_interval = 10
    output.dir = runs/default

JSON is accepted too, either flat (``{"task.d": 64}``) or nested
(``{"task": {"d": 64}}``). Unknown keys are errors; missing keys take the
defaults below.
"""

import json
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError, DomainError
from .trainer import TrainConfig

OUTPUT_ROOT_ENV = "AUTORANK_OUTPUT_ROOT"

TASK_DEFAULTS = {
    "d": 64,
    "k": 64,
    "rank": 4,
    "profile": [4.0, 3.0, 2.0, 1.0],
    "label_noise_std": 0.05,
    "input_std": 1.0,
    "seed": 0,
    "layers": 1,
}
TASK_TYPES = {
    "d": int, "k": int, "rank": int, "profile": list, "label_noise_std": float,
    "input_std": float, "seed": int, "layers": int,
}
TRAIN_TYPES = {f.name: f.type for f in fields(TrainConfig)}
OUTPUT_TYPES = {"dir": str, "emit_plots": bool}


@dataclass
class RunConfig:
    task: dict = field(default_factory=lambda: dict(TASK_DEFAULTS))
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "runs/default"
    emit_plots: bool = False

    def to_flat(self):
        flat = {f"task.{k}": v for k, v in self.task.items()}
        flat.update({f"train.{k}": v for k, v in self.train.to_dict().items()})
        flat["output.dir"] = self.output_dir
        flat["output.emit_plots"] = self.emit_plots
        return flat

    def resolved_output_dir(self):
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not os.path.isabs(self.output_dir):
            return os.path.join(root, self.output_dir)
        return self.output_dir

    def with_seed(self, seed):
        flat = self.to_flat()
        flat["task.seed"] = seed
        flat["train.seed"] = seed
        return from_flat(flat)

    def with_mode(self, mode):
        flat = self.to_flat()
        flat["train.mode"] = mode
        return from_flat(flat)


def _type_of(key):
    section, _, name = key.partition(".")
    table = {"task": TASK_TYPES, "train": TRAIN_TYPES, "output": OUTPUT_TYPES}.get(section)
    if table is None or name not in table:
        return None
    t = table[name]
    return {"int": int, "float": float, "str": str}.get(t, t) if isinstance(t, str) else t


def _coerce(key, value, line=None, source=None):
    kind = _type_of(key)
    if kind is None:
        raise ConfigError(f"unknown key {key!r}", line, source)
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("true", "yes", "1", "on"):
                return True
            if text in ("false", "no", "0", "off"):
                return False
            raise ValueError(value)
        if kind is list:
            if isinstance(value, str):
                value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
            return [float(v) for v in value]
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            if isinstance(value, str):
                return int(value.strip())
            return int(value)
        if kind is float:
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(
            f"bad value {value!r} for {key} (expected {kind.__name__})", line, source
        ) from None


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def from_flat(flat, lines=None, source=None):
    """Build a validated RunConfig from ``{dotted key: value}``.

    ``lines`` optionally maps keys to source line numbers for error messages.
    """
    lines = lines or {}
    task = dict(TASK_DEFAULTS)
    train = TrainConfig().to_dict()
    out = {"dir": "runs/default", "emit_plots": False}
    for key, raw in flat.items():
        value = _coerce(key, raw, lines.get(key), source)
        section, _, name = key.partition(".")
        {"task": task, "train": train, "output": out}[section][name] = value
    try:
        config = TrainConfig(**train).validate()
    except DomainError as exc:
        bad = next((k for k in flat if k.startswith("train.") and k[6:] in str(exc)), None)
        raise ConfigError(str(exc), lines.get(bad), source) from None
    if task["layers"] < 1:
        raise ConfigError("task.layers must be at least 1", lines.get("task.layers"), source)
    if len(task["profile"]) != task["rank"]:
        anchor = lines.get("task.profile", lines.get("task.rank"))
        raise ConfigError(
            f"task.profile has {len(task['profile'])} entries but task.rank is {task['rank']}",
            anchor, source,
        )
    if config.max_rank > min(task["d"], task["k"]):
        raise ConfigError(
            f"train.max_rank {config.max_rank} exceeds min(task.d, task.k)",
            lines.get("train.max_rank"), source,
        )
    return RunConfig(task=task, train=config, output_dir=out["dir"], emit_plots=out["emit_plots"])


def parse_text(text, source=None):
    flat, lines = {}, {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number, source)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in flat:
            raise ConfigError(f"duplicate key {key!r}", number, source)
        if _type_of(key) is None:
            raise ConfigError(f"unknown key {key!r}", number, source)
        flat[key] = value.strip()
        lines[key] = number
    return from_flat(flat, lines, source)


def parse_json(text, source=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", 1, source)
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update({f"{key}.{k}": v for k, v in value.items()})
        else:
            flat[key] = value
    return from_flat(flat, source=source)


def load_config(path):
    """Read a config file, picking the parser from the content."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json") or text.lstrip().startswith("{"):
        return parse_json(text, source=path)
    return parse_text(text, source=path)


def dump_config(config):
    """Serialize to the key-value format; ``parse_text`` reads it back
    unchanged."""
    return "".join(f"{key} = {_format(value)}\n" for key, value in config.to_flat().items())


def apply_overrides(config, assignments):
    """Apply ``key=value`` strings (command-line ``--set``) on top of a
    config."""
    flat = config.to_flat()
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, value = item.partition("=")
        key = key.strip()
        if _type_of(key) is None:
            raise ConfigError(f"unknown key {key!r}")
        flat[key] = value.strip()
    return from_flat(flat)
