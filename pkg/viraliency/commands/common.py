"""
Shared CLI plumbing.

Config flags are generated from the pydantic schemas, one flag per leaf key:

    RunConfig.train.base_lr    ->  --train.base_lr
    RunConfig.threads          ->  --threads
    SynthSpec.num_images       ->  --num_images

Flag values are parsed as JSON when possible (numbers, booleans, lists,
objects, null) and kept as plain strings otherwise, so enum names such as
LENA need no quoting. Only flags given explicitly become overrides.
"""
import argparse
import json
from pathlib import Path
from typing import Any, Dict, Optional, Type

from pydantic import BaseModel

from viraliency.core.config import get_settings
from viraliency.core.exceptions import ConfigError
from viraliency.schemas.run import RunConfig, load_run_config

_DEST_SEPARATOR = "__"


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors become ConfigError (one-line output)."""

    def error(self, message: str) -> None:
        raise ConfigError(f"{self.prog}: {message}")


def parse_flag_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _is_model(annotation: Any) -> bool:
    return isinstance(annotation, type) and issubclass(annotation, BaseModel)


def _help_text(field_info: Any) -> str:
    description = field_info.description or ""
    if field_info.is_required() or field_info.default_factory is not None:
        return description
    default = field_info.default
    if isinstance(default, BaseModel):
        default = default.model_dump(mode="json")
    if hasattr(default, "value"):
        default = default.value
    return f"{description} (default: {json.dumps(default) if not isinstance(default, str) else default})"


def add_model_flags(
    parser: argparse.ArgumentParser,
    model: Type[BaseModel],
    prefix: str = "",
    recurse: bool = True,
) -> None:
    """Add one `--<path>` flag per leaf field of `model`."""
    for name, field_info in model.model_fields.items():
        path = f"{prefix}{name}"
        if recurse and _is_model(field_info.annotation):
            group = parser.add_argument_group(f"{path} settings")
            add_model_flags(group, field_info.annotation, prefix=f"{path}.", recurse=False)
            continue
        parser.add_argument(
            f"--{path}",
            dest=path.replace(".", _DEST_SEPARATOR),
            type=parse_flag_value,
            default=argparse.SUPPRESS,
            metavar="VALUE",
            help=_help_text(field_info),
        )


def overrides_from_args(args: argparse.Namespace, model: Type[BaseModel]) -> Dict[str, Any]:
    """Nested dict of the schema flags that were given explicitly."""
    overrides: Dict[str, Any] = {}
    for dest, value in vars(args).items():
        head = dest.split(_DEST_SEPARATOR, 1)[0]
        if head not in model.model_fields:
            continue
        node = overrides
        parts = dest.split(_DEST_SEPARATOR)
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return overrides


def add_run_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON run config (flags override its keys)")
    parser.add_argument(
        "--seed",
        dest="seed_shortcut",
        type=int,
        default=None,
        help="Shortcut for --train.seed (initialisation and shuffling)",
    )
    add_model_flags(parser, RunConfig)


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """flags > config file > defaults."""
    overrides = overrides_from_args(args, RunConfig)
    if getattr(args, "seed_shortcut", None) is not None:
        overrides.setdefault("train", {})["seed"] = args.seed_shortcut
    return load_run_config(args.config, overrides)


def resolve_threads(explicit: Optional[int]) -> int:
    """--threads, then LENA_THREADS, then machine parallelism."""
    if explicit is not None:
        if explicit < 1:
            raise ConfigError(f"threads must be >= 1, got {explicit}")
        return explicit
    return get_settings().threads


def ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
