import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from crowdagg.core.errors import ConfigError
from crowdagg.domain.schemas import ExperimentConfig, OptimizerConfig, SynthConfig

PathLike = Union[str, Path]


def read_config_file(path: PathLike) -> Dict[str, Any]:
    """Raw mapping from a .toml or .json file."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"{p}: {e}", path=str(p)) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a table", path=str(p))
    return data


def _resolve(base: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else base / p)


def is_bare_synth(data: Dict[str, Any]) -> bool:
    """A non-empty table with no experiment keys is a SynthConfig written without a [synth] header."""
    return bool(data) and not set(data) & set(ExperimentConfig.model_fields)


def load_experiment_config(path: PathLike) -> ExperimentConfig:
    """ExperimentConfig from TOML/JSON; [data] paths are relative to the config file.

    A bare synth config (the form `synth --config` also accepts) is read as
    an experiment with defaults around that [synth] table.
    """
    p = Path(path)
    data = read_config_file(p)
    if is_bare_synth(data):
        data = {"synth": data}
    paths = data.get("data")
    if isinstance(paths, dict):
        base = p.resolve().parent
        data["data"] = {k: _resolve(base, v) if isinstance(v, str) else v for k, v in paths.items()}
    return ExperimentConfig.model_validate(data)


def load_optimizer_config(path: PathLike) -> OptimizerConfig:
    """The [optimizer] table of a config file, or the whole file when it has none."""
    data = read_config_file(path)
    return OptimizerConfig.model_validate(data.get("optimizer", data))


def synth_config(cfg: ExperimentConfig) -> SynthConfig:
    if cfg.synth is None:
        raise ConfigError("config has no [synth] section")
    return cfg.synth


def validation_message(e: ValidationError) -> str:
    """First validation problem as `loc: msg`, count of the rest appended."""
    errors = e.errors()
    first = errors[0]
    loc = ".".join(str(x) for x in first.get("loc", ())) or "config"
    more = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
    return f"{loc}: {first.get('msg')}{more}"
