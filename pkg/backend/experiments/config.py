"""Run configuration: a flat text file of ``section.key = value`` lines.

    # Taylor-Green in co-rotation
    grid.n = 128
    model.rotation_mode = corotation
    model.alpha = 0
    initial_data.name = taylor_green
    diagnostics.p_list = 2, 4, inf

Blank lines and ``#`` comments are ignored. Values are coerced to int, float
(``inf`` allowed), bool (true/false) or a comma-separated tuple; anything else
stays a string. Unknown sections and keys are errors.
"""
import difflib
import logging
import math
import typing
from typing import Any, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from experiments.generators import GeneratorSpec
from solver.diagnostics import DiagnosticsConfig
from solver.errors import ConfigError
from solver.integrator import StepperConfig
from solver.model import ModelParams
from solver.spectral_core import GridSpec

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ["grid.n", "model.rotation_mode", "initial_data.name"]
# Physical names people reach for, mapped to the key that holds them
HINTS = {
    "viscosity": "model.nu",
    "damping": "model.a",
    "diffusivity": "model.mu",
    "coupling": "model.alpha",
    "slip": "model.b",
    "resolution": "grid.n",
    "length": "grid.box_length",
}


class OutputConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: str = Field("runs/output", description="directory receiving the echo, CSV, snapshots and report")
    csv: bool = Field(True, description="write diagnostics.csv")
    snapshot_times: Tuple[float, ...] = Field((), description="times at which state snapshots are written")
    seed: int = Field(0, description="seed of randomized initial data")
    check_set: Optional[str] = Field(None, description="check category (defaults to the config's parent directory)")


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    grid: GridSpec
    model: ModelParams
    stepper: StepperConfig = StepperConfig()
    initial_data: GeneratorSpec
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    outputs: OutputConfig = OutputConfig()


SECTIONS: Dict[str, Type[BaseModel]] = {
    "grid": GridSpec,
    "model": ModelParams,
    "stepper": StepperConfig,
    "initial_data": GeneratorSpec,
    "diagnostics": DiagnosticsConfig,
    "outputs": OutputConfig,
}


def valid_keys() -> List[str]:
    return [f"{section}.{name}" for section, model in SECTIONS.items() for name in model.model_fields]


def _coerce_scalar(text: str) -> Any:
    lowered = text.lower()
    if lowered in ("inf", "+inf", "infinity"):
        return math.inf
    if lowered == "-inf":
        return -math.inf
    if lowered in ("true", "yes"):
        return True
    if lowered in ("false", "no"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        return text
    return text if math.isnan(value) else value


def _coerce(text: str, annotation: Any) -> Any:
    if typing.get_origin(annotation) is tuple:
        return tuple(_coerce_scalar(part.strip()) for part in text.split(",") if part.strip())
    if text == "":
        return None
    return _coerce_scalar(text)


def _unknown_key(key: str, line_no: int, source: str) -> ConfigError:
    matches = difflib.get_close_matches(key, valid_keys(), n=1)
    leaf = key.rsplit(".", 1)[-1]
    if not matches:
        hint = difflib.get_close_matches(leaf, list(HINTS), n=1)
        matches = [HINTS[hint[0]]] if hint else []
    if not matches:
        matches = difflib.get_close_matches(leaf, [k.rsplit(".", 1)[-1] for k in valid_keys()], n=1)
        matches = [k for k in valid_keys() if matches and k.endswith("." + matches[0])][:1]
    return ConfigError(f"{source}:{line_no}: unknown key '{key}'", key=key, suggestion=matches[0] if matches else None)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse the text of a run configuration into a validated RunConfig."""
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'section.key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise _unknown_key(key, line_no, source)
        section, name = key.split(".", 1)
        model = SECTIONS.get(section)
        if model is None or name not in model.model_fields:
            raise _unknown_key(key, line_no, source)
        if name in sections[section]:
            raise ConfigError(f"{source}:{line_no}: key '{key}' is set twice", key=key)
        coerced = _coerce(value, model.model_fields[name].annotation)
        if coerced is not None:
            sections[section][name] = coerced

    for key in REQUIRED_KEYS:
        section, name = key.split(".", 1)
        if name not in sections[section]:
            raise ConfigError(f"{source}: missing required key '{key}'", key=key)

    built = {}
    for section, model in SECTIONS.items():
        try:
            built[section] = model(**sections[section])
        except ValidationError as e:
            error = e.errors()[0]
            loc = ".".join(str(part) for part in error["loc"])
            key = f"{section}.{loc}" if loc else section
            raise ConfigError(f"{source}: invalid value for '{key}': {error['msg']}", key=key) from e
    return RunConfig(**built)


def parse_config(path: str) -> RunConfig:
    logger.info(f"Parsing run configuration {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    return parse_config_text(text, source=path)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def echo_config(cfg: RunConfig) -> str:
    """Every effective setting, one per line; parses back to an identical RunConfig."""
    lines = []
    for section in SECTIONS:
        model = getattr(cfg, section)
        for name in type(model).model_fields:
            value = getattr(model, name)
            if value is None or value == ():
                continue
            lines.append(f"{section}.{name} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def reference_table() -> List[Tuple[str, str, str]]:
    """Rows (key, default, description) for every accepted key."""
    rows = []
    for section, model in SECTIONS.items():
        for name, info in model.model_fields.items():
            key = f"{section}.{name}"
            if key in REQUIRED_KEYS or info.is_required():
                default = "(required)"
            elif info.default is None:
                default = "-"
            else:
                default = format_value(info.default)
            rows.append((key, default, info.description or ""))
    return rows
