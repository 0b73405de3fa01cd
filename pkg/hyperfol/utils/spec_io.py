"""
YAML readers for system specs and run configs. Syntax problems carry
line and column; schema problems carry the field path and, where the
document allows, the line of the offending key.
"""

import logging
import os
from typing import Any, Dict, Optional, Sequence, Type, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from models.run import SolverConfig
from models.system import SystemSpec
from utils.errors import SpecParseError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise SpecParseError(f"cannot read file: {exc.strerror}", path=path) from exc


def load_yaml_document(path: str) -> Dict[str, Any]:
    text = _read_text(path)
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else None
        column = f" (column {mark.column + 1})" if mark is not None else ""
        raise SpecParseError(f"{exc.problem or 'invalid YAML'}{column}", path=path, line=line) from exc
    except yaml.YAMLError as exc:
        raise SpecParseError(f"invalid YAML: {exc}", path=path) from exc
    if not isinstance(data, dict):
        raise SpecParseError("top level must be a mapping", path=path, line=1)
    return data


def _line_of(text: str, location: Sequence[Any]) -> Optional[int]:
    """1-based line of the node at a pydantic error location, if it exists in the document"""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    best = node.start_mark.line + 1 if node is not None else None
    for key in location:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            match = node.value[key]
        else:
            match = None
        if match is None:
            break
        node = match
        best = node.start_mark.line + 1
    return best


def parse_model(model: Type[ModelT], data: Dict[str, Any], path: Optional[str] = None,
                text: Optional[str] = None, prefix: Sequence[Any] = ()) -> ModelT:
    try:
        return model.parse_obj(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = list(prefix) + list(first["loc"])
        field = ".".join(str(part) for part in location)
        line = _line_of(text, location) if text else None
        raise SpecParseError(first["msg"], path=path, line=line, field=field) from exc


def load_system_spec(path: str) -> SystemSpec:
    data = load_yaml_document(path)
    nested = "spec" in data and isinstance(data["spec"], dict)
    spec = parse_model(SystemSpec, data["spec"] if nested else data, path, _read_text(path),
                       ("spec",) if nested else ())
    logger.debug(f"loaded system spec '{spec.name}' from {path}")
    return spec


def load_solver_config(path: str) -> SolverConfig:
    """
    A SolverConfig document. `spec` may be inline or a path to a spec file,
    resolved relative to the config file.
    """
    data = load_yaml_document(path)
    if isinstance(data.get("spec"), str):
        spec_path = os.path.join(os.path.dirname(os.path.abspath(path)), data["spec"])
        data = {**data, "spec": load_system_spec(spec_path).dict()}
    return parse_model(SolverConfig, data, path, _read_text(path))
