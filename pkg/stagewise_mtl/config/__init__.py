import io
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar, Union

import termcolor
import yaml
from pydantic import BaseModel, ValidationError
from ruamel.yaml import YAML

from ..exceptions import ConfigError
from ..loggings import logger
from .models import (PRESETS, Algorithm, ExperimentConfig, ExperimentKind, MultiStageConfig, Preset,
                     RayConfig, Settings, SolverConfig, SyntheticSpec)

T = TypeVar('T', bound=BaseModel)
SUPPORTED_EXTENSIONS = ['.yaml', '.yml', '.json']


def _print_error_line(document_lines, first_line, last_line, key):
    lines = []

    for i in range(max(first_line, 0), min(last_line, len(document_lines))):
        line = f'    {i + 1}: {document_lines[i]}'

        if key and document_lines[i].lstrip().startswith(f'{key}:'):
            line = termcolor.colored(line, color='red')

        lines.append(line)

    logger.error('\n'.join(lines))


def _print_validation_error(config_file: Optional[Path], validation_error: ValidationError):
    prefix = termcolor.colored('Error:', color='red')

    if config_file and config_file.suffix in ('.yaml', '.yml'):
        document = os.path.expandvars(config_file.read_text(encoding='utf-8'))
        yaml_doc = YAML(typ='rt').load(io.StringIO(document)) or {}
        document_lines = document.split('\n')
    else:
        yaml_doc = {}
        document_lines = []

    for error in validation_error.errors():
        locations = error['loc']
        key = locations[0] if locations else None

        if key in yaml_doc and hasattr(yaml_doc, 'lc'):
            line, _ = yaml_doc.lc.key(key)
            logger.error(f'\n{prefix} {error["msg"]}')
            logger.error(f'  On file {config_file}, Line {line + 1}')
            _print_error_line(document_lines, line - 1, line + 2, key)
        else:
            location = '.'.join(str(loc) for loc in locations)
            logger.error(f'\n{prefix} {location} {error["msg"]}')


def read_config_file(config_file: Union[str, Path]) -> Dict[str, Any]:
    config_file = Path(config_file)

    if config_file.suffix not in SUPPORTED_EXTENSIONS:
        raise ConfigError(f'Config file should have one of the following extensions: '
                          f'{",".join(SUPPORTED_EXTENSIONS)}')

    try:
        document = os.path.expandvars(config_file.read_text(encoding='utf-8'))
    except OSError as e:
        raise ConfigError(f'Could not read config file {config_file}: {e}') from e

    try:
        config = yaml.safe_load(document) if config_file.suffix in ('.yml', '.yaml') else json.loads(document)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f'Could not parse config file {config_file}: {e}') from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f'Config file {config_file} must contain a key-value mapping')
    return config


def _merge_overrides(values: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(values)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            base = merged.get(key)
            value = _merge_overrides(base if isinstance(base, dict) else {}, value)
        merged[key] = value
    return merged


def parse_config(config_file: Union[str, Path, None],
                 model: Type[T] = ExperimentConfig,
                 overrides: Optional[Dict[str, Any]] = None) -> T:
    """
    Load a flat YAML/JSON config file and validate it against *model*.

    Keys in *overrides* (the command line flags) take precedence over the file; None
    means the flag was not given and nested mappings are merged key by key.
    """
    config_file = Path(config_file) if config_file else None
    values = read_config_file(config_file) if config_file else {}
    values = _merge_overrides(values, overrides or {})

    try:
        return model.model_validate(values)
    except ValidationError as e:
        _print_validation_error(config_file, e)
        raise ConfigError(f'Invalid configuration: {e.error_count()} validation error(s)') from e
