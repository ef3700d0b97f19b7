import yaml
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from ..nn.model import ModelConfig
from ..training.trainer import TrainConfig
from .exceptions import ConfigError
from .validation import validate_run_config, validate_sections

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'DENOISER_OUTPUT_DIR'
RUN_CONFIG_FILE = 'run_config.yaml'


def load_config(config_path="config.yaml"):
    """
    Loads the YAML configuration file.

    Args:
        config_path (str): The path to the configuration file.

    Returns:
        dict: The configuration settings, by section.
    """
    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f)
        logger.info(f"Configuration loaded successfully from {config_path}")
        return config or {}
    except FileNotFoundError:
        logger.error(f"Configuration file not found at {config_path}")
        raise ConfigError(f"Configuration file not found at {config_path}")
    except yaml.YAMLError as e:
        logger.error(f"Error parsing YAML file: {e}")
        raise ConfigError(f"Error parsing YAML file {config_path}: {e}")


@dataclass(frozen=True)
class DataConfig:
    manifest: Optional[str] = None
    corpus_dir: str = 'corpus'
    clean_dir: Optional[str] = None
    noise_dir: Optional[str] = None
    procedural: bool = True
    classes: int = 4
    per_class: int = 35
    train: Optional[int] = None
    valid: Optional[int] = None
    test: Optional[int] = None
    snr_min: float = 0.0
    snr_max: float = 20.0
    sample_rate: int = 16000
    duration: float = 1.0
    seed: int = 0
    clean_seed: Optional[int] = None
    recipe_offset: int = 0
    render: bool = False
    encoding: str = 'float32'

    @property
    def manifest_path(self):
        return self.manifest or os.path.join(self.corpus_dir, 'manifest.txt')


def _build_run_config(sections):
    model = dict(sections.get('model', {}))
    precision = model.pop('precision', 'float64')
    defaults = RunConfig()
    glob = sections.get('global', {})
    log = sections.get('logging', {})
    run_config = RunConfig(
        project_name=sections.get('project_name', defaults.project_name),
        model=ModelConfig(**model),
        training=TrainConfig(**sections.get('training', {})),
        data=DataConfig(**sections.get('data', {})),
        output_dir=glob.get('output_dir', defaults.output_dir),
        workers=glob.get('workers', defaults.workers),
        precision=precision,
        log_level=log.get('level', defaults.log_level),
        log_file=log.get('file', defaults.log_file),
    )
    validate_run_config(run_config)
    return run_config


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one invocation; serialised into the output directory."""
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    project_name: str = 'Speech Enhancement Run'
    output_dir: str = 'output'
    workers: int = 1
    precision: str = 'float64'
    log_level: str = 'INFO'
    log_file: Optional[str] = 'denoiser.log'

    def to_dict(self):
        model = self.model.to_dict()
        model['precision'] = self.precision
        return {
            'project_name': self.project_name,
            'model': model,
            'training': self.training.to_dict(),
            'data': asdict(self.data),
            'global': {'output_dir': self.output_dir, 'workers': self.workers},
            'logging': {'level': self.log_level, 'file': self.log_file},
        }

    def with_model(self, **changes):
        return replace(self, model=replace(self.model, **changes))

    def with_training(self, **changes):
        return replace(self, training=replace(self.training, **changes))


def _merge(base, update):
    merged = {key: dict(value) if isinstance(value, dict) else value for key, value in base.items()}
    for section, values in update.items():
        if isinstance(values, dict):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


def resolve_run_config(file_config=None, overrides=None, environ=None):
    """
    Merges file values, the output directory environment override and CLI flag
    overrides (in that order of precedence, lowest first) over the built-in defaults.

    `overrides` uses the file's section layout; None values mean "not given".
    """
    environ = os.environ if environ is None else environ
    sections = validate_sections(file_config or {})
    if environ.get(OUTPUT_DIR_ENV):
        sections = _merge(sections, {'global': {'output_dir': environ[OUTPUT_DIR_ENV]}})
    if overrides:
        given = {section: {k: v for k, v in values.items() if v is not None}
                 for section, values in overrides.items() if values}
        sections = _merge(sections, validate_sections(given))
    return _build_run_config(sections)


def save_run_config(run_config, output_dir=None):
    """Writes the resolved configuration to <output_dir>/run_config.yaml and returns the path."""
    output_dir = output_dir or run_config.output_dir
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, RUN_CONFIG_FILE)
    with open(path, 'w') as f:
        yaml.safe_dump(run_config.to_dict(), f, sort_keys=False)
    logger.info(f"Resolved run configuration written to {path}")
    return path
