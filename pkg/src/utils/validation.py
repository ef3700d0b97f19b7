import logging

from ..autograd.tensor import DTYPES
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

# Documented key set: section -> key -> (type, nullable).
SCHEMA = {
    'model': {
        'N': (int, False), 'L': (int, False), 'hop': (int, False), 'H': (int, False),
        'H_noise': (int, False), 'H_speech': (int, False), 'E_speech': (int, False),
        'classes': (int, False), 'window': (int, False), 'variant': (str, False), 'precision': (str, False),
    },
    'training': {
        'alpha': (float, True), 'lr_start': (float, False), 'lr_end': (float, False),
        'max_epochs': (int, False), 'patience': (int, False), 'batch_size': (int, False),
        'grad_clip': (float, True), 'seed': (int, False),
    },
    'data': {
        'manifest': (str, True), 'corpus_dir': (str, False), 'clean_dir': (str, True), 'noise_dir': (str, True),
        'procedural': (bool, False), 'classes': (int, False), 'per_class': (int, False),
        'train': (int, True), 'valid': (int, True), 'test': (int, True),
        'snr_min': (float, False), 'snr_max': (float, False), 'sample_rate': (int, False),
        'duration': (float, False), 'seed': (int, False), 'clean_seed': (int, True),
        'recipe_offset': (int, False), 'render': (bool, False), 'encoding': (str, False),
    },
    'global': {'output_dir': (str, False), 'workers': (int, False)},
    'logging': {'level': (str, False), 'file': (str, True)},
}
TOP_LEVEL_SCALARS = {'project_name': str}


def _coerce(section, key, value):
    kind, nullable = SCHEMA[section][key]
    if value is None:
        if nullable:
            return None
        raise ConfigError(f"'{section}.{key}' cannot be null.")
    try:
        if kind is bool:
            if isinstance(value, str):
                if value.lower() not in ('true', 'false', 'yes', 'no', '1', '0'):
                    raise ValueError(value)
                return value.lower() in ('true', 'yes', '1')
            return bool(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            # YAML reads 1e3 as a string.
            return int(float(value)) if isinstance(value, str) else int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{section}.{key}' must be of type {kind.__name__}, got {value!r}.")


def validate_sections(config):
    """
    Checks a sectioned configuration mapping against the documented key set.

    Unknown sections or keys raise ConfigError; values are converted to the
    documented types. Returns a new, coerced mapping.
    """
    if not isinstance(config, dict):
        raise ConfigError(f"Configuration must be a mapping of sections, got {type(config).__name__}.")
    checked = {}
    for section, values in config.items():
        if section in TOP_LEVEL_SCALARS:
            checked[section] = TOP_LEVEL_SCALARS[section](values)
            continue
        if section not in SCHEMA:
            raise ConfigError(f"Unknown configuration section '{section}'. Known: {sorted(SCHEMA)}.")
        if values is None:
            checked[section] = {}
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"Configuration section '{section}' must be a mapping.")
        unknown = sorted(set(values) - set(SCHEMA[section]))
        if unknown:
            raise ConfigError(f"Unknown keys in section '{section}': {unknown}. Known: {sorted(SCHEMA[section])}.")
        checked[section] = {key: _coerce(section, key, value) for key, value in values.items()}
    return checked


def validate_run_config(run_config):
    """Cross-field checks on a resolved RunConfig."""
    if run_config.precision not in DTYPES:
        raise ConfigError(f"Unsupported precision '{run_config.precision}'. Choose one of {sorted(DTYPES)}.")
    if run_config.workers < 1:
        raise ConfigError(f"global.workers must be at least 1, got {run_config.workers}.")
    if run_config.log_level.upper() not in LOG_LEVELS:
        raise ConfigError(f"Unknown log level '{run_config.log_level}'. Choose one of {LOG_LEVELS}.")
    # Rejects an explicit nonzero alpha for variants without a classifier.
    run_config.training.alpha_for(run_config.model.variant)

    data = run_config.data
    if data.snr_min > data.snr_max:
        raise ConfigError(f"data.snr_min ({data.snr_min}) exceeds data.snr_max ({data.snr_max}).")
    if data.duration <= 0 or data.sample_rate <= 0:
        raise ConfigError("data.duration and data.sample_rate must be positive.")
    counts = [data.train, data.valid, data.test]
    if any(c is not None for c in counts) and any(c is None for c in counts):
        raise ConfigError("Give all of data.train, data.valid and data.test, or none of them.")
    logger.debug("Run configuration passed validation")
