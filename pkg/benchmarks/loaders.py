import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from utils.exceptions import ConfigurationError

from .network_files import load_network
from .serializers import BenchmarkConfigSerializer

logger = logging.getLogger(__name__)

__all__ = ['read_config_file', 'load_benchmark_config', 'load_system_config', 'load_network']


def read_config_file(path):
    """TOML document of a benchmark config."""
    path = Path(path)
    try:
        with path.open('rb') as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigurationError({'config': [f'No such file: {path}']}) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError({'config': [f'Invalid TOML: {exc}']}) from None


def load_document(document, base_dir=None, name='system'):
    """Validated BenchmarkConfig for an already parsed config document."""
    serializer = BenchmarkConfigSerializer(data=document, context={'base_dir': base_dir, 'name': name})
    return serializer.load()


def load_benchmark_config(path, constants=None):
    """
    Validated BenchmarkConfig for a TOML file. Relative network paths
    resolve against the config's directory; `constants` adds or replaces
    named constants.
    """
    path = Path(path)
    document = read_config_file(path)
    if constants:
        document['constants'] = {**document.get('constants', {}), **constants}
    config = load_document(document, path.resolve().parent, path.stem)
    logger.info('Loaded benchmark %s from %s (n=%d, T=%d)', config.name, path, config.n, config.horizon)
    return config


def load_system_config(path, constants=None):
    """The SystemSpec a benchmark config describes."""
    return load_benchmark_config(path, constants).system
