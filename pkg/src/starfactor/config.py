import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

from starfactor.errors import ConfigurationError

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
LOG_FILE_NAME = 'starfactor.log'


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")


def _env_flag(name, default):
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() not in ('0', 'false', 'no', 'off', '')


@dataclass(frozen=True)
class Settings:
    """Process-wide defaults, overridable from the environment and the CLI"""
    threads: int = 1
    enumeration_cap: int = 16
    factor_cap: int = 64
    log_dir: Path = Path('data/logs')
    log_level: str = 'INFO'
    progress: bool = True

    @classmethod
    def from_env(cls):
        settings = cls(
            threads=_env_int('STARFACTOR_THREADS', cls.threads),
            enumeration_cap=_env_int('STARFACTOR_ENUMERATION_CAP', cls.enumeration_cap),
            factor_cap=_env_int('STARFACTOR_FACTOR_CAP', cls.factor_cap),
            log_dir=Path(os.environ.get('STARFACTOR_LOG_DIR', str(cls.log_dir))),
            log_level=os.environ.get('STARFACTOR_LOG_LEVEL', cls.log_level).upper(),
            progress=_env_flag('STARFACTOR_PROGRESS', cls.progress),
        )
        settings.validate()
        return settings

    def validate(self):
        if self.threads < 1:
            raise ConfigurationError(f"threads must be at least 1, got {self.threads}")
        if self.enumeration_cap < 2:
            raise ConfigurationError(f"enumeration cap must be at least 2, got {self.enumeration_cap}")
        if self.factor_cap < 4:
            raise ConfigurationError(f"factor cap must be at least 4, got {self.factor_cap}")
        if not isinstance(logging.getLevelName(self.log_level), int):
            raise ConfigurationError(f"unknown log level {self.log_level!r}")

    def with_overrides(self, **overrides):
        """Copy with every non-None override applied"""
        changes = {key: value for key, value in overrides.items() if value is not None}
        settings = replace(self, **changes)
        settings.validate()
        return settings

    def as_dict(self):
        return {
            'threads': self.threads,
            'enumeration_cap': self.enumeration_cap,
            'factor_cap': self.factor_cap,
            'log_dir': str(self.log_dir),
            'log_level': self.log_level,
            'progress': self.progress,
        }


def setup_logging(settings=None):
    """Configure logging for a starfactor run"""
    settings = settings or Settings.from_env()
    log_path = Path(settings.log_dir) / LOG_FILE_NAME
    log_path.parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.getLevelName(settings.log_level),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(str(log_path)),
            logging.StreamHandler()
        ],
        force=True
    )
    logger = logging.getLogger('starfactor')
    logger.debug(f"Logging to {log_path}")
    return logger
