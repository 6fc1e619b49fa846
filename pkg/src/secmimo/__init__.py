"""Link-level simulation of data-aided secure massive MIMO under a pilot
contamination attack, with closed-form large-array secrecy rates."""

__version__ = "0.1.0"

from .config import ConfigError, SystemConfig, db2lin, lin2db, load_config  # noqa: E402

__all__ = ["ConfigError", "SystemConfig", "db2lin", "lin2db", "load_config", "__version__"]
