"""Energy-harvesting gas-sensing node simulator."""

__version__ = "0.1.0"
