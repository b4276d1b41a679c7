"""Migration-flow error-correction models and smuggler boat-size choice estimation."""

from crosslab._accel import NUMBA_ENABLED
from crosslab.errors import CrossLabError

__version__ = "0.1.0"

__all__ = ["CrossLabError", "NUMBA_ENABLED", "__version__"]
