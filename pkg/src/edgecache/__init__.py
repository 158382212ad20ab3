"""Edge-cell simulator: offloading game, software caching agent and baselines."""
from .config import RunConfig, SystemConfig, RequestModel, AgentConfig, load_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["RunConfig", "SystemConfig", "RequestModel", "AgentConfig", "load_config",
           "BACKEND", "__version__"]
