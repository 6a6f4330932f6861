from .app import create_app
from .config import ServiceConfig, load_config
from .core import CurationService, Decision, Session

__all__ = [
    "CurationService",
    "Decision",
    "Session",
    "ServiceConfig",
    "create_app",
    "load_config",
]
