"""HTTP face of the tracker: session-scoped streaming over FastAPI."""

from .app import app, create_app

__all__ = ["app", "create_app"]
