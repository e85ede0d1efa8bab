"""Session service: FastAPI app, live session runtime, wire models."""

from .app import create_app

__all__ = ["create_app"]
