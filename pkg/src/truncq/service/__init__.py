"""HTTP service: FastAPI app factory and its request/response schemas."""

from .app import create_app

__all__ = ["create_app"]
