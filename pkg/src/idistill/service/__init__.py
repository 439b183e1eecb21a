"""FastAPI service wrapping the training, evaluation and scoring pipeline."""

from .app import create_app

__all__ = ["create_app"]
