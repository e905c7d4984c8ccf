"""HTTP service layer: FastAPI app plus its request/response models."""
from .app import app

__all__ = ["app"]
