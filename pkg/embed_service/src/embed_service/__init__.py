"""HTTP sidecar serving L2-normalized diff and text embeddings."""

from .app import create_app
from .encoders import NgramHashEncoder, build_encoders, normalize

__all__ = ["create_app", "NgramHashEncoder", "build_encoders", "normalize"]

__version__ = "0.1.0"
