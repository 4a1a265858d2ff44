"""HTTP sidecar serving sentence embeddings for document retrieval."""

from .app import create_app
from .models import HASH_MODEL_NAME, HashNgramModel, load_model

__all__ = ["create_app", "load_model", "HashNgramModel", "HASH_MODEL_NAME"]

__version__ = "0.1.0"
