"""Twin-embedding cache exporter for the lyricgauge content model."""

from .encoders import (ExportError, HashSentenceEncoder, HiddenStateEncoder,
                       SentenceTransformerEncoder, load_encoder)
from .export import (CacheComparison, ExportConfig, ExportReport, compare_caches,
                     export_cache)

__version__ = "0.1.0"

__all__ = [
    "CacheComparison",
    "ExportConfig",
    "ExportError",
    "ExportReport",
    "HashSentenceEncoder",
    "HiddenStateEncoder",
    "SentenceTransformerEncoder",
    "compare_caches",
    "export_cache",
    "load_encoder",
    "__version__",
]
