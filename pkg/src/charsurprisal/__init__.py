"""Character-level surprisal from token-level language models."""

from .bpe import BPECodec, DecodeTrie, train_bpe
from .lm import MarkovTokenLM, EnumeratedTokenLM, NGramTokenLM, TokenLM, train_ngram
from .marginal import CharLM, PrefixBeam
from .text import (
    DEFAULT_SPECS,
    Convention,
    FocalSpec,
    Interval,
    ROISequence,
    Stimulus,
    focal_area,
    focal_table,
    segment_rois,
)

__version__ = "0.1.0"

__all__ = [
    "BPECodec",
    "CharLM",
    "Convention",
    "DEFAULT_SPECS",
    "DecodeTrie",
    "EnumeratedTokenLM",
    "FocalSpec",
    "Interval",
    "MarkovTokenLM",
    "NGramTokenLM",
    "PrefixBeam",
    "ROISequence",
    "Stimulus",
    "TokenLM",
    "__version__",
    "focal_area",
    "focal_table",
    "segment_rois",
    "train_bpe",
    "train_ngram",
]
