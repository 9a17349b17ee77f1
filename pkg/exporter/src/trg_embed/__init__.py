"""Description-to-embedding exporter emitting TRGE files."""

from .descriptions import DescriptionSet, load_descriptions
from .encoder import BuiltinEncoder, EncoderLoadError, PretrainedEncoder, load_encoder
from .export import LabeledEmbeddings, encode_descriptions, write_trge

__all__ = [
    "BuiltinEncoder",
    "DescriptionSet",
    "EncoderLoadError",
    "LabeledEmbeddings",
    "PretrainedEncoder",
    "encode_descriptions",
    "load_descriptions",
    "load_encoder",
    "write_trge",
]
