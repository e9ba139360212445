"""Sprintz-style lossless compression for multivariate integer time series."""
from .codec import (
    BlockHeader,
    CodecConfig,
    SprintzCodec,
    StreamHeader,
    compress,
    decode_block,
    decode_stream,
    decompress,
    encode_block,
    encode_stream,
    read_stream_header,
)
from .exceptions import CorruptStreamError, DataFormatError, SprintzError
from .forecasters import DeltaForecaster, FireForecaster, make_forecaster

__version__ = "0.1.0"

__all__ = [
    "BlockHeader",
    "CodecConfig",
    "CorruptStreamError",
    "DataFormatError",
    "DeltaForecaster",
    "FireForecaster",
    "SprintzCodec",
    "SprintzError",
    "StreamHeader",
    "compress",
    "decode_block",
    "decode_stream",
    "decompress",
    "encode_block",
    "encode_stream",
    "make_forecaster",
    "read_stream_header",
]
