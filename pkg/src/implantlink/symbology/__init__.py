"""Marking symbologies: Pharmacode, Code 128 (set B), and the 2D matrix symbol."""

from .code128 import (
    BadStartSymbol,
    BadStopPattern,
    ChecksumMismatch,
    Code128Error,
    UnknownSymbolPattern,
    UnsupportedCharacter,
    code128_decode,
    code128_encode,
    symbol_values,
)
from .datamatrix import (
    BadFinderPattern,
    DataMatrixError,
    PayloadTooLarge,
    SYMBOL_CONFIGS,
    data_codeword_positions,
    datamatrix_decode,
    datamatrix_encode,
)
from .patterns import BarPattern, BitMatrix, PatternError
from .pharmacode import (
    BadBarWidth,
    BarCountOutOfRange,
    PharmacodeError,
    ValueOutOfRange,
    pharmacode_decode,
    pharmacode_encode,
)
from .reedsolomon import (
    CodewordBlock,
    EmptyData,
    ReedSolomonError,
    TooManyErrors,
    rs_decode,
    rs_encode,
)

__all__ = [
    "BarPattern",
    "BitMatrix",
    "PatternError",
    "pharmacode_encode",
    "pharmacode_decode",
    "PharmacodeError",
    "ValueOutOfRange",
    "BadBarWidth",
    "BarCountOutOfRange",
    "code128_encode",
    "code128_decode",
    "symbol_values",
    "Code128Error",
    "UnsupportedCharacter",
    "BadStartSymbol",
    "BadStopPattern",
    "ChecksumMismatch",
    "UnknownSymbolPattern",
    "rs_encode",
    "rs_decode",
    "CodewordBlock",
    "ReedSolomonError",
    "EmptyData",
    "TooManyErrors",
    "datamatrix_encode",
    "datamatrix_decode",
    "data_codeword_positions",
    "SYMBOL_CONFIGS",
    "DataMatrixError",
    "PayloadTooLarge",
    "BadFinderPattern",
]
