"""One-track Pharmacode codec.

Bars are narrow (binary digit 1) or wide (digit 2), leftmost most
significant; a pattern of n bars encodes value = sum(b_k * 2^(n-1-k)).
n bars therefore cover the contiguous range [2^n - 1, 2^(n+1) - 2], and
2..16 bars give the full value range 3..131070. Rendered geometry follows
the public Laetus convention: narrow bars 1 module, wide bars 3 modules,
gaps 2 modules.
"""

from __future__ import annotations

from .patterns import BarPattern

MIN_VALUE = 3
MAX_VALUE = 131070
MIN_BARS = 2
MAX_BARS = 16

NARROW_MODULES = 1
WIDE_MODULES = 3
GAP_MODULES = 2


class PharmacodeError(ValueError):
    pass


class ValueOutOfRange(PharmacodeError):
    pass


class BadBarWidth(PharmacodeError):
    pass


class BarCountOutOfRange(PharmacodeError):
    pass


def encode_digits(value: int) -> list[int]:
    """Value -> list of bar digits (1 narrow, 2 wide), leftmost first."""
    if not MIN_VALUE <= value <= MAX_VALUE:
        raise ValueOutOfRange(f"pharmacode values are {MIN_VALUE}..{MAX_VALUE}, got {value}")
    n = (value + 1).bit_length() - 1  # value in [2^n - 1, 2^(n+1) - 2]
    offset = value - (2**n - 1)
    return [1 + ((offset >> (n - 1 - k)) & 1) for k in range(n)]


def decode_digits(digits: list[int]) -> int:
    if not MIN_BARS <= len(digits) <= MAX_BARS:
        raise BarCountOutOfRange(f"need {MIN_BARS}..{MAX_BARS} bars, got {len(digits)}")
    n = len(digits)
    return sum(d << (n - 1 - k) for k, d in enumerate(digits))


def pharmacode_encode(value: int, module_width_mm: float = 0.5) -> BarPattern:
    digits = encode_digits(value)
    elements: list[tuple[str, int]] = []
    for i, d in enumerate(digits):
        if i:
            elements.append(("gap", GAP_MODULES))
        elements.append(("bar", NARROW_MODULES if d == 1 else WIDE_MODULES))
    return BarPattern(tuple(elements), module_width_mm)


def pharmacode_decode(pattern: BarPattern) -> int:
    digits = []
    for kind, width in pattern.elements:
        if kind == "gap":
            if width != GAP_MODULES:
                raise BadBarWidth(f"pharmacode gaps are {GAP_MODULES} modules, got {width}")
            continue
        if width == NARROW_MODULES:
            digits.append(1)
        elif width == WIDE_MODULES:
            digits.append(2)
        else:
            raise BadBarWidth(f"bar width must be {NARROW_MODULES} or {WIDE_MODULES} modules, got {width}")
    return decode_digits(digits)
