import random

import pytest
from hypothesis import given, strategies as st

from implantlink.symbology import (
    BadStopPattern,
    BarPattern,
    Code128Error,
    UnsupportedCharacter,
    code128_decode,
    code128_encode,
    symbol_values,
)
from implantlink.symbology.code128 import SYMBOL_WIDTHS


def checksum_oracle(values: list[int]) -> int:
    """Independent mod-103 sum: start value weighted 1, data weighted by position."""
    total = values[0]
    for position, value in enumerate(values[1:], start=1):
        total += position * value
    return total % 103


def test_symbol_table_shape():
    assert len(SYMBOL_WIDTHS) == 107
    assert all(sum(int(d) for d in w) == 11 for w in SYMBOL_WIDTHS[:106])
    assert sum(int(d) for d in SYMBOL_WIDTHS[106]) == 13


def test_spec_symbol_sequences():
    # "A": checksum (104 + 1*33) mod 103 = 34
    assert symbol_values("A") == [104, 33, 34, 106]
    assert checksum_oracle([104, 33]) == 34
    # empty payload: 104 mod 103 = 1
    assert symbol_values("") == [104, 1, 106]


def test_round_trip_udi_text():
    assert code128_decode(code128_encode("UDI")) == "UDI"
    assert code128_decode(code128_encode("HIP-42")) == "HIP-42"


def test_unsupported_character():
    with pytest.raises(UnsupportedCharacter):
        code128_encode("brücke")


def test_truncated_pattern():
    pattern = code128_encode("HIP-42")
    truncated = BarPattern(pattern.elements[:-2])
    with pytest.raises(BadStopPattern):
        code128_decode(truncated)


def test_single_symbol_substitution_detected():
    # Exhaustive substitution sweep over a handful of payloads: replacing any
    # one symbol (start, data, or check) with any other symbol value must be
    # rejected -- mod 103 is prime, so position * delta never vanishes.
    rng = random.Random(7)
    alphabet = [chr(c) for c in range(32, 127)]
    payloads = ["".join(rng.choices(alphabet, k=rng.randint(1, 8))) for _ in range(5)]
    for payload in payloads:
        values = symbol_values(payload)
        body = values[:-1]  # start..checksum; stop is structural
        for pos in range(len(body)):
            for substitute in range(106):
                if substitute == body[pos]:
                    continue
                mutated = body[:pos] + [substitute] + body[pos + 1 :] + [106]
                widths = [int(d) for v in mutated for d in SYMBOL_WIDTHS[v]]
                with pytest.raises(Code128Error):
                    code128_decode(BarPattern.from_widths(widths))


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=30))
def test_round_trip_property(text):
    assert code128_decode(code128_encode(text)) == text
