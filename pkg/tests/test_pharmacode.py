import itertools

import pytest
from hypothesis import given, strategies as st

from implantlink.symbology import (
    BadBarWidth,
    BarCountOutOfRange,
    BarPattern,
    ValueOutOfRange,
    pharmacode_decode,
    pharmacode_encode,
)
from implantlink.symbology.pharmacode import decode_digits, encode_digits


def test_spec_values():
    assert encode_digits(3) == [1, 1]
    assert encode_digits(6) == [2, 2]
    assert encode_digits(131070) == [2] * 16


def test_rendered_geometry():
    # value 3: two narrow bars separated by a 2-module gap
    pattern = pharmacode_encode(3)
    assert pattern.to_text() == "B1 G2 B1"
    assert pharmacode_encode(6).to_text() == "B3 G2 B3"


def test_out_of_range():
    for v in (2, 0, -5, 131071):
        with pytest.raises(ValueOutOfRange):
            pharmacode_encode(v)


def test_bar_count_limits():
    with pytest.raises(BarCountOutOfRange):
        decode_digits([1])
    with pytest.raises(BarCountOutOfRange):
        decode_digits([1] * 17)


def test_bad_widths():
    with pytest.raises(BadBarWidth):
        pharmacode_decode(BarPattern.from_widths([2, 2, 1]))  # 2-module bar
    with pytest.raises(BadBarWidth):
        pharmacode_decode(BarPattern.from_widths([1, 1, 1]))  # 1-module gap


def test_exhaustive_digit_enumeration_small():
    # Oracle: enumerate every bar sequence up to 8 bars and check that
    # encode maps the decoded value back to exactly that sequence.
    seen = {}
    for n in range(2, 9):
        for digits in itertools.product((1, 2), repeat=n):
            value = sum(d << (n - 1 - k) for k, d in enumerate(digits))
            assert value not in seen
            seen[value] = list(digits)
    assert min(seen) == 3
    for value, digits in seen.items():
        assert encode_digits(value) == digits


@given(st.integers(min_value=3, max_value=131070))
def test_round_trip(value):
    assert pharmacode_decode(pharmacode_encode(value)) == value
