"""Code 128 codec, code set B only.

Device-identifier payloads are printable ASCII, so code set B (symbol
values 0-94 mapping to ASCII 32-126, plus DEL at 95) is the smallest
complete, checksum-bearing subset. Each symbol renders to three bars and
three gaps with widths 1-4 summing to 11 modules; the stop pattern has a
seventh element (13 modules). The trailing check symbol is the mod-103
position-weighted sum.
"""

from __future__ import annotations

from .patterns import BarPattern

START_B = 104
STOP = 106

# Standard symbol width table (ISO/IEC 15417): entry i is the bar/gap module
# widths of symbol value i. Index 106 is the 13-module stop pattern.
SYMBOL_WIDTHS = (
    "212222", "222122", "222221", "121223", "121322", "131222", "122213", "122312",
    "132212", "221213", "221312", "231212", "112232", "122132", "122231", "113222",
    "123122", "123221", "223211", "221132", "221231", "213212", "223112", "312131",
    "311222", "321122", "321221", "312212", "322112", "322211", "212123", "212321",
    "232121", "111323", "131123", "131321", "112313", "132113", "132311", "211313",
    "231113", "231311", "112133", "112331", "132131", "113123", "113321", "133121",
    "313121", "211331", "231131", "213113", "213311", "213131", "311123", "311321",
    "331121", "312113", "312311", "332111", "314111", "221411", "431111", "111224",
    "111422", "121124", "121421", "141122", "141221", "112214", "112412", "122114",
    "122411", "142112", "142211", "241211", "221114", "413111", "241112", "134111",
    "111242", "121142", "121241", "114212", "124112", "124211", "411212", "421112",
    "421211", "212141", "214121", "412121", "111143", "111341", "131141", "114113",
    "114311", "411113", "411311", "113141", "114131", "311141", "411131", "211412",
    "211214", "211232", "2331112",
)

_VALUE_BY_WIDTHS = {w: i for i, w in enumerate(SYMBOL_WIDTHS[:106])}


class Code128Error(ValueError):
    pass


class UnsupportedCharacter(Code128Error):
    pass


class BadStartSymbol(Code128Error):
    pass


class BadStopPattern(Code128Error):
    pass


class ChecksumMismatch(Code128Error):
    pass


class UnknownSymbolPattern(Code128Error):
    pass


def symbol_values(text: str) -> list[int]:
    """Full symbol sequence for a payload: StartB, data, check symbol, stop."""
    values = [START_B]
    for ch in text:
        code = ord(ch)
        if not 32 <= code <= 127:
            raise UnsupportedCharacter(f"code set B cannot encode {ch!r}")
        values.append(code - 32)
    checksum = (values[0] + sum(i * v for i, v in enumerate(values[1:], start=1))) % 103
    values.append(checksum)
    values.append(STOP)
    return values


def code128_encode(text: str, module_width_mm: float = 0.5) -> BarPattern:
    widths: list[int] = []
    for value in symbol_values(text):
        widths.extend(int(d) for d in SYMBOL_WIDTHS[value])
    return BarPattern.from_widths(widths, module_width_mm)


def code128_decode(pattern: BarPattern) -> str:
    flat = [w for _, w in pattern.elements]
    # start + >= 1 symbol (the check symbol) + 7-element stop
    if len(flat) < 6 * 2 + 7 or (len(flat) - 7) % 6 != 0:
        raise BadStopPattern(f"element count {len(flat)} is not a whole symbol sequence")
    stop = "".join(str(w) for w in flat[-7:])
    if stop != SYMBOL_WIDTHS[STOP]:
        raise BadStopPattern(f"stop pattern {stop!r}")

    values = []
    for i in range(0, len(flat) - 7, 6):
        key = "".join(str(w) for w in flat[i : i + 6])
        if key not in _VALUE_BY_WIDTHS:
            raise UnknownSymbolPattern(f"no symbol renders as {key!r}")
        values.append(_VALUE_BY_WIDTHS[key])

    if values[0] != START_B:
        raise BadStartSymbol(f"expected start B ({START_B}), got {values[0]}")
    # Start codes are only legal as the first symbol; allowing them mid-stream
    # would let value shifts of +-103 slip past the mod-103 checksum.
    for v in values[1:]:
        if v > 102:
            raise UnknownSymbolPattern(f"symbol value {v} is not data in code set B")
    payload, check = values[1:-1], values[-1]
    expected = (values[0] + sum(i * v for i, v in enumerate(payload, start=1))) % 103
    if check != expected:
        raise ChecksumMismatch(f"check symbol {check}, computed {expected}")
    return "".join(chr(v + 32) for v in payload)
