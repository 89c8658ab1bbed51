"""Square 2D matrix symbol codec (ECC200 family, sizes 10-16, ASCII encodation).

Payload bytes become data codewords (digit pairs compress to value+130,
plain bytes to value+1, bytes >= 128 via the upper-shift prefix 235),
padded with the 253-state pad sequence, protected by Reed-Solomon parity,
and laid out in the standard diagonal "utah" placement inside the finder
frame: solid left column and bottom row, alternating top row and right
column.
"""

from __future__ import annotations

from .patterns import BitMatrix
from .reedsolomon import rs_decode, rs_encode

# size -> (data codewords, ecc codewords)
SYMBOL_CONFIGS = {10: (3, 5), 12: (5, 7), 14: (8, 10), 16: (12, 12)}

PAD = 129
UPPER_SHIFT = 235
DIGIT_BASE = 130


class DataMatrixError(ValueError):
    pass


class PayloadTooLarge(DataMatrixError):
    pass


class BadFinderPattern(DataMatrixError):
    pass


class UnsupportedCodeword(DataMatrixError):
    """Data codeword outside the ASCII-encodation value set."""


def ascii_encodation(payload: bytes) -> list[int]:
    out: list[int] = []
    i = 0
    while i < len(payload):
        pair = payload[i : i + 2]
        if len(pair) == 2 and pair.isdigit():
            out.append(DIGIT_BASE + int(pair))
            i += 2
        elif payload[i] >= 128:
            out.extend([UPPER_SHIFT, payload[i] - 128 + 1])
            i += 1
        else:
            out.append(payload[i] + 1)
            i += 1
    return out


def _pad_codeword(position: int) -> int:
    # 253-state randomising algorithm; position is 1-based in the data field.
    value = PAD + ((149 * position) % 253) + 1
    return value - 254 if value > 254 else value


def pad_to_capacity(codewords: list[int], capacity: int) -> list[int]:
    if len(codewords) > capacity:
        raise PayloadTooLarge(f"{len(codewords)} codewords exceed capacity {capacity}")
    padded = list(codewords)
    if len(padded) < capacity:
        padded.append(PAD)
    while len(padded) < capacity:
        padded.append(_pad_codeword(len(padded) + 1))
    return padded


def ascii_decodation(codewords: list[int]) -> bytes:
    out = bytearray()
    i = 0
    while i < len(codewords):
        value = codewords[i]
        if value == PAD:
            break  # remainder is padding
        if 1 <= value <= 128:
            out.append(value - 1)
        elif DIGIT_BASE <= value <= 229:
            out.extend(f"{value - DIGIT_BASE:02d}".encode())
        elif value == UPPER_SHIFT:
            i += 1
            if i >= len(codewords) or not 1 <= codewords[i] <= 128:
                raise UnsupportedCodeword("dangling upper-shift prefix")
            out.append(codewords[i] - 1 + 128)
        else:
            raise UnsupportedCodeword(f"codeword {value} is not ASCII encodation")
        i += 1
    return bytes(out)


# --- module placement -------------------------------------------------------

def placement_map(nrow: int, ncol: int) -> dict[tuple[int, int], tuple[int, int] | str]:
    """Standard ECC200 placement over the data region.

    Maps (row, col) -> (codeword index from 0, bit index with 7 = MSB),
    or "dark"/"light" for the fixed pattern filling leftover corners.
    """
    grid: dict[tuple[int, int], tuple[int, int] | str] = {}

    def place_bit(r: int, c: int, idx: int, bit: int) -> None:
        if r < 0:
            r += nrow
            c += 4 - ((nrow + 4) % 8)
        if c < 0:
            c += ncol
            r += 4 - ((ncol + 4) % 8)
        grid[(r, c)] = (idx, bit)

    def place_utah(r: int, c: int, idx: int) -> None:
        place_bit(r - 2, c - 2, idx, 7)
        place_bit(r - 2, c - 1, idx, 6)
        place_bit(r - 1, c - 2, idx, 5)
        place_bit(r - 1, c - 1, idx, 4)
        place_bit(r - 1, c, idx, 3)
        place_bit(r, c - 2, idx, 2)
        place_bit(r, c - 1, idx, 1)
        place_bit(r, c, idx, 0)

    def corner_a(idx: int) -> None:
        for (r, c), bit in (
            ((nrow - 1, 0), 7), ((nrow - 1, 1), 6), ((nrow - 1, 2), 5),
            ((0, ncol - 2), 4), ((0, ncol - 1), 3), ((1, ncol - 1), 2),
            ((2, ncol - 1), 1), ((3, ncol - 1), 0),
        ):
            grid[(r, c)] = (idx, bit)

    def corner_b(idx: int) -> None:
        for (r, c), bit in (
            ((nrow - 3, 0), 7), ((nrow - 2, 0), 6), ((nrow - 1, 0), 5),
            ((0, ncol - 4), 4), ((0, ncol - 3), 3), ((0, ncol - 2), 2),
            ((0, ncol - 1), 1), ((1, ncol - 1), 0),
        ):
            grid[(r, c)] = (idx, bit)

    def corner_c(idx: int) -> None:
        for (r, c), bit in (
            ((nrow - 3, 0), 7), ((nrow - 2, 0), 6), ((nrow - 1, 0), 5),
            ((0, ncol - 2), 4), ((0, ncol - 1), 3), ((1, ncol - 1), 2),
            ((2, ncol - 1), 1), ((3, ncol - 1), 0),
        ):
            grid[(r, c)] = (idx, bit)

    def corner_d(idx: int) -> None:
        for (r, c), bit in (
            ((nrow - 1, 0), 7), ((nrow - 1, ncol - 1), 6), ((0, ncol - 3), 5),
            ((0, ncol - 2), 4), ((0, ncol - 1), 3), ((1, ncol - 3), 2),
            ((1, ncol - 2), 1), ((1, ncol - 1), 0),
        ):
            grid[(r, c)] = (idx, bit)

    idx = 0
    r, c = 4, 0
    while True:
        if r == nrow and c == 0:
            corner_a(idx)
            idx += 1
        if r == nrow - 2 and c == 0 and ncol % 4:
            corner_b(idx)
            idx += 1
        if r == nrow - 2 and c == 0 and ncol % 8 == 4:
            corner_c(idx)
            idx += 1
        if r == nrow + 4 and c == 2 and ncol % 8 == 0:
            corner_d(idx)
            idx += 1
        while True:  # upward diagonal
            if r < nrow and c >= 0 and (r, c) not in grid:
                place_utah(r, c, idx)
                idx += 1
            r -= 2
            c += 2
            if not (r >= 0 and c < ncol):
                break
        r += 1
        c += 3
        while True:  # downward diagonal
            if r >= 0 and c < ncol and (r, c) not in grid:
                place_utah(r, c, idx)
                idx += 1
            r += 2
            c -= 2
            if not (r < nrow and c >= 0):
                break
        r += 3
        c += 1
        if not (r < nrow or c < ncol):
            break

    # Leftover lower-right corner gets the fixed 2x2 checker.
    if (nrow - 1, ncol - 1) not in grid:
        grid[(nrow - 1, ncol - 1)] = "dark"
        grid[(nrow - 2, ncol - 2)] = "dark"
        grid[(nrow - 2, ncol - 1)] = "light"
        grid[(nrow - 1, ncol - 2)] = "light"
    return grid


def finder_modules(size: int) -> dict[tuple[int, int], bool]:
    """Expected finder values for every edge module of the symbol.

    For the even sizes supported here the four edges agree at the corners:
    dark except the top-right corner.
    """
    edge: dict[tuple[int, int], bool] = {}
    for r in range(size):
        edge[(r, 0)] = True  # solid left column
        edge[(r, size - 1)] = r % 2 == 1  # alternating right column
    for c in range(size):
        edge[(0, c)] = c % 2 == 0  # alternating top row
        edge[(size - 1, c)] = True  # solid bottom row
    return edge


def select_size(n_codewords: int) -> int:
    for size in sorted(SYMBOL_CONFIGS):
        if SYMBOL_CONFIGS[size][0] >= n_codewords:
            return size
    raise PayloadTooLarge(
        f"{n_codewords} data codewords exceed the largest supported symbol"
    )


def datamatrix_encode(payload: bytes | str, size: int | None = None) -> BitMatrix:
    if isinstance(payload, str):
        payload = payload.encode("latin-1")
    codewords = ascii_encodation(payload)
    if size is None:
        size = select_size(max(len(codewords), 1))
    if size not in SYMBOL_CONFIGS:
        raise DataMatrixError(f"unsupported symbol size {size}")
    n_data, n_ecc = SYMBOL_CONFIGS[size]
    data = pad_to_capacity(codewords, n_data)
    block = rs_encode(bytes(data), n_ecc)
    full = list(block.codeword)

    matrix = BitMatrix(size)
    for (r, c), value in finder_modules(size).items():
        matrix[r, c] = value
    region = size - 2
    for (r, c), cell in placement_map(region, region).items():
        if cell == "dark":
            matrix[1 + r, 1 + c] = True
        elif cell == "light":
            matrix[1 + r, 1 + c] = False
        else:
            idx, bit = cell
            matrix[1 + r, 1 + c] = bool((full[idx] >> bit) & 1)
    return matrix


def datamatrix_decode(matrix: BitMatrix) -> bytes:
    size = matrix.size
    for (r, c), expected in finder_modules(size).items():
        if matrix[r, c] != expected:
            raise BadFinderPattern(f"finder module ({r},{c}) should be {'dark' if expected else 'light'}")
    n_data, n_ecc = SYMBOL_CONFIGS[size]
    region = size - 2
    codewords = [0] * (n_data + n_ecc)
    for (r, c), cell in placement_map(region, region).items():
        if isinstance(cell, str):
            continue
        idx, bit = cell
        if matrix[1 + r, 1 + c]:
            codewords[idx] |= 1 << bit
    data, _corrected = rs_decode(bytes(codewords), n_ecc)
    return ascii_decodation(list(data))


def data_codeword_positions(size: int) -> dict[int, list[tuple[int, int]]]:
    """Symbol coordinates of each codeword's modules (for targeted corruption)."""
    region = size - 2
    by_codeword: dict[int, list[tuple[int, int]]] = {}
    for (r, c), cell in placement_map(region, region).items():
        if isinstance(cell, str):
            continue
        idx, _bit = cell
        by_codeword.setdefault(idx, []).append((1 + r, 1 + c))
    return by_codeword
