"""Systematic Reed-Solomon over GF(256) with primitive polynomial 0x12D.

Field and generator conventions follow the 2D-symbol error-correction
scheme: alpha = 2, generator polynomial rooted at consecutive powers
alpha^1 .. alpha^p. Decoding runs Berlekamp-Massey, Chien search and
Forney, corrects up to floor(p/2) byte errors at unknown positions, and
re-checks the syndromes afterwards so an uncorrectable block is always
signalled rather than silently mis-decoded.
"""

from __future__ import annotations

from dataclasses import dataclass

PRIMITIVE_POLY = 0x12D

_EXP = [0] * 512
_LOG = [0] * 256

_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= PRIMITIVE_POLY
for _i in range(255, 512):
    _EXP[_i] = _EXP[_i - 255]


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return _EXP[(_LOG[a] - _LOG[b]) % 255]


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0 if n else 1
    return _EXP[(_LOG[a] * n) % 255]


def gf_inv(a: int) -> int:
    return gf_div(1, a)


def _poly_mul(p: list[int], q: list[int]) -> list[int]:
    """Coefficient convolution; works for either degree ordering used consistently."""
    out = [0] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j, qj in enumerate(q):
            out[i + j] ^= gf_mul(pi, qj)
    return out


def _poly_eval(p: list[int], x: int) -> int:
    # Horner, coefficients highest degree first.
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y


def generator_poly(ecc_len: int) -> list[int]:
    """(x - a^1)(x - a^2)...(x - a^ecc_len), highest degree first."""
    g = [1]
    for i in range(1, ecc_len + 1):
        g = _poly_mul(g, [1, _EXP[i]])
    return g


class ReedSolomonError(ValueError):
    pass


class EmptyData(ReedSolomonError):
    pass


class TooManyErrors(ReedSolomonError):
    """Block is not correctable; no silently wrong output."""


@dataclass(frozen=True)
class CodewordBlock:
    """Systematic codeword: payload bytes followed by parity bytes."""

    data: bytes
    ecc: bytes

    @property
    def codeword(self) -> bytes:
        return self.data + self.ecc


def rs_encode(data: bytes, ecc_len: int) -> CodewordBlock:
    if len(data) == 0:
        raise EmptyData("cannot encode an empty block")
    if ecc_len < 1:
        raise ReedSolomonError("need at least one parity byte")
    gen = generator_poly(ecc_len)
    # Remainder of data(x) * x^ecc_len divided by g(x).
    rem = list(data) + [0] * ecc_len
    for i in range(len(data)):
        coef = rem[i]
        if coef == 0:
            continue
        for j in range(1, len(gen)):
            rem[i + j] ^= gf_mul(gen[j], coef)
    return CodewordBlock(bytes(data), bytes(rem[-ecc_len:]))


def _syndromes(codeword: bytes, ecc_len: int) -> list[int]:
    # Byte 0 is the highest-degree coefficient (transmission order).
    return [_poly_eval(list(codeword), _EXP[i]) for i in range(1, ecc_len + 1)]


def _zip_pad(p: list[int], q: list[int]):
    n = max(len(p), len(q))
    for i in range(n):
        yield (p[i] if i < len(p) else 0), (q[i] if i < len(q) else 0)


def _berlekamp_massey(synd: list[int]) -> list[int]:
    """Error locator polynomial, lowest degree first."""
    current = [1]
    previous = [1]
    length = 0
    shift = 1
    last_delta = 1
    for n in range(len(synd)):
        delta = synd[n]
        for i in range(1, length + 1):
            if i < len(current):
                delta ^= gf_mul(current[i], synd[n - i])
        if delta == 0:
            shift += 1
            continue
        scale = gf_div(delta, last_delta)
        shifted = [0] * shift + previous
        updated = [c ^ gf_mul(scale, s) for c, s in _zip_pad(current, shifted)]
        if 2 * length <= n:
            previous = current
            last_delta = delta
            length = n + 1 - length
            shift = 1
        else:
            shift += 1
        current = updated
    while len(current) > 1 and current[-1] == 0:
        current.pop()
    return current


def rs_decode(block: CodewordBlock | bytes, ecc_len: int | None = None) -> tuple[bytes, int]:
    """Recover the payload, correcting up to floor(ecc_len/2) byte errors.

    Returns (data, number of corrections). Raises TooManyErrors when the
    block cannot be certified as corrected.
    """
    if isinstance(block, CodewordBlock):
        codeword = bytearray(block.codeword)
        ecc_len = len(block.ecc)
    else:
        if ecc_len is None:
            raise ReedSolomonError("ecc_len required for raw codewords")
        codeword = bytearray(block)
    n = len(codeword)
    if n <= ecc_len:
        raise ReedSolomonError("codeword shorter than its parity")

    synd = _syndromes(bytes(codeword), ecc_len)
    if not any(synd):
        return bytes(codeword[: n - ecc_len]), 0

    locator = _berlekamp_massey(synd)
    n_errors = len(locator) - 1
    if n_errors == 0 or n_errors > ecc_len // 2:
        raise TooManyErrors(f"locator degree {n_errors} exceeds correction capacity")

    # Chien search: byte i is the coefficient of x^(n-1-i), so an error there
    # corresponds to locator root alpha^-(n-1-i).
    positions = []
    for i in range(n):
        power = n - 1 - i
        x_inv = _EXP[(255 - power % 255) % 255]
        if _poly_eval(list(reversed(locator)), x_inv) == 0:
            positions.append(i)
    if len(positions) != n_errors:
        raise TooManyErrors("locator roots do not match its degree")

    # Forney with first consecutive root alpha^1:
    # magnitude = Omega(Xi^-1) / Lambda'(Xi^-1), Omega = S*Lambda mod x^ecc_len.
    omega = _poly_mul(synd, locator)[:ecc_len]  # lowest degree first
    for i in positions:
        power = n - 1 - i
        x_inv = gf_inv(_EXP[power % 255])
        num = 0
        for j, c in enumerate(omega):
            num ^= gf_mul(c, gf_pow(x_inv, j))
        den = 0
        for j in range(1, len(locator), 2):
            den ^= gf_mul(locator[j], gf_pow(x_inv, j - 1))
        if den == 0:
            raise TooManyErrors("Forney denominator vanished")
        codeword[i] ^= gf_div(num, den)

    if any(_syndromes(bytes(codeword), ecc_len)):
        raise TooManyErrors("syndromes nonzero after correction")
    return bytes(codeword[: n - ecc_len]), len(positions)
