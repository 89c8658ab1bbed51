"""Symbol-domain representations shared by the marking codecs.

BarPattern serializes to a compact text form ("B1 G2 B3 ...") and BitMatrix
to PBM-style ASCII; both are the golden-file formats used by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class PatternError(ValueError):
    """Base class for malformed symbol-domain data."""


@dataclass(frozen=True)
class BarPattern:
    """Alternating bar/gap run widths in integer modules, bar first and last.

    ``elements`` is a tuple of ("bar" | "gap", width) pairs.
    """

    elements: tuple[tuple[str, int], ...]
    module_width_mm: float = 0.5

    def __post_init__(self):
        if not self.elements:
            raise PatternError("pattern is empty")
        if self.elements[0][0] != "bar" or self.elements[-1][0] != "bar":
            raise PatternError("pattern must start and end with a bar")
        for i, (kind, width) in enumerate(self.elements):
            if kind != ("bar" if i % 2 == 0 else "gap"):
                raise PatternError("bars and gaps must alternate, bar first")
            if width < 1:
                raise PatternError(f"element width must be >= 1 module, got {width}")
        if self.module_width_mm <= 0:
            raise PatternError("module width must be positive")

    @property
    def bar_widths(self) -> tuple[int, ...]:
        return tuple(w for kind, w in self.elements if kind == "bar")

    @property
    def total_modules(self) -> int:
        return sum(w for _, w in self.elements)

    def to_text(self) -> str:
        return " ".join(f"{'B' if kind == 'bar' else 'G'}{w}" for kind, w in self.elements)

    @classmethod
    def from_text(cls, text: str, module_width_mm: float = 0.5) -> "BarPattern":
        elements = []
        for token in text.split():
            if len(token) < 2 or token[0] not in "BG" or not token[1:].isdigit():
                raise PatternError(f"bad pattern token {token!r}")
            elements.append(("bar" if token[0] == "B" else "gap", int(token[1:])))
        return cls(tuple(elements), module_width_mm)

    @classmethod
    def from_widths(cls, widths: list[int] | tuple[int, ...], module_width_mm: float = 0.5) -> "BarPattern":
        """Build from a flat bar,gap,bar,... width sequence."""
        elements = tuple(
            ("bar" if i % 2 == 0 else "gap", int(w)) for i, w in enumerate(widths)
        )
        return cls(elements, module_width_mm)


_SQUARE_SIZES = (10, 12, 14, 16)


@dataclass
class BitMatrix:
    """Row-major boolean grid for the square 2D symbol sizes 10-16."""

    size: int
    bits: list[list[bool]] = field(default_factory=list)

    def __post_init__(self):
        if self.size not in _SQUARE_SIZES:
            raise PatternError(f"unsupported symbol size {self.size}, need one of {_SQUARE_SIZES}")
        if not self.bits:
            self.bits = [[False] * self.size for _ in range(self.size)]
        if len(self.bits) != self.size or any(len(row) != self.size for row in self.bits):
            raise PatternError("bit grid does not match declared size")

    def __getitem__(self, rc: tuple[int, int]) -> bool:
        r, c = rc
        return self.bits[r][c]

    def __setitem__(self, rc: tuple[int, int], value: bool) -> None:
        r, c = rc
        self.bits[r][c] = bool(value)

    def copy(self) -> "BitMatrix":
        return BitMatrix(self.size, [row[:] for row in self.bits])

    def __eq__(self, other) -> bool:
        return isinstance(other, BitMatrix) and self.size == other.size and self.bits == other.bits

    def to_pbm(self) -> str:
        rows = ["P1", f"{self.size} {self.size}"]
        rows += [" ".join("1" if v else "0" for v in row) for row in self.bits]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_pbm(cls, text: str) -> "BitMatrix":
        lines = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("#")]
        if not lines or lines[0].strip() != "P1":
            raise PatternError("not a P1 PBM document")
        dims = lines[1].split()
        cols, rows = int(dims[0]), int(dims[1])
        if cols != rows:
            raise PatternError("matrix must be square")
        cells = " ".join(lines[2:]).split()
        if len(cells) != rows * cols:
            raise PatternError("PBM cell count does not match dimensions")
        bits = [
            [cells[r * cols + c] == "1" for c in range(cols)]
            for r in range(rows)
        ]
        return cls(rows, bits)
