"""Simulated non-destructive readout of implanted markings.

A marking is rendered as an ideal rectangular intensity profile and then
degraded the way a through-material scan degrades it: Gaussian blur for
finite probe resolution, depth-dependent contrast attenuation, additive
sensor noise, and a slow sinusoidal baseline drift. Recovery runs the
reverse pipeline: grayscale morphology to knock out sub-module artifacts,
Otsu thresholding, run-length classification back to a bar pattern, and
the symbology decoder.

All randomness is drawn from a seeded generator, so every trace and every
perturbed matrix is a pure function of (input, seed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy import ndimage

from .symbology import (
    BarPattern,
    BitMatrix,
    code128_decode,
    pharmacode_decode,
)
from .symbology.pharmacode import GAP_MODULES, NARROW_MODULES, WIDE_MODULES

QUIET_ZONE_MODULES = 4
MODULE_TOLERANCE = 0.25  # max distance from a legal width before we refuse to guess

Symbology = Literal["pharmacode", "code128"]


class ReadoutError(ValueError):
    pass


class BadStructuringElement(ReadoutError):
    pass


class ConstantSignal(ReadoutError):
    pass


class NoRunsFound(ReadoutError):
    pass


class AmbiguousModuleWidth(ReadoutError):
    """A run sits too far from every legal width; failing beats misreading."""


class DecodeFailed(ReadoutError):
    """End-to-end pipeline failure carrying the stage that broke."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"decode failed at stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ReadoutParams:
    samples_per_module: int = 10
    blur_sigma_modules: float = 0.0
    noise_sigma_fraction: float = 0.0
    attenuation: float = 0.0
    baseline_drift_amplitude: float = 0.0
    rng_seed: int = 0

    def validate(self) -> None:
        if self.samples_per_module < 4:
            raise ReadoutError("need at least 4 samples per module")
        if self.blur_sigma_modules < 0 or self.noise_sigma_fraction < 0:
            raise ReadoutError("blur and noise must be non-negative")
        if not 0 <= self.attenuation < 1:
            raise ReadoutError("attenuation must be in [0, 1)")
        if self.baseline_drift_amplitude < 0:
            raise ReadoutError("drift amplitude must be non-negative")


@dataclass
class SignalTrace:
    samples: np.ndarray
    sample_pitch_mm: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.samples)
        self.samples = arr if arr.dtype == bool else arr.astype(float)
        if self.samples.size == 0 or not np.all(np.isfinite(self.samples.astype(float))):
            raise ReadoutError("trace must be non-empty with finite samples")
        if self.sample_pitch_mm <= 0:
            raise ReadoutError("sample pitch must be positive")

    def to_csv(self) -> str:
        lines = ["index,intensity"]
        lines += [f"{i},{v:.9g}" for i, v in enumerate(np.asarray(self.samples, dtype=float))]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, sample_pitch_mm: float = 0.05, meta: dict | None = None) -> "SignalTrace":
        values = []
        for line in text.strip().splitlines():
            if line.startswith("index"):
                continue
            _idx, value = line.split(",")
            values.append(float(value))
        return cls(np.array(values), sample_pitch_mm, meta or {})


def synthesize_trace(pattern: BarPattern, params: ReadoutParams) -> SignalTrace:
    """Degraded scan of a bar pattern; reproducible per seed.

    Noise sigma is a fraction of the nominal (unattenuated) bar/background
    contrast, so attenuation genuinely costs signal-to-noise ratio.
    """
    params.validate()
    spm = params.samples_per_module
    level = 1.0 - params.attenuation

    ideal = np.zeros((pattern.total_modules + 2 * QUIET_ZONE_MODULES) * spm)
    position = QUIET_ZONE_MODULES * spm
    for kind, width in pattern.elements:
        if kind == "bar":
            ideal[position : position + width * spm] = level
        position += width * spm

    profile = ideal
    sigma = params.blur_sigma_modules * spm
    if sigma > 0:
        profile = ndimage.gaussian_filter1d(ideal, sigma, mode="nearest")

    rng = np.random.default_rng(params.rng_seed)
    n = len(profile)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    drift = params.baseline_drift_amplitude * np.sin(2.0 * np.pi * np.arange(n) / n + phase)
    noise = params.noise_sigma_fraction * rng.standard_normal(n)

    return SignalTrace(
        samples=profile + drift + noise,
        sample_pitch_mm=pattern.module_width_mm / spm,
        meta=asdict(params),
    )


def morph_filter(trace: SignalTrace, op: str, se_len: int) -> SignalTrace:
    """Flat grayscale morphology with edge replication at the borders."""
    x = np.asarray(trace.samples, dtype=float)
    if se_len < 1 or se_len % 2 == 0:
        raise BadStructuringElement(f"structuring element must be odd and >= 1, got {se_len}")
    if se_len > len(x):
        raise BadStructuringElement("structuring element longer than the trace")

    def erode(v):
        return ndimage.grey_erosion(v, size=se_len, mode="nearest")

    def dilate(v):
        return ndimage.grey_dilation(v, size=se_len, mode="nearest")

    if op == "erode":
        y = erode(x)
    elif op == "dilate":
        y = dilate(x)
    elif op == "open":
        y = dilate(erode(x))
    elif op == "close":
        y = erode(dilate(x))
    else:
        raise ReadoutError(f"unknown morphological operation {op!r}")
    return SignalTrace(y, trace.sample_pitch_mm, dict(trace.meta))


def otsu_threshold(samples: np.ndarray) -> float:
    """Threshold maximizing inter-class variance over a fixed 256-bin histogram."""
    lo, hi = float(samples.min()), float(samples.max())
    if lo == hi:
        raise ConstantSignal("cannot threshold a constant signal")
    hist, edges = np.histogram(samples, bins=256, range=(lo, hi))
    hist = hist.astype(float)
    centers = (edges[:-1] + edges[1:]) / 2.0

    weight_lo = np.cumsum(hist)
    weight_hi = np.cumsum(hist[::-1])[::-1]
    mass_lo = np.cumsum(hist * centers)
    mass_hi = np.cumsum((hist * centers)[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_lo = mass_lo / weight_lo
        mean_hi = mass_hi / weight_hi
        between = weight_lo[:-1] * weight_hi[1:] * (mean_lo[:-1] - mean_hi[1:]) ** 2
    between = np.nan_to_num(between)
    return float(centers[int(np.argmax(between))])


def binarize(trace: SignalTrace) -> SignalTrace:
    threshold = otsu_threshold(np.asarray(trace.samples, dtype=float))
    binary = np.asarray(trace.samples, dtype=float) > threshold
    meta = dict(trace.meta)
    meta["otsu_threshold"] = threshold
    return SignalTrace(binary, trace.sample_pitch_mm, meta)


def _run_lengths(binary: np.ndarray) -> list[tuple[bool, int]]:
    runs: list[tuple[bool, int]] = []
    current = bool(binary[0])
    length = 0
    for value in binary:
        if bool(value) == current:
            length += 1
        else:
            runs.append((current, length))
            current = bool(value)
            length = 1
    runs.append((current, length))
    return runs


def _growth_compensate(
    runs: list[tuple[bool, float]],
    module_samples: float,
    bar_widths: tuple[int, ...],
    gap_widths: tuple[int, ...],
) -> list[tuple[bool, float]]:
    """Undo symmetric bar growth (threshold bias widens bars, narrows gaps).

    A threshold below the half-contrast point moves every bar edge outward by
    the same offset, so bar residuals run +2*delta and gap residuals -2*delta
    against the module grid. Fitting delta from the mean residual difference
    and correcting the runs restores the grid without touching real widths.
    """
    bar_residuals: list[float] = []
    gap_residuals: list[float] = []
    for is_bar, length in runs:
        allowed = bar_widths if is_bar else gap_widths
        nearest = min(allowed, key=lambda a: abs(length / module_samples - a))
        residual = length - nearest * module_samples
        (bar_residuals if is_bar else gap_residuals).append(residual)
    if not bar_residuals or not gap_residuals:
        return runs
    delta = (
        sum(bar_residuals) / len(bar_residuals)
        - sum(gap_residuals) / len(gap_residuals)
    ) / 4.0
    # Genuine threshold bias stays well under a quarter module; a larger fit
    # means the width hypothesis is wrong, and correcting would mask that.
    if abs(delta) > MODULE_TOLERANCE * module_samples:
        return runs
    return [
        (is_bar, length - 2.0 * delta if is_bar else length + 2.0 * delta)
        for is_bar, length in runs
    ]


def _quantize_edges(
    runs: list[tuple[bool, float]],
    module_samples: float,
    bar_widths: tuple[int, ...],
    gap_widths: tuple[int, ...],
) -> list[tuple[str, int]]:
    """Snap cumulative edge positions to the module grid.

    Quantizing edges instead of raw run lengths keeps one jittery edge from
    distorting two runs; the 0.25-module tolerance then applies per edge, and
    the resulting integer widths must still be legal for the symbology.
    """
    positions = [0]
    for _, length in runs:
        positions.append(positions[-1] + length)
    indices = []
    for pos in positions:
        in_modules = pos / module_samples
        index = round(in_modules)
        if abs(in_modules - index) > MODULE_TOLERANCE:
            raise AmbiguousModuleWidth(
                f"edge at {in_modules:.2f} modules is {abs(in_modules - index):.2f} "
                f"from the nearest module boundary (tolerance {MODULE_TOLERANCE})"
            )
        indices.append(index)
    elements = []
    for k, (is_bar, length) in enumerate(runs):
        width = indices[k + 1] - indices[k]
        allowed = bar_widths if is_bar else gap_widths
        if width not in allowed:
            raise AmbiguousModuleWidth(
                f"{'bar' if is_bar else 'gap'} of {width} modules is not a legal "
                f"width {sorted(allowed)}"
            )
        # the run itself must also sit close to its assigned width, or a
        # stretched module fit could absorb a genuinely ambiguous run
        residual = abs(length / module_samples - width)
        if residual > MODULE_TOLERANCE:
            raise AmbiguousModuleWidth(
                f"run of {length / module_samples:.2f} modules assigned width "
                f"{width} is {residual:.2f} off (tolerance {MODULE_TOLERANCE})"
            )
        elements.append(("bar" if is_bar else "gap", width))
    return elements


def _extract_pharmacode(runs: list[tuple[bool, float]]) -> tuple[list[tuple[str, int]], float]:
    """Classify bars via edge-to-like-edge periods.

    Every gap is 2 modules, so the period from one bar's leading edge to the
    next (bar + gap) is (width + 2) modules, taking values in {3, 5} only.
    Unlike raw run lengths, these periods are immune to the symmetric bar
    growth a biased threshold produces, and a run straddling the width
    boundary corrupts both of its periods and is refused.
    """
    bars = [length for is_bar, length in runs if is_bar]
    gaps = [length for is_bar, length in runs if not is_bar]
    n = len(bars)
    if n < 2:
        raise NoRunsFound(f"need at least 2 bar runs, got {n}")
    leading = [bars[i] + gaps[i] for i in range(n - 1)]
    trailing = [gaps[i] + bars[i + 1] for i in range(n - 1)]
    period_widths = (NARROW_MODULES + GAP_MODULES, WIDE_MODULES + GAP_MODULES)

    def classify(periods: list[float], m: float, tolerance: float | None) -> list[int]:
        out = []
        for p in periods:
            w = p / m
            nearest = min(period_widths, key=lambda a: abs(w - a))
            if tolerance is not None and abs(w - nearest) > tolerance:
                raise AmbiguousModuleWidth(
                    f"edge-to-edge period of {w:.2f} modules is {abs(w - nearest):.2f} "
                    f"from the nearest legal period {period_widths}"
                )
            out.append(nearest)
        return out

    # The shortest period is 3 modules when any narrow bar exists, else 5.
    shortest = min(leading + trailing)
    last_error: Exception | None = None
    for hypothesis in period_widths:
        seed = shortest / hypothesis
        rough = classify(leading, seed, None) + classify(trailing, seed, None)
        module_samples = (sum(leading) + sum(trailing)) / sum(rough)
        try:
            lead_w = classify(leading, module_samples, MODULE_TOLERANCE)
            trail_w = classify(trailing, module_samples, MODULE_TOLERANCE)
        except AmbiguousModuleWidth as exc:
            last_error = exc
            continue
        # leading period i fixes bar i, trailing period i fixes bar i+1;
        # interior bars are fixed twice and must agree
        bar_widths: list[int | None] = [None] * n
        consistent = True
        for i in range(n - 1):
            bar_widths[i] = lead_w[i] - GAP_MODULES
        for i in range(n - 1):
            width = trail_w[i] - GAP_MODULES
            if bar_widths[i + 1] is not None and bar_widths[i + 1] != width:
                consistent = False
                break
            bar_widths[i + 1] = width
        if not consistent:
            last_error = AmbiguousModuleWidth(
                "leading- and trailing-edge periods disagree on a bar width"
            )
            continue
        try:
            _check_residuals(bars, [float(w) for w in bar_widths], module_samples)  # type: ignore[misc]
            _check_residuals(gaps, [float(GAP_MODULES)] * len(gaps), module_samples)
        except AmbiguousModuleWidth as exc:
            last_error = exc
            continue
        elements: list[tuple[str, int]] = []
        for k, width in enumerate(bar_widths):
            if k:
                elements.append(("gap", GAP_MODULES))
            elements.append(("bar", int(width)))  # type: ignore[arg-type]
        return elements, module_samples
    raise last_error  # type: ignore[misc]


def _check_residuals(lengths: list[float], assigned: list[float], module_samples: float) -> None:
    """Reject fits whose residuals are too large or inconsistent.

    Symmetric bar growth shifts every residual of one kind by the same
    amount, so the mean residual may run up to half a module; anything an
    individual run deviates beyond that shared offset is a genuine misfit.
    """
    residuals = [
        length / module_samples - width for length, width in zip(lengths, assigned)
    ]
    mean = sum(residuals) / len(residuals)
    if abs(mean) > 2 * MODULE_TOLERANCE:
        raise AmbiguousModuleWidth(
            f"systematic width offset of {mean:.2f} modules exceeds plausible growth"
        )
    for residual in residuals:
        if abs(residual - mean) > MODULE_TOLERANCE:
            raise AmbiguousModuleWidth(
                f"run residual {residual - mean:+.2f} modules beyond the shared "
                f"growth offset (tolerance {MODULE_TOLERANCE})"
            )


def extract_pattern(binary_trace: SignalTrace, expected_symbology: Symbology) -> BarPattern:
    """Run-length classify a binarized trace back into integer bar/gap modules."""
    binary = np.asarray(binary_trace.samples, dtype=bool)
    runs = _run_lengths(binary)
    if len(runs) < 2:
        raise NoRunsFound(f"only {len(runs)} run(s) in trace")
    while runs and not runs[0][0]:
        runs.pop(0)
    while runs and not runs[-1][0]:
        runs.pop()
    if not runs:
        raise NoRunsFound("no bar runs above threshold")
    total_samples = sum(length for _, length in runs)

    float_runs = [(is_bar, float(length)) for is_bar, length in runs]

    if expected_symbology == "pharmacode":
        elements, module_samples = _extract_pharmacode(float_runs)
    elif expected_symbology == "code128":
        n = len(float_runs)
        if n < 19 or (n - 7) % 6 != 0:
            raise AmbiguousModuleWidth(
                f"{n} runs do not form whole symbols; cannot estimate module width"
            )
        symbols = (n - 7) // 6
        # Every symbol is 11 modules and the stop pattern 13, so the symbol
        # count fixes the total module span exactly.
        widths = ((1, 2, 3, 4), (1, 2, 3, 4))
        module_samples = total_samples / (11 * symbols + 13)
        corrected = _growth_compensate(float_runs, module_samples, *widths)
        corrected_total = sum(length for _, length in corrected)
        module_samples = corrected_total / (11 * symbols + 13)
        elements = _quantize_edges(corrected, module_samples, *widths)
    else:
        raise ReadoutError(f"unknown symbology {expected_symbology!r}")

    return BarPattern(tuple(elements), module_width_mm=module_samples * binary_trace.sample_pitch_mm)


def default_se_len(samples_per_module: int) -> int:
    se = max(1, samples_per_module // 2)
    if se % 2 == 0:
        se += 1
    return se


def decode_trace(trace: SignalTrace, hint: Symbology, se_len: int | None = None):
    """Full recovery pipeline: close(open(x)) -> Otsu -> runs -> symbology decode."""
    if se_len is None:
        se_len = default_se_len(int(trace.meta.get("samples_per_module", 10)))
    stage = "morphology"
    try:
        smooth = morph_filter(morph_filter(trace, "open", se_len), "close", se_len)
        stage = "binarize"
        binary = binarize(smooth)
        stage = "extract"
        pattern = extract_pattern(binary, hint)
        stage = "symbol-decode"
        if hint == "pharmacode":
            return pharmacode_decode(pattern)
        return code128_decode(pattern)
    except DecodeFailed:
        raise
    except Exception as exc:
        raise DecodeFailed(stage, exc) from exc


def perturb_matrix(matrix: BitMatrix, flip_probability: float, rng_seed: int) -> BitMatrix:
    """Flip non-finder modules independently; the finder frame stays intact."""
    if not 0 <= flip_probability <= 1:
        raise ReadoutError("flip probability must be in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    size = matrix.size
    flips = rng.random((size - 2, size - 2)) < flip_probability
    out = matrix.copy()
    for r in range(1, size - 1):
        for c in range(1, size - 1):
            if flips[r - 1, c - 1]:
                out[r, c] = not out[r, c]
    return out
