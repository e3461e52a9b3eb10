"""Multilevel DWT, detail-band perturbation, and dataset expansion.

The transform is the Mallat cascade: correlate with the analysis pair,
downsample by two, recurse on the approximation band.  Detail level 1 is
the highest-frequency band.  Synthesis upsamples, convolves with the same
filter pair, and crops using the per-level length metadata, which makes
the round-trip exact to float precision for both extension modes.

Symmetric extension is the default (no edge artifacts on non-periodic
traffic).  Periodic extension gives a square orthogonal transform and is
what the energy-conservation test uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import TimeSeries
from .errors import DataError
from .numeric import Rng

# 8-tap Daubechies lowpass (4 vanishing moments), standard published values.
_DB4_LOWPASS = [
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
]

MODES = ("symmetric", "periodic")


@dataclass
class WaveletFilter:
    """Orthogonal filter bank: lowpass h plus quadrature-mirror highpass.

    Construction verifies sum(h) = sqrt(2), sum(h^2) = 1 and double-shift
    orthogonality to 1e-10, so transcribed coefficients cannot silently
    drift.
    """

    name: str
    lowpass: np.ndarray
    highpass: np.ndarray = field(init=False)

    def __post_init__(self):
        h = np.asarray(self.lowpass, dtype=np.float64)
        if len(h) % 2 != 0:
            raise ValueError(f"filter '{self.name}' must have even length, got {len(h)}")
        tol = 1e-10
        if abs(h.sum() - math.sqrt(2.0)) > tol:
            raise ValueError(f"filter '{self.name}': coefficient sum {h.sum()!r} != sqrt(2)")
        if abs((h ** 2).sum() - 1.0) > tol:
            raise ValueError(f"filter '{self.name}': squared sum {(h ** 2).sum()!r} != 1")
        for m in range(1, len(h) // 2):
            dot = float(np.dot(h[: -2 * m], h[2 * m:]))
            if abs(dot) > tol:
                raise ValueError(f"filter '{self.name}': shift-{2 * m} correlation {dot!r} != 0")
        self.lowpass = h
        L = len(h)
        self.highpass = np.array([(-1.0) ** k * h[L - 1 - k] for k in range(L)])

    def __len__(self) -> int:
        return len(self.lowpass)


HAAR = WaveletFilter("haar", np.array([1.0, 1.0]) / math.sqrt(2.0))
DB4 = WaveletFilter("db4", np.array(_DB4_LOWPASS))

FILTERS = {"haar": HAAR, "db4": DB4}


def get_filter(name: str) -> WaveletFilter:
    try:
        return FILTERS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet filter '{name}' (have: {sorted(FILTERS)})") from None


@dataclass
class DwtCoeffs:
    """Decomposition output: one approximation band plus J detail bands.

    ``details[0]`` is level 1 (highest frequency).  ``lengths[j]`` records
    the signal length that entered decomposition step j, which the inverse
    needs for exact cropping.
    """

    approx: np.ndarray
    details: list[np.ndarray]
    lengths: list[int]
    filter_name: str
    mode: str

    @property
    def levels(self) -> int:
        return len(self.details)


@dataclass
class AugmentConfig:
    """Settings for wavelet-based series perturbation."""

    filter: WaveletFilter = DB4
    levels: int = 3
    factor_range: tuple[float, float] = (0.5, 1.5)
    seed: int = 0
    perturb_levels: tuple[int, ...] | None = None  # None = all levels
    mode: str = "symmetric"
    per_band: bool = False  # one factor per detail band instead of per coefficient

    def __post_init__(self):
        a, b = self.factor_range
        if not (0.0 <= a <= b):
            raise ValueError(f"factor range must satisfy 0 <= a <= b, got [{a}, {b}]")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.mode not in MODES:
            raise ValueError(f"unknown extension mode '{self.mode}' (have: {MODES})")


def max_level(signal_length: int, filt: WaveletFilter) -> int:
    """Deepest decomposition the length supports: floor(log2(N/L)) + 1."""
    if signal_length < len(filt):
        return 0
    return int(math.floor(math.log2(signal_length / len(filt)))) + 1


def _extend(x: np.ndarray, pad: int, mode: str) -> np.ndarray:
    if mode == "symmetric":
        return np.concatenate([x[:pad][::-1], x, x[-pad:][::-1]])
    return np.concatenate([x[-pad:], x, x[:pad]])


def _analyze_level(x: np.ndarray, filt: WaveletFilter, mode: str) -> tuple[np.ndarray, np.ndarray]:
    L = len(filt)
    N = len(x)
    ext = _extend(x, L - 1, mode)
    u_lo = np.correlate(ext, filt.lowpass, mode="valid")  # length N + L - 1
    u_hi = np.correlate(ext, filt.highpass, mode="valid")
    if mode == "periodic":
        return u_lo[L - 1 :: 2][: N // 2], u_hi[L - 1 :: 2][: N // 2]
    s0 = (L - 1) % 2
    return u_lo[s0::2], u_hi[s0::2]


def _synthesize_level(
    approx: np.ndarray, detail: np.ndarray, filt: WaveletFilter, out_len: int, mode: str
) -> np.ndarray:
    L = len(filt)
    if mode == "periodic":
        up_a = np.zeros(out_len)
        up_a[::2] = approx
        up_d = np.zeros(out_len)
        up_d[::2] = detail
        v = np.convolve(up_a, filt.lowpass) + np.convolve(up_d, filt.highpass)
        out = v[:out_len].copy()
        for p in range(out_len, len(v)):  # fold the circular tail back in
            out[p % out_len] += v[p]
        return out
    up_a = np.zeros(2 * len(approx))
    up_a[::2] = approx
    up_d = np.zeros(2 * len(detail))
    up_d[::2] = detail
    v = np.convolve(up_a, filt.lowpass) + np.convolve(up_d, filt.highpass)
    start = 2 * ((L - 1) // 2)  # first sample of the original support
    return v[start : start + out_len]


def dwt(signal: np.ndarray, cfg: AugmentConfig) -> DwtCoeffs:
    """Decompose to ``cfg.levels``; rejects signals too short for the depth."""
    signal = np.asarray(signal, dtype=np.float64)
    feasible = max_level(len(signal), cfg.filter)
    if feasible < 1:
        raise DataError(
            f"signal of length {len(signal)} is shorter than the "
            f"{len(cfg.filter)}-tap '{cfg.filter.name}' filter"
        )
    if cfg.levels > feasible:
        raise DataError(
            f"cannot decompose length {len(signal)} to {cfg.levels} levels "
            f"with '{cfg.filter.name}': maximum feasible level is {feasible}"
        )
    details: list[np.ndarray] = []
    lengths: list[int] = []
    cur = signal
    for level in range(1, cfg.levels + 1):
        if len(cur) < len(cfg.filter):
            raise DataError(
                f"approximation at level {level} too short "
                f"({len(cur)} < {len(cfg.filter)}); maximum feasible level is {level - 1}"
            )
        if cfg.mode == "periodic" and len(cur) % 2 != 0:
            raise DataError(
                f"periodic mode needs an even length at every level; "
                f"level {level} has {len(cur)} samples"
            )
        lengths.append(len(cur))
        cur, d = _analyze_level(cur, cfg.filter, cfg.mode)
        details.append(d)
    return DwtCoeffs(
        approx=cur, details=details, lengths=lengths, filter_name=cfg.filter.name, mode=cfg.mode
    )


def idwt(coeffs: DwtCoeffs, cfg: AugmentConfig) -> np.ndarray:
    """Exact inverse of :func:`dwt` for coefficients from the same config."""
    if coeffs.filter_name != cfg.filter.name:
        raise ValueError(
            f"coefficients were produced with '{coeffs.filter_name}', "
            f"config carries '{cfg.filter.name}'"
        )
    if coeffs.mode != cfg.mode:
        raise ValueError(f"extension mode mismatch: coeffs '{coeffs.mode}' vs config '{cfg.mode}'")
    if len(coeffs.lengths) != len(coeffs.details):
        raise ValueError("length metadata does not match detail levels")
    cur = coeffs.approx
    for detail, out_len in zip(reversed(coeffs.details), reversed(coeffs.lengths)):
        cur = _synthesize_level(cur, detail, cfg.filter, out_len, cfg.mode)
    return cur


def perturb(coeffs: DwtCoeffs, cfg: AugmentConfig, rng: Rng) -> DwtCoeffs:
    """Scale detail coefficients by random factors from ``factor_range``.

    Approximation coefficients pass through untouched.  Factors are drawn
    per coefficient (or per band with ``per_band``), levels in ascending
    order, so a seed fixes the result.
    """
    levels = cfg.perturb_levels or tuple(range(1, coeffs.levels + 1))
    bad = [lv for lv in levels if not 1 <= lv <= coeffs.levels]
    if bad:
        raise ValueError(f"perturb levels {bad} outside decomposition range 1..{coeffs.levels}")
    a, b = cfg.factor_range
    selected = set(levels)
    new_details = []
    for level, d in enumerate(coeffs.details, start=1):
        if level not in selected:
            new_details.append(d.copy())
        elif cfg.per_band:
            new_details.append(d * rng.uniform(a, b))
        else:
            new_details.append(d * rng.uniform_array(len(d), a, b))
    return replace(coeffs, approx=coeffs.approx.copy(), details=new_details)


def augment_series(series: np.ndarray, cfg: AugmentConfig) -> np.ndarray:
    """One perturbed variant: idwt(perturb(dwt(x))).  Length-preserving."""
    rng = Rng(cfg.seed)
    return idwt(perturb(dwt(series, cfg), cfg, rng), cfg)


@dataclass
class CorpusEntry:
    """A series plus the record of how it was produced."""

    series: TimeSeries
    provenance: dict


def expand_dataset(original: TimeSeries, cfg: AugmentConfig, copies: int) -> list[CorpusEntry]:
    """Original plus ``copies`` independently perturbed variants.

    Copy k draws from the child stream ``Rng.derive(cfg.seed, k)``, so
    generating copies in parallel or serially yields the same corpus.
    Reconstructed values that dip below zero are clamped to keep the
    series contract; the clamp count lands in the provenance.
    """
    if copies < 1:
        raise ValueError(f"copies must be >= 1, got {copies}")
    entries = [CorpusEntry(original, {"source": "original"})]
    base = {
        "source": "augmented",
        "filter": cfg.filter.name,
        "levels": cfg.levels,
        "factor_range": list(cfg.factor_range),
        "mode": cfg.mode,
        "per_band": cfg.per_band,
        "base_seed": cfg.seed,
    }
    coeffs = dwt(original.values, cfg)
    for k in range(copies):
        rng = Rng.derive(cfg.seed, k)
        values = idwt(perturb(coeffs, cfg, rng), cfg)
        clamped = int(np.sum(values < 0))
        if clamped:
            values = np.maximum(values, 0.0)
        variant = TimeSeries(values, start=original.start, interval=original.interval)
        entries.append(CorpusEntry(variant, {**base, "copy": k, "clamped": clamped}))
    return entries
