"""Sampled torus foundation: grids, transforms, norms, maximal averages.

Everything downstream lives on the N-point torus x_k = k/N with N a power of
two. Frequencies are centered integers {-N/2, ..., N/2-1}, stored fftshifted:
index i of a coefficient array holds frequency xi = i - N/2. The forward
transform carries the 1/N so coefficients are averages (Fourier coefficients);
this single normalization choice is what makes every identity below exact.

All operations are pure; arrays are treated as immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.ndimage import maximum_filter1d

Array = np.ndarray


@dataclass(frozen=True)
class TorusGrid:
    """Uniform sampling of the unit torus; n must be a power of two >= 8."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")

    @property
    def points(self) -> Array:
        return np.arange(self.n) / self.n

    @property
    def frequencies(self) -> Array:
        # index i of any fftshifted coefficient array holds xi = i - n/2
        return np.arange(self.n) - self.n // 2

    def index_of(self, xi: int) -> int:
        i = int(xi) + self.n // 2
        if not 0 <= i < self.n:
            raise ValueError(f"frequency {xi} outside [{-self.n // 2}, {self.n // 2})")
        return i


@dataclass(frozen=True)
class SampledFunction:
    grid: TorusGrid
    values: Array  # complex, length grid.n

    def __post_init__(self) -> None:
        if len(self.values) != self.grid.n:
            raise ValueError("value count does not match grid size")

    def to_json_dict(self) -> dict:
        return {
            "n": self.grid.n,
            "re": np.real(self.values).tolist(),
            "im": np.imag(self.values).tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SampledFunction":
        vals = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        return SampledFunction(TorusGrid(int(d["n"])), vals)


@dataclass(frozen=True)
class Spectrum:
    grid: TorusGrid
    coeffs: Array  # complex, index i <-> frequency i - n/2

    def __post_init__(self) -> None:
        if len(self.coeffs) != self.grid.n:
            raise ValueError("coefficient count does not match grid size")

    def coeff(self, xi: int) -> complex:
        return complex(self.coeffs[self.grid.index_of(xi)])


def sampled(grid: TorusGrid, values: Iterable[complex]) -> SampledFunction:
    return SampledFunction(grid, np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex))


def sample(grid: TorusGrid, fn: Callable[[Array], Array]) -> SampledFunction:
    return SampledFunction(grid, np.asarray(fn(grid.points), dtype=complex))


def dft(f: SampledFunction) -> Spectrum:
    return Spectrum(f.grid, np.fft.fftshift(np.fft.fft(f.values)) / f.grid.n)


def idft(s: Spectrum) -> SampledFunction:
    return SampledFunction(s.grid, np.fft.ifft(np.fft.ifftshift(s.coeffs)) * s.grid.n)


def spectrum_from_coeffs(grid: TorusGrid, pairs: dict[int, complex]) -> Spectrum:
    c = np.zeros(grid.n, dtype=complex)
    for xi, v in pairs.items():
        c[grid.index_of(xi)] = v
    return Spectrum(grid, c)


def pure_mode(grid: TorusGrid, xi: int, amplitude: complex = 1.0) -> SampledFunction:
    return SampledFunction(grid, amplitude * np.exp(2j * np.pi * xi * grid.points))


def convolve(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """(f # g)(x) = (1/N) sum_y f(y) g(x-y); Fourier coefficients multiply."""
    if f.grid != g.grid:
        raise ValueError("convolution requires a shared grid")
    vals = np.fft.ifft(np.fft.fft(f.values) * np.fft.fft(g.values)) / f.grid.n
    return SampledFunction(f.grid, vals)


def pair(f: SampledFunction, g: SampledFunction) -> complex:
    """Bilinear pairing (1/N) sum f*g, the discrete integral of a product."""
    if f.grid != g.grid:
        raise ValueError("pairing requires a shared grid")
    return complex(np.sum(f.values * g.values) / f.grid.n)


def pair_conj(f: SampledFunction, g: SampledFunction) -> complex:
    """Hermitian pairing (1/N) sum f*conj(g), for wavelet-style coefficients."""
    if f.grid != g.grid:
        raise ValueError("pairing requires a shared grid")
    return complex(np.sum(f.values * np.conj(g.values)) / f.grid.n)


def lp_norm(f: SampledFunction, p: float) -> float:
    if p == np.inf:
        return float(np.max(np.abs(f.values))) if f.grid.n else 0.0
    if p <= 0:
        raise ValueError(f"lp_norm needs p > 0 or p = inf, got {p}")
    return float(np.mean(np.abs(f.values) ** p) ** (1.0 / p))


def weak_l1_norm(f: SampledFunction) -> float:
    """sup_{lam>0} lam * |{|f| > lam}|, exact on the grid.

    The sup is attained at a threshold just below an attained value of |f|:
    with |f| sorted descending, candidate k (1-based) contributes
    sorted[k-1] * k/N.
    """
    mags = np.sort(np.abs(f.values))[::-1]
    ks = np.arange(1, f.grid.n + 1)
    return float(np.max(mags * ks / f.grid.n))


def maximal_function(f: SampledFunction) -> SampledFunction:
    """Hardy-Littlewood maximal function over grid-aligned torus intervals.

    At x: max over all cyclic runs of grid points containing x of the average
    of |f|. For each run length L the per-start averages come from prefix sums
    and the max over starts in [x-L+1, x] is a trailing sliding-window max.
    """
    n = f.grid.n
    a = np.abs(f.values)
    cs = np.concatenate([[0.0], np.cumsum(np.concatenate([a, a]))])
    out = np.full(n, -np.inf)
    for length in range(1, n + 1):
        avg = (cs[length : length + n] - cs[:n]) / length  # avg over [s, s+L-1]
        np.maximum(out, maximum_filter1d(avg, size=length, mode="wrap", origin=(length - 1) // 2), out=out)
    return SampledFunction(f.grid, out.astype(complex))


def torus_distance(x: Array, left: float, length: float) -> Array:
    """Cyclic distance from points x to the closed arc [left, left+length]."""
    d = np.mod(np.asarray(x, dtype=float) - left, 1.0)
    inside = d <= length
    return np.where(inside, 0.0, np.minimum(d - length, 1.0 - d))


def approx_cutoff(interval, grid: TorusGrid, exponent: int = 10) -> SampledFunction:
    """(1 + dist(x, J)/|J|)^(-exponent): equals 1 on J, decays polynomially.

    `interval` is anything with `left` and `length` attributes in torus
    coordinates (the dyadic-interval type qualifies).
    """
    if exponent <= 0:
        raise ValueError("cutoff exponent must be positive")
    d = torus_distance(grid.points, float(interval.left), float(interval.length))
    vals = (1.0 + d / float(interval.length)) ** (-float(exponent))
    return SampledFunction(grid, vals.astype(complex))


def random_bandlimited(grid: TorusGrid, max_freq: int, rng: np.random.Generator) -> SampledFunction:
    """Random trigonometric polynomial with iid complex-normal coefficients
    on |xi| <= max_freq (and xi > -N/2)."""
    if max_freq < 0 or max_freq >= grid.n // 2:
        raise ValueError(f"max_freq must lie in [0, {grid.n // 2 - 1}]")
    c = np.zeros(grid.n, dtype=complex)
    lo, hi = grid.index_of(-max_freq), grid.index_of(max_freq)
    m = hi - lo + 1
    c[lo : hi + 1] = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
    return idft(Spectrum(grid, c))


def bandwidth(f: SampledFunction, tol: float = 0.0) -> int:
    """Largest |xi| carrying a coefficient with magnitude > tol (0 if none)."""
    c = dft(f).coeffs
    live = np.nonzero(np.abs(c) > tol)[0]
    if len(live) == 0:
        return 0
    return int(np.max(np.abs(live - f.grid.n // 2)))
