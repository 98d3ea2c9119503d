"""Dyadic intervals, adapted bump families, and the discrete model operators.

Intervals are [2^k n, 2^k (n+1)) on the unit torus with k <= 0. A bump family
carries one frequency band per scale, recorded with exact rational endpoints,
so every support comparison the operator definitions depend on (intersection,
width ratios, the five-fold dilate test) is decided by integer arithmetic.
Bumps are synthesized spectrally: one mother envelope per scale, hard
truncation to the band, cyclic translation to each interval. Coefficient
maps, synthesis, and cross pairings are all finite Fourier sums, so the
reordering identity and the inner paraproduct identities below are exact
summation facts checked to roundoff.

All coefficient pairings here are bilinear (pair, no conjugation); mixing in
a Hermitian pairing would break the exactness of the reordering identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .grid import (
    Array,
    SampledFunction,
    Spectrum,
    TorusGrid,
    dft,
    idft,
    torus_distance,
)

LADDER = tuple(range(-8, -1))  # default scale ladder at n = 256

# default spectral bands per unit 2^{-k}: the lacunary band sits just above
# half the non-lacunary half width, keeping measured adaptedness constants
# small while every admissible scale pair still overlaps
LACUNARY_BAND = (Fraction(1, 2), Fraction(11, 16))
NONLACUNARY_HALF = Fraction(1, 2)
WIDE_HALF = Fraction(11, 16)

_EDGE = 0.3  # envelope transition fraction per side


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """[2^k n, 2^k (n+1)) with k <= 0 and 0 <= n < 2^-k."""

    k: int
    n: int

    def __post_init__(self) -> None:
        if self.k > 0:
            raise ValueError(f"scale exponent must be <= 0, got {self.k}")
        if not 0 <= self.n < 2**-self.k:
            raise ValueError(f"position {self.n} outside [0, {2**-self.k})")

    @property
    def length(self) -> Fraction:
        return Fraction(1, 2**-self.k)

    @property
    def left(self) -> Fraction:
        return Fraction(self.n, 2**-self.k)

    def contains(self, other: "DyadicInterval") -> bool:
        if other.k > self.k:
            return False
        return other.n >> (self.k - other.k) == self.n

    def disjoint_from(self, other: "DyadicInterval") -> bool:
        return not (self.contains(other) or other.contains(self))

    def to_json_dict(self) -> dict:
        return {"k": self.k, "n": self.n}


def ladder_intervals(scales: Iterable[int]) -> tuple[DyadicInterval, ...]:
    """Every interval at every listed scale, sorted coarse to fine."""
    out = []
    for k in sorted(set(scales), reverse=True):
        out.extend(DyadicInterval(k, n) for n in range(2**-k))
    return tuple(out)


@dataclass(frozen=True)
class FrequencyBand:
    """Closed rational interval [lo, hi] on the integer frequency line."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("band endpoints out of order")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def center(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def intersects(self, other: "FrequencyBand") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def contains_zero_dilated(self, factor: int = 5) -> bool:
        # 0 in factor*band iff |center| <= factor * half width
        return 2 * abs(self.center) <= factor * self.width

    def distance_to_zero(self) -> Fraction:
        if self.lo <= 0 <= self.hi:
            return Fraction(0)
        return min(abs(self.lo), abs(self.hi))

    def integer_modes(self) -> Array:
        return np.arange(math.ceil(self.lo), math.floor(self.hi) + 1)

    def to_json_dict(self) -> dict:
        return {"lo": str(self.lo), "hi": str(self.hi)}


def _floor_log2(fr: Fraction) -> int:
    if fr <= 0:
        raise ValueError("log2 needs a positive ratio")
    p, q = fr.numerator, fr.denominator
    e = p.bit_length() - q.bit_length()
    if e >= 0:
        return e if p >= (q << e) else e - 1
    return e if (p << -e) >= q else e - 1


def _flip(c: Array) -> Array:
    """Spectrum of x -> u(-x) in fftshifted layout (top mode unused)."""
    out = np.zeros_like(c)
    out[1:] = c[:0:-1]
    return out


def _smoothstep(t: Array) -> Array:
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def _envelope(profile: str, modes: Array, band: FrequencyBand) -> Array:
    """Mother magnitude per kept mode; flat top, smooth shoulders.

    Positions are midpoints in mode index, not raw frequency, so edge modes
    of very narrow bands still carry positive weight.
    """
    m = len(modes)
    u = (np.arange(m) + 0.5) / m
    flat = np.minimum(_smoothstep(u / _EDGE), _smoothstep((1.0 - u) / _EDGE))
    if profile == "smooth":
        return flat
    if profile == "raised-cosine":
        return np.sin(np.pi * u) ** 2
    if profile == "logflat":
        # near 1/sqrt|xi| so every dyadic sub band carries equal l2 mass
        return flat / np.sqrt(1.0 + np.abs(modes.astype(float)))
    raise ValueError(f"unknown mother profile {profile!r}")


class BumpFamily:
    """L2 normalized bumps indexed by dyadic intervals, one band per scale.

    Every interval at scale k holds the cyclic translate of that scale's
    mother bump, so the l2 norm and the frequency support are shared across
    translates and verified once per scale.
    """

    def __init__(
        self,
        grid: TorusGrid,
        flavor: str,
        intervals: tuple[DyadicInterval, ...],
        bands: dict[int, FrequencyBand],
        mothers: dict[int, Array],
        profile: str,
    ):
        self.grid = grid
        self.flavor = flavor
        self.intervals = intervals
        self.bands = bands
        self.profile = profile
        self._mothers = mothers
        self._by_scale: dict[int, tuple[DyadicInterval, ...]] = {
            k: tuple(iv for iv in intervals if iv.k == k)
            for k in sorted({iv.k for iv in intervals}, reverse=True)
        }

    @property
    def scales(self) -> tuple[int, ...]:
        return tuple(sorted(self._by_scale, reverse=True))

    def at_scale(self, k: int) -> tuple[DyadicInterval, ...]:
        return self._by_scale.get(k, ())

    def band(self, k: int) -> FrequencyBand:
        return self.bands[k]

    def _step(self, k: int) -> int:
        return self.grid.n >> (-k)

    def bump(self, iv: DyadicInterval) -> SampledFunction:
        vals = idft(Spectrum(self.grid, self._mothers[iv.k])).values
        return SampledFunction(self.grid, np.roll(vals, iv.n * self._step(iv.k)))

    def scale_coefficients(self, f: SampledFunction, k: int) -> dict[DyadicInterval, complex]:
        """pair(f, bump) for every interval at one scale via a single FFT."""
        if f.grid != self.grid:
            raise ValueError("coefficient map requires the family grid")
        spec = dft(f).coeffs * _flip(self._mothers[k])
        g = np.fft.ifft(np.fft.ifftshift(spec)) * self.grid.n
        step = self._step(k)
        return {iv: complex(g[iv.n * step]) for iv in self.at_scale(k)}

    def coefficients(self, f: SampledFunction) -> "CoefficientFamily":
        out: dict[DyadicInterval, complex] = {}
        for k in self.scales:
            out.update(self.scale_coefficients(f, k))
        return CoefficientFamily(self.grid, out)

    def synthesize(self, coeffs: Mapping[DyadicInterval, complex]) -> SampledFunction:
        return _synthesize(self.grid, self._mothers, coeffs)

    def adaptedness_constants(self, l_max: int = 2, alpha_max: int = 5) -> dict[tuple[int, int], float]:
        """Measured bump constants: sup |phi^(l)| |I|^l (1 + dist/|I|)^alpha.

        phi is the adapted bump |I|^(1/2) * (family member); translation
        invariance lets one interval per scale stand for all of them.
        """
        xs = self.grid.points
        freqs = self.grid.frequencies
        out = {(l, a): 0.0 for l in range(l_max + 1) for a in range(alpha_max + 1)}
        for k in self.scales:
            iv = DyadicInterval(k, 0)
            size = float(iv.length)
            d = torus_distance(xs, 0.0, size) / size
            spec = self._mothers[k] * math.sqrt(size)
            for l in range(l_max + 1):
                deriv = np.abs(idft(Spectrum(self.grid, spec * (2j * np.pi * freqs) ** l)).values)
                deriv = deriv * size**l
                weight = np.ones_like(d)
                for a in range(alpha_max + 1):
                    out[(l, a)] = max(out[(l, a)], float(np.max(deriv * weight)))
                    weight = weight * (1.0 + d)
        return out

    def to_json_dict(self) -> dict:
        return {
            "flavor": self.flavor,
            "profile": self.profile,
            "intervals": [iv.to_json_dict() for iv in self.intervals],
            "bands": {str(k): b.to_json_dict() for k, b in self.bands.items()},
        }


def _synthesize(grid: TorusGrid, mothers: dict[int, Array], coeffs: Mapping[DyadicInterval, complex]) -> SampledFunction:
    """sum of c_I * bump_I assembled per scale on the frequency side."""
    spec = np.zeros(grid.n, dtype=complex)
    by_scale: dict[int, dict[int, complex]] = {}
    for iv, c in coeffs.items():
        by_scale.setdefault(iv.k, {})[iv.n] = c
    freqs = grid.frequencies
    for k, slots in by_scale.items():
        m = 2**-k
        c = np.zeros(m, dtype=complex)
        for n, v in slots.items():
            c[n] = v
        trans = np.fft.fft(c)  # sum_n c_n e(-xi n 2^k) per residue
        spec += mothers[k] * trans[np.mod(freqs, m)]
    return idft(Spectrum(grid, spec))


def make_family(
    grid: TorusGrid,
    intervals: Iterable[DyadicInterval],
    flavor: str,
    *,
    profile: str = "smooth",
    wide: bool = False,
    band_scale: tuple[Fraction, Fraction] | None = None,
    validate: bool = True,
) -> BumpFamily:
    """Build a bump family over the intervals with one spectral band per scale.

    Non-lacunary bands are symmetric [-h, h] with h = 2^{-k}/2 by default and
    h = (11/16) 2^{-k} for the wide probe variant, capped below the Nyquist
    row. Lacunary bands are [1/2, 11/16] 2^{-k}, halved as often as needed to
    fit under Nyquist (exact halving keeps bands at distinct scales either
    equal or disjoint, which the scale selection identities rely on).
    band_scale overrides the per unit band; validate=False skips the flavor
    invariants so deliberately broken families can be constructed for
    detection tests.
    """
    if flavor not in ("lacunary", "non-lacunary"):
        raise ValueError(f"unknown flavor {flavor!r}")
    ivs = tuple(sorted(set(intervals), key=lambda iv: (-iv.k, iv.n)))
    if not ivs:
        raise ValueError("a bump family needs at least one interval")
    top = grid.n // 2 - 1
    bands: dict[int, FrequencyBand] = {}
    mothers: dict[int, Array] = {}
    for k in sorted({iv.k for iv in ivs}):
        if grid.n % 2**-k:
            raise ValueError(f"grid too coarse for requested scale 2^{k}")
        unit = Fraction(2**-k)
        if flavor == "non-lacunary":
            if band_scale is not None:
                lo, hi = band_scale[0] * unit, band_scale[1] * unit
            else:
                h = (WIDE_HALF if wide else NONLACUNARY_HALF) * unit
                h = min(h, Fraction(top))
                lo, hi = -h, h
        else:
            lo, hi = (band_scale if band_scale is not None else LACUNARY_BAND)
            lo, hi = lo * unit, hi * unit
            while hi > top:
                lo, hi = lo / 2, hi / 2
        band = FrequencyBand(lo, hi)
        modes = band.integer_modes()
        if len(modes) == 0 or abs(modes).max() > top:
            raise ValueError(f"grid too coarse for requested scale 2^{k}")
        if validate:
            if flavor == "non-lacunary":
                if band.lo != -band.hi:
                    raise ValueError("non-lacunary band must be symmetric about 0")
                if not unit / 4 <= band.width <= 4 * unit:
                    raise ValueError("non-lacunary band width off scale")
            else:
                if band.contains_zero_dilated(5):
                    raise ValueError("lacunary band puts 0 inside its 5-fold dilate")
        g = _envelope(profile, modes, band).astype(complex)
        g = g * np.exp(-2j * np.pi * modes * 2.0 ** (k - 1))  # peak at cell center
        g = g / np.linalg.norm(g)
        mother = np.zeros(grid.n, dtype=complex)
        mother[modes + grid.n // 2] = g
        bands[k] = band
        mothers[k] = mother
    return BumpFamily(grid, flavor, ivs, bands, mothers, profile)


class CoefficientFamily:
    """Finite map from dyadic intervals to complex coefficients."""

    def __init__(self, grid: TorusGrid, values: Mapping[DyadicInterval, complex]):
        self.grid = grid
        self.values = dict(values)

    def __getitem__(self, iv: DyadicInterval) -> complex:
        return self.values[iv]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(sorted(self.values, key=lambda iv: (-iv.k, iv.n)))

    def items(self):
        return ((iv, self.values[iv]) for iv in self)

    @property
    def intervals(self) -> tuple[DyadicInterval, ...]:
        return tuple(self)

    def restrict(self, keep: Iterable[DyadicInterval]) -> "CoefficientFamily":
        keep = set(keep)
        return CoefficientFamily(self.grid, {iv: v for iv, v in self.values.items() if iv in keep})

    def scaled(self, factor: complex) -> "CoefficientFamily":
        return CoefficientFamily(self.grid, {iv: factor * v for iv, v in self.values.items()})

    def max_abs(self) -> float:
        return max((abs(v) for v in self.values.values()), default=0.0)

    def to_json_dict(self) -> dict:
        return {
            "entries": [
                {"k": iv.k, "n": iv.n, "re": v.real, "im": v.imag}
                for iv, v in self.items()
            ]
        }


def random_coefficient_family(
    grid: TorusGrid,
    intervals: Iterable[DyadicInterval],
    rng: np.random.Generator,
    scale_power: float = 0.5,
) -> CoefficientFamily:
    """iid complex normal coefficients weighted by |J|^scale_power."""
    vals = {}
    for iv in intervals:
        z = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
        vals[iv] = z * float(iv.length) ** scale_power
    return CoefficientFamily(grid, vals)


@dataclass(frozen=True)
class ModelConfig:
    """Six bump families and the selection knobs for the model operators.

    i_families live on the inner collection (the I sums), j_families on the
    outer one. Exactly one j family is non-lacunary; which i family must be
    non-lacunary depends on the operator and is checked at application time.
    comparability fixes the meaning of the two sided scale constraint: 2
    keeps the half open dyadic band (classes partition), 4 widens it by one
    class on each side for sensitivity checks.
    """

    i_families: tuple[BumpFamily, BumpFamily, BumpFamily]
    j_families: tuple[BumpFamily, BumpFamily, BumpFamily]
    k0: int | None = None
    comparability: int = 2
    separation: int = 2

    def __post_init__(self) -> None:
        fams = self.i_families + self.j_families
        if any(f.grid != fams[0].grid for f in fams):
            raise ValueError("all families must share one grid")
        for side in (self.i_families, self.j_families):
            if any(f.intervals != side[0].intervals for f in side):
                raise ValueError("families on one side must share their intervals")
        if sum(f.flavor == "non-lacunary" for f in self.j_families) != 1:
            raise ValueError("exactly one outer family must be non-lacunary")
        if self.k0 is not None and self.k0 < 1:
            raise ValueError("k0 must be a positive integer")
        if self.comparability not in (2, 4):
            raise ValueError("comparability factor must be 2 or 4")
        if self.separation < 1:
            raise ValueError("separation must be at least 1")

    @property
    def grid(self) -> TorusGrid:
        return self.i_families[0].grid

    @property
    def nonlacunary_j(self) -> int:
        return 1 + [f.flavor for f in self.j_families].index("non-lacunary")

    def to_json_dict(self) -> dict:
        return {
            "k0": self.k0,
            "comparability": self.comparability,
            "separation": self.separation,
            "nonlacunary_j": self.nonlacunary_j,
            "i_families": [f.to_json_dict() for f in self.i_families],
            "j_families": [f.to_json_dict() for f in self.j_families],
        }


def _require_flavors(cfg: ModelConfig, op: int) -> None:
    want = ("lacunary", "non-lacunary", "lacunary") if op == 1 else ("non-lacunary", "lacunary", "lacunary")
    got = tuple(f.flavor for f in cfg.i_families)
    if got != want:
        raise ValueError(f"inner flavors {got} invalid for T{op}; need {want}")


def _admits(cfg: ModelConfig, w_inner: FrequencyBand, w_outer: FrequencyBand, k0: int | None) -> bool:
    """Outer band admissible against the inner constraint band."""
    if not w_outer.intersects(w_inner):
        return False
    if k0 is None:
        return w_outer.width <= w_inner.width
    cls = _floor_log2(w_inner.width / w_outer.width)
    slack = 0 if cfg.comparability == 2 else 1
    return abs(cls - k0) <= slack


def scale_class(cfg: ModelConfig, op: int, k_i: int, k_j: int) -> int:
    """floor log2 of the constraint band ratio for an (I, J) scale pair."""
    inner = cfg.i_families[1 if op == 1 else 0]
    return _floor_log2(inner.band(k_i).width / cfg.j_families[2].band(k_j).width)


def _selected_scales(cfg: ModelConfig, op: int, k0: int | None) -> dict[int, tuple[int, ...]]:
    inner = cfg.i_families[1 if op == 1 else 0]
    outer3 = cfg.j_families[2]
    out = {}
    for ki in inner.scales:
        wi = inner.band(ki)
        out[ki] = tuple(kj for kj in outer3.scales if _admits(cfg, wi, outer3.band(kj), k0))
    return out


def model_index_pairs(cfg: ModelConfig, op: int = 1, k0: int | None = None) -> frozenset:
    """The exact (I, J) index set of the chosen operator's double sum."""
    _require_flavors(cfg, op)
    sel = _selected_scales(cfg, op, k0)
    pairs = []
    for ki, kjs in sel.items():
        for iv in cfg.i_families[0].at_scale(ki):
            for kj in kjs:
                pairs.extend((iv, jv) for jv in cfg.j_families[0].at_scale(kj))
    return frozenset(pairs)


def _apply_model(cfg: ModelConfig, op: int, k0: int | None, f_direct: SampledFunction, g1: SampledFunction, g2: SampledFunction) -> SampledFunction:
    grid = cfg.grid
    for f in (f_direct, g1, g2):
        if f.grid != grid:
            raise ValueError("model operator inputs must live on the config grid")
    jside = cfg.j_families
    iside = cfg.i_families
    inner_idx = 1 if op == 1 else 0
    direct_idx = 0 if op == 1 else 1

    jc1 = jside[0].coefficients(g1)
    jc2 = jside[1].coefficients(g2)
    inner_sums: dict[int, Array] = {}
    for kj in jside[2].scales:
        coeffs = {
            jv: jc1[jv] * jc2[jv] / math.sqrt(float(jv.length))
            for jv in jside[2].at_scale(kj)
        }
        inner_sums[kj] = jside[2].synthesize(coeffs).values

    dc = iside[direct_idx].coefficients(f_direct)
    sel = _selected_scales(cfg, op, k0)
    out_coeffs: dict[DyadicInterval, complex] = {}
    for ki in iside[2].scales:
        kjs = sel[ki]
        if not kjs:
            continue
        b = SampledFunction(grid, sum(inner_sums[kj] for kj in kjs))
        ic = iside[inner_idx].scale_coefficients(b, ki)
        for iv in iside[2].at_scale(ki):
            out_coeffs[iv] = dc[iv] * ic[iv] / math.sqrt(float(iv.length))
    return iside[2].synthesize(out_coeffs)


def apply_T1(cfg: ModelConfig, f1: SampledFunction, f2: SampledFunction, f3: SampledFunction) -> SampledFunction:
    """Outer sum pairs f1; the inner paraproduct of (f2, f3) feeds slot 2."""
    _require_flavors(cfg, 1)
    return _apply_model(cfg, 1, None, f1, f2, f3)


def apply_T1_k0(cfg: ModelConfig, f1: SampledFunction, f2: SampledFunction, f3: SampledFunction) -> SampledFunction:
    if cfg.k0 is None:
        raise ValueError("config carries no k0 for the banded variant")
    _require_flavors(cfg, 1)
    return _apply_model(cfg, 1, cfg.k0, f1, f2, f3)


def apply_T2(cfg: ModelConfig, f1: SampledFunction, f2: SampledFunction, f3: SampledFunction) -> SampledFunction:
    """Mirror operator: the inner paraproduct of (f1, f2) feeds slot 1."""
    _require_flavors(cfg, 2)
    return _apply_model(cfg, 2, None, f3, f1, f2)


def apply_T2_k0(cfg: ModelConfig, f1: SampledFunction, f2: SampledFunction, f3: SampledFunction) -> SampledFunction:
    if cfg.k0 is None:
        raise ValueError("config carries no k0 for the banded variant")
    _require_flavors(cfg, 2)
    return _apply_model(cfg, 2, cfg.k0, f3, f1, f2)


def _outer_weights(cfg: ModelConfig, f1: SampledFunction, f4: SampledFunction) -> dict[DyadicInterval, complex]:
    ic1 = cfg.i_families[0].coefficients(f1)
    ic4 = cfg.i_families[2].coefficients(f4)
    return {
        iv: ic1[iv] * ic4[iv] / math.sqrt(float(iv.length))
        for iv in cfg.i_families[0].intervals
    }


def lambda1_coefficients(
    cfg: ModelConfig,
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    f4: SampledFunction,
) -> tuple[CoefficientFamily, CoefficientFamily, CoefficientFamily]:
    """The three outer coefficient families of the reordered four-form.

    Slot 1 and 2 are plain wavelet coefficients of f2 and f3. Slot 3 nests
    the full inner sum: for each outer scale, the admissible inner scales
    are synthesized once and paired against the third outer family. The k0
    on the config (if any) selects the banded variant.
    """
    _require_flavors(cfg, 1)
    grid = cfg.grid
    a1 = cfg.j_families[0].coefficients(f2)
    a2 = cfg.j_families[1].coefficients(f3)

    w = _outer_weights(cfg, f1, f4)
    iside = cfg.i_families
    partial: dict[int, Array] = {}
    for ki in iside[1].scales:
        coeffs = {iv: w[iv] for iv in iside[1].at_scale(ki)}
        partial[ki] = iside[1].synthesize(coeffs).values

    sel = _selected_scales(cfg, 1, cfg.k0)
    a3: dict[DyadicInterval, complex] = {jv: 0.0 + 0.0j for jv in cfg.j_families[2].intervals}
    for kj in cfg.j_families[2].scales:
        kis = tuple(ki for ki, kjs in sel.items() if kj in kjs)
        if not kis:
            continue
        h = SampledFunction(grid, sum(partial[ki] for ki in kis))
        a3.update(cfg.j_families[2].scale_coefficients(h, kj))
    return a1, a2, CoefficientFamily(grid, a3)


def lambda1_value(a1: CoefficientFamily, a2: CoefficientFamily, a3: CoefficientFamily) -> complex:
    """sum over J of |J|^{-1/2} a1_J a2_J a3_J."""
    total = 0.0 + 0.0j
    for jv in a1:
        total += a1[jv] * a2[jv] * a3[jv] / math.sqrt(float(jv.length))
    return complex(total)


def lambda1_form(cfg: ModelConfig, f1, f2, f3, f4) -> complex:
    a1, a2, a3 = lambda1_coefficients(cfg, f1, f2, f3, f4)
    return lambda1_value(a1, a2, a3)


def _cross_table(cfg: ModelConfig, ki: int, kj: int) -> Array:
    """pair(inner bump at I, outer bump at J) as a function of x_J - x_I."""
    m2 = cfg.i_families[1]._mothers[ki]
    m3 = cfg.j_families[2]._mothers[kj]
    return idft(Spectrum(cfg.grid, m2 * _flip(m3))).values


@dataclass(frozen=True)
class ParaproductReport:
    """Inner collapse of the slot-3 coefficients into a single bilinear sum."""

    b: SampledFunction
    a3_direct: CoefficientFamily
    a3_via_b: CoefficientFamily
    max_deviation: float
    coefficient_scale: float
    k0: int | None = None

    @property
    def flagged(self) -> bool:
        # failure beyond 1e-9 indicates the family supports break the
        # one sided selection argument
        return self.max_deviation > 1e-9 * max(1.0, self.coefficient_scale)


def _direct_a3(
    cfg: ModelConfig,
    w: dict[DyadicInterval, complex],
    sel: dict[int, tuple[int, ...]],
) -> dict[DyadicInterval, complex]:
    """Literal per pair evaluation of the nested slot-3 sum."""
    grid = cfg.grid
    iside = cfg.i_families
    jside = cfg.j_families
    out = {jv: 0.0 + 0.0j for jv in jside[2].intervals}
    for ki, kjs in sel.items():
        ivs = iside[1].at_scale(ki)
        if not ivs or not kjs:
            continue
        step_i = grid.n >> (-ki)
        wi = np.array([w[iv] for iv in ivs])
        pos_i = np.array([iv.n * step_i for iv in ivs])
        for kj in kjs:
            jvs = jside[2].at_scale(kj)
            step_j = grid.n >> (-kj)
            table = _cross_table(cfg, ki, kj)
            pos_j = np.array([jv.n * step_j for jv in jvs])
            idx = np.mod(pos_j[:, None] - pos_i[None, :], grid.n)
            vals = table[idx] @ wi
            for jv, v in zip(jvs, vals):
                out[jv] += v
    return out


def inner_paraproduct(cfg: ModelConfig, f1: SampledFunction, f4: SampledFunction) -> ParaproductReport:
    """Collapse the nested slot-3 sum into one bilinear object and verify it.

    B collects every inner interval admissible for some outer scale; the
    claim is that pairing B against the third outer family reproduces the
    per-J nested sums exactly, because the dropped pairs have disjoint
    spectral supports. Families whose outer-3 band strays over the origin
    (five-fold dilate test fails) break the claim, and the report flags it.
    """
    _require_flavors(cfg, 1)
    if cfg.j_families[2].flavor != "lacunary":
        raise ValueError("the third outer family must be lacunary here")
    w = _outer_weights(cfg, f1, f4)
    sel = _selected_scales(cfg, 1, None)
    live_scales = tuple(ki for ki, kjs in sel.items() if kjs)
    b = cfg.i_families[1].synthesize(
        {iv: w[iv] for ki in live_scales for iv in cfg.i_families[1].at_scale(ki)}
    )
    direct = _direct_a3(cfg, w, sel)
    via_b: dict[DyadicInterval, complex] = {}
    for kj in cfg.j_families[2].scales:
        via_b.update(cfg.j_families[2].scale_coefficients(b, kj))
    dev = max(abs(direct[jv] - via_b[jv]) for jv in direct)
    scale = max(abs(v) for v in direct.values())
    return ParaproductReport(
        b=b,
        a3_direct=CoefficientFamily(cfg.grid, direct),
        a3_via_b=CoefficientFamily(cfg.grid, via_b),
        max_deviation=float(dev),
        coefficient_scale=float(scale),
    )


def inner_paraproduct_k0(cfg: ModelConfig, f1: SampledFunction, f4: SampledFunction) -> ParaproductReport:
    """Banded variant: the collapsed object uses spectrally clipped bumps.

    Each inner bump is restricted (as an exact frequency indicator) to the
    union of the outer-3 bands its scale is matched with and renormalized by
    2^{k0/2}; the collapsed sum carries the inverse factor. Matched bands at
    distinct scales are equal or disjoint by construction, which is exactly
    what makes the clipped pairing reproduce the banded nested sums.
    """
    if cfg.k0 is None:
        raise ValueError("config carries no k0 for the banded variant")
    _require_flavors(cfg, 1)
    if cfg.j_families[2].flavor != "lacunary":
        raise ValueError("the third outer family must be lacunary here")
    grid = cfg.grid
    w = _outer_weights(cfg, f1, f4)
    sel = _selected_scales(cfg, 1, cfg.k0)
    freqs = grid.frequencies
    root = 2.0 ** (cfg.k0 / 2.0)

    clipped: dict[int, Array] = {}
    for ki, kjs in sel.items():
        if not kjs:
            continue
        keep = np.zeros(grid.n, dtype=bool)
        for kj in kjs:
            band = cfg.j_families[2].band(kj)
            inside = (freqs >= math.ceil(band.lo)) & (freqs <= math.floor(band.hi))
            mirror = (-freqs >= math.ceil(band.lo)) & (-freqs <= math.floor(band.hi))
            keep |= inside | mirror
        clipped[ki] = cfg.i_families[1]._mothers[ki] * keep * root

    coeffs = {
        iv: w[iv] / root
        for ki in clipped
        for iv in cfg.i_families[1].at_scale(ki)
    }
    b = _synthesize(grid, clipped, coeffs)
    direct = _direct_a3(cfg, w, sel)
    via_b: dict[DyadicInterval, complex] = {}
    for kj in cfg.j_families[2].scales:
        via_b.update(cfg.j_families[2].scale_coefficients(b, kj))
    dev = max(abs(direct[jv] - via_b[jv]) for jv in direct)
    scale = max(abs(v) for v in direct.values())
    return ParaproductReport(
        b=b,
        a3_direct=CoefficientFamily(grid, direct),
        a3_via_b=CoefficientFamily(grid, via_b),
        max_deviation=float(dev),
        coefficient_scale=float(scale),
        k0=cfg.k0,
    )


def standard_config(
    grid: TorusGrid,
    *,
    i_scales: Iterable[int] | None = None,
    j_scales: Iterable[int] | None = None,
    op: int = 1,
    k0: int | None = None,
    nonlacunary_j: int = 1,
    wide: bool = False,
    inner_profile: str = "smooth",
    comparability: int = 2,
    separation: int = 2,
) -> ModelConfig:
    """Default model configuration on the standard ladder."""
    max_depth = -(grid.n.bit_length() - 1)
    scales_i = tuple(i_scales) if i_scales is not None else tuple(k for k in LADDER if k >= max_depth)
    scales_j = tuple(j_scales) if j_scales is not None else scales_i
    ivs = ladder_intervals(scales_i)
    jvs = ladder_intervals(scales_j)
    i_flavors = ("lacunary", "non-lacunary", "lacunary") if op == 1 else ("non-lacunary", "lacunary", "lacunary")
    i_fams = tuple(
        make_family(
            grid, ivs, fl,
            wide=wide and fl == "non-lacunary",
            profile=inner_profile if fl == "non-lacunary" else "smooth",
        )
        for fl in i_flavors
    )
    j_flavors = tuple("non-lacunary" if j == nonlacunary_j else "lacunary" for j in (1, 2, 3))
    j_fams = tuple(make_family(grid, jvs, fl) for fl in j_flavors)
    return ModelConfig(i_fams, j_fams, k0=k0, comparability=comparability, separation=separation)
