"""Frequency-plane scale decomposition.

Builds an annular partition of unity out of dilated window profiles, expands
smooth two-frequency symbols over those windows as modulated double Fourier
series, splits a product symbol into two far-separated scale regimes plus a
diagonal band, Taylor-expands a window across separated scales, and verifies
the exact discrete identities that turn convolution integrals into averaged
tile sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import SampledFunction, Spectrum, TorusGrid, convolve, dft, idft, pair
from .multilinear import check_bandwidth_budget
from .symbols import (
    MihlinReport,
    SymbolSpec,
    _smoothstep,
    eval_symbol_continuous,
    eval_symbol_grid,
    mihlin_check,
)

Array = np.ndarray

# Window geometry: unit-length nominal core, support is the 10/9 dilate of
# the core, leaving a margin of 1/18 on each side.  Modulated exponentials
# are spaced 9/10 per unit support length, which makes their period the
# 10/9 dilate of the support; the extra collar is what lets the series
# coefficients of a smooth restriction decay fast.
MARGIN = 1.0 / 18.0
SUPPORT_LEN = 1.0 + 2.0 * MARGIN
PERIOD = SUPPORT_LEN * (1.0 + 2.0 * MARGIN)
MODULATION = 1.0 / PERIOD

# Frozen knobs of the coefficient fit: sample count per axis, weight floor on
# the window-profile data weights, and the spectral wall (penalty strength,
# onset index, power) that drives trailing coefficients onto a fast-decay
# envelope without disturbing the resolved band.
_FIT_SAMPLES = 360
_FIT_WEIGHT_FLOOR = 3e-2
_FIT_PENALTY = 1e-2
_FIT_WALL = 25.0
_FIT_WALL_POWER = 60

_LN2 = math.log(2.0)


def window_core(j: int) -> tuple[float, float]:
    if j == 0:
        raise ValueError("window index 0 is not used")
    return (float(j - 1), float(j)) if j > 0 else (float(j), float(j + 1))


def window_support(j: int) -> tuple[float, float]:
    lo, hi = window_core(j)
    return lo - MARGIN, hi + MARGIN


def window_plateau(j: int) -> tuple[float, float]:
    """Interval where the profile is identically one."""
    lo, hi = window_core(j)
    return lo + MARGIN, hi - MARGIN


def window_profile(j: int, u) -> Array:
    """Smooth bump supported on the 10/9 dilate of the unit core.

    Each transition is a smoothstep of width 2*MARGIN centered on an integer
    core endpoint, so adjacent profiles are exactly complementary across the
    shared edge and every same-sign family sums to one between the outermost
    transitions.  The profile equals 1 on the core shrunk by one margin at
    each end.  Negative indices mirror positive ones through the origin.
    """
    u = np.asarray(u, dtype=float)
    if j == 0:
        raise ValueError("window index 0 is not used")
    if j < 0:
        return window_profile(-j, -u)
    lo, hi = float(j - 1), float(j)
    rise = _smoothstep((u - (lo - MARGIN)) / (2.0 * MARGIN))
    fall = _smoothstep((hi + MARGIN - u) / (2.0 * MARGIN))
    return np.minimum(rise, fall)


@dataclass(frozen=True)
class DecompositionWindows:
    """One modulated window of the partition system at a concrete scale.

    The scale is 2**(k + kappa); the frequency-side window is
    w_j(2**-lam xi) * e(n * MODULATION * 2**-lam * xi) with lam = k + kappa.
    """

    m: int
    j: int
    k: int
    kappa: float = 0.0
    n: int = 0

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError("window count parameter must be at least 2")
        if self.j == 0 or abs(self.j) > self.m:
            raise ValueError("window index must satisfy 1 <= |j| <= m")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError("scale fraction must lie in [0, 1)")

    @property
    def lam(self) -> float:
        return self.k + self.kappa

    def support(self) -> tuple[float, float]:
        lo, hi = window_support(self.j)
        s = 2.0**self.lam
        return lo * s, hi * s

    def core(self) -> tuple[float, float]:
        lo, hi = window_core(self.j)
        s = 2.0**self.lam
        return lo * s, hi * s

    def sample(self, xi) -> Array:
        u = np.asarray(xi, dtype=float) * 2.0 ** (-self.lam)
        w = window_profile(self.j, u)
        if self.n == 0:
            return w.astype(complex)
        return w * np.exp(2j * np.pi * self.n * MODULATION * u)

    def spectrum_on(self, grid: TorusGrid) -> Spectrum:
        return Spectrum(grid, self.sample(grid.frequencies))

    def bump_on(self, grid: TorusGrid) -> SampledFunction:
        return idft(self.spectrum_on(grid))


def _lambda_nodes(m: int, half: int, q: int) -> tuple[float, ...]:
    # scales are sampled on a 1/q lattice anchored at integers, so that a
    # dilation by 2 maps nodes onto nodes; the extra unit on each end keeps
    # the covered annulus comfortably past the frequency box
    lo = math.floor(math.log2(1.0 / m)) - 1
    hi = math.ceil(math.log2(half / (m - 1))) + 1
    return tuple(lo + i / q for i in range((hi - lo) * q + 1))


def _axis_shell_sums(x: Array, m: int, lam: float) -> tuple[Array, Array]:
    """Per-axis sums of both-sign window profiles: (|j| <= m, |j| <= m-1)."""
    u = np.asarray(x, dtype=float) * 2.0 ** (-lam)
    full = np.zeros_like(u)
    inner = np.zeros_like(u)
    for j in range(1, m + 1):
        w = window_profile(j, u) + window_profile(j, -u)
        full += w
        if j < m:
            inner += w
    return full, inner


@dataclass(frozen=True)
class PartitionReport:
    m: int
    q: int
    exclusion: int
    symbol: SymbolSpec
    c0: float
    lattice_min: float
    nodes: tuple[float, ...]
    mihlin: MihlinReport

    def tensor_eval(self, x1: Array, x2: Array) -> Array:
        """Partition values on the product grid x1 x x2 of float frequencies."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros((len(x1), len(x2)))
        for lam in self.nodes:
            f1, i1 = _axis_shell_sums(x1, self.m, lam)
            f2, i2 = _axis_shell_sums(x2, self.m, lam)
            out += np.outer(f1, f2) - np.outer(i1, i2)
        return out / self.q


def build_partition(
    m: int,
    grid: TorusGrid,
    q: int = 8,
    exclusion: int = 4,
    mihlin_order: int = 4,
    mihlin_budget: float = 50.0,
) -> PartitionReport:
    """Annular partition of unity on the frequency plane.

    Sums products of window profiles over all index pairs whose larger index
    is exactly m, with the scale integral discretized on a 1/q lattice.  The
    result vanishes at the origin and is bounded below elsewhere; the report
    records the measured lower bounds on and off the integer lattice.
    """
    if m < 2:
        raise ValueError("window count parameter must be at least 2")
    if q < 1:
        raise ValueError("need at least one quadrature node per unit scale")
    half = grid.n // 2
    nodes = _lambda_nodes(m, half, q)
    xi = grid.frequencies.astype(float)
    table = np.zeros((grid.n, grid.n))
    for lam in nodes:
        full, inner = _axis_shell_sums(xi, m, lam)
        table += np.outer(full, full) - np.outer(inner, inner)
    table /= q

    def shell_sum(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for lam in nodes:
            f1, i1 = _axis_shell_sums(x1, m, lam)
            f2, i2 = _axis_shell_sums(x2, m, lam)
            out = out + (f1 * f2 - i1 * i2)
        return out / q

    spec = SymbolSpec(d=2, kind="tabulated", table=table.astype(complex),
                      func=shell_sum, name=f"partition_m{m}_q{q}")
    ax = np.abs(grid.frequencies)
    sup = np.maximum.outer(ax, ax)
    c0 = float(np.min(np.abs(table)[sup >= exclusion]))
    lattice_min = float(np.min(np.abs(table)[sup >= 1]))
    report = mihlin_check(spec, max_order=mihlin_order, budget=mihlin_budget,
                          min_abs=exclusion)
    return PartitionReport(m=m, q=q, exclusion=exclusion, symbol=spec, c0=c0,
                           lattice_min=lattice_min, nodes=nodes, mihlin=report)


class ScaleAverage:
    """Continuum scale average of the outer-shell window products.

    Substituting t = 2**-lam |x| in the scale integral of the telescoped
    outer-shell sum turns it into a fixed quadrature over one window support
    against per-axis window sums evaluated at rescaled ratios, divided by
    log 2.  The result is exactly homogeneous of degree zero, so values
    depend only on x2/x1, and on each working sector where the window sums
    are saturated it is the constant quadrature mass.
    """

    def __init__(self, m: int, degree: int = 32, mid_panels: int = 10):
        if m < 2:
            raise ValueError("window count parameter must be at least 2")
        self.m = m
        edges = [m - 1.0 - MARGIN, m - 1.0 + MARGIN]
        mid = np.linspace(m - 1.0 + MARGIN, m - MARGIN, mid_panels + 1)
        edges.extend(mid[1:])
        edges.append(m + MARGIN)
        gx, gw = np.polynomial.legendre.leggauss(degree)
        ts, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            ts.append(0.5 * (b - a) * gx + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * gw)
        t = np.concatenate(ts)
        self._t = t
        self._w = np.concatenate(ws) * window_profile(m, t) / t
        self.mass = float(np.sum(self._w))
        # ratio thresholds: inside flat_thr the inner sum saturates along the
        # whole quadrature support, beyond zero_thr it vanishes there
        self._flat = {m: (m - MARGIN) / (m + MARGIN),
                      m - 1: (m - 1.0 - MARGIN) / (m + MARGIN)}
        self._zero = {m: (m + MARGIN) / (m - 1.0 - MARGIN),
                      m - 1: (m - 1.0 + MARGIN) / (m - 1.0 - MARGIN)}

    def _inner_sum(self, inner: int, x: Array) -> Array:
        acc = np.zeros(np.shape(x))
        for j in range(1, inner + 1):
            acc += window_profile(j, x) + window_profile(j, -x)
        return acc

    def _term(self, ratio: Array, inner: int) -> Array:
        ar = np.abs(ratio)
        out = np.where(ar <= self._flat[inner], self.mass, 0.0)
        band = (ar > self._flat[inner]) & (ar < self._zero[inner])
        if np.any(band):
            rb = ratio[band]
            acc = np.zeros(rb.shape)
            for ti, wi in zip(self._t, self._w):
                acc += wi * self._inner_sum(inner, ti * rb)
            out[band] = acc
        return out

    def __call__(self, x1, x2) -> Array:
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float),
                                     np.asarray(x2, dtype=float))
        a1 = np.abs(x1)
        a2 = np.abs(x2)
        out = np.zeros(x1.shape)
        live1 = a1 > 0
        r2 = np.where(live1, x2 / np.where(live1, a1, 1.0), 0.0)
        out += np.where(live1, self._term(r2, self.m), 0.0)
        live2 = a2 > 0
        r1 = np.where(live2, x1 / np.where(live2, a2, 1.0), 0.0)
        out += np.where(live2, self._term(r1, self.m - 1), 0.0)
        return out / _LN2

    def as_symbol(self, grid: TorusGrid) -> SymbolSpec:
        xi = grid.frequencies.astype(float)
        table = self(xi[:, None], xi[None, :]).astype(complex)
        return SymbolSpec(d=2, kind="tabulated", table=table,
                          func=lambda x1, x2: self(x1, x2).astype(complex),
                          name=f"scale_average_m{self.m}")


_SCALE_AVERAGES: dict[int, ScaleAverage] = {}


def scale_average(m: int) -> ScaleAverage:
    if m not in _SCALE_AVERAGES:
        _SCALE_AVERAGES[m] = ScaleAverage(m)
    return _SCALE_AVERAGES[m]


@dataclass(frozen=True)
class CoefficientTable:
    """Modulation coefficients of windowed symbol slices.

    Keys are (j1, j2, lam, n1, n2).  The decay constant is the smallest K
    with |C| <= K * (1+|n1|)**-5 * (1+|n2|)**-5 over the stored entries.
    """

    n_range: int
    entries: dict
    residual: float
    decay_constant: float

    def coefficient(self, j1: int, j2: int, lam: float, n1: int, n2: int) -> complex:
        return self.entries.get((j1, j2, lam, n1, n2), 0.0 + 0.0j)

    def matrix(self, j1: int, j2: int, lam: float) -> Array:
        r = self.n_range
        out = np.zeros((2 * r + 1, 2 * r + 1), dtype=complex)
        for (a, b, l, n1, n2), c in self.entries.items():
            if (a, b, l) == (j1, j2, lam):
                out[n1 + r, n2 + r] = c
        return out

    def decay_profile(self) -> dict[int, float]:
        """index radius -> largest coefficient magnitude at that radius."""
        prof: dict[int, float] = {}
        for (_, _, _, n1, n2), c in self.entries.items():
            r = max(abs(n1), abs(n2))
            prof[r] = max(prof.get(r, 0.0), abs(c))
        return prof

    def reconstruct(self, j1: int, j2: int, lam: float, x1: Array, x2: Array) -> Array:
        """Resummed series sum C (w e)(w e) on the product grid x1 x x2."""
        e1 = _mode_matrix(j1, lam, np.asarray(x1, dtype=float), self.n_range)
        e2 = _mode_matrix(j2, lam, np.asarray(x2, dtype=float), self.n_range)
        return e1 @ self.matrix(j1, j2, lam) @ e2.T

    @staticmethod
    def merge(tables: list["CoefficientTable"]) -> "CoefficientTable":
        entries: dict = {}
        for t in tables:
            entries.update(t.entries)
        return CoefficientTable(
            n_range=max(t.n_range for t in tables),
            entries=entries,
            residual=max(t.residual for t in tables),
            decay_constant=max(t.decay_constant for t in tables),
        )


def _mode_matrix(j: int, lam: float, xi: Array, n_range: int) -> Array:
    """Columns are the windowed modulated basis functions at one scale."""
    u = xi * 2.0 ** (-lam)
    w = window_profile(j, u)
    ns = np.arange(-n_range, n_range + 1)
    return w[:, None] * np.exp(2j * np.pi * MODULATION * np.outer(u, ns))


def _axis_solver(j: int, n_range: int, p: int) -> tuple[Array, Array, Array]:
    """Sample grid, data weights, and regularized analysis operator for axis j.

    Solves the window-weighted normal equations with a steep diagonal penalty
    on mode indices beyond the wall.  Inside the wall the penalty is far below
    the data term and the fit is plain weighted least squares; beyond it the
    penalty dominates, which forces the trailing coefficients onto the fast
    decay envelope the downstream bounds assume.  One refinement step removes
    the first-order solve error of the ill-conditioned gram matrix.
    """
    lo, hi = window_support(j)
    u = lo + (np.arange(p) + 0.5) * (hi - lo) / p
    wt = np.maximum(window_profile(j, u), _FIT_WEIGHT_FLOOR)
    ns = np.arange(-n_range, n_range + 1)
    a = np.exp(2j * np.pi * MODULATION * np.outer(u, ns))
    w = (np.abs(ns) / _FIT_WALL) ** _FIT_WALL_POWER
    gram = a.conj().T @ (a * wt[:, None]) + _FIT_PENALTY * p * np.diag(w)
    rhs = (a.conj() * wt[:, None]).T
    sol = np.linalg.solve(gram, rhs)
    sol += np.linalg.solve(gram, rhs - gram @ sol)
    return u, wt, sol


def _quotient(
    a: SymbolSpec,
    u1: Array,
    u2: Array,
    scale: float,
    m: int,
    partition: PartitionReport | None,
) -> Array:
    """Symbol over denominator on the product grid scale*u1 x scale*u2."""
    av = eval_symbol_continuous(a, scale * u1[:, None], scale * u2[None, :])
    if partition is None:
        tv = scale_average(m)(scale * u1[:, None], scale * u2[None, :])
    else:
        tv = partition.tensor_eval(scale * u1, scale * u2)
        floor = 0.5 * min(partition.c0, partition.lattice_min)
        dip = float(np.min(np.abs(tv)))
        if dip < floor:
            raise ValueError(
                f"partition dips to {dip:.3g} on the window support, below "
                f"the division floor {floor:.3g}; refine the scale quadrature"
            )
    return av / tv


def _slice_fit(
    a: SymbolSpec,
    j1: int,
    j2: int,
    lam: float,
    n_range: int,
    partition: PartitionReport | None,
    samples: int,
) -> tuple[Array, float]:
    """Modulation coefficients of the windowed quotient over one window pair.

    The data weights are the windows themselves, which is exactly the form in
    which the coefficients are consumed downstream: the windows always travel
    with the modulated exponentials.  The constant mode is split off before
    the solve and restored afterwards, so a constant quotient maps to a pure
    delta table no matter how stiff the regularized system is.
    """
    p = samples
    scale = 2.0**lam
    m = max(abs(j1), abs(j2))
    u1, wt1, b1 = _axis_solver(j1, n_range, p)
    u2, wt2, b2 = _axis_solver(j2, n_range, p)
    q = _quotient(a, u1, u2, scale, m, partition)
    wprod = wt1[:, None] * wt2[None, :]
    cstar = complex(np.sum(q * wprod) / np.sum(wprod))
    c = b1 @ (q - cstar) @ b2.T
    c[n_range, n_range] += cstar
    # residual in consumed form, on an offset grid independent of the fit
    pr = max(64, p // 3)
    vs = []
    for j in (j1, j2):
        lo, hi = window_support(j)
        v = lo + (np.arange(pr) + 0.31) * (hi - lo) / pr
        vs.append(v)
    v1, v2 = vs
    qv = _quotient(a, v1, v2, scale, m, partition)
    w1 = window_profile(j1, v1)
    w2 = window_profile(j2, v2)
    e1 = _mode_matrix(j1, lam, scale * v1, n_range)
    e2 = _mode_matrix(j2, lam, scale * v2, n_range)
    residual = float(np.max(np.abs(e1 @ c @ e2.T - np.outer(w1, w2) * qv)))
    return c, residual


def fourier_coefficients(
    a: SymbolSpec,
    j1: int,
    j2: int,
    lam: float,
    n_range: int,
    partition: PartitionReport | None = None,
    samples: int = _FIT_SAMPLES,
) -> CoefficientTable:
    """One slice of the double modulation series of a over the scale average.

    The denominator defaults to the exact continuum scale average; passing a
    sampled partition reproduces the discrete-lattice variant and raises when
    that lattice is too coarse to divide by.
    """
    c, residual = _slice_fit(a, j1, j2, lam, n_range, partition, samples)
    entries = {}
    r = n_range
    for i1 in range(2 * r + 1):
        for i2 in range(2 * r + 1):
            entries[(j1, j2, lam, i1 - r, i2 - r)] = complex(c[i1, i2])
    ns = np.arange(-r, r + 1)
    weight = np.outer((1.0 + np.abs(ns)) ** 5, (1.0 + np.abs(ns)) ** 5)
    decay_constant = float(np.max(np.abs(c) * weight))
    return CoefficientTable(n_range=r, entries=entries, residual=residual,
                            decay_constant=decay_constant)


def decay_slope(table: CoefficientTable) -> float | None:
    """Log-log slope of the shell-maximum coefficient profile.

    Shells of index radius below 2 anchor the overall size and are excluded
    from the fit; shells within rounding error of zero are dropped.  Returns
    None for flat slices whose off-center coefficients are all noise, where
    no decay exponent is measurable.
    """
    prof = table.decay_profile()
    if not prof:
        return None
    peak = max(prof.values())
    base = prof.get(0, peak)
    tail = {r: v for r, v in prof.items() if r >= 2 and v > 1e-12 * peak}
    if not tail or max(tail.values()) <= 1e-7 * base:
        return None
    if len(tail) < 2:
        return None
    rs = np.array(sorted(tail), dtype=float)
    vals = np.array([tail[int(r)] for r in rs])
    return float(np.polyfit(np.log(rs), np.log(vals), 1)[0])


def reconstruction_error(
    table: CoefficientTable,
    a: SymbolSpec,
    j1: int,
    j2: int,
    lam: float,
    partition: PartitionReport | None = None,
    points: int = 240,
) -> float:
    """Relative sup error of the resummed series against the quotient.

    Measured on the product of the window plateaus, where the profiles are
    identically one and the series is directly comparable to the symbol over
    the scale average.
    """
    scale = 2.0**lam
    m = max(abs(j1), abs(j2))
    us = []
    for j in (j1, j2):
        lo, hi = window_plateau(j)
        us.append(lo + (np.arange(points) + 0.5) * (hi - lo) / points)
    u1, u2 = us
    q = _quotient(a, u1, u2, scale, m, partition)
    rec = table.reconstruct(j1, j2, lam, scale * u1, scale * u2)
    ref = max(float(np.max(np.abs(q))), np.finfo(float).tiny)
    return float(np.max(np.abs(rec - q))) / ref


@dataclass(frozen=True)
class SplitSymbols:
    m1: SymbolSpec
    m2: SymbolSpec
    m3: SymbolSpec
    separation: int
    achieved_error: float
    budget: float
    budget_met: bool
    errors_by_range: dict


def _is_constant(a: SymbolSpec) -> bool:
    if a.kind == "trivial":
        return True
    if a.kind == "tabulated":
        return bool(np.all(a.table == a.table.flat[0]))
    return False


def _constant_value(a: SymbolSpec) -> complex:
    return 1.0 + 0.0j if a.kind == "trivial" else complex(a.table.flat[0])


def split_product(
    a: SymbolSpec,
    b: SymbolSpec,
    separation: int = 3,
    budget: float = 1e-3,
    *,
    m: int = 4,
    q: int = 4,
    n: int = 64,
    n_range: int = 30,
    ranges: tuple[int, ...] = (5, 10, 20, 30),
    samples: int = _FIT_SAMPLES,
) -> SplitSymbols:
    """Three-way scale split of the product a(x1, x2) b(x2, x3).

    The first piece collects the window slices whose a-side scale exceeds
    the b-side scale by at least the separation, the second is the mirror
    image, and the diagonal band is the exact complement, so the three
    pieces always sum to the product.  The first two pieces are assembled
    through truncated modulation series; the reported errors measure the
    truncation at each retained index range, relative to the size of the
    product.
    """
    if separation < 2:
        raise ValueError("scale separation must be at least 2")
    if a.d != 2 or b.d != 2:
        raise ValueError("split factors must have arity 2")
    grid = TorusGrid(n)
    xi = grid.frequencies
    xif = xi.astype(float)

    if _is_constant(a) and _is_constant(b):
        # constants carry no scale content, so the diagonal band is everything
        cab = _constant_value(a) * _constant_value(b)
        zero = SymbolSpec(d=3, kind="tabulated", table=np.zeros((n, n, n), dtype=complex))
        full = SymbolSpec(d=3, kind="tabulated",
                          table=np.full((n, n, n), cab, dtype=complex))
        errors = {r: 0.0 for r in sorted(set(ranges) | {n_range})}
        return SplitSymbols(m1=zero, m2=zero, m3=full, separation=separation,
                            achieved_error=0.0, budget=budget, budget_met=True,
                            errors_by_range=errors)

    ann = scale_average(m)
    ann_lat = ann(xif[:, None], xif[None, :])
    live = ann_lat > 0.0
    safe = np.where(live, ann_lat, 1.0)
    a_lat = eval_symbol_grid(a, xi[:, None], xi[None, :])
    b_lat = eval_symbol_grid(b, xi[:, None], xi[None, :])
    att_a = np.where(live, a_lat / safe, 0.0)
    att_b = np.where(live, b_lat / safe, 0.0)

    nodes = _lambda_nodes(m, n // 2, q)
    subranges = sorted(set(r for r in ranges if r <= n_range) | {n_range})
    js = [j for j in range(-m, m + 1) if j != 0]
    pairs = [(p, r) for p in js for r in js if max(abs(p), abs(r)) == m]

    solvers = {j: _axis_solver(j, n_range, samples) for j in js}
    # the scale average is homogeneous of degree zero and even in each
    # variable, so its table on a window-pair sample grid is independent of
    # the scale and of the signs of the window indices
    ann_tabs: dict[tuple[int, int], Array] = {}

    def ann_table(j1: int, j2: int) -> Array:
        key = (abs(j1), abs(j2))
        if key not in ann_tabs:
            u1 = solvers[abs(j1)][0]
            u2 = solvers[abs(j2)][0]
            ann_tabs[key] = ann(u1[:, None], u2[None, :])
        t = ann_tabs[key]
        if j1 < 0:
            t = t[::-1, :]
        if j2 < 0:
            t = t[:, ::-1]
        return t

    def side_levels(att: Array, spec: SymbolSpec) -> tuple[dict, dict]:
        direct: dict[int, Array] = {}
        series: dict[int, dict[int, Array]] = {}
        for lam in nodes:
            level = math.floor(lam + 1e-9)
            scale = 2.0**lam
            profs = {j: window_profile(j, xif * 2.0 ** (-lam)) for j in js}
            for j1, j2 in pairs:
                w1, w2 = profs[j1], profs[j2]
                if not (np.any(w1) and np.any(w2)):
                    continue
                if level not in direct:
                    direct[level] = np.zeros((n, n), dtype=complex)
                    series[level] = {r: np.zeros((n, n), dtype=complex)
                                     for r in subranges}
                direct[level] += att * np.outer(w1, w2) / q
                u1, wt1, b1 = solvers[j1]
                u2, wt2, b2 = solvers[j2]
                av = eval_symbol_continuous(spec, scale * u1[:, None],
                                            scale * u2[None, :])
                qv = av / ann_table(j1, j2)
                wprod = wt1[:, None] * wt2[None, :]
                cstar = complex(np.sum(qv * wprod) / np.sum(wprod))
                c = b1 @ (qv - cstar) @ b2.T
                c[n_range, n_range] += cstar
                e1 = _mode_matrix(j1, lam, xif, n_range)
                e2 = _mode_matrix(j2, lam, xif, n_range)
                for r in subranges:
                    sel = slice(n_range - r, n_range + r + 1)
                    series[level][r] += (e1[:, sel] @ c[sel, sel]) @ e2[:, sel].T / q
        return direct, series

    a_dir, a_ser = side_levels(att_a, a)
    b_dir, b_ser = side_levels(att_b, b)

    def assemble(aside: dict, bside: dict) -> tuple[Array, Array]:
        levels = sorted(set(aside) | set(bside))
        zero = np.zeros((n, n), dtype=complex)
        cum: dict[int, Array] = {}
        run = zero
        for lv in levels:
            run = run + bside.get(lv, zero)
            cum[lv] = run
        total = run
        out1 = np.zeros((n, n, n), dtype=complex)
        out2 = np.zeros((n, n, n), dtype=complex)
        for lv, alv in aside.items():
            below = [l for l in levels if l <= lv - separation]
            if below:
                out1 += np.einsum("ij,jk->ijk", alv, cum[below[-1]])
            upto = [l for l in levels if l <= lv + separation - 1]
            tail = total - (cum[upto[-1]] if upto else zero)
            if np.any(tail):
                out2 += np.einsum("ij,jk->ijk", alv, tail)
        return out1, out2

    m1_dir, m2_dir = assemble(a_dir, b_dir)
    ab_cube = np.einsum("ij,jk->ijk", a_lat, b_lat)
    m3_tab = ab_cube - m1_dir - m2_dir
    ref = max(float(np.max(np.abs(ab_cube))), np.finfo(float).tiny)

    errors: dict[int, float] = {}
    keep: dict[int, Array] = {}
    for r in subranges:
        m1_s, m2_s = assemble({lv: a_ser[lv][r] for lv in a_ser},
                              {lv: b_ser[lv][r] for lv in b_ser})
        errors[r] = float(np.max(np.abs(m1_s + m2_s + m3_tab - ab_cube))) / ref
        if r == n_range:
            keep[1], keep[2] = m1_s, m2_s

    achieved = errors[n_range]
    tag = f"{a.name or 'a'}x{b.name or 'b'}_sep{separation}"
    return SplitSymbols(
        m1=SymbolSpec(d=3, kind="tabulated", table=keep[1], name=f"m1_{tag}"),
        m2=SymbolSpec(d=3, kind="tabulated", table=keep[2], name=f"m2_{tag}"),
        m3=SymbolSpec(d=3, kind="tabulated", table=m3_tab, name=f"m3_{tag}"),
        separation=separation,
        achieved_error=achieved,
        budget=budget,
        budget_met=achieved <= budget,
        errors_by_range=errors,
    )


@dataclass(frozen=True)
class TaylorSplit:
    """Fine-scale window expanded in the coarse variable around the sum.

    terms[l] is the literal l-th expansion term on the product lattice;
    factors[l] = 2**((k_coarse - k_fine) l) is its expected size, so the
    rescaled terms returned by scaled_terms() are comparable across scale
    gaps.  The remainder is the exact difference between the window column
    and the sum of the terms; the constant normalizes its sup norm by the
    expected power of the scale gap.
    """

    order: int
    k_fine: int
    k_coarse: int
    j2: int
    kappa: float
    xi2: Array
    xi3: Array
    window_values: Array
    terms: tuple
    factors: tuple
    remainder: Array
    constant: float
    interp_error: float

    def reconstruction_gap(self) -> float:
        total = self.remainder.copy()
        for t in self.terms:
            total = total + t
        return float(np.max(np.abs(self.window_values[:, None] - total)))

    def scaled_terms(self) -> tuple:
        gap = self.k_fine - self.k_coarse
        return tuple(t * 2.0 ** (gap * l) for l, t in enumerate(self.terms))


def _window_series(j: int, fine: int = 4096, width: float = 3.0):
    """Trigonometric representation of one window profile on a wide period."""
    u0 = -width / 2.0
    samples = u0 + np.arange(fine) * (width / fine)
    vals = window_profile(j, samples)
    coeffs = np.fft.fft(vals)
    nus = np.fft.fftfreq(fine, d=width / fine)
    keep = np.abs(coeffs) > 1e-16 * np.max(np.abs(coeffs))
    keep[fine // 2] = False  # drop the unpaired top mode
    return coeffs[keep] / fine, nus[keep], u0


def _series_derivative(series, u: Array, order: int) -> Array:
    coeffs, nus, u0 = series
    fac = coeffs * (2j * np.pi * nus) ** order
    out = np.empty(len(u), dtype=complex)
    for start in range(0, len(u), 512):
        chunk = u[start : start + 512]
        e = np.exp(2j * np.pi * np.outer(chunk - u0, nus))
        out[start : start + 512] = e @ fac
    return np.real(out)


def taylor_split(
    m_tilde: int,
    k_fine: int,
    k_coarse: int,
    *,
    j2: int = 1,
    kappa: float = 0.0,
    du: float = 0.01,
    pad: float = 0.06,
    fine: int = 4096,
) -> TaylorSplit:
    """Expand a fine-scale window in the coarse variable around the sum.

    Writes w(x2) as the first m_tilde terms of its expansion around x2 + x3
    plus the exact remainder.  The x2 and x3 sample lattices are nested in a
    single master lattice of spacing 2**k_coarse * du, so every sum x2 + x3
    is an exact lattice point and the window and all derivative values come
    from one set of series evaluations.
    """
    if m_tilde < 1:
        raise ValueError("need at least one main term")
    if k_fine <= k_coarse:
        raise ValueError("fine scale must exceed the coarse scale")
    if abs(j2) != 1:
        raise ValueError("only the innermost windows appear against a coarser scale")
    lam = k_fine + kappa
    scale2 = 2.0**lam
    lo, hi = window_support(j2)
    delta = 2.0**k_coarse * du
    step2 = max(1, round(2.0 ** (k_fine - k_coarse + kappa)))
    u_step2 = step2 * delta / scale2

    def lattice(step: float) -> tuple[Array, int]:
        i0 = int(round((pad - lo) / step))
        count = i0 + int(math.ceil((hi + pad) / step)) + 1
        return np.arange(count), i0

    base2, i0_2 = lattice(u_step2)
    base3, i0_3 = lattice(du)
    u2 = (base2 - i0_2) * u_step2
    u3 = (base3 - i0_3) * du
    xi2 = delta * step2 * (base2 - i0_2)
    xi3 = delta * (base3 - i0_3)

    s_idx = step2 * base2[:, None] + base3[None, :]
    s_vals = delta * (np.arange(int(s_idx.max()) + 1) - (step2 * i0_2 + i0_3))

    series = _window_series(j2, fine=fine)
    u_master = s_vals / scale2
    derivs = [_series_derivative(series, u_master, l) * scale2 ** (-l)
              for l in range(m_tilde)]
    w_window = derivs[0][s_idx[:, i0_3]]  # the x3 = 0 column is the window
    direct = window_profile(j2, u2)
    interp_error = float(np.max(np.abs(w_window - direct)))

    gap = k_coarse - k_fine
    terms = []
    factors = []
    for l in range(m_tilde):
        t_l = ((-xi3[None, :]) ** l / math.factorial(l)) * derivs[l][s_idx]
        terms.append(t_l)
        factors.append(2.0 ** (gap * l))
    remainder = w_window[:, None] - sum(terms)
    constant = float(np.max(np.abs(remainder)) / 2.0 ** (gap * m_tilde))
    return TaylorSplit(
        order=m_tilde,
        k_fine=k_fine,
        k_coarse=k_coarse,
        j2=j2,
        kappa=kappa,
        xi2=xi2,
        xi3=xi3,
        window_values=w_window,
        terms=tuple(terms),
        factors=tuple(factors),
        remainder=remainder,
        constant=constant,
        interp_error=interp_error,
    )


@dataclass(frozen=True)
class IdentityReport:
    lhs: complex
    rhs: complex
    deviation: float
    scale: float

    def within(self, tol: float) -> bool:
        return self.deviation <= tol * max(self.scale, 1.0)


def l1_bump(grid: TorusGrid, k: int, kind: str = "smooth", shift: float = 0.0) -> SampledFunction:
    """Mass-one bump supported on an interval of length 2**k (k <= 0)."""
    cells = grid.n * 2.0**k
    if k > 0 or cells < 1 or cells != int(cells):
        raise ValueError("bump length must be a dyadic fraction resolvable on the grid")
    u = ((grid.points - shift) % 1.0) / 2.0**k
    inside = u < 1.0
    if kind == "smooth":
        raw = _smoothstep(6 * u) * _smoothstep(6 * (1.0 - u))
    elif kind == "indicator":
        raw = np.ones_like(u)
    elif kind == "ramp":
        raw = u + 0.25
    else:
        raise ValueError(f"unknown bump kind {kind!r}")
    raw = np.where(inside, raw, 0.0)
    vals = raw * (grid.n / np.sum(raw))
    return SampledFunction(grid, vals.astype(complex))


def _negate_spectrum(c: Array) -> Array:
    """Coefficients of x -> -x in the cyclic sense, fftshifted layout."""
    n = len(c)
    h = n // 2
    return c[(2 * h - np.arange(n)) % n]


def verify_calc1(
    eta1: SampledFunction,
    eta2: SampledFunction,
    eta3: SampledFunction,
    eta4: SampledFunction,
    eta14: SampledFunction,
    eta23: SampledFunction,
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    f4: SampledFunction,
) -> IdentityReport:
    """Constrained frequency sum versus nested grid convolutions.

    The left side groups the zero-sum frequency constraint by the (1,4) pair
    sum and is evaluated with direct polynomial convolutions; the right side
    is the grid integral of the product of convolved pairs.  The bandwidth
    budget guarantees no wraparound solutions exist, so both sides compute
    the same finite sum along independent routes.
    """
    grid = f1.grid
    h = grid.n // 2
    g = [dft(fi).coeffs * dft(ei).coeffs
         for fi, ei in ((f1, eta1), (f2, eta2), (f3, eta3), (f4, eta4))]
    check_bandwidth_budget(grid, *g)

    # for each pair sum: correlate the (1,4) and (2,3) product spectra
    p14 = np.convolve(g[0], g[3])[h : 3 * h]
    p23 = np.convolve(g[1], g[2])[h : 3 * h]
    e14 = dft(eta14).coeffs
    e23 = dft(eta23).coeffs
    lhs = complex(np.sum(p14 * e14 * _negate_spectrum(p23 * e23)))

    gs = [idft(Spectrum(grid, c)) for c in g]
    left = convolve(SampledFunction(grid, gs[0].values * gs[3].values), eta14)
    right = convolve(SampledFunction(grid, gs[1].values * gs[2].values), eta23)
    rhs = pair(left, right)
    scale = max(abs(lhs), abs(rhs))
    return IdentityReport(lhs=lhs, rhs=rhs, deviation=abs(lhs - rhs), scale=scale)


def _translate_transform(f: SampledFunction, bump: SampledFunction) -> Array:
    """T[c] = (1/n) sum_y f(y) bump(c - y), by direct matrix contraction."""
    n = f.grid.n
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return (bump.values[idx] @ f.values) / n


def verify_calc2(
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    phi1: SampledFunction,
    phi2: SampledFunction,
    phi3: SampledFunction,
    k: int,
) -> IdentityReport:
    """Convolution-product integral versus the shift-averaged tile sum.

    With the shift average discretized over exactly the grid offsets inside
    one tile, every grid point occurs as a tile center once per shift, so
    the two sides are the same finite sum reorganized and agree to roundoff.
    """
    grid = f1.grid
    n = grid.n
    cells = n * 2.0**k
    if k > 0 or cells < 1 or cells != int(cells):
        raise ValueError("tile length must be a dyadic fraction resolvable on the grid")
    cells = int(cells)
    count = 2**-k

    lhs_fn = np.ones(n, dtype=complex)
    for f, p in ((f1, phi1), (f2, phi2), (f3, phi3)):
        lhs_fn = lhs_fn * convolve(f, p).values
    lhs = complex(np.sum(lhs_fn) / n)

    size = 2.0**k
    ms = [_translate_transform(f, p) for f, p in ((f1, phi1), (f2, phi2), (f3, phi3))]
    acc = 0.0 + 0.0j
    for mshift in range(cells):
        centers = np.arange(count) * cells + mshift
        prods = ms[0][centers] * ms[1][centers] * ms[2][centers]
        # three half-power pairing weights against one inverse half power
        acc += size * np.sum(prods)
    rhs = complex(acc / cells)
    scale = max(abs(lhs), abs(rhs))
    return IdentityReport(lhs=lhs, rhs=rhs, deviation=abs(lhs - rhs), scale=scale)


def verify_calc3(
    psi1: SampledFunction,
    psi4: SampledFunction,
    psi14: SampledFunction,
    psi2: SampledFunction,
    psi3: SampledFunction,
    psi23: SampledFunction,
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    f4: SampledFunction,
    k_fine: int,
    k_coarse: int,
) -> IdentityReport:
    """Six-bump constrained frequency sum versus the double tile sum.

    The inner tile sum at the coarse scale produces an auxiliary function
    which the outer fine-scale tile sum pairs against a reflected bump.
    Both tile sums carry an inverse square-root length weight per tile so
    that the shift averages collapse exactly; the left side is computed
    purely on the frequency side for independence.
    """
    grid = f1.grid
    n = grid.n
    if k_fine <= k_coarse:
        raise ValueError("fine scale must exceed the coarse scale")
    for kk in (k_fine, k_coarse):
        if kk < 0 or n % 2**kk:
            raise ValueError("scales must resolve to whole grid cells")

    spectra = [dft(fv).coeffs * dft(pv).coeffs
               for fv, pv in ((f1, psi1), (f2, psi2), (f3, psi3), (f4, psi4))]
    g = [idft(Spectrum(grid, c)).values for c in spectra]
    p14 = dft(SampledFunction(grid, g[0] * g[3])).coeffs
    p23 = dft(SampledFunction(grid, g[1] * g[2])).coeffs
    e14 = dft(psi14).coeffs
    e23 = dft(psi23).coeffs
    lhs = complex(np.sum(p14 * e14 * _negate_spectrum(p23 * e23)))

    # literal double tile sum with direct translate transforms
    len_i = 2.0**-k_fine
    len_j = 2.0**-k_coarse
    cells_i = int(round(n * len_i))
    cells_j = int(round(n * len_j))
    count_i = 2**k_fine
    count_j = 2**k_coarse

    m2 = _translate_transform(f2, psi2)
    m3 = _translate_transform(f3, psi3)
    xs = np.arange(n)
    b = np.zeros(n, dtype=complex)
    for mshift in range(cells_j):
        centers = np.arange(count_j) * cells_j + mshift
        amp = len_j ** (-0.5) * (len_j**0.5 * m2[centers]) * (len_j**0.5 * m3[centers])
        b += (len_j**0.5 * psi23.values[(xs[:, None] - centers[None, :]) % n]) @ amp
    b /= cells_j

    m1 = _translate_transform(f1, psi1)
    m4 = _translate_transform(f4, psi4)
    # reflected bump: the auxiliary pairing picks up psi14(y - center)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    mb = (psi14.values[idx] @ b) / n
    acc = 0.0 + 0.0j
    for mshift in range(cells_i):
        centers = np.arange(count_i) * cells_i + mshift
        acc += np.sum(
            len_i ** (-0.5)
            * (len_i**0.5 * m1[centers])
            * (len_i**0.5 * mb[centers])
            * (len_i**0.5 * m4[centers])
        )
    rhs = complex(acc / cells_i)
    scale = max(abs(lhs), abs(rhs))
    return IdentityReport(lhs=lhs, rhs=rhs, deviation=abs(lhs - rhs), scale=scale)
