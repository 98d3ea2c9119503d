"""Trilinear multiplier operators: reference and fast evaluation paths.

The naive path is the permanent trust anchor: a literal full-box frequency
sum, out(eta) = sum over all integer tuples xi1+xi2+xi3 = eta of
m(xi) f1^(xi1) f2^(xi2) f3^(xi3), executed over the whole N^3 box with no
support shortcuts, so its instrumented cost is honestly N^3 tuple units.
The separable path exploits the flag factorization a(xi1,xi2) b(xi2,xi3):
for each xi2 the inner sums over xi1 and xi3 are inverse transforms, giving
|supp f2^| * O(N log N) work.

Frequency sums are exact integer sums: a bandwidth budget (total input
bandwidth below N/2) rules out wraparound instead of zero-padding, which
keeps every identity exact and the costs transparent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import SampledFunction, Spectrum, TorusGrid, dft, idft, pair
from .symbols import SymbolSpec, eval_symbol_grid

Array = np.ndarray
Evaluator = Callable[[Array, Array, Array], Array]


@dataclass(frozen=True)
class TrilinearResult:
    output: SampledFunction
    method: str  # "naive" | "separable"
    flops: int  # instrumented cost estimate in tuple/butterfly units


@dataclass(frozen=True)
class FormValue:
    value: complex
    which: str  # "lambda" | "adjoint1..4" | "separable"


_NOISE_RTOL = 1e-12


def clean_coeffs(c: Array, rtol: float = _NOISE_RTOL) -> Array:
    """Zero out coefficients below rtol * peak.

    FFT rounding leaves ~1e-17 dust in every bin; snapping it to exact zero
    lets support bookkeeping and window containment checks be exact.
    """
    mags = np.abs(c)
    peak = float(np.max(mags)) if c.size else 0.0
    if peak == 0.0:
        return np.zeros_like(c)
    return np.where(mags > rtol * peak, c, 0.0)


def exact_bandwidth(c: Array, rtol: float = _NOISE_RTOL) -> int:
    """Largest |xi| carrying a coefficient above rtol * peak (fftshifted layout).

    The relative floor discards FFT rounding noise so that genuinely
    bandlimited inputs report their true band.
    """
    n = len(c)
    mags = np.abs(c)
    peak = float(np.max(mags)) if n else 0.0
    if peak == 0.0:
        return 0
    live = np.nonzero(mags > rtol * peak)[0]
    return int(np.max(np.abs(live - n // 2)))


def check_bandwidth_budget(grid: TorusGrid, *coeff_arrays: Array) -> None:
    """Total bandwidth below N/2 so integer frequency sums cannot wrap."""
    total = sum(exact_bandwidth(c) for c in coeff_arrays)
    if total >= grid.n // 2:
        raise ValueError(
            f"bandwidth budget violated: total {total} >= {grid.n // 2}; "
            "frequency wraparound would corrupt the torus model"
        )


def symbol_evaluator(m: SymbolSpec, grid: TorusGrid) -> Evaluator:
    if m.d != 3:
        raise ValueError("trilinear evaluation needs an arity-3 symbol")
    if m.box_n is not None and m.box_n < grid.n:
        raise ValueError(f"symbol tabulated on a box of {m.box_n} < grid size {grid.n}")

    def ev(x1: Array, x2: Array, x3: Array) -> Array:
        return eval_symbol_grid(m, x1, x2, x3)

    return ev


def adjoint_evaluator(ev: Evaluator, j: int, grid: TorusGrid) -> Evaluator:
    """Symbol of the j-th adjoint.

    With eta the adjoint's own frequencies, the original tuple is recovered
    by placing -eta1-eta2-eta3 in slot j; arguments off the grid box carry
    zero input weight under the budget and are masked to zero.
    """
    half = grid.n // 2

    def masked(a1: Array, a2: Array, a3: Array) -> Array:
        inbox = (
            (a1 >= -half) & (a1 < half)
            & (a2 >= -half) & (a2 < half)
            & (a3 >= -half) & (a3 < half)
        )
        vals = ev(
            np.clip(a1, -half, half - 1),
            np.clip(a2, -half, half - 1),
            np.clip(a3, -half, half - 1),
        )
        return np.where(inbox, vals, 0.0)

    if j == 1:
        return lambda x1, x2, x3: masked(-x1 - x2 - x3, x1, x2)
    if j == 2:
        return lambda x1, x2, x3: masked(x1, -x1 - x2 - x3, x2)
    if j == 3:
        return lambda x1, x2, x3: masked(x1, x2, -x1 - x2 - x3)
    raise ValueError("adjoint index must be 1, 2 or 3")


def naive_output_coeffs(ev: Evaluator, grid: TorusGrid, c1: Array, c2: Array, c3: Array) -> Array:
    """Full-box reference sum; O(N^3) executed work, no support shortcuts."""
    n = grid.n
    half = n // 2
    c1, c2, c3 = clean_coeffs(c1), clean_coeffs(c2), clean_coeffs(c3)
    xi = np.arange(n) - half
    x2m, x3m = np.meshgrid(xi, xi, indexing="ij")
    w23 = np.outer(c2, c3)
    # out_ext index j holds eta = j - 3n/2; under the budget only the
    # central window [n, 2n) can receive nonzero mass
    out_ext = np.zeros(3 * n, dtype=complex)
    acc = np.empty(2 * n - 1, dtype=complex)
    for i1 in range(n):
        plane = ev(np.full_like(x2m, xi[i1]), x2m, x3m) * w23
        acc[:] = 0.0
        for i2 in range(n):
            acc[i2 : i2 + n] += plane[i2]
        out_ext[i1 : i1 + 2 * n - 1] += c1[i1] * acc
    leak = max(np.max(np.abs(out_ext[:n])), np.max(np.abs(out_ext[2 * n :])))
    if leak != 0.0:
        raise AssertionError("frequency mass escaped the central window despite the budget")
    return out_ext[n : 2 * n]


def apply_trilinear_naive(
    m: SymbolSpec, f1: SampledFunction, f2: SampledFunction, f3: SampledFunction
) -> TrilinearResult:
    grid = _shared_grid(f1, f2, f3)
    s1, s2, s3 = dft(f1), dft(f2), dft(f3)
    check_bandwidth_budget(grid, s1.coeffs, s2.coeffs, s3.coeffs)
    ev = symbol_evaluator(m, grid)
    out = naive_output_coeffs(ev, grid, s1.coeffs, s2.coeffs, s3.coeffs)
    return TrilinearResult(idft(Spectrum(grid, out)), "naive", grid.n**3)


def apply_flag_separable(
    a: SymbolSpec, b: SymbolSpec, f1: SampledFunction, f2: SampledFunction, f3: SampledFunction
) -> TrilinearResult:
    if a.d != 2 or b.d != 2:
        raise ValueError("separable path needs two arity-2 factors")
    grid = _shared_grid(f1, f2, f3)
    n = grid.n
    for factor in (a, b):
        if factor.box_n is not None and factor.box_n < n:
            raise ValueError(f"factor tabulated on a box of {factor.box_n} < grid size {n}")
    s1, s2, s3 = dft(f1), dft(f2), dft(f3)
    check_bandwidth_budget(grid, s1.coeffs, s2.coeffs, s3.coeffs)

    mags2 = np.abs(s2.coeffs)
    support2 = np.nonzero(mags2 > 1e-12 * (np.max(mags2) if mags2.size else 0.0))[0]
    xi = np.arange(n) - n // 2
    out = np.zeros(n, dtype=complex)
    if len(support2):
        xi2 = xi[support2]  # (M,)
        a_rows = eval_symbol_grid(a, xi[None, :], xi2[:, None])  # a(xi1, xi2)
        b_rows = eval_symbol_grid(b, xi2[:, None], xi[None, :])  # b(xi2, xi3)
        inner1 = np.fft.ifft(np.fft.ifftshift(a_rows * s1.coeffs[None, :], axes=1), axis=1) * n
        inner3 = np.fft.ifft(np.fft.ifftshift(b_rows * s3.coeffs[None, :], axes=1), axis=1) * n
        phases = np.exp(2j * np.pi * np.outer(xi2, grid.points))
        out = np.sum(s2.coeffs[support2][:, None] * phases * inner1 * inner3, axis=0)
    flops = len(support2) * (2 * n * int(np.log2(n)) + 3 * n)
    return TrilinearResult(SampledFunction(grid, out), "separable", flops)


def four_form(
    m: SymbolSpec,
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    f4: SampledFunction,
) -> FormValue:
    grid = _shared_grid(f1, f2, f3, f4)
    check_bandwidth_budget(grid, *(dft(f).coeffs for f in (f1, f2, f3, f4)))
    result = apply_trilinear_naive(m, f1, f2, f3)
    return FormValue(pair(result.output, f4), "lambda")


def adjoint_form(
    m: SymbolSpec,
    j: int,
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    f4: SampledFunction,
) -> FormValue:
    """The same four-linear value computed through the j-th adjoint route.

    Inputs are given in their original slots; the routing places the dual
    function per the adjoint's definition (slot j pairs with the output).
    """
    if j == 4:
        return FormValue(four_form(m, f1, f2, f3, f4).value, "adjoint4")
    grid = _shared_grid(f1, f2, f3, f4)
    spectra = [dft(f).coeffs for f in (f1, f2, f3, f4)]
    check_bandwidth_budget(grid, *spectra)
    ev = adjoint_evaluator(symbol_evaluator(m, grid), j, grid)
    args = {1: (f2, f3, f4), 2: (f1, f3, f4), 3: (f1, f2, f4)}[j]
    dual = (f1, f2, f3)[j - 1]
    out = naive_output_coeffs(ev, grid, *(dft(g).coeffs for g in args))
    return FormValue(pair(idft(Spectrum(grid, out)), dual), f"adjoint{j}")


def flag_form(
    a: SymbolSpec,
    b: SymbolSpec,
    f1: SampledFunction,
    f2: SampledFunction,
    f3: SampledFunction,
    f4: SampledFunction,
) -> FormValue:
    """Form value through the separable fast path (independent fifth route)."""
    grid = _shared_grid(f1, f2, f3, f4)
    check_bandwidth_budget(grid, *(dft(f).coeffs for f in (f1, f2, f3, f4)))
    result = apply_flag_separable(a, b, f1, f2, f3)
    return FormValue(pair(result.output, f4), "separable")


def _shared_grid(*fs: SampledFunction) -> TorusGrid:
    grid = fs[0].grid
    if any(f.grid != grid for f in fs[1:]):
        raise ValueError("all inputs must share one grid")
    return grid
