"""Symbols on integer frequency tuples and their derivative-decay checks.

A symbol is either the constant 1 ("trivial"), a dense table over the
centered frequency box ("tabulated", optionally with a continuous extension
for off-lattice work), or a flag product a(xi1,xi2)*b(xi2,xi3) of two
arity-2 symbols. The derivative-decay check measures the constants
sup |xi|^{|alpha|} |D^alpha m| with composed central differences on the
lattice, away from the origin where such symbols are allowed to be rough.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Array = np.ndarray

ORIGIN_EXCLUSION = 4  # |xi|_inf below this is never tested


@dataclass(frozen=True)
class SymbolSpec:
    d: int
    kind: str  # "trivial" | "tabulated" | "flag"
    table: Optional[Array] = None  # axis index i <-> xi = i - n/2
    factors: Optional[tuple["SymbolSpec", "SymbolSpec"]] = None
    func: Optional[Callable[..., Array]] = None  # continuous extension, vectorized
    name: str = ""

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ValueError(f"symbol arity must be 1, 2 or 3, got {self.d}")
        if self.kind == "flag":
            if self.d != 3 or self.factors is None:
                raise ValueError("flag symbols have arity 3 and two factors")
            if any(f.d != 2 for f in self.factors):
                raise ValueError("flag factors must have arity 2")
        elif self.kind == "tabulated":
            if self.table is None or self.table.ndim != self.d:
                raise ValueError("tabulated symbol needs a table of matching arity")
            n = self.table.shape[0]
            if any(s != n for s in self.table.shape) or n & (n - 1):
                raise ValueError("symbol table must be a power-of-two hypercube")
        elif self.kind != "trivial":
            raise ValueError(f"unknown symbol kind {self.kind!r}")

    @property
    def box_n(self) -> Optional[int]:
        if self.kind == "tabulated":
            return self.table.shape[0]
        if self.kind == "flag":
            sizes = [f.box_n for f in self.factors if f.box_n is not None]
            return min(sizes) if sizes else None
        return None

    def to_json_dict(self) -> dict:
        if self.kind != "tabulated":
            raise ValueError("only tabulated symbols serialize to the table schema")
        return {
            "d": self.d,
            "shape": list(self.table.shape),
            "re": np.real(self.table).ravel().tolist(),
            "im": np.imag(self.table).ravel().tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SymbolSpec":
        shape = tuple(d["shape"])
        table = (np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)).reshape(shape)
        return SymbolSpec(d=int(d["d"]), kind="tabulated", table=table)


@dataclass(frozen=True)
class MihlinReport:
    max_order: int
    budget: float
    constants: dict = field(default_factory=dict)  # alpha tuple -> measured constant
    passed: bool = False

    def constant(self, alpha: tuple) -> float:
        return self.constants[tuple(alpha)]


def trivial_symbol(d: int = 3) -> SymbolSpec:
    return SymbolSpec(d=d, kind="trivial", name="trivial" if d == 3 else f"trivial{d}")


def flag_symbol(a: SymbolSpec, b: SymbolSpec, name: str = "") -> SymbolSpec:
    return SymbolSpec(d=3, kind="flag", factors=(a, b), name=name or f"flag({a.name},{b.name})")


def tabulate(func: Callable[..., Array], d: int, n: int, name: str = "") -> SymbolSpec:
    """Dense table of a continuous symbol over {-n/2..n/2-1}^d, keeping func."""
    xi = np.arange(n) - n // 2
    grids = np.meshgrid(*([xi] * d), indexing="ij")
    table = np.asarray(func(*[g.astype(float) for g in grids]), dtype=complex)
    return SymbolSpec(d=d, kind="tabulated", table=table, func=func, name=name)


def eval_symbol(m: SymbolSpec, xi: tuple) -> complex:
    if len(xi) != m.d:
        raise ValueError(f"expected {m.d} frequencies, got {len(xi)}")
    arrs = [np.asarray([x], dtype=int) for x in xi]
    return complex(eval_symbol_grid(m, *arrs)[0])


def eval_symbol_grid(m: SymbolSpec, *xi: Array) -> Array:
    """Vectorized lattice evaluation; xi are integer arrays of a common shape."""
    if len(xi) != m.d:
        raise ValueError(f"expected {m.d} frequency arrays, got {len(xi)}")
    if m.kind == "trivial":
        return np.ones(np.broadcast(*xi).shape, dtype=complex)
    if m.kind == "flag":
        a, b = m.factors
        return eval_symbol_grid(a, xi[0], xi[1]) * eval_symbol_grid(b, xi[1], xi[2])
    n = m.table.shape[0]
    idx = []
    for x in xi:
        i = np.asarray(x, dtype=int) + n // 2
        if np.any(i < 0) or np.any(i >= n):
            raise ValueError(f"frequency outside the tabulated box [-{n // 2}, {n // 2})")
        idx.append(i)
    return m.table[tuple(idx)]


def eval_symbol_continuous(m: SymbolSpec, *xi: Array) -> Array:
    """Off-lattice evaluation through the recorded continuous extensions."""
    if m.kind == "trivial":
        return np.ones(np.broadcast(*xi).shape, dtype=complex)
    if m.kind == "flag":
        a, b = m.factors
        return eval_symbol_continuous(a, xi[0], xi[1]) * eval_symbol_continuous(b, xi[1], xi[2])
    if m.func is None:
        raise ValueError("tabulated symbol has no continuous extension")
    return np.asarray(m.func(*[np.asarray(x, dtype=float) for x in xi]), dtype=complex)


def _central_diff(table: Array, axis: int) -> Array:
    # (m(xi + e) - m(xi - e)) / 2; output loses one cell at each end of axis
    fwd = np.take(table, range(2, table.shape[axis]), axis=axis)
    bwd = np.take(table, range(0, table.shape[axis] - 2), axis=axis)
    return (fwd - bwd) / 2.0


def mihlin_check(
    m: SymbolSpec,
    max_order: int = 4,
    budget: float = 50.0,
    min_abs: int = ORIGIN_EXCLUSION,
    max_abs: Optional[int] = None,
) -> MihlinReport:
    """Measure sup |xi|^{|alpha|} |D^alpha m(xi)| for all |alpha| <= max_order.

    Differences are composed central differences on the integer lattice; the
    sup runs over lattice points with |xi|_inf >= min_abs (and <= max_abs if
    given) that keep every difference stencil inside the tabulated box.
    Failing the budget is a report outcome, not an error.
    """
    if not 0 <= max_order <= 4:
        raise ValueError("max_order must lie in [0, 4]")
    if budget <= 0:
        raise ValueError("budget must be positive")
    table, half = _dense_table(m)
    axes_freq = [np.arange(s) - half for s in table.shape]
    mesh = np.meshgrid(*axes_freq, indexing="ij")
    radius = np.sqrt(sum(g.astype(float) ** 2 for g in mesh))
    inf_norm = np.max(np.abs(np.stack(mesh)), axis=0)

    constants: dict = {}
    for alpha in _multi_indices(m.d, max_order):
        diff = table
        for axis, reps in enumerate(alpha):
            for _ in range(reps):
                diff = _central_diff(diff, axis)
        # the stencil eats alpha[i] cells off each end of axis i
        sl = tuple(slice(a, s - a) for a, s in zip(alpha, table.shape))
        rad = radius[sl]
        mask = inf_norm[sl] >= min_abs
        if max_abs is not None:
            mask &= inf_norm[sl] <= max_abs
        order = sum(alpha)
        vals = np.abs(diff) * rad**order
        constants[alpha] = float(np.max(vals[mask])) if np.any(mask) else 0.0

    passed = all(c <= budget for c in constants.values())
    return MihlinReport(max_order=max_order, budget=budget, constants=constants, passed=passed)


def _dense_table(m: SymbolSpec, default_half: int = 16) -> tuple[Array, int]:
    if m.kind == "tabulated":
        return m.table, m.table.shape[0] // 2
    n = m.box_n or 2 * default_half
    xi = np.arange(n) - n // 2
    grids = np.meshgrid(*([xi] * m.d), indexing="ij")
    return eval_symbol_grid(m, *grids), n // 2


def _multi_indices(d: int, max_order: int):
    for alpha in itertools.product(range(max_order + 1), repeat=d):
        if sum(alpha) <= max_order:
            yield alpha


def _smoothstep(t: Array) -> Array:
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lo = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        hi = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return lo / (lo + hi)


def _homog0(x1: Array, x2: Array) -> Array:
    r2 = x1**2 + x2**2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r2 > 0, x1**2 / np.where(r2 > 0, r2, 1.0), 0.5)
    return out.astype(complex)


def _annular(level: int):
    # smooth radial ring: 1 on |xi| in 2^level*[1,2], half-octave transitions
    def ring(x1: Array, x2: Array) -> Array:
        r = np.sqrt(x1**2 + x2**2)
        with np.errstate(divide="ignore"):
            s = np.where(r > 0, np.log2(np.maximum(r, 1e-300)) - level, -np.inf)
        up = _smoothstep((s + 0.5) / 0.5)
        down = 1.0 - _smoothstep((s - 1.0) / 0.5)
        return (up * down).astype(complex)

    return ring


def standard_symbols(n: int = 256) -> dict[str, SymbolSpec]:
    """Named symbol catalog on the box {-n/2..n/2-1}; stable CLI identifiers."""
    cat: dict[str, SymbolSpec] = {}
    cat["trivial"] = trivial_symbol(3)
    cat["trivial2"] = trivial_symbol(2)
    cat["homog0"] = tabulate(_homog0, 2, n, name="homog0")
    for level in (3, 4, 5):
        cat[f"annular{level}"] = tabulate(_annular(level), 2, n, name=f"annular{level}")
    for aname in ("homog0", "annular4"):
        for bname in ("homog0", "annular4"):
            key = f"flag({aname},{bname})"
            cat[key] = flag_symbol(cat[aname], cat[bname], name=key)
    cat["flag(trivial,trivial)"] = flag_symbol(cat["trivial2"], cat["trivial2"], name="flag(trivial,trivial)")
    return cat
