"""Sizes, energies, and stopping-time decompositions of dyadic coefficient
families.

Two branches drive everything here. When the measured slot coincides with the
distinguished non-lacunary position the size of a family is the plain sup of
|a_J|/|J|^{1/2}; otherwise it is the sup over J of the normalized weak-L1 norm
of the local square function built from all members sitting inside J. Energies
take a sup over thresholds 2^n of 2^n times the total length of a disjoint
subcollection meeting the threshold, resolved greedily through maximal dyadic
intervals. On top of the two primitives sit a John-Nirenberg style comparison,
a local embedding test against weighted cutoffs, the greedy tree decomposition
with machine-checked postconditions, its iteration into a full partition, and
measured-inequality reports for the product estimate and the set-theoretic
size/energy bounds.

All quantities are computed on a sampled torus; integrals are grid averages
and indicator sets are unions of grid cells.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dyadic import BumpFamily, CoefficientFamily, DyadicInterval
from .grid import SampledFunction, TorusGrid, approx_cutoff, lp_norm, weak_l1_norm

__all__ = [
    "SizeEnergyParams",
    "Tree",
    "TreeDecomposition",
    "PartitionLevel",
    "InequalityReport",
    "size",
    "energy",
    "john_nirenberg_compare",
    "local_embedding_check",
    "stopping_decomposition",
    "full_partition",
    "abstract_estimate_check",
    "size_bounds_check",
    "energy_bounds_check",
]

# recorded constant of the tree-top length bound: the tops form a disjoint
# collection meeting threshold 2^(-n0-2) E, so their total length never
# exceeds 4 * 2^n0
TOP_LENGTH_CONSTANT = 4

_THIRD = Fraction(1, 3)


@dataclass(frozen=True)
class SizeEnergyParams:
    """Which slot is measured, where the non-lacunary position sits, and the
    interpolation weights of the product estimate.

    nonlacunary_j: distinguished position in {1,2,3}; slot: measured
    coefficient index in {1,2,3}. k0 tags families built from band-matched
    coefficients and is carried into reports unchanged. thetas must be exact
    rationals in [0,1) summing to 1.
    """

    nonlacunary_j: int
    slot: int
    k0: int | None = None
    thetas: tuple[Fraction, Fraction, Fraction] = (_THIRD, _THIRD, _THIRD)

    def __post_init__(self):
        if self.nonlacunary_j not in (1, 2, 3):
            raise ValueError(f"nonlacunary_j must be 1, 2, or 3, got {self.nonlacunary_j}")
        if self.slot not in (1, 2, 3):
            raise ValueError(f"slot must be 1, 2, or 3, got {self.slot}")
        if self.k0 is not None and self.k0 < 1:
            raise ValueError(f"k0 must be a positive integer, got {self.k0}")
        thetas = tuple(Fraction(t) for t in self.thetas)
        object.__setattr__(self, "thetas", thetas)
        if any(t < 0 or t >= 1 for t in thetas):
            raise ValueError("each theta must lie in [0, 1)")
        if sum(thetas) != 1:
            raise ValueError("thetas must sum to 1 exactly")

    @property
    def diagonal(self) -> bool:
        return self.slot == self.nonlacunary_j

    def for_slot(self, slot: int) -> "SizeEnergyParams":
        return SizeEnergyParams(self.nonlacunary_j, slot, self.k0, self.thetas)

    def to_json_dict(self) -> dict:
        return {
            "nonlacunary_j": self.nonlacunary_j,
            "slot": self.slot,
            "k0": self.k0,
            "thetas": [str(t) for t in self.thetas],
        }


def _cell_slice(grid: TorusGrid, iv: DyadicInterval) -> slice:
    # dyadic interval as a run of grid cells; requires the grid to resolve it
    depth = 2 ** -iv.k
    if grid.n % depth:
        raise ValueError(f"grid of {grid.n} points cannot resolve scale {iv.k}")
    step = grid.n // depth
    return slice(iv.n * step, (iv.n + 1) * step)


def _square_function(fam: CoefficientFamily, top: DyadicInterval) -> SampledFunction:
    """(sum over members J' inside top of |a_J'|^2/|J'| on J')^(1/2)."""
    acc = np.zeros(fam.grid.n)
    for iv, v in fam.values.items():
        if top.contains(iv):
            acc[_cell_slice(fam.grid, iv)] += abs(v) ** 2 / float(iv.length)
    return SampledFunction(fam.grid, np.sqrt(acc).astype(complex))


def _local_quantity(fam: CoefficientFamily, iv: DyadicInterval, diagonal: bool) -> float:
    if diagonal:
        return abs(fam[iv]) / math.sqrt(float(iv.length))
    return weak_l1_norm(_square_function(fam, iv)) / float(iv.length)


def size(fam: CoefficientFamily, params: SizeEnergyParams) -> float:
    """Sup over the family of the per-interval size quantity.

    Diagonal branch: sup |a_J|/|J|^{1/2}. Off-diagonal: sup over J of
    (1/|J|) times the weak-L1 norm of the local square function collecting
    every member inside J.
    """
    if not len(fam):
        raise ValueError("size of an empty family is undefined")
    return max(_local_quantity(fam, iv, params.diagonal) for iv in fam)


def _maximal(intervals: Iterable[DyadicInterval]) -> list[DyadicInterval]:
    pool = sorted(set(intervals), key=lambda iv: (iv.k, iv.n), reverse=True)
    out: list[DyadicInterval] = []
    for iv in pool:  # coarse first, so containment tests only look at out
        if not any(top.contains(iv) for top in out):
            out.append(iv)
    return out


def energy(fam: CoefficientFamily, params: SizeEnergyParams) -> float:
    """Sup over thresholds 2^n of 2^n times the largest total length of a
    disjoint subcollection whose size quantity meets the threshold.

    For fixed n the optimal antichain is the set of maximal dyadic intervals
    meeting the threshold: every qualifying interval lies inside a maximal
    one, and nesting makes the maximal ones disjoint. The n sweep covers the
    attained dyadic range of the quantity with two levels of slack.
    """
    if not len(fam):
        raise ValueError("energy of an empty family is undefined")
    quantities = {iv: _local_quantity(fam, iv, params.diagonal) for iv in fam}
    positive = [q for q in quantities.values() if q > 0]
    if not positive:
        return 0.0
    lo = math.floor(math.log2(min(positive))) - 2
    hi = math.floor(math.log2(max(positive))) + 2
    best = 0.0
    for n in range(lo, hi + 1):
        threshold = 2.0**n
        hit = [iv for iv, q in quantities.items() if q >= threshold]
        if not hit:
            continue
        total = sum((iv.length for iv in _maximal(hit)), Fraction(0))
        best = max(best, threshold * float(total))
    return best


@dataclass(frozen=True)
class InequalityReport:
    """Measured two-sided comparison; ratio is 0 when both sides vanish."""

    lhs: float
    rhs: float
    label: str = ""

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf

    def to_json_dict(self) -> dict:
        return {"label": self.label, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}


def john_nirenberg_compare(fam: CoefficientFamily, params: SizeEnergyParams) -> InequalityReport:
    """Off-diagonal size against the plain normalized l2 sum
    sup_J |J|^{-1/2} (sum of |a_J'|^2 over J' inside J)^{1/2}.
    """
    if params.diagonal:
        raise ValueError("the comparison needs the off-diagonal branch (slot != nonlacunary_j)")
    weak = size(fam, params)
    l2 = 0.0
    for top in fam:
        s = sum(abs(v) ** 2 for iv, v in fam.values.items() if top.contains(iv))
        l2 = max(l2, math.sqrt(s / float(top.length)))
    return InequalityReport(weak, l2, label="john-nirenberg")


def local_embedding_check(
    f: SampledFunction,
    fam: BumpFamily,
    top: DyadicInterval,
    n_exp: int = 10,
) -> InequalityReport:
    """Weak-L1 norm of the local square function of (pair(f, bump_J'))_{J' in
    top} against the L1 mass of f under the decaying cutoff of exponent n_exp.
    """
    if fam.flavor != "lacunary":
        raise ValueError("the embedding holds for lacunary slots")
    members = [iv for iv in fam.intervals if top.contains(iv)]
    all_coeffs = fam.coefficients(f)
    coeffs = CoefficientFamily(f.grid, {iv: all_coeffs[iv] for iv in members})
    lhs = weak_l1_norm(_square_function(coeffs, top)) if members else 0.0
    weighted = SampledFunction(f.grid, f.values * approx_cutoff(top, f.grid, n_exp).values)
    rhs = lp_norm(weighted, 1)
    return InequalityReport(lhs, rhs, label="local-embedding")


@dataclass(frozen=True)
class Tree:
    """Selected intervals grouped under a common top containing all of them."""

    top: DyadicInterval
    members: tuple[DyadicInterval, ...]

    def __post_init__(self):
        if not all(self.top.contains(iv) for iv in self.members):
            raise ValueError("every tree member must sit inside the top")


@dataclass(frozen=True)
class TreeDecomposition:
    """Split of a family into trees and a residual set below half-threshold.

    threshold is 2^{-n0-1} times the reference energy; residual_size is the
    size of the residual re-measured as a standalone family; top_length_sum is
    the exact total length of the tree tops.
    """

    n0: int
    trees: tuple[Tree, ...]
    residual: tuple[DyadicInterval, ...]
    threshold: float
    residual_size: float
    top_length_sum: Fraction

    @property
    def top_constant(self) -> float:
        # measured constant of the top-length bound, relative to 2^n0
        return float(self.top_length_sum) / 2.0**self.n0

    def selected(self) -> frozenset[DyadicInterval]:
        return frozenset(iv for t in self.trees for iv in t.members)

    def to_json_dict(self) -> dict:
        return {
            "n0": self.n0,
            "threshold": self.threshold,
            "residual_size": self.residual_size,
            "top_length_sum": str(self.top_length_sum),
            "top_constant": self.top_constant,
            "trees": [
                {
                    "top": t.top.to_json_dict(),
                    "members": [iv.to_json_dict() for iv in t.members],
                }
                for t in self.trees
            ],
            "residual": [iv.to_json_dict() for iv in self.residual],
        }


def _interval_sort_key(iv: DyadicInterval):
    # largest length first, leftmost first among equals
    return (-iv.k, iv.left)


def _greedy_trees(
    quantities: dict[DyadicInterval, float],
    subset: Iterable[DyadicInterval],
    threshold: float,
) -> tuple[list[Tree], set[DyadicInterval]]:
    # selection quantity always sums over the full family, not the remainder
    remaining = set(subset)
    trees: list[Tree] = []
    while True:
        candidates = [iv for iv in remaining if quantities[iv] > threshold]
        if not candidates:
            return trees, remaining
        top = min(candidates, key=_interval_sort_key)
        members = tuple(sorted((iv for iv in remaining if top.contains(iv)), key=_interval_sort_key))
        trees.append(Tree(top, members))
        remaining.difference_update(members)


def stopping_decomposition(
    fam: CoefficientFamily,
    params: SizeEnergyParams,
    n0: int,
    subset: Iterable[DyadicInterval] | None = None,
) -> TreeDecomposition:
    """Greedy half-threshold selection into trees, largest tops first.

    Requires size(subset) <= 2^{-n0} * energy(full family). Repeatedly picks
    the largest remaining interval (leftmost among equals) whose quantity
    exceeds 2^{-n0-1} times the energy and collects everything under it into
    a tree. Postconditions are re-verified on every call: the residual,
    re-measured as a standalone family, stays at or below the half threshold;
    tree tops are pairwise disjoint; the exact top length total is at most
    TOP_LENGTH_CONSTANT * 2^n0.
    """
    pool = tuple(fam) if subset is None else tuple(sorted(set(subset), key=_interval_sort_key))
    for iv in pool:
        if iv not in fam.values:
            raise ValueError(f"subset interval {iv} is not in the family")
    if not pool:
        raise ValueError("stopping decomposition needs a nonempty subset")
    ref_energy = energy(fam, params)
    start_size = size(fam.restrict(pool), params)
    # 1e-9 relative slack: iterated calls hand over residuals whose
    # re-summed size can sit a few ulps past the exact threshold
    if start_size > 2.0**-n0 * ref_energy * (1.0 + 1e-9):
        raise ValueError(
            f"precondition failed: size {start_size:.6g} exceeds "
            f"2^-{n0} * energy = {2.0 ** -n0 * ref_energy:.6g}"
        )
    threshold = 2.0 ** (-n0 - 1) * ref_energy
    quantities = {iv: _local_quantity(fam, iv, params.diagonal) for iv in pool}
    trees, remaining = _greedy_trees(quantities, pool, threshold)
    residual = tuple(sorted(remaining, key=_interval_sort_key))

    residual_size = size(fam.restrict(residual), params) if residual else 0.0
    # float re-summation over the residual can wobble at roundoff scale
    if residual_size > threshold * (1.0 + 1e-9):
        raise AssertionError("residual size exceeds the half threshold")
    tops = [t.top for t in trees]
    for a in range(len(tops)):
        for b in range(a + 1, len(tops)):
            if not tops[a].disjoint_from(tops[b]):
                raise AssertionError("tree tops are not pairwise disjoint")
    top_sum = sum((t.top.length for t in trees), Fraction(0))
    if ref_energy > 0 and top_sum > Fraction(TOP_LENGTH_CONSTANT) * Fraction(2) ** n0:
        raise AssertionError("tree top lengths exceed the recorded bound")
    return TreeDecomposition(n0, tuple(trees), residual, threshold, residual_size, top_sum)


@dataclass(frozen=True)
class PartitionLevel:
    """One threshold level of the full partition."""

    n: int
    trees: tuple[Tree, ...]
    size_bound: float
    measured_size: float

    def members(self) -> frozenset[DyadicInterval]:
        return frozenset(iv for t in self.trees for iv in t.members)

    def top_length_sum(self) -> Fraction:
        return sum((t.top.length for t in self.trees), Fraction(0))


def full_partition(fam: CoefficientFamily, params: SizeEnergyParams) -> tuple[PartitionLevel, ...]:
    """Iterated stopping decomposition: level n collects the trees selected at
    threshold 2^{-n-1} * energy, each level's standalone size staying at or
    below min(2^{-n} * energy, size).

    Thresholds halve from the first n with size <= 2^{-n} * energy until no
    interval with positive quantity remains. Intervals whose quantity is zero
    never meet a positive threshold; they land in a terminal level of
    singleton trees placed deep enough for the top-length bound. The union of
    the level member sets reproduces the family exactly.
    """
    if not len(fam):
        raise ValueError("cannot partition an empty family")
    full_size = size(fam, params)
    ref_energy = energy(fam, params)
    levels: list[PartitionLevel] = []
    remaining = set(fam.intervals)

    quantities = {iv: _local_quantity(fam, iv, params.diagonal) for iv in fam}
    if full_size > 0:
        n = math.floor(math.log2(ref_energy / full_size))
        while full_size > 2.0**-n * ref_energy:  # guard against log roundoff
            n -= 1
        while any(quantities[iv] > 0 for iv in remaining):
            dec = stopping_decomposition(fam, params, n, subset=remaining)
            if dec.trees:
                chunk = fam.restrict(dec.selected())
                levels.append(
                    PartitionLevel(
                        n,
                        dec.trees,
                        min(2.0**-n * ref_energy, full_size),
                        size(chunk, params),
                    )
                )
            remaining = set(dec.residual)
            n += 1
    else:
        n = 0

    if remaining:
        # zero-quantity leftovers: singleton trees, level deep enough that
        # the exact top-length bound holds
        total = sum((iv.length for iv in remaining), Fraction(0))
        while Fraction(2) ** n * TOP_LENGTH_CONSTANT < total:
            n += 1
        trees = tuple(
            Tree(iv, (iv,)) for iv in sorted(remaining, key=_interval_sort_key)
        )
        levels.append(PartitionLevel(n, trees, min(2.0**-n * ref_energy, full_size), 0.0))

    union: set[DyadicInterval] = set()
    for lev in levels:
        mem = lev.members()
        if union & mem:
            raise AssertionError("partition levels overlap")
        union |= mem
        if lev.measured_size > lev.size_bound * (1.0 + 1e-9):
            raise AssertionError("level size exceeds its bound")
        if lev.top_length_sum() > Fraction(TOP_LENGTH_CONSTANT) * Fraction(2) ** lev.n:
            raise AssertionError("level top lengths exceed the recorded bound")
    if union != set(fam.intervals):
        raise AssertionError("partition does not exhaust the family")
    return tuple(levels)


def _as_triple(
    fams: Sequence[CoefficientFamily],
) -> tuple[CoefficientFamily, CoefficientFamily, CoefficientFamily]:
    a1, a2, a3 = fams
    keys = set(a1.values)
    if set(a2.values) != keys or set(a3.values) != keys:
        raise ValueError("the three families must share one interval collection")
    return a1, a2, a3


def abstract_estimate_check(
    fams: Sequence[CoefficientFamily],
    params: SizeEnergyParams,
) -> InequalityReport:
    """|sum over J of |J|^{-1/2} a1 a2 a3| against the interpolated product
    of per-slot sizes and energies with exponents (1-theta_i, theta_i).
    """
    a1, a2, a3 = _as_triple(fams)
    lhs = abs(
        sum(
            v1 * a2[iv] * a3[iv] / math.sqrt(float(iv.length))
            for iv, v1 in a1.items()
        )
    )
    rhs = 1.0
    for slot, fam in ((1, a1), (2, a2), (3, a3)):
        p = params.for_slot(slot)
        theta = float(params.thetas[slot - 1])
        rhs *= size(fam, p) ** (1.0 - theta) * energy(fam, p) ** theta
    return InequalityReport(lhs, rhs, label="abstract-estimate")


def _measure(indicator: SampledFunction) -> float:
    return float(np.mean(np.abs(indicator.values)))


def _sup_cell_average(
    indicator: SampledFunction,
    intervals: Iterable[DyadicInterval],
    exponent: int,
) -> float:
    """sup over intervals of (1/|J|) * integral of the indicator under the
    decaying cutoff of the given exponent."""
    grid = indicator.grid
    mask = np.abs(indicator.values)
    best = 0.0
    for iv in intervals:
        w = approx_cutoff(iv, grid, exponent).values.real
        best = max(best, float(np.mean(mask * w)) / float(iv.length))
    return best


def size_bounds_check(
    fam: CoefficientFamily,
    params: SizeEnergyParams,
    indicator: SampledFunction | None = None,
    *,
    e1: SampledFunction | None = None,
    e4: SampledFunction | None = None,
    theta: Fraction = Fraction(1, 2),
    exponent: int = 10,
) -> InequalityReport:
    """Size of the family against its set-theoretic ceiling.

    Slots 1 and 2 (coefficients of a function bounded by 1 and supported on
    the indicator set): RHS is the sup over J of the normalized cutoff mass
    of the set. Slot 3 (coefficients built from two functions on e1 and e4):
    RHS is the geometric mix of the two sup-averages with exponents
    (1-theta, theta).
    """
    lhs = size(fam, params)
    if params.slot != 3:
        if indicator is None:
            raise ValueError("slots 1 and 2 need the support indicator")
        rhs = _sup_cell_average(indicator, fam.intervals, exponent)
        return InequalityReport(lhs, rhs, label="size-bound")
    if e1 is None or e4 is None:
        raise ValueError("slot 3 needs both support indicators")
    if not 0 < theta < 1:
        raise ValueError("theta must lie strictly between 0 and 1")
    s1 = _sup_cell_average(e1, fam.intervals, exponent)
    s4 = _sup_cell_average(e4, fam.intervals, exponent)
    rhs = s1 ** (1.0 - float(theta)) * s4 ** float(theta)
    return InequalityReport(lhs, rhs, label="size-bound")


def energy_bounds_check(
    fam: CoefficientFamily,
    params: SizeEnergyParams,
    indicator: SampledFunction | None = None,
    *,
    e1: SampledFunction | None = None,
    e4: SampledFunction | None = None,
    i_intervals: Iterable[DyadicInterval] | None = None,
    thetas: tuple[Fraction, Fraction] = (Fraction(1, 2), Fraction(1, 2)),
    exponent: int = 10,
) -> InequalityReport:
    """Energy of the family against its set-theoretic ceiling.

    Slots 1 and 2: RHS is the plain measure of the support set. Slot 3: RHS
    mixes the sup-averages over the supplied outer interval collection with
    the two set measures, exponents (1-theta1, 1-theta2, theta1, theta2) and
    theta1 + theta2 = 1.
    """
    lhs = energy(fam, params)
    if params.slot != 3:
        if indicator is None:
            raise ValueError("slots 1 and 2 need the support indicator")
        return InequalityReport(lhs, _measure(indicator), label="energy-bound")
    if e1 is None or e4 is None:
        raise ValueError("slot 3 needs both support indicators")
    if i_intervals is None:
        raise ValueError("slot 3 needs the outer interval collection")
    t1, t2 = (Fraction(t) for t in thetas)
    if t1 < 0 or t2 < 0 or t1 >= 1 or t2 >= 1 or t1 + t2 != 1:
        raise ValueError("thetas must lie in [0,1) and sum to 1")
    outer = tuple(i_intervals)
    s1 = _sup_cell_average(e1, outer, exponent)
    s4 = _sup_cell_average(e4, outer, exponent)
    rhs = (
        s1 ** (1.0 - float(t1))
        * s4 ** (1.0 - float(t2))
        * _measure(e1) ** float(t1)
        * _measure(e4) ** float(t2)
    )
    return InequalityReport(lhs, rhs, label="energy-bound")
