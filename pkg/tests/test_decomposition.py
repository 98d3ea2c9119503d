"""Window partitions, modulation series, scale splits, and tile-sum identities."""

import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

from flagpp.decomposition import (
    DecompositionWindows,
    CoefficientTable,
    MARGIN,
    MODULATION,
    ScaleAverage,
    build_partition,
    decay_slope,
    fourier_coefficients,
    l1_bump,
    reconstruction_error,
    scale_average,
    split_product,
    taylor_split,
    verify_calc1,
    verify_calc2,
    verify_calc3,
    window_core,
    window_plateau,
    window_profile,
    window_support,
)
from flagpp.grid import (
    SampledFunction,
    TorusGrid,
    dft,
    idft,
    pure_mode,
    random_bandlimited,
    spectrum_from_coeffs,
)
from flagpp.symbols import standard_symbols, tabulate


def oracle_partition(m, q, nodes, x1, x2):
    """Independent partition evaluation: explicit sum over index pairs."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    js = [j for j in range(-m, m + 1) if j != 0]
    out = np.zeros(np.broadcast(x1, x2).shape)
    for lam in nodes:
        for j1 in js:
            for j2 in js:
                if max(abs(j1), abs(j2)) != m:
                    continue
                out = out + window_profile(j1, x1 * 2.0**-lam) * window_profile(
                    j2, x2 * 2.0**-lam
                )
    return out / q


def _shell_sum(m, u):
    u = np.asarray(u, dtype=float)
    acc = np.zeros(u.shape)
    for j in range(1, m + 1):
        acc += window_profile(j, u) + window_profile(j, -u)
    return acc


def oracle_scale_average(m, x1, x2):
    """Adaptive quadrature of the telescoped shell sum over the scale line."""

    def g(lam):
        s = 2.0 ** -lam
        u1 = np.asarray(s * x1)
        u2 = np.asarray(s * x2)
        return float(
            _shell_sum(m, u1) * _shell_sum(m, u2)
            - _shell_sum(m - 1, u1) * _shell_sum(m - 1, u2)
        )

    edges = []
    for c in (abs(x1), abs(x2)):
        if c > 0:
            for r in (m + MARGIN, m - MARGIN, m - 1 + MARGIN, m - 1 - MARGIN):
                edges.append(math.log2(c / r))
    if not edges:
        return 0.0
    val, _ = quad(g, min(edges) - 0.2, max(edges) + 0.2, points=sorted(edges),
                  limit=400, epsabs=1e-12, epsrel=1e-12)
    return val


class TestWindows:
    def test_profile_support_plateau_and_mirror(self):
        u = np.linspace(-4.0, 4.0, 1601)
        for j in (1, 2, 3, -1, -2):
            lo_s, hi_s = window_support(j)
            lo_p, hi_p = window_plateau(j)
            lo_c, hi_c = window_core(j)
            assert lo_s == pytest.approx(lo_c - MARGIN)
            assert hi_p == pytest.approx(hi_c - MARGIN)
            w = window_profile(j, u)
            assert np.all(w[(u <= lo_s) | (u >= hi_s)] == 0.0)
            flat = (u >= lo_p) & (u <= hi_p)
            assert np.all(w[flat] == 1.0)
            assert np.all((w >= 0.0) & (w <= 1.0))
        assert np.allclose(window_profile(-2, -u), window_profile(2, u))
        with pytest.raises(ValueError):
            window_profile(0, u)

    def test_edges_split_evenly_and_profiles_sum_to_one(self):
        # transitions sit symmetrically on the integer core endpoints, so
        # adjacent profiles are exactly complementary and each edge value
        # is one half
        for j in (1, 2, 3):
            for edge in (float(j - 1), float(j)):
                assert window_profile(j, np.array([edge]))[0] == pytest.approx(
                    0.5, abs=1e-14
                )
        u = np.linspace(-5 + MARGIN, 5 - MARGIN, 2001)
        total = np.zeros_like(u)
        for j in range(1, 6):
            total += window_profile(j, u) + window_profile(-j, u)
        assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_scaled_window_and_modulation(self):
        grid = TorusGrid(64)
        win = DecompositionWindows(m=4, j=2, k=2, n=3)
        lo, hi = win.support()
        assert lo == pytest.approx(4 * (1 - 1 / 18))
        assert hi == pytest.approx(4 * (2 + 1 / 18))
        xi = grid.frequencies
        vals = win.sample(xi)
        plain = window_profile(2, xi / 4.0)
        phase = np.exp(2j * np.pi * 3 * MODULATION * xi / 4.0)
        assert np.allclose(vals, plain * phase)
        spec = win.spectrum_on(grid)
        assert np.array_equal(spec.coeffs, vals)
        back = dft(win.bump_on(grid))
        assert np.max(np.abs(back.coeffs - vals)) < 1e-12

    def test_window_validation(self):
        with pytest.raises(ValueError):
            DecompositionWindows(m=1, j=1, k=0)
        with pytest.raises(ValueError):
            DecompositionWindows(m=4, j=0, k=0)
        with pytest.raises(ValueError):
            DecompositionWindows(m=4, j=5, k=0)
        with pytest.raises(ValueError):
            DecompositionWindows(m=4, j=1, k=0, kappa=1.5)


class TestScaleAverage:
    def test_matches_direct_scale_integral(self):
        for m in (3, 4):
            ann = scale_average(m)
            rng = np.random.default_rng(5 + m)
            pts = [tuple(p) for p in rng.uniform(-30, 30, size=(12, 2))]
            pts += [(1.0, 0.0), (0.0, 7.0), (5.0, 5.0), (-12.0, 12.0)]
            for x1, x2 in pts:
                want = oracle_scale_average(m, x1, x2)
                assert abs(float(ann(x1, x2)) - want) < 1e-7

    def test_homogeneous_positive_and_flat(self):
        ann = scale_average(4)
        rng = np.random.default_rng(17)
        r = rng.uniform(0.5, 40.0, size=50)
        th = rng.uniform(0, 2 * np.pi, size=50)
        x1, x2 = r * np.cos(th), r * np.sin(th)
        assert np.max(np.abs(ann(2.37 * x1, 2.37 * x2) - ann(x1, x2))) < 1e-12
        assert np.all(ann(x1, x2) > 0.0)
        assert float(ann(0.0, 0.0)) == 0.0
        flat = ann.mass / math.log(2.0)
        assert float(ann(1.0, 0.001)) == pytest.approx(flat, rel=1e-12)
        assert float(ann(0.0, -3.0)) == pytest.approx(flat, rel=1e-12)

    def test_lattice_partition_converges_to_it(self):
        # the discrete scale lattice is a rectangle rule for the continuum
        # average, so refining the lattice must drive the two together
        ann = scale_average(4)
        grid = TorusGrid(64)
        rng = np.random.default_rng(3)
        x1 = rng.uniform(-20, 20, size=100)
        x2 = rng.uniform(-20, 20, size=100)
        exact = ann(x1, x2)
        errs = []
        for q in (8, 32):
            part = build_partition(4, grid, q=q)
            lat = np.real(np.asarray(part.symbol.func(x1, x2), dtype=complex))
            errs.append(float(np.max(np.abs(lat - exact))))
        assert errs[1] < errs[0] / 3.0
        assert errs[1] < 1e-2

    def test_as_symbol_roundtrip(self):
        grid = TorusGrid(32)
        ann = scale_average(4)
        sym = ann.as_symbol(grid)
        assert sym.d == 2
        xi = grid.frequencies.astype(float)
        want = ann(xi[:, None], xi[None, :])
        assert np.max(np.abs(sym.table - want)) == 0.0
        assert np.max(np.abs(np.asarray(sym.func(xi[:3], xi[:3])) - ann(xi[:3], xi[:3]))) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ScaleAverage(1)


class TestPartition:
    def test_basic_properties(self):
        grid = TorusGrid(64)
        part = build_partition(3, grid, q=4)
        tab = part.symbol.table
        assert np.all(tab.imag == 0.0)
        assert np.all(tab.real >= 0.0)
        h = grid.n // 2
        assert tab[h, h] == 0.0
        assert part.c0 > 0.0
        assert part.lattice_min > 0.0

    def test_matches_pairwise_oracle(self):
        grid = TorusGrid(64)
        part = build_partition(3, grid, q=4)
        rng = np.random.default_rng(7)
        x1 = rng.uniform(-20, 20, size=40)
        x2 = rng.uniform(-20, 20, size=40)
        want = oracle_partition(3, 4, part.nodes, x1, x2)
        got = part.tensor_eval(x1, x2).diagonal()
        assert np.max(np.abs(got - want)) < 1e-10
        via_func = np.real(
            np.asarray(part.symbol.func(x1, x2), dtype=complex)
        )
        assert np.max(np.abs(via_func - want)) < 1e-10

    def test_dilation_invariance_interior(self):
        grid = TorusGrid(64)
        part = build_partition(3, grid, q=4)
        rng = np.random.default_rng(11)
        r = rng.uniform(1.0, 8.0, size=60)
        th = rng.uniform(0, 2 * np.pi, size=60)
        x1, x2 = r * np.cos(th), r * np.sin(th)
        base = part.symbol.func(x1, x2)
        doubled = part.symbol.func(2 * x1, 2 * x2)
        assert np.max(np.abs(np.asarray(doubled) - np.asarray(base))) < 1e-9

    def test_reference_configuration_bounds(self):
        grid = TorusGrid(256)
        part = build_partition(8, grid, q=8)
        assert part.c0 >= 0.1
        # doubling maps the scale nodes onto themselves, so the diagonal
        # values at successive octaves agree to within ten percent
        r = 8 - 0.5
        vals = np.array(
            [float(np.real(part.symbol.func(2.0**k * r, 2.0**k * r)))
             for k in range(0, 5)]
        )
        assert vals.min() > 0
        assert vals.max() / vals.min() <= 1.10
        assert part.mihlin.max_order == 4

    def test_validation(self):
        grid = TorusGrid(64)
        with pytest.raises(ValueError):
            build_partition(1, grid)
        with pytest.raises(ValueError):
            build_partition(4, grid, q=0)


class TestCoefficients:
    def test_unit_quotient_gives_exact_delta(self):
        # expanding the scale average over itself makes the quotient one;
        # the constant mode is split off before the solve and restored at
        # the center, so the table is a pure delta with no rounding at all
        grid = TorusGrid(64)
        sym = scale_average(4).as_symbol(grid)
        table = fourier_coefficients(sym, 4, 1, 1.0, 30)
        c = table.matrix(4, 1, 1.0)
        delta = np.zeros_like(c)
        delta[30, 30] = 1.0
        assert np.max(np.abs(c - delta)) <= 1e-10
        assert table.coefficient(4, 1, 1.0, 0, 0) == pytest.approx(1.0, abs=1e-12)
        assert table.residual <= 1e-10

    def test_lattice_quotient_delta(self):
        grid = TorusGrid(64)
        part = build_partition(3, grid, q=4)
        table = fourier_coefficients(part.symbol, 1, 3, 0.0, 8, part)
        c = table.matrix(1, 3, 0.0)
        delta = np.zeros_like(c)
        delta[8, 8] = 1.0
        assert np.max(np.abs(c - delta)) <= 1e-10
        assert table.residual <= 1e-10

    def test_division_floor_raises(self):
        grid = TorusGrid(64)
        part = build_partition(3, grid, q=4)
        blocked = dataclasses.replace(part, c0=50.0, lattice_min=50.0)
        with pytest.raises(ValueError):
            fourier_coefficients(part.symbol, 1, 3, 0.0, 8, blocked)

    def test_decay_and_reconstruction(self, catalog64):
        a = catalog64["homog0"]
        table = fourier_coefficients(a, 4, 1, 1.0, 30)
        slope = decay_slope(table)
        assert slope is not None and slope <= -5.0
        assert reconstruction_error(table, a, 4, 1, 1.0) <= 1e-6
        # the decay constant is the smallest one closing the envelope bound,
        # so the bound holds entrywise with it
        ns = np.arange(-30, 31)
        envelope = np.outer((1.0 + np.abs(ns)) ** -5.0, (1.0 + np.abs(ns)) ** -5.0)
        c = np.abs(table.matrix(4, 1, 1.0))
        assert 0.0 < table.decay_constant < 1e7
        assert np.all(c <= table.decay_constant * envelope * (1 + 1e-12) + 1e-300)

    def test_ring_symbols_decay_at_matched_scales(self, catalog64):
        # each ring has its content one octave up from the previous one, so
        # the probing scale moves with it
        for name, lam in (("annular3", 1.0), ("annular4", 2.0), ("annular5", 3.0)):
            table = fourier_coefficients(catalog64[name], 4, 1, lam, 30)
            slope = decay_slope(table)
            assert slope is not None and slope <= -5.0

    def test_flat_slice_has_no_measurable_decay(self, catalog64):
        table = fourier_coefficients(catalog64["trivial2"], 4, 1, 1.0, 30)
        assert decay_slope(table) is None
        c = table.matrix(4, 1, 1.0)
        # constant quotient 1 / (flat annulus average), all in the center mode
        want = math.log(2.0) / scale_average(4).mass
        assert c[30, 30] == pytest.approx(want, rel=1e-9)
        off = np.abs(c).copy()
        off[30, 30] = 0.0
        assert np.max(off) <= 1e-7 * want

    def test_mirrored_slices_agree(self, catalog64):
        a = catalog64["homog0"]
        t1 = fourier_coefficients(a, 4, 1, 1.0, 20)
        t2 = fourier_coefficients(a, -4, 1, 1.0, 20)
        s1, s2 = decay_slope(t1), decay_slope(t2)
        assert s1 == pytest.approx(s2, rel=1e-6)
        r1 = reconstruction_error(t1, a, 4, 1, 1.0)
        r2 = reconstruction_error(t2, a, -4, 1, 1.0)
        assert r2 == pytest.approx(r1, rel=1e-6)

    def test_merge(self):
        grid = TorusGrid(64)
        part = build_partition(3, grid, q=4)
        t1 = fourier_coefficients(part.symbol, 1, 3, 0.0, 4, part)
        t2 = fourier_coefficients(part.symbol, 3, 1, 0.0, 4, part)
        merged = CoefficientTable.merge([t1, t2])
        assert merged.coefficient(1, 3, 0.0, 0, 0) == t1.coefficient(1, 3, 0.0, 0, 0)
        assert merged.coefficient(3, 1, 0.0, 0, 0) == t2.coefficient(3, 1, 0.0, 0, 0)
        assert merged.n_range == 4
        assert merged.decay_constant >= max(t1.decay_constant, t2.decay_constant) - 1e-15


class TestSplitProduct:
    def test_constant_factors_stay_diagonal(self):
        cat = standard_symbols(64)
        out = split_product(cat["trivial2"], cat["trivial2"], n=16, n_range=4,
                            ranges=(4,))
        assert np.all(out.m1.table == 0.0)
        assert np.all(out.m2.table == 0.0)
        assert np.all(out.m3.table == 1.0)
        assert out.achieved_error == 0.0
        assert out.budget_met

        half = tabulate(lambda x1, x2: np.full(np.broadcast(x1, x2).shape, 0.5),
                        2, 16)
        out2 = split_product(half, cat["trivial2"], n=16, n_range=4, ranges=(4,))
        assert np.all(out2.m3.table == 0.5)

    def test_far_scale_windows_are_disjoint_in_the_middle(self):
        # a slice whose middle-frequency window sits three levels above
        # another cannot meet it, which is why only innermost middle windows
        # survive in the split pieces
        xi = TorusGrid(64).frequencies.astype(float)
        upper = window_profile(4, xi / 2.0**2)
        lower = window_profile(4, xi / 2.0**-1)
        assert np.any(upper) and np.any(lower)
        assert np.all(upper * lower == 0.0)
        inner_upper = window_profile(1, xi / 2.0**2)
        assert np.any(inner_upper * lower != 0.0)

    def test_reconstruction_error_decreases_and_meets_budget(
        self, catalog64, homog_annular_split
    ):
        out = homog_annular_split
        errs = out.errors_by_range
        assert sorted(errs) == [5, 10, 20, 30]
        vals = [errs[r] for r in (5, 10, 20, 30)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert errs[20] <= 1e-3
        assert out.achieved_error == errs[30]
        assert out.budget_met

        ab = np.einsum(
            "ij,jk->ijk",
            np.asarray(catalog64["homog0"].table),
            np.asarray(catalog64["annular3"].table),
        )
        ref = float(np.max(np.abs(ab)))
        total = out.m1.table + out.m2.table + out.m3.table
        assert np.max(np.abs(total - ab)) <= errs[30] * ref + 1e-12

    def test_separation_widens_scale_gap(self):
        # the first piece keeps only slices whose left scale clears the
        # right scale by the separation, so the smallest scale ratio seen on
        # its support doubles with every extra separation level
        cat = standard_symbols(32)
        xi = np.abs(TorusGrid(32).frequencies.astype(float))
        n = 32
        s_a = np.broadcast_to(
            np.maximum(xi[:, None, None], xi[None, :, None]), (n, n, n))
        s_b = np.broadcast_to(
            np.maximum(xi[None, :, None], xi[None, None, :]), (n, n, n))
        min_ratio = {}
        cells = {}
        for sep in (2, 3, 4):
            out = split_product(cat["homog0"], cat["homog0"], separation=sep,
                                m=3, q=3, n=32, n_range=12, ranges=(12,),
                                samples=180)
            t = np.abs(out.m1.table)
            live = t > 1e-8 * np.max(t)
            ratios = s_a[live] / np.maximum(s_b[live], 1.0)
            min_ratio[sep] = float(np.min(ratios))
            cells[sep] = int(np.sum(live))
        assert cells[2] > cells[3] > cells[4]
        for sep in (2, 3, 4):
            assert min_ratio[sep] >= 0.8 * 2.0 ** (sep - 2)
        assert min_ratio[3] >= 1.8 * min_ratio[2]
        assert min_ratio[4] >= 1.8 * min_ratio[3]

    def test_validation(self):
        cat = standard_symbols(64)
        with pytest.raises(ValueError):
            split_product(cat["homog0"], cat["annular3"], separation=1)
        with pytest.raises(ValueError):
            split_product(cat["trivial"], cat["annular3"])


class TestTaylorSplit:
    def test_identity_and_zero_column(self):
        for gap_from, j2 in ((4, 1), (5, -1)):
            ts = taylor_split(2, gap_from, 0, j2=j2)
            assert ts.reconstruction_gap() <= 1e-10
            col = int(np.nonzero(ts.xi3 == 0.0)[0][0])
            assert np.array_equal(ts.terms[0][:, col], ts.window_values)
            assert ts.interp_error <= 1e-9
            direct = window_profile(j2, ts.xi2 / 2.0**gap_from)
            assert np.max(np.abs(ts.window_values - direct)) <= 1e-9

    def test_remainder_two_scale_ratio(self, taylor_remainder_sups):
        # halving the coarse scale contracts the remainder sup by the
        # expected power of two, up to the next-order correction
        for order, (shallow, deep) in ((1, (-6, -7)), (2, (-6, -7)),
                                       (3, (-7, -8))):
            ratio = (taylor_remainder_sups[(order, deep)]
                     / taylor_remainder_sups[(order, shallow)])
            assert abs(ratio - 2.0**-order) <= 0.25 * 2.0**-order

    def test_scaled_terms_are_gap_stable(self):
        t4 = taylor_split(2, 4, 0).scaled_terms()
        t5 = taylor_split(2, 5, 0).scaled_terms()
        for a, b in zip(t4, t5):
            assert abs(np.max(np.abs(a)) - np.max(np.abs(b))) <= 0.1 * np.max(np.abs(a))

    def test_factors_record_expected_sizes(self):
        ts = taylor_split(3, 5, 1)
        assert ts.factors == (1.0, 2.0**-4, 2.0**-8)
        for t, s, f in zip(ts.terms, ts.scaled_terms(), ts.factors):
            assert np.max(np.abs(s)) == pytest.approx(np.max(np.abs(t)) / f,
                                                      rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            taylor_split(0, 4, 0)
        with pytest.raises(ValueError):
            taylor_split(2, 1, 3)
        with pytest.raises(ValueError):
            taylor_split(2, 4, 0, j2=2)


def _narrow(grid, rng, band):
    pairs = {k: complex(rng.standard_normal(), rng.standard_normal())
             for k in range(-band, band + 1)}
    return idft(spectrum_from_coeffs(grid, pairs))


class TestCalcOne:
    def test_zero_input(self):
        grid = TorusGrid(64)
        rng = np.random.default_rng(0)
        eta = [_narrow(grid, rng, 2) for _ in range(4)]
        f = [random_bandlimited(grid, 3, rng) for _ in range(4)]
        f[1] = SampledFunction(grid, np.zeros(64, dtype=complex))
        e14 = _narrow(grid, rng, 6)
        e23 = _narrow(grid, rng, 6)
        rep = verify_calc1(*eta, e14, e23, *f)
        assert rep.lhs == 0.0 and rep.rhs == 0.0

    def test_pure_modes_closed_form(self):
        grid = TorusGrid(64)
        rng = np.random.default_rng(1)
        eta = [_narrow(grid, rng, 4) for _ in range(4)]
        e14 = _narrow(grid, rng, 8)
        e23 = _narrow(grid, rng, 8)
        ks = (1, 2, 3, -6)
        f = [pure_mode(grid, k) for k in ks]
        rep = verify_calc1(*eta, e14, e23, *f)
        want = (
            dft(eta[0]).coeffs[grid.index_of(1)]
            * dft(eta[1]).coeffs[grid.index_of(2)]
            * dft(eta[2]).coeffs[grid.index_of(3)]
            * dft(eta[3]).coeffs[grid.index_of(-6)]
            * dft(e14).coeffs[grid.index_of(1 - 6)]
            * dft(e23).coeffs[grid.index_of(2 + 3)]
        )
        assert abs(rep.lhs - want) <= 1e-10 * max(abs(want), 1.0)
        assert rep.within(1e-10)

        f_bad = [pure_mode(grid, k) for k in (1, 2, 3, -5)]
        rep2 = verify_calc1(*eta, e14, e23, *f_bad)
        assert abs(rep2.lhs) <= 1e-12 * max(abs(want), 1.0)

    def test_random_inputs_and_slow_oracle(self):
        grid = TorusGrid(64)
        rng = np.random.default_rng(2)
        for _ in range(5):
            eta = [_narrow(grid, rng, 2) for _ in range(4)]
            f = [random_bandlimited(grid, 3, rng) for _ in range(4)]
            e14 = _narrow(grid, rng, 10)
            e23 = _narrow(grid, rng, 10)
            rep = verify_calc1(*eta, e14, e23, *f)
            assert rep.within(1e-10)

            g = [dft(fi).coeffs * dft(ei).coeffs for fi, ei in zip(f, eta)]
            c14 = dft(e14).coeffs
            c23 = dft(e23).coeffs
            slow = 0.0 + 0.0j
            live = [np.nonzero(np.abs(c) > 1e-12 * np.max(np.abs(c)))[0]
                    for c in g]
            freqs = grid.frequencies
            for i1 in live[0]:
                for i2 in live[1]:
                    for i3 in live[2]:
                        for i4 in live[3]:
                            if freqs[i1] + freqs[i2] + freqs[i3] + freqs[i4]:
                                continue
                            s14 = freqs[i1] + freqs[i4]
                            slow += (
                                g[0][i1] * g[1][i2] * g[2][i3] * g[3][i4]
                                * c14[grid.index_of(s14)]
                                * c23[grid.index_of(-s14)]
                            )
            assert abs(rep.lhs - slow) <= 1e-10 * max(abs(slow), 1.0)

    def test_budget_violation_raises(self):
        # four band-12 pair products total 48 >= 32, so sums can wrap
        grid = TorusGrid(64)
        rng = np.random.default_rng(3)
        eta = [random_bandlimited(grid, 12, rng) for _ in range(4)]
        f = [random_bandlimited(grid, 12, rng) for _ in range(4)]
        e14 = _narrow(grid, rng, 4)
        e23 = _narrow(grid, rng, 4)
        with pytest.raises(ValueError):
            verify_calc1(*eta, e14, e23, *f)


class TestCalcTwo:
    def test_constants_with_indicator_tiles(self):
        grid = TorusGrid(128)
        consts = (2.0, -1.5, 3.0 + 1.0j)
        f = [SampledFunction(grid, np.full(128, c, dtype=complex)) for c in consts]
        phi = [l1_bump(grid, -3, kind="indicator", shift=s) for s in (0.0, 0.25, 0.6)]
        rep = verify_calc2(*f, *phi, k=-3)
        want = consts[0] * consts[1] * consts[2]
        assert abs(rep.lhs - want) <= 1e-10 * abs(want)
        assert rep.within(1e-10)

    def test_random_smooth_and_ramp(self):
        grid = TorusGrid(128)
        rng = np.random.default_rng(5)
        for k, kinds in ((-3, ("smooth", "smooth", "smooth")),
                         (-4, ("ramp", "indicator", "smooth")),
                         (0, ("smooth", "ramp", "indicator"))):
            f = [random_bandlimited(grid, 10, rng) for _ in range(3)]
            phi = [l1_bump(grid, k, kind=kd, shift=float(rng.uniform(0, 1)))
                   for kd in kinds]
            rep = verify_calc2(*f, *phi, k=k)
            assert rep.within(1e-10)

    def test_bump_validation(self):
        grid = TorusGrid(64)
        with pytest.raises(ValueError):
            l1_bump(grid, 1)
        with pytest.raises(ValueError):
            l1_bump(grid, -10)
        with pytest.raises(ValueError):
            l1_bump(grid, -2, kind="sawtooth")
        b = l1_bump(grid, -2, kind="smooth", shift=0.3)
        assert np.sum(b.values) / 64 == pytest.approx(1.0, abs=1e-12)
        assert np.count_nonzero(b.values) <= 16

    def test_tile_validation(self):
        grid = TorusGrid(64)
        f = [random_bandlimited(grid, 5, np.random.default_rng(6)) for _ in range(3)]
        phi = [l1_bump(grid, -2) for _ in range(3)]
        with pytest.raises(ValueError):
            verify_calc2(*f, *phi, k=1)


class TestCalcThree:
    def _bumps(self, grid, k_fine, k_coarse):
        fine = [l1_bump(grid, -k_fine, kind="smooth", shift=s)
                for s in (0.0, 0.3, 0.55)]
        coarse = [l1_bump(grid, -k_coarse, kind="smooth", shift=s)
                  for s in (0.1, 0.4, 0.7)]
        # order: psi1, psi4, psi14 at the fine scale; psi2, psi3, psi23 coarse
        return fine[0], fine[1], fine[2], coarse[0], coarse[1], coarse[2]

    def test_unit_constants(self):
        grid = TorusGrid(128)
        ps = self._bumps(grid, 4, 1)
        ones = [SampledFunction(grid, np.ones(128, dtype=complex)) for _ in range(4)]
        rep = verify_calc3(*ps, *ones, k_fine=4, k_coarse=1)
        assert abs(rep.lhs - 1.0) <= 1e-10
        assert rep.within(1e-9)

    def test_zero_input(self):
        grid = TorusGrid(128)
        ps = self._bumps(grid, 4, 1)
        rng = np.random.default_rng(8)
        f = [random_bandlimited(grid, 10, rng) for _ in range(4)]
        f[1] = SampledFunction(grid, np.zeros(128, dtype=complex))
        rep = verify_calc3(*ps, *f, k_fine=4, k_coarse=1)
        assert abs(rep.lhs) <= 1e-12 and abs(rep.rhs) <= 1e-12

    def test_random_inputs(self):
        grid = TorusGrid(128)
        rng = np.random.default_rng(9)
        for k_fine, k_coarse in ((4, 1), (5, 2)):
            ps = self._bumps(grid, k_fine, k_coarse)
            f = [random_bandlimited(grid, 10, rng) for _ in range(4)]
            rep = verify_calc3(*ps, *f, k_fine=k_fine, k_coarse=k_coarse)
            assert rep.within(1e-9)

    def test_scale_validation(self):
        grid = TorusGrid(128)
        ps = self._bumps(grid, 4, 1)
        f = [random_bandlimited(grid, 5, np.random.default_rng(10)) for _ in range(4)]
        with pytest.raises(ValueError):
            verify_calc3(*ps, *f, k_fine=1, k_coarse=4)
