import math

import numpy as np
import pytest

import vlsf
from vlsf import CompositionType, compositions, max_tail_over_types, type_tail_prob
from vlsf.errors import GridOverflow, TypeEnumerationOverflow
from vlsf.tailprob import (
    _conv_atoms,
    _symbol_atoms,
    _type_atoms,
    tail_cut_index,
    type_density_pmf,
)

from conftest import brute_force_tail


def sequential_type_atoms(comp, w, step, rounding="up", max_cells=2**26):
    """Slow-path oracle: one convolution per symbol occurrence, no squaring."""
    total = (np.zeros(1, dtype=np.int64), np.ones(1))
    for x, count in enumerate(comp.counts):
        if count == 0:
            continue
        sym = _symbol_atoms(comp, w, x, step, rounding)
        for _ in range(count):
            total = _conv_atoms(total, sym, max_cells)
    return total


class TestSymbolDensityPMF:
    def test_balanced_type_bsc011(self):
        comp = CompositionType((1, 1))
        pmf = vlsf.symbol_density_pmf(comp, vlsf.bsc(0.11), x=0, step=1e-6)
        values, masses = pmf.support()
        assert len(values) == 2
        # marginal is uniform, so the two atoms sit at ln(2*0.89), ln(2*0.11)
        assert sorted(values) == pytest.approx(
            sorted([math.log(1.78), math.log(0.22)]), abs=1.1e-6
        )
        assert sorted(masses) == pytest.approx([0.11, 0.89], abs=0)

    def test_noiseless_bsc_single_atom(self):
        pmf = vlsf.symbol_density_pmf(CompositionType((1, 1)), vlsf.bsc(0.0), x=0, step=1e-6)
        values, masses = pmf.support()
        assert len(values) == 1
        assert values[0] == pytest.approx(math.log(2.0), abs=1.1e-6)
        assert masses[0] == 1.0

    def test_rounding_modes_differ_by_at_most_one_step(self):
        comp = CompositionType((2, 3))
        w = vlsf.bsc(0.23)
        step = 1e-5
        up = vlsf.symbol_density_pmf(comp, w, 0, step, rounding="up")
        down = vlsf.symbol_density_pmf(comp, w, 0, step, rounding="down")
        vu, _ = up.support()
        vd, _ = down.support()
        assert np.all(vu - vd >= -1e-15)
        assert np.all(vu - vd <= step + 1e-15)

    def test_requires_symbol_in_type(self):
        with pytest.raises(ValueError):
            vlsf.symbol_density_pmf(CompositionType((0, 3)), vlsf.bsc(0.1), x=0)


class TestTypeTailProb:
    def test_empty_sequence_convention(self):
        comp = CompositionType((0, 0))
        assert type_tail_prob(comp, vlsf.bsc(0.11), 5.0).value == 0.0
        assert type_tail_prob(comp, vlsf.bsc(0.11), -1.0).value == 1.0

    def test_very_negative_threshold_gives_one(self):
        comp = CompositionType((2, 1))
        assert type_tail_prob(comp, vlsf.bsc(0.11), -math.inf).value == 1.0
        assert type_tail_prob(comp, vlsf.bsc(0.11), -50.0).value == 1.0

    def test_beyond_support_gives_zero(self):
        comp = CompositionType((2, 1))
        assert type_tail_prob(comp, vlsf.bsc(0.11), 1e9).value == 0.0

    def test_t3_all_zeros_type_matches_brute_force(self):
        # degenerate type: the marginal equals the row, so the density is 0
        comp = CompositionType((3, 0))
        w = vlsf.bsc(0.11)
        computed = type_tail_prob(comp, w, 0.5, step=1e-6).value
        assert computed == pytest.approx(brute_force_tail((3, 0), w, 0.5), abs=1e-12)

    def test_mixed_types_match_brute_force(self):
        w = vlsf.bsc(0.11)
        for counts in [(2, 1), (1, 2), (3, 2), (4, 1)]:
            for lam in (-1.0, 0.0, 0.3, 0.7, 1.2):
                computed = type_tail_prob(CompositionType(counts), w, lam, step=1e-6).value
                oracle = brute_force_tail(counts, w, lam)
                # tiny step: quantization moves at most the boundary mass
                assert computed == pytest.approx(oracle, abs=1e-4)
                assert computed >= oracle - 1e-12

    def test_monotone_in_lambda_and_in_range(self):
        w = vlsf.bsc(0.3)
        comp = CompositionType((3, 4))
        lams = np.linspace(-2.0, 3.0, 41)
        vals = [type_tail_prob(comp, w, float(l)).value for l in lams]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_certified_upper_bound_with_step_shift(self):
        # up-rounded tails dominate the truth and stay within the t*step shift
        for w in (vlsf.bsc(0.11), vlsf.bsc(0.3)):
            for counts in [(1, 1), (3, 1), (2, 4)]:
                t = sum(counts)
                step = 1e-6
                for lam in np.linspace(-1.5, 2.0, 11):
                    lam = float(lam)
                    up = type_tail_prob(CompositionType(counts), w, lam, step=step).value
                    assert up >= brute_force_tail(counts, w, lam) - 1e-12
                    assert up <= brute_force_tail(counts, w, lam - t * step) + 1e-12

    def test_convolved_mean_matches_symbol_means(self):
        # mean of the assembled pmf vs count-weighted per-symbol means
        w = vlsf.bsc(0.21)
        comp = CompositionType((3, 5))
        step = 1e-5
        pmf = type_density_pmf(comp, w, step=step)
        expected = 0.0
        for x, count in enumerate(comp.counts):
            sym = vlsf.symbol_density_pmf(comp, w, x, step)
            expected += count * sym.mean()
        assert pmf.mean() == pytest.approx(expected, abs=comp.t * step)

    def test_sequential_oracle_matches_squaring(self):
        w = vlsf.bsc(0.11)
        comp = CompositionType((23, 17))
        fast_idx, fast_mass = _type_atoms(comp, w, 1e-5, "up", 2**26)
        slow_idx, slow_mass = sequential_type_atoms(comp, w, 1e-5)
        assert np.array_equal(fast_idx, slow_idx)
        assert np.allclose(fast_mass, slow_mass, rtol=0, atol=1e-13)

    def test_grid_overflow(self):
        comp = CompositionType((40, 40))
        with pytest.raises(GridOverflow):
            type_tail_prob(comp, vlsf.bsc(0.11), 1.0, step=1e-9, max_cells=2**20)


class TestMaxTailOverTypes:
    def test_t1_degenerate_types_have_zero_density(self):
        # both length-1 types make the marginal equal the used row
        assert max_tail_over_types(1, vlsf.bsc(0.11), 0.0).value == 0.0
        assert max_tail_over_types(1, vlsf.bsc(0.11), -0.1).value == 1.0

    def test_dominates_every_type(self):
        w = vlsf.bsc(0.11)
        t = 4
        for lam in (0.0, 0.3, 0.8):
            top = max_tail_over_types(t, w, lam)
            assert top.certified
            per_type = [type_tail_prob(c, w, lam).value for c in compositions(t, 2)]
            assert len(per_type) == 5
            assert top.value >= max(per_type) - 1e-11
            assert top.value <= max(per_type) + 1e-11

    def test_beyond_max_density_gives_zero(self):
        w = vlsf.bsc(0.11)
        # per-symbol density is capped by ln(0.89/0.11)
        t = 6
        lam = t * math.log(0.89 / 0.11) + 0.1
        assert max_tail_over_types(t, w, lam).value == 0.0

    def test_type_enumeration_cap(self):
        w = vlsf.DMChannel(np.full((4, 4), 0.25))
        with pytest.raises(TypeEnumerationOverflow):
            max_tail_over_types(100, w, 1.0, type_cap=1000)

    def test_permuted_counts_on_symmetric_channel(self):
        w = vlsf.bsc(0.17)
        for lam in (0.1, 0.5):
            a = type_tail_prob(CompositionType((5, 2)), w, lam).value
            b = type_tail_prob(CompositionType((2, 5)), w, lam).value
            assert a == pytest.approx(b, abs=1e-12)

    def test_generic_path_agrees_with_fast_path(self):
        # three-output channel forces the generic engine; binary uses the kernel
        wide = vlsf.bec(0.25)
        for t in (1, 2, 4, 7):
            for lam in (-0.5, 0.2, 0.9):
                top = max_tail_over_types(t, wide, lam)
                per_type = max(type_tail_prob(c, wide, lam).value for c in compositions(t, 2))
                assert top.value == pytest.approx(per_type, abs=1e-11)

    def test_clt_mode_flagged_and_dominates_exact(self):
        w = vlsf.bsc(0.11)
        for t in (4, 16, 64):
            lam = 0.3 * t * 0.34
            exact = max_tail_over_types(t, w, lam, mode="exact")
            approx = max_tail_over_types(t, w, lam, mode="clt")
            assert not approx.certified
            assert exact.certified
            # the Gaussian estimate carries a large additive slack
            assert approx.value >= exact.value - 1e-9

    def test_clt_degenerate_variance(self):
        w = vlsf.bsc(0.0)
        # all types of a noiseless channel give deterministic density sums
        v = max_tail_over_types(3, w, 0.5, mode="clt")
        assert v.value in (0.0, 1.0)


class TestGridHelpers:
    def test_tail_cut_exactness_at_zero(self):
        assert tail_cut_index(0.0, 1e-5) == 0

    def test_tail_cut_conservative_under_division_noise(self):
        step = 1e-5
        for k in (1, 7, 123456, 987654321):
            lam = k * step  # the fp image of a grid point
            cut = tail_cut_index(lam, step)
            assert cut in (k - 1, k)  # never above: index k+1 must stay in the tail

    def test_quantized_pmf_invariants(self):
        with pytest.raises(ValueError):
            vlsf.QuantizedPMF(0.0, -1e-5, np.array([1.0]))
        with pytest.raises(ValueError):
            vlsf.QuantizedPMF(0.0, 1e-5, np.array([0.5, 0.4]))
        with pytest.raises(ValueError):
            vlsf.QuantizedPMF(0.0, 1e-5, np.array([-0.1, 1.1]))

    def test_composition_enumeration(self):
        comps = list(compositions(4, 2))
        assert len(comps) == vlsf.composition_count(4, 2) == 5
        assert all(c.t == 4 for c in comps)
        comps3 = list(compositions(5, 3))
        assert len(comps3) == vlsf.composition_count(5, 3) == 21
