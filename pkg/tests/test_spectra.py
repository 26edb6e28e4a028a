"""Rank functional tests: frozen examples, independent oracles, properties."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overfitlab.spectra import (
    Spectrum,
    TruncationError,
    effective_rank_R,
    effective_rank_r,
    make_example_spectrum,
    rank_profile,
    stable_rank4,
    stable_rank_lower_bound_check,
)


def spec_411():
    return Spectrum(np.array([4.0, 1.0, 1.0]))


class TestSpectrumType:
    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            Spectrum(np.array([]))
        with pytest.raises(ValueError):
            Spectrum(np.array([1.0, -0.5]))
        with pytest.raises(ValueError):
            Spectrum(np.array([1.0, 2.0]))  # ascending
        with pytest.raises(ValueError):
            Spectrum(np.array([0.0, 0.0]))
        with pytest.raises(ValueError):
            Spectrum(np.array([np.inf, 1.0]))
        with pytest.raises(ValueError):
            Spectrum(np.array([[1.0], [0.5]]))

    def test_basic_accessors(self):
        s = spec_411()
        assert s.p == 3
        assert s.trace() == 6.0
        assert s.rank() == 3
        assert Spectrum(np.array([2.0, 0.0])).rank() == 1

    def test_immutable(self):
        s = spec_411()
        with pytest.raises(ValueError):
            s.eigenvalues[0] = 9.0

    def test_equality_and_scaling(self):
        s = spec_411()
        assert s == spec_411()
        assert s != s.scaled(2.0)
        assert s.scaled(2.0).trace() == 12.0
        with pytest.raises(ValueError):
            s.scaled(0.0)

    def test_json_roundtrip_bit_exact(self):
        rng = np.random.default_rng(0)
        vals = np.sort(rng.uniform(1e-12, 1e12, size=40))[::-1]
        s = Spectrum(vals)
        back = Spectrum.from_json(s.to_json())
        assert np.array_equal(back.eigenvalues, s.eigenvalues)
        obj = json.loads(s.to_json())
        assert list(obj) == ["eigenvalues"]

    def test_csv_roundtrip_bit_exact(self):
        rng = np.random.default_rng(1)
        vals = np.sort(rng.standard_normal(25) ** 2 + 1e-9)[::-1]
        s = Spectrum(vals)
        back = Spectrum.from_csv(s.to_csv())
        assert np.array_equal(back.eigenvalues, s.eigenvalues)
        with pytest.raises(ValueError):
            Spectrum.from_csv("nope\n1.0\n")


class TestEffectiveRanks:
    def test_r_identity(self):
        assert effective_rank_r(Spectrum(np.ones(3)), 0) == 3.0

    def test_r_values(self):
        s = spec_411()
        assert effective_rank_r(s, 0) == pytest.approx((4 + 1 + 1) / 4, rel=1e-15)
        assert effective_rank_r(s, 1) == pytest.approx((1 + 1) / 1, rel=1e-15)

    def test_R_flat(self):
        for p in (1, 5, 17):
            assert effective_rank_R(Spectrum(np.ones(p)), 0) == pytest.approx(p, rel=1e-15)

    def test_R_values(self):
        s = spec_411()
        assert effective_rank_R(s, 0) == pytest.approx(36 / 18, rel=1e-15)
        assert effective_rank_R(s, 1) == pytest.approx(4 / 2, rel=1e-15)

    def test_out_of_range(self):
        s = spec_411()
        for k in (-1, 3, 10):
            with pytest.raises(TruncationError):
                effective_rank_r(s, k)
            with pytest.raises(TruncationError):
                effective_rank_R(s, k)

    def test_degenerate_tail(self):
        s = Spectrum(np.array([2.0, 1.0, 0.0]))
        with pytest.raises(TruncationError):
            effective_rank_r(s, 2)
        with pytest.raises(TruncationError):
            effective_rank_R(s, 2)


class TestStableRank:
    def test_flat(self):
        for p in (1, 4, 12):
            assert stable_rank4(Spectrum(np.ones(p)), of_square_root=True) == pytest.approx(p)

    def test_sqrt_form(self):
        assert stable_rank4(spec_411(), of_square_root=True) == pytest.approx(36 / 18, rel=1e-15)

    def test_matrix_form(self):
        # (16+1+1)^2 / (256+1+1)
        assert stable_rank4(spec_411(), of_square_root=False) == pytest.approx(
            324 / 258, rel=1e-15
        )


class TestRankProfile:
    def test_identity_frak(self):
        # flat spectrum: R_02 = p, exponent collapses to p, prefactor 2p
        p = 10
        prof = rank_profile(Spectrum(np.ones(p)), 0, c_small=0.5)
        assert prof.frak_R_k == pytest.approx(2 * 0.5**p, rel=1e-12)

    def test_k0_collapse(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            vals = np.sort(rng.uniform(0.1, 5.0, size=rng.integers(2, 30)))[::-1]
            s = Spectrum(vals)
            prof = rank_profile(s, 0)
            assert prof.R_k2 == prof.R_k == prof.srank4_sqrt

    def test_211_oracle(self):
        # direct evaluation with plain arithmetic, independent of the library path
        lam = [2.0, 1.0, 1.0]
        p, k, c = 3, 1, 0.5
        tail1 = sum(lam[k:])
        tail2 = sum(v * v for v in lam[k:])
        R_k = tail1**2 / tail2
        s4 = sum(v * v for v in lam) ** 2 / sum(v**4 for v in lam)
        R_k2 = (1 - math.sqrt(k / s4)) * R_k
        frak = (4 * p - k) ** 2 / (8 * p) * c ** ((16 * p * p / (4 * p - k) ** 2) * R_k2) / R_k2
        prof = rank_profile(Spectrum(np.array(lam)), k, c_small=c)
        assert prof.R_k == pytest.approx(R_k, rel=1e-14)
        assert prof.R_k2 == pytest.approx(R_k2, rel=1e-14)
        assert prof.frak_R_k == pytest.approx(frak, rel=1e-13)

    def test_negative_R_k2_error(self):
        # srank4(Sigma) of (4,1,1) is ~1.256, so k=2 overshoots it
        with pytest.raises(ValueError, match="negative R_k2"):
            rank_profile(spec_411(), 2)

    def test_c_small_validation(self):
        for bad in (0.0, 1.0, -0.2, 2.0):
            with pytest.raises(ValueError):
                rank_profile(spec_411(), 0, c_small=bad)

    def test_deterministic(self):
        s = make_example_spectrum(50, 0.01)
        a = rank_profile(s, 1, 0.37)
        b = rank_profile(s, 1, 0.37)
        assert a == b  # bit-identical fields


class TestStableRankLowerBound:
    def test_identity_equality(self):
        for p in (2, 10, 50):
            chk = stable_rank_lower_bound_check(Spectrum(np.ones(p)), 0)
            assert chk.floor_ok
            assert chk.holds
            assert chk.lhs == pytest.approx(p, rel=1e-14)
            assert chk.rhs == pytest.approx(p, rel=1e-14)

    def test_two_block_oracle(self):
        lam = np.concatenate([np.ones(50), np.full(50, 0.4)])
        s = Spectrum(lam)
        # closed forms evaluated independently
        p, k = 100, 50
        lhs = 70.0**2 / 58.0
        s4 = 58.0**2 / (50 + 50 * 0.4**4)
        R_k = 20.0**2 / 8.0
        rhs = (16 * p * p / (4 * p - k) ** 2) * (1 - math.sqrt(k / s4)) * R_k
        chk = stable_rank_lower_bound_check(s, k)
        assert chk.lhs == pytest.approx(lhs, rel=1e-12)
        assert chk.rhs == pytest.approx(rhs, rel=1e-12)
        assert chk.floor_ok  # min 0.4 >= 70/200
        assert chk.holds

    def test_example_spectrum_beyond_srank(self):
        # k = round(log(1/eps)) exceeds srank4(Sigma) here, so the right side
        # goes negative and the inequality holds vacuously
        s = make_example_spectrum(200, 1e-3)
        k = round(math.log(1e3))
        chk = stable_rank_lower_bound_check(s, k)
        assert chk.rhs < 0
        assert chk.holds
        assert chk.floor_ok

    def test_floor_flag(self):
        s = Spectrum(np.array([10.0, 0.1, 0.1, 0.1, 0.1]))
        chk = stable_rank_lower_bound_check(s, 0)
        assert not chk.floor_ok  # 0.1 < 10.4/10
        # result still reported
        assert math.isfinite(chk.lhs) and math.isfinite(chk.rhs)


class TestMakeExampleSpectrum:
    def test_dimensions(self):
        s = make_example_spectrum(200, 1e-3, 1.0)
        assert s.p == 1382  # ceil(200 * log(1000))
        s2 = make_example_spectrum(10, 0.5)
        assert s2.p == 7  # ceil(10 * 0.6931)

    def test_shape(self):
        s = make_example_spectrum(30, 0.07)
        eig = s.eigenvalues
        # strictly decreasing until exp(-k) falls below the ulp of epsilon,
        # never increasing, and never below the flat tail level
        assert np.all(np.diff(eig) <= 0)
        assert np.all(np.diff(eig[:20]) < 0)
        assert np.all(eig >= 0.07)

    def test_trace_geometric_oracle(self):
        s = make_example_spectrum(200, 1e-3)
        p = s.p
        oracle = (1 - math.exp(-p)) / (math.e - 1) + p * 1e-3
        assert s.trace() == pytest.approx(oracle, rel=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError, match="invalid epsilon"):
            make_example_spectrum(10, 0.0)
        with pytest.raises(ValueError, match="invalid epsilon"):
            make_example_spectrum(10, 1.5)
        with pytest.raises(ValueError):
            make_example_spectrum(3, 1e-3)  # log(1/eps) >= N
        with pytest.raises(ValueError):
            make_example_spectrum(10, 0.5, c_ratio=0.0)


positive_spectra = st.lists(
    st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False),
    min_size=1,
    max_size=48,
).map(lambda vals: Spectrum(np.sort(np.asarray(vals))[::-1]))


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(positive_spectra, st.integers(min_value=0, max_value=47))
    def test_rank_bounds(self, s, k):
        if k >= s.p:
            k = s.p - 1
        r = effective_rank_r(s, k)
        R = effective_rank_R(s, k)
        slack = 1e-9
        assert 1 - slack <= r <= s.p - k + slack
        assert 1 - slack <= R <= s.p - k + slack

    @settings(max_examples=100, deadline=None)
    @given(
        positive_spectra,
        st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False),
    )
    def test_scaling_invariance(self, s, t):
        scaled = s.scaled(t)
        for k in {0, s.p // 2}:
            assert effective_rank_r(scaled, k) == pytest.approx(
                effective_rank_r(s, k), rel=1e-12
            )
            assert effective_rank_R(scaled, k) == pytest.approx(
                effective_rank_R(s, k), rel=1e-12
            )
        assert stable_rank4(scaled, True) == pytest.approx(stable_rank4(s, True), rel=1e-12)
        assert stable_rank4(scaled, False) == pytest.approx(stable_rank4(s, False), rel=1e-12)
        prof_s = rank_profile(s, 0, 0.5)
        prof_t = rank_profile(scaled, 0, 0.5)
        assert prof_t.frak_R_k == pytest.approx(prof_s.frak_R_k, rel=1e-11)

    @settings(max_examples=100, deadline=None)
    @given(positive_spectra)
    def test_R0_equals_srank4_sqrt(self, s):
        assert effective_rank_R(s, 0) == stable_rank4(s, of_square_root=True)

    @settings(max_examples=60, deadline=None)
    @given(positive_spectra)
    def test_profile_ordering(self, s):
        prof = rank_profile(s, 0)
        assert prof.R_k2 <= prof.R_k * (1 + 1e-15)
