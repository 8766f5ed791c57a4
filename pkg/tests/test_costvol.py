"""Tests for cost volume construction and the CVOL cache format."""

import io

import numpy as np
import pytest

from flowalign.costvol import (
    CostVolume,
    CvolFormatError,
    SequenceSet,
    build_cost_volume,
    read_cvol,
    resolve_k_max,
    write_cvol,
)
from flowalign.features import cosine_cost


def random_seqs(rng, n_refs=2, m=5, dim=6, ref_lengths=None):
    if ref_lengths is None:
        ref_lengths = [m] * n_refs
    test = rng.normal(size=(m, dim))
    refs = [rng.normal(size=(mi, dim)) for mi in ref_lengths]
    return SequenceSet(test, refs)


class TestSequenceSet:
    def test_accepts_valid(self):
        s = random_seqs(np.random.default_rng(0))
        assert s.n_refs == 2 and s.n_test == 5

    def test_rejects_short_test(self):
        with pytest.raises(ValueError, match="test"):
            SequenceSet(np.ones((1, 4)), [np.ones((3, 4))])

    def test_rejects_no_refs(self):
        with pytest.raises(ValueError, match="reference"):
            SequenceSet(np.ones((3, 4)), [])

    def test_rejects_short_ref(self):
        with pytest.raises(ValueError, match="reference 0"):
            SequenceSet(np.ones((3, 4)), [np.ones((1, 4))])

    def test_rejects_dim_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            SequenceSet(np.ones((3, 4)), [np.ones((3, 5))])


class TestResolveKmax:
    def test_auto_is_half_shortest_ref(self):
        s = random_seqs(np.random.default_rng(1), n_refs=2, ref_lengths=[9, 14])
        assert resolve_k_max("auto", s) == 4
        assert resolve_k_max(None, s) == 4

    def test_auto_floor_is_one(self):
        s = random_seqs(np.random.default_rng(2), n_refs=1, ref_lengths=[2])
        assert resolve_k_max("auto", s) == 1

    def test_explicit_within_bound(self):
        s = random_seqs(np.random.default_rng(3), n_refs=1, ref_lengths=[20])
        assert resolve_k_max(7, s) == 7

    def test_explicit_clamped(self, caplog):
        s = random_seqs(np.random.default_rng(4), n_refs=1, ref_lengths=[10])
        with caplog.at_level("WARNING"):
            assert resolve_k_max(50, s) == 5
        assert "clamped" in caplog.text

    def test_rejects_nonpositive(self):
        s = random_seqs(np.random.default_rng(5))
        with pytest.raises(ValueError):
            resolve_k_max(0, s)


class TestBuildCostVolume:
    def test_shape(self):
        s = random_seqs(np.random.default_rng(0), n_refs=3, m=6)
        vol = build_cost_volume(s, k_max=2)
        assert vol.costs.shape == (3, 6, 5)
        assert vol.valid.shape == (3, 6, 5)

    def test_self_match_zero_diagonal(self):
        rng = np.random.default_rng(1)
        test = rng.normal(size=(5, 8))
        vol = build_cost_volume(SequenceSet(test, [test.copy()]), k_max=2)
        for j in range(5):
            assert vol.cost(0, j, 0) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_range_entry_is_pad(self):
        s = random_seqs(np.random.default_rng(2), n_refs=1, m=3, ref_lengths=[3])
        vol = build_cost_volume(s, k_max=2)
        # j=0, k=-1 reaches reference frame -1
        assert not vol.is_valid(0, 0, -1)
        assert vol.cost(0, 0, -1) == vol.pad_cost

    def test_every_valid_entry_matches_cosine_cost(self):
        rng = np.random.default_rng(3)
        s = random_seqs(rng, n_refs=2, m=5, ref_lengths=[5, 7])
        vol = build_cost_volume(s, k_max=2)
        for i in range(s.n_refs):
            for j in range(s.n_test):
                for k in range(-2, 3):
                    jk = j + k
                    if 0 <= jk < s.refs[i].shape[0]:
                        assert vol.is_valid(i, j, k)
                        want = cosine_cost(s.test[j], s.refs[i][jk])
                        assert vol.cost(i, j, k) == pytest.approx(want, abs=1e-12)
                    else:
                        assert not vol.is_valid(i, j, k)
                        assert vol.cost(i, j, k) == vol.pad_cost

    def test_validity_mask_ignores_content(self):
        rng = np.random.default_rng(4)
        a = random_seqs(rng, n_refs=1, m=6, ref_lengths=[8])
        b = random_seqs(rng, n_refs=1, m=6, ref_lengths=[8])
        va = build_cost_volume(a, k_max=3)
        vb = build_cost_volume(b, k_max=3)
        np.testing.assert_array_equal(va.valid, vb.valid)

    def test_shifted_copy_zero_at_shift(self):
        rng = np.random.default_rng(5)
        test = rng.normal(size=(8, 6))
        s = 2
        ref = np.roll(test, s, axis=0)  # ref[j] = test[j-s]
        vol = build_cost_volume(SequenceSet(test, [ref]), k_max=3)
        for j in range(8 - s):
            # ref[j+s] = test[j] for non-wrapped rows
            assert vol.cost(0, j, s) == pytest.approx(0.0, abs=1e-12)

    def test_zero_norm_descriptor_costs_two(self):
        test = np.ones((3, 4))
        test[1] = 0.0
        ref = np.ones((3, 4))
        vol = build_cost_volume(SequenceSet(test, [ref]), k_max=1)
        assert vol.cost(0, 1, 0) == 2.0

    def test_costs_within_range(self):
        rng = np.random.default_rng(6)
        s = random_seqs(rng, n_refs=2, m=10, ref_lengths=[9, 12])
        vol = build_cost_volume(s, k_max=4)
        assert np.all(vol.costs[vol.valid] >= 0.0)
        assert np.all(vol.costs[vol.valid] <= 2.0)
        assert np.all(vol.costs[~vol.valid] == vol.pad_cost)

    def test_rejects_bad_pad_cost(self):
        s = random_seqs(np.random.default_rng(7))
        with pytest.raises(ValueError, match="pad_cost"):
            build_cost_volume(s, k_max=2, pad_cost=1.5)


class TestCvolFile:
    def test_round_trip(self):
        rng = np.random.default_rng(8)
        s = random_seqs(rng, n_refs=2, m=5, ref_lengths=[5, 8])
        vol = build_cost_volume(s, k_max=2)
        buf = io.BytesIO()
        write_cvol(vol, buf)
        buf.seek(0)
        back = read_cvol(buf)
        assert back.n_refs == 2 and back.n_test == 5 and back.k_max == 2
        np.testing.assert_allclose(back.costs, vol.costs, rtol=1e-11)
        np.testing.assert_array_equal(back.valid, vol.valid)
        # lengths reconstruct up to the reachable horizon m + k_max
        assert back.ref_lengths == [min(mi, 5 + 2) for mi in vol.ref_lengths]

    def test_header(self):
        s = random_seqs(np.random.default_rng(9), n_refs=1, m=3, ref_lengths=[4])
        vol = build_cost_volume(s, k_max=1)
        buf = io.BytesIO()
        write_cvol(vol, buf)
        assert buf.getvalue().decode().splitlines()[0] == "CVOL 1 3 1 2"

    def test_missing_header(self):
        with pytest.raises(CvolFormatError, match="header"):
            read_cvol(io.StringIO("1 2 3\n"))

    def test_row_count_mismatch(self):
        with pytest.raises(CvolFormatError, match="rows"):
            read_cvol(io.StringIO("CVOL 1 3 1 2\n0 0 0\n"))

    def test_bad_row_width(self):
        with pytest.raises(CvolFormatError, match="costs"):
            read_cvol(io.StringIO("CVOL 1 2 1 2\n0 0\n0 0 0\n"))
