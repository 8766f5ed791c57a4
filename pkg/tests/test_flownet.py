"""Tests for flow network construction from cost volumes."""

import io

import numpy as np
import pytest

from flowalign.costvol import CostVolume, SequenceSet, build_cost_volume
from flowalign.flownet import (
    SINK,
    SOURCE,
    CapacityOverflowError,
    build_network,
    network_from_arcs,
    occlusion_capacity,
    shift_capacity,
    write_dimacs,
)


def volume(n_refs=1, m=2, k_max=1, seed=0, ref_lengths=None):
    rng = np.random.default_rng(seed)
    if ref_lengths is None:
        ref_lengths = [m + 2 * k_max] * n_refs  # all entries valid
    test = rng.normal(size=(m, 4))
    refs = [rng.normal(size=(mi, 4)) for mi in ref_lengths]
    return build_cost_volume(SequenceSet(test, refs), k_max=k_max)


def fixed_volume(costs, k_max):
    """Volume with hand-set costs, everything valid."""
    costs = np.asarray(costs, dtype=np.float64)
    n, m, K = costs.shape
    assert K == 2 * k_max + 1
    return CostVolume(n, m, k_max, costs, np.ones_like(costs, dtype=bool), 2.0,
                      [m + 2 * k_max] * n)


def arcs_by_kind(net):
    """Split forward arcs into (shift, j_occ, i_occ, source, sink) lists."""
    shift, j_occ, i_occ, src, snk = [], [], [], [], []
    for a in range(net.arc_count):
        if not net.is_forward[a]:
            continue
        t, h = int(net.tail[a]), int(net.head[a])
        if t == SOURCE:
            src.append(a)
        elif h == SINK:
            snk.append(a)
        else:
            ti, tj, tk = net.mesh_index(t)
            hi, hj, hk = net.mesh_index(h)
            if (hi - ti, hj - tj, hk - tk) == (0, 0, 1):
                shift.append(a)
            elif (hi - ti, hj - tj, hk - tk) == (0, 1, 0):
                j_occ.append(a)
            elif (hi - ti, hj - tj, hk - tk) == (1, 0, 0):
                i_occ.append(a)
            else:
                raise AssertionError(f"unexpected arc {t}->{h}")
    return shift, j_occ, i_occ, src, snk


class TestCapacityFormulas:
    def test_shift_capacity_mean(self):
        vol = fixed_volume([[[0.2, 0.4, 0.6]]], k_max=1)
        assert shift_capacity(vol, 0, 0, -1) == pytest.approx(0.3)
        assert shift_capacity(vol, 0, 0, 0) == pytest.approx(0.5)

    def test_shift_capacity_zero_pair(self):
        vol = fixed_volume([[[0.0, 0.0, 0.5]]], k_max=1)
        assert shift_capacity(vol, 0, 0, -1) == 0.0

    def test_shift_capacity_pad_propagation(self):
        vol = volume(m=3, k_max=2, ref_lengths=[3])
        # j=0: k=-2 and k=-1 both out of range, costs pad 2.0
        assert shift_capacity(vol, 0, 0, -2) == 2.0

    def test_shift_capacity_bad_index(self):
        vol = fixed_volume([[[0.1, 0.2, 0.3]]], k_max=1)
        with pytest.raises(IndexError):
            shift_capacity(vol, 0, 0, 1)  # k+1 would leave the range

    def test_occlusion_capacity_eta(self):
        vol = fixed_volume([[[0.2, 0.3, 0.4], [0.4, 0.3, 0.2]]], k_max=1)
        got = occlusion_capacity(vol, (0, 0, -1), (0, 1, -1), eta=0.01)
        assert got == pytest.approx(0.01 * (0.2 + 0.4) / 2)

    def test_occlusion_capacity_zero_eta(self):
        vol = fixed_volume([[[0.2, 0.3, 0.4], [0.4, 0.3, 0.2]]], k_max=1)
        assert occlusion_capacity(vol, (0, 0, 0), (0, 1, 0), eta=0.0) == 0.0

    def test_occlusion_eta_one_equals_shift_mean(self):
        vol = volume(n_refs=2, m=4, k_max=1, seed=3)
        got = occlusion_capacity(vol, (0, 1, 0), (1, 1, 0), eta=1.0)
        want = (vol.cost(0, 1, 0) + vol.cost(1, 1, 0)) / 2
        assert got == pytest.approx(want)

    def test_occlusion_rejects_non_adjacent(self):
        vol = volume(n_refs=2, m=4, k_max=1)
        with pytest.raises(ValueError, match="adjacent"):
            occlusion_capacity(vol, (0, 0, 0), (0, 0, 1), eta=0.01)
        with pytest.raises(ValueError, match="adjacent"):
            occlusion_capacity(vol, (0, 2, 0), (0, 1, 0), eta=0.01)


class TestBuildNetwork:
    def test_counts_single_ref(self):
        net = build_network(volume(n_refs=1, m=2, k_max=1))
        assert net.node_count == 8
        shift, j_occ, i_occ, src, snk = arcs_by_kind(net)
        assert len(shift) == 4
        assert len(j_occ) == 3
        assert len(i_occ) == 0
        assert len(src) == 2
        assert len(snk) == 2

    def test_counts_two_refs(self):
        net = build_network(volume(n_refs=2, m=2, k_max=1))
        _, _, i_occ, _, _ = arcs_by_kind(net)
        assert len(i_occ) == 6

    def test_zero_cost_volume_zero_mesh_caps(self):
        vol = fixed_volume(np.zeros((1, 3, 3)), k_max=1)
        net = build_network(vol)
        shift, j_occ, i_occ, _, _ = arcs_by_kind(net)
        for a in shift + j_occ + i_occ:
            assert net.cap[a] == 0

    def test_every_arc_paired(self):
        net = build_network(volume(n_refs=2, m=3, k_max=2, seed=1))
        for a in range(net.arc_count):
            r = int(net.rev[a])
            assert int(net.rev[r]) == a
            assert net.head[r] == net.tail[a]
            assert net.tail[r] == net.head[a]
            assert net.is_forward[a] != net.is_forward[r]
            if not net.is_forward[a]:
                assert net.cap[a] == 0

    def test_cap_inf_exceeds_finite_sum(self):
        net = build_network(volume(n_refs=2, m=4, k_max=1, seed=2))
        finite = net.cap[(net.cap != net.cap_inf) & net.is_forward]
        assert net.cap_inf == finite.sum() + 1

    def test_terminal_arcs_touch_extreme_shifts(self):
        net = build_network(volume(n_refs=2, m=3, k_max=2, seed=3))
        _, _, _, src, snk = arcs_by_kind(net)
        for a in src:
            _, _, k = net.mesh_index(int(net.head[a]))
            assert k == -net.k_max
            assert net.cap[a] == net.cap_inf
        for a in snk:
            _, _, k = net.mesh_index(int(net.tail[a]))
            assert k == net.k_max
            assert net.cap[a] == net.cap_inf
        assert len(src) == len(snk) == net.n_refs * net.n_test

    def test_interior_nodes_six_connected(self):
        net = build_network(volume(n_refs=3, m=4, k_max=2, seed=4))
        out_deg = {}
        in_deg = {}
        for a in range(net.arc_count):
            if not net.is_forward[a]:
                continue
            t, h = int(net.tail[a]), int(net.head[a])
            if t >= 2 and h >= 2:
                out_deg[t] = out_deg.get(t, 0) + 1
                in_deg[h] = in_deg.get(h, 0) + 1
        for i in range(1, net.n_refs - 1):
            for j in range(1, net.n_test - 1):
                for k in range(-net.k_max + 1, net.k_max - 1):
                    v = net.node_of(i, j, k)
                    assert out_deg[v] == 3
                    assert in_deg[v] == 3

    def test_mesh_arcs_increase_one_coordinate(self):
        net = build_network(volume(n_refs=2, m=3, k_max=1, seed=5))
        for a in range(net.arc_count):
            if not net.is_forward[a]:
                continue
            t, h = int(net.tail[a]), int(net.head[a])
            if t >= 2 and h >= 2:
                dt = np.subtract(net.mesh_index(h), net.mesh_index(t))
                assert sorted(dt) == [0, 0, 1]

    def test_scaling_error_bounded(self):
        vol = volume(n_refs=2, m=4, k_max=2, seed=6)
        scale = 1000
        net = build_network(vol, eta=0.01, scale=scale)
        km = vol.k_max
        for a in range(net.arc_count):
            if not net.is_forward[a] or net.cap[a] == net.cap_inf:
                continue
            t, h = int(net.tail[a]), int(net.head[a])
            if t < 2 or h < 2:
                continue
            ti, tj, tk = net.mesh_index(t)
            hi, hj, hk = net.mesh_index(h)
            if (hi - ti, hj - tj, hk - tk) == (0, 0, 1):
                real = shift_capacity(vol, ti, tj, tk)
            else:
                real = occlusion_capacity(vol, (ti, tj, tk), (hi, hj, hk), 0.01)
            assert abs(scale * real - int(net.cap[a])) <= 0.5

    def test_node_id_bijection(self):
        net = build_network(volume(n_refs=2, m=3, k_max=1, seed=7))
        seen = set()
        for i in range(2):
            for j in range(3):
                for k in range(-1, 2):
                    v = net.node_of(i, j, k)
                    assert net.mesh_index(v) == (i, j, k)
                    seen.add(v)
        assert seen == set(range(2, net.node_count))

    def test_deterministic_construction(self):
        a = build_network(volume(n_refs=2, m=4, k_max=2, seed=8))
        b = build_network(volume(n_refs=2, m=4, k_max=2, seed=8))
        np.testing.assert_array_equal(a.head, b.head)
        np.testing.assert_array_equal(a.cap, b.cap)
        np.testing.assert_array_equal(a.adj_start, b.adj_start)

    def test_overflow_guard(self):
        vol = volume(n_refs=1, m=5, k_max=1, seed=9)
        with pytest.raises(CapacityOverflowError):
            build_network(vol, scale=10**18)

    def test_rejects_negative_eta(self):
        with pytest.raises(ValueError, match="eta"):
            build_network(volume(), eta=-0.5)


class TestDimacsDump:
    def test_format(self):
        net = network_from_arcs(4, [(0, 2, 3), (2, 3, 2), (3, 1, 4)])
        buf = io.BytesIO()
        write_dimacs(net, buf)
        lines = buf.getvalue().decode().splitlines()
        assert lines[0] == "p max 4 3"
        assert "n 1 s" in lines and "n 2 t" in lines
        arcs = sorted(ln for ln in lines if ln.startswith("a "))
        assert arcs == ["a 1 3 3", "a 3 4 2", "a 4 2 4"]
