import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sthg.graph import GraphConfig, build_graph, graph_density
from sthg.types import EdgeKind, HeteroGraph, NodeType

from conftest import make_bundle


def edge_set(g):
    return {(int(a), int(b), int(k)) for (a, b), k in zip(g.edges, g.edge_kinds)}


def brute_force_edges(g, tau):
    """Apply the construction rule to every node pair."""
    out = set()
    for i, j in itertools.combinations(range(g.num_nodes), 2):
        gap = abs(int(g.frames[i]) - int(g.frames[j]))
        same = (g.track_ids[i] is not None and g.track_ids[i] == g.track_ids[j]) or (
            g.node_types[i] == NodeType.WEARER and g.node_types[j] == NodeType.WEARER
        )
        if gap == 0 or (same and 1 <= gap <= tau):
            out.add((i, j, int(EdgeKind.between(NodeType(g.node_types[i]), NodeType(g.node_types[j])))))
    return out


def test_single_frame_complete():
    b = make_bundle({"1": [0], "2": [0]}, [0], 1)
    (g,) = build_graph(b, GraphConfig(temporal_window_frames=0, clip_len=0))
    assert g.num_nodes == 3
    kinds = sorted(int(k) for k in g.edge_kinds)
    assert kinds == [EdgeKind.VV, EdgeKind.VW, EdgeKind.VW]


def test_two_frames_one_track():
    b = make_bundle({"1": [0, 1]}, [0, 1], 2)
    (g,) = build_graph(b, GraphConfig(temporal_window_frames=1, clip_len=0))
    assert g.num_nodes == 4
    assert g.num_edges == 4
    counts = np.bincount(g.edge_kinds, minlength=3)
    assert counts.tolist() == [1, 2, 1]
    assert edge_set(g) == brute_force_edges(g, 1)


def test_empty_video():
    b = make_bundle({}, [], 5)
    with pytest.raises(ValueError, match="empty video"):
        build_graph(b)


def test_missing_wearer_frames_have_no_node():
    b = make_bundle({"1": [0, 1, 2]}, [0, 2], 3)
    (g,) = build_graph(b, GraphConfig(temporal_window_frames=1, clip_len=0))
    assert sorted(g.frames[g.node_types == NodeType.WEARER].tolist()) == [0, 2]
    # wearer frames 0 and 2 are 2 apart: no WW edge at tau=1
    assert not np.any(g.edge_kinds == EdgeKind.WW)


def test_labels_attached(small_bundle):
    (g,) = build_graph(small_bundle, GraphConfig(temporal_window_frames=2, clip_len=0))
    for p, f, y in zip(g.person_ids, g.frames, g.labels):
        assert small_bundle.labels[(p, int(f))] == y


def test_density_examples():
    def graph(n, pairs):
        e = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        return HeteroGraph(np.zeros(n, np.int8), (None,) * n, ("a",) * n, np.zeros(n, np.int64),
                           tuple(np.zeros(1) for _ in range(n)), e, np.zeros(len(e), np.int8))

    assert graph_density(graph(4, list(itertools.combinations(range(4), 2)))) == 1.0
    assert graph_density(graph(4, [])) == 0.0
    assert graph_density(graph(4, [(0, 1), (1, 2), (2, 3)])) == 0.5
    with pytest.raises(ValueError):
        graph_density(graph(1, []))


def test_graph_rejects_bad_edges():
    kw = dict(track_ids=(None, None), person_ids=("a", "a"), frames=np.zeros(2, np.int64),
              features=(np.zeros(1), np.zeros(1)))
    with pytest.raises(ValueError, match="self-loop"):
        HeteroGraph(np.zeros(2, np.int8), edges=np.array([[1, 1]]), edge_kinds=np.zeros(1, np.int8), **kw)
    with pytest.raises(ValueError, match="duplicate"):
        HeteroGraph(np.zeros(2, np.int8), edges=np.array([[0, 1], [0, 1]]), edge_kinds=np.zeros(2, np.int8), **kw)
    with pytest.raises(ValueError, match="kind"):
        HeteroGraph(np.array([0, 1], np.int8), edges=np.array([[0, 1]]), edge_kinds=np.zeros(1, np.int8), **kw)


@st.composite
def bundles(draw):
    num_frames = draw(st.integers(1, 14))
    frames = st.sets(st.integers(0, num_frames - 1), max_size=num_frames)
    ntracks = draw(st.integers(0, 3))
    tracks = {str(i): sorted(draw(frames)) for i in range(ntracks)}
    tracks = {k: v for k, v in tracks.items() if v}
    wearer = sorted(draw(frames))
    if not tracks and not wearer:
        wearer = [0]
    tau = draw(st.integers(0, 4))
    clip = draw(st.sampled_from([0, tau + 1, tau + 3, 7]))
    stride = draw(st.integers(1, 2))
    return make_bundle(tracks, wearer, num_frames), GraphConfig(tau, clip, stride)


@settings(max_examples=150, deadline=None)
@given(bundles())
def test_builder_matches_brute_force(case):
    b, cfg = case
    graphs = build_graph(b, cfg)
    for g in graphs:
        assert edge_set(g) == brute_force_edges(g, cfg.temporal_window_frames)
        assert np.all(g.frames % cfg.node_stride == 0)
        if cfg.clip_len:
            assert g.frames.max() // cfg.clip_len == g.frames.min() // cfg.clip_len
    expected = sum(len(t.entries) for t in b.tracks) + len(b.wearer.frames)
    if cfg.node_stride == 1:
        assert sum(g.num_nodes for g in graphs) == expected


@settings(max_examples=60, deadline=None)
@given(bundles())
def test_spatial_completeness_and_temporal_identity(case):
    b, cfg = case
    for g in build_graph(b, cfg):
        es = edge_set(g)
        for f in np.unique(g.frames):
            idx = np.flatnonzero(g.frames == f)
            for i, j in itertools.combinations(idx, 2):
                assert any((i, j, k) in es for k in range(3))
        for i, j, k in es:
            if g.frames[i] != g.frames[j]:
                assert k in (EdgeKind.VV, EdgeKind.WW)
                assert g.person_ids[i] == g.person_ids[j]


def test_deterministic(small_bundle):
    a = build_graph(small_bundle, GraphConfig(2, 3, 1))
    b = build_graph(small_bundle, GraphConfig(2, 3, 1))
    for x, y in zip(a, b):
        assert np.array_equal(x.edges, y.edges) and np.array_equal(x.edge_kinds, y.edge_kinds)
        assert x.track_ids == y.track_ids and np.array_equal(x.frames, y.frames)


def test_clips_do_not_share_temporal_edges():
    b = make_bundle({"1": range(10)}, range(10), 10)
    graphs = build_graph(b, GraphConfig(temporal_window_frames=3, clip_len=4))
    assert [g.frames.min() for g in graphs] == [0, 4, 8]
    assert sum(g.num_nodes for g in graphs) == 20


@pytest.mark.parametrize("tau", [1, 2, 3])
def test_density_non_increasing_in_length(tau):
    dens = []
    for n in range(2 * tau + 1, 2 * tau + 12):
        b = make_bundle({"1": range(n), "2": range(n)}, range(n), n)
        (g,) = build_graph(b, GraphConfig(temporal_window_frames=tau, clip_len=0))
        dens.append(graph_density(g))
    assert all(b <= a + 1e-15 for a, b in zip(dens, dens[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        GraphConfig(temporal_window_frames=-1)
    with pytest.raises(ValueError):
        GraphConfig(temporal_window_frames=10, clip_len=10)
    with pytest.raises(ValueError):
        GraphConfig(node_stride=0)
