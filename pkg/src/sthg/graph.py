"""Spatial-temporal heterogeneous graph construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import WEARER_ID, HeteroGraph, NodeType, VideoBundle


@dataclass(frozen=True)
class GraphConfig:
    temporal_window_frames: int = 15
    clip_len: int = 300
    node_stride: int = 1

    def __post_init__(self):
        if self.temporal_window_frames < 0:
            raise ValueError("temporal_window_frames must be >= 0")
        if self.clip_len < 0 or (self.clip_len and self.clip_len <= self.temporal_window_frames):
            raise ValueError("clip_len must be 0 or greater than temporal_window_frames")
        if self.node_stride < 1:
            raise ValueError("node_stride must be >= 1")


def _temporal_pairs(idx: np.ndarray, frames: np.ndarray, tau: int) -> np.ndarray:
    """All index pairs of one identity whose frame gap lies in [1, tau]."""
    if tau == 0 or len(idx) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    hi = np.searchsorted(frames, frames + tau, side="right")
    counts = hi - np.arange(len(frames)) - 1
    left = np.repeat(np.arange(len(frames)), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts) + 1
    right = left + offs
    return np.stack([idx[left], idx[right]], axis=1)


def _build_clip(bundle: VideoBundle, lo: int, hi: int, cfg: GraphConfig) -> HeteroGraph | None:
    stride = cfg.node_stride
    labels = bundle.labels
    # node order: frame ascending, visible tracks by track_id, wearer last
    per_frame: dict[int, list[tuple]] = {}
    for track in sorted(bundle.tracks, key=lambda t: t.track_id):
        for e in track.entries:
            if lo <= e.frame < hi and e.frame % stride == 0:
                per_frame.setdefault(e.frame, []).append((NodeType.VISIBLE, track.track_id, track.person_id, e.feature))
    for f, row in zip(bundle.wearer.frames, bundle.wearer.features):
        f = int(f)
        if lo <= f < hi and f % stride == 0:
            per_frame.setdefault(f, []).append((NodeType.WEARER, None, WEARER_ID, row))
    if not per_frame:
        return None

    types, tids, pids, frames, feats = [], [], [], [], []
    for f in sorted(per_frame):
        for ntype, tid, pid, feat in per_frame[f]:
            types.append(ntype)
            tids.append(tid)
            pids.append(pid)
            frames.append(f)
            feats.append(np.asarray(feat, dtype=np.float64))
    node_types = np.asarray(types, dtype=np.int8)
    frames_arr = np.asarray(frames, dtype=np.int64)
    n = len(types)

    pairs = []
    # spatial: complete graph within each frame
    starts = np.flatnonzero(np.r_[True, frames_arr[1:] != frames_arr[:-1]])
    ends = np.r_[starts[1:], n]
    for s, e in zip(starts, ends):
        if e - s > 1:
            a, b = np.triu_indices(e - s, k=1)
            pairs.append(np.stack([a + s, b + s], axis=1))
    # temporal: same track (or both wearer) within the window
    identity = np.array([t if t is not None else "\0wearer" for t in tids], dtype=object)
    for ident in sorted(set(identity)):
        idx = np.flatnonzero(identity == ident)
        pairs.append(_temporal_pairs(idx, frames_arr[idx], cfg.temporal_window_frames))

    edges = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    edges = edges.reshape(-1, 2).astype(np.int64)
    edges.sort(axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    kinds = (node_types[edges[:, 0]] + node_types[edges[:, 1]]).astype(np.int8)

    node_labels = None
    if labels is not None:
        try:
            node_labels = np.array([labels[(p, f)] for p, f in zip(pids, frames)], dtype=np.float64)
        except KeyError as exc:
            raise ValueError(f"{bundle.video_id}: missing label for node {exc.args[0]}") from None

    return HeteroGraph(
        node_types=node_types, track_ids=tuple(tids), person_ids=tuple(pids), frames=frames_arr,
        features=tuple(feats), edges=edges, edge_kinds=kinds, labels=node_labels,
        video_id=bundle.video_id, fps=bundle.fps,
    )


def build_graph(bundle: VideoBundle, cfg: GraphConfig = GraphConfig()) -> list[HeteroGraph]:
    """Build one graph per clip (or one for the whole video when ``clip_len == 0``)."""
    if not bundle.tracks and len(bundle.wearer.frames) == 0:
        raise ValueError("empty video")
    if cfg.clip_len == 0:
        bounds = [(0, bundle.num_frames)]
    else:
        bounds = [(lo, min(lo + cfg.clip_len, bundle.num_frames)) for lo in range(0, bundle.num_frames, cfg.clip_len)]
    graphs = []
    for lo, hi in bounds:
        g = _build_clip(bundle, lo, hi, cfg)
        if g is not None:
            graphs.append(g)
    return graphs


def graph_density(g: HeteroGraph) -> float:
    n = g.num_nodes
    if n < 2:
        raise ValueError("density needs at least 2 nodes")
    return g.num_edges / (n * (n - 1) / 2)
