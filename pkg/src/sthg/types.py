"""Shared data model: boxes, face tracks, wearer audio, videos, graphs, segments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

WEARER_ID = "CW"


class NodeType(IntEnum):
    VISIBLE = 0
    WEARER = 1


class EdgeKind(IntEnum):
    VV = 0
    VW = 1
    WW = 2

    @classmethod
    def between(cls, a: NodeType, b: NodeType) -> "EdgeKind":
        return cls(int(a) + int(b))


EDGE_KINDS = (EdgeKind.VV, EdgeKind.VW, EdgeKind.WW)


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.x1 >= self.x2 or self.y1 >= self.y2:
            raise ValueError(f"degenerate box {vals}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when they do not overlap."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def frame_to_time(frame_index: int, fps: float) -> float:
    if not fps > 0:
        raise ValueError(f"fps must be positive, got {fps}")
    return frame_index / fps


@dataclass(frozen=True)
class TrackEntry:
    frame: int
    box: BBox
    feature: np.ndarray


@dataclass(frozen=True)
class FaceTrack:
    track_id: str
    person_id: str
    entries: tuple[TrackEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError(f"track {self.track_id} is empty")
        frames = [e.frame for e in self.entries]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"track {self.track_id}: frames not strictly increasing")
        dims = {e.feature.shape for e in self.entries}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            raise ValueError(f"track {self.track_id}: inconsistent feature dimension")

    @property
    def dim(self) -> int:
        return self.entries[0].feature.shape[0]

    @cached_property
    def by_frame(self) -> dict[int, TrackEntry]:
        return {e.frame: e for e in self.entries}


@dataclass(frozen=True)
class WearerStream:
    frames: np.ndarray  # (n,) int
    features: np.ndarray  # (n, d_a)
    person_id: str = WEARER_ID

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.frames) != len(self.features):
            raise ValueError("wearer frames/features length mismatch")
        if np.any(np.diff(self.frames) <= 0):
            raise ValueError("wearer frames not strictly increasing")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def row_of(self) -> dict[int, int]:
        return {int(f): i for i, f in enumerate(self.frames)}

    @classmethod
    def empty(cls, dim: int = 0) -> "WearerStream":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, dim)))


@dataclass(frozen=True)
class VideoBundle:
    """One video's inputs. ``labels`` maps (person_id, frame) -> 0/1."""

    video_id: str
    fps: float
    num_frames: int
    tracks: tuple[FaceTrack, ...]
    wearer: WearerStream
    labels: Optional[Mapping[tuple[str, int], int]] = None

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"{self.video_id}: fps must be positive")
        for t in self.tracks:
            for e in t.entries:
                if not 0 <= e.frame < self.num_frames:
                    raise ValueError(f"{self.video_id}: track {t.track_id} frame {e.frame} out of range")
        if len(self.wearer.frames) and (self.wearer.frames[0] < 0 or self.wearer.frames[-1] >= self.num_frames):
            raise ValueError(f"{self.video_id}: wearer frame out of range")
        ids = [t.track_id for t in self.tracks]
        if len(set(ids)) != len(ids):
            raise ValueError(f"{self.video_id}: duplicate track ids")

    @property
    def persons(self) -> list[str]:
        out = sorted({t.person_id for t in self.tracks})
        if len(self.wearer.frames):
            out.append(WEARER_ID)
        return out


@dataclass(frozen=True)
class Segment:
    speaker: str
    t_start: float
    t_end: float

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValueError(f"non-finite segment {self}")
        if self.t_start < 0 or self.t_start >= self.t_end:
            raise ValueError(f"invalid segment {self.speaker} [{self.t_start}, {self.t_end})")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


Diarization = list[Segment]


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    """Typed nodes and undirected typed edges.

    Each undirected edge is stored once as ``(i, j)`` with ``i < j``; message
    passing sees both directions through :meth:`incoming`.
    """

    node_types: np.ndarray  # (n,) int8 NodeType
    track_ids: tuple[Optional[str], ...]
    person_ids: tuple[str, ...]
    frames: np.ndarray  # (n,) int64
    features: tuple[np.ndarray, ...]
    edges: np.ndarray  # (E, 2) int64, src < dst
    edge_kinds: np.ndarray  # (E,) int8 EdgeKind
    labels: Optional[np.ndarray] = None
    video_id: str = ""
    fps: float = 1.0

    def __post_init__(self):
        n = len(self.node_types)
        if not (len(self.track_ids) == len(self.person_ids) == len(self.frames) == len(self.features) == n):
            raise ValueError("node field lengths differ")
        e = self.edges.reshape(-1, 2)
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loop")
            if np.any(e[:, 0] > e[:, 1]):
                raise ValueError("edges must be stored with src < dst")
            keys = e[:, 0] * n + e[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate edge")
            expected = self.node_types[e[:, 0]].astype(np.int8) + self.node_types[e[:, 1]].astype(np.int8)
            if np.any(expected != self.edge_kinds):
                raise ValueError("edge kind inconsistent with endpoint types")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels must cover every node")

    @property
    def num_nodes(self) -> int:
        return len(self.node_types)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def vis_index(self) -> np.ndarray:
        return np.flatnonzero(self.node_types == NodeType.VISIBLE)

    @cached_property
    def cw_index(self) -> np.ndarray:
        return np.flatnonzero(self.node_types == NodeType.WEARER)

    def _stack(self, idx: np.ndarray) -> np.ndarray:
        if len(idx) == 0:
            return np.zeros((0, 0))
        return np.stack([self.features[i] for i in idx]).astype(np.float64)

    @cached_property
    def x_vis(self) -> np.ndarray:
        return self._stack(self.vis_index)

    @cached_property
    def x_cw(self) -> np.ndarray:
        return self._stack(self.cw_index)

    @cached_property
    def _incoming(self) -> dict[EdgeKind, tuple[np.ndarray, np.ndarray]]:
        n = self.num_nodes
        out = {}
        for k in EDGE_KINDS:
            sel = self.edges[self.edge_kinds == k]
            src = np.concatenate([sel[:, 0], sel[:, 1]])
            dst = np.concatenate([sel[:, 1], sel[:, 0]])
            # sort by (dst, src) so each row lists sources in ascending order
            order = np.lexsort((src, dst))
            src, dst = src[order], dst[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(dst, minlength=n), out=indptr[1:])
            out[k] = (indptr, src.astype(np.int64))
        return out

    def incoming(self, kind: EdgeKind) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, sources) of kind-``kind`` neighbours for every node."""
        return self._incoming[EdgeKind(kind)]

    def without_edge_kinds(self, kinds: Sequence[EdgeKind]) -> "HeteroGraph":
        keep = ~np.isin(self.edge_kinds, [int(k) for k in kinds])
        return HeteroGraph(
            self.node_types, self.track_ids, self.person_ids, self.frames, self.features,
            self.edges[keep], self.edge_kinds[keep], self.labels, self.video_id, self.fps,
        )

    def with_features(self, features: Sequence[np.ndarray]) -> "HeteroGraph":
        return HeteroGraph(
            self.node_types, self.track_ids, self.person_ids, self.frames, tuple(features),
            self.edges, self.edge_kinds, self.labels, self.video_id, self.fps,
        )

    def with_labels(self, labels: Optional[np.ndarray]) -> "HeteroGraph":
        return HeteroGraph(
            self.node_types, self.track_ids, self.person_ids, self.frames, self.features,
            self.edges, self.edge_kinds, labels, self.video_id, self.fps,
        )

    def permuted(self, perm: np.ndarray) -> "HeteroGraph":
        """Relabel nodes so that new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        e = inv[self.edges]
        e.sort(axis=1)
        return HeteroGraph(
            self.node_types[perm], tuple(self.track_ids[i] for i in perm),
            tuple(self.person_ids[i] for i in perm), self.frames[perm],
            tuple(self.features[i] for i in perm), e, self.edge_kinds.copy(),
            None if self.labels is None else self.labels[perm], self.video_id, self.fps,
        )


def label_runs_to_segments(speaker: str, frames: Sequence[int], fps: float) -> list[Segment]:
    """Merge consecutive positive frames into ``[first/fps, (last+1)/fps)`` segments."""
    frames = sorted(frames)
    segs = []
    i = 0
    while i < len(frames):
        j = i
        while j + 1 < len(frames) and frames[j + 1] == frames[j] + 1:
            j += 1
        segs.append(Segment(speaker, frames[i] / fps, (frames[j] + 1) / fps))
        i = j + 1
    return segs


def reference_segments(bundle: VideoBundle) -> list[Segment]:
    """Ground-truth diarization derived from per-frame labels."""
    if bundle.labels is None:
        raise ValueError(f"{bundle.video_id}: no labels")
    positives: dict[str, list[int]] = {}
    for (person, frame), y in bundle.labels.items():
        if y:
            positives.setdefault(person, []).append(frame)
    segs = []
    for person in sorted(positives):
        segs.extend(label_runs_to_segments(person, positives[person], bundle.fps))
    return sorted(segs, key=lambda s: (s.t_start, s.speaker))


__all__ = [
    "BBox", "Diarization", "EDGE_KINDS", "EdgeKind", "FaceTrack", "HeteroGraph", "NodeType",
    "Segment", "TrackEntry", "VideoBundle", "WEARER_ID", "WearerStream", "frame_to_time", "iou",
    "label_runs_to_segments", "reference_segments",
]
