"""Scores to diarization, then VAD fusion and voice matching."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .graph import GraphConfig, build_graph
from .metrics import normalize_segments
from .model import ModelConfig, ModelParams, predict
from .types import WEARER_ID, Segment, VideoBundle

log = logging.getLogger(__name__)


class VadTarget(str, Enum):
    NONE = "none"
    CW_ONLY = "cw_only"
    OTHERS_ONLY = "others_only"
    ALL = "all"

    def applies_to(self, speaker: str) -> bool:
        if self is VadTarget.ALL:
            return True
        if self is VadTarget.CW_ONLY:
            return speaker == WEARER_ID
        if self is VadTarget.OTHERS_ONLY:
            return speaker != WEARER_ID
        return False


class VadMode(str, Enum):
    INTERSECT = "intersect"
    UNION = "union"


@dataclass(frozen=True)
class PostConfig:
    score_threshold: float = 0.5
    min_segment_dur: float = 0.2
    merge_gap: float = 0.3
    vad_target: VadTarget = VadTarget.CW_ONLY
    vad_mode: VadMode = VadMode.INTERSECT
    voice_match_threshold: float = 0.2
    voice_match_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "vad_target", VadTarget(self.vad_target))
        object.__setattr__(self, "vad_mode", VadMode(self.vad_mode))
        if not 0 < self.score_threshold < 1:
            raise ValueError("score_threshold must lie in (0, 1)")
        if self.min_segment_dur < 0 or self.merge_gap < 0:
            raise ValueError("min_segment_dur and merge_gap must be >= 0")
        if not -1 <= self.voice_match_threshold <= 1:
            raise ValueError("voice_match_threshold must lie in [-1, 1]")


def normalize_vad(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sort and merge overlapping VAD intervals; drops empty ones."""
    ivs = sorted((float(a), float(b)) for a, b in intervals if b > a)
    out: list[tuple[float, float]] = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def scores_to_segments(scores: Mapping[str, Mapping[int, float]], fps: float, cfg: PostConfig = PostConfig(),
                       frame_step: int = 1) -> list[Segment]:
    """Threshold per-frame scores (``score >= threshold``) into per-speaker segments.

    Runs of positive frames become ``[first/fps, (last+frame_step)/fps)``;
    neighbours closer than ``merge_gap`` are merged, then segments shorter
    than ``min_segment_dur`` are dropped.
    """
    out = []
    for spk in sorted(scores):
        pos = sorted(f for f, s in scores[spk].items() if s >= cfg.score_threshold)
        runs: list[list[int]] = []
        for f in pos:
            if runs and f - runs[-1][1] == frame_step:
                runs[-1][1] = f
            else:
                runs.append([f, f])
        merged: list[list[int]] = []
        for a, b in runs:
            end = b + frame_step
            if merged and (a - merged[-1][1]) / fps < cfg.merge_gap:
                merged[-1][1] = end
            else:
                merged.append([a, end])
        for a, end in merged:
            if (end - a) / fps >= cfg.min_segment_dur:
                out.append(Segment(spk, a / fps, end / fps))
    return sorted(out, key=lambda s: (s.t_start, s.speaker))


def _intersect(seg: Segment, vad: list[tuple[float, float]]) -> list[Segment]:
    out = []
    for a, b in vad:
        lo, hi = max(a, seg.t_start), min(b, seg.t_end)
        if lo < hi:
            out.append(Segment(seg.speaker, lo, hi))
    return out


def _extend(seg: Segment, vad: list[tuple[float, float]]) -> Segment:
    lo, hi = seg.t_start, seg.t_end
    for a, b in vad:
        if a < seg.t_end and b > seg.t_start:
            lo, hi = min(lo, a), max(hi, b)
    return Segment(seg.speaker, lo, hi)


def vad_fuse(diar: Sequence[Segment], vad: Sequence[tuple[float, float]], cfg: PostConfig = PostConfig()) -> list[Segment]:
    if cfg.vad_target is VadTarget.NONE:
        return list(diar)
    vad = normalize_vad(vad)
    kept, fused = [], []
    for seg in diar:
        if not cfg.vad_target.applies_to(seg.speaker):
            kept.append(seg)
        elif cfg.vad_mode is VadMode.INTERSECT:
            fused.extend(_intersect(seg, vad))
        else:
            fused.append(_extend(seg, vad))
    return sorted(kept + normalize_segments(fused), key=lambda s: (s.t_start, s.speaker))


def _audio_frames(bundle: VideoBundle, d_a: int) -> dict[str, dict[int, np.ndarray]]:
    """Per-speaker audio vectors by frame: wearer features, or the last ``d_a`` coords of visible features."""
    out: dict[str, dict[int, np.ndarray]] = {}
    for t in bundle.tracks:
        dst = out.setdefault(t.person_id, {})
        for e in t.entries:
            dst.setdefault(e.frame, e.feature[-d_a:])
    if len(bundle.wearer.frames):
        out[WEARER_ID] = {int(f): row for f, row in zip(bundle.wearer.frames, bundle.wearer.features)}
    return out


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def voice_match(diar: Sequence[Segment], bundle: VideoBundle, cfg: PostConfig = PostConfig()) -> list[Segment]:
    """Drop segments whose mean audio vector is dissimilar to the speaker's centroid.

    The centroid is the mean audio vector over all of the speaker's in-segment
    frames; a segment survives when ``cos(segment mean, centroid) >= threshold``.
    """
    if not cfg.voice_match_enabled:
        return list(diar)
    d_a = bundle.wearer.dim if len(bundle.wearer.frames) else None
    if d_a is None:
        if not bundle.tracks:
            return list(diar)
        raise ValueError("voice matching needs the wearer stream to fix the audio dimension")
    audio = _audio_frames(bundle, d_a)
    seg_vecs: list[np.ndarray | None] = []
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for seg in diar:
        frames = audio.get(seg.speaker, {})
        lo = int(np.ceil(seg.t_start * bundle.fps - 1e-9))
        hi = int(np.ceil(seg.t_end * bundle.fps - 1e-9))
        vecs = [frames[f] for f in range(lo, hi) if f in frames]
        if not vecs:
            seg_vecs.append(None)
            continue
        stack = np.stack(vecs)
        seg_vecs.append(stack.mean(axis=0))
        sums[seg.speaker] = sums.get(seg.speaker, 0) + stack.sum(axis=0)
        counts[seg.speaker] = counts.get(seg.speaker, 0) + len(vecs)
    out, uncovered = [], 0
    for seg, vec in zip(diar, seg_vecs):
        if vec is None:
            uncovered += 1
            continue
        centroid = sums[seg.speaker] / counts[seg.speaker]
        if _cosine(vec, centroid) >= cfg.voice_match_threshold:
            out.append(seg)
    if uncovered:
        log.warning("voice_match: dropped %d segment(s) with no covered frames", uncovered)
    return out


@dataclass
class NodeScores:
    """Per-node speaking scores for a whole video, concatenated over clips."""

    video_id: str
    node_types: np.ndarray
    person_ids: list[str]
    track_ids: list
    frames: np.ndarray
    scores: np.ndarray
    labels: np.ndarray | None

    def per_person(self) -> dict[str, dict[int, float]]:
        out: dict[str, dict[int, float]] = {}
        for p, f, s in zip(self.person_ids, self.frames, self.scores):
            d = out.setdefault(p, {})
            d[int(f)] = max(float(s), d.get(int(f), -1.0))
        return out


def score_video(bundle: VideoBundle, params: ModelParams, graph_cfg: GraphConfig, model_cfg: ModelConfig) -> NodeScores:
    graphs = build_graph(bundle, graph_cfg)
    scores = [predict(g, params, model_cfg) for g in graphs]
    labelled = all(g.labels is not None for g in graphs)
    return NodeScores(
        video_id=bundle.video_id,
        node_types=np.concatenate([g.node_types for g in graphs]),
        person_ids=[p for g in graphs for p in g.person_ids],
        track_ids=[t for g in graphs for t in g.track_ids],
        frames=np.concatenate([g.frames for g in graphs]),
        scores=np.concatenate(scores),
        labels=np.concatenate([g.labels for g in graphs]) if labelled else None,
    )


def diarize_scores(ns: NodeScores, bundle: VideoBundle, post_cfg: PostConfig, vad, frame_step: int = 1) -> list[Segment]:
    segs = scores_to_segments(ns.per_person(), bundle.fps, post_cfg, frame_step)
    segs = vad_fuse(segs, vad, post_cfg)
    return voice_match(segs, bundle, post_cfg)


def run_pipeline(bundle: VideoBundle, params: ModelParams, graph_cfg: GraphConfig, model_cfg: ModelConfig,
                 post_cfg: PostConfig, vad: Sequence[tuple[float, float]]) -> list[Segment]:
    """build_graph -> predict -> scores_to_segments -> vad_fuse -> voice_match."""
    ns = score_video(bundle, params, graph_cfg, model_cfg)
    return diarize_scores(ns, bundle, post_cfg, vad, graph_cfg.node_stride)
