"""Evaluation metrics: average precision, ASD mAP (with and without IoU matching), DER and WER."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .types import BBox, NodeType, Segment, iou

EXHAUSTIVE_MAPPING_LIMIT = 8


def average_precision(scored: Iterable[tuple[float, int]]) -> float:
    """Non-interpolated AP: mean of precision@k over the ranks k of the positives.

    Ties in score keep input order.
    """
    pairs = list(scored)
    labels = np.array([int(y) for _, y in pairs], dtype=np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("undefined AP: no positive labels")
    scores = np.array([s for s, _ in pairs], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    tp = np.cumsum(hits)
    ranks = np.arange(1, len(hits) + 1)
    return float(np.sum((tp / ranks)[hits == 1]) / n_pos)


POPULATIONS = {"visible": (NodeType.VISIBLE,), "wearer": (NodeType.WEARER,), "all": (NodeType.VISIBLE, NodeType.WEARER)}


def asd_map(scores: Sequence[np.ndarray], labels: Sequence[np.ndarray], node_types: Sequence[np.ndarray],
            population: str = "all") -> float:
    """Pooled AP of per-node speaking scores across videos (perfect face detector).

    Each argument holds one array per video, aligned node by node.
    """
    keep = POPULATIONS[population]
    s, y = [], []
    for sc, lb, nt in zip(scores, labels, node_types):
        mask = np.isin(nt, [int(k) for k in keep])
        s.append(np.asarray(sc)[mask])
        y.append(np.asarray(lb)[mask])
    s = np.concatenate(s) if s else np.zeros(0)
    y = np.concatenate(y) if y else np.zeros(0)
    return average_precision(zip(s, y))


def asd_map_report(scores, labels, node_types) -> dict[str, float]:
    out = {}
    for pop in POPULATIONS:
        try:
            out[pop] = asd_map(scores, labels, node_types, pop)
        except ValueError:
            out[pop] = float("nan")
    return out


@dataclass(frozen=True)
class ScoredDetection:
    frame_index: int
    box: BBox
    score: float
    person_id: str = ""
    video_id: str = ""


@dataclass(frozen=True)
class GroundTruthFace:
    frame_index: int
    box: BBox
    speaking: int
    video_id: str = ""


def match_detections(preds: Sequence[ScoredDetection], gt: Sequence[GroundTruthFace],
                     iou_thr: float = 0.5) -> np.ndarray:
    """Label each prediction with the speaking flag of its matched ground-truth face (0 if unmatched).

    Within a frame, predictions are visited by descending score and take the
    unmatched ground-truth box of highest IoU, provided IoU > ``iou_thr``.
    """
    gt_by_frame: dict[tuple, list[GroundTruthFace]] = {}
    for g in gt:
        gt_by_frame.setdefault((g.video_id, g.frame_index), []).append(g)
    labels = np.zeros(len(preds), dtype=np.int64)
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    used: set[tuple] = set()
    for i in order:
        p = preds[i]
        key = (p.video_id, p.frame_index)
        best, best_iou = None, iou_thr
        for j, g in enumerate(gt_by_frame.get(key, ())):
            if (key, j) in used:
                continue
            v = iou(p.box, g.box)
            if v > best_iou:
                best, best_iou = j, v
        if best is not None:
            used.add((key, best))
            labels[i] = gt_by_frame[key][best].speaking
    return labels


def asd_map_at_iou(preds: Sequence[ScoredDetection], gt: Sequence[GroundTruthFace], iou_thr: float = 0.5) -> float:
    """AP over detected faces after IoU matching to ground truth.

    AP is taken over the predictions only; ground-truth faces that no
    prediction matched do not enter the ranking.
    """
    if not 0 < iou_thr < 1:
        raise ValueError("iou_thr must lie in (0, 1)")
    gt = [g if isinstance(g, GroundTruthFace) else GroundTruthFace(*g) for g in gt]
    if not any(g.speaking for g in gt):
        raise ValueError("no speaking ground-truth face")
    labels = match_detections(preds, gt, iou_thr)
    return average_precision(zip([p.score for p in preds], labels))


# diarization error rate

@dataclass(frozen=True)
class DERBreakdown:
    missed_speech: float
    false_alarm: float
    speaker_confusion: float
    total_ref_speech: float
    correct: float = 0.0

    @property
    def der(self) -> float:
        return (self.missed_speech + self.false_alarm + self.speaker_confusion) / self.total_ref_speech

    def __add__(self, other: "DERBreakdown") -> "DERBreakdown":
        return DERBreakdown(
            self.missed_speech + other.missed_speech, self.false_alarm + other.false_alarm,
            self.speaker_confusion + other.speaker_confusion, self.total_ref_speech + other.total_ref_speech,
            self.correct + other.correct,
        )


def normalize_segments(segs: Iterable[Segment]) -> list[Segment]:
    """Sort and merge overlapping/touching segments per speaker."""
    by_spk: dict[str, list[Segment]] = {}
    for s in segs:
        by_spk.setdefault(s.speaker, []).append(s)
    out = []
    for spk, lst in by_spk.items():
        lst.sort(key=lambda s: (s.t_start, s.t_end))
        cur_s, cur_e = lst[0].t_start, lst[0].t_end
        for s in lst[1:]:
            if s.t_start <= cur_e:
                cur_e = max(cur_e, s.t_end)
            else:
                out.append(Segment(spk, cur_s, cur_e))
                cur_s, cur_e = s.t_start, s.t_end
        out.append(Segment(spk, cur_s, cur_e))
    return sorted(out, key=lambda s: (s.t_start, s.speaker, s.t_end))


def _activity(segs: list[Segment], speakers: list[str], points: np.ndarray) -> np.ndarray:
    act = np.zeros((len(speakers), len(points)), dtype=bool)
    for r, spk in enumerate(speakers):
        mine = [s for s in segs if s.speaker == spk]
        starts = np.array([s.t_start for s in mine])
        ends = np.array([s.t_end for s in mine])
        idx = np.searchsorted(starts, points, side="right") - 1
        ok = idx >= 0
        act[r, ok] = ends[idx[ok]] > points[ok]
    return act


def optimal_mapping(overlap: np.ndarray) -> list[tuple[int, int]]:
    """One-to-one (ref, hyp) pairs maximising total overlap.

    Exhaustive for small speaker sets; Hungarian assignment beyond that.
    """
    nr, nh = overlap.shape
    if nr == 0 or nh == 0:
        return []
    if max(nr, nh) <= EXHAUSTIVE_MAPPING_LIMIT:
        best, best_val = None, -1.0
        if nr <= nh:
            for perm in itertools.permutations(range(nh), nr):
                v = sum(overlap[r, h] for r, h in enumerate(perm))
                if v > best_val:
                    best, best_val = [(r, h) for r, h in enumerate(perm)], v
        else:
            for perm in itertools.permutations(range(nr), nh):
                v = sum(overlap[r, h] for h, r in enumerate(perm))
                if v > best_val:
                    best, best_val = [(r, h) for h, r in enumerate(perm)], v
        return best
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return list(zip(rows.tolist(), cols.tolist()))


def der(ref: Sequence[Segment], hyp: Sequence[Segment], collar: float = 0.0) -> DERBreakdown:
    """Diarization error rate over an exact partition of the timeline.

    ``collar`` removes ``+-collar`` seconds around every reference boundary
    from scoring.
    """
    ref = normalize_segments(ref)
    hyp = normalize_segments(hyp)
    bounds = {0.0}
    for s in list(ref) + list(hyp):
        bounds.update((s.t_start, s.t_end))
    zones = []
    if collar > 0:
        for s in ref:
            for b in (s.t_start, s.t_end):
                zones.append((max(0.0, b - collar), b + collar))
                bounds.update(zones[-1])
    t = np.array(sorted(bounds))
    if len(t) < 2:
        raise ValueError("total reference speech is zero")
    mids = (t[:-1] + t[1:]) / 2
    dur = np.diff(t)
    if zones:
        z = normalize_segments(Segment("_", a, b) for a, b in zones)
        dur = dur * ~_activity(z, ["_"], mids)[0]

    ref_spk = sorted({s.speaker for s in ref})
    hyp_spk = sorted({s.speaker for s in hyp})
    R = _activity(ref, ref_spk, mids)
    H = _activity(hyp, hyp_spk, mids)
    overlap = (R[:, None, :] & H[None, :, :]) @ dur if len(ref_spk) and len(hyp_spk) else np.zeros((len(ref_spk), len(hyp_spk)))
    mapping = optimal_mapping(overlap)

    n_ref = R.sum(axis=0)
    n_hyp = H.sum(axis=0)
    n_corr = np.zeros(len(mids))
    for r, h in mapping:
        n_corr += R[r] & H[h]
    total = float(n_ref @ dur)
    if total <= 0:
        raise ValueError("total reference speech is zero")
    return DERBreakdown(
        missed_speech=float(np.maximum(n_ref - n_hyp, 0) @ dur),
        false_alarm=float(np.maximum(n_hyp - n_ref, 0) @ dur),
        speaker_confusion=float((np.minimum(n_ref, n_hyp) - n_corr) @ dur),
        total_ref_speech=total,
        correct=float(n_corr @ dur),
    )


def der_corpus(pairs: Iterable[tuple[Sequence[Segment], Sequence[Segment]]], collar: float = 0.0) -> DERBreakdown:
    """Time-weighted DER over several recordings, each with its own speaker mapping."""
    total: Optional[DERBreakdown] = None
    for ref, hyp in pairs:
        b = der(ref, hyp, collar)
        total = b if total is None else total + b
    if total is None:
        raise ValueError("no recordings")
    return total


# word error rate

def word_edits(ref_words: Sequence[str], hyp_words: Sequence[str]) -> int:
    vocab: dict[str, int] = {}
    a = np.array([vocab.setdefault(w, len(vocab)) for w in ref_words], dtype=np.int64)
    b = np.array([vocab.setdefault(w, len(vocab)) for w in hyp_words], dtype=np.int64)
    return kernels.edit_distance(a, b)


def wer(ref_words: Sequence[str], hyp_words: Sequence[str]) -> float:
    """(substitutions + deletions + insertions) / len(ref)."""
    if isinstance(ref_words, str):
        ref_words = ref_words.split()
    if isinstance(hyp_words, str):
        hyp_words = hyp_words.split()
    if len(ref_words) == 0:
        raise ValueError("empty reference")
    return word_edits(ref_words, hyp_words) / len(ref_words)


def wer_corpus(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> float:
    edits = words = 0
    for r, h in pairs:
        edits += word_edits(r, h)
        words += len(r)
    if words == 0:
        raise ValueError("empty reference")
    return edits / words
