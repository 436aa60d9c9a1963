"""Seeded synthetic conversations plus brute-force oracles for the metrics.

Turn-taking model
-----------------
A video is a sequence of turns with geometric durations. Each turn either
hands the floor to one visible speaker or to nobody visible. The camera
wearer's state is then drawn per turn: with probability ``coupling`` it is
tied to the floor (wearer speaks exactly when no visible speaker does),
otherwise it is an independent coin with probability
``INDEPENDENT_CW_RATE``.

Features
--------
Every node gets unit Gaussian noise. A visible speaker who is talking adds
``s`` to the first ``VISUAL_BLOCK`` coordinates (lip motion) and
``s * voice`` to the trailing ``d_a`` audio coordinates. ``voice`` is a
per-person unit vector made of a shared speech direction (uniform over the
audio block) plus a speaker-specific offset of relative size
``VOICE_SPREAD``. The wearer's audio-only feature adds ``s * voice``
when speaking. With ``cw_false_positive_rate > 0`` some silent turns carry a
non-speech burst that looks like wearer speech in the features while the
label stays 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .types import WEARER_ID, BBox, FaceTrack, Segment, TrackEntry, VideoBundle, WearerStream, reference_segments

VISUAL_BLOCK = 4
VOICE_SPREAD = 0.5
P_SILENT_FLOOR = 0.4
INDEPENDENT_CW_RATE = 0.3
MEAN_TURN_SECONDS = 1.2
WORDS_PER_SECOND = 2.5
BURST_SECONDS = 0.5
VOCAB = ("yeah", "okay", "so", "we", "should", "go", "there", "now", "what", "about", "the", "car",
         "dinner", "later", "right", "i", "think", "maybe", "no", "sure")


@dataclass(frozen=True)
class ScenarioConfig:
    num_videos: int = 4
    num_frames: int = 300
    fps: float = 30.0
    num_visible_speakers: int = 3
    d_av: int = 16
    d_a: int = 8
    speaking_signal_strength: float = 3.0
    cross_speaker_coupling: float = 0.5
    cw_false_positive_rate: float = 0.0
    vad_accuracy: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if min(self.num_videos, self.num_frames, self.num_visible_speakers, self.d_av, self.d_a) <= 0:
            raise ValueError("counts and dimensions must be positive")
        if self.d_a > self.d_av:
            raise ValueError("d_a cannot exceed d_av (audio block lives inside the visible feature)")
        if not self.fps > 0 or self.speaking_signal_strength < 0:
            raise ValueError("fps must be positive and signal strength non-negative")
        for name in ("cross_speaker_coupling", "cw_false_positive_rate", "vad_accuracy"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class Scenario:
    config: ScenarioConfig
    bundles: list[VideoBundle]
    vad: dict[str, list[tuple[float, float]]]
    transcripts: dict[str, list[tuple[str, float, float, str]]] = field(default_factory=dict)


def turn_taking(rng: np.random.Generator, num_frames: int, fps: float, num_visible: int, coupling: float,
                fp_rate: float = 0.0, p_silent_floor: float = P_SILENT_FLOOR) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frame-level speaking matrix for visible speakers, the wearer, and burst mask.

    Returns ``(visible (K, T) bool, wearer (T,) bool, burst (T,) bool)``.
    """
    vis = np.zeros((num_visible, num_frames), dtype=bool)
    cw = np.zeros(num_frames, dtype=bool)
    burst = np.zeros(num_frames, dtype=bool)
    mean_frames = max(2.0, MEAN_TURN_SECONDS * fps)
    t = 0
    while t < num_frames:
        dur = int(rng.geometric(1.0 / mean_frames))
        end = min(num_frames, t + dur)
        holder = -1 if rng.random() < p_silent_floor else int(rng.integers(num_visible))
        if holder >= 0:
            vis[holder, t:end] = True
        if rng.random() < coupling:
            cw_on = holder < 0
        else:
            cw_on = rng.random() < INDEPENDENT_CW_RATE
        cw[t:end] = cw_on
        t = end
    if fp_rate > 0:
        # short bursts seeded inside true silence; covers roughly fp_rate of it
        silent = ~vis.any(axis=0) & ~cw
        burst_frames = max(1.0, BURST_SECONDS * fps)
        for t0 in np.flatnonzero(silent & (rng.random(num_frames) < fp_rate / burst_frames)):
            burst[t0:t0 + int(rng.geometric(1.0 / burst_frames))] = True
        burst &= silent
    return vis, cw, burst


def _voice(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=d)
    v = np.ones(d) / np.sqrt(d) + VOICE_SPREAD * z / np.linalg.norm(z)
    return v / np.linalg.norm(v)


def _boxes(rng: np.random.Generator, num_frames: int) -> list[BBox]:
    cx, cy = rng.uniform(200, 1080), rng.uniform(150, 570)
    size = rng.uniform(60, 140)
    steps = rng.normal(scale=2.0, size=(num_frames, 2)).cumsum(axis=0)
    return [BBox(cx + dx - size / 2, cy + dy - size / 2, cx + dx + size / 2, cy + dy + size / 2) for dx, dy in steps]


def corrupt_vad(rng: np.random.Generator, speech: np.ndarray, accuracy: float, fps: float) -> list[tuple[float, float]]:
    """Flip short random chunks of the frame-level speech mask until ``1 - accuracy`` of frames are wrong."""
    n = len(speech)
    flipped = np.zeros(n, dtype=bool)
    target = int(round((1.0 - accuracy) * n))
    while flipped.sum() < target:
        start = int(rng.integers(n))
        length = int(rng.integers(1, 4))
        flipped[start:start + length] = True
        if flipped.sum() > target:
            extra = np.flatnonzero(flipped)[target - flipped.sum():]
            flipped[extra] = False
    vad = speech ^ flipped
    return mask_to_intervals(vad, fps)


def mask_to_intervals(mask: np.ndarray, fps: float) -> list[tuple[float, float]]:
    edges = np.diff(np.r_[0, mask.astype(np.int8), 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [(s / fps, e / fps) for s, e in zip(starts, ends)]


def _transcripts(rng: np.random.Generator, segs: list[Segment]) -> list[tuple[str, float, float, str]]:
    out = []
    for s in segs:
        n = max(1, int(round(s.duration * WORDS_PER_SECOND)))
        words = rng.choice(VOCAB, size=n)
        out.append((s.speaker, s.t_start, s.t_end, " ".join(words)))
    return out


def generate_video(cfg: ScenarioConfig, index: int) -> tuple[VideoBundle, list[tuple[float, float]], list]:
    rng = np.random.default_rng([cfg.seed, index])
    k, T, s = cfg.num_visible_speakers, cfg.num_frames, cfg.speaking_signal_strength
    vis, cw, burst = turn_taking(rng, T, cfg.fps, k, cfg.cross_speaker_coupling, cfg.cw_false_positive_rate)
    video_id = f"vid{index:03d}"
    visual = min(VISUAL_BLOCK, cfg.d_av - cfg.d_a)
    voices = [_voice(rng, cfg.d_a) for _ in range(k + 1)]

    tracks = []
    labels: dict[tuple[str, int], int] = {}
    for p in range(k):
        person = f"P{p + 1}"
        boxes = _boxes(rng, T)
        feats = rng.normal(size=(T, cfg.d_av))
        feats[:, :visual] += s * vis[p, :, None]
        feats[:, cfg.d_av - cfg.d_a:] += s * vis[p, :, None] * voices[p]
        entries = tuple(TrackEntry(f, boxes[f], feats[f]) for f in range(T))
        tracks.append(FaceTrack(f"T{p + 1}", person, entries))
        labels.update({(person, f): int(vis[p, f]) for f in range(T)})
    cw_feats = rng.normal(size=(T, cfg.d_a)) + s * (cw | burst)[:, None] * voices[k]
    wearer = WearerStream(np.arange(T, dtype=np.int64), cw_feats)
    labels.update({(WEARER_ID, f): int(cw[f]) for f in range(T)})

    bundle = VideoBundle(video_id, cfg.fps, T, tuple(tracks), wearer, labels)
    speech = vis.any(axis=0) | cw
    vad = corrupt_vad(rng, speech, cfg.vad_accuracy, cfg.fps)
    transcripts = _transcripts(rng, reference_segments(bundle))
    return bundle, vad, transcripts


def generate_scenario(cfg: ScenarioConfig = ScenarioConfig()) -> Scenario:
    bundles, vads, texts = [], {}, {}
    for i in range(cfg.num_videos):
        b, v, t = generate_video(cfg, i)
        bundles.append(b)
        vads[b.video_id] = v
        texts[b.video_id] = t
    return Scenario(cfg, bundles, vads, texts)


# oracles: deliberately different algorithms from the ones in metrics.py

def oracle_der(ref: list[Segment], hyp: list[Segment], step: float = 1e-3) -> float:
    """DER by sampling the timeline at cell midpoints, exhaustive speaker mapping."""
    end = max(s.t_end for s in list(ref) + list(hyp))
    t = (np.arange(int(np.ceil(end / step))) + 0.5) * step

    def grid(segs):
        spk = sorted({s.speaker for s in segs})
        m = np.zeros((len(spk), len(t)), dtype=bool)
        for s in segs:
            m[spk.index(s.speaker)] |= (t >= s.t_start) & (t < s.t_end)
        return m

    R, H = grid(ref), grid(hyp)
    nr, nh = len(R), len(H)
    size = max(nr, nh)
    co = np.zeros((size, size))
    if nr and nh:
        co[:nr, :nh] = R.astype(float) @ H.T.astype(float)
    best = max((sum(co[i, p[i]] for i in range(size)) for p in itertools.permutations(range(size))), default=0.0)
    n_ref = R.sum(axis=0)
    n_hyp = H.sum(axis=0) if nh else np.zeros(len(t))
    errors = np.maximum(n_ref, n_hyp).sum() - best
    return float(errors / n_ref.sum())


def oracle_ap(scored) -> float:
    """AP as the precision-weighted recall staircase of an explicit threshold sweep."""
    pairs = [(float(s), int(y)) for s, y in scored]
    n_pos = sum(y for _, y in pairs)
    if n_pos == 0:
        raise ValueError("undefined AP: no positive labels")
    ap, prev_recall = 0.0, 0.0
    for thr in sorted({s for s, _ in pairs}, reverse=True):
        chosen = [y for s, y in pairs if s >= thr]
        tp = sum(chosen)
        recall = tp / n_pos
        precision = tp / len(chosen)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def _matchings(n: int, m: int):
    for k in range(min(n, m) + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.combinations(range(m), k):
                yield list(zip(rows, cols))


def oracle_edit_distance(a, b) -> int:
    """Minimum over every monotone alignment of ``S + D + I``."""
    n, m = len(a), len(b)
    return min(n + m - 2 * len(pairs) + sum(a[i] != b[j] for i, j in pairs) for pairs in _matchings(n, m))


def oracle_edit_distance_table(n: int, m: int, alphabet: int) -> np.ndarray:
    """Edit distances for every (ref, hyp) pair of lengths (n, m), by alignment enumeration.

    Rows/columns follow ``itertools.product(range(alphabet), repeat=...)`` order.
    """
    A = np.array(list(itertools.product(range(alphabet), repeat=n)), dtype=np.int8).reshape(alphabet ** n, n)
    B = np.array(list(itertools.product(range(alphabet), repeat=m)), dtype=np.int8).reshape(alphabet ** m, m)
    mismatch = {(i, j): (A[:, i, None] != B[None, :, j]).astype(np.int16) for i in range(n) for j in range(m)}
    best = np.full((len(A), len(B)), n + m, dtype=np.int16)
    for pairs in _matchings(n, m):
        cost = np.full((len(A), len(B)), n + m - 2 * len(pairs), dtype=np.int16)
        for ij in pairs:
            cost += mismatch[ij]
        np.minimum(best, cost, out=best)
    return best
