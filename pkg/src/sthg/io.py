"""Line-delimited file formats: manifests, RTTM, node-score files and key=value files.

Manifest lines are tab-separated with a leading record tag::

    VIDEO       video_id  fps  num_frames
    TRACK       video_id  track_id  person_id  frame  x1  y1  x2  y2  "f1 f2 ..."
    WEARER      video_id  frame  "f1 f2 ..."
    LABEL       video_id  person_id  frame  0|1
    VAD         video_id  t_start  t_end
    TRANSCRIPT  video_id  speaker  t_start  t_end  text...

For visible tracks, the last ``d_a`` feature values are the audio block.
Reals are written with 9 significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .types import BBox, FaceTrack, Segment, TrackEntry, VideoBundle, WearerStream


class FormatError(ValueError):
    def __init__(self, path, lineno: int, field: str, msg: str):
        super().__init__(f"{path}:{lineno}: field '{field}': {msg}")
        self.path, self.lineno, self.field = path, lineno, field


def fmt(x: float) -> str:
    return "%.9g" % x


def _fmt_vec(v) -> str:
    return " ".join(fmt(float(x)) for x in v)


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    fps: float
    num_frames: int


@dataclass(frozen=True)
class TrackRecord:
    video_id: str
    track_id: str
    person_id: str
    frame: int
    x1: float
    y1: float
    x2: float
    y2: float
    feature: tuple[float, ...]


@dataclass(frozen=True)
class WearerRecord:
    video_id: str
    frame: int
    feature: tuple[float, ...]


@dataclass(frozen=True)
class LabelRecord:
    video_id: str
    person_id: str
    frame: int
    label: int


@dataclass(frozen=True)
class VadRecord:
    video_id: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class TranscriptRecord:
    video_id: str
    speaker: str
    t_start: float
    t_end: float
    text: str


Record = Union[VideoRecord, TrackRecord, WearerRecord, LabelRecord, VadRecord, TranscriptRecord]

TAGS = {
    "VIDEO": VideoRecord, "TRACK": TrackRecord, "WEARER": WearerRecord, "LABEL": LabelRecord,
    "VAD": VadRecord, "TRANSCRIPT": TranscriptRecord,
}
TAG_OF = {cls: tag for tag, cls in TAGS.items()}


def format_record(rec: Record) -> str:
    parts = [TAG_OF[type(rec)]]
    for f in fields(rec):
        v = getattr(rec, f.name)
        if f.name == "feature":
            parts.append(_fmt_vec(v))
        elif isinstance(v, float):
            parts.append(fmt(v))
        else:
            parts.append(str(v))
    return "\t".join(parts)


def _parse_field(raw: str, ftype: str, name: str, path, lineno: int):
    try:
        if name == "feature":
            vals = tuple(float(x) for x in raw.split())
            if not vals or not all(math.isfinite(x) for x in vals):
                raise ValueError("empty or non-finite feature vector")
            return vals
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("non-finite value")
            return v
        if not raw:
            raise ValueError("empty identifier")
        return raw
    except ValueError as exc:
        raise FormatError(path, lineno, name, f"{exc} (got {raw!r})") from None


def parse_record(line: str, path="<string>", lineno: int = 1) -> Record:
    parts = line.rstrip("\n").split("\t")
    tag = parts[0]
    if tag not in TAGS:
        raise FormatError(path, lineno, "kind", f"unknown record kind {tag!r}")
    cls = TAGS[tag]
    flds = fields(cls)
    if cls is TranscriptRecord and len(parts) > len(flds) + 1:
        parts = parts[:len(flds)] + ["\t".join(parts[len(flds):])]
    if len(parts) != len(flds) + 1:
        missing = flds[len(parts) - 1].name if len(parts) - 1 < len(flds) else "<extra>"
        raise FormatError(path, lineno, missing, f"expected {len(flds)} fields after {tag}, got {len(parts) - 1}")
    vals = {f.name: _parse_field(raw, f.type, f.name, path, lineno) for f, raw in zip(flds, parts[1:])}
    if cls is LabelRecord and vals["label"] not in (0, 1):
        raise FormatError(path, lineno, "label", "must be 0 or 1")
    if cls is TrackRecord and not (vals["x1"] < vals["x2"] and vals["y1"] < vals["y2"]):
        raise FormatError(path, lineno, "x1..y2", "degenerate box")
    if cls in (VadRecord, TranscriptRecord) and not 0 <= vals["t_start"] < vals["t_end"]:
        raise FormatError(path, lineno, "t_start", "need 0 <= t_start < t_end")
    if cls is VideoRecord and not (vals["fps"] > 0 and vals["num_frames"] > 0):
        raise FormatError(path, lineno, "fps", "fps and num_frames must be positive")
    return cls(**vals)


def write_manifest(path, records: Iterable[Record]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(format_record(r) + "\n")


def read_manifest(path) -> list[Record]:
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            out.append(parse_record(line, path, i))
    return out


def records_from_bundle(b: VideoBundle, vad=(), transcripts=()) -> list[Record]:
    recs: list[Record] = [VideoRecord(b.video_id, float(b.fps), b.num_frames)]
    for t in b.tracks:
        for e in t.entries:
            recs.append(TrackRecord(b.video_id, t.track_id, t.person_id, e.frame, e.box.x1, e.box.y1, e.box.x2,
                                    e.box.y2, tuple(float(x) for x in e.feature)))
    for f, row in zip(b.wearer.frames, b.wearer.features):
        recs.append(WearerRecord(b.video_id, int(f), tuple(float(x) for x in row)))
    if b.labels is not None:
        for (person, frame), y in sorted(b.labels.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            recs.append(LabelRecord(b.video_id, person, frame, int(y)))
    for a, z in vad:
        recs.append(VadRecord(b.video_id, float(a), float(z)))
    for spk, a, z, text in transcripts:
        recs.append(TranscriptRecord(b.video_id, spk, float(a), float(z), text))
    return recs


@dataclass
class Dataset:
    bundles: dict[str, VideoBundle]
    vad: dict[str, list[tuple[float, float]]]
    transcripts: dict[str, list[tuple[str, float, float, str]]]


def dataset_from_records(records: Iterable[Record], source="<records>") -> Dataset:
    videos: dict[str, VideoRecord] = {}
    tracks: dict[str, dict[str, list[TrackRecord]]] = {}
    wearer: dict[str, list[WearerRecord]] = {}
    labels: dict[str, dict[tuple[str, int], int]] = {}
    vad: dict[str, list[tuple[float, float]]] = {}
    texts: dict[str, list] = {}
    for r in records:
        if isinstance(r, VideoRecord):
            videos[r.video_id] = r
        elif isinstance(r, TrackRecord):
            tracks.setdefault(r.video_id, {}).setdefault(r.track_id, []).append(r)
        elif isinstance(r, WearerRecord):
            wearer.setdefault(r.video_id, []).append(r)
        elif isinstance(r, LabelRecord):
            labels.setdefault(r.video_id, {})[(r.person_id, r.frame)] = r.label
        elif isinstance(r, VadRecord):
            vad.setdefault(r.video_id, []).append((r.t_start, r.t_end))
        else:
            texts.setdefault(r.video_id, []).append((r.speaker, r.t_start, r.t_end, r.text))
    bundles = {}
    for vid in sorted(set(tracks) | set(wearer)):
        if vid not in videos:
            raise ValueError(f"{source}: video {vid!r} has no VIDEO record")
        v = videos[vid]
        fts = []
        for tid in sorted(tracks.get(vid, {})):
            rows = sorted(tracks[vid][tid], key=lambda r: r.frame)
            persons = {r.person_id for r in rows}
            if len(persons) != 1:
                raise ValueError(f"{source}: track {tid!r} in {vid!r} maps to several persons")
            entries = tuple(TrackEntry(r.frame, BBox(r.x1, r.y1, r.x2, r.y2), np.array(r.feature)) for r in rows)
            fts.append(FaceTrack(tid, rows[0].person_id, entries))
        wrows = sorted(wearer.get(vid, []), key=lambda r: r.frame)
        if wrows:
            ws = WearerStream(np.array([r.frame for r in wrows], dtype=np.int64), np.array([r.feature for r in wrows]))
        else:
            ws = WearerStream.empty()
        bundles[vid] = VideoBundle(vid, v.fps, v.num_frames, tuple(fts), ws, labels.get(vid))
    return Dataset(bundles, {k: sorted(v) for k, v in vad.items()},
                   {k: sorted(v, key=lambda t: (t[1], t[0])) for k, v in texts.items()})


def load_dataset(path) -> Dataset:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.tsv"
    return dataset_from_records(read_manifest(path), path)


# RTTM

def format_rttm(diar: dict[str, list[Segment]]) -> str:
    rows = []
    for vid, segs in diar.items():
        for s in segs:
            rows.append((vid, round(s.t_start, 3), s.speaker, s))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    lines = [
        f"SPEAKER {vid} 1 {s.t_start:.3f} {s.t_end - s.t_start:.3f} <NA> <NA> {s.speaker} <NA> <NA>"
        for vid, _, _, s in rows
    ]
    return "".join(line + "\n" for line in lines)


def write_rttm(path, diar: dict[str, list[Segment]]) -> None:
    Path(path).write_text(format_rttm(diar))


def read_rttm(path) -> dict[str, list[Segment]]:
    out: dict[str, list[Segment]] = {}
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] != "SPEAKER" or len(parts) < 8:
                raise FormatError(path, i, "type", "expected a 10-field SPEAKER line")
            try:
                tbeg, tdur = float(parts[3]), float(parts[4])
            except ValueError:
                raise FormatError(path, i, "tbeg/tdur", f"not a number: {parts[3]!r} {parts[4]!r}") from None
            if tdur <= 0:
                continue
            out.setdefault(parts[1], []).append(Segment(parts[7], tbeg, tbeg + tdur))
    return out


# node scores

@dataclass(frozen=True)
class ScoreRecord:
    video_id: str
    person_id: str
    track_id: str  # "-" for the wearer
    frame: int
    kind: str  # "visible" | "wearer"
    score: float
    box: tuple[float, float, float, float] | None


def format_score(r: ScoreRecord) -> str:
    box = " ".join(fmt(v) for v in r.box) if r.box else "-"
    return "\t".join(["SCORE", r.video_id, r.person_id, r.track_id, str(r.frame), r.kind, repr(float(r.score)), box])


def write_scores(path, records: Iterable[ScoreRecord]) -> None:
    Path(path).write_text("".join(format_score(r) + "\n" for r in records))


def read_scores(path) -> list[ScoreRecord]:
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if parts[0] != "SCORE" or len(parts) != 8:
                raise FormatError(path, i, "kind", "expected an 8-field SCORE line")
            if parts[5] not in ("visible", "wearer"):
                raise FormatError(path, i, "node kind", f"unknown {parts[5]!r}")
            try:
                frame = int(parts[4])
            except ValueError:
                raise FormatError(path, i, "frame", f"not an integer: {parts[4]!r}") from None
            try:
                score = float(parts[6])
                box = None if parts[7] == "-" else tuple(float(v) for v in parts[7].split())
            except ValueError:
                raise FormatError(path, i, "score/box", "not a number") from None
            if box is not None and len(box) != 4:
                raise FormatError(path, i, "box", "need 4 coordinates")
            out.append(ScoreRecord(parts[1], parts[2], parts[3], frame, parts[5], score, box))
    return out


# key=value files (configs and reports)

def read_kv(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(path, i, line, "expected key=value")
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def format_kv(items: dict) -> str:
    lines = []
    for k, v in items.items():
        if isinstance(v, (float, np.floating)):
            v = repr(float(v))
        elif isinstance(v, np.integer):
            v = int(v)
        lines.append(f"{k}={v}")
    return "".join(line + "\n" for line in lines)


def write_kv(path, items: dict) -> None:
    Path(path).write_text(format_kv(items))
