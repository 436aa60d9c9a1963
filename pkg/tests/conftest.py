import numpy as np
import pytest

from sthg.types import BBox, FaceTrack, TrackEntry, VideoBundle, WEARER_ID, WearerStream


def make_bundle(track_frames, wearer_frames, num_frames, d_av=4, d_a=2, persons=None, seed=0, labels=False,
                fps=10.0, video_id="v"):
    """Small bundle with random features; ``track_frames`` maps track id -> frames."""
    rng = np.random.default_rng(seed)
    tracks = []
    lab = {}
    for tid in sorted(track_frames):
        person = (persons or {}).get(tid, "P" + tid)
        entries = tuple(
            TrackEntry(f, BBox(10.0 * f, 0.0, 10.0 * f + 5, 5.0), rng.normal(size=d_av)) for f in sorted(track_frames[tid])
        )
        tracks.append(FaceTrack(tid, person, entries))
        for f in track_frames[tid]:
            lab[(person, f)] = int(rng.integers(2))
    wf = np.array(sorted(wearer_frames), dtype=np.int64)
    wearer = WearerStream(wf, rng.normal(size=(len(wf), d_a)))
    for f in wf:
        lab[(WEARER_ID, int(f))] = int(rng.integers(2))
    return VideoBundle(video_id, fps, num_frames, tuple(tracks), wearer, lab if labels else None)


@pytest.fixture
def small_bundle():
    return make_bundle({"1": range(6), "2": [0, 1, 2, 4, 5]}, [0, 1, 3, 4, 5], 6, labels=True)
