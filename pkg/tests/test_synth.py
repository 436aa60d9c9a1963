import numpy as np
import pytest

from sthg.graph import build_graph, graph_density, GraphConfig
from sthg.synth import (
    ScenarioConfig, corrupt_vad, generate_scenario, generate_video, mask_to_intervals, oracle_edit_distance,
    oracle_edit_distance_table, turn_taking,
)
from sthg.types import WEARER_ID, reference_segments


def test_same_seed_same_scenario():
    cfg = ScenarioConfig(num_videos=2, num_frames=60)
    a, b = generate_scenario(cfg), generate_scenario(cfg)
    for x, y in zip(a.bundles, b.bundles):
        assert x.labels == y.labels
        np.testing.assert_array_equal(x.wearer.features, y.wearer.features)
        for t, u in zip(x.tracks, y.tracks):
            assert all(np.array_equal(e.feature, f.feature) and e.box == f.box for e, f in zip(t.entries, u.entries))
    assert a.vad == b.vad and a.transcripts == b.transcripts


def test_different_seed_differs():
    a = generate_video(ScenarioConfig(num_frames=60, seed=0), 0)[0]
    b = generate_video(ScenarioConfig(num_frames=60, seed=1), 0)[0]
    assert not np.array_equal(a.wearer.features, b.wearer.features)


def test_videos_are_independent_of_count():
    one = generate_scenario(ScenarioConfig(num_videos=1, num_frames=50)).bundles[0]
    three = generate_scenario(ScenarioConfig(num_videos=3, num_frames=50)).bundles[0]
    assert one.labels == three.labels


def test_shapes_and_labels_complete():
    cfg = ScenarioConfig(num_videos=1, num_frames=40, num_visible_speakers=2, d_av=10, d_a=4)
    b = generate_scenario(cfg).bundles[0]
    assert len(b.tracks) == 2 and b.wearer.dim == 4
    assert all(len(t.entries) == 40 and t.dim == 10 for t in b.tracks)
    assert len(b.labels) == 3 * 40


@pytest.mark.parametrize("c", [0.0, 0.5, 0.9, 1.0])
def test_label_balance_per_speaker(c):
    # pooled over videos: a single 10 s clip can leave one speaker without a turn
    bundles = generate_scenario(ScenarioConfig(num_videos=16, cross_speaker_coupling=c)).bundles
    for person in ("P1", "P2", "P3", WEARER_ID):
        rate = np.mean([y for b in bundles for (q, _), y in b.labels.items() if q == person])
        assert 0.1 <= rate <= 0.6, (person, rate)


def test_full_coupling_single_speaker_wearer_silent_when_floor_held():
    rng = np.random.default_rng(0)
    vis, cw, _ = turn_taking(rng, 2000, 30.0, 1, 1.0, p_silent_floor=0.0)
    assert vis.all() and not cw.any()


def test_full_coupling_is_exact_complement():
    vis, cw, _ = turn_taking(np.random.default_rng(4), 3000, 30.0, 3, 1.0)
    np.testing.assert_array_equal(cw, ~vis.any(axis=0))
    assert vis.sum(axis=0).max() <= 1


def test_bursts_only_in_silence():
    vis, cw, burst = turn_taking(np.random.default_rng(2), 5000, 30.0, 2, 0.0, fp_rate=0.5)
    assert burst.any()
    assert not (burst & (cw | vis.any(axis=0))).any()


def test_signal_strength_moves_features():
    strong = generate_video(ScenarioConfig(num_frames=300, speaking_signal_strength=4.0), 0)[0]
    t = strong.tracks[0]
    feats = np.stack([e.feature for e in t.entries])
    y = np.array([strong.labels[(t.person_id, e.frame)] for e in t.entries], dtype=bool)
    assert feats[y, :4].mean() - feats[~y, :4].mean() == pytest.approx(4.0, abs=0.4)


@pytest.mark.parametrize("acc", [1.0, 0.95, 0.8])
def test_corrupt_vad_accuracy_exact(acc):
    rng = np.random.default_rng(1)
    speech = rng.random(400) < 0.5
    fps = 10.0
    vad = corrupt_vad(rng, speech, acc, fps)
    mask = np.zeros(400, dtype=bool)
    for a, b in vad:
        mask[int(round(a * fps)):int(round(b * fps))] = True
    assert (mask != speech).sum() == round((1 - acc) * 400)


def test_mask_to_intervals():
    assert mask_to_intervals(np.array([0, 1, 1, 0, 1], dtype=bool), 2.0) == [(0.5, 1.5), (2.0, 2.5)]
    assert mask_to_intervals(np.zeros(3, dtype=bool), 2.0) == []


def test_transcripts_follow_reference_segments():
    b, _, texts = generate_video(ScenarioConfig(num_frames=200), 0)
    ref = reference_segments(b)
    assert [(s.speaker, s.t_start, s.t_end) for s in ref] == [t[:3] for t in texts]
    assert all(t[3] for t in texts)


def test_default_scenario_is_sparse():
    sc = generate_scenario(ScenarioConfig(num_videos=1))
    (g,) = build_graph(sc.bundles[0], GraphConfig())
    assert graph_density(g) < 0.03
    assert {p for p in g.person_ids} == {"P1", "P2", "P3", WEARER_ID}


@pytest.mark.parametrize("kw", [dict(num_videos=0), dict(d_a=17), dict(vad_accuracy=1.5),
                                dict(cross_speaker_coupling=-0.1), dict(fps=0), dict(num_visible_speakers=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ScenarioConfig(**kw)


def test_edit_distance_table_matches_scalar_oracle():
    import itertools
    tab = oracle_edit_distance_table(2, 3, 2)
    A = list(itertools.product(range(2), repeat=2))
    B = list(itertools.product(range(2), repeat=3))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            assert tab[i, j] == oracle_edit_distance(a, b)
