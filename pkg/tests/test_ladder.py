import json
import math

import numpy as np
import pytest
from conftest import prune_oracle, select_oracle

from ladderforge.complexity import SegmentFeatures
from ladderforge.config import DEFAULT_BITRATES_MBPS, DEFAULT_RESOLUTIONS
from ladderforge.forest import ForestModel, Hyperparams, feature_vector, predict
from ladderforge.ladder import (
    DEFAULT_HLS_PAIRING,
    EmptyLadder,
    Ladder,
    LadderParams,
    MissingPrediction,
    ModelMismatch,
    PairingMissing,
    PredictionGrid,
    Representation,
    UnknownBitrate,
    UnsortedLadder,
    build_ladder,
    default_hls_ladder,
    ladder_to_manifest,
    load_pairing_csv,
    predict_grid,
    prune_jnd,
    select_resolution,
)


def _leaf_model(value, kind, vsr="none"):
    return ForestModel(({"v": float(value)},), Hyperparams(n_trees=1), 0, kind, vsr)


def _grid(entries, resolutions=None, bitrates=None):
    resolutions = resolutions or sorted({r for r, _ in entries})
    bitrates = bitrates or sorted({b for _, b in entries})
    return PredictionGrid(tuple(resolutions), tuple(bitrates), entries)


def _ladder_from_qualities(qualities, params=LadderParams()):
    reps = tuple(
        Representation(resolution=360, bitrate=float(i + 1), predicted_vmaf=q, predicted_time=0.1)
        for i, q in enumerate(qualities)
    )
    return Ladder(reps, params)


def _random_grid(rng):
    entries = {
        (r, b): (float(rng.uniform(0, 100)), float(rng.uniform(0, 10)))
        for r in DEFAULT_RESOLUTIONS
        for b in DEFAULT_BITRATES_MBPS
    }
    return _grid(entries, DEFAULT_RESOLUTIONS, DEFAULT_BITRATES_MBPS)


# ------------------------------------------------------------- predict_grid


def test_grid_covers_full_cross_product():
    quality = _leaf_model(70, "quality")
    time = _leaf_model(1.0, "time")
    features = SegmentFeatures(1.0, 0.2, 100.0)
    grid = predict_grid(quality, time, features, DEFAULT_RESOLUTIONS, DEFAULT_BITRATES_MBPS)
    assert len(grid.entries) == 48
    assert set(grid.entries) == {(r, b) for r in DEFAULT_RESOLUTIONS for b in DEFAULT_BITRATES_MBPS}
    assert all(v == (70.0, 1.0) for v in grid.entries.values())


def test_grid_entries_equal_elementwise_prediction():
    rng = np.random.default_rng(3)
    trees = tuple(
        {"f": int(rng.integers(0, 5)), "t": float(rng.uniform(0, 8)),
         "l": {"v": float(rng.uniform(0, 100))}, "r": {"v": float(rng.uniform(0, 100))}}
        for _ in range(5)
    )
    quality = ForestModel(trees, Hyperparams(n_trees=5), 0, "quality", "none")
    time = _leaf_model(0.5, "time")
    features = SegmentFeatures(2.0, 0.7, 90.0)
    grid = predict_grid(quality, time, features, DEFAULT_RESOLUTIONS, DEFAULT_BITRATES_MBPS)
    for r in DEFAULT_RESOLUTIONS:
        for b in DEFAULT_BITRATES_MBPS:
            x = feature_vector(features, r, b)
            assert grid.quality(r, b) == predict(quality, x)
            assert grid.time(r, b) == predict(time, x)


def test_grid_rejects_mismatched_models():
    features = SegmentFeatures(1.0, 0.0, 50.0)
    with pytest.raises(ModelMismatch):
        predict_grid(_leaf_model(70, "quality", "fsrcnn"), _leaf_model(1, "time", "none"),
                     features, (360,), (1.0,))
    with pytest.raises(ModelMismatch):
        predict_grid(_leaf_model(70, "time"), _leaf_model(1, "time"), features, (360,), (1.0,))


def test_grid_validates_completeness():
    with pytest.raises(Exception, match="missing entry"):
        PredictionGrid((360, 720), (1.0,), {(360, 1.0): (50.0, 1.0)})


# -------------------------------------------------------- select_resolution


def test_single_feasible_resolution_wins_regardless_of_quality():
    entries = {
        (360, 1.0): (10.0, 0.5),
        (720, 1.0): (90.0, 9.0),
        (1080, 1.0): (95.0, 9.5),
    }
    choice = select_resolution(_grid(entries), 1.0, tau_l=1.0)
    assert choice == (360, False)


def test_hand_traced_three_candidate_case():
    entries = {
        (360, 2.4): (70.0, 0.5),
        (720, 2.4): (80.0, 1.5),
        (1080, 2.4): (85.0, 3.0),
    }
    choice = select_resolution(_grid(entries), 2.4, tau_l=2.0)
    assert choice == (720, False)


def test_infinite_budget_is_plain_argmax():
    entries = {
        (360, 2.4): (70.0, 0.5),
        (720, 2.4): (80.0, 1.5),
        (1080, 2.4): (85.0, 3.0),
    }
    choice = select_resolution(_grid(entries), 2.4, tau_l=math.inf)
    assert choice == (1080, False)


def test_quality_ties_break_to_lower_resolution():
    entries = {
        (360, 1.0): (80.0, 0.5),
        (720, 1.0): (80.0, 1.0),
        (1080, 1.0): (79.0, 1.5),
    }
    assert select_resolution(_grid(entries), 1.0, tau_l=math.inf) == (360, False)


def test_over_budget_fallback_returns_cheapest():
    entries = {
        (360, 1.0): (40.0, 3.0),
        (720, 1.0): (80.0, 5.0),
        (1080, 1.0): (90.0, 4.0),
    }
    assert select_resolution(_grid(entries), 1.0, tau_l=2.0) == (360, True)


def test_unknown_bitrate_rejected():
    entries = {(360, 1.0): (50.0, 1.0)}
    with pytest.raises(UnknownBitrate):
        select_resolution(_grid(entries), 2.0, tau_l=1.0)


def test_selection_matches_exhaustive_oracle():
    rng = np.random.default_rng(11)
    for _ in range(500):
        grid = _random_grid(rng)
        bitrate = float(rng.choice(DEFAULT_BITRATES_MBPS))
        tau = math.inf if rng.uniform() < 0.15 else float(rng.uniform(0.2, 10.0))
        got = select_resolution(grid, bitrate, tau)
        expected = select_oracle(grid.entries, list(DEFAULT_RESOLUTIONS), bitrate, tau)
        assert tuple(got) == expected


# ------------------------------------------------------------- build_ladder


def test_uniform_grid_gives_uniform_resolution():
    entries = {(r, b): (60.0, 0.5) for r in (360, 720) for b in (1.0, 2.0, 3.0)}
    built = build_ladder(_grid(entries), tau_l=1.0)
    assert [rep.resolution for rep in built.reps] == [360, 360, 360]
    assert [rep.bitrate for rep in built.reps] == [1.0, 2.0, 3.0]


def test_full_bitrate_set_yields_twelve_rungs():
    rng = np.random.default_rng(4)
    built = build_ladder(_random_grid(rng), DEFAULT_BITRATES_MBPS, tau_l=math.inf)
    assert len(built.reps) == 12
    assert built.bitrates == DEFAULT_BITRATES_MBPS


def test_built_reps_copy_grid_predictions_and_respect_budget():
    rng = np.random.default_rng(5)
    for _ in range(50):
        grid = _random_grid(rng)
        tau = float(rng.uniform(0.5, 9.0))
        built = build_ladder(grid, tau_l=tau)
        for rep in built.reps:
            v, t = grid.entries[(rep.resolution, rep.bitrate)]
            assert rep.predicted_vmaf == v and rep.predicted_time == t
            if not rep.over_budget:
                assert rep.predicted_time <= tau


def test_per_bitrate_selection_is_independent():
    rng = np.random.default_rng(6)
    grid = _random_grid(rng)
    built = build_ladder(grid, tau_l=3.0)
    for rep in built.reps:
        res, flag = select_oracle(grid.entries, list(DEFAULT_RESOLUTIONS), rep.bitrate, 3.0)
        assert (rep.resolution, rep.over_budget) == (res, flag)


# ---------------------------------------------------------------- prune_jnd


def test_single_rung_ladder_survives_pruning():
    ladder = _ladder_from_qualities([55.0])
    pruned = prune_jnd(ladder, v_j=6.0, v_t=94.0)
    assert pruned.reps == ladder.reps


def test_hand_traced_pruning_case():
    ladder = _ladder_from_qualities([40.0, 45.0, 52.0, 60.0, 95.0])
    pruned = prune_jnd(ladder, v_j=6.0, v_t=94.0)
    assert [rep.bitrate for rep in pruned.reps] == [1.0, 3.0, 4.0, 5.0]
    assert [rep.predicted_vmaf for rep in pruned.reps] == [40.0, 52.0, 60.0, 95.0]
    assert pruned.params.v_j == 6.0 and pruned.params.v_t == 94.0


def test_first_rung_above_cap_short_circuits():
    ladder = _ladder_from_qualities([98.0, 99.0, 99.5])
    pruned = prune_jnd(ladder, v_j=6.0, v_t=94.0)
    assert len(pruned.reps) == 1
    assert pruned.reps[0].predicted_vmaf == 98.0


def test_pruning_requires_predictions_and_order():
    bare = Ladder((Representation(360, 1.0), Representation(720, 2.0)))
    with pytest.raises(MissingPrediction):
        prune_jnd(bare, 6.0, 94.0)
    with pytest.raises(UnsortedLadder):
        Ladder((Representation(360, 2.0), Representation(720, 1.0)))
    with pytest.raises(EmptyLadder):
        Ladder(())


def test_pruning_matches_interpreter_on_random_cases():
    rng = np.random.default_rng(21)
    for _ in range(300):
        m = int(rng.integers(1, 13))
        qualities = [float(q) for q in rng.uniform(30, 100, m)]
        v_j = float(rng.choice([2.0, 4.0, 6.0]))
        v_t = float(rng.choice([94.0, 96.0, 98.0]))
        ladder = _ladder_from_qualities(qualities)
        kept = prune_jnd(ladder, v_j, v_t)
        expected = prune_oracle(qualities, v_j, v_t)
        got = [ladder.reps.index(rep) for rep in kept.reps]
        assert got == expected


def test_pruning_is_idempotent():
    rng = np.random.default_rng(22)
    for _ in range(100):
        qualities = [float(q) for q in rng.uniform(30, 100, rng.integers(1, 13))]
        once = prune_jnd(_ladder_from_qualities(qualities), 4.0, 96.0)
        twice = prune_jnd(once, 4.0, 96.0)
        assert twice.reps == once.reps


def test_pruning_keeps_subsequence_with_gap_and_cap_guarantees():
    rng = np.random.default_rng(23)
    for _ in range(200):
        qualities = [float(q) for q in rng.uniform(30, 100, rng.integers(2, 13))]
        v_j, v_t = 6.0, 94.0
        ladder = _ladder_from_qualities(qualities)
        pruned = prune_jnd(ladder, v_j, v_t)
        # subsequence, first rung kept
        it = iter(ladder.reps)
        assert all(rep in it for rep in pruned.reps)
        assert pruned.reps[0] == ladder.reps[0]
        kept_q = [rep.predicted_vmaf for rep in pruned.reps]
        if not (len(pruned.reps) == 1 and kept_q[0] >= v_t):
            assert all(b - a >= v_j for a, b in zip(kept_q, kept_q[1:]))
        above = [q for q in kept_q if q >= v_t]
        assert len(above) <= 1
        if above:
            assert kept_q[-1] == above[0]


def test_kept_count_non_increasing_in_jnd_step_on_monotone_ladders():
    rng = np.random.default_rng(24)
    for _ in range(200):
        qualities = np.cumsum(rng.uniform(0, 8, rng.integers(2, 13))) + 30.0
        ladder = _ladder_from_qualities([float(q) for q in qualities])
        counts = [
            len(prune_jnd(ladder, v_j, 96.0).reps) for v_j in (2.0, 4.0, 6.0)
        ]
        assert counts[0] >= counts[1] >= counts[2]


# ------------------------------------------------------- default_hls_ladder


def test_default_pairing_covers_standard_bitrates():
    ladder = default_hls_ladder(DEFAULT_BITRATES_MBPS)
    assert len(ladder.reps) == 12
    assert {rep.resolution for rep in ladder.reps} <= set(DEFAULT_RESOLUTIONS)
    assert [rep.resolution for rep in ladder.reps] == sorted(rep.resolution for rep in ladder.reps)
    assert all(rep.predicted_vmaf is None for rep in ladder.reps)


def test_default_pairing_rejects_unknown_bitrate_and_empty_input():
    with pytest.raises(PairingMissing):
        default_hls_ladder((7.77,))
    with pytest.raises(PairingMissing):
        default_hls_ladder(())


def test_custom_pairing_overrides_defaults(tmp_path):
    text = "bitrate_mbps,resolution\n1.0,720\n2.0,1080\n"
    table = load_pairing_csv(text.splitlines(True))
    assert table == ((1.0, 720), (2.0, 1080))
    ladder = default_hls_ladder((1.0, 2.0), pairing=table)
    assert [rep.resolution for rep in ladder.reps] == [720, 1080]
    with pytest.raises(PairingMissing):
        load_pairing_csv(["wrong,header\n"])


# ----------------------------------------------------------------- manifest


def test_manifest_schema_and_infinity_encoding():
    reps = (
        Representation(360, 0.145, 40.0, 0.2),
        Representation(720, 1.6, 70.0, 1.2, over_budget=True),
    )
    ladder = Ladder(reps, LadderParams(tau_l=math.inf, v_j=6.0, v_t=94.0, vsr_tag="fsrcnn"))
    doc = ladder_to_manifest(ladder, "seg01")
    blob = json.dumps(doc)  # must be valid strict JSON
    parsed = json.loads(blob)
    assert parsed["segment_id"] == "seg01"
    assert parsed["vsr_tag"] == "fsrcnn"
    assert parsed["tau_L"] == "inf"
    assert parsed["v_J"] == 6.0 and parsed["v_T"] == 94.0
    assert parsed["reps"][0] == {
        "bitrate_mbps": 0.145,
        "resolution": 360,
        "predicted_vmaf": 40.0,
        "predicted_time_s": 0.2,
        "over_budget": False,
    }
    assert parsed["reps"][1]["over_budget"] is True
