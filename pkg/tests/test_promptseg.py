import numpy as np
import pytest

from bloombench.errors import DegeneratePrompts, InvalidPrompts, UnknownBand
from bloombench.mask import Mask, PostProcessConfig
from bloombench.promptseg import (
    NDCI,
    IndexSpec,
    PromptSet,
    candidate_pipeline,
    generate_candidates,
    score_field,
)
from bloombench.raster import Band, Scene

from conftest import GEO, blob_field, blob_scene, scene_from_field


def flat_scene(a: float, b: float, w=4, h=4, nodata=None) -> Scene:
    return Scene(
        scene_id="flat",
        width=w,
        height=h,
        bands=(
            Band("B04", np.full((h, w), b, dtype=np.float32)),
            Band("B05", np.full((h, w), a, dtype=np.float32)),
        ),
        geo=GEO,
        acquisition_time="2024-06-01T00:00:00Z",
        nodata_value=nodata,
    )


def brute_threshold_mask(field_values, roi, t, bad) -> np.ndarray:
    """Independent re-derivation of step-3 masks with pure Python loops."""
    h, w = field_values.shape
    x0, y0, x1, y1 = roi
    out = np.zeros((h, w), dtype=bool)
    tf = float(np.float32(t))
    for row in range(h):
        for col in range(w):
            inside = x0 <= col <= x1 and y0 <= row <= y1
            if inside and not bad[row, col] and float(field_values[row, col]) >= tf:
                out[row, col] = True
    return out


# --- score field ------------------------------------------------------------


def test_score_symmetric_bands_is_zero():
    field = score_field(flat_scene(0.5, 0.5))
    assert np.allclose(field.values, 0.0)


def test_score_direct_formula():
    field = score_field(flat_scene(0.8, 0.2))
    assert field.at(0, 0) == pytest.approx(0.6, abs=1e-6)


def test_score_zero_denominator_is_minus_one():
    field = score_field(flat_scene(0.0, 0.0))
    assert np.all(field.values == -1.0)


def test_score_nodata_is_minus_one():
    scene = flat_scene(0.8, 0.2, nodata=0.2)
    field = score_field(scene)
    assert np.all(field.values == -1.0)  # B04 all nodata


def test_score_unknown_band():
    with pytest.raises(UnknownBand):
        score_field(flat_scene(1, 1), IndexSpec("single_band", "B99"))


def test_single_band_minmax():
    data = np.array([[0.0, 5.0], [10.0, 5.0]], dtype=np.float32)
    scene = Scene(
        "sb", 2, 2, (Band("B08", data),), GEO, "2024-01-01T00:00:00Z", None
    )
    field = score_field(scene, IndexSpec("single_band", "B08"))
    assert field.values.tolist() == [[-1.0, 0.0], [1.0, 0.0]]


def test_single_band_constant_maps_to_zero():
    scene = Scene(
        "cb", 2, 2,
        (Band("B08", np.full((2, 2), 3.0, np.float32)),),
        GEO, "2024-01-01T00:00:00Z", None,
    )
    field = score_field(scene, IndexSpec("single_band", "B08"))
    assert np.all(field.values == 0.0)


def test_index_spec_validation():
    with pytest.raises(ValueError):
        IndexSpec("normalized_difference", "B05")
    with pytest.raises(ValueError):
        IndexSpec("weird", "B05", "B04")


# --- prompt validation ----------------------------------------------------------


def test_prompt_invariants():
    with pytest.raises(InvalidPrompts):
        PromptSet((), (), (0, 0, 3, 3)).validate(8, 8)
    with pytest.raises(InvalidPrompts):
        PromptSet(((9, 0),), (), (0, 0, 9, 9)).validate(8, 8)  # out of bounds
    with pytest.raises(InvalidPrompts):
        PromptSet(((5, 5),), (), (0, 0, 3, 3)).validate(8, 8)  # positive outside roi
    with pytest.raises(InvalidPrompts):
        PromptSet(((1, 1),), (), (3, 3, 1, 1)).validate(8, 8)  # inverted roi
    PromptSet(((1, 1),), ((7, 7),), (0, 0, 3, 3)).validate(8, 8)


def test_prompt_json_roundtrip():
    p = PromptSet(((1, 2), (3, 4)), ((5, 6),), (0, 0, 9, 9))
    assert PromptSet.from_json(p.to_json()) == p
    with pytest.raises(InvalidPrompts):
        PromptSet.from_json({"positive": "nope"})


# --- candidate generation -----------------------------------------------------------


def disk_setup():
    scene = blob_scene("disk", 32, 32, cx=16, cy=16, sigma=5.0)
    prompts = PromptSet(((16, 16),), ((2, 2),), (4, 4, 28, 28))
    return scene, prompts


def test_disk_three_nested_candidates_match_brute_force():
    scene, prompts = disk_setup()
    pipe = candidate_pipeline(scene, prompts, NDCI, 3, PostProcessConfig())
    assert len(pipe.thresholds) == 3
    assert list(pipe.thresholds) == sorted(pipe.thresholds)

    field = score_field(scene, NDCI)
    bad = np.zeros((32, 32), dtype=bool)
    for t, got in zip(pipe.thresholds, pipe.threshold_masks):
        expected = brute_threshold_mask(field.values, prompts.roi, t, bad)
        assert np.array_equal(got.bits, expected)

    # nesting: higher threshold -> subset
    for smaller, larger in zip(pipe.threshold_masks[1:], pipe.threshold_masks[:-1]):
        assert smaller.issubset(larger)

    cands = pipe.candidate_set.candidates
    assert len(cands) == 3
    assert all(c.mask.contains(16, 16) for c in cands)
    scores = [c.score for c in cands]
    assert scores == sorted(scores, reverse=True)


def test_negative_point_in_component_removes_it():
    # flat high plateau: positive and negative share the one component
    f = np.full((16, 16), 0.6)
    scene = scene_from_field("plateau", f)
    prompts = PromptSet(((8, 8),), ((4, 4),), (0, 0, 15, 15))
    cs = generate_candidates(scene, prompts, NDCI, 3, PostProcessConfig())
    assert all(c.mask.is_empty() for c in cs.candidates)
    assert all(c.score == -1.0 for c in cs.candidates)


def test_negative_point_outside_component_survives():
    scene, _ = disk_setup()
    prompts = PromptSet(((16, 16),), ((2, 2),), (0, 0, 31, 31))
    cs = generate_candidates(scene, prompts)
    assert not any(c.mask.is_empty() for c in cs.candidates)
    assert not any(c.mask.contains(2, 2) for c in cs.candidates)


def test_roi_containment():
    scene, _ = disk_setup()
    roi = (4, 4, 16, 28)  # covers only the left half of the disk
    prompts = PromptSet(((14, 16),), (), roi)
    cs = generate_candidates(scene, prompts)
    x0, y0, x1, y1 = roi
    for c in cs.candidates:
        cols = np.nonzero(c.mask.bits)[1]
        rows = np.nonzero(c.mask.bits)[0]
        if len(cols):
            assert cols.min() >= x0 and cols.max() <= x1
            assert rows.min() >= y0 and rows.max() <= y1


def test_determinism_byte_identical():
    scene, prompts = disk_setup()
    a = generate_candidates(scene, prompts).canonical_bytes()
    b = generate_candidates(scene, prompts).canonical_bytes()
    assert a == b


def test_candidate_count_and_validation():
    scene, prompts = disk_setup()
    cs = generate_candidates(scene, prompts, k=5)
    assert len(cs.candidates) == 5
    with pytest.raises(ValueError):
        generate_candidates(scene, prompts, k=0)
    with pytest.raises(InvalidPrompts):
        generate_candidates(scene, PromptSet((), (), (0, 0, 3, 3)))


def test_degenerate_prompts_on_nodata():
    f = blob_field(16, 16, [(8, 8)], [1.2], [3.0])
    scene = scene_from_field("withnodata", f, nodata=-7.0)
    # poke a nodata hole at the positive point in both bands
    b04 = np.array(scene.band("B04").data)
    b05 = np.array(scene.band("B05").data)
    b04[8, 8] = -7.0
    b05[8, 8] = -7.0
    scene = Scene(
        scene.scene_id, 16, 16,
        (Band("B04", b04), Band("B05", b05)),
        scene.geo, scene.acquisition_time, nodata_value=-7.0,
    )
    prompts = PromptSet(((8, 8),), (), (0, 0, 15, 15))
    with pytest.raises(DegeneratePrompts):
        generate_candidates(scene, prompts)
    # a second positive point off nodata rescues it; nodata stays background
    # at threshold time (hole filling may still reclaim enclosed pixels later)
    prompts2 = PromptSet(((8, 8), (9, 8)), (), (0, 0, 15, 15))
    pipe = candidate_pipeline(scene, prompts2)
    assert not any(m.contains(8, 8) for m in pipe.threshold_masks)
    assert len(pipe.candidate_set.candidates) == 3


def test_contradictory_prompts_use_fallback_band():
    # negative placed on a pixel scoring above the positive point
    scene = blob_scene("fb", 32, 32, cx=16, cy=16, sigma=5.0)
    prompts = PromptSet(((10, 16),), ((16, 16),), (0, 0, 31, 31))
    pipe = candidate_pipeline(scene, prompts)
    field = score_field(scene)
    p_min = field.at(10, 16)
    assert all(p_min - 0.2 <= t <= p_min for t in pipe.thresholds)


def test_candidate_set_json_roundtrip():
    from bloombench.promptseg import CandidateSet

    scene, prompts = disk_setup()
    cs = generate_candidates(scene, prompts)
    restored = CandidateSet.from_json(cs.to_json())
    assert restored.canonical_bytes() == cs.canonical_bytes()
