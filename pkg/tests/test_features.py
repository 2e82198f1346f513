"""Feature extraction: hand-computed derivative oracles, angle conventions,
rotation properties, and ablation schemas."""

import math

import numpy as np
import pytest

from narrator.errors import FeatureError
from narrator.features import (
    ABLATIONS,
    ANGULAR,
    DISCRETE,
    ClassRegistry,
    FeatureConfig,
    direction,
    finite_difference,
    single_track_features,
    track_pair_features,
    two_track_features,
    wrap_angle,
)
from narrator.posture import Codebook
from narrator.scene import BoundingBox, Detection
from narrator.tracking import Track, smooth_track


def make_track(centers, cls="chair", w=10.0, h=20.0, start=0, fps=30.0,
               parts=None, track_id=0, window=1):
    sels = []
    for t, (cx, cy) in enumerate(centers):
        sels.append(Detection(
            frame=start + t, object_class=cls, score=1.0,
            box=BoundingBox(float(cx), float(cy), w, h),
            parts=tuple(parts[t]) if parts else (),
        ))
    track = Track(track_id=track_id, object_class=cls, start=start, fps=fps,
                  selections=sels, smoothed_boxes=[])
    return smooth_track(track, window)


def fcfg(**kwargs):
    defaults = dict(registry=ClassRegistry(), ablation=ABLATIONS["full"],
                    codebook=None, n_parts=0, max_roots=4)
    defaults.update(kwargs)
    return FeatureConfig(**defaults)


def test_stationary_track_zero_velocity_direction_zero():
    series = single_track_features(make_track([(50, 50)] * 5), fcfg())
    assert np.all(series.column("speed") == 0.0)
    assert np.all(series.column("vel_dir") == 0.0)
    assert np.all(series.column("accel") == 0.0)


def test_constant_rightward_motion_oracle():
    # cx = 2t at 30 fps: velocity 60 px/s rightward, zero acceleration inside
    series = single_track_features(
        make_track([(2.0 * t, 7.0) for t in range(6)]), fcfg()
    )
    np.testing.assert_allclose(series.column("speed"), 60.0)
    np.testing.assert_allclose(series.column("vel_dir"), 0.0)
    np.testing.assert_allclose(series.column("accel"), 0.0, atol=1e-9)


def test_upward_screen_motion_has_positive_angle():
    # cy decreasing = moving up on screen = +pi/2 in the y-up convention
    series = single_track_features(
        make_track([(0.0, 100.0 - 3.0 * t) for t in range(4)]), fcfg()
    )
    np.testing.assert_allclose(series.column("vel_dir"), math.pi / 2)


def test_finite_difference_edges_fall_back_one_sided():
    x = np.array([0.0, 1.0, 4.0, 9.0])
    d = finite_difference(x, 1.0)
    np.testing.assert_allclose(d, [1.0, 2.0, 4.0, 5.0])


def test_aspect_and_its_derivative():
    track = make_track([(0, 0)] * 4, w=10.0, h=20.0)
    series = single_track_features(track, fcfg())
    np.testing.assert_allclose(series.column("aspect"), 0.5)
    np.testing.assert_allclose(series.column("aspect_d"), 0.0)


def test_short_track_rejected():
    with pytest.raises(FeatureError):
        single_track_features(make_track([(0, 0)] * 2), fcfg())


def test_angular_values_in_range_and_wrap():
    assert wrap_angle(math.pi) == pytest.approx(-math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(-math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def _rotate(centers, theta):
    c, s = math.cos(theta), math.sin(theta)
    out = []
    for x, y in centers:
        # y-up rotation expressed on image coordinates
        out.append((c * x + s * y, -s * x + c * y))
    return out


def test_rotation_shifts_angular_features_only():
    rng = np.random.default_rng(8)
    centers = np.cumsum(rng.uniform(1.0, 3.0, size=(8, 2)), axis=0) + 50.0
    theta = 0.7
    base = single_track_features(make_track(centers.tolist()), fcfg())
    turned = single_track_features(
        make_track(_rotate(centers.tolist(), theta)), fcfg()
    )
    np.testing.assert_allclose(
        wrap_angle(turned.column("vel_dir") - base.column("vel_dir") - theta),
        0.0, atol=1e-9)
    np.testing.assert_allclose(turned.column("speed"), base.column("speed"),
                               rtol=1e-9)


def test_pair_rotation_keeps_distance():
    a = [(10.0 + t, 20.0) for t in range(5)]
    b = [(40.0, 20.0 + 2 * t) for t in range(5)]
    theta = -1.1
    base = track_pair_features(make_track(a), make_track(b, track_id=1))
    turned = track_pair_features(
        make_track(_rotate(a, theta)), make_track(_rotate(b, theta), track_id=1)
    )
    np.testing.assert_allclose(turned.column("pair_dist"),
                               base.column("pair_dist"), rtol=1e-9)
    np.testing.assert_allclose(
        wrap_angle(turned.column("pair_orient") - base.column("pair_orient") - theta),
        0.0, atol=1e-9)


def test_identical_tracks_give_zero_distance():
    a = make_track([(5.0, 5.0)] * 4)
    b = make_track([(5.0, 5.0)] * 4, track_id=1)
    series = track_pair_features(a, b)
    assert np.all(series.column("pair_dist") == 0.0)
    assert np.all(series.column("pair_dist_d") == 0.0)


def test_fixed_offset_patient_distance_and_orientation():
    a = make_track([(0.0, 0.0)] * 4)
    b = make_track([(10.0, 0.0)] * 4, track_id=1)
    series = track_pair_features(a, b)
    np.testing.assert_allclose(series.column("pair_dist"), 10.0)
    np.testing.assert_allclose(series.column("pair_orient"), 0.0)


def test_approaching_patient_has_negative_distance_derivative():
    # hand oracle: distance 30-2t, derivative -2 px/frame = -60 px/s
    a = make_track([(2.0 * t, 0.0) for t in range(6)])
    b = make_track([(30.0, 0.0)] * 6, track_id=1)
    series = track_pair_features(a, b)
    np.testing.assert_allclose(series.column("pair_dist_d")[1:-1], -60.0)
    assert np.all(series.column("pair_dist_d") < 0)


def test_orientation_antisymmetry():
    a = make_track([(t, 3.0 * t) for t in range(5)])
    b = make_track([(20.0 + t, 1.0) for t in range(5)], track_id=1)
    ab = track_pair_features(a, b).column("pair_orient")
    ba = track_pair_features(b, a).column("pair_orient")
    np.testing.assert_allclose(wrap_angle(ab - ba - math.pi), 0.0, atol=1e-9)


def test_empty_overlap_rejected():
    a = make_track([(0, 0)] * 5, start=0)
    b = make_track([(0, 0)] * 5, start=10, track_id=1)
    with pytest.raises(FeatureError):
        track_pair_features(a, b)


def person_track(n=6, parts_fn=None):
    parts = [[(1.0, 2.0), (3.0, 4.0)] if parts_fn is None else parts_fn(t)
             for t in range(n)]
    return make_track([(10.0 + t, 10.0) for t in range(n)], cls="person",
                      parts=parts)


def test_person_pose_features_and_codebook_index():
    codebook = Codebook(centroids=np.zeros((3, 4)))
    series = single_track_features(
        person_track(), fcfg(codebook=codebook, n_parts=2)
    )
    names = [n for n, _ in series.schema]
    assert "part0_dx" in names and "part1_dy_d" in names
    assert "pose_code" in names
    assert np.all(series.column("pose_code") == 0.0)


def test_nonperson_has_no_pose_features():
    series = single_track_features(make_track([(0, 0)] * 4), fcfg(n_parts=2))
    names = [n for n, _ in series.schema]
    assert not any(n.startswith("part") for n in names)
    assert "pose_code" not in names


def test_experiment1_ablation_drops_discrete_and_pose():
    series = single_track_features(
        person_track(), fcfg(ablation=ABLATIONS["exp1"], n_parts=2)
    )
    assert all(kind.tag != DISCRETE for _, kind in series.schema)
    assert not any(n.startswith("part") for n, _ in series.schema)


def test_ablations_are_ordered_subsets_of_full():
    codebook = Codebook(centroids=np.zeros((3, 4)))
    full = single_track_features(
        person_track(), fcfg(codebook=codebook, n_parts=2)
    )
    full_names = [n for n, _ in full.schema]
    for name, ablation in ABLATIONS.items():
        sub = single_track_features(
            person_track(), fcfg(ablation=ablation, codebook=codebook, n_parts=2)
        )
        sub_names = [n for n, _ in sub.schema]
        assert set(sub_names) <= set(full_names), name
        positions = [full_names.index(n) for n in sub_names]
        assert positions == sorted(positions), name


def test_two_track_schema_concatenation():
    codebook = Codebook(centroids=np.zeros((3, 4)))
    agent = person_track()
    patient = make_track([(30.0, 10.0)] * 6, track_id=1)
    series = two_track_features(agent, patient, fcfg(codebook=codebook, n_parts=2))
    names = [n for n, _ in series.schema]
    assert names[0].startswith("agent_")
    assert any(n.startswith("patient_") for n in names)
    assert names[-3:] == ["pair_dist", "pair_dist_d", "pair_orient"]
    assert len(series) == 6


def test_registry_maps_unknown_classes_to_tail():
    reg = ClassRegistry()
    assert reg.index("person") != reg.index("chair")
    assert reg.index("zeppelin") == reg.cardinality - 1


def test_direction_quadrants():
    # screen-down vector points to -pi/2 in the y-up convention
    assert direction(0.0, 5.0) == pytest.approx(-math.pi / 2)
    assert direction(0.0, -5.0) == pytest.approx(math.pi / 2)
    assert direction(-1.0, 0.0) == pytest.approx(-math.pi)
