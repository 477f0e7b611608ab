import numpy as np
import pytest

from lib.evaluation import (
	Trajectory,
	absolute_errors,
	align_planar,
	associate,
	associate_and_align,
	evaluate_trajectory,
	map_coverage,
	relative_errors,
)
from lib.geometry import Pose2
from lib.occupancy_grid import OccupancyGrid


def _loop(count: int = 200) -> Trajectory:
	stamps = np.arange(count) * 0.1
	angle = np.linspace(0.0, 2 * np.pi, count)
	planar = np.column_stack([3.0 * np.cos(angle), 2.0 * np.sin(angle), angle + np.pi / 2])
	return Trajectory.from_planar(stamps, planar)


def _line(count: int = 101, scale: float = 1.0) -> Trajectory:
	stamps = np.arange(count) * 0.1
	planar = np.column_stack([np.linspace(0.0, 10.0, count) * scale, np.zeros(count), np.zeros(count)])
	return Trajectory.from_planar(stamps, planar)


def test_identical_trajectories_have_zero_error():
	metrics = evaluate_trajectory(_loop(), _loop())
	assert metrics["ate"] == pytest.approx(0.0, abs=1e-9)
	assert metrics["are"] == pytest.approx(0.0, abs=1e-9)
	assert metrics["rpe_2m"] == pytest.approx(0.0, abs=1e-9)
	assert metrics["associated"] == 200


def test_alignment_removes_a_rigid_offset():
	truth = _loop()
	moved = truth.transformed(Pose2(5.0, -2.0, 0.7))
	aligned = evaluate_trajectory(moved, truth)
	assert aligned["ate"] == pytest.approx(0.0, abs=1e-9)
	np.testing.assert_allclose(Pose2(*aligned["alignment"]).compose(Pose2(5.0, -2.0, 0.7)).as_array(), 0.0, atol=1e-9)
	assert evaluate_trajectory(moved, truth, align=False)["ate"] > 1.0


def test_translation_offset_without_alignment():
	truth = _loop()
	shifted = Trajectory(truth.stamps, truth.positions + [0.1, 0.0, 0.0], truth.quaternions)
	errors = absolute_errors(shifted, truth)
	assert errors.ate == pytest.approx(0.1)
	assert errors.are == pytest.approx(0.0, abs=1e-12)


def test_heading_offset_and_rotation_weight():
	truth = _loop()
	planar = truth.planar()
	planar[:, 2] += 0.1
	turned = Trajectory.from_planar(truth.stamps, planar)
	assert absolute_errors(turned, truth).are == pytest.approx(0.1)
	assert absolute_errors(turned, truth).ape == pytest.approx(0.1)
	assert absolute_errors(turned, truth, rotation_weight=2.0).ape == pytest.approx(0.2)


def test_relative_error_measures_scale_drift():
	assert relative_errors(_line(scale=1.01), _line(), 2.0) == pytest.approx(0.02, abs=1.5e-3)
	with pytest.raises(Trajectory.Error):
		relative_errors(_line(), _line(), 20.0)
	with pytest.raises(ValueError):
		relative_errors(_line(), _line(), 0.0)


@pytest.mark.parametrize("transform", [Pose2(5.0, -2.0, 0.7), Pose2(-1.0, 3.0, -2.5)])
def test_rpe_ignores_a_rigid_transform_of_the_estimate(rng, transform):
	truth = _loop()
	planar = truth.planar() + rng.normal(scale=[0.05, 0.05, 0.02], size=(len(truth), 3))
	noisy = Trajectory.from_planar(truth.stamps, planar)
	moved = noisy.transformed(transform)
	for distance in (1.0, 2.0, 5.0):
		assert relative_errors(moved, truth, distance) == pytest.approx(relative_errors(noisy, truth, distance), abs=1e-9)
	unaligned = evaluate_trajectory(moved, truth, align=False)
	assert unaligned["rpe_2m"] == pytest.approx(evaluate_trajectory(noisy, truth, align=False)["rpe_2m"], abs=1e-9)
	assert unaligned["ate"] > 1.0


def test_rpe_longer_than_the_path_is_none():
	metrics = evaluate_trajectory(_line(), _line(), distances=(2.0, 50.0), align=False)
	assert metrics["rpe_2m"] == pytest.approx(0.0, abs=1e-12)
	assert metrics["rpe_50m"] is None


def test_association_respects_the_gap():
	truth = Trajectory(np.arange(10) * 0.1, np.zeros((10, 3)))
	estimate = Trajectory(np.arange(10) * 0.1 + 0.005, np.zeros((10, 3)))
	est_index, gt_index = associate(estimate, truth)
	np.testing.assert_array_equal(est_index, np.arange(10))
	np.testing.assert_array_equal(gt_index, np.arange(10))
	late = Trajectory(np.arange(10) * 0.1 + 0.03, np.zeros((10, 3)))
	assert len(associate(late, truth)[0]) == 0
	assert len(associate(late, truth, max_gap=0.05)[0]) == 10


def test_ground_truth_pose_is_used_once():
	truth = Trajectory([0.0, 1.0], np.zeros((2, 3)))
	estimate = Trajectory([0.99, 1.005, 1.01], np.zeros((3, 3)))
	est_index, gt_index = associate(estimate, truth)
	np.testing.assert_array_equal(est_index, [1])
	np.testing.assert_array_equal(gt_index, [1])


def test_too_few_associations_raise():
	truth = Trajectory([0.0, 1.0], np.zeros((2, 3)))
	with pytest.raises(Trajectory.Error):
		associate_and_align(Trajectory([5.0, 6.0], np.zeros((2, 3))), truth)


def test_trajectory_requires_increasing_stamps():
	with pytest.raises(Trajectory.Error):
		Trajectory([0.0, 0.0], np.zeros((2, 3)))
	ordered = Trajectory([1.0, 0.0], [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
	np.testing.assert_array_equal(ordered.positions[:, 0], [0.0, 1.0])


def test_align_planar_closed_form(rng):
	source = rng.normal(size=(30, 2))
	transform = Pose2(1.0, -0.5, 2.5)
	recovered = align_planar(source, transform.transform_points(source))
	np.testing.assert_allclose(recovered.as_array(), transform.as_array(), atol=1e-9)


def test_map_coverage():
	truth = OccupancyGrid.from_bounds(0.0, 0.0, 2.0, 2.0, 0.05)
	truth.log_odds[:] = truth.l_min
	assert map_coverage(truth.copy(), truth) == pytest.approx(1.0)
	assert map_coverage(truth.empty_like(), truth) == 0.0

	half = truth.empty_like()
	half.log_odds[:, :20] = half.l_min
	assert map_coverage(half, truth) == pytest.approx(0.5)

	# estimate built in a frame shifted by -1 m along x
	shifted = OccupancyGrid.from_bounds(-1.0, 0.0, 1.0, 2.0, 0.05)
	shifted.log_odds[:] = shifted.l_min
	assert map_coverage(shifted, truth, Pose2(1.0, 0.0, 0.0)) == pytest.approx(1.0)
	with pytest.raises(ValueError):
		map_coverage(truth, truth.empty_like())
