import numpy as np
import pytest

from lib.geometry import Pose2
from lib.occupancy_grid import OccupancyGrid
from lib.scan_matcher import MatcherConfig, body_points, information_from_score, match_scan, score_pose
from lib.scan_stabilization import StabilizedScan
from lib.worlds import room_world

ANGLES = np.linspace(-np.pi, np.pi, 360, endpoint=False)


@pytest.fixture(scope="module")
def room_grid():
	return room_world().ground_truth_grid()


def _scan_at(grid: OccupancyGrid, pose: Pose2) -> StabilizedScan:
	ranges, valid = grid.raycast(pose, ANGLES, 6.0)
	return StabilizedScan(ANGLES, ranges, valid, max_range=6.0)


def test_scan_matches_itself(room_grid):
	pose = Pose2(1.0, 1.1, 0.2)
	result = match_scan(_scan_at(room_grid, pose), room_grid, pose)
	assert result.accepted
	assert result.score > 0.8
	assert np.hypot(result.relative.x, result.relative.y) <= room_grid.resolution
	assert abs(result.relative.theta) <= np.radians(1.0)


def test_displacement_is_recovered_within_a_cell(room_grid):
	truth = Pose2(1.1, 1.1, 0.2)
	prior = Pose2(1.0, 1.1, 0.2)
	result = match_scan(_scan_at(room_grid, truth), room_grid, prior)
	assert result.accepted
	assert np.hypot(result.pose.x - truth.x, result.pose.y - truth.y) <= room_grid.resolution
	assert result.relative.x == pytest.approx(0.1, abs=room_grid.resolution)


def test_rotation_is_recovered(room_grid):
	truth = Pose2(1.2, 1.0, 0.3)
	result = match_scan(_scan_at(room_grid, truth), room_grid, Pose2(1.2, 1.0, 0.2))
	assert result.accepted
	assert result.pose.theta == pytest.approx(0.3, abs=np.radians(1.5))


def test_all_invalid_scan_is_not_accepted(room_grid):
	prior = Pose2(1.0, 1.0, 0.0)
	scan = StabilizedScan(ANGLES, np.zeros(len(ANGLES)), np.zeros(len(ANGLES), dtype=bool))
	result = match_scan(scan, room_grid, prior)
	assert not result.accepted
	assert result.pose == prior


def test_empty_grid_is_not_accepted(room_grid):
	pose = Pose2(1.0, 1.1, 0.2)
	result = match_scan(_scan_at(room_grid, pose), OccupancyGrid.centered(4.0), pose)
	assert not result.accepted
	assert result.score == 0.0


def test_body_points_drop_max_range_returns(room_grid):
	ranges = np.full(len(ANGLES), 2.0)
	ranges[:10] = 6.0
	scan = StabilizedScan(ANGLES, ranges, np.ones(len(ANGLES), dtype=bool), max_range=6.0)
	assert len(body_points(scan, 1000)) == len(ANGLES) - 10
	assert len(body_points(scan, 50)) == 50


def test_score_is_a_mean_field_value(room_grid):
	points = body_points(_scan_at(room_grid, Pose2(1.0, 1.1, 0.2)), 120)
	assert 0.0 <= score_pose(room_grid, points, Pose2(1.0, 1.1, 0.2), 0.1) <= 1.0
	assert score_pose(room_grid, np.zeros((0, 2)), Pose2(), 0.1) == 0.0


def test_threshold_controls_acceptance(room_grid):
	pose = Pose2(1.0, 1.1, 0.2)
	result = match_scan(_scan_at(room_grid, pose), room_grid, pose, MatcherConfig(threshold=1.01))
	assert not result.accepted


def test_information_scales_with_score():
	low, high = information_from_score(0.5), information_from_score(1.0)
	assert np.all(np.diag(high) > np.diag(low))
	assert np.allclose(high, np.diag(np.diag(high)))
	assert information_from_score(0.0)[0, 0] > 0.0
