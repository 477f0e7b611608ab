import numpy as np
import pytest

from lib.geometry import Pose2, Pose3
from lib.scan_stabilization import (
	CameraIntrinsics,
	center_row_scan,
	extract_scan,
	pitch_shift,
	reference_line,
)
from lib.simulator import BODY_FROM_CAMERA, raycast_depth
from lib.worlds import World, wall

INTRINSICS = CameraIntrinsics(fx=400.0, fy=400.0, cx=319.5, cy=239.5, width=640, height=480)


def _wall_world(distance: float = 2.0) -> World:
	return World("wall", wall(distance, -10.0, distance, 10.0), wall_height=2.0)


def _render(world: World, roll: float = 0.0, pitch: float = 0.0, height: float = 0.3) -> np.ndarray:
	body = Pose3.from_pose2(Pose2(), height, roll, pitch)
	camera = body.compose(Pose3([0.0, 0.0, 0.0], BODY_FROM_CAMERA.as_quat()))
	image, _ = raycast_depth(world, camera, INTRINSICS)
	return image


def test_pitch_shift_values():
	assert pitch_shift(0.0, INTRINSICS) == 0.0
	assert pitch_shift(0.1, INTRINSICS) == pytest.approx(-40.134, abs=1e-3)
	for theta in np.linspace(-1.2, 1.2, 25):
		assert pitch_shift(-theta, INTRINSICS) == pytest.approx(-pitch_shift(theta, INTRINSICS))


def test_pitch_shift_rejects_vertical_attitude():
	with pytest.raises(ValueError):
		pitch_shift(np.pi / 2, INTRINSICS)


def test_reference_line():
	assert reference_line(0.0, 0.0, INTRINSICS) == (0.0, pytest.approx(INTRINSICS.cy))
	slope, _ = reference_line(0.1, 0.0, INTRINSICS)
	assert slope == pytest.approx(-0.1003, abs=1e-4)
	for pitch in (-0.3, -0.05, 0.2):
		_, intercept = reference_line(0.05, pitch, INTRINSICS)
		assert intercept == pytest.approx(INTRINSICS.cy + pitch_shift(pitch, INTRINSICS))


def test_pitch_shift_matches_projection():
	point = np.array([5.0, 0.0, 0.0])
	for theta in np.radians(np.linspace(-20.0, 20.0, 9)):
		camera = Pose3.from_pose2(Pose2(), 0.0, 0.0, theta).compose(Pose3([0.0, 0.0, 0.0], BODY_FROM_CAMERA.as_quat()))
		x, y, z = camera.inverse().transform_points(point)
		row = INTRINSICS.fy * y / z + INTRINSICS.cy
		assert abs(row - (INTRINSICS.cy + pitch_shift(theta, INTRINSICS))) < 0.5


def test_frontoparallel_wall_scan():
	depth = np.full((INTRINSICS.height, INTRINSICS.width), 2000, dtype=np.uint16)
	scan = extract_scan(depth, 0.0, 0.0, INTRINSICS)
	assert scan.valid.all()
	center = np.argmin(np.abs(scan.angles))
	assert scan.ranges[center] == pytest.approx(2.0 / np.cos(scan.angles[center]), abs=1e-3)
	np.testing.assert_allclose(scan.ranges, 2.0 / np.cos(scan.angles), atol=1e-3)


def test_scan_grid_is_increasing_and_deterministic():
	depth = _render(_wall_world(), 0.05, 0.1)
	first = extract_scan(depth, 0.05, 0.1, INTRINSICS)
	second = extract_scan(depth, 0.05, 0.1, INTRINSICS)
	assert np.all(np.diff(first.angles) > 0)
	np.testing.assert_array_equal(first.ranges, second.ranges)
	np.testing.assert_array_equal(first.valid, second.valid)


def test_pitched_wall_matches_level_scan():
	world = _wall_world()
	level = extract_scan(_render(world), 0.0, 0.0, INTRINSICS)
	pitch = np.radians(10.0)
	pitched = extract_scan(_render(world, pitch=pitch), 0.0, pitch, INTRINSICS)
	both = level.valid & pitched.valid
	assert np.count_nonzero(both) > 0.9 * len(both)
	assert np.max(np.abs(level.ranges[both] - pitched.ranges[both])) <= 0.02


@pytest.mark.parametrize("roll, pitch", [(0.0, 15.0), (15.0, 0.0), (-10.0, 12.0), (8.0, -15.0)])
def test_attitude_invariance(roll, pitch):
	world = _wall_world(2.5)
	level = extract_scan(_render(world), 0.0, 0.0, INTRINSICS)
	roll, pitch = np.radians(roll), np.radians(pitch)
	tilted = extract_scan(_render(world, roll, pitch), roll, pitch, INTRINSICS)
	both = level.valid & tilted.valid
	assert np.count_nonzero(both) > 0.5 * len(both)
	assert np.max(np.abs(level.ranges[both] - tilted.ranges[both])) <= 0.02


def test_uncompensated_scan_sees_the_floor():
	world = World(
		"walled",
		wall(4.0, -10.0, 4.0, 10.0),
		free_polygon=np.array([[-10.0, -10.0], [10.0, -10.0], [10.0, 10.0], [-10.0, 10.0]]),
	)
	pitch = np.radians(10.0)
	depth = _render(world, pitch=pitch)
	raw = center_row_scan(depth, INTRINSICS)
	stabilized = extract_scan(depth, 0.0, pitch, INTRINSICS)
	center = np.argmin(np.abs(raw.angles))
	assert raw.ranges[center] < 2.0
	assert stabilized.ranges[center] == pytest.approx(4.0, abs=0.02)


def test_horizon_off_image_is_degraded():
	depth = np.full((INTRINSICS.height, INTRINSICS.width), 2000, dtype=np.uint16)
	scan = extract_scan(depth, 0.0, np.radians(80.0), INTRINSICS)
	assert scan.degraded
	assert not scan.valid.any()


def test_median_aggregation():
	depth = np.full((INTRINSICS.height, INTRINSICS.width), 2000, dtype=np.uint16)
	depth[238, :] = 1000
	minimum = extract_scan(depth, 0.0, 0.0, INTRINSICS, aggregation="min")
	median = extract_scan(depth, 0.0, 0.0, INTRINSICS, aggregation="median")
	center = np.argmin(np.abs(minimum.angles))
	assert minimum.ranges[center] == pytest.approx(1.0, abs=2e-3)
	assert median.ranges[center] == pytest.approx(2.0, abs=2e-3)


def test_invalid_arguments():
	depth = np.zeros((10, 10), dtype=np.uint16)
	with pytest.raises(ValueError):
		extract_scan(depth, 0.0, 0.0, INTRINSICS)
	good = np.zeros((INTRINSICS.height, INTRINSICS.width), dtype=np.uint16)
	with pytest.raises(ValueError):
		extract_scan(good, 0.0, 0.0, INTRINSICS, aggregation="mean")
	with pytest.raises(ValueError):
		CameraIntrinsics(fx=0.0, fy=1.0, cx=1.0, cy=1.0, width=4, height=4)


def test_empty_depth_gives_no_valid_rays():
	scan = center_row_scan(np.zeros((INTRINSICS.height, INTRINSICS.width), dtype=np.uint16), INTRINSICS)
	assert scan.valid_count == 0
	assert not scan.degraded


def test_endpoints_follow_bearings():
	depth = np.full((INTRINSICS.height, INTRINSICS.width), 2000, dtype=np.uint16)
	scan = center_row_scan(depth, INTRINSICS)
	np.testing.assert_allclose(scan.endpoints()[:, 0], 2.0, atol=1e-3)
	assert scan.with_mount(Pose2(0.25, 0.0, 0.0)).mount.x == 0.25
