import numpy as np
import pytest

from lib.geometry import BodyTwist, Pose3
from lib.leg_odometry import TwistEstimate
from lib.odometry_fusion import (
	LEG,
	LOST,
	TRACKING,
	VIO,
	FusedOdometry,
	OdometrySource,
	VioFrame,
	detect_loss,
	step,
)

FORWARD = TwistEstimate(BodyTwist([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]), 0.0, 1.0, False, 4)


def _vio(x: float, stamp: float, health: str = TRACKING) -> OdometrySource:
	return OdometrySource("vio", Pose3([x, 0.0, 0.3]), stamp, health)


def test_tracking_source_drives_the_output():
	fused = FusedOdometry.start(Pose3([0.0, 0.0, 0.3]))
	fused = step(fused, _vio(0.2, 0.1), FORWARD, 0.1)
	assert fused.active_source == VIO
	np.testing.assert_allclose(fused.pose.position, [0.2, 0.0, 0.3])
	assert fused.stamp == pytest.approx(0.1)
	assert fused.reseed is None


def test_loss_dead_reckons_from_the_last_good_pose():
	fused = step(FusedOdometry.start(Pose3()), _vio(1.0, 0.1), FORWARD, 0.1)
	for k in range(5):
		# the lost source keeps reporting garbage
		fused = step(fused, _vio(50.0, 0.2 + 0.1 * k, LOST), FORWARD, 0.1)
		assert fused.active_source == LEG
	np.testing.assert_allclose(fused.pose.position, [1.5, 0.0, 0.3], atol=1e-12)
	assert not fused.degraded


def test_recovery_waits_for_the_hysteresis():
	fused = step(FusedOdometry.start(Pose3()), _vio(0.0, 0.1), FORWARD, 0.1)
	fused = step(fused, _vio(9.0, 0.2, LOST), FORWARD, 0.1)
	for k in range(2):
		fused = step(fused, _vio(9.0, 0.3 + 0.1 * k), FORWARD, 0.1)
		assert fused.active_source == LEG
		assert fused.reseed is None
	fused = step(fused, _vio(9.0, 0.5), FORWARD, 0.1)
	assert fused.active_source == VIO
	assert fused.recovery_count == 1
	np.testing.assert_allclose(fused.reseed.position, [0.4, 0.0, 0.3], atol=1e-12)
	np.testing.assert_allclose(fused.pose.position, fused.reseed.position)


def test_a_lost_frame_restarts_the_hysteresis():
	fused = step(FusedOdometry.start(Pose3()), _vio(0.0, 0.1, LOST), FORWARD, 0.1)
	for health in (TRACKING, TRACKING, LOST, TRACKING, TRACKING):
		fused = step(fused, _vio(0.0, fused.stamp, health), FORWARD, 0.1)
		assert fused.active_source == LEG


def test_missing_leg_estimate_holds_the_pose():
	fused = step(FusedOdometry.start(Pose3([1.0, 2.0, 0.3])), _vio(0.0, 0.1, LOST), None, 0.1)
	assert fused.degraded
	np.testing.assert_allclose(fused.pose.position, [1.0, 2.0, 0.3])


def test_flight_phase_estimate_is_integrated():
	flight = TwistEstimate(BodyTwist([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]), 0.0, 1.0, True, 0)
	fused = step(FusedOdometry.start(Pose3()), _vio(0.0, 0.1, LOST), flight, 0.1)
	np.testing.assert_allclose(fused.pose.position, [0.1, 0.0, 0.0], atol=1e-12)

	ill_posed = TwistEstimate(BodyTwist([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]), 0.0, 1e-9, True, 2)
	held = step(fused, _vio(0.0, 0.2, LOST), ill_posed, 0.1)
	assert held.degraded
	np.testing.assert_allclose(held.pose.position, fused.pose.position)


def test_step_rejects_non_positive_dt():
	with pytest.raises(ValueError):
		step(FusedOdometry.start(Pose3()), _vio(0.0, 0.0), FORWARD, 0.0)


def test_loss_detection_counts_correspondences():
	assert detect_loss(0) == LOST
	assert detect_loss(1) == TRACKING
	assert detect_loss(VioFrame(0.0, Pose3(), 12), min_correspondences=20) == LOST


def test_source_ingests_frames_in_order():
	source = OdometrySource("vio", Pose3(), 1.0)
	updated = source.ingest(VioFrame(1.5, Pose3([1.0, 0.0, 0.0]), 0))
	assert updated.health == LOST
	assert updated.stamp == 1.5
	with pytest.raises(ValueError):
		updated.ingest(VioFrame(1.0, Pose3(), 40))
