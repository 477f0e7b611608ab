import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from lib.geometry import BodyTwist, Pose2, Pose3, se2_exp, se2_log, skew, wrap_angle


@pytest.mark.parametrize("angle, expected", [
	(0.0, 0.0),
	(np.pi, np.pi),
	(-np.pi, np.pi),
	(3 * np.pi / 2, -np.pi / 2),
	(-7.0, -7.0 + 2 * np.pi),
])
def test_wrap_angle(angle, expected):
	assert wrap_angle(angle) == pytest.approx(expected)


def test_skew_is_cross_product(rng):
	a, b = rng.normal(size=3), rng.normal(size=3)
	np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-12)


def test_pose2_compose_inverse(rng):
	for _ in range(20):
		pose = Pose2(*rng.normal(size=3))
		identity = pose.compose(pose.inverse())
		np.testing.assert_allclose(identity.as_array(), 0.0, atol=1e-12)


def test_pose2_between():
	a = Pose2(1.0, 0.0, np.pi / 2)
	b = Pose2(1.0, 2.0, np.pi / 2)
	relative = a.between(b)
	np.testing.assert_allclose(relative.as_array(), [2.0, 0.0, 0.0], atol=1e-12)
	np.testing.assert_allclose(a.compose(relative).as_array(), b.as_array(), atol=1e-12)


def test_pose2_heading_is_wrapped():
	assert Pose2(0.0, 0.0, 3 * np.pi).theta == pytest.approx(np.pi)


def test_se2_log_inverts_exp(rng):
	for _ in range(20):
		twist = rng.uniform(-1.0, 1.0, size=3)
		np.testing.assert_allclose(se2_log(se2_exp(*twist)), twist, atol=1e-9)


def test_se2_exp_quarter_circle():
	pose = se2_exp(np.pi / 2, 0.0, np.pi / 2)
	np.testing.assert_allclose(pose.as_array(), [1.0, 1.0, np.pi / 2], atol=1e-12)


def test_body_twist_rejects_non_finite():
	with pytest.raises(ValueError):
		BodyTwist([np.nan, 0.0, 0.0], [0.0, 0.0, 0.0])


def test_pose3_euler_convention():
	# positive pitch tips the nose (+x) down
	pose = Pose3.from_pose2(Pose2(), pitch=0.2)
	nose = pose.rotation.apply([1.0, 0.0, 0.0])
	assert nose[2] < 0.0
	roll, pitch, yaw = pose.euler()
	assert (roll, pitch, yaw) == pytest.approx((0.0, 0.2, 0.0))


def test_pose3_compose_matches_matrices(rng):
	a = Pose3(rng.normal(size=3), Rotation.random(random_state=1).as_quat())
	b = Pose3(rng.normal(size=3), Rotation.random(random_state=2).as_quat())
	point = rng.normal(size=3)
	np.testing.assert_allclose(a.compose(b).transform_points(point), a.transform_points(b.transform_points(point)))
	np.testing.assert_allclose(a.between(a.compose(b)).position, b.position, atol=1e-12)


def test_pose3_normalizes_quaternion():
	pose = Pose3([0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0])
	assert np.linalg.norm(pose.quaternion) == pytest.approx(1.0)
	with pytest.raises(ValueError):
		Pose3([0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
