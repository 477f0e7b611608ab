import numpy as np
import pytest

from lib.contact_observer import ContactReport
from lib.geometry import BodyTwist, Pose3, skew
from lib.leg_odometry import (
	ConstraintSystem,
	LegOdometry,
	build_constraints,
	integrate_pose,
	leg_block,
	solve_twist,
)
from lib.robot_model import JointState, forward_kinematics, leg_jacobian

STANCE = np.array([0.1, 0.5, -1.0])


def _joints_for_twist(model, twist: BodyTwist) -> JointState:
	"""joint velocities of stance feet that stay fixed in the world while the body moves with `twist`"""
	q = np.tile(STANCE, (4, 1)) * model.joint_signs
	qd = np.zeros((4, 3))
	for leg in range(4):
		foot = forward_kinematics(model, leg, q[leg])
		foot_velocity = -(twist.linear + np.cross(twist.angular, foot))
		qd[leg] = np.linalg.solve(leg_jacobian(model, leg, q[leg]), foot_velocity)
	return JointState(q, qd)


def test_system_size_follows_contact_count(model):
	joints = JointState(np.tile(STANCE, (4, 1)), np.zeros((4, 3)))
	system = build_constraints(model, joints, ContactReport.from_flags([True] * 4), np.zeros(3))
	assert system.matrix.shape == (15, 6)
	assert system.contact_count == 4


def test_no_contacts_leaves_the_gyro_block(model):
	joints = JointState(np.tile(STANCE, (4, 1)), np.zeros((4, 3)))
	omega = np.array([0.1, -0.2, 0.3])
	system = build_constraints(model, joints, ContactReport.from_flags([False] * 4), omega)
	np.testing.assert_array_equal(system.matrix, np.hstack([np.zeros((3, 3)), np.eye(3)]))
	np.testing.assert_array_equal(system.rhs, omega)
	estimate = solve_twist(system)
	np.testing.assert_allclose(estimate.twist.angular, omega, atol=1e-12)
	assert estimate.degraded


def test_leg_block_uses_cross_product_matrix(model, rng):
	q = np.tile(STANCE, (4, 1))[0]
	block, _ = leg_block(model, 0, q, np.zeros(3))
	foot = forward_kinematics(model, 0, q)
	np.testing.assert_array_equal(block[:, :3], np.eye(3))
	np.testing.assert_array_equal(block[:, 3:], -skew(foot))
	p = np.array([0.2, 0.15, -0.3])
	for _ in range(10):
		x = rng.normal(size=3)
		np.testing.assert_allclose(skew(p) @ x, np.cross(p, x), atol=1e-15)


def test_homogeneous_system_gives_zero_twist(model):
	joints = JointState(np.tile(STANCE, (4, 1)), np.zeros((4, 3)))
	estimate = solve_twist(build_constraints(model, joints, ContactReport.from_flags([True] * 4), np.zeros(3)))
	np.testing.assert_allclose(estimate.twist.as_vector(), 0.0, atol=1e-15)
	assert estimate.residual == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("flags", [
	[True, True, True, False],
	[True, False, False, True],
	[True, True, True, True],
])
def test_constructed_twist_is_recovered(model, rng, flags):
	twist = BodyTwist(rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.3)
	joints = _joints_for_twist(model, twist)
	estimate = solve_twist(build_constraints(model, joints, ContactReport.from_flags(flags), twist.angular))
	np.testing.assert_allclose(estimate.twist.as_vector(), twist.as_vector(), atol=1e-9)
	assert estimate.residual < 1e-9
	assert not estimate.degraded


def test_solution_matches_normal_equations(rng):
	matrix = rng.normal(size=(15, 6))
	rhs = rng.normal(size=15)
	weights = np.concatenate([np.ones(12), np.full(3, 10.0)])
	system = ConstraintSystem(matrix, rhs, weights, legs=(0, 1, 2, 3))
	w = np.diag(weights)
	oracle = np.linalg.inv(matrix.T @ w @ matrix) @ matrix.T @ w @ rhs
	np.testing.assert_allclose(solve_twist(system).twist.as_vector(), oracle, atol=1e-8)


def test_solution_ignores_block_order(rng):
	matrix = rng.normal(size=(15, 6))
	rhs = rng.normal(size=15)
	weights = np.ones(15)
	order = np.concatenate([np.arange(9, 12), np.arange(0, 9), np.arange(12, 15)])
	first = solve_twist(ConstraintSystem(matrix, rhs, weights, legs=(0, 1, 2, 3)))
	second = solve_twist(ConstraintSystem(matrix[order], rhs[order], weights, legs=(3, 0, 1, 2)))
	np.testing.assert_allclose(first.twist.as_vector(), second.twist.as_vector(), atol=1e-10)


def test_inconsistent_blocks_leave_a_residual(model):
	joints = _joints_for_twist(model, BodyTwist([0.5, 0.0, 0.0], [0.0, 0.0, 0.0]))
	other = _joints_for_twist(model, BodyTwist([-0.3, 0.2, 0.0], [0.0, 0.0, 0.0]))
	mixed = JointState(joints.positions, np.vstack([joints.velocities[:2], other.velocities[2:]]))
	flags = ContactReport.from_flags([True] * 4)
	two = solve_twist(build_constraints(model, mixed, ContactReport.from_flags([True, True, False, False]), np.zeros(3)))
	four = solve_twist(build_constraints(model, mixed, flags, np.zeros(3)))
	assert two.residual < 1e-9
	assert four.residual > two.residual


def test_constraint_system_checks_shape():
	with pytest.raises(ValueError):
		ConstraintSystem(np.zeros((6, 6)), np.zeros(6), np.ones(6), legs=(0, 1))


def test_integrate_zero_twist_keeps_pose():
	pose = Pose3([1.0, 2.0, 0.3], [0.0, 0.0, 0.3826834, 0.9238795])
	result = integrate_pose(pose, BodyTwist(), 0.01)
	np.testing.assert_allclose(result.position, pose.position)
	np.testing.assert_allclose(result.quaternion, pose.quaternion)


def test_integrate_unit_velocity():
	result = integrate_pose(Pose3(), BodyTwist([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]), 1.0)
	np.testing.assert_allclose(result.position, [1.0, 0.0, 0.0])


def test_integrate_rejects_non_positive_dt():
	with pytest.raises(ValueError):
		integrate_pose(Pose3(), BodyTwist(), 0.0)


def test_constant_twist_closes_the_circle():
	twist = BodyTwist([1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
	dt = 1e-3
	pose = Pose3()
	for _ in range(int(round(2 * np.pi / dt))):
		pose = integrate_pose(pose, twist, dt)
	assert np.linalg.norm(pose.position) < 1e-3


def test_quaternion_stays_normalized(rng):
	twist = BodyTwist(rng.normal(size=3), rng.normal(size=3))
	pose = Pose3()
	for _ in range(20000):
		pose = integrate_pose(pose, twist, 1e-3)
	assert abs(np.linalg.norm(pose.quaternion) - 1.0) < 1e-9


def test_flight_phase_holds_linear_velocity(model):
	twist = BodyTwist([0.4, 0.05, 0.0], [0.0, 0.0, 0.2])
	odometry = LegOdometry(model)
	first = odometry.estimate(_joints_for_twist(model, twist), ContactReport.from_flags([True] * 4), twist.angular)
	np.testing.assert_allclose(first.twist.linear, twist.linear, atol=1e-9)

	omega = np.array([0.0, 0.1, -0.1])
	flight = odometry.estimate(_joints_for_twist(model, twist), ContactReport.from_flags([False] * 4), omega)
	assert flight.degraded
	assert flight.contact_count == 0
	np.testing.assert_allclose(flight.twist.linear, twist.linear, atol=1e-9)
	np.testing.assert_allclose(flight.twist.angular, omega, atol=1e-12)


def test_leg_odometry_integrates_from_start_pose(model):
	start = Pose3([1.0, 1.0, 0.3])
	odometry = LegOdometry(model, pose=start)
	pose = odometry.integrate(BodyTwist([0.5, 0.0, 0.0], [0.0, 0.0, 0.0]), 2.0)
	np.testing.assert_allclose(pose.position, [2.0, 1.0, 0.3])
