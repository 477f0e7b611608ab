"""
Body twist from the legs in contact plus the gyroscope.

A stance foot at body position p with joint-space velocity J qd satisfies
v_b + w x p = -J qd, i.e. the block [I | -S(p)] V = -J qd. One block per contact foot
and one block [0 | I] V = w_imu are stacked and solved in the least-squares sense.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation

from lib.contact_observer import ContactReport
from lib.geometry import BodyTwist, Pose3, skew
from lib.robot_model import JointState, RobotModel, forward_kinematics, leg_jacobian

DEFAULT_IMU_WEIGHT = 10.0
DEFAULT_MIN_SINGULAR_VALUE = 1e-6


@dataclass(frozen=True)
class ConstraintSystem:
	matrix: np.ndarray
	rhs: np.ndarray
	weights: np.ndarray
	legs: tuple = ()

	def __post_init__(self):
		rows = 3 * len(self.legs) + 3
		if self.matrix.shape != (rows, 6) or self.rhs.shape != (rows,) or self.weights.shape != (rows,):
			raise ValueError(f"constraint system for {len(self.legs)} legs must have {rows} rows")

	@property
	def contact_count(self) -> int:
		return len(self.legs)


@dataclass(frozen=True)
class TwistEstimate:
	twist: BodyTwist
	residual: float
	min_singular_value: float
	degraded: bool
	contact_count: int = 0


def leg_block(model: RobotModel, leg: int, q, qd):
	foot = forward_kinematics(model, leg, q)
	block = np.hstack([np.eye(3), -skew(foot)])
	return block, -leg_jacobian(model, leg, q) @ np.asarray(qd, dtype=float)


def build_constraints(
		model: RobotModel,
		state: JointState,
		contacts: ContactReport,
		omega_imu,
		imu_weight: float = DEFAULT_IMU_WEIGHT,
) -> ConstraintSystem:
	legs = tuple(int(leg) for leg in np.flatnonzero(contacts.flags))
	blocks, rhs = [], []
	for leg in legs:
		block, velocity = leg_block(model, leg, state.positions[leg], state.velocities[leg])
		blocks.append(block)
		rhs.append(velocity)
	blocks.append(np.hstack([np.zeros((3, 3)), np.eye(3)]))
	rhs.append(np.asarray(omega_imu, dtype=float))
	weights = np.concatenate([np.ones(3 * len(legs)), np.full(3, imu_weight)])
	return ConstraintSystem(np.vstack(blocks), np.concatenate(rhs), weights, legs)


def solve_twist(system: ConstraintSystem, min_singular_value: float = DEFAULT_MIN_SINGULAR_VALUE) -> TwistEstimate:
	"""minimum-norm least-squares solution through an SVD-based solver"""
	scale = np.sqrt(system.weights)
	solution, _, _, singular_values = scipy.linalg.lstsq(
		system.matrix * scale[:, None], system.rhs * scale, lapack_driver="gelsd"
	)
	smallest = float(np.min(singular_values)) if len(singular_values) == 6 else 0.0
	residual = float(np.linalg.norm(system.matrix @ solution - system.rhs))
	degraded = system.contact_count == 0 or smallest < min_singular_value
	return TwistEstimate(BodyTwist.from_vector(solution), residual, smallest, degraded, system.contact_count)


def integrate_pose(pose: Pose3, twist: BodyTwist, dt: float) -> Pose3:
	"""exact rotation update, translation transported with the start orientation"""
	if dt <= 0:
		raise ValueError("dt must be positive")
	rotation = pose.rotation
	position = pose.position + rotation.apply(twist.linear) * dt
	updated = rotation * Rotation.from_rotvec(twist.angular * dt)
	quaternion = updated.as_quat()
	return Pose3(position, quaternion / np.linalg.norm(quaternion))


class LegOdometry:
	"""stateful twist estimation with a zero-order hold of the linear velocity in flight"""

	def __init__(
			self,
			model: RobotModel,
			imu_weight: float = DEFAULT_IMU_WEIGHT,
			min_singular_value: float = DEFAULT_MIN_SINGULAR_VALUE,
			pose: Pose3 | None = None,
	):
		self.model = model
		self.imu_weight = imu_weight
		self.min_singular_value = min_singular_value
		self.pose = pose if pose is not None else Pose3()
		self.last_linear = np.zeros(3)
		self.estimate_count = 0

	def estimate(self, joints: JointState, contacts: ContactReport, omega_imu) -> TwistEstimate:
		system = build_constraints(self.model, joints, contacts, omega_imu, self.imu_weight)
		estimate = solve_twist(system, self.min_singular_value)
		self.estimate_count += 1
		if system.contact_count == 0:
			held = BodyTwist(self.last_linear, estimate.twist.angular)
			return TwistEstimate(held, estimate.residual, estimate.min_singular_value, True, 0)
		if not estimate.degraded:
			self.last_linear = estimate.twist.linear.copy()
		return estimate

	def integrate(self, twist: BodyTwist, dt: float) -> Pose3:
		self.pose = integrate_pose(self.pose, twist, dt)
		return self.pose
