"""
Kinematics and per-leg dynamics of a four-legged robot with three joints per leg.

Joint order per leg is (hip abduction, hip pitch, knee). In the zero configuration
the leg is straight and points down along body -z. Abduction turns about body +x,
positive hip pitch and knee angles swing the foot forward (+x). Every joint angle is
multiplied by its sign from the model config before it enters the formulas.

Dynamics use a fixed-base model per leg: the base is treated as quasi-static, link
masses are point masses at the link midpoints and a small joint armature keeps the
mass matrix positive definite.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from schema import robot_model_config

LEG_COUNT = 4
JOINT_COUNT = 3
_DIFF_STEP = 1e-6


@dataclass
class JointState:
	positions: np.ndarray
	velocities: np.ndarray
	torques: np.ndarray = field(default_factory=lambda: np.zeros((LEG_COUNT, JOINT_COUNT)))
	stamp: float = 0.0

	def __post_init__(self):
		for name in ("positions", "velocities", "torques"):
			value = np.asarray(getattr(self, name), dtype=float)
			if value.shape != (LEG_COUNT, JOINT_COUNT):
				raise ValueError(f"{name} must have shape ({LEG_COUNT}, {JOINT_COUNT}), got {value.shape}")
			setattr(self, name, value)


@dataclass
class LegDynamics:
	momentum: np.ndarray
	bias: np.ndarray
	mass_matrix: np.ndarray
	jacobian: np.ndarray


class RobotModel:
	def __init__(
			self,
			hip_offsets,
			upper_lengths,
			lower_lengths,
			upper_masses,
			lower_masses,
			body_mass: float,
			joint_signs=None,
			gravity: float = 9.81,
			joint_armature: float = 2e-4,
			leg_names=None,
	):
		self.hip_offsets = np.asarray(hip_offsets, dtype=float).reshape(LEG_COUNT, 3)
		self.upper_lengths = np.broadcast_to(np.asarray(upper_lengths, dtype=float), (LEG_COUNT,)).copy()
		self.lower_lengths = np.broadcast_to(np.asarray(lower_lengths, dtype=float), (LEG_COUNT,)).copy()
		self.upper_masses = np.broadcast_to(np.asarray(upper_masses, dtype=float), (LEG_COUNT,)).copy()
		self.lower_masses = np.broadcast_to(np.asarray(lower_masses, dtype=float), (LEG_COUNT,)).copy()
		if joint_signs is None:
			joint_signs = np.ones((LEG_COUNT, JOINT_COUNT))
		self.joint_signs = np.asarray(joint_signs, dtype=float).reshape(LEG_COUNT, JOINT_COUNT)
		self.body_mass = float(body_mass)
		self.gravity = float(gravity)
		self.joint_armature = float(joint_armature)
		self.leg_names = list(leg_names) if leg_names else [f"leg{i}" for i in range(LEG_COUNT)]

		if np.any(self.upper_lengths <= 0) or np.any(self.lower_lengths <= 0):
			raise ValueError("link lengths must be positive")
		if np.any(self.upper_masses <= 0) or np.any(self.lower_masses <= 0) or self.body_mass <= 0:
			raise ValueError("masses must be positive")
		if not np.all(np.isin(self.joint_signs, (-1.0, 1.0))):
			raise ValueError("joint signs must be +1 or -1")
		if len(np.unique(np.round(self.hip_offsets, 9), axis=0)) != LEG_COUNT:
			raise ValueError("hip offsets must be distinct per leg")

	@classmethod
	def from_config(cls, config: robot_model_config.Model) -> "RobotModel":
		return cls(
			hip_offsets=[leg.hip_offset for leg in config.legs],
			upper_lengths=[leg.upper_length for leg in config.legs],
			lower_lengths=[leg.lower_length for leg in config.legs],
			upper_masses=[leg.upper_mass for leg in config.legs],
			lower_masses=[leg.lower_mass for leg in config.legs],
			body_mass=config.body_mass,
			joint_signs=[leg.joint_signs for leg in config.legs],
			gravity=config.gravity,
			joint_armature=config.joint_armature,
			leg_names=[leg.name for leg in config.legs],
		)

	@classmethod
	def from_file(cls, path: str) -> "RobotModel":
		return cls.from_config(robot_model_config.from_file(path))

	@property
	def total_mass(self) -> float:
		return self.body_mass + float(np.sum(self.upper_masses + self.lower_masses))

	def weight(self) -> float:
		return self.total_mass * self.gravity


def _check_leg(leg: int):
	if not 0 <= leg < LEG_COUNT:
		raise ValueError(f"leg index must be in 0..{LEG_COUNT - 1}, got {leg}")


def _point_kinematics(angles, r1, r2):
	"""
	Position and Jacobian (w.r.t. the sign-corrected angles) of the point
	Rx(a) * (r1 sin b + r2 sin(b+c), 0, -r1 cos b - r2 cos(b+c)).
	Works on any leading batch shape of `angles`.
	"""
	a, b, c = angles[..., 0], angles[..., 1], angles[..., 2]
	sa, ca = np.sin(a), np.cos(a)
	sb, cb = np.sin(b), np.cos(b)
	sbc, cbc = np.sin(b + c), np.cos(b + c)

	xp = r1 * sb + r2 * sbc
	zp = -r1 * cb - r2 * cbc
	dx_db = r1 * cb + r2 * cbc
	dz_db = r1 * sb + r2 * sbc
	dx_dc = r2 * cbc
	dz_dc = r2 * sbc

	position = np.stack([xp, -sa * zp, ca * zp], axis=-1)
	jacobian = np.zeros(angles.shape[:-1] + (3, 3))
	jacobian[..., 1, 0] = -ca * zp
	jacobian[..., 2, 0] = -sa * zp
	jacobian[..., 0, 1] = dx_db
	jacobian[..., 1, 1] = -sa * dz_db
	jacobian[..., 2, 1] = ca * dz_db
	jacobian[..., 0, 2] = dx_dc
	jacobian[..., 1, 2] = -sa * dz_dc
	jacobian[..., 2, 2] = ca * dz_dc
	return position, jacobian


def _link_jacobians(model: RobotModel, leg: int, q):
	"""Jacobians of the two link midpoints, shape (..., 2, 3, 3)"""
	signs = model.joint_signs[leg]
	angles = np.asarray(q, dtype=float) * signs
	l1, l2 = model.upper_lengths[leg], model.lower_lengths[leg]
	_, upper = _point_kinematics(angles, 0.5 * l1, 0.0)
	_, lower = _point_kinematics(angles, l1, 0.5 * l2)
	return np.stack([upper * signs, lower * signs], axis=-3)


def forward_kinematics(model: RobotModel, leg: int, q) -> np.ndarray:
	_check_leg(leg)
	l1, l2 = model.upper_lengths[leg], model.lower_lengths[leg]
	position, _ = _point_kinematics(np.asarray(q, dtype=float) * model.joint_signs[leg], l1, l2)
	return model.hip_offsets[leg] + position


def leg_jacobian(model: RobotModel, leg: int, q) -> np.ndarray:
	_check_leg(leg)
	signs = model.joint_signs[leg]
	l1, l2 = model.upper_lengths[leg], model.lower_lengths[leg]
	_, jacobian = _point_kinematics(np.asarray(q, dtype=float) * signs, l1, l2)
	return jacobian * signs


def inverse_kinematics(model: RobotModel, leg: int, foot_position) -> np.ndarray:
	"""closed-form joint angles for a body-frame foot position, knee bent backwards"""
	_check_leg(leg)
	l1, l2 = model.upper_lengths[leg], model.lower_lengths[leg]
	x, y, z = np.asarray(foot_position, dtype=float) - model.hip_offsets[leg]
	reach = np.hypot(y, z)
	abduction = np.arctan2(y, -z)
	cos_knee = np.clip((x * x + reach * reach - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0)
	knee = -np.arccos(cos_knee)
	pitch = np.arctan2(x, reach) - np.arctan2(l2 * np.sin(knee), l1 + l2 * np.cos(knee))
	return np.array([abduction, pitch, knee]) * model.joint_signs[leg]


def mass_matrix(model: RobotModel, leg: int, q) -> np.ndarray:
	_check_leg(leg)
	jacobians = _link_jacobians(model, leg, q)
	masses = np.array([model.upper_masses[leg], model.lower_masses[leg]])
	inertia = np.einsum("...lki,...lkj,l->...ij", jacobians, jacobians, masses)
	return inertia + model.joint_armature * np.eye(JOINT_COUNT)


def mass_matrix_derivatives(model: RobotModel, leg: int, q) -> np.ndarray:
	"""D[k] = dM/dq_k by central differences"""
	q = np.asarray(q, dtype=float)
	offsets = _DIFF_STEP * np.eye(JOINT_COUNT)
	stacked = np.concatenate([q + offsets, q - offsets])
	matrices = mass_matrix(model, leg, stacked)
	return (matrices[:JOINT_COUNT] - matrices[JOINT_COUNT:]) / (2.0 * _DIFF_STEP)


def coriolis_matrix(model: RobotModel, leg: int, q, qd) -> np.ndarray:
	"""C built from Christoffel symbols of the first kind, so that dM/dt = C + C^T"""
	qd = np.asarray(qd, dtype=float)
	derivatives = mass_matrix_derivatives(model, leg, q)
	return 0.5 * (
			np.einsum("kij,k->ij", derivatives, qd)
			+ np.einsum("jik,k->ij", derivatives, qd)
			- np.einsum("ijk,k->ij", derivatives, qd)
	)


def body_gravity(model: RobotModel, orientation) -> np.ndarray:
	"""gravity acceleration expressed in the body frame"""
	rotation = orientation if isinstance(orientation, Rotation) else Rotation.from_quat(orientation)
	return rotation.inv().apply([0.0, 0.0, -model.gravity])


def gravity_torque(model: RobotModel, leg: int, q, gravity_body) -> np.ndarray:
	jacobians = _link_jacobians(model, leg, q)
	masses = np.array([model.upper_masses[leg], model.lower_masses[leg]])
	return -np.einsum("lki,k,l->i", jacobians, np.asarray(gravity_body, dtype=float), masses)


def dynamics_terms(model: RobotModel, state: JointState, orientation) -> list[LegDynamics]:
	"""
	Per leg: generalized momentum p = M(q) qd and the bias term
	tau_bar = tau_m + C^T qd - g(q), the quantities a momentum observer integrates.
	"""
	gravity_body = body_gravity(model, orientation)
	terms = []
	for leg in range(LEG_COUNT):
		q = state.positions[leg]
		qd = state.velocities[leg]
		inertia = mass_matrix(model, leg, q)
		coriolis = coriolis_matrix(model, leg, q, qd)
		bias = state.torques[leg] + coriolis.T @ qd - gravity_torque(model, leg, q, gravity_body)
		terms.append(LegDynamics(
			momentum=inertia @ qd,
			bias=bias,
			mass_matrix=inertia,
			jacobian=leg_jacobian(model, leg, q),
		))
	return terms
