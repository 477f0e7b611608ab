"""
Contact force estimation from joint torques and leg kinematics.

Two momentum observers are provided, the linear generalized-momentum observer and a
mixed-mode observer with an added signed square-root term. Both estimate only the
normal (vertical) force per foot. The correction of the force estimate is driven by
the momentum error projected onto j = J^T u, the joint-space image of a unit upward
force at the foot, so that the off-axis force components stay zero.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.transform import Rotation

from lib.robot_model import LEG_COUNT, JointState, RobotModel, dynamics_terms

MAX_OBSERVER_DT = 0.01


@dataclass(frozen=True)
class ObserverState:
	momentum: np.ndarray
	force: np.ndarray
	l1: float = 50.0
	l2: float = 2500.0
	gain: float = 50.0
	stamp: float = 0.0

	def __post_init__(self):
		momentum = np.atleast_2d(np.asarray(self.momentum, dtype=float))
		force = np.atleast_1d(np.asarray(self.force, dtype=float))
		if momentum.shape[0] != force.shape[0]:
			raise ValueError("momentum and force estimates must cover the same legs")
		if min(self.l1, self.l2, self.gain) <= 0:
			raise ValueError("observer gains must be positive")
		object.__setattr__(self, "momentum", momentum)
		object.__setattr__(self, "force", force)

	@classmethod
	def zeros(cls, legs: int = LEG_COUNT, dof: int = 3, **gains) -> "ObserverState":
		return cls(np.zeros((legs, dof)), np.zeros(legs), **gains)


@dataclass(frozen=True)
class ObserverTerms:
	"""measured momentum p, bias tau_bar and force direction j, one row per leg"""
	momentum: np.ndarray
	bias: np.ndarray
	direction: np.ndarray

	def __post_init__(self):
		for name in ("momentum", "bias", "direction"):
			object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))


@dataclass(frozen=True)
class ContactReport:
	stamp: float
	raw: np.ndarray
	filtered: np.ndarray
	flags: np.ndarray
	upper: np.ndarray
	lower: np.ndarray

	@property
	def count(self) -> int:
		return int(np.count_nonzero(self.flags))

	@classmethod
	def from_flags(cls, flags, stamp: float = 0.0, forces=None) -> "ContactReport":
		"""report carrying externally known contact states (e.g. simulator ground truth)"""
		flags = np.asarray(flags, dtype=bool)
		forces = np.zeros(flags.shape) if forces is None else np.asarray(forces, dtype=float)
		return cls(stamp, forces, forces, flags, np.zeros(flags.shape), np.zeros(flags.shape))


@dataclass(frozen=True)
class ContactDetectionConfig:
	upper: np.ndarray
	lower: np.ndarray
	cutoff_hz: float = 10.0

	def __post_init__(self):
		upper = np.asarray(self.upper, dtype=float)
		lower = np.asarray(self.lower, dtype=float)
		if np.any(lower > upper):
			raise ValueError("lower hysteresis threshold must not exceed the upper one")
		if self.cutoff_hz <= 0:
			raise ValueError("filter cutoff must be positive")
		object.__setattr__(self, "upper", upper)
		object.__setattr__(self, "lower", lower)

	@classmethod
	def for_model(cls, model: RobotModel, upper_factor=0.4, lower_factor=0.25, cutoff_hz=10.0):
		"""per-foot hysteresis pair as fractions of the static load mg/4"""
		static_load = model.weight() / LEG_COUNT
		return cls(
			upper=np.full(LEG_COUNT, upper_factor * static_load),
			lower=np.full(LEG_COUNT, lower_factor * static_load),
			cutoff_hz=cutoff_hz,
		)


def q_function(s):
	s = np.asarray(s, dtype=float)
	return np.sign(s) * np.sqrt(np.abs(s)) + s


def k1(s):
	return q_function(s)


def k2(s):
	return np.sign(s) + q_function(s)


def _check_dt(dt: float):
	if dt <= 0:
		raise ValueError("dt must be positive")
	if dt > MAX_OBSERVER_DT:
		raise ValueError(f"dt must not exceed {MAX_OBSERVER_DT * 1000:.0f} ms")


def _projected_error(state: ObserverState, terms: ObserverTerms):
	error = terms.momentum - state.momentum
	norm_sq = np.sum(terms.direction ** 2, axis=1)
	safe = norm_sq > 1e-12
	scalar = np.zeros_like(norm_sq)
	scalar[safe] = np.sum(terms.direction[safe] * error[safe], axis=1) / norm_sq[safe]
	return error, scalar


def gm_observer_step(state: ObserverState, terms: ObserverTerms, dt: float) -> ObserverState:
	_check_dt(dt)
	error, scalar = _projected_error(state, terms)
	momentum_rate = terms.bias + terms.direction * state.force[:, None] + state.l1 * error
	force_rate = state.l2 * scalar
	return replace(
		state,
		momentum=state.momentum + dt * momentum_rate,
		force=np.maximum(state.force + dt * force_rate, 0.0),
		stamp=state.stamp + dt,
	)


def mixed_observer_step(state: ObserverState, terms: ObserverTerms, dt: float) -> ObserverState:
	_check_dt(dt)
	error, scalar = _projected_error(state, terms)
	# sliding-mode term acts on every momentum component, the force only on the projection
	correction = state.gain * k1(error)
	momentum_rate = terms.bias + terms.direction * state.force[:, None] + correction
	force_rate = state.gain ** 2 * k2(scalar)
	return replace(
		state,
		momentum=state.momentum + dt * momentum_rate,
		force=np.maximum(state.force + dt * force_rate, 0.0),
		stamp=state.stamp + dt,
	)


OBSERVERS = {
	"gm": gm_observer_step,
	"mixed": mixed_observer_step,
}


def observer_terms(model: RobotModel, state: JointState, orientation, contact_direction=None) -> ObserverTerms:
	rotation = orientation if isinstance(orientation, Rotation) else Rotation.from_quat(orientation)
	if contact_direction is None:
		contact_direction = rotation.inv().apply([0.0, 0.0, 1.0])
	legs = dynamics_terms(model, state, rotation)
	return ObserverTerms(
		momentum=np.array([leg.momentum for leg in legs]),
		bias=np.array([leg.bias for leg in legs]),
		direction=np.array([leg.jacobian.T @ contact_direction for leg in legs]),
	)


def detect_contacts(
		history: ContactReport | None,
		forces,
		config: ContactDetectionConfig,
		stamp: float,
) -> ContactReport:
	"""first-order low-pass per foot followed by a Schmitt trigger"""
	forces = np.asarray(forces, dtype=float)
	if history is None:
		filtered = forces.copy()
		flags = filtered >= config.upper
	else:
		dt = stamp - history.stamp
		if dt <= 0:
			raise ValueError("contact reports must be stepped in timestamp order")
		time_constant = 1.0 / (2.0 * np.pi * config.cutoff_hz)
		alpha = dt / (dt + time_constant)
		filtered = history.filtered + alpha * (forces - history.filtered)
		flags = np.where(history.flags, filtered > config.lower, filtered >= config.upper)
	return ContactReport(stamp, forces, filtered, flags, config.upper, config.lower)


class ContactEstimator:
	"""one observer per foot plus the hysteresis filter, stepped at the control rate"""

	def __init__(self, model: RobotModel, config: ContactDetectionConfig, observer="mixed", **gains):
		if observer not in OBSERVERS:
			raise ValueError(f"unknown observer '{observer}', expected one of {', '.join(OBSERVERS)}")
		self.model = model
		self.config = config
		self.observer = observer
		self._step = OBSERVERS[observer]
		self.state = None
		self.report = None
		self._gains = gains

	def update(self, joints: JointState, orientation) -> ContactReport:
		terms = observer_terms(self.model, joints, orientation)
		if self.state is None:
			# start from the measured momentum so the first steps see no spurious error
			self.state = ObserverState(terms.momentum.copy(), np.zeros(LEG_COUNT), stamp=joints.stamp, **self._gains)
		else:
			dt = joints.stamp - self.state.stamp
			if dt <= 0:
				logging.warning("contact estimator skipped non-increasing stamp %.6f", joints.stamp)
				return self.report
			self.state = self._step(self.state, terms, dt)
			# keep the stamp of the measurement, not the accumulated one
			self.state = replace(self.state, stamp=joints.stamp)
		self.report = detect_contacts(self.report, self.state.force, self.config, joints.stamp)
		return self.report
