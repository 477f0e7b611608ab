from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


def wrap_angle(angle):
	"""wrap an angle (or array of angles) into (-pi, pi]"""
	wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)
	return float(wrapped) if wrapped.ndim == 0 else wrapped


def skew(v) -> np.ndarray:
	"""cross-product matrix: skew(a) @ b == cross(a, b)"""
	x, y, z = v
	return np.array([
		[0.0, -z, y],
		[z, 0.0, -x],
		[-y, x, 0.0],
	])


def rotation_2d(theta: float) -> np.ndarray:
	c, s = np.cos(theta), np.sin(theta)
	return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2:
	x: float = 0.0
	y: float = 0.0
	theta: float = 0.0

	def __post_init__(self):
		object.__setattr__(self, "x", float(self.x))
		object.__setattr__(self, "y", float(self.y))
		object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

	@classmethod
	def from_array(cls, values) -> "Pose2":
		return cls(values[0], values[1], values[2])

	def as_array(self) -> np.ndarray:
		return np.array([self.x, self.y, self.theta])

	@property
	def translation(self) -> np.ndarray:
		return np.array([self.x, self.y])

	def compose(self, other: "Pose2") -> "Pose2":
		c, s = np.cos(self.theta), np.sin(self.theta)
		return Pose2(
			self.x + c * other.x - s * other.y,
			self.y + s * other.x + c * other.y,
			self.theta + other.theta,
		)

	def inverse(self) -> "Pose2":
		c, s = np.cos(self.theta), np.sin(self.theta)
		return Pose2(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)

	def between(self, other: "Pose2") -> "Pose2":
		"""relative pose taking self to other, expressed in self's frame"""
		return self.inverse().compose(other)

	def transform_points(self, points) -> np.ndarray:
		points = np.asarray(points, dtype=float)
		return points @ rotation_2d(self.theta).T + self.translation

	def distance_to(self, other: "Pose2") -> float:
		return float(np.hypot(other.x - self.x, other.y - self.y))

	def __matmul__(self, other: "Pose2") -> "Pose2":
		return self.compose(other)


def se2_exp(vx: float, vy: float, omega: float) -> Pose2:
	"""exponential of a planar twist already multiplied by its duration"""
	if abs(omega) < 1e-9:
		return Pose2(vx, vy, omega)
	s, c = np.sin(omega), np.cos(omega)
	return Pose2(
		(s * vx - (1.0 - c) * vy) / omega,
		((1.0 - c) * vx + s * vy) / omega,
		omega,
	)


def se2_log(pose: Pose2) -> np.ndarray:
	"""inverse of se2_exp: (vx, vy, omega) whose exponential is pose"""
	theta = pose.theta
	if abs(theta) < 1e-9:
		return np.array([pose.x, pose.y, theta])
	s, c = np.sin(theta), np.cos(theta)
	# V^-1 for V = [[s, -(1-c)], [1-c, s]] / theta
	det = s * s + (1.0 - c) ** 2
	vx = theta * (s * pose.x + (1.0 - c) * pose.y) / det
	vy = theta * (-(1.0 - c) * pose.x + s * pose.y) / det
	return np.array([vx, vy, theta])


@dataclass(frozen=True)
class BodyTwist:
	"""body-frame linear and angular velocity"""
	linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
	angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

	def __post_init__(self):
		linear = np.asarray(self.linear, dtype=float).reshape(3)
		angular = np.asarray(self.angular, dtype=float).reshape(3)
		if not (np.all(np.isfinite(linear)) and np.all(np.isfinite(angular))):
			raise ValueError("twist components must be finite")
		object.__setattr__(self, "linear", linear)
		object.__setattr__(self, "angular", angular)

	@classmethod
	def from_vector(cls, vector) -> "BodyTwist":
		vector = np.asarray(vector, dtype=float)
		return cls(vector[:3], vector[3:])

	def as_vector(self) -> np.ndarray:
		return np.concatenate([self.linear, self.angular])

	def planar(self) -> np.ndarray:
		return np.array([self.linear[0], self.linear[1], self.angular[2]])


@dataclass(frozen=True)
class Pose3:
	"""position plus unit quaternion in (x, y, z, w) order"""
	position: np.ndarray = field(default_factory=lambda: np.zeros(3))
	quaternion: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))

	def __post_init__(self):
		position = np.asarray(self.position, dtype=float).reshape(3)
		quaternion = np.asarray(self.quaternion, dtype=float).reshape(4)
		norm = np.linalg.norm(quaternion)
		if norm == 0.0 or not np.isfinite(norm):
			raise ValueError("quaternion must be non-zero and finite")
		if abs(norm - 1.0) > 1e-9:
			quaternion = quaternion / norm
		object.__setattr__(self, "position", position)
		object.__setattr__(self, "quaternion", quaternion)

	@classmethod
	def from_rotation(cls, position, rotation: Rotation) -> "Pose3":
		return cls(position, rotation.as_quat())

	@classmethod
	def from_pose2(cls, pose: Pose2, z: float = 0.0, roll: float = 0.0, pitch: float = 0.0) -> "Pose3":
		rotation = Rotation.from_euler("ZYX", [pose.theta, pitch, roll])
		return cls([pose.x, pose.y, z], rotation.as_quat())

	@property
	def rotation(self) -> Rotation:
		return Rotation.from_quat(self.quaternion)

	def euler(self) -> tuple[float, float, float]:
		"""(roll, pitch, yaw) of the ZYX convention, pitch positive nose down"""
		yaw, pitch, roll = self.rotation.as_euler("ZYX")
		return float(roll), float(pitch), float(yaw)

	@property
	def yaw(self) -> float:
		return self.euler()[2]

	def to_pose2(self) -> Pose2:
		return Pose2(self.position[0], self.position[1], self.yaw)

	def compose(self, other: "Pose3") -> "Pose3":
		rotation = self.rotation
		return Pose3(
			self.position + rotation.apply(other.position),
			(rotation * other.rotation).as_quat(),
		)

	def inverse(self) -> "Pose3":
		inverse_rotation = self.rotation.inv()
		return Pose3(-inverse_rotation.apply(self.position), inverse_rotation.as_quat())

	def between(self, other: "Pose3") -> "Pose3":
		return self.inverse().compose(other)

	def transform_points(self, points) -> np.ndarray:
		return self.rotation.apply(np.asarray(points, dtype=float)) + self.position
