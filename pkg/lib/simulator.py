"""
Kinematic trotting quadruped with synthesized sensors.

The base follows a planar velocity command (unicycle model with lateral velocity) and
carries a roll / pitch / height oscillation. Stance feet stay fixed on the floor, swing
feet follow a cycloid towards a touchdown point planned at lift-off. Joint angles come
from inverse kinematics, joint velocities and accelerations from central differences of
the analytic motion within the step, and motor torques from the per-leg dynamics with the
ground-truth contact forces, so that the contact observer reconstructs those forces.

Legs are ordered front-left, front-right, rear-left, rear-right; the diagonal pairs
(0, 3) and (1, 2) trot half a cycle apart.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation

from lib.geometry import BodyTwist, Pose2, Pose3, se2_exp
from lib.odometry_fusion import VioFrame
from lib.robot_model import (
	LEG_COUNT,
	JointState,
	RobotModel,
	body_gravity,
	coriolis_matrix,
	gravity_torque,
	inverse_kinematics,
	leg_jacobian,
	mass_matrix,
)
from lib.scan_stabilization import CameraIntrinsics
from lib.worlds import World

TROT_OFFSETS = np.array([0.0, 0.5, 0.5, 0.0])
# camera x right, y down, z forward -> body x forward, y left, z up
BODY_FROM_CAMERA = Rotation.from_matrix([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
_FD_STEP = 1e-5


@dataclass(frozen=True)
class GaitConfig:
	frequency: float = 1.25
	duty_factor: float = 0.575
	step_length: float = 0.3
	step_height: float = 0.06
	body_height: float = 0.32
	roll_amplitude: float = 0.0
	pitch_amplitude: float = 0.0
	height_amplitude: float = 0.0
	max_linear: float = 0.6
	max_lateral: float = 0.3
	max_angular: float = 1.0

	def __post_init__(self):
		if not 0.0 < self.duty_factor < 1.0:
			raise ValueError("duty factor must be in (0, 1)")
		if self.frequency <= 0 or self.body_height <= 0 or self.step_length <= 0:
			raise ValueError("gait frequency, body height and step length must be positive")
		if min(self.roll_amplitude, self.pitch_amplitude, self.height_amplitude, self.step_height) < 0:
			raise ValueError("oscillation amplitudes and step height must be >= 0")

	@property
	def stance_time(self) -> float:
		return self.duty_factor / self.frequency

	@property
	def swing_time(self) -> float:
		return (1.0 - self.duty_factor) / self.frequency


@dataclass(frozen=True)
class NoiseConfig:
	encoder: float = 0.0
	joint_velocity: float = 0.0
	torque: float = 0.0
	gyro: float = 0.0
	accelerometer: float = 0.0
	attitude: float = 0.0
	depth: float = 0.0
	vio_drift_xy: float = 0.0
	vio_drift_yaw: float = 0.0

	def __post_init__(self):
		if min(vars(self).values()) < 0:
			raise ValueError("noise sigmas must be >= 0")


@dataclass(frozen=True)
class ScanCorruption:
	start: float
	end: float
	offset: Pose2


@dataclass(frozen=True)
class FaultConfig:
	dropouts: tuple = ()
	scan_corruptions: tuple = ()

	def in_dropout(self, stamp: float) -> bool:
		return any(start <= stamp < end for start, end in self.dropouts)

	def corruption_at(self, stamp: float) -> Pose2 | None:
		for corruption in self.scan_corruptions:
			if corruption.start <= stamp < corruption.end:
				return corruption.offset
		return None


def _default_intrinsics():
	return CameraIntrinsics(fx=63.0, fy=63.0, cx=59.5, cy=44.5, width=120, height=90)


def _default_mount():
	return Pose3([0.25, 0.0, 0.05], BODY_FROM_CAMERA.as_quat())


@dataclass(frozen=True)
class SimConfig:
	gait: GaitConfig = field(default_factory=GaitConfig)
	noise: NoiseConfig = field(default_factory=NoiseConfig)
	faults: FaultConfig = field(default_factory=FaultConfig)
	control_rate: float = 500.0
	depth_rate: float = 30.0
	intrinsics: CameraIntrinsics = field(default_factory=_default_intrinsics)
	camera_mount: Pose3 = field(default_factory=_default_mount)
	vio_correspondences: int = 120

	@property
	def scan_mount(self) -> Pose2:
		return Pose2(self.camera_mount.position[0], self.camera_mount.position[1], 0.0)


@dataclass(frozen=True)
class CommandSegment:
	duration: float
	linear: float = 0.0
	lateral: float = 0.0
	angular: float = 0.0


def command_at(script: list[CommandSegment], stamp: float) -> np.ndarray:
	"""command of the segment covering `stamp`, zero after the script ends"""
	elapsed = 0.0
	for segment in script:
		if stamp < elapsed + segment.duration:
			return np.array([segment.linear, segment.lateral, segment.angular])
		elapsed += segment.duration
	return np.zeros(3)


def script_duration(script: list[CommandSegment]) -> float:
	return float(sum(segment.duration for segment in script))


def raycast_depth(
		world: World,
		camera_pose: Pose3,
		intrinsics: CameraIntrinsics,
		noise: float = 0.0,
		rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, bool]:
	"""
	Depth along the optical axis per pixel as a 16-bit raster in units of the depth scale.
	Walls are vertical from the floor to the world's wall height; the floor is rendered when
	the world has a free-space boundary. Returns (image, camera inside free space).
	"""
	image = np.zeros((intrinsics.height, intrinsics.width), dtype=np.uint16)
	origin = camera_pose.position
	if not bool(world.contains(origin[:2])):
		return image, False

	v, u = np.indices((intrinsics.height, intrinsics.width))
	rays = np.stack([
		(u - intrinsics.cx) / intrinsics.fx,
		(v - intrinsics.cy) / intrinsics.fy,
		np.ones(u.shape),
	], axis=-1).reshape(-1, 3)
	directions = camera_pose.rotation.apply(rays)
	depth = np.full(len(directions), np.inf)

	if len(world.segments):
		starts = world.segments[:, 0]
		edges = world.segments[:, 1] - starts
		offset = starts - origin[:2]
		d = directions[:, None, :2]
		denominator = d[..., 0] * edges[None, :, 1] - d[..., 1] * edges[None, :, 0]
		with np.errstate(divide="ignore", invalid="ignore"):
			t = (offset[None, :, 0] * edges[None, :, 1] - offset[None, :, 1] * edges[None, :, 0]) / denominator
			s = (offset[None, :, 0] * d[..., 1] - offset[None, :, 1] * d[..., 0]) / denominator
		height = origin[2] + t * directions[:, None, 2]
		hit = (np.abs(denominator) > 1e-12) & (t > 1e-6) & (s >= 0.0) & (s <= 1.0)
		hit &= (height >= 0.0) & (height <= world.wall_height)
		depth = np.min(np.where(hit, t, np.inf), axis=1)

	if world.free_polygon is not None:
		down = directions[:, 2] < -1e-12
		floor = np.full(len(directions), np.inf)
		floor[down] = -origin[2] / directions[down, 2]
		depth = np.minimum(depth, floor)

	valid = np.isfinite(depth) & (depth <= intrinsics.max_depth)
	if noise > 0 and rng is not None:
		depth = depth + rng.normal(0.0, noise, depth.shape)
	quantized = np.zeros(depth.shape)
	quantized[valid] = np.clip(np.round(depth[valid] / intrinsics.depth_scale), 1, np.iinfo(np.uint16).max)
	image[:] = quantized.reshape(image.shape).astype(np.uint16)
	return image, True


class SyntheticVio:
	"""
	Visual odometry stand-in: follows the true relative motion plus random-walk drift.
	During a dropout it reports zero correspondences and freezes; afterwards it resumes from
	the frozen pose unless re-seeded.
	"""

	def __init__(self, start: Pose3, drift_xy=0.0, drift_yaw=0.0, correspondences=120, rng=None):
		self.pose = start
		self.last_truth = start
		self.drift_xy = drift_xy
		self.drift_yaw = drift_yaw
		self.correspondences = correspondences
		self.rng = rng if rng is not None else np.random.default_rng(0)

	def update(self, stamp: float, truth: Pose3, dt: float, lost: bool) -> VioFrame:
		noise = self.rng.normal(size=3) * np.sqrt(dt)
		delta = self.last_truth.between(truth)
		self.last_truth = truth
		if lost:
			return VioFrame(stamp, self.pose, 0)
		drift = Pose3.from_pose2(Pose2(noise[0] * self.drift_xy, noise[1] * self.drift_xy, noise[2] * self.drift_yaw))
		self.pose = self.pose.compose(delta).compose(drift)
		return VioFrame(stamp, self.pose, self.correspondences)

	def reseed(self, pose: Pose3):
		self.pose = pose


@dataclass
class SensorFrame:
	stamp: float
	joints: JointState
	gyro: np.ndarray
	accelerometer: np.ndarray
	imu_orientation: np.ndarray
	vio: VioFrame

	def imu_roll_pitch(self) -> tuple[float, float]:
		yaw, pitch, roll = Rotation.from_quat(self.imu_orientation).as_euler("ZYX")
		return float(roll), float(pitch)


@dataclass
class GroundTruth:
	pose: Pose3
	twist: BodyTwist
	contacts: np.ndarray
	forces: np.ndarray
	feet: np.ndarray


@dataclass
class SimFrame:
	sensors: SensorFrame
	truth: GroundTruth
	has_depth: bool = False
	depth_index: int = -1
	corrupted: bool = False
	camera_inside: bool = True
	_renderer: object = None

	@property
	def stamp(self) -> float:
		return self.sensors.stamp

	@cached_property
	def depth(self) -> np.ndarray | None:
		if not self.has_depth:
			return None
		image, inside = self._renderer()
		self.camera_inside = inside
		return image


class _Oscillation:
	"""sum of sinusoids per channel; phases are drawn once per seed"""

	def __init__(self, gait: GaitConfig, rng: np.random.Generator):
		f = gait.frequency
		phases = rng.uniform(0.0, 2.0 * np.pi, 5)
		self.channels = {
			"roll": (gait.roll_amplitude, [(0.7, f, phases[0]), (0.3, 2.7 * f, phases[1])]),
			"pitch": (gait.pitch_amplitude, [(0.6, 2.0 * f, phases[2]), (0.4, 3.1 * f, phases[3])]),
			"height": (gait.height_amplitude, [(1.0, 2.0 * f, phases[4])]),
		}

	def value(self, channel: str, stamp: float) -> float:
		amplitude, terms = self.channels[channel]
		return amplitude * sum(w * np.sin(2.0 * np.pi * f * stamp + p) for w, f, p in terms)

	def rate(self, channel: str, stamp: float) -> float:
		amplitude, terms = self.channels[channel]
		return amplitude * sum(w * 2.0 * np.pi * f * np.cos(2.0 * np.pi * f * stamp + p) for w, f, p in terms)


class Simulator:
	def __init__(self, model: RobotModel, world: World, config: SimConfig | None = None, seed: int = 0):
		self.model = model
		self.world = world
		self.config = config if config is not None else SimConfig()
		self.seed = int(seed)
		self.rng = np.random.default_rng([self.seed, 0])
		self.oscillation = _Oscillation(self.config.gait, np.random.default_rng([self.seed, 2]))
		self.time = 0.0
		self.step_count = 0
		self.phase = 0.0
		self.planar = world.start
		self.command = np.zeros(3)
		self.clamp_count = 0
		self.depth_index = -1

		nominal = model.hip_offsets[:, :2]
		self.nominal_feet = nominal
		self.feet = np.column_stack([self.planar.transform_points(nominal), np.zeros(LEG_COUNT)])
		self.swing_start = self.feet.copy()
		self.swing_target = self.feet.copy()
		self.in_stance = self._stance_flags(self.phase)
		self.vio = SyntheticVio(
			self.body_pose(0.0),
			self.config.noise.vio_drift_xy,
			self.config.noise.vio_drift_yaw,
			self.config.vio_correspondences,
			np.random.default_rng([self.seed, 3]),
		)

	# --- gait -------------------------------------------------------------

	def leg_phases(self, phase: float) -> np.ndarray:
		return np.mod(phase + TROT_OFFSETS, 1.0)

	def _stance_flags(self, phase: float) -> np.ndarray:
		return self.leg_phases(phase) < self.config.gait.duty_factor

	def stance_weights(self, phase: float, standing: bool) -> np.ndarray:
		"""load share per foot: the lifting foot unloads linearly over the four-foot overlap"""
		gait = self.config.gait
		stance = self._stance_flags(phase)
		if standing:
			return stance.astype(float)
		overlap = gait.duty_factor - 0.5
		phases = self.leg_phases(phase)
		weights = stance.astype(float)
		if overlap > 0:
			unloading = stance & (phases >= gait.duty_factor - overlap)
			weights[unloading] = (gait.duty_factor - phases[unloading]) / overlap
		return weights

	def _clamp(self, command) -> np.ndarray:
		gait = self.config.gait
		command = np.asarray(command, dtype=float).reshape(3)
		limits = np.array([min(gait.max_linear, gait.step_length / gait.stance_time), gait.max_lateral, gait.max_angular])
		clamped = np.clip(command, -limits, limits)
		if np.any(clamped != command):
			if self.clamp_count == 0:
				logging.warning("command %s clamped to %s", np.round(command, 3), np.round(clamped, 3))
			self.clamp_count += 1
		return clamped

	def _touchdown_target(self, leg: int, command: np.ndarray) -> np.ndarray:
		gait = self.config.gait
		landing = self.planar.compose(se2_exp(*(command * gait.swing_time)))
		hip = self.nominal_feet[leg]
		rotation_velocity = command[2] * np.array([-hip[1], hip[0]])
		local = hip + 0.5 * gait.stance_time * (command[:2] + rotation_velocity)
		return np.append(landing.transform_points(local), 0.0)

	def _swing_position(self, leg: int, leg_phase: float) -> np.ndarray:
		gait = self.config.gait
		sigma = np.clip((leg_phase - gait.duty_factor) / (1.0 - gait.duty_factor), 0.0, 1.0)
		progress = sigma - np.sin(2.0 * np.pi * sigma) / (2.0 * np.pi)
		start, target = self.swing_start[leg], self.swing_target[leg]
		position = start + (target - start) * progress
		position[2] = gait.step_height * 0.5 * (1.0 - np.cos(2.0 * np.pi * sigma))
		return position

	# --- body -------------------------------------------------------------

	def body_pose(self, offset: float, planar: Pose2 | None = None) -> Pose3:
		"""body pose at time + offset, extrapolating the current command"""
		planar = planar if planar is not None else self.planar
		if offset != 0.0:
			planar = planar.compose(se2_exp(*(self.command * offset)))
		stamp = self.time + offset
		roll = self.oscillation.value("roll", stamp)
		pitch = self.oscillation.value("pitch", stamp)
		height = self.config.gait.body_height + self.oscillation.value("height", stamp)
		return Pose3.from_pose2(planar, height, roll, pitch)

	def _feet_at(self, offset: float, clock_rate: float) -> np.ndarray:
		feet = self.feet.copy()
		phases = self.leg_phases(self.phase + clock_rate * offset)
		for leg in np.flatnonzero(~self.in_stance):
			feet[leg] = self._swing_position(leg, phases[leg])
		return feet

	def _joint_angles(self, offset: float, clock_rate: float) -> tuple[np.ndarray, Pose3]:
		pose = self.body_pose(offset)
		local = pose.inverse().transform_points(self._feet_at(offset, clock_rate))
		angles = np.array([inverse_kinematics(self.model, leg, local[leg]) for leg in range(LEG_COUNT)])
		return angles, pose

	def body_angular_velocity(self) -> np.ndarray:
		"""body-frame rate from the ZYX Euler rates"""
		roll = self.oscillation.value("roll", self.time)
		pitch = self.oscillation.value("pitch", self.time)
		roll_rate = self.oscillation.rate("roll", self.time)
		pitch_rate = self.oscillation.rate("pitch", self.time)
		yaw_rate = self.command[2]
		return np.array([
			roll_rate - yaw_rate * np.sin(pitch),
			pitch_rate * np.cos(roll) + yaw_rate * np.cos(pitch) * np.sin(roll),
			-pitch_rate * np.sin(roll) + yaw_rate * np.cos(pitch) * np.cos(roll),
		])

	# --- stepping ---------------------------------------------------------

	def step(self, command, dt: float | None = None) -> SimFrame:
		dt = 1.0 / self.config.control_rate if dt is None else dt
		if dt <= 0:
			raise ValueError("dt must be positive")
		gait = self.config.gait
		command = self._clamp(command)
		standing = not np.any(command) and bool(np.all(self.in_stance))
		clock_rate = 0.0 if standing else gait.frequency

		self.command = command
		self.planar = self.planar.compose(se2_exp(*(command * dt)))
		self.phase = float(np.mod(self.phase + clock_rate * dt, 1.0))
		self.time += dt
		self.step_count += 1

		stance = self._stance_flags(self.phase)
		for leg in range(LEG_COUNT):
			if self.in_stance[leg] and not stance[leg]:
				self.swing_start[leg] = self.feet[leg]
				self.swing_target[leg] = self._touchdown_target(leg, command)
			elif not self.in_stance[leg] and stance[leg]:
				self.feet[leg] = self.swing_target[leg]
		self.in_stance = stance
		phases = self.leg_phases(self.phase)
		for leg in np.flatnonzero(~stance):
			self.feet[leg] = self._swing_position(leg, phases[leg])

		return self._frame(dt, standing, clock_rate)

	def _frame(self, dt: float, standing: bool, clock_rate: float) -> SimFrame:
		model = self.model
		noise = self.config.noise
		epsilon = _FD_STEP
		q_minus, pose_minus = self._joint_angles(-epsilon, clock_rate)
		q, pose = self._joint_angles(0.0, clock_rate)
		q_plus, pose_plus = self._joint_angles(epsilon, clock_rate)
		qd = (q_plus - q_minus) / (2.0 * epsilon)
		qdd = (q_plus - 2.0 * q + q_minus) / epsilon ** 2

		weights = self.stance_weights(self.phase, standing)
		total = weights.sum()
		forces = model.weight() * weights / total if total > 0 else np.zeros(LEG_COUNT)

		rotation = pose.rotation
		gravity_body = body_gravity(model, rotation)
		up_body = rotation.inv().apply([0.0, 0.0, 1.0])
		torques = np.zeros_like(q)
		for leg in range(LEG_COUNT):
			inertia = mass_matrix(model, leg, q[leg])
			coriolis = coriolis_matrix(model, leg, q[leg], qd[leg])
			direction = leg_jacobian(model, leg, q[leg]).T @ up_body
			torques[leg] = (
					inertia @ qdd[leg] + coriolis @ qd[leg]
					+ gravity_torque(model, leg, q[leg], gravity_body)
					- direction * forces[leg]
			)

		heading = self.planar.theta
		world_velocity = np.array([
			np.cos(heading) * self.command[0] - np.sin(heading) * self.command[1],
			np.sin(heading) * self.command[0] + np.cos(heading) * self.command[1],
			self.oscillation.rate("height", self.time),
		])
		angular = self.body_angular_velocity()
		twist = BodyTwist(rotation.inv().apply(world_velocity), angular)
		acceleration = (pose_plus.position - 2.0 * pose.position + pose_minus.position) / epsilon ** 2
		specific_force = rotation.inv().apply(acceleration + np.array([0.0, 0.0, model.gravity]))

		# fixed draw order keeps streams reproducible whatever the sigmas
		draws = self.rng.normal(size=3 * q.size + 8)
		encoder, velocity, torque = draws[:3 * q.size].reshape(3, *q.shape)
		gyro_noise, accel_noise, attitude_noise = draws[3 * q.size:3 * q.size + 3], draws[-5:-2], draws[-2:]
		yaw, pitch, roll = rotation.as_euler("ZYX")
		imu_orientation = Rotation.from_euler(
			"ZYX", [yaw, pitch + noise.attitude * attitude_noise[0], roll + noise.attitude * attitude_noise[1]]
		).as_quat()

		joints = JointState(
			q + noise.encoder * encoder,
			qd + noise.joint_velocity * velocity,
			torques + noise.torque * torque,
			self.time,
		)
		vio = self.vio.update(self.time, pose, dt, self.config.faults.in_dropout(self.time))
		sensors = SensorFrame(
			self.time,
			joints,
			angular + noise.gyro * gyro_noise,
			specific_force + noise.accelerometer * accel_noise,
			imu_orientation,
			vio,
		)
		truth = GroundTruth(pose, twist, self.in_stance.copy(), forces, self.feet.copy())

		frame = SimFrame(sensors, truth)
		depth_index = int(np.floor(self.time * self.config.depth_rate + 1e-9))
		if depth_index != self.depth_index:
			self.depth_index = depth_index
			offset = self.config.faults.corruption_at(self.time)
			camera_body = pose
			if offset is not None:
				camera_body = Pose3.from_pose2(self.planar.compose(offset), pose.position[2], roll, pitch)
			camera = camera_body.compose(self.config.camera_mount)
			seed, world, intrinsics, sigma = self.seed, self.world, self.config.intrinsics, noise.depth

			def _render():
				return raycast_depth(world, camera, intrinsics, sigma, np.random.default_rng([seed, 1, depth_index]))

			frame.has_depth = True
			frame.depth_index = depth_index
			frame.corrupted = offset is not None
			frame._renderer = _render
		return frame

	def run(self, script: list[CommandSegment], duration: float | None = None):
		"""generator over the frames of a command script at the control rate"""
		duration = script_duration(script) if duration is None else duration
		dt = 1.0 / self.config.control_rate
		steps = int(round(duration * self.config.control_rate))
		for _ in range(steps):
			yield self.step(command_at(script, self.time + 0.5 * dt), dt)
