"""
Localization on a fixed map: a particle filter with the odometry motion model, a
likelihood-field beam model, low-variance resampling on a low effective sample size and
local particle injection when the short-term fit drops below the long-term fit.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from lib.geometry import Pose2, wrap_angle
from lib.occupancy_grid import OccupancyGrid
from lib.scan_matcher import body_points
from lib.scan_stabilization import StabilizedScan


@dataclass(frozen=True)
class LocalizationConfig:
	particles: int = 500
	alpha_rotation_from_rotation: float = 0.05
	alpha_rotation_from_translation: float = 0.05
	alpha_translation_from_translation: float = 0.05
	alpha_translation_from_rotation: float = 0.01
	sigma_hit: float = 0.1
	z_hit: float = 0.9
	z_random: float = 0.1
	beam_weight: float = 0.2
	max_beams: int = 40
	resample_ratio: float = 0.5
	roughen_xy: float = 0.01
	roughen_theta: float = 0.005
	initial_sigma_xy: float = 0.1
	initial_sigma_theta: float = 0.05
	injection_sigma_xy: float = 0.25
	injection_sigma_theta: float = 0.15
	injection_limit: float = 0.2
	alpha_slow: float = 0.02
	alpha_fast: float = 0.3
	depletion_fit: float = 0.15
	depletion_updates: int = 5


@dataclass(frozen=True)
class LocalizationEstimate:
	stamp: float
	pose: Pose2
	degraded: bool
	effective_sample_size: float
	fit: float


class ParticleFilter:
	def __init__(
			self,
			grid: OccupancyGrid,
			config: LocalizationConfig | None = None,
			seed: int = 0,
			initial_pose: Pose2 | None = None,
	):
		self.grid = grid
		self.config = config if config is not None else LocalizationConfig()
		if self.config.particles <= 0:
			raise ValueError("particle count must be positive")
		self.rng = np.random.default_rng(seed)
		self.map_empty = grid.is_empty()
		self.particles = np.zeros((self.config.particles, 3))
		self.log_weights = np.full(self.config.particles, -np.log(self.config.particles))
		self.w_slow = 0.0
		self.w_fast = 0.0
		self.poor_updates = 0
		self.last_odometry = None
		if initial_pose is not None:
			self.reset_local(initial_pose)
		else:
			self.reset_global()

	def reset_local(self, pose: Pose2):
		config = self.config
		count = config.particles
		self.particles[:, 0] = pose.x + self.rng.normal(0.0, config.initial_sigma_xy, count)
		self.particles[:, 1] = pose.y + self.rng.normal(0.0, config.initial_sigma_xy, count)
		self.particles[:, 2] = wrap_angle(pose.theta + self.rng.normal(0.0, config.initial_sigma_theta, count))
		self.log_weights[:] = -np.log(count)

	def reset_global(self):
		"""uniform over the free cells of the map (over the whole grid when nothing is free)"""
		count = self.config.particles
		free_iy, free_ix = np.nonzero(self.grid.free_mask())
		if len(free_ix) == 0:
			free_iy, free_ix = np.indices((self.grid.height, self.grid.width)).reshape(2, -1)
		pick = self.rng.integers(0, len(free_ix), count)
		centers = self.grid.cell_center(free_ix[pick], free_iy[pick])
		jitter = self.rng.uniform(-0.5, 0.5, (count, 2)) * self.grid.resolution
		self.particles[:, :2] = centers + jitter
		self.particles[:, 2] = self.rng.uniform(-np.pi, np.pi, count)
		self.log_weights[:] = -np.log(count)
		self.w_slow = self.w_fast = 0.0

	def weights(self) -> np.ndarray:
		return np.exp(self.log_weights - logsumexp(self.log_weights))

	def effective_sample_size(self) -> float:
		weights = self.weights()
		return float(1.0 / np.sum(weights ** 2))

	def estimate(self) -> Pose2:
		weights = self.weights()
		x, y = weights @ self.particles[:, :2]
		theta = np.arctan2(weights @ np.sin(self.particles[:, 2]), weights @ np.cos(self.particles[:, 2]))
		return Pose2(float(x), float(y), float(theta))

	def predict(self, previous: Pose2, current: Pose2):
		"""odometry motion model: rotate, translate, rotate, each perturbed in proportion to the motion"""
		config = self.config
		count = config.particles
		dx, dy = current.x - previous.x, current.y - previous.y
		translation = np.hypot(dx, dy)
		rotation_1 = wrap_angle(np.arctan2(dy, dx) - previous.theta) if translation > 1e-6 else 0.0
		if abs(rotation_1) > np.pi / 2:
			# backward motion: drive the translation negative instead of turning around
			rotation_1 = wrap_angle(rotation_1 - np.pi)
			translation = -translation
		rotation_2 = wrap_angle(current.theta - previous.theta - rotation_1)

		def _noise(scale):
			return self.rng.normal(0.0, scale, count) if scale > 0 else np.zeros(count)

		rot1 = rotation_1 - _noise(
			config.alpha_rotation_from_rotation * abs(rotation_1)
			+ config.alpha_rotation_from_translation * abs(translation)
		)
		trans = translation - _noise(
			config.alpha_translation_from_translation * abs(translation)
			+ config.alpha_translation_from_rotation * (abs(rotation_1) + abs(rotation_2))
		)
		rot2 = rotation_2 - _noise(
			config.alpha_rotation_from_rotation * abs(rotation_2)
			+ config.alpha_rotation_from_translation * abs(translation)
		)
		heading = self.particles[:, 2] + rot1
		self.particles[:, 0] += trans * np.cos(heading)
		self.particles[:, 1] += trans * np.sin(heading)
		self.particles[:, 2] = wrap_angle(heading + rot2)

	def _beam_fields(self, points: np.ndarray) -> np.ndarray:
		cos_t, sin_t = np.cos(self.particles[:, 2]), np.sin(self.particles[:, 2])
		xs = self.particles[:, 0, None] + cos_t[:, None] * points[None, :, 0] - sin_t[:, None] * points[None, :, 1]
		ys = self.particles[:, 1, None] + sin_t[:, None] * points[None, :, 0] + cos_t[:, None] * points[None, :, 1]
		return self.grid.sample_field(np.stack([xs, ys], axis=-1), self.config.sigma_hit)

	def update(self, scan: StabilizedScan) -> tuple[float, bool]:
		"""
		Weights the particles with the scan. Returns the best particle fit (mean field value at
		the beam endpoints) and whether the filter was re-initialized for depletion.
		"""
		config = self.config
		points = body_points(scan, config.max_beams)
		if len(points) == 0:
			return 0.0, False

		fields = self._beam_fields(points)
		fit = fields.mean(axis=1)
		log_likelihood = config.beam_weight * np.sum(np.log(config.z_hit * fields + config.z_random), axis=1)
		self.log_weights = self.log_weights + log_likelihood
		self.log_weights -= logsumexp(self.log_weights)

		weights = self.weights()
		average_fit = float(weights @ fit)
		if self.w_slow == 0.0:
			self.w_slow = self.w_fast = average_fit
		else:
			self.w_slow += config.alpha_slow * (average_fit - self.w_slow)
			self.w_fast += config.alpha_fast * (average_fit - self.w_fast)

		best_fit = float(fit.max())
		self.poor_updates = self.poor_updates + 1 if best_fit < config.depletion_fit else 0
		if self.poor_updates >= config.depletion_updates:
			logging.warning("particle depletion (best fit %.3f), re-initializing globally", best_fit)
			self.poor_updates = 0
			self.reset_global()
			return best_fit, True

		if self.effective_sample_size() < config.resample_ratio * config.particles:
			self.resample()
		return best_fit, False

	def resample(self):
		"""low-variance resampling, roughening and local injection"""
		config = self.config
		count = config.particles
		estimate = self.estimate()
		cumulative = np.cumsum(self.weights())
		cumulative[-1] = 1.0
		positions = (self.rng.uniform() + np.arange(count)) / count
		self.particles = self.particles[np.searchsorted(cumulative, positions)]

		self.particles[:, :2] += self.rng.normal(0.0, config.roughen_xy, (count, 2))
		self.particles[:, 2] = wrap_angle(self.particles[:, 2] + self.rng.normal(0.0, config.roughen_theta, count))

		inject = 0.0 if self.w_slow <= 0 else min(config.injection_limit, max(0.0, 1.0 - self.w_fast / self.w_slow))
		injected = self.rng.uniform(size=count) < inject
		if injected.any():
			k = int(injected.sum())
			self.particles[injected, 0] = estimate.x + self.rng.normal(0.0, config.injection_sigma_xy, k)
			self.particles[injected, 1] = estimate.y + self.rng.normal(0.0, config.injection_sigma_xy, k)
			self.particles[injected, 2] = wrap_angle(estimate.theta + self.rng.normal(0.0, config.injection_sigma_theta, k))
		self.log_weights[:] = -np.log(count)

	def step(self, stamp: float, odometry: Pose2, scan: StabilizedScan) -> LocalizationEstimate:
		if self.last_odometry is not None:
			self.predict(self.last_odometry, odometry)
		self.last_odometry = odometry
		if self.map_empty:
			return LocalizationEstimate(stamp, self.estimate(), True, self.effective_sample_size(), 0.0)
		fit, reinitialized = self.update(scan)
		return LocalizationEstimate(stamp, self.estimate(), reinitialized, self.effective_sample_size(), fit)


def localize(
		grid: OccupancyGrid,
		scans: list[StabilizedScan],
		odometry: list[Pose2],
		config: LocalizationConfig | None = None,
		seed: int = 0,
		initial_pose: Pose2 | None = None,
) -> list[LocalizationEstimate]:
	"""pose stream for paired scan / odometry streams; an empty map yields degraded estimates"""
	if len(scans) != len(odometry):
		raise ValueError("scan and odometry streams must have equal length")
	particle_filter = ParticleFilter(grid, config, seed, initial_pose)
	if particle_filter.map_empty:
		logging.warning("localization map holds no occupied cells")
	return [particle_filter.step(scan.stamp, pose, scan) for scan, pose in zip(scans, odometry)]
