"""
Correlative scan-to-map matching: exhaustive search over an (x, y, heading) window on the
likelihood field of the grid, then a hill-climb on the bilinear field.
"""
import logging
from dataclasses import dataclass

import numpy as np

from lib.geometry import Pose2
from lib.occupancy_grid import OccupancyGrid
from lib.scan_stabilization import StabilizedScan


@dataclass(frozen=True)
class MatcherConfig:
	window_xy: float = 0.3
	window_theta: float = np.radians(15.0)
	step_theta: float = np.radians(1.0)
	threshold: float = 0.45
	sigma: float = 0.1
	min_rays: int = 10
	max_rays: int = 120
	refine_iterations: int = 40


@dataclass(frozen=True)
class ScanMatchResult:
	pose: Pose2
	relative: Pose2
	score: float
	accepted: bool


def body_points(scan: StabilizedScan, max_rays: int) -> np.ndarray:
	usable = scan.valid & (scan.ranges < scan.max_range - 1e-6)
	angles = scan.angles[usable]
	ranges = scan.ranges[usable]
	if len(ranges) > max_rays:
		keep = np.linspace(0, len(ranges) - 1, max_rays).round().astype(int)
		angles, ranges = angles[keep], ranges[keep]
	local = np.column_stack([ranges * np.cos(angles), ranges * np.sin(angles)])
	return scan.mount.transform_points(local) if len(local) else local


def score_pose(grid: OccupancyGrid, points: np.ndarray, pose: Pose2, sigma: float) -> float:
	"""mean likelihood-field value at the endpoints, in [0, 1]"""
	if len(points) == 0:
		return 0.0
	return float(np.mean(grid.sample_field(pose.transform_points(points), sigma)))


def _correlative_search(grid, points, prior, config):
	field = grid.likelihood_field(config.sigma)
	theta_steps = int(round(config.window_theta / config.step_theta))
	xy_steps = int(round(config.window_xy / grid.resolution))
	thetas = prior.theta + np.arange(-theta_steps, theta_steps + 1) * config.step_theta
	shifts = np.arange(-xy_steps, xy_steps + 1)

	cos_t, sin_t = np.cos(thetas), np.sin(thetas)
	xs = prior.x + cos_t[:, None] * points[None, :, 0] - sin_t[:, None] * points[None, :, 1]
	ys = prior.y + sin_t[:, None] * points[None, :, 0] + cos_t[:, None] * points[None, :, 1]
	row, col = grid.continuous_index(np.stack([xs, ys], axis=-1))
	base_row = np.rint(row).astype(int)
	base_col = np.rint(col).astype(int)

	cols = base_col[:, :, None, None] + shifts[None, None, :, None]
	rows = base_row[:, :, None, None] + shifts[None, None, None, :]
	inside = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
	values = np.zeros(inside.shape)
	values[inside] = field[rows[inside], cols[inside]]
	scores = values.mean(axis=1)  # (theta, shift_x, shift_y)

	t_index, x_index, y_index = np.unravel_index(np.argmax(scores), scores.shape)
	return Pose2(
		prior.x + shifts[x_index] * grid.resolution,
		prior.y + shifts[y_index] * grid.resolution,
		thetas[t_index],
	)


def _hill_climb(grid, points, start, config):
	best = start
	best_score = score_pose(grid, points, best, config.sigma)
	step_xy = 0.5 * grid.resolution
	step_theta = 0.5 * config.step_theta
	for _ in range(config.refine_iterations):
		candidates = [
			Pose2(best.x + step_xy, best.y, best.theta),
			Pose2(best.x - step_xy, best.y, best.theta),
			Pose2(best.x, best.y + step_xy, best.theta),
			Pose2(best.x, best.y - step_xy, best.theta),
			Pose2(best.x, best.y, best.theta + step_theta),
			Pose2(best.x, best.y, best.theta - step_theta),
		]
		scores = [score_pose(grid, points, candidate, config.sigma) for candidate in candidates]
		index = int(np.argmax(scores))
		if scores[index] > best_score:
			best, best_score = candidates[index], scores[index]
		else:
			step_xy *= 0.5
			step_theta *= 0.5
			if step_xy < grid.resolution / 16.0:
				break
	return best, best_score


def match_scan(
		scan: StabilizedScan,
		grid: OccupancyGrid,
		prior: Pose2,
		config: MatcherConfig | None = None,
) -> ScanMatchResult:
	config = config if config is not None else MatcherConfig()
	points = body_points(scan, config.max_rays)
	if len(points) < config.min_rays:
		logging.info("featureless scan at %.3f rejected (%d usable rays)", scan.stamp, len(points))
		return ScanMatchResult(prior, Pose2(), 0.0, False)
	if grid.is_empty():
		return ScanMatchResult(prior, Pose2(), 0.0, False)

	coarse = _correlative_search(grid, points, prior, config)
	pose, score = _hill_climb(grid, points, coarse, config)
	return ScanMatchResult(pose, prior.between(pose), score, score >= config.threshold)


def information_from_score(score: float, sigma_xy: float = 0.05, sigma_theta: float = np.radians(1.0)) -> np.ndarray:
	"""diagonal information of a scan-match factor, tightened with the match score"""
	scale = max(score, 1e-3)
	return np.diag([scale / sigma_xy ** 2, scale / sigma_xy ** 2, scale / sigma_theta ** 2])
