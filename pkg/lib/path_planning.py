"""
Shortest paths on the inflated occupancy grid and a pure-pursuit follower.
"""
import heapq
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from lib.geometry import Pose2, wrap_angle
from lib.occupancy_grid import OccupancyGrid

NEIGHBOURS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class PlannerConfig:
	inflation_radius: float = 0.25
	clearance_weight: float = 2.0
	clearance_band: float = 0.3
	allow_unknown: bool = False
	start_search_radius: float = 0.6


def traversable_mask(grid: OccupancyGrid, config: PlannerConfig) -> tuple[np.ndarray, np.ndarray]:
	"""(traversable cells, distance to the nearest occupied cell in m)"""
	occupied = grid.occupied_mask()
	if occupied.any():
		clearance = ndimage.distance_transform_edt(~occupied) * grid.resolution
	else:
		clearance = np.full(occupied.shape, np.inf)
	passable = grid.free_mask() | (grid.unknown_mask() if config.allow_unknown else False)
	return passable & (clearance > config.inflation_radius), clearance


def _nearest_traversable(traversable, cell, radius_cells):
	ix, iy = cell
	y0, y1 = max(0, iy - radius_cells), min(traversable.shape[0], iy + radius_cells + 1)
	x0, x1 = max(0, ix - radius_cells), min(traversable.shape[1], ix + radius_cells + 1)
	window_iy, window_ix = np.nonzero(traversable[y0:y1, x0:x1])
	if len(window_ix) == 0:
		return None
	distance = np.hypot(window_ix + x0 - ix, window_iy + y0 - iy)
	best = int(np.argmin(distance))
	return int(window_ix[best] + x0), int(window_iy[best] + y0)


def plan_path(grid: OccupancyGrid, start, goal, config: PlannerConfig | None = None) -> np.ndarray | None:
	"""
	A* over 8-connected traversable cells with an extra cost near obstacles.
	Returns the (n, 2) polyline of cell centers from start to goal, or None when unreachable.
	A start inside the inflation zone is moved to the nearest traversable cell.
	"""
	config = config if config is not None else PlannerConfig()
	traversable, clearance = traversable_mask(grid, config)
	start_cell = tuple(int(v) for v in grid.world_to_cell(np.asarray(start, dtype=float)[:2]))
	goal_cell = tuple(int(v) for v in grid.world_to_cell(np.asarray(goal, dtype=float)[:2]))
	if not grid.in_bounds(*goal_cell) or not traversable[goal_cell[1], goal_cell[0]]:
		return None
	if not grid.in_bounds(*start_cell) or not traversable[start_cell[1], start_cell[0]]:
		start_cell = _nearest_traversable(
			traversable, start_cell, int(np.ceil(config.start_search_radius / grid.resolution))
		)
		if start_cell is None:
			return None

	penalty = config.clearance_weight * np.clip(1.0 - clearance / config.clearance_band, 0.0, 1.0)

	def _heuristic(cell):
		return np.hypot(cell[0] - goal_cell[0], cell[1] - goal_cell[1])

	came_from = {start_cell: None}
	cost_so_far = {start_cell: 0.0}
	frontier = [(_heuristic(start_cell), start_cell)]
	while frontier:
		_, current = heapq.heappop(frontier)
		if current == goal_cell:
			break
		for dx, dy in NEIGHBOURS:
			ix, iy = current[0] + dx, current[1] + dy
			if not (0 <= ix < grid.width and 0 <= iy < grid.height) or not traversable[iy, ix]:
				continue
			step = np.hypot(dx, dy) * (1.0 + penalty[iy, ix])
			cost = cost_so_far[current] + step
			neighbour = (ix, iy)
			if cost < cost_so_far.get(neighbour, np.inf):
				cost_so_far[neighbour] = cost
				came_from[neighbour] = current
				heapq.heappush(frontier, (cost + _heuristic(neighbour), neighbour))

	if goal_cell not in came_from:
		return None
	cells = []
	cell = goal_cell
	while cell is not None:
		cells.append(cell)
		cell = came_from[cell]
	cells.reverse()
	ix, iy = np.array(cells).T
	return grid.cell_center(ix, iy)


def path_length(path: np.ndarray) -> float:
	if path is None or len(path) < 2:
		return 0.0
	return float(np.sum(np.hypot(*np.diff(path, axis=0).T)))


class PurePursuit:
	def __init__(
			self,
			path: np.ndarray,
			lookahead: float = 0.4,
			max_linear: float = 0.5,
			max_angular: float = 1.0,
			turn_in_place: float = np.radians(60.0),
	):
		if path is None or len(path) == 0:
			raise ValueError("path must hold at least one point")
		self.path = np.asarray(path, dtype=float)
		self.lookahead = lookahead
		self.max_linear = max_linear
		self.max_angular = max_angular
		self.turn_in_place = turn_in_place
		self.index = 0

	def remaining(self, pose: Pose2) -> float:
		return float(np.hypot(*(self.path[-1] - pose.translation)))

	def _lookahead_point(self, pose: Pose2) -> np.ndarray:
		distances = np.hypot(*(self.path[self.index:] - pose.translation).T)
		self.index += int(np.argmin(distances))
		ahead = np.nonzero(np.hypot(*(self.path[self.index:] - pose.translation).T) >= self.lookahead)[0]
		return self.path[self.index + ahead[0]] if len(ahead) else self.path[-1]

	def command(self, pose: Pose2) -> tuple[float, float]:
		"""(forward velocity m/s, yaw rate rad/s) towards the lookahead point"""
		target = pose.inverse().transform_points(self._lookahead_point(pose)[None, :])[0]
		bearing = np.arctan2(target[1], target[0])
		if abs(bearing) > self.turn_in_place:
			return 0.0, float(np.sign(bearing) * self.max_angular)
		distance_sq = max(float(target @ target), 1e-9)
		curvature = 2.0 * target[1] / distance_sq
		linear = self.max_linear * min(1.0, self.remaining(pose) / (2.0 * self.lookahead) + 0.2)
		angular = float(np.clip(linear * curvature, -self.max_angular, self.max_angular))
		return float(linear), angular


def heading_command(pose: Pose2, heading: float, max_angular: float = 1.0, gain: float = 2.0) -> float:
	return float(np.clip(gain * wrap_angle(heading - pose.theta), -max_angular, max_angular))
