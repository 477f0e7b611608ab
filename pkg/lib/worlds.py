"""
Polygonal test environments: wall segments extruded to a fixed height above a floor plane.
"""
from dataclasses import dataclass, field

import numpy as np

from lib.geometry import Pose2
from lib.occupancy_grid import OccupancyGrid


def wall(x0, y0, x1, y1) -> np.ndarray:
	return np.array([[[x0, y0], [x1, y1]]], dtype=float)


def rectangle(x0, y0, x1, y1) -> np.ndarray:
	corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
	return np.stack([corners, np.roll(corners, -1, axis=0)], axis=1)


def rectangle_polygon(x0, y0, x1, y1) -> np.ndarray:
	return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def points_in_polygon(points, polygon) -> np.ndarray:
	"""even-odd rule, vectorized over points"""
	points = np.asarray(points, dtype=float)
	px, py = points[..., 0, None], points[..., 1, None]
	x0, y0 = polygon[:, 0], polygon[:, 1]
	x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
	straddles = (y0 > py) != (y1 > py)
	with np.errstate(divide="ignore", invalid="ignore"):
		crossing = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
	return np.count_nonzero(straddles & (px < crossing), axis=-1) % 2 == 1


@dataclass(frozen=True)
class World:
	name: str
	segments: np.ndarray  # (n, 2, 2)
	free_polygon: np.ndarray | None = None
	obstacles: tuple = ()
	wall_height: float = 2.0
	start: Pose2 = field(default_factory=Pose2)
	goals: tuple = ()

	def __post_init__(self):
		segments = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
		if self.wall_height <= 0:
			raise ValueError("wall height must be positive")
		object.__setattr__(self, "segments", segments)

	def bounds(self, margin: float = 0.0) -> tuple[float, float, float, float]:
		if len(self.segments) == 0:
			return -margin, -margin, margin, margin
		points = self.segments.reshape(-1, 2)
		x_min, y_min = points.min(axis=0) - margin
		x_max, y_max = points.max(axis=0) + margin
		return float(x_min), float(y_min), float(x_max), float(y_max)

	def contains(self, points) -> np.ndarray:
		"""True for points in free space: inside the boundary and outside every obstacle"""
		points = np.asarray(points, dtype=float)
		if self.free_polygon is None:
			inside = np.ones(points.shape[:-1], dtype=bool)
		else:
			inside = points_in_polygon(points, self.free_polygon)
		for obstacle in self.obstacles:
			inside &= ~points_in_polygon(points, obstacle)
		return inside

	def ground_truth_grid(self, resolution: float = 0.05, margin: float = 1.0) -> OccupancyGrid:
		"""walls saturated occupied, free space saturated free, everything else unknown"""
		grid = OccupancyGrid.from_bounds(*self.bounds(margin), resolution)
		iy, ix = np.indices((grid.height, grid.width))
		free = self.contains(grid.cell_center(ix, iy))
		grid.log_odds[free] = grid.l_min

		for start, end in self.segments:
			length = np.hypot(*(end - start))
			samples = np.linspace(0.0, 1.0, max(2, int(np.ceil(length / (0.25 * resolution))) + 1))
			points = start + samples[:, None] * (end - start)
			cx, cy = grid.world_to_cell(points)
			inside = grid.in_bounds(cx, cy)
			grid.log_odds[cy[inside], cx[inside]] = grid.l_max
		grid.touch()
		return grid

	def world_goals(self) -> list[Pose2]:
		return list(self.goals)


def warehouse_world() -> World:
	shelves = [
		(2.0, 3.0, 2.6, 5.6),
		(2.0, 6.4, 2.6, 9.0),
		(5.4, 3.0, 6.0, 5.6),
		(5.4, 6.4, 6.0, 9.0),
	]
	segments = np.concatenate([rectangle(0.0, 0.0, 8.0, 12.0)] + [rectangle(*shelf) for shelf in shelves])
	return World(
		"synthetic-warehouse",
		segments,
		rectangle_polygon(0.0, 0.0, 8.0, 12.0),
		tuple(rectangle_polygon(*shelf) for shelf in shelves),
		start=Pose2(1.0, 1.5, np.pi / 2),
		goals=(
			Pose2(1.0, 10.5, 0.0),
			Pose2(7.0, 10.5, -np.pi / 2),
			Pose2(7.0, 2.0, np.pi),
			Pose2(4.0, 6.0, np.pi / 2),
			Pose2(1.0, 1.5, np.pi / 2),
		),
	)


def house_world() -> World:
	furniture = [
		(1.0, 2.2, 2.0, 3.0),
		(8.5, 0.4, 9.5, 1.0),
		(5.0, 5.0, 6.0, 5.6),
	]
	interior = [
		wall(4.0, 0.0, 4.0, 1.0),
		wall(4.0, 2.0, 4.0, 4.0),
		wall(4.0, 5.0, 4.0, 6.0),
		wall(4.0, 3.0, 7.0, 3.0),
		wall(8.0, 3.0, 10.0, 3.0),
	]
	# walls are zero-thickness: obstacles are the furniture only
	segments = np.concatenate(
		[rectangle(0.0, 0.0, 10.0, 6.0)] + interior + [rectangle(*item) for item in furniture]
	)
	return World(
		"synthetic-house",
		segments,
		rectangle_polygon(0.0, 0.0, 10.0, 6.0),
		tuple(rectangle_polygon(*item) for item in furniture),
		start=Pose2(2.0, 1.5, 0.0),
		goals=(
			Pose2(6.0, 1.5, 0.0),
			Pose2(7.5, 4.5, np.pi / 2),
			Pose2(5.0, 4.5, np.pi),
			Pose2(2.5, 4.5, -np.pi / 2),
			Pose2(2.0, 1.5, 0.0),
		),
	)


def room_world() -> World:
	return World(
		"synthetic-room",
		rectangle(0.0, 0.0, 2.5, 2.5),
		rectangle_polygon(0.0, 0.0, 2.5, 2.5),
		start=Pose2(1.25, 1.25, 0.0),
		goals=(Pose2(1.25, 1.25, np.pi),),
	)


WORLDS = {
	"synthetic-warehouse": warehouse_world,
	"synthetic-house": house_world,
	"synthetic-room": room_world,
}


def load_world(name: str) -> World:
	if name not in WORLDS:
		raise ValueError(f"unknown world '{name}', expected one of {', '.join(WORLDS)}")
	return WORLDS[name]()
