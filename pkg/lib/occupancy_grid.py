"""
Log-odds occupancy grid.

Cell (iy, ix) covers [ox + ix*res, ox + (ix+1)*res) x [oy + iy*res, oy + (iy+1)*res),
row index grows with y. The grid frame is axis-aligned: the origin carries no rotation.
"""
import numpy as np
from scipy import ndimage

from lib.geometry import Pose2

DEFAULT_RESOLUTION = 0.05
L_OCC = 0.85
L_FREE = -0.4
L_MIN = -2.0
L_MAX = 3.5
UNKNOWN_BAND = 0.1


class OccupancyGrid:
	def __init__(
			self,
			width: int,
			height: int,
			resolution: float = DEFAULT_RESOLUTION,
			origin: Pose2 | None = None,
			log_odds=None,
			l_occ: float = L_OCC,
			l_free: float = L_FREE,
			l_min: float = L_MIN,
			l_max: float = L_MAX,
			unknown_band: float = UNKNOWN_BAND,
	):
		if resolution <= 0:
			raise ValueError("resolution must be positive")
		if width <= 0 or height <= 0:
			raise ValueError("grid must have at least one cell")
		if not l_min < 0 < l_max:
			raise ValueError("log-odds clamp must bracket zero")
		origin = origin if origin is not None else Pose2()
		if origin.theta != 0.0:
			raise ValueError("grid origin must be axis-aligned")
		self.width = int(width)
		self.height = int(height)
		self.resolution = float(resolution)
		self.origin = origin
		self.l_occ, self.l_free = l_occ, l_free
		self.l_min, self.l_max = l_min, l_max
		self.unknown_band = unknown_band
		if log_odds is None:
			log_odds = np.zeros((self.height, self.width))
		self.log_odds = np.clip(np.asarray(log_odds, dtype=float), l_min, l_max).reshape(self.height, self.width)
		self.version = 0
		self._field_cache = None

	@classmethod
	def from_bounds(cls, x_min, y_min, x_max, y_max, resolution=DEFAULT_RESOLUTION, **kwargs) -> "OccupancyGrid":
		width = int(np.ceil((x_max - x_min) / resolution))
		height = int(np.ceil((y_max - y_min) / resolution))
		return cls(width, height, resolution, Pose2(x_min, y_min, 0.0), **kwargs)

	@classmethod
	def centered(cls, size: float, resolution=DEFAULT_RESOLUTION, **kwargs) -> "OccupancyGrid":
		half = size / 2.0
		return cls.from_bounds(-half, -half, half, half, resolution, **kwargs)

	def empty_like(self) -> "OccupancyGrid":
		return OccupancyGrid(
			self.width, self.height, self.resolution, self.origin, None,
			self.l_occ, self.l_free, self.l_min, self.l_max, self.unknown_band,
		)

	def copy(self) -> "OccupancyGrid":
		duplicate = self.empty_like()
		duplicate.log_odds = self.log_odds.copy()
		return duplicate

	def touch(self):
		self.version += 1
		self._field_cache = None

	# --- coordinates -------------------------------------------------------

	def world_to_cell(self, points):
		points = np.asarray(points, dtype=float)
		ix = np.floor((points[..., 0] - self.origin.x) / self.resolution).astype(int)
		iy = np.floor((points[..., 1] - self.origin.y) / self.resolution).astype(int)
		return ix, iy

	def cell_center(self, ix, iy) -> np.ndarray:
		return np.stack([
			self.origin.x + (np.asarray(ix) + 0.5) * self.resolution,
			self.origin.y + (np.asarray(iy) + 0.5) * self.resolution,
		], axis=-1)

	def in_bounds(self, ix, iy):
		return (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)

	def bounds(self) -> tuple[float, float, float, float]:
		return (
			self.origin.x,
			self.origin.y,
			self.origin.x + self.width * self.resolution,
			self.origin.y + self.height * self.resolution,
		)

	# --- classification ----------------------------------------------------

	def free_mask(self) -> np.ndarray:
		return self.log_odds <= -self.unknown_band

	def occupied_mask(self) -> np.ndarray:
		return self.log_odds >= self.unknown_band

	def unknown_mask(self) -> np.ndarray:
		return np.abs(self.log_odds) < self.unknown_band

	def probabilities(self) -> np.ndarray:
		return 1.0 - 1.0 / (1.0 + np.exp(self.log_odds))

	def is_empty(self) -> bool:
		return not self.occupied_mask().any()

	def is_free(self, points) -> np.ndarray:
		ix, iy = self.world_to_cell(points)
		inside = self.in_bounds(ix, iy)
		result = np.zeros(inside.shape, dtype=bool)
		result[inside] = self.free_mask()[iy[inside], ix[inside]]
		return result

	# --- measurement support -----------------------------------------------

	def likelihood_field(self, sigma: float = 0.1) -> np.ndarray:
		"""exp(-d^2 / 2 sigma^2) with d the distance to the nearest occupied cell"""
		if self._field_cache is not None and self._field_cache[0] == sigma:
			return self._field_cache[1]
		occupied = self.occupied_mask()
		if not occupied.any():
			field = np.zeros(occupied.shape)
		else:
			distance = ndimage.distance_transform_edt(~occupied) * self.resolution
			field = np.exp(-0.5 * (distance / sigma) ** 2)
		self._field_cache = (sigma, field)
		return field

	def continuous_index(self, points) -> tuple[np.ndarray, np.ndarray]:
		"""(row, col) coordinates with cell centers at integer values"""
		points = np.asarray(points, dtype=float)
		col = (points[..., 0] - self.origin.x) / self.resolution - 0.5
		row = (points[..., 1] - self.origin.y) / self.resolution - 0.5
		return row, col

	def sample_field(self, points, sigma: float = 0.1) -> np.ndarray:
		"""bilinear lookup of the likelihood field, zero outside the grid"""
		row, col = self.continuous_index(points)
		shape = row.shape
		values = ndimage.map_coordinates(
			self.likelihood_field(sigma), [row.ravel(), col.ravel()], order=1, mode="constant", cval=0.0
		)
		return values.reshape(shape)

	def raycast(self, pose: Pose2, angles, max_range: float, mount: Pose2 | None = None):
		"""ranges to the first occupied cell along each bearing, marched at half-cell steps"""
		sensor = pose.compose(mount) if mount is not None else pose
		angles = np.asarray(angles, dtype=float) + sensor.theta
		step = 0.5 * self.resolution
		distances = np.arange(1, int(np.ceil(max_range / step)) + 1) * step
		xs = sensor.x + np.cos(angles)[:, None] * distances[None, :]
		ys = sensor.y + np.sin(angles)[:, None] * distances[None, :]
		ix, iy = self.world_to_cell(np.stack([xs, ys], axis=-1))
		inside = self.in_bounds(ix, iy)
		hit = np.zeros(ix.shape, dtype=bool)
		hit[inside] = self.occupied_mask()[iy[inside], ix[inside]]
		hit &= distances[None, :] <= max_range
		valid = hit.any(axis=1)
		first = np.argmax(hit, axis=1)
		ranges = np.where(valid, distances[first], 0.0)
		return ranges, valid

	# --- update -------------------------------------------------------------

	def integrate_rays(self, origin_xy, angles, ranges):
		"""decrement every traversed cell once per ray, increment the endpoint cell"""
		angles = np.asarray(angles, dtype=float)
		ranges = np.asarray(ranges, dtype=float)
		if len(ranges) == 0:
			return
		step = 0.25 * self.resolution
		sample_count = int(np.ceil(ranges.max() / step))
		distances = np.arange(sample_count) * step
		directions = np.column_stack([np.cos(angles), np.sin(angles)])
		samples = origin_xy[None, None, :] + distances[None, :, None] * directions[:, None, :]
		along = distances[None, :] < ranges[:, None]

		ix, iy = self.world_to_cell(samples)
		end_ix, end_iy = self.world_to_cell(origin_xy + ranges[:, None] * directions)
		keep = along & self.in_bounds(ix, iy) & ~((ix == end_ix[:, None]) & (iy == end_iy[:, None]))

		cells = self.width * self.height
		ray_ids = np.broadcast_to(np.arange(len(ranges))[:, None], ix.shape)
		keys = np.unique(ray_ids[keep].astype(np.int64) * cells + (iy[keep] * self.width + ix[keep]))
		flat = self.log_odds.reshape(-1)
		np.add.at(flat, keys % cells, self.l_free)

		end_inside = self.in_bounds(end_ix, end_iy)
		np.add.at(flat, end_iy[end_inside] * self.width + end_ix[end_inside], self.l_occ)
		np.clip(self.log_odds, self.l_min, self.l_max, out=self.log_odds)
		self.touch()

	def integrate_scan(self, pose: Pose2, scan):
		sensor = pose.compose(scan.mount)
		if not np.all(np.isfinite(sensor.as_array())):
			raise ValueError("pose must be finite")
		self.integrate_rays(
			sensor.translation,
			sensor.theta + scan.angles[scan.valid],
			scan.ranges[scan.valid],
		)


def update_grid(grid: OccupancyGrid, pose: Pose2, scan) -> OccupancyGrid:
	"""integrates the scan in place and returns the grid"""
	grid.integrate_scan(pose, scan)
	return grid
