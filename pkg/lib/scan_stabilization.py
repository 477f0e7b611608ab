"""
Planar range scans from depth images.

Camera frame: x right, y down, z along the optical axis. Attitude angles follow the
body ZYX convention: positive pitch is nose down, positive roll lowers the right side.
With a pitched camera the world horizon moves to row c_y - f_y tan(pitch); roll tilts it
with slope tan(-roll). Sampling the depth image along that line and rotating the points
into the gravity-aligned frame yields a scan whose plane stays horizontal.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from lib.geometry import Pose2

DEFAULT_BAND = 2
AGGREGATIONS = ("min", "median")


@dataclass(frozen=True)
class CameraIntrinsics:
	fx: float
	fy: float
	cx: float
	cy: float
	width: int
	height: int
	depth_scale: float = 0.001
	min_depth: float = 0.1
	max_depth: float = 6.0

	def __post_init__(self):
		if self.fx <= 0 or self.fy <= 0:
			raise ValueError("focal lengths must be positive")
		if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
			raise ValueError("principal point must lie inside the image")
		if self.depth_scale <= 0 or not 0 <= self.min_depth < self.max_depth:
			raise ValueError("invalid depth range or scale")

	def ray_grid(self) -> np.ndarray:
		"""fixed increasing bearing grid, one ray per image column over the horizontal field of view"""
		return np.linspace(
			-np.arctan((self.width - 1 - self.cx) / self.fx),
			np.arctan(self.cx / self.fx),
			self.width,
		)


@dataclass(frozen=True)
class StabilizedScan:
	angles: np.ndarray
	ranges: np.ndarray
	valid: np.ndarray
	stamp: float = 0.0
	band: int = DEFAULT_BAND
	max_range: float = 6.0
	degraded: bool = False
	mount: Pose2 = field(default_factory=Pose2)

	def __post_init__(self):
		if np.any(np.diff(self.angles) <= 0):
			raise ValueError("scan angles must be strictly increasing")

	@property
	def angle_min(self) -> float:
		return float(self.angles[0])

	@property
	def angle_max(self) -> float:
		return float(self.angles[-1])

	@property
	def angle_increment(self) -> float:
		return float(self.angles[1] - self.angles[0]) if len(self.angles) > 1 else 0.0

	@property
	def valid_count(self) -> int:
		return int(np.count_nonzero(self.valid))

	def endpoints(self) -> np.ndarray:
		"""valid ray endpoints in the sensor frame"""
		angles = self.angles[self.valid]
		ranges = self.ranges[self.valid]
		return np.column_stack([ranges * np.cos(angles), ranges * np.sin(angles)])

	def with_mount(self, mount: Pose2) -> "StabilizedScan":
		return StabilizedScan(
			self.angles, self.ranges, self.valid, self.stamp, self.band, self.max_range, self.degraded, mount
		)


def _check_attitude(*angles):
	for angle in angles:
		if abs(angle) >= np.pi / 2:
			raise ValueError("|angle| must be < pi/2")


def pitch_shift(theta: float, intrinsics: CameraIntrinsics) -> float:
	_check_attitude(theta)
	return -intrinsics.fy * np.tan(theta)


def reference_line(roll: float, pitch: float, intrinsics: CameraIntrinsics) -> tuple[float, float]:
	"""(slope, absolute row at u = c_x) of the attitude-compensated horizon line"""
	_check_attitude(roll, pitch)
	return float(np.tan(-roll)), float(intrinsics.cy + pitch_shift(pitch, intrinsics))


def _empty_scan(intrinsics, stamp, band, mount, degraded):
	angles = intrinsics.ray_grid()
	return StabilizedScan(
		angles, np.zeros_like(angles), np.zeros(angles.shape, dtype=bool),
		stamp, band, intrinsics.max_depth, degraded, mount,
	)


def _resample(bearings, ranges, valid, grid, jump_tolerance):
	"""linear interpolation between neighbouring columns, never across gaps or depth jumps"""
	order = np.argsort(bearings, kind="stable")
	bearings, ranges, valid = bearings[order], ranges[order], valid[order]
	count = len(bearings)
	upper = np.clip(np.searchsorted(bearings, grid), 1, count - 1)
	lower = upper - 1
	span = bearings[upper] - bearings[lower]
	fraction = np.clip(np.divide(grid - bearings[lower], span, out=np.zeros_like(grid), where=span > 0), 0.0, 1.0)
	result = ranges[lower] + fraction * (ranges[upper] - ranges[lower])

	in_range = (grid >= bearings[0] - 1e-9) & (grid <= bearings[-1] + 1e-9)
	neighbours_valid = valid[lower] & valid[upper]
	jump = np.abs(ranges[upper] - ranges[lower])
	smooth = jump <= np.maximum(jump_tolerance, jump_tolerance * np.minimum(ranges[lower], ranges[upper]))
	return result, in_range & neighbours_valid & smooth


def extract_scan(
		depth,
		roll: float,
		pitch: float,
		intrinsics: CameraIntrinsics,
		band: int = DEFAULT_BAND,
		aggregation: str = "min",
		stamp: float = 0.0,
		mount: Pose2 | None = None,
		jump_tolerance: float = 0.1,
) -> StabilizedScan:
	depth = np.asarray(depth)
	mount = mount if mount is not None else Pose2()
	if depth.shape != (intrinsics.height, intrinsics.width):
		raise ValueError(f"depth image shape {depth.shape} does not match the intrinsics")
	if band < 0:
		raise ValueError("band half-width must be >= 0")
	if aggregation not in AGGREGATIONS:
		raise ValueError(f"aggregation must be one of {AGGREGATIONS}")

	slope, intercept = reference_line(roll, pitch, intrinsics)
	columns = np.arange(intrinsics.width)
	center_rows = np.rint(intercept + slope * (columns - intrinsics.cx)).astype(int)
	rows = center_rows[:, None] + np.arange(-band, band + 1)[None, :]
	inside = (rows >= 0) & (rows < intrinsics.height)
	if not inside.any():
		return _empty_scan(intrinsics, stamp, band, mount, degraded=True)

	meters = depth.astype(float) * intrinsics.depth_scale
	samples = meters[np.clip(rows, 0, intrinsics.height - 1), columns[:, None]]
	usable = inside & (samples >= intrinsics.min_depth) & (samples <= intrinsics.max_depth) & (samples > 0)
	column_valid = usable.any(axis=1)

	if aggregation == "min":
		pick = np.argmin(np.where(usable, samples, np.inf), axis=1)
		chosen_depth = samples[columns, pick]
		chosen_rows = rows[columns, pick]
	else:
		masked = np.where(usable, samples, np.nan)
		chosen_depth = np.zeros(len(columns))
		if column_valid.any():
			chosen_depth[column_valid] = np.nanmedian(masked[column_valid], axis=1)
		chosen_rows = center_rows

	# unit-depth directions, body frame (x forward, y left, z up), then levelled
	directions_camera = np.column_stack([
		(columns - intrinsics.cx) / intrinsics.fx,
		(chosen_rows - intrinsics.cy) / intrinsics.fy,
		np.ones(len(columns)),
	])
	directions_body = np.column_stack([directions_camera[:, 2], -directions_camera[:, 0], -directions_camera[:, 1]])
	levelled = Rotation.from_euler("ZYX", [0.0, pitch, roll]).apply(directions_body)

	bearings = np.arctan2(levelled[:, 1], levelled[:, 0])
	ranges = np.where(column_valid, chosen_depth, 0.0) * np.hypot(levelled[:, 0], levelled[:, 1])

	grid = intrinsics.ray_grid()
	resampled, valid = _resample(bearings, ranges, column_valid, grid, jump_tolerance)
	valid &= (resampled >= intrinsics.min_depth) & (resampled <= intrinsics.max_depth)
	return StabilizedScan(
		grid, np.where(valid, resampled, 0.0), valid, stamp, band, intrinsics.max_depth, False, mount
	)


def center_row_scan(
		depth,
		intrinsics: CameraIntrinsics,
		band: int = DEFAULT_BAND,
		stamp: float = 0.0,
		mount: Pose2 | None = None,
) -> StabilizedScan:
	"""uncompensated scan along the principal row, what a fixed depth-to-scan converter produces"""
	return extract_scan(depth, 0.0, 0.0, intrinsics, band=band, stamp=stamp, mount=mount)
