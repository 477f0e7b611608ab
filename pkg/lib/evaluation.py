"""
Trajectory and map evaluation.

Trajectories are compared in the plane: association by nearest timestamp, rigid planar
alignment without scale, absolute errors over the associated pairs and relative errors
over fixed distances travelled along the ground-truth path.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from lib.geometry import Pose2, Pose3, rotation_2d, wrap_angle
from lib.occupancy_grid import OccupancyGrid

DEFAULT_MAX_GAP = 0.02
DEFAULT_RPE_DISTANCES = (2.0, 5.0, 10.0)
DEFAULT_ROTATION_WEIGHT = 1.0


class Trajectory:
	"""timestamped poses, sorted by stamp on construction"""

	class Error(Exception):
		pass

	def __init__(self, stamps, positions, quaternions=None, frame_id: str = "map"):
		stamps = np.asarray(stamps, dtype=float).reshape(-1)
		positions = np.asarray(positions, dtype=float).reshape(-1, 3)
		if quaternions is None:
			quaternions = np.tile([0.0, 0.0, 0.0, 1.0], (len(stamps), 1))
		quaternions = np.asarray(quaternions, dtype=float).reshape(-1, 4)
		if not len(stamps) == len(positions) == len(quaternions):
			raise Trajectory.Error("stamps, positions and orientations differ in length")
		order = np.argsort(stamps, kind="stable")
		self.stamps = stamps[order]
		if np.any(np.diff(self.stamps) <= 0):
			raise Trajectory.Error("timestamps must be strictly increasing")
		self.positions = positions[order]
		self.quaternions = quaternions[order]
		self.frame_id = frame_id

	@classmethod
	def from_poses(cls, samples, frame_id: str = "map") -> "Trajectory":
		"""from (stamp, Pose2 | Pose3) pairs"""
		stamps, positions, quaternions = [], [], []
		for stamp, pose in samples:
			if isinstance(pose, Pose2):
				pose = Pose3.from_pose2(pose)
			stamps.append(stamp)
			positions.append(pose.position)
			quaternions.append(pose.quaternion)
		return cls(stamps, np.reshape(positions, (-1, 3)), np.reshape(quaternions, (-1, 4)), frame_id)

	@classmethod
	def from_planar(cls, stamps, planar, frame_id: str = "map") -> "Trajectory":
		"""from an (n, 3) array of x, y, heading"""
		planar = np.asarray(planar, dtype=float).reshape(-1, 3)
		positions = np.column_stack([planar[:, :2], np.zeros(len(planar))])
		quaternions = Rotation.from_euler("z", planar[:, 2]).as_quat().reshape(-1, 4)
		return cls(stamps, positions, quaternions, frame_id)

	def __len__(self):
		return len(self.stamps)

	@property
	def xy(self) -> np.ndarray:
		return self.positions[:, :2]

	@property
	def headings(self) -> np.ndarray:
		if len(self) == 0:
			return np.zeros(0)
		return Rotation.from_quat(self.quaternions).as_euler("ZYX")[:, 0]

	def planar(self) -> np.ndarray:
		return np.column_stack([self.xy, self.headings])

	def pose(self, index: int) -> Pose2:
		return Pose2(self.positions[index, 0], self.positions[index, 1], self.headings[index])

	def path_lengths(self) -> np.ndarray:
		"""cumulative planar distance travelled at each pose"""
		steps = np.hypot(*np.diff(self.xy, axis=0).T) if len(self) > 1 else np.zeros(0)
		return np.concatenate([[0.0], np.cumsum(steps)])

	def subset(self, indices) -> "Trajectory":
		indices = np.asarray(indices, dtype=int)
		return Trajectory(self.stamps[indices], self.positions[indices], self.quaternions[indices], self.frame_id)

	def transformed(self, transform: Pose2) -> "Trajectory":
		"""applies a planar rigid transform from the left"""
		positions = self.positions.copy()
		positions[:, :2] = transform.transform_points(self.xy)
		quaternions = (Rotation.from_euler("z", transform.theta) * Rotation.from_quat(self.quaternions)).as_quat()
		return Trajectory(self.stamps, positions, quaternions.reshape(-1, 4), self.frame_id)


@dataclass(frozen=True)
class AlignedPair:
	estimate: Trajectory
	ground_truth: Trajectory
	transform: Pose2


@dataclass(frozen=True)
class AbsoluteErrors:
	ate: float
	are: float
	ape: float


def associate(estimate: Trajectory, ground_truth: Trajectory, max_gap: float = DEFAULT_MAX_GAP):
	"""
	nearest-timestamp pairs within `max_gap` seconds as (estimate indices, ground-truth indices);
	a ground-truth pose is used at most once, by its closest estimate
	"""
	if len(estimate) == 0 or len(ground_truth) == 0:
		return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
	right = np.clip(np.searchsorted(ground_truth.stamps, estimate.stamps), 0, len(ground_truth) - 1)
	left = np.clip(right - 1, 0, len(ground_truth) - 1)
	gap_left = np.abs(estimate.stamps - ground_truth.stamps[left])
	gap_right = np.abs(estimate.stamps - ground_truth.stamps[right])
	nearest = np.where(gap_left <= gap_right, left, right)
	gap = np.minimum(gap_left, gap_right)
	matched = np.flatnonzero(gap <= max_gap + 1e-12)
	by_gap = matched[np.argsort(gap[matched], kind="stable")]
	_, first = np.unique(nearest[by_gap], return_index=True)
	keep = np.sort(by_gap[first])
	return keep, nearest[keep]


def align_planar(source: np.ndarray, target: np.ndarray) -> Pose2:
	"""rigid transform T minimizing sum |T(source_i) - target_i|^2 (closed form, no scale)"""
	source = np.asarray(source, dtype=float).reshape(-1, 2)
	target = np.asarray(target, dtype=float).reshape(-1, 2)
	source_mean, target_mean = source.mean(axis=0), target.mean(axis=0)
	cross = (source - source_mean).T @ (target - target_mean)
	theta = np.arctan2(cross[0, 1] - cross[1, 0], cross[0, 0] + cross[1, 1])
	translation = target_mean - rotation_2d(theta) @ source_mean
	return Pose2(translation[0], translation[1], theta)


def associate_and_align(
		estimate: Trajectory,
		ground_truth: Trajectory,
		max_gap: float = DEFAULT_MAX_GAP,
		align: bool = True,
) -> AlignedPair:
	est_index, gt_index = associate(estimate, ground_truth, max_gap)
	if len(est_index) < 2:
		raise Trajectory.Error(f"only {len(est_index)} poses associated within {max_gap * 1000:.0f} ms, need 2")
	estimate, ground_truth = estimate.subset(est_index), ground_truth.subset(gt_index)
	transform = align_planar(estimate.xy, ground_truth.xy) if align else Pose2()
	return AlignedPair(estimate.transformed(transform), ground_truth, transform)


def _rmse(values) -> float:
	return float(np.sqrt(np.mean(np.square(values))))


def absolute_errors(
		estimate: Trajectory,
		ground_truth: Trajectory,
		rotation_weight: float = DEFAULT_ROTATION_WEIGHT,
) -> AbsoluteErrors:
	"""RMSE of position distance, of wrapped heading difference and of their combination (1 rad = `rotation_weight` m)"""
	if len(estimate) == 0 or len(estimate) != len(ground_truth):
		raise Trajectory.Error("absolute errors need a non-empty one-to-one association")
	distance = np.hypot(*(estimate.xy - ground_truth.xy).T)
	heading = np.abs(wrap_angle(estimate.headings - ground_truth.headings))
	combined = np.sqrt(distance ** 2 + (rotation_weight * heading) ** 2)
	return AbsoluteErrors(_rmse(distance), _rmse(heading), _rmse(combined))


def relative_errors(estimate: Trajectory, ground_truth: Trajectory, distance: float) -> float:
	"""
	translation RMSE of the relative-pose discrepancy between each pose and the first pose
	at least `distance` metres further along the ground-truth path
	"""
	if distance <= 0:
		raise ValueError("distance must be positive")
	if len(estimate) != len(ground_truth):
		raise Trajectory.Error("relative errors need a one-to-one association")
	travelled = ground_truth.path_lengths()
	if len(travelled) == 0 or travelled[-1] < distance:
		total = travelled[-1] if len(travelled) else 0.0
		raise Trajectory.Error(f"path of {total:.2f} m is shorter than {distance:g} m")
	ends = np.searchsorted(travelled, travelled + distance - 1e-12, side="left")
	starts = np.flatnonzero(ends < len(travelled))
	errors = []
	for i in starts:
		j = ends[i]
		gt_relative = ground_truth.pose(i).between(ground_truth.pose(j))
		est_relative = estimate.pose(i).between(estimate.pose(j))
		errors.append(np.hypot(*gt_relative.between(est_relative).translation))
	return _rmse(errors)


def evaluate_trajectory(
		estimate: Trajectory,
		ground_truth: Trajectory,
		distances=DEFAULT_RPE_DISTANCES,
		rotation_weight: float = DEFAULT_ROTATION_WEIGHT,
		max_gap: float = DEFAULT_MAX_GAP,
		align: bool = True,
) -> dict:
	"""metric dictionary of one run; RPE entries for distances longer than the path are None"""
	pair = associate_and_align(estimate, ground_truth, max_gap, align)
	absolute = absolute_errors(pair.estimate, pair.ground_truth, rotation_weight)
	metrics = {"ate": absolute.ate, "are": absolute.are, "ape": absolute.ape}
	for distance in distances:
		try:
			metrics[f"rpe_{distance:g}m"] = relative_errors(pair.estimate, pair.ground_truth, distance)
		except Trajectory.Error:
			metrics[f"rpe_{distance:g}m"] = None
	metrics["alignment"] = pair.transform.as_array().tolist()
	metrics["associated"] = len(pair.estimate)
	return metrics


def map_coverage(estimate: OccupancyGrid, ground_truth: OccupancyGrid, transform: Pose2 | None = None) -> float:
	"""
	fraction of ground-truth free cells whose nearest estimated cell is free; `transform` maps the
	estimate frame into the ground-truth frame (the trajectory alignment)
	"""
	free = ground_truth.free_mask()
	if not free.any():
		raise ValueError("ground-truth map has no free cells")
	iy, ix = np.nonzero(free)
	centers = ground_truth.cell_center(ix, iy)
	if transform is not None:
		centers = transform.inverse().transform_points(centers)
	return float(np.count_nonzero(estimate.is_free(centers)) / len(centers))
