"""
Mapping session: keyframe selection, scan-to-map matching, loop-closure proposals,
graph optimization and occupancy-grid maintenance.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from lib.geometry import BodyTwist, Pose2, se2_log
from lib.occupancy_grid import OccupancyGrid
from lib.pose_graph import GraphConfig, PoseGraph2D, add_keyframe, optimize
from lib.run_events import PipelineEventHandler
from lib.scan_matcher import MatcherConfig, match_scan
from lib.scan_stabilization import StabilizedScan


@dataclass(frozen=True)
class SlamConfig:
	keyframe_distance: float = 0.2
	keyframe_angle: float = 0.2
	loop_radius: float = 1.5
	loop_min_separation: int = 10
	loop_threshold: float = 0.6
	loop_submap_neighbours: int = 2
	loop_submap_size: float = 16.0
	map_size: float = 40.0
	resolution: float = 0.05
	rebuild_correction: float = 0.05
	outlier_residual: float = 3.0
	use_velocity_factors: bool = True
	matcher: MatcherConfig = field(default_factory=MatcherConfig)
	graph: GraphConfig = field(default_factory=GraphConfig)


@dataclass
class _TrajectorySample:
	stamp: float
	node: int
	offset: Pose2


class SlamBackend:
	def __init__(self, config: SlamConfig | None = None, event_handler: PipelineEventHandler | None = None):
		self.config = config if config is not None else SlamConfig()
		self.event_handler = event_handler if event_handler is not None else PipelineEventHandler()
		self.graph = PoseGraph2D(huber_delta=self.config.graph.huber_delta)
		self.grid = OccupancyGrid.centered(self.config.map_size, self.config.resolution)
		self._keyframe_leg_pose = None
		self._samples: list[_TrajectorySample] = []
		self.loop_closures = 0
		self.rejected_matches = 0

	@property
	def keyframe_count(self) -> int:
		return len(self.graph.nodes)

	def _needs_keyframe(self, odometry: Pose2) -> bool:
		if not self.graph.nodes:
			return True
		delta = self.graph.nodes[-1].odometry.between(odometry)
		return (
				np.hypot(delta.x, delta.y) >= self.config.keyframe_distance
				or abs(delta.theta) >= self.config.keyframe_angle
		)

	def current_estimate(self, odometry: Pose2) -> Pose2:
		if not self.graph.nodes:
			return Pose2()
		last = self.graph.nodes[-1]
		return last.pose.compose(last.odometry.between(odometry))

	def _mean_twist(self, leg_pose: Pose2 | None, dt: float) -> BodyTwist | None:
		if not self.config.use_velocity_factors or leg_pose is None or self._keyframe_leg_pose is None:
			return None
		vx, vy, omega = se2_log(self._keyframe_leg_pose.between(leg_pose)) / dt
		return BodyTwist([vx, vy, 0.0], [0.0, 0.0, omega])

	def process(self, stamp: float, odometry: Pose2, scan: StabilizedScan, leg_pose: Pose2 | None = None) -> Pose2:
		"""
		Feed one scan with the odometry pose at its stamp (and the dead-reckoned leg pose when
		velocity factors are in use). Returns the current map-frame pose estimate.
		"""
		if not self._needs_keyframe(odometry):
			last = self.graph.nodes[-1]
			self._samples.append(_TrajectorySample(stamp, last.index, last.odometry.between(odometry)))
			return self.current_estimate(odometry)

		if not self.graph.nodes:
			add_keyframe(self.graph, Pose2(), scan, None, 1.0, stamp=stamp, odometry=odometry, config=self.config.graph)
			self.grid.integrate_scan(self.graph.nodes[0].pose, scan)
		else:
			self._add_keyframe(stamp, odometry, scan, leg_pose)

		self._keyframe_leg_pose = leg_pose
		index = len(self.graph.nodes) - 1
		self._samples.append(_TrajectorySample(stamp, index, Pose2()))
		self.event_handler.keyframe_added(dict(stamp=stamp, node=index, pose=self.graph.nodes[index].pose))
		return self.graph.nodes[index].pose

	def _add_keyframe(self, stamp, odometry, scan, leg_pose):
		previous = self.graph.nodes[-1]
		dt = max(stamp - previous.stamp, 1e-3)
		prior = self.current_estimate(odometry)
		match = match_scan(scan, self.grid, prior, self.config.matcher)
		if not match.accepted:
			self.rejected_matches += 1
			self.event_handler.scan_match_rejected(dict(stamp=stamp, score=match.score))
		add_keyframe(
			self.graph, prior, scan, self._mean_twist(leg_pose, dt), dt,
			stamp=stamp, match=match, odometry=odometry, config=self.config.graph,
		)
		index = len(self.graph.nodes) - 1
		if self._propose_loop_closure(index):
			self.loop_closures += 1

		before = self.graph.poses()
		optimize(self.graph, self.config.graph.max_iterations, self.config.graph.step_tolerance)
		if not self.graph.last_result.converged:
			self.event_handler.optimization_warning(dict(stamp=stamp, iterations=self.graph.last_result.iterations))
		correction = np.hypot(*(self.graph.poses()[:-1, :2] - before[:-1, :2]).T)
		if len(correction) and correction.max() > self.config.rebuild_correction:
			self.rebuild_map()
		elif self._scan_is_consistent(index):
			self.grid.integrate_scan(self.graph.nodes[index].pose, scan)

	def _propose_loop_closure(self, index: int) -> bool:
		config = self.config
		node = self.graph.nodes[index]
		candidates = [
			other for other in self.graph.nodes[: max(0, index - config.loop_min_separation)]
			if node.pose.distance_to(other.pose) <= config.loop_radius and other.scan is not None
		]
		if not candidates:
			return False
		target = min(candidates, key=lambda other: node.pose.distance_to(other.pose))
		half = config.loop_submap_size / 2.0
		submap = OccupancyGrid.from_bounds(
			target.pose.x - half, target.pose.y - half, target.pose.x + half, target.pose.y + half, self.grid.resolution
		)
		first = max(0, target.index - config.loop_submap_neighbours)
		last = min(index - 1, target.index + config.loop_submap_neighbours)
		for neighbour in self.graph.nodes[first:last + 1]:
			if neighbour.scan is not None:
				submap.integrate_scan(neighbour.pose, neighbour.scan)
		match = match_scan(node.scan, submap, node.pose, config.matcher)
		if not match.accepted or match.score < config.loop_threshold:
			return False
		self.graph.add_factor(
			"loop_closure", target.index, index, target.pose.between(match.pose),
			np.diag([
				1.0 / config.graph.scan_sigma_xy ** 2,
				1.0 / config.graph.scan_sigma_xy ** 2,
				1.0 / config.graph.scan_sigma_theta ** 2,
			]),
		)
		self.event_handler.loop_closure_added(dict(stamp=node.stamp, first=target.index, second=index, score=match.score))
		logging.info("loop closure %d -> %d (score %.2f)", target.index, index, match.score)
		return True

	def _scan_is_consistent(self, index: int) -> bool:
		node = self.graph.nodes[index]
		if node.scan is None or node.scan.valid_count == 0:
			return False
		for factor in self.graph.factors:
			if factor.kind == "scan_match" and factor.second == index:
				return self.graph.factor_residual(factor) <= self.config.outlier_residual
		return True

	def rebuild_map(self):
		self.grid = self.grid.empty_like()
		for node in self.graph.nodes:
			if self._scan_is_consistent(node.index):
				self.grid.integrate_scan(node.pose, node.scan)

	def finish(self) -> OccupancyGrid:
		if len(self.graph.nodes) > 1:
			optimize(self.graph, self.config.graph.max_iterations, self.config.graph.step_tolerance)
		self.rebuild_map()
		return self.grid

	def trajectory(self) -> list[tuple[float, Pose2]]:
		"""every processed scan stamp with its pose on top of the optimized keyframes"""
		return [
			(sample.stamp, self.graph.nodes[sample.node].pose.compose(sample.offset))
			for sample in self._samples
		]
