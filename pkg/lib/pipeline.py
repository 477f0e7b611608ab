"""
Scenario orchestration: mapping runs, localization and navigation on a stored map,
frontier exploration and ablation batches.

Estimated maps live in the map frame, whose origin is the robot's start pose; trajectories
are written in the world frame by composing with that anchor.
"""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from lib import file_formats, helper_functions, reporting
from lib.contact_observer import ContactDetectionConfig, ContactEstimator, ContactReport
from lib.evaluation import Trajectory, evaluate_trajectory, map_coverage
from lib.frontiers import find_frontiers, nearest_frontier
from lib.geometry import Pose2, wrap_angle
from lib.leg_odometry import LegOdometry
from lib.localization import LocalizationConfig, ParticleFilter
from lib.odometry_fusion import LOST, TRACKING, FusedOdometry, OdometrySource, step as fusion_step
from lib.path_planning import PlannerConfig, PurePursuit, heading_command, plan_path
from lib.pipeline_variants import VariantBase, VariantRegistry, resolve_variant
from lib.robot_model import RobotModel
from lib.run_events import EventLog, HandlerChain, PipelineEventHandler
from lib.scan_stabilization import center_row_scan, extract_scan
from lib.simulator import (
	CommandSegment,
	FaultConfig,
	GaitConfig,
	NoiseConfig,
	ScanCorruption,
	SimConfig,
	SimFrame,
	Simulator,
	command_at,
	script_duration,
)
from lib.slam_backend import SlamBackend, SlamConfig
from lib.worlds import World, load_world
from schema import metric_report, scenario_config

NAVIGATION_SPEED = 0.5
EXPLORATION_SPIN_RATE = 0.5
SETTLE_TIME = 1.0
FRONTIER_REACHED = 0.3
STUCK_PROGRESS = 0.2


class ScenarioError(Exception):
	pass


class MissingArtifact(Exception):
	pass


class PipelineFailure(Exception):
	def __init__(self, message: str, directory: str | None = None):
		super().__init__(message)
		self.directory = directory


# ------- scenario -------
@dataclass
class Scenario:
	config: scenario_config.Model
	directory: str
	world: World
	model: RobotModel
	variant: type[VariantBase]

	@classmethod
	def load(cls, path: str, variant: str | None = None, seeds=None, output: str | None = None) -> "Scenario":
		"""config file plus command-line overrides; raises pydantic.ValidationError on invalid documents"""
		if not os.path.isfile(path):
			raise MissingArtifact(f"config file not found: {path}")
		try:
			config = scenario_config.from_file(path)
		except json.JSONDecodeError as error:
			raise ScenarioError(f"{path} is not valid JSON: {error}")
		updates = {}
		if variant is not None:
			updates["variant"] = variant
		if seeds:
			updates["seeds"] = list(seeds)
		if output is not None:
			updates["output"] = output
		if updates:
			config = scenario_config.Model.model_validate({**config.model_dump(), **updates})
		return cls.from_config(config, os.path.dirname(os.path.abspath(path)))

	@classmethod
	def from_config(cls, config: scenario_config.Model, directory: str = ".") -> "Scenario":
		variant = resolve_variant(config.variant)
		model_path = helper_functions.resolve_path(config.robot_model, directory)
		if not os.path.isfile(model_path):
			raise ScenarioError(f"robot model file not found: {config.robot_model}")
		return cls(config, directory, load_world(config.world), RobotModel.from_file(model_path), variant)

	def with_variant(self, name: str) -> "Scenario":
		config = self.config.model_copy(update={"variant": name})
		return replace(self, config=config, variant=resolve_variant(name))

	@property
	def anchor(self) -> Pose2:
		return self.world.start

	def sim_config(self) -> SimConfig:
		c = self.config
		faults = FaultConfig(
			tuple(tuple(window) for window in c.faults.dropouts),
			tuple(ScanCorruption(s.start, s.end, Pose2(*s.offset)) for s in c.faults.scan_corruptions),
		)
		return SimConfig(
			GaitConfig(**c.gait.model_dump()),
			NoiseConfig(**c.noise.model_dump()),
			faults,
			c.sim.control_rate,
			c.sim.depth_rate,
			vio_correspondences=c.sim.vio_correspondences,
		)

	def slam_config(self) -> SlamConfig:
		s = self.config.slam
		return SlamConfig(
			keyframe_distance=s.keyframe_distance,
			keyframe_angle=s.keyframe_angle,
			loop_radius=s.loop_radius,
			loop_threshold=s.loop_threshold,
			map_size=s.map_size,
			resolution=s.resolution,
			use_velocity_factors="velocity_factors" in self.variant.stages(),
		)

	def planner_config(self) -> PlannerConfig:
		return PlannerConfig(inflation_radius=self.config.navigation.inflation_radius)

	def script(self) -> list[CommandSegment]:
		return [CommandSegment(**command.model_dump()) for command in self.config.commands]

	def duration(self) -> float:
		if self.config.duration is not None:
			return self.config.duration
		return script_duration(self.script())

	def goals(self) -> list[Pose2]:
		if self.config.goals is None:
			return self.world.world_goals()
		return [Pose2(*goal) for goal in self.config.goals]


@dataclass
class RunArtifacts:
	directory: str
	report: metric_report.Model
	files: dict = field(default_factory=dict)


def _chain(*handlers) -> HandlerChain:
	"""flat handler chain; nested chains do not dispatch"""
	flat = []
	for handler in handlers:
		if handler is None:
			continue
		if type(handler) is HandlerChain:
			flat.extend(handler.handlers)
		else:
			flat.append(handler)
	return HandlerChain(*flat)


# ------- estimation front end -------
@dataclass
class FrontEndSample:
	stamp: float
	odometry: Pose2
	leg_pose: Pose2 | None = None
	scan: object = None


class OdometryFrontEnd:
	"""variant-gated estimators between the simulator and a mapping or localization back end"""

	def __init__(self, scenario: Scenario, simulator: Simulator, event_handler: PipelineEventHandler):
		self.scenario = scenario
		self.simulator = simulator
		self.event_handler = event_handler
		self.sim_config = simulator.config
		self.stages = scenario.variant.stages()
		self.invoked = []
		start = simulator.body_pose(0.0)
		self.vio_source = OdometrySource("vio", start, 0.0)
		self.fused = FusedOdometry.start(start)
		self.vio_losses = 0
		self.last_stamp = simulator.time
		self.leg_odometry = None
		self.contacts = None
		self.twists = []
		if "legodom" in self.stages:
			self.leg_odometry = LegOdometry(scenario.model, pose=start)
			contact = scenario.config.contact
			if contact.source == "observer":
				detection = ContactDetectionConfig.for_model(
					scenario.model, contact.upper_factor, contact.lower_factor, contact.cutoff_hz
				)
				self.contacts = ContactEstimator(scenario.model, detection, contact.observer)

	def stage(self, name: str, stamp: float):
		"""announces the first invocation of a pipeline stage"""
		if name not in self.invoked:
			self.invoked.append(name)
			self.event_handler.stage_invoked(dict(stage=name, stamp=stamp))

	@property
	def recoveries(self) -> int:
		return self.fused.recovery_count

	def process(self, frame: SimFrame) -> FrontEndSample:
		sensors = frame.sensors
		stamp = frame.stamp
		dt = stamp - self.last_stamp
		self.last_stamp = stamp
		self.stage("sim", stamp)
		self.stage("vio", stamp)
		previous_health = self.vio_source.health
		self.vio_source = self.vio_source.ingest(sensors.vio)
		if previous_health == TRACKING and self.vio_source.health == LOST:
			self.vio_losses += 1
			self.event_handler.vio_lost(dict(stamp=stamp))
		elif previous_health == LOST and self.vio_source.health == TRACKING:
			self.event_handler.vio_recovered(dict(stamp=stamp))

		leg_pose = None
		if self.leg_odometry is None:
			odometry = self.vio_source.pose
		else:
			estimate = self._leg_twist(frame)
			leg_pose = self.leg_odometry.integrate(estimate.twist, dt).to_pose2()
			self.stage("fusion", stamp)
			self.fused = fusion_step(self.fused, self.vio_source, estimate, dt)
			if self.fused.reseed is not None:
				self.simulator.vio.reseed(self.fused.reseed)
				logging.info("visual odometry re-seeded at %.2f s", stamp)
			odometry = self.fused.pose

		scan = self._scan(frame) if frame.has_depth else None
		return FrontEndSample(stamp, odometry.to_pose2(), leg_pose, scan)

	def _leg_twist(self, frame: SimFrame):
		sensors, truth = frame.sensors, frame.truth
		self.stage("contact", frame.stamp)
		if self.contacts is None:
			report = ContactReport.from_flags(truth.contacts, frame.stamp, truth.forces)
		else:
			report = self.contacts.update(sensors.joints, sensors.imu_orientation)
		self.stage("legodom", frame.stamp)
		estimate = self.leg_odometry.estimate(sensors.joints, report, sensors.gyro)
		self.twists.append((frame.stamp, estimate))
		return estimate

	def _scan(self, frame: SimFrame):
		scan_config = self.scenario.config.scan
		intrinsics = self.sim_config.intrinsics
		mount = self.sim_config.scan_mount
		if "scanstab" in self.stages:
			self.stage("scanstab", frame.stamp)
			roll, pitch = frame.sensors.imu_roll_pitch()
			return extract_scan(
				frame.depth, roll, pitch, intrinsics, scan_config.band, scan_config.aggregation, frame.stamp, mount
			)
		self.stage("center_row_scan", frame.stamp)
		return center_row_scan(frame.depth, intrinsics, scan_config.band, frame.stamp, mount)


class MappingSession:
	"""simulator, front end and SLAM back end stepped together"""

	def __init__(self, scenario: Scenario, seed: int, event_handler: PipelineEventHandler):
		self.scenario = scenario
		self.simulator = Simulator(scenario.model, scenario.world, scenario.sim_config(), seed)
		self.front_end = OdometryFrontEnd(scenario, self.simulator, event_handler)
		self.backend = SlamBackend(scenario.slam_config(), event_handler)
		self.truth = []
		self.scans = []
		self.pose = Pose2()

	@property
	def time(self) -> float:
		return self.simulator.time

	def step(self, command) -> SimFrame:
		frame = self.simulator.step(command)
		sample = self.front_end.process(frame)
		if sample.scan is not None:
			self.front_end.stage("slam2d", sample.stamp)
			if sample.leg_pose is not None:
				self.front_end.stage("velocity_factors", sample.stamp)
			self.pose = self.backend.process(sample.stamp, sample.odometry, sample.scan, sample.leg_pose)
			self.truth.append((sample.stamp, frame.truth.pose))
			self.scans.append(sample.scan)
		else:
			self.pose = self.backend.current_estimate(sample.odometry)
		return frame


class _Progress:
	"""simulation progress events in chunks of one simulated second"""

	def __init__(self, event_handler, control_rate: float, total_steps: int):
		self.event_handler = event_handler
		self.chunk = max(1, int(round(control_rate)))
		self.pending = 0
		event_handler.simulation_started(dict(steps=total_steps))

	def advance(self):
		self.pending += 1
		if self.pending >= self.chunk:
			self.event_handler.simulation_progress(dict(steps=self.pending))
			self.pending = 0


# ------- artifacts -------
def _evaluate(scenario: Scenario, estimate: Trajectory, truth: Trajectory, grid, ground_truth_grid, anchor: Pose2) -> dict:
	evaluation = scenario.config.evaluation
	metrics = {"rotation_weight": evaluation.rotation_weight}
	transform = Pose2()
	if len(estimate) >= 2:
		result = evaluate_trajectory(
			estimate, truth, tuple(evaluation.rpe_distances), evaluation.rotation_weight,
			evaluation.max_gap, evaluation.align,
		)
		transform = Pose2.from_array(result["alignment"])
		metrics.update(ate=result["ate"], are=result["are"], ape=result["ape"])
		metrics["rpe"] = {f"{distance:g}m": result[f"rpe_{distance:g}m"] for distance in evaluation.rpe_distances}
	metrics["coverage"] = map_coverage(grid, ground_truth_grid, transform.compose(anchor))
	return metrics


def _write_artifacts(
		directory: str,
		scenario: Scenario,
		estimate_samples,
		truth_samples,
		grid,
		report_fields: dict,
		front_end: OdometryFrontEnd | None = None,
		backend: SlamBackend | None = None,
		scans=None,
		anchor: Pose2 | None = None,
) -> tuple[metric_report.Model, dict]:
	anchor = anchor if anchor is not None else scenario.anchor
	estimate = Trajectory.from_poses([(stamp, anchor.compose(pose)) for stamp, pose in estimate_samples])
	truth = Trajectory.from_poses(truth_samples)
	files = {
		"estimate": os.path.join(directory, "trajectory_estimate.tum"),
		"groundtruth": os.path.join(directory, "trajectory_groundtruth.tum"),
		"metrics": os.path.join(directory, "metrics.json"),
		"events": os.path.join(directory, "events.jsonl"),
	}
	file_formats.write_tum(estimate, files["estimate"])
	file_formats.write_tum(truth, files["groundtruth"])
	files["map"] = file_formats.write_map(grid, directory, "map", anchor)[1]
	ground_truth_grid = scenario.world.ground_truth_grid(grid.resolution)
	files["groundtruth_map"] = file_formats.write_map(ground_truth_grid, directory, "groundtruth_map")[1]

	metrics = _evaluate(scenario, estimate, truth, grid, ground_truth_grid, anchor)
	if front_end is not None:
		metrics.update(vio_losses=front_end.vio_losses, recoveries=front_end.recoveries)
	if backend is not None:
		metrics.update(
			keyframes=backend.keyframe_count,
			loop_closures=backend.loop_closures,
			rejected_matches=backend.rejected_matches,
		)
		files["graph"] = os.path.join(directory, "graph.g2o")
		file_formats.write_g2o(backend.graph, files["graph"])
	if scans:
		files["scans"] = os.path.join(directory, "scans.csv")
		file_formats.write_scan_csv(scans, files["scans"])
	if front_end is not None and front_end.twists:
		files["twists"] = os.path.join(directory, "twists.csv")
		file_formats.write_twist_csv(front_end.twists, files["twists"])

	report = metric_report.Model(**report_fields, **metrics)
	helper_functions.write_json(files["metrics"], report.model_dump())
	return report, files


def _run(command: str, scenario: Scenario, seed: int, output, event_handler, body) -> RunArtifacts:
	"""shared run frame: run directory, event log, failure marker"""
	root = output if output is not None else scenario.config.output
	directory = helper_functions.prepare_run_directory(
		helper_functions.run_directory(root, scenario.world.name, scenario.variant.name(), seed)
	)
	event_log = EventLog(os.path.join(directory, "events.jsonl"))
	handler = _chain(event_log, event_handler)
	report_fields = dict(command=command, world=scenario.world.name, variant=scenario.variant.name(), seed=seed)
	try:
		handler.run_started(dict(report_fields))
		report, files = body(directory, handler, report_fields)
		handler.artifacts_written(dict(directory=directory))
		handler.run_complete(dict(directory=directory, status=report.status))
		return RunArtifacts(directory, report, files)
	except Exception as error:
		message = f"{type(error).__name__}: {error}"
		helper_functions.write_failure_marker(directory, f"ERROR PIPELINE_FAILURE: {message}")
		handler.run_failed(dict(directory=directory, error=message))
		raise PipelineFailure(message, directory) from error
	finally:
		event_log.close()


# ------- mapping -------
def run_map(scenario: Scenario, seed: int, output: str | None = None, event_handler=None) -> RunArtifacts:
	"""simulate the command script, map with the selected variant and write the run artifacts"""

	def _body(directory, handler, report_fields):
		session = MappingSession(scenario, seed, handler)
		control_rate = session.simulator.config.control_rate
		script = scenario.script()
		steps = int(round(scenario.duration() * control_rate))
		progress = _Progress(handler, control_rate, steps)
		dt = 1.0 / control_rate
		for _ in range(steps):
			session.step(command_at(script, session.time + 0.5 * dt))
			progress.advance()
		grid = session.backend.finish()
		return _write_artifacts(
			directory, scenario, session.backend.trajectory(), session.truth, grid, report_fields,
			session.front_end, session.backend, session.scans,
		)

	return _run("map", scenario, seed, output, event_handler, _body)


# ------- navigation -------
class LocalizedRobot:
	"""simulator, front end and particle filter stepped together; estimates in the map frame"""

	def __init__(self, scenario: Scenario, seed: int, grid, event_handler: PipelineEventHandler, anchor: Pose2 | None = None):
		self.simulator = Simulator(scenario.model, scenario.world, scenario.sim_config(), seed)
		self.front_end = OdometryFrontEnd(scenario, self.simulator, event_handler)
		self.event_handler = event_handler
		config = LocalizationConfig(particles=scenario.config.navigation.particles)
		anchor = anchor if anchor is not None else scenario.anchor
		self.estimate = anchor.between(scenario.world.start)
		self.filter = ParticleFilter(grid, config, seed, initial_pose=self.estimate)
		self.degraded = False
		self.estimates = []
		self.truth = []
		self.true_pose = scenario.world.start
		self._scan_estimate = None
		self._scan_odometry = None

	@property
	def time(self) -> float:
		return self.simulator.time

	def step(self, command) -> SimFrame:
		frame = self.simulator.step(command)
		sample = self.front_end.process(frame)
		self.true_pose = frame.truth.pose.to_pose2()
		if sample.scan is not None:
			self.front_end.stage("localization", sample.stamp)
			result = self.filter.step(sample.stamp, sample.odometry, sample.scan)
			self.estimate = self._scan_estimate = result.pose
			self._scan_odometry = sample.odometry
			self.estimates.append((sample.stamp, result.pose))
			self.truth.append((sample.stamp, frame.truth.pose))
			if result.degraded and not self.filter.map_empty:
				self.degraded = True
				self.event_handler.localization_degraded(dict(stamp=sample.stamp, fit=result.fit))
		elif self._scan_odometry is not None:
			self.estimate = self._scan_estimate.compose(self._scan_odometry.between(sample.odometry))
		return frame


def _settle(robot: LocalizedRobot, deadline: float, progress: _Progress):
	end = min(deadline, robot.time + SETTLE_TIME)
	while robot.time < end:
		robot.step((0.0, 0.0, 0.0))
		progress.advance()


def _drive_to_goal(robot, grid, target: Pose2, scenario: Scenario, progress) -> tuple[bool, str | None]:
	"""drive on the estimate until it matches `target`; returns (arrived, failure reason)"""
	navigation = scenario.config.navigation
	deadline = robot.time + navigation.goal_timeout
	planner = scenario.planner_config()
	follower = None
	aligning = False
	while robot.time < deadline:
		if robot.degraded:
			robot.degraded = False
			_settle(robot, deadline, progress)
			follower = None
			continue
		pose = robot.estimate
		if follower is None:
			path = plan_path(grid, pose.translation, target.translation, planner)
			if path is None:
				return False, "unreachable"
			follower = PurePursuit(path, navigation.lookahead, NAVIGATION_SPEED)
		distance = float(np.hypot(*(target.translation - pose.translation)))
		if aligning and distance > navigation.position_tolerance:
			aligning = False
		elif not aligning and distance < 0.5 * navigation.position_tolerance:
			aligning = True
		if aligning:
			if abs(wrap_angle(target.theta - pose.theta)) < 0.5 * navigation.heading_tolerance:
				return True, None
			command = (0.0, 0.0, heading_command(pose, target.theta))
		else:
			linear, angular = follower.command(pose)
			command = (linear, 0.0, angular)
		robot.step(command)
		progress.advance()
	return False, "timeout"


def run_navigate(
		scenario: Scenario,
		seed: int,
		map_path: str | None = None,
		output: str | None = None,
		event_handler=None,
) -> RunArtifacts:
	"""localize on a stored map and visit the goal list in order; success is judged on ground truth"""
	map_path = map_path if map_path is not None else scenario.config.navigation.map
	if map_path is None:
		raise MissingArtifact("navigation needs a map: pass --map or set navigation.map")
	map_path = helper_functions.resolve_path(map_path, scenario.directory)
	if not os.path.isfile(map_path):
		raise MissingArtifact(f"map not found: {map_path}")
	grid = file_formats.read_map(map_path)
	anchor = file_formats.map_anchor(map_path)
	navigation = scenario.config.navigation

	def _body(directory, handler, report_fields):
		robot = LocalizedRobot(scenario, seed, grid, handler, anchor)
		goals = scenario.goals()
		budget = int(round(len(goals) * navigation.goal_timeout * robot.simulator.config.control_rate))
		progress = _Progress(handler, robot.simulator.config.control_rate, budget)
		results = []
		for number, goal in enumerate(goals):
			started = robot.time
			handler.goal_started(dict(goal=number, pose=goal, stamp=started))
			target = anchor.between(goal)
			arrived, reason = _drive_to_goal(robot, grid, target, scenario, progress)
			position_error = float(np.hypot(*(robot.true_pose.translation - goal.translation)))
			heading_error = float(abs(wrap_angle(robot.true_pose.theta - goal.theta)))
			if arrived and (
					position_error > navigation.position_tolerance or heading_error > navigation.heading_tolerance
			):
				arrived, reason = False, "off_target"
			elapsed = robot.time - started
			results.append(metric_report.GoalResult(
				goal=goal.as_array().tolist(), reached=arrived, elapsed=elapsed,
				position_error=position_error, heading_error=heading_error, reason=reason,
			))
			if arrived:
				handler.goal_reached(dict(goal=number, elapsed=elapsed))
			else:
				handler.goal_failed(dict(goal=number, reason=reason, elapsed=elapsed))
		success_rate = sum(result.reached for result in results) / len(results) if results else 0.0
		fields = dict(report_fields, goals=results, success_rate=success_rate)
		return _write_artifacts(
			directory, scenario, robot.estimates, robot.truth, grid, fields, robot.front_end, anchor=anchor,
		)

	return _run("navigate", scenario, seed, output, event_handler, _body)


# ------- exploration -------
class _FrontierProgress:
	"""best distance to the current frontier target and when it was achieved"""

	def __init__(self):
		self.target = None
		self.best = np.inf
		self.since = 0.0

	def update(self, target, distance: float, stamp: float):
		if self.target is None or np.hypot(*(self.target - target)) > FRONTIER_REACHED:
			self.target, self.best, self.since = np.array(target), distance, stamp
		elif distance < self.best - STUCK_PROGRESS:
			self.best, self.since = distance, stamp

	def stuck(self, stamp: float, window: float) -> bool:
		return stamp - self.since > window


def _spin(session: MappingSession, deadline: float, progress: _Progress):
	dt = 1.0 / session.simulator.config.control_rate
	end = min(deadline, session.time + 2.0 * np.pi / EXPLORATION_SPIN_RATE)
	while session.time + 0.5 * dt < end:
		session.step((0.0, 0.0, EXPLORATION_SPIN_RATE))
		progress.advance()


def run_explore(scenario: Scenario, seed: int, output: str | None = None, event_handler=None) -> RunArtifacts:
	"""spin in place, then repeatedly drive towards the nearest reachable frontier until none is left"""
	exploration = scenario.config.exploration

	def _body(directory, handler, report_fields):
		session = MappingSession(scenario, seed, handler)
		control_rate = session.simulator.config.control_rate
		deadline = exploration.timeout
		progress = _Progress(handler, control_rate, int(round(deadline * control_rate)))
		planner = scenario.planner_config()
		excluded = []
		tracker = _FrontierProgress()
		reason = "timeout"
		_spin(session, deadline, progress)
		while session.time < deadline:
			grid = session.backend.grid
			pose = session.pose
			clusters = find_frontiers(grid, exploration.min_frontier_size)
			choice = nearest_frontier(clusters, pose.translation, excluded)
			if choice is None:
				reason = "complete" if not clusters else "exhausted"
				break
			path = plan_path(grid, pose.translation, choice.target, planner)
			if path is None:
				excluded.append(choice.target)
				continue
			handler.frontier_selected(dict(stamp=session.time, target=choice.target, size=choice.size))
			follower = PurePursuit(path, scenario.config.navigation.lookahead, NAVIGATION_SPEED)
			replan_at = min(deadline, session.time + exploration.replan_interval)
			while session.time < replan_at:
				pose = session.pose
				distance = float(np.hypot(*(choice.target - pose.translation)))
				if distance < FRONTIER_REACHED:
					excluded.append(choice.target)
					break
				linear, angular = follower.command(pose)
				session.step((linear, 0.0, angular))
				progress.advance()
			tracker.update(choice.target, float(np.hypot(*(choice.target - session.pose.translation))), session.time)
			if tracker.stuck(session.time, exploration.stuck_window):
				logging.info("no progress towards frontier %s, skipping it", np.round(choice.target, 2))
				excluded.append(choice.target)
		handler.exploration_complete(dict(stamp=session.time, reason=reason, excluded=len(excluded)))
		grid = session.backend.finish()
		return _write_artifacts(
			directory, scenario, session.backend.trajectory(), session.truth, grid, report_fields,
			session.front_end, session.backend, session.scans,
		)

	return _run("explore", scenario, seed, output, event_handler, _body)


# ------- ablation -------
def _ablation_job(scenario: Scenario, seed: int, output: str) -> metric_report.Model:
	try:
		return run_map(scenario, seed, output).report
	except PipelineFailure as failure:
		return metric_report.Model(
			command="map", world=scenario.world.name, variant=scenario.variant.name(), seed=seed,
			status="failed", error=str(failure),
		)


def run_ablation(
		scenario: Scenario,
		seeds: list[int],
		workers: int = 1,
		output: str | None = None,
		event_handler=None,
) -> tuple[list[metric_report.Model], dict]:
	"""every variant x seed mapping run, in parallel processes when workers > 1, then the ablation report"""
	if not seeds:
		raise ScenarioError("seed list must not be empty")
	handler = _chain(event_handler)
	root = output if output is not None else scenario.config.output
	variants = VariantRegistry.names()
	jobs = [(scenario.with_variant(name), seed, root) for name in variants for seed in seeds]
	handler.batch_started(dict(variants=variants, seeds=list(seeds), runs=len(jobs)))
	reports = [None] * len(jobs)
	if workers <= 1:
		for index, job in enumerate(jobs):
			reports[index] = _ablation_job(*job)
			handler.batch_run_complete(dict(variant=job[0].variant.name(), seed=job[1]))
	else:
		with ProcessPoolExecutor(max_workers=workers) as executor:
			futures = {executor.submit(_ablation_job, *job): index for index, job in enumerate(jobs)}
			for future in as_completed(futures):
				index = futures[future]
				reports[index] = future.result()
				handler.batch_run_complete(dict(variant=jobs[index][0].variant.name(), seed=jobs[index][1]))
	directory = os.path.join(root, scenario.world.name, "ablation")
	paths = reporting.write_ablation_report(reports, directory, scenario.config.evaluation.rotation_weight)
	handler.batch_complete(dict(directory=directory))
	return reports, paths


# ------- contact traces -------
def contact_trace(scenario: Scenario, seed: int, duration: float = 10.0, command=(0.4, 0.0, 0.0)) -> list:
	"""observer contact reports against simulator ground truth at the control rate"""
	contact = scenario.config.contact
	simulator = Simulator(scenario.model, scenario.world, scenario.sim_config(), seed)
	detection = ContactDetectionConfig.for_model(
		scenario.model, contact.upper_factor, contact.lower_factor, contact.cutoff_hz
	)
	estimator = ContactEstimator(scenario.model, detection, contact.observer)
	samples = []
	for _ in range(int(round(duration * simulator.config.control_rate))):
		frame = simulator.step(command)
		report = estimator.update(frame.sensors.joints, frame.sensors.imu_orientation)
		samples.append((frame.stamp, report, frame.truth.forces, frame.truth.contacts))
	return samples
