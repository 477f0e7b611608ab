"""
Planar pose graph with prior, scan-match, odometry, velocity and loop-closure factors,
optimized by Levenberg-Marquardt on the sparse normal equations.

Every relative factor uses the error
	e = [Rz^T (Ri^T (tj - ti) - tz), wrap(thj - thi - thz)]
and scan-match / loop-closure factors go through a Huber kernel in whitened units.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg

from lib.geometry import BodyTwist, Pose2, se2_exp, wrap_angle

FACTOR_KINDS = ("prior", "scan_match", "odometry", "velocity", "loop_closure")
ROBUST_KINDS = ("scan_match", "loop_closure")


@dataclass
class Node:
	index: int
	stamp: float
	pose: Pose2
	scan: object = None
	odometry: Pose2 | None = None


@dataclass(frozen=True)
class Factor:
	kind: str
	first: int
	second: int | None
	measurement: Pose2
	information: np.ndarray


@dataclass
class OptimizationResult:
	iterations: int = 0
	initial_cost: float = 0.0
	final_cost: float = 0.0
	step_norm: float = 0.0
	converged: bool = True
	# cost after each accepted step, starting with the initial cost
	costs: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class GraphConfig:
	velocity_sigma_linear: float = 0.05
	velocity_sigma_angular: float = 0.05
	odometry_sigma_xy: float = 0.1
	odometry_sigma_theta: float = 0.05
	scan_sigma_xy: float = 0.05
	scan_sigma_theta: float = np.radians(1.0)
	prior_information: float = 1e6
	huber_delta: float = 1.0
	max_iterations: int = 50
	step_tolerance: float = 1e-6


class PoseGraph2D:
	class Error(Exception):
		pass

	def __init__(self, huber_delta: float = 1.0):
		self.nodes: list[Node] = []
		self.factors: list[Factor] = []
		self.huber_delta = huber_delta
		self.last_result = OptimizationResult()

	def __len__(self):
		return len(self.nodes)

	def add_node(self, stamp: float, pose: Pose2, scan=None, odometry: Pose2 | None = None) -> int:
		if self.nodes and stamp < self.nodes[-1].stamp:
			raise PoseGraph2D.Error("node stamps must be non-decreasing")
		index = len(self.nodes)
		self.nodes.append(Node(index, stamp, pose, scan, odometry))
		return index

	def add_factor(self, kind: str, first: int, second: int | None, measurement: Pose2, information) -> Factor:
		if kind not in FACTOR_KINDS:
			raise PoseGraph2D.Error(f"unknown factor kind '{kind}'")
		information = np.asarray(information, dtype=float)
		if information.shape != (3, 3) or not np.allclose(information, information.T):
			raise PoseGraph2D.Error("information matrix must be symmetric 3x3")
		try:
			np.linalg.cholesky(information)
		except np.linalg.LinAlgError:
			raise PoseGraph2D.Error("information matrix must be positive definite")
		referenced = [first] if second is None else [first, second]
		if any(not 0 <= index < len(self.nodes) for index in referenced):
			raise PoseGraph2D.Error(f"factor references missing node in {referenced}")
		if (kind == "prior") != (second is None):
			raise PoseGraph2D.Error("only prior factors are unary")
		if kind == "velocity" and second != first + 1:
			raise PoseGraph2D.Error("velocity factors connect temporally consecutive nodes only")
		factor = Factor(kind, first, second, measurement, information)
		self.factors.append(factor)
		return factor

	def add_prior(self, index: int, pose: Pose2, information):
		return self.add_factor("prior", index, None, pose, information)

	def incident_factors(self, index: int) -> list[Factor]:
		return [f for f in self.factors if f.first == index or f.second == index]

	def poses(self) -> np.ndarray:
		return np.array([node.pose.as_array() for node in self.nodes]).reshape(-1, 3)

	def set_poses(self, values: np.ndarray):
		for node, row in zip(self.nodes, values):
			node.pose = Pose2.from_array(row)

	def factor_residual(self, factor: Factor) -> float:
		"""whitened residual norm sqrt(e^T W e) at the current estimate"""
		error, _, _ = _errors_and_jacobians([factor], self.poses())
		return float(np.sqrt(error[0] @ factor.information @ error[0]))


def _errors_and_jacobians(factors: list[Factor], x: np.ndarray):
	count = len(factors)
	errors = np.zeros((count, 3))
	jac_first = np.zeros((count, 3, 3))
	jac_second = np.zeros((count, 3, 3))
	if count == 0:
		return errors, jac_first, jac_second

	first = np.array([f.first for f in factors])
	second = np.array([f.first if f.second is None else f.second for f in factors])
	unary = np.array([f.second is None for f in factors])
	z = np.array([f.measurement.as_array() for f in factors])

	xi, xj = x[first], x[second]
	d = xj[:, :2] - xi[:, :2]
	ci, si = np.cos(xi[:, 2]), np.sin(xi[:, 2])
	cz, sz = np.cos(z[:, 2]), np.sin(z[:, 2])
	local = np.column_stack([ci * d[:, 0] + si * d[:, 1], -si * d[:, 0] + ci * d[:, 1]])
	g = local - z[:, :2]
	errors[:, 0] = cz * g[:, 0] + sz * g[:, 1]
	errors[:, 1] = -sz * g[:, 0] + cz * g[:, 1]
	errors[:, 2] = wrap_angle(xj[:, 2] - xi[:, 2] - z[:, 2])

	phi = xi[:, 2] + z[:, 2]
	cp, sp_ = np.cos(phi), np.sin(phi)
	rotation = np.stack([np.stack([cp, sp_], axis=-1), np.stack([-sp_, cp], axis=-1)], axis=1)
	dlocal = np.column_stack([-si * d[:, 0] + ci * d[:, 1], -ci * d[:, 0] - si * d[:, 1]])
	jac_first[:, :2, :2] = -rotation
	jac_first[:, 0, 2] = cz * dlocal[:, 0] + sz * dlocal[:, 1]
	jac_first[:, 1, 2] = -sz * dlocal[:, 0] + cz * dlocal[:, 1]
	jac_first[:, 2, 2] = -1.0
	jac_second[:, :2, :2] = rotation
	jac_second[:, 2, 2] = 1.0

	if unary.any():
		xu = x[first[unary]]
		errors[unary, :2] = xu[:, :2] - z[unary, :2]
		errors[unary, 2] = wrap_angle(xu[:, 2] - z[unary, 2])
		jac_first[unary] = np.eye(3)
		jac_second[unary] = 0.0
	return errors, jac_first, jac_second


def _robust_weights(factors, errors, delta):
	information = np.array([f.information for f in factors]).reshape(-1, 3, 3)
	squared = np.einsum("ki,kij,kj->k", errors, information, errors)
	norm = np.sqrt(squared)
	robust = np.array([f.kind in ROBUST_KINDS for f in factors], dtype=bool)
	weights = np.ones(len(factors))
	outlier = robust & (norm > delta)
	weights[outlier] = delta / norm[outlier]
	cost = np.where(outlier, 2.0 * delta * norm - delta ** 2, squared)
	return information, weights, 0.5 * float(np.sum(cost))


def total_cost(graph: PoseGraph2D, x: np.ndarray | None = None) -> float:
	x = graph.poses() if x is None else x
	errors, _, _ = _errors_and_jacobians(graph.factors, x)
	return _robust_weights(graph.factors, errors, graph.huber_delta)[2]


def _normal_equations(graph: PoseGraph2D, x: np.ndarray):
	factors = graph.factors
	errors, jac_first, jac_second = _errors_and_jacobians(factors, x)
	information, weights, cost = _robust_weights(factors, errors, graph.huber_delta)
	weighted = information * weights[:, None, None]

	first = np.array([f.first for f in factors])
	second = np.array([f.first if f.second is None else f.second for f in factors])
	unary = np.array([f.second is None for f in factors])

	size = 3 * len(graph.nodes)
	rows, cols, values = [], [], []
	gradient = np.zeros(size)
	blocks = (
		(first, first, jac_first, jac_first),
		(first, second, jac_first, jac_second),
		(second, first, jac_second, jac_first),
		(second, second, jac_second, jac_second),
	)
	offsets = np.arange(3)
	for row_nodes, col_nodes, left, right in blocks:
		block = np.einsum("kai,kab,kbj->kij", left, weighted, right)
		row_index = 3 * row_nodes[:, None, None] + offsets[None, :, None]
		col_index = 3 * col_nodes[:, None, None] + offsets[None, None, :]
		rows.append(np.broadcast_to(row_index, block.shape).ravel())
		cols.append(np.broadcast_to(col_index, block.shape).ravel())
		values.append(block.ravel())
	for nodes, jacobian in ((first, jac_first), (second, jac_second)):
		contribution = np.einsum("kai,kab,kb->ki", jacobian, weighted, errors)
		if nodes is second:
			contribution[unary] = 0.0
		np.add.at(gradient, (3 * nodes[:, None] + offsets[None, :]).ravel(), contribution.ravel())

	hessian = sp.coo_matrix(
		(np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
	).tocsc()
	return hessian, gradient, cost


def optimize(graph: PoseGraph2D, max_iterations: int = 50, step_tolerance: float = 1e-6) -> PoseGraph2D:
	"""Levenberg-Marquardt over all node poses; the graph's poses are updated in place"""
	if not any(f.kind == "prior" for f in graph.factors):
		raise PoseGraph2D.Error("graph needs a gauge-fixing prior")
	if not graph.nodes:
		return graph
	connected = set()
	for factor in graph.factors:
		connected.add(factor.first)
		if factor.second is not None:
			connected.add(factor.second)
	if len(connected) != len(graph.nodes):
		raise PoseGraph2D.Error("every node needs at least one factor")

	x = graph.poses()
	hessian, gradient, cost = _normal_equations(graph, x)
	result = OptimizationResult(initial_cost=cost, final_cost=cost, converged=False, costs=[cost])
	damping = 1e-4
	for iteration in range(1, max_iterations + 1):
		result.iterations = iteration
		diagonal = hessian.diagonal()
		damped = hessian + sp.diags(damping * diagonal)
		step = scipy.sparse.linalg.spsolve(damped.tocsc(), -gradient)
		step_norm = float(np.linalg.norm(step)) if np.all(np.isfinite(step)) else np.inf
		result.step_norm = step_norm
		if step_norm < step_tolerance:
			result.converged = True
			break
		candidate = x + step.reshape(-1, 3)
		candidate[:, 2] = wrap_angle(candidate[:, 2])
		candidate_cost = total_cost(graph, candidate) if np.isfinite(step_norm) else np.inf
		if candidate_cost < cost:
			x, cost = candidate, candidate_cost
			hessian, gradient, cost = _normal_equations(graph, x)
			result.costs.append(cost)
			damping = max(damping / 10.0, 1e-7)
		else:
			if damping >= 1e5:
				# no descent left at maximum damping
				result.converged = True
				break
			damping = min(damping * 10.0, 1e5)
	result.final_cost = cost
	if not result.converged:
		logging.warning("pose graph optimization stopped after %d iterations without converging", result.iterations)
	graph.set_poses(x)
	graph.last_result = result
	return graph


def velocity_measurement(twist: BodyTwist, dt: float) -> Pose2:
	"""relative pose predicted by integrating the planar part of the twist over dt"""
	vx, vy, omega = twist.planar() * dt
	return se2_exp(vx, vy, omega)


def velocity_information(dt: float, config: GraphConfig) -> np.ndarray:
	linear = 1.0 / (config.velocity_sigma_linear ** 2 * dt)
	angular = 1.0 / (config.velocity_sigma_angular ** 2 * dt)
	return np.diag([linear, linear, angular])


def add_keyframe(
		graph: PoseGraph2D,
		pose_prior: Pose2,
		scan,
		twist: BodyTwist | None,
		dt: float,
		stamp: float = 0.0,
		match=None,
		odometry: Pose2 | None = None,
		config: GraphConfig | None = None,
		match_information=None,
) -> PoseGraph2D:
	"""
	Appends a node. The first node is anchored at the map origin; later nodes get a
	scan-match factor when `match` was accepted, an odometry factor from the odometry
	poses and, given a twist, a velocity factor predicting the relative pose.
	"""
	config = config if config is not None else GraphConfig()
	if dt <= 0:
		raise ValueError("dt must be positive")
	odometry = odometry if odometry is not None else pose_prior

	if not graph.nodes:
		index = graph.add_node(stamp, Pose2(), scan, odometry)
		graph.add_prior(index, Pose2(), config.prior_information * np.eye(3))
		return graph

	previous = graph.nodes[-1]
	accepted = match is not None and match.accepted
	initial = match.pose if accepted else pose_prior
	index = graph.add_node(stamp, initial, scan, odometry)

	if accepted:
		information = match_information
		if information is None:
			information = np.diag([
				1.0 / config.scan_sigma_xy ** 2, 1.0 / config.scan_sigma_xy ** 2, 1.0 / config.scan_sigma_theta ** 2
			])
		graph.add_factor("scan_match", previous.index, index, previous.pose.between(match.pose), information)

	odometry_information = np.diag([
		1.0 / config.odometry_sigma_xy ** 2, 1.0 / config.odometry_sigma_xy ** 2, 1.0 / config.odometry_sigma_theta ** 2
	])
	reference = previous.odometry if previous.odometry is not None else previous.pose
	graph.add_factor("odometry", previous.index, index, reference.between(odometry), odometry_information)

	if twist is not None:
		graph.add_factor("velocity", previous.index, index, velocity_measurement(twist, dt), velocity_information(dt, config))
	return graph
