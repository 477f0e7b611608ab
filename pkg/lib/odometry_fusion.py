"""
Odometry multiplexing: the visual source drives the output while it tracks; while it is
lost the output is dead-reckoned from the last good pose with the leg twist. When the
visual source has tracked again for a few frames it is re-seeded at the dead-reckoned
pose and takes the output back.
"""
from dataclasses import dataclass, replace

from lib.geometry import Pose3
from lib.leg_odometry import TwistEstimate, integrate_pose

TRACKING = "tracking"
LOST = "lost"
VIO = "vio"
LEG = "leg"
DEFAULT_HYSTERESIS_FRAMES = 3


@dataclass(frozen=True)
class VioFrame:
	stamp: float
	pose: Pose3
	correspondences: int


def detect_loss(frame: VioFrame | int, min_correspondences: int = 1) -> str:
	"""lost iff fewer than `min_correspondences` features were matched between frames"""
	count = frame.correspondences if isinstance(frame, VioFrame) else int(frame)
	return LOST if count < min_correspondences else TRACKING


@dataclass(frozen=True)
class OdometrySource:
	source_id: str
	pose: Pose3
	stamp: float
	health: str = TRACKING

	def ingest(self, frame: VioFrame, min_correspondences: int = 1) -> "OdometrySource":
		if frame.stamp < self.stamp:
			raise ValueError(f"source '{self.source_id}' received stamp {frame.stamp} before {self.stamp}")
		return OdometrySource(self.source_id, frame.pose, frame.stamp, detect_loss(frame, min_correspondences))


@dataclass(frozen=True)
class FusedOdometry:
	pose: Pose3
	active_source: str = VIO
	recovery_count: int = 0
	stamp: float = 0.0
	degraded: bool = False
	tracking_streak: int = 0
	reseed: Pose3 | None = None

	@classmethod
	def start(cls, pose: Pose3, stamp: float = 0.0) -> "FusedOdometry":
		return cls(pose, VIO, 0, stamp, False, DEFAULT_HYSTERESIS_FRAMES)


def step(
		fused: FusedOdometry,
		vio: OdometrySource,
		leg: TwistEstimate | None,
		dt: float,
		hysteresis_frames: int = DEFAULT_HYSTERESIS_FRAMES,
) -> FusedOdometry:
	"""
	One multiplexer step. A non-None `reseed` on the result asks the caller to re-seed
	the visual source at that pose before its next frame.
	"""
	if dt <= 0:
		raise ValueError("dt must be positive")
	stamp = fused.stamp + dt

	if vio.health == TRACKING:
		streak = fused.tracking_streak + 1
		if fused.active_source == VIO:
			return FusedOdometry(vio.pose, VIO, fused.recovery_count, stamp, False, streak)
		if streak >= hysteresis_frames:
			bridged = _dead_reckon(fused, leg, dt)
			return FusedOdometry(
				bridged.pose, VIO, fused.recovery_count + 1, stamp, bridged.degraded, streak, reseed=bridged.pose
			)
		return replace(_dead_reckon(fused, leg, dt), stamp=stamp, tracking_streak=streak)

	return replace(_dead_reckon(fused, leg, dt), stamp=stamp, tracking_streak=0)


def _dead_reckon(fused: FusedOdometry, leg: TwistEstimate | None, dt: float) -> FusedOdometry:
	# flight-phase estimates carry the held twist and stay usable
	if leg is None or (leg.degraded and leg.contact_count > 0):
		return replace(fused, active_source=LEG, degraded=True, reseed=None)
	return replace(fused, pose=integrate_pose(fused.pose, leg.twist, dt), active_source=LEG, degraded=False, reseed=None)
