import json
import logging
import os

import numpy as np
from tqdm import tqdm


def is_method_overridden(obj, method_name, base_class):
	"""whether type(obj) defines its own `method_name` instead of inheriting the no-op from `base_class`"""
	sub_method = getattr(obj.__class__, method_name, None)
	base_method = getattr(base_class, method_name, None)

	if sub_method is None or base_method is None:
		return False

	sub_func = getattr(sub_method, "__func__", sub_method)
	base_func = getattr(base_method, "__func__", base_method)
	return sub_func is not base_func


class PipelineEventHandler:
	"""no-op for every pipeline event; a HandlerChain only calls the events a subclass overrides"""

	def run_started(self, kwargs):
		pass

	def stage_invoked(self, kwargs):
		pass

	def simulation_started(self, kwargs):
		pass

	def simulation_progress(self, kwargs):
		pass

	def keyframe_added(self, kwargs):
		pass

	def scan_match_rejected(self, kwargs):
		pass

	def loop_closure_added(self, kwargs):
		pass

	def optimization_warning(self, kwargs):
		pass

	def vio_lost(self, kwargs):
		pass

	def vio_recovered(self, kwargs):
		pass

	def localization_degraded(self, kwargs):
		pass

	def goal_started(self, kwargs):
		pass

	def goal_reached(self, kwargs):
		pass

	def goal_failed(self, kwargs):
		pass

	def frontier_selected(self, kwargs):
		pass

	def exploration_complete(self, kwargs):
		pass

	def artifacts_written(self, kwargs):
		pass

	def run_failed(self, kwargs):
		pass

	def run_complete(self, kwargs):
		pass

	def batch_started(self, kwargs):
		pass

	def batch_run_complete(self, kwargs):
		pass

	def batch_complete(self, kwargs):
		pass


EVENT_NAMES = tuple(name for name in vars(PipelineEventHandler) if not name.startswith("_"))


class HandlerChain(PipelineEventHandler):
	"""
	Fans each pipeline event out to the wrapped handlers in order, skipping handlers that keep the no-op.
	Attribute lookup is intercepted: only `handlers`, `Abort` and event names resolve on a chain.
	"""

	class Abort(Exception):
		pass

	def __init__(self, *handlers):
		self.handlers = handlers

	def __getattribute__(self, name: str):
		def _call_handlers(kwargs):
			handlers = object.__getattribute__(self, "handlers")
			result = None
			for handler in handlers:
				if not is_method_overridden(handler, name, PipelineEventHandler):
					continue

				method = getattr(handler, name)
				try:
					call_result = method(kwargs)
					if call_result is not None:
						result = call_result
				except HandlerChain.Abort:
					break
			return result

		if name in ("Abort", "handlers"):
			return object.__getattribute__(self, name)

		return _call_handlers


def _jsonable(value):
	if hasattr(value, "as_array"):
		return [round(float(v), 6) for v in value.as_array()]
	if isinstance(value, np.generic):
		return value.item()
	if isinstance(value, np.ndarray):
		return value.tolist()
	return str(value)


class EventLog(PipelineEventHandler):
	"""one JSON line per event; every event method records itself"""

	def __init__(self, path: str):
		self.path = path
		os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
		self.file = open(path, "w", encoding="utf-8")
		self.counts = {}

	def record(self, event: str, kwargs: dict):
		entry = {"event": event}
		entry.update({key: value for key, value in kwargs.items() if not key.startswith("_")})
		self.file.write(json.dumps(entry, default=_jsonable, sort_keys=True) + "\n")
		self.counts[event] = self.counts.get(event, 0) + 1

	def close(self):
		if not self.file.closed:
			self.file.close()


def _recorder(event_name):
	def _record(self, kwargs):
		self.record(event_name, kwargs)

	_record.__name__ = event_name
	return _record


for _event in EVENT_NAMES:
	setattr(EventLog, _event, _recorder(_event))


def read_events(path: str) -> list[dict]:
	with open(path, encoding="utf-8") as file:
		return [json.loads(line) for line in file if line.strip()]


class StatusMessage(PipelineEventHandler):
	def __init__(self):
		self.progress_bar = None
		self.batch_bar = None

	def run_started(self, kwargs):
		print(f'\nRunning {kwargs["command"]} on {kwargs["world"]}: variant {kwargs["variant"]}, seed {kwargs["seed"]}')

	def simulation_started(self, kwargs):
		self.progress_bar = tqdm(
			total=kwargs["steps"],
			desc="Simulating",
			bar_format="{l_bar}{bar}",
		)

	def simulation_progress(self, kwargs):
		if self.progress_bar is not None:
			self.progress_bar.update(kwargs["steps"])

	def vio_lost(self, kwargs):
		logging.info("visual odometry lost at %.2f s", kwargs["stamp"])

	def goal_reached(self, kwargs):
		tqdm.write(f'Goal {kwargs["goal"]} reached after {kwargs["elapsed"]:.1f} s')

	def goal_failed(self, kwargs):
		tqdm.write(f'Goal {kwargs["goal"]} failed: {kwargs["reason"]}')

	def artifacts_written(self, kwargs):
		if self.progress_bar is not None:
			self.progress_bar.close()
			self.progress_bar = None
		print(f'Artifacts written to {kwargs["directory"]}')

	def run_failed(self, kwargs):
		if self.progress_bar is not None:
			self.progress_bar.close()
			self.progress_bar = None

	def batch_started(self, kwargs):
		print(f'Ablation batch: {len(kwargs["variants"])} variants x {len(kwargs["seeds"])} seeds')
		self.batch_bar = tqdm(total=kwargs["runs"], desc="Runs", bar_format="{l_bar}{bar}")

	def batch_run_complete(self, kwargs):
		if self.batch_bar is not None:
			self.batch_bar.update(1)

	def batch_complete(self, kwargs):
		if self.batch_bar is not None:
			self.batch_bar.close()
			self.batch_bar = None
		print(f'Report written to {kwargs["directory"]}')
