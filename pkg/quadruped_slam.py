import argparse
import json
import logging
import os
import sys

import pydantic

from lib import file_formats, helper_functions, reporting
from lib.evaluation import Trajectory, evaluate_trajectory, map_coverage
from lib.geometry import Pose2
from lib.pipeline import (
	MissingArtifact,
	PipelineFailure,
	Scenario,
	ScenarioError,
	contact_trace,
	run_ablation,
	run_explore,
	run_map,
	run_navigate,
)
from lib.pipeline_variants import UnknownVariant, describe_variants
from lib.run_events import HandlerChain, StatusMessage

ERROR_CODES = {
	"INVALID_CONFIG": 2,
	"INVALID_VARIANT": 2,
	"MISSING_ARTIFACT": 3,
	"PIPELINE_FAILURE": 4,
	"EVALUATION_ERROR": 5,
}


class CliError(Exception):
	def __init__(self, code: str, message: str):
		super().__init__(message)
		self.code = code


def error_code(error: Exception) -> str:
	"""maps an exception escaping a subcommand to its error code"""
	if isinstance(error, CliError):
		return error.code
	if isinstance(error, UnknownVariant):
		return "INVALID_VARIANT"
	if isinstance(error, (pydantic.ValidationError, ScenarioError, ValueError)):
		return "INVALID_CONFIG"
	if isinstance(error, (MissingArtifact, FileNotFoundError)):
		return "MISSING_ARTIFACT"
	if isinstance(error, PipelineFailure):
		return "PIPELINE_FAILURE"
	if isinstance(error, Trajectory.Error):
		return "EVALUATION_ERROR"
	return "PIPELINE_FAILURE"


def error_line(code: str, error: Exception) -> str:
	message = " ".join(str(error).split()) or type(error).__name__
	return f"ERROR {code}: {message}"


def _seed_list(args: dict) -> list[int] | None:
	if args.get("seed") is not None:
		return [args["seed"]]
	if args.get("seeds"):
		return helper_functions.parse_seeds(args["seeds"])
	return None


def _scenario(args: dict) -> Scenario:
	return Scenario.load(args["config"], variant=args.get("variant"), seeds=_seed_list(args), output=args.get("out"))


def _event_handler(args: dict) -> HandlerChain:
	return HandlerChain() if args["quiet"] else HandlerChain(StatusMessage())


# ------- subcommands -------
def command_map(args: dict) -> int:
	scenario = _scenario(args)
	handler = _event_handler(args)
	for seed in scenario.config.seeds:
		run_map(scenario, seed, event_handler=handler)
	return 0


def command_ablate(args: dict) -> int:
	scenario = _scenario(args)
	reports, paths = run_ablation(scenario, scenario.config.seeds, args["workers"], event_handler=_event_handler(args))
	failed = [report for report in reports if report.status != "ok"]
	if failed:
		first = failed[0]
		raise CliError(
			"PIPELINE_FAILURE",
			f"{len(failed)} of {len(reports)} runs failed, first: {first.variant} seed {first.seed}: {first.error}",
		)
	print(f'Ablation table: {paths["table"]}')
	return 0


def command_navigate(args: dict) -> int:
	scenario = _scenario(args)
	handler = _event_handler(args)
	for seed in scenario.config.seeds:
		artifacts = run_navigate(scenario, seed, map_path=args["map"], event_handler=handler)
		print(f"Success rate seed {seed}: {artifacts.report.success_rate:.2f}")
	return 0


def command_explore(args: dict) -> int:
	scenario = _scenario(args)
	handler = _event_handler(args)
	for seed in scenario.config.seeds:
		artifacts = run_explore(scenario, seed, event_handler=handler)
		print(f"Coverage seed {seed}: {artifacts.report.coverage:.3f}")
	return 0


def evaluate_files(
		estimate_path: str,
		groundtruth_path: str,
		map_path: str | None = None,
		groundtruth_map_path: str | None = None,
		rotation_weight: float = 1.0,
		max_gap: float = 0.02,
		align: bool = True,
) -> dict:
	"""metrics of a stored run; coverage only when both maps are given"""
	estimate = file_formats.read_tum(estimate_path)
	ground_truth = file_formats.read_tum(groundtruth_path)
	result = evaluate_trajectory(estimate, ground_truth, rotation_weight=rotation_weight, max_gap=max_gap, align=align)
	if map_path is not None and groundtruth_map_path is not None:
		grid = file_formats.read_map(map_path)
		ground_truth_grid = file_formats.read_map(groundtruth_map_path)
		transform = Pose2.from_array(result["alignment"]).compose(file_formats.map_anchor(map_path))
		try:
			result["coverage"] = map_coverage(grid, ground_truth_grid, transform)
		except ValueError as error:
			raise CliError("EVALUATION_ERROR", str(error))
	return result


def command_eval(args: dict) -> int:
	options = dict(rotation_weight=args["rotation_weight"], max_gap=args["max_gap"], align=not args["no_align"])
	if args["reports"] is not None:
		if not os.path.isdir(args["reports"]):
			raise MissingArtifact(f"report directory not found: {args['reports']}")
		reports = reporting.load_reports(args["reports"])
		if not reports:
			raise MissingArtifact(f"no metrics.json below {args['reports']}")
		directory = args["out"] if args["out"] is not None else os.path.join(args["reports"], "ablation")
		paths = reporting.write_ablation_report(reports, directory, args["rotation_weight"])
		print(f'Ablation table: {paths["table"]}')
		return 0

	if args["run"] is not None:
		run = args["run"]
		if not os.path.isdir(run):
			raise MissingArtifact(f"run directory not found: {run}")
		paths = [
			os.path.join(run, "trajectory_estimate.tum"),
			os.path.join(run, "trajectory_groundtruth.tum"),
			os.path.join(run, "map.yaml"),
			os.path.join(run, "groundtruth_map.yaml"),
		]
	elif args["estimate"] is not None and args["groundtruth"] is not None:
		paths = [args["estimate"], args["groundtruth"], args["map"], args["groundtruth_map"]]
	else:
		raise CliError("INVALID_CONFIG", "eval needs --run, --reports or both --estimate and --groundtruth")

	metrics = evaluate_files(*paths, **options)
	text = json.dumps(metrics, indent=2)
	if args["out"] is not None:
		os.makedirs(os.path.dirname(os.path.abspath(args["out"])), exist_ok=True)
		with open(args["out"], "w", encoding="utf-8") as file:
			file.write(text + "\n")
	print(text)
	return 0


def _run_directories(root: str) -> list[str]:
	directories = []
	for path, dirs, files in sorted(os.walk(root)):
		dirs.sort()
		if "trajectory_estimate.tum" in files and "trajectory_groundtruth.tum" in files:
			directories.append(path)
	return directories


def command_plot_export(args: dict) -> int:
	runs = args["runs"]
	if not os.path.isdir(runs):
		raise MissingArtifact(f"run directory not found: {runs}")
	os.makedirs(args["out"], exist_ok=True)

	trajectories = {}
	for directory in _run_directories(runs):
		label = os.path.relpath(directory, runs).replace(os.sep, "/")
		trajectories[f"{label}/estimate"] = file_formats.read_tum(os.path.join(directory, "trajectory_estimate.tum"))
		trajectories[f"{label}/groundtruth"] = file_formats.read_tum(os.path.join(directory, "trajectory_groundtruth.tum"))
	path = os.path.join(args["out"], "trajectories.csv")
	reporting.trajectories_frame(trajectories).to_csv(path, index=False, float_format="%.6f")
	print(f"Trajectories: {path}")

	path = os.path.join(args["out"], "metric_bars.csv")
	bars = reporting.metric_bars(reporting.aggregate(reporting.load_reports(runs)))
	bars.to_csv(path, index=False, float_format="%.6f")
	print(f"Metric bars: {path}")

	if args["config"] is not None:
		scenario = Scenario.load(args["config"])
		seed = args["seed"] if args["seed"] is not None else scenario.config.seeds[0]
		samples = contact_trace(scenario, seed, args["trace_duration"])
		path = os.path.join(args["out"], "contact_trace.csv")
		file_formats.write_contact_csv(samples, path, scenario.model.leg_names)
		print(f"Contact trace: {path}")
	return 0


# ------- argument parsing -------
def _add_run_arguments(parser, seeds: bool = False):
	parser.add_argument("-c", "--config", type=str, required=True, help="scenario config (json)")
	parser.add_argument(
		"-v", "--variant", type=str, default=None,
		help=f"pipeline variant - {describe_variants()}",
	)
	if seeds:
		parser.add_argument("-s", "--seeds", type=str, default=None, help="seed list: '1..5' or '1,2,7'")
	else:
		parser.add_argument("-s", "--seed", type=int, default=None, help="single seed, overrides the config seeds")
	parser.add_argument("-o", "--out", type=str, default=None, help="output root directory")


def build_parser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(
		prog="quadruped_slam",
		description="Simulate, map, localize and evaluate a trotting quadruped in synthetic worlds.",
	)
	parser.add_argument("--verbose", action="store_true", help="log progress details")
	parser.add_argument("-q", "--quiet", action="store_true", help="no status lines or progress bars")
	commands = parser.add_subparsers(dest="command", required=True)

	command = commands.add_parser("map", help="one mapping run per seed")
	_add_run_arguments(command)
	command.set_defaults(handler=command_map)

	command = commands.add_parser("ablate", help="every variant x seed, then the ablation report")
	_add_run_arguments(command, seeds=True)
	command.add_argument("-w", "--workers", type=int, default=1, help="parallel worker processes")
	command.set_defaults(handler=command_ablate)

	command = commands.add_parser("navigate", help="localize on a stored map and visit the goals")
	_add_run_arguments(command)
	command.add_argument("-m", "--map", type=str, default=None, help="map.yaml of an earlier mapping run")
	command.set_defaults(handler=command_navigate)

	command = commands.add_parser("explore", help="frontier exploration from the start pose")
	_add_run_arguments(command)
	command.set_defaults(handler=command_explore)

	command = commands.add_parser("eval", help="metrics of stored trajectories, maps or run reports")
	command.add_argument("--run", type=str, default=None, help="run directory")
	command.add_argument("--estimate", type=str, default=None, help="estimated trajectory (TUM)")
	command.add_argument("--groundtruth", type=str, default=None, help="ground-truth trajectory (TUM)")
	command.add_argument("--map", type=str, default=None, help="estimated map.yaml")
	command.add_argument("--groundtruth-map", type=str, default=None, help="ground-truth map yaml")
	command.add_argument("--reports", type=str, default=None, help="aggregate every metrics.json below this directory")
	command.add_argument("--rotation-weight", type=float, default=1.0, help="metres per radian in APE")
	command.add_argument("--max-gap", type=float, default=0.02, help="timestamp association gap [s]")
	command.add_argument("--no-align", action="store_true", help="compare without rigid alignment")
	command.add_argument("-o", "--out", type=str, default=None, help="output file (or report directory)")
	command.set_defaults(handler=command_eval)

	command = commands.add_parser("plot-export", help="plot-ready CSVs from finished runs")
	command.add_argument("--runs", type=str, required=True, help="root of the run directories")
	command.add_argument("-o", "--out", type=str, required=True, help="directory for the CSV files")
	command.add_argument("-c", "--config", type=str, default=None, help="scenario for the contact force trace")
	command.add_argument("-s", "--seed", type=int, default=None, help="seed of the contact force trace")
	command.add_argument("--trace-duration", type=float, default=10.0, help="simulated seconds of contact trace")
	command.set_defaults(handler=command_plot_export)
	return parser


def main(argv=None) -> int:
	parser = build_parser()
	args = dict(parser.parse_args(argv).__dict__)
	logging.basicConfig(
		level=logging.INFO if args["verbose"] else logging.WARNING,
		format="%(levelname)s %(name)s: %(message)s",
	)
	try:
		return args["handler"](args)
	except Exception as error:
		code = error_code(error)
		if args["verbose"]:
			logging.exception("%s failed", args["command"])
		print(error_line(code, error), file=sys.stderr)
		return ERROR_CODES[code]


if __name__ == "__main__":
	sys.exit(main())
