"""
Ablation aggregation and report rendering (CSV, JSON, Excel).
"""
import json
import os

import numpy as np
import openpyxl
import pandas
from openpyxl.styles import Alignment, Font
from openpyxl.utils import get_column_letter
from pandas import DataFrame

from lib.pipeline_variants import VariantRegistry
from schema import metric_report

EXCEL_MIN_COLUMN_CHARS = 12
EXCEL_MAX_COLUMN_CHARS = 40
METRICS = ["ate", "are", "ape", "rpe_2m", "rpe_5m", "rpe_10m", "coverage", "success_rate"]
# metrics where a larger value is better
HIGHER_IS_BETTER = {"coverage", "success_rate"}

bold_font = Font(bold=True)
cell_alignment_center = Alignment(horizontal="center")


def report_rows(reports: list[metric_report.Model]) -> DataFrame:
	"""one row per successful run with one column per metric"""
	rows = []
	for report in reports:
		if report.status != "ok":
			continue
		row = {"world": report.world, "variant": report.variant, "seed": report.seed}
		row.update({"ate": report.ate, "are": report.are, "ape": report.ape})
		row.update({f"rpe_{key}": value for key, value in report.rpe.items()})
		row.update({"coverage": report.coverage, "success_rate": report.success_rate})
		rows.append(row)
	return DataFrame(rows, columns=["world", "variant", "seed", *METRICS])


def aggregate(reports: list[metric_report.Model]) -> DataFrame:
	"""mean and population std per (world, variant, metric) over the runs that report the metric"""
	table = report_rows(reports)
	long = table.melt(id_vars=["world", "variant", "seed"], value_vars=METRICS, var_name="metric").dropna()
	if long.empty:
		return DataFrame(columns=["world", "variant", "metric", "mean", "std", "runs"])
	long["value"] = long["value"].astype(float)
	grouped = long.groupby(["world", "variant", "metric"], sort=False)["value"]
	result = grouped.agg(mean="mean", std=lambda values: float(np.std(values, ddof=0)), runs="count").reset_index()
	variant_order = {name: index for index, name in enumerate(VariantRegistry.names())}
	metric_order = {name: index for index, name in enumerate(METRICS)}
	result["_variant"] = result["variant"].map(variant_order).fillna(len(variant_order))
	result["_metric"] = result["metric"].map(metric_order)
	result = result.sort_values(by=["world", "_variant", "_metric"]).drop(columns=["_variant", "_metric"])
	result["runs"] = result["runs"].astype(int)
	return result.reset_index(drop=True)


def ablation_table(aggregated: DataFrame) -> DataFrame:
	"""rows = metrics, columns = (world, variant), cells 'mean ± std'"""
	if aggregated.empty:
		return DataFrame()
	cells = aggregated.assign(cell=[f"{m:.3f} ± {s:.3f}" for m, s in zip(aggregated["mean"], aggregated["std"])])
	table = cells.pivot(index="metric", columns=["world", "variant"], values="cell")
	metrics = [metric for metric in METRICS if metric in table.index]
	return table.loc[metrics]


def best_variants(aggregated: DataFrame) -> dict[tuple[str, str], str]:
	"""(world, metric) -> variant with the best mean"""
	best = {}
	for (world, metric), group in aggregated.groupby(["world", "metric"]):
		index = group["mean"].idxmax() if metric in HIGHER_IS_BETTER else group["mean"].idxmin()
		best[(world, metric)] = group.loc[index, "variant"]
	return best


def autofit_column_widths(ws, min_column_width, max_column_width):
	for i, column_cells in enumerate(ws.columns, 1):
		lengths = [len(str(cell.value)) for cell in column_cells if cell.value is not None]
		longest = max(lengths, default=0)
		ws.column_dimensions[get_column_letter(i)].width = min(max_column_width + 2, max(longest + 2, min_column_width))


def write_workbook(aggregated: DataFrame, path: str):
	"""ablation sheet: metric rows, one column group per world, best mean per row in bold"""
	workbook = openpyxl.Workbook()
	sheet = workbook.active
	sheet.title = "Ablation"
	sheet.cell(row=2, column=1, value="metric").font = bold_font
	best = best_variants(aggregated)
	worlds = list(dict.fromkeys(aggregated["world"]))
	variants = [name for name in VariantRegistry.names() if name in set(aggregated["variant"])]
	metrics = [metric for metric in METRICS if metric in set(aggregated["metric"])]

	column = 2
	for world in worlds:
		sheet.cell(row=1, column=column, value=world).font = bold_font
		sheet.merge_cells(start_row=1, start_column=column, end_row=1, end_column=column + len(variants) - 1)
		sheet.cell(row=1, column=column).alignment = cell_alignment_center
		world_rows = aggregated[aggregated["world"] == world]
		for offset, variant in enumerate(variants):
			sheet.cell(row=2, column=column + offset, value=variant).font = bold_font
			for row, metric in enumerate(metrics, 3):
				match = world_rows[(world_rows["variant"] == variant) & (world_rows["metric"] == metric)]
				if match.empty:
					continue
				mean, std = float(match["mean"].iloc[0]), float(match["std"].iloc[0])
				cell = sheet.cell(row=row, column=column + offset, value=f"{mean:.3f} ± {std:.3f}")
				cell.alignment = cell_alignment_center
				if best.get((world, metric)) == variant:
					cell.font = bold_font
		column += len(variants)

	for row, metric in enumerate(metrics, 3):
		sheet.cell(row=row, column=1, value=metric)
	autofit_column_widths(sheet, min_column_width=EXCEL_MIN_COLUMN_CHARS, max_column_width=EXCEL_MAX_COLUMN_CHARS)
	workbook.save(path)


def write_ablation_report(reports: list[metric_report.Model], directory: str, rotation_weight: float = 1.0) -> dict:
	"""writes ablation.csv, ablation_table.csv, ablation.json and ablation.xlsx; returns their paths"""
	os.makedirs(directory, exist_ok=True)
	aggregated = aggregate(reports)
	paths = {
		"csv": os.path.join(directory, "ablation.csv"),
		"table": os.path.join(directory, "ablation_table.csv"),
		"json": os.path.join(directory, "ablation.json"),
		"xlsx": os.path.join(directory, "ablation.xlsx"),
	}
	aggregated.to_csv(paths["csv"], index=False, float_format="%.6f")
	ablation_table(aggregated).to_csv(paths["table"])
	document = metric_report.AblationReport(
		rotation_weight=rotation_weight,
		runs=reports,
		aggregate=[metric_report.AggregateRow(**row) for row in aggregated.to_dict(orient="records")],
	)
	with open(paths["json"], "w", encoding="utf-8") as file:
		json.dump(document.model_dump(), file, indent=2)
	if not aggregated.empty:
		write_workbook(aggregated, paths["xlsx"])
	return paths


def metric_bars(aggregated: DataFrame) -> DataFrame:
	"""plot-ready bar data: one row per (world, variant, metric) with error bar bounds"""
	bars = aggregated.copy()
	bars["lower"] = (bars["mean"] - bars["std"]).clip(lower=0.0)
	bars["upper"] = bars["mean"] + bars["std"]
	return bars


def load_reports(directory: str) -> list[metric_report.Model]:
	"""every metrics.json below `directory`, in sorted path order"""
	reports = []
	for root, dirs, files in sorted(os.walk(directory)):
		dirs.sort()
		if "metrics.json" in files:
			reports.append(metric_report.from_file(os.path.join(root, "metrics.json")))
	return reports


def trajectories_frame(samples: dict[str, "object"]) -> DataFrame:
	"""long-format trajectories for plotting: label -> Trajectory"""
	frames = []
	for label, trajectory in samples.items():
		planar = trajectory.planar()
		frames.append(pandas.DataFrame({
			"trajectory": label,
			"stamp": trajectory.stamps,
			"x": planar[:, 0],
			"y": planar[:, 1],
			"heading": planar[:, 2],
		}))
	if not frames:
		return DataFrame(columns=["trajectory", "stamp", "x", "y", "heading"])
	return pandas.concat(frames, ignore_index=True)
