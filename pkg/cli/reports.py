"""
Report writers - JSON summaries, CSV trajectories and spreadsheet exports.

Floats are rounded to 12 decimal places before serialisation so repeated runs
produce byte-identical files.
"""
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from network.models import ProblemInstance, Trajectory
from utils.formatters import format_edge, round_for_report

logger = logging.getLogger(__name__)

HEADER_COLOR = "0d7377"


def to_jsonable(value):
    """numpy arrays, numpy scalars and tuples to plain rounded JSON values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return None
        return round_for_report(value)
    return value


def render_json(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(report: dict, path: Optional[str] = None) -> str:
    """Write a report to path, or to stdout when no path is given."""
    text = render_json(report)
    if path:
        Path(path).write_text(text, encoding="utf-8")
        logger.info("Report written to %s", path)
    else:
        sys.stdout.write(text)
    return text


def trajectory_header(instance: ProblemInstance) -> list:
    n, m = instance.n, instance.m
    return (["t"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{k + 1}" for k in range(m)]
            + ["stage_cost", "cumulative_cost"])


def trajectory_rows(trajectory: Trajectory, instance: ProblemInstance) -> list:
    """One row per step plus a final row for x(T) whose trailing column is the tail."""
    rows = []
    cumulative = 0.0
    for t, (x, u, cost) in enumerate(zip(trajectory.states, trajectory.controls, trajectory.stage_costs)):
        cumulative += cost
        rows.append([t] + [round_for_report(v) for v in x] + [round_for_report(v) for v in u]
                    + [round_for_report(cost), round_for_report(cumulative)])
    tail = "" if trajectory.tail is None else round_for_report(trajectory.tail)
    rows.append([trajectory.steps] + [round_for_report(v) for v in trajectory.final_state]
                + [""] * instance.m + ["", round_for_report(cumulative), tail])
    return rows


def write_trajectory_csv(trajectory: Trajectory, instance: ProblemInstance, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(trajectory_header(instance))
        writer.writerows(trajectory_rows(trajectory, instance))
    logger.info("Trajectory written to %s (%d steps)", path, trajectory.steps)


def export_trajectory_xlsx(trajectory: Trajectory, instance: ProblemInstance, path):
    """Spreadsheet with a 'Trajectory' sheet (CSV layout) and a 'States' sheet (one column per vertex)."""
    try:
        import openpyxl
        from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
    except ImportError:
        return False, "Module openpyxl is not installed. Install it with: pip install openpyxl"

    wb = openpyxl.Workbook()
    header_fill = PatternFill(start_color=HEADER_COLOR, end_color=HEADER_COLOR, fill_type="solid")
    header_font = Font(bold=True, color="FFFFFF", size=12)
    border = Border(left=Side(style='thin'), right=Side(style='thin'),
                    top=Side(style='thin'), bottom=Side(style='thin'))

    def header_row(ws, row, headers):
        for col, title in enumerate(headers, start=1):
            cell = ws.cell(row=row, column=col, value=title)
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = Alignment(horizontal='center')
            cell.border = border

    ws = wb.active
    ws.title = "Trajectory"
    ws['A1'] = f"CLOSED LOOP : {trajectory.controller} on {instance.name or 'model'}"
    ws['A1'].font = Font(bold=True, size=16, color=HEADER_COLOR)
    headers = trajectory_header(instance) + ["tail"]
    header_row(ws, 3, headers)
    for offset, values in enumerate(trajectory_rows(trajectory, instance)):
        for col, value in enumerate(values, start=1):
            ws.cell(row=4 + offset, column=col, value=None if value == "" else value).border = border
    ws.column_dimensions['A'].width = 8

    states = wb.create_sheet("States")
    graph = instance.graph
    header_row(states, 1, ["t"] + [f"vertex {i + 1}" for i in range(instance.n)])
    for t, x in enumerate(trajectory.states):
        states.cell(row=2 + t, column=1, value=t)
        for i, v in enumerate(x):
            states.cell(row=2 + t, column=2 + i, value=round_for_report(v)).number_format = '0.0000'

    edges = wb.create_sheet("Edges")
    header_row(edges, 1, ["edge", "r"] + (["u_max"] if instance.bounds is not None else []))
    for k in range(graph.m):
        edges.cell(row=2 + k, column=1, value=format_edge(graph.tails[k], graph.heads[k], graph.n))
        edges.cell(row=2 + k, column=2, value=float(instance.costs.r[k]))
        if instance.bounds is not None:
            edges.cell(row=2 + k, column=3, value=float(instance.bounds.u_max[k]))

    wb.save(path)
    return True, f"Spreadsheet written: {path}"
