"""
Flat-file export of states, sweeps and homotopy traces, plus PNG profile plots.
"""
import csv
import logging
import math
import os
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from asymptotics import AsymptoticData, AuditReport
from graph_grid import GraphFunction
from phase_plane import BumpSolution
from spectral import HomotopyTrace
from sweep import SWEEP_COLUMNS, SweepResult

logger = logging.getLogger(__name__)

STATE_COLUMNS = ("edge", "kind", "index", "z", "x", "U", "phi")
TRACE_COLUMNS = ("label", "alpha", "n", "z", "n_plus", "nearest")
BUMP_COLUMNS = ("z", "u", "v")
PERIOD_COLUMNS = ("p", "q", "T_plus", "log_approx", "dT_dp", "dT_dq")
ASYM_COLUMNS = ("vertex", "p", "q1", "q2", "balance")
OFFSET_COLUMNS = ("edge", "offset", "flagged")
COLORS = ['#FF6B6B', '#4ECDC4', '#45B7D1', '#96CEB4', '#E9D985',
          '#D4A5A5', '#9DE0AD', '#FF9999', '#5D6D7E', '#F0A35E']


def format_number(value) -> str:
    """Fixed textual form for CSV cells: blanks for None, 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _header(lines: Dict[str, object]) -> List[str]:
    return [f"# {key}: {value}" for key, value in lines.items()]


def read_state_csv(path: str) -> Tuple[Dict[str, str], Dict[str, Tuple[np.ndarray, np.ndarray]]]:
    """Read a state file written by ResultExporter.write_state_csv.

    Returns:
        tuple: (header entries, {edge id: (z, U)})
    """
    meta: Dict[str, str] = {}
    columns: Dict[str, Tuple[List[float], List[float]]] = {}
    with open(path, newline="") as f:
        body = []
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            else:
                body.append(line)
    for record in csv.DictReader(body):
        z, u = columns.setdefault(record["edge"], ([], []))
        z.append(float(record["z"]))
        u.append(float(record["U"]))
    return meta, {edge: (np.array(z), np.array(u)) for edge, (z, u) in columns.items()}


def period_csv(p: float, q: float, value: float, dp: float, dq: float) -> List[str]:
    """One-row CSV of T_+(p, q), its logarithmic approximation and partials."""
    row = (p, q, value, -math.log((p + q) / 4.0), dp, dq)
    return [",".join(PERIOD_COLUMNS), ",".join(format_number(v) for v in row)]


def asym_csv(data: AsymptoticData, audit: Optional[AuditReport] = None) -> List[str]:
    """Vertex table of p, q1, q2 and relative balance, then the internal offsets.

    The audit verdict and its ratios go into '#' lines at the end.
    """
    lines = _header({"eps": format_number(data.eps)})
    lines.append(",".join(ASYM_COLUMNS))
    for vertex in data.p:
        lines.append(",".join([vertex, format_number(data.p[vertex]), format_number(data.q1[vertex]),
                               format_number(data.q2[vertex]),
                               format_number(data.relative_balance(vertex))]))
    if data.offsets:
        lines.append(",".join(OFFSET_COLUMNS))
        for edge_id, a in data.offsets.items():
            lines.append(",".join([edge_id, format_number(a),
                                   format_number(edge_id in data.flagged_offsets)]))
    if audit is not None:
        lines.append(f"# audit: {'pass' if audit.passed else 'fail'}")
        lines.extend(f"# ratio {entry.name}@{entry.where}={format_number(entry.ratio)}"
                     for entry in audit.entries)
    return lines


class ResultExporter:
    def __init__(self, output_dir: str):
        """Initialize the exporter.

        Args:
            output_dir: Directory receiving every file; created on first write
        """
        self._output_dir = output_dir

    @property
    def output_dir(self) -> str:
        return self._output_dir

    def _path(self, name: str) -> str:
        # absolute names bypass the output directory
        path = os.path.join(self._output_dir, name)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        return path

    def _write_lines(self, name: str, lines: Iterable[str]) -> str:
        path = self._path(name)
        with open(path, "w", newline="") as f:
            for line in lines:
                f.write(line + "\n")
        logger.info("Wrote %s", path)
        return path

    def write_state_csv(self, U: GraphFunction, name: str = "state.csv",
                        meta: Optional[Dict[str, object]] = None) -> str:
        """Write one row per grid point of every edge, vertex ends included.

        Columns are edge, kind, index, z (grid coordinate), x (physical
        coordinate), U (grid value) and phi (physical value). Header lines
        start with '#'.
        """
        grid = U.grid
        factor = grid.eps if grid.scaled else 1.0
        header = {"eps": format_number(grid.eps), "scaled": int(grid.scaled),
                  "h": format_number(grid.max_step)}
        header.update(meta or {})
        lines = _header(header) + [",".join(STATE_COLUMNS)]
        for edge in grid.graph.edges:
            z, w = U.on_edge(edge.id)
            for i, (zi, wi) in enumerate(zip(z, w)):
                lines.append(",".join([edge.id, edge.kind, str(i), format_number(zi),
                                       format_number(zi / factor), format_number(wi),
                                       format_number(wi * factor)]))
        return self._write_lines(name, lines)

    def write_sweep_csv(self, result: SweepResult, name: str = "sweep.csv") -> str:
        """Write the nine sweep columns, then one '# fit:' line per fitted rate."""
        lines = _header({"scenario": f"{result.scenario}/{result.pattern}",
                         "seed": "" if result.seed is None else result.seed})
        lines.append(",".join(SWEEP_COLUMNS))
        for row in result.rows:
            lines.append(",".join(format_number(row.value(c)) for c in SWEEP_COLUMNS))
        for fit in result.fits.values():
            lines.append(f"# fit: {fit.name} slope={format_number(fit.slope)} "
                         f"intercept={format_number(fit.intercept)} r2={format_number(fit.r2)} "
                         f"points={fit.points}")
        return self._write_lines(name, lines)

    def write_trace_csv(self, trace: HomotopyTrace, name: str = "trace.csv") -> str:
        """Write each homotopy point; alpha values are ';'-joined in vertex order."""
        lines = _header({"vertices": ";".join(trace.vertices),
                         "seed": "" if trace.seed is None else trace.seed,
                         "verdict": "no-crossing" if trace.verdict else "crossing"})
        lines.append(",".join(TRACE_COLUMNS))
        for point in trace.points:
            counts = point.inertia
            lines.append(",".join([point.label, ";".join(format_number(a) for a in point.alpha),
                                   str(counts.n), str(counts.z), str(counts.n_plus),
                                   format_number(point.nearest)]))
        return self._write_lines(name, lines)

    def write_bump_csv(self, bump: BumpSolution, name: str = "bump.csv", reflect: bool = False) -> str:
        """Write the (z, u, v) samples of a shot bump.

        With ``reflect`` the even extension on [-span, span] is written.
        """
        lines = _header({"span": format_number(bump.span), "p": format_number(bump.p),
                         "q": format_number(bump.q), "beta": format_number(bump.beta),
                         "dtn_residual": format_number(bump.dtn_residual)})
        lines.append(",".join(BUMP_COLUMNS))
        z, u, v = bump.reflected() if reflect else (bump.z, bump.u, bump.v)
        lines.extend(",".join(format_number(x) for x in sample) for sample in zip(z, u, v))
        return self._write_lines(name, lines)

    def write_state_dat(self, U: GraphFunction, name: str = "state.dat") -> str:
        """Gnuplot data: one block per edge, blocks separated by two blank lines."""
        lines = [f"# eps {format_number(U.eps)}"]
        for edge in U.grid.graph.edges:
            z, w = U.on_edge(edge.id)
            lines.append(f"# edge {edge.id} ({edge.kind})")
            lines.extend(f"{format_number(zi)} {format_number(wi)}" for zi, wi in zip(z, w))
            lines += ["", ""]
        return self._write_lines(name, lines)

    def write_trace_dat(self, trace: HomotopyTrace, name: str = "trace.dat") -> str:
        """Gnuplot data of the uniform part of a trace: alpha, n, z, nearest."""
        lines = ["# alpha n z nearest"]
        for point in trace.points:
            if point.label == "uniform":
                lines.append(f"{format_number(point.alpha[0] if point.alpha else 0.0)} "
                             f"{point.inertia.n} {point.inertia.z} {format_number(point.nearest)}")
        return self._write_lines(name, lines)

    def render_profile_png(self, U: GraphFunction, size: Tuple[int, int] = (800, 480)) -> Image.Image:
        """Plot every edge profile side by side, one colour per edge.

        Returns:
            PIL Image object with the profiles and a legend
        """
        width, height = size
        # 2x size for antialiasing
        actual_w, actual_h = width * 2, height * 2
        image = Image.new('RGB', (actual_w, actual_h), 'white')
        draw = ImageDraw.Draw(image)
        try:
            font = ImageFont.truetype("DejaVuSans.ttf", 24)
        except OSError:
            font = ImageFont.load_default()

        margin, legend = 80, 60
        plot_w = actual_w - 2 * margin
        plot_h = actual_h - 2 * margin - legend
        profiles = [(edge, *U.on_edge(edge.id)) for edge in U.grid.graph.edges]
        spans = [z[-1] - z[0] for _, z, _ in profiles]
        gap = 0.02 * sum(spans)
        total = sum(spans) + gap * (len(spans) - 1)
        top = max(float(np.max(w)) for _, _, w in profiles)
        top = top if top > 0 else 1.0

        draw.rectangle([margin, margin, margin + plot_w, margin + plot_h], outline='#999', width=2)
        offset = 0.0
        for i, ((edge, z, w), span) in enumerate(zip(profiles, spans)):
            color = COLORS[i % len(COLORS)]
            xs = margin + (offset + (z - z[0])) / total * plot_w
            ys = margin + plot_h - np.clip(w / top, 0.0, 1.0) * plot_h
            draw.line(list(zip(xs.tolist(), ys.tolist())), fill=color, width=4)
            offset += span + gap

            y = actual_h - legend
            x = margin + i * 160
            draw.rectangle([x, y, x + 30, y + 30], fill=color)
            draw.text((x + 40, y + 16), edge.id, fill='#333', anchor="lm", font=font)

        draw.text((margin, margin - 20), f"eps = {U.eps:g}, max = {top:.4g}",
                  fill='#333', anchor="ls", font=font)
        return image.resize((width, height), Image.LANCZOS)

    def save_png(self, image: Image.Image, name: str) -> str:
        path = self._path(name)
        image.save(path, format="PNG")
        logger.info("Wrote %s", path)
        return path


FORMATS = ("csv", "dat", "png")


def emit(exporter: ResultExporter, result, formats: Iterable[str] = ("csv",),
         stem: str = "result", meta: Optional[Dict[str, object]] = None) -> List[str]:
    """Write a state, sweep or homotopy trace in the requested formats.

    CSV is always written. States take every format; traces take dat; sweeps
    are CSV only.

    Returns:
        list: Paths written, in a fixed order
    """
    formats = set(formats) | {"csv"}
    unknown = formats - set(FORMATS)
    if unknown:
        raise ValueError(f"Unknown output formats: {sorted(unknown)}")
    paths = []
    if isinstance(result, GraphFunction):
        paths.append(exporter.write_state_csv(result, f"{stem}.csv", meta))
        if "dat" in formats:
            paths.append(exporter.write_state_dat(result, f"{stem}.dat"))
        if "png" in formats:
            paths.append(exporter.save_png(exporter.render_profile_png(result), f"{stem}.png"))
    elif isinstance(result, HomotopyTrace):
        paths.append(exporter.write_trace_csv(result, f"{stem}.csv"))
        if "dat" in formats:
            paths.append(exporter.write_trace_dat(result, f"{stem}.dat"))
    elif isinstance(result, SweepResult):
        paths.append(exporter.write_sweep_csv(result, f"{stem}.csv"))
    else:
        raise TypeError(f"Nothing to emit for {type(result).__name__}")
    return paths
