"""
Finite-difference Newton solver for -U'' + kappa2 U - 2U^3 = 0 on a graph grid.

Interior rows use the central second difference. Vertex rows carry the
Kirchhoff defect, the sum over incident edge ends of the outgoing derivative
by the 3-point one-sided stencil; pendant free ends use the same stencil as
a Neumann row.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from errors import ConvergenceError
from graph_grid import CAP, GraphFunction, GraphGrid
from metric_graph import INTERNAL, LOOPING, PENDANT, EdgeSelection

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
MIN_STEP = 2.0 ** -10
LOCALIZATION_THRESHOLD = 1.0 / math.sqrt(2.0)
CONCENTRATION_CONSTANT = 10.0


def _outgoing(w: np.ndarray, position: int, step: float) -> float:
    if position == 0:
        return (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * step)
    return (-3.0 * w[-1] + 4.0 * w[-2] - w[-3]) / (2.0 * step)


def _residual(grid: GraphGrid, values: np.ndarray) -> np.ndarray:
    ext = np.append(values, 0.0)
    F = np.zeros(grid.n_nodes)
    for eg in grid.edges.values():
        w = ext[eg.nodes]
        h = eg.step
        mid = w[1:-1]
        # Interior rows
        F[eg.nodes[1:-1]] = (-(w[:-2] - 2.0 * mid + w[2:]) / (h * h)
                             + grid.kappa2 * mid - 2.0 * mid ** 3)
        # Kirchhoff sums at the vertex nodes
        for anchor in eg.anchors:
            F[grid.vertex_nodes[anchor.vertex]] += _outgoing(w, anchor.position, h)
        if eg.edge.kind == PENDANT:
            F[eg.nodes[0]] = _outgoing(w, 0, h)
    return F


def assemble_residual(U: GraphFunction) -> GraphFunction:
    """Discrete residual of the stationary equation with Kirchhoff rows."""
    return U.with_values(_residual(U.grid, U.values))


def _jacobian(grid: GraphGrid, values: np.ndarray):
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    data: List[np.ndarray] = []

    def add(r, c, v):
        r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
        keep = c != CAP
        rows.append(r[keep].ravel())
        cols.append(c[keep].ravel())
        data.append(v[keep].ravel())

    ext = np.append(values, 0.0)
    for eg in grid.edges.values():
        nodes, h = eg.nodes, eg.step
        w = ext[nodes]
        inner = nodes[1:-1]
        # Tridiagonal interior block
        add(inner, nodes[:-2], -1.0 / (h * h))
        add(inner, inner, 2.0 / (h * h) + grid.kappa2 - 6.0 * w[1:-1] ** 2)
        add(inner, nodes[2:], -1.0 / (h * h))
        # One-sided stencils at vertices and free ends
        stencil = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
        for anchor in eg.anchors:
            row = grid.vertex_nodes[anchor.vertex]
            picks = nodes[:3] if anchor.position == 0 else nodes[::-1][:3]
            add(row, picks, stencil)
        if eg.edge.kind == PENDANT:
            add(nodes[0], nodes[:3], stencil)

    n = grid.n_nodes
    return coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsc()


@dataclass
class SolveReport:
    history: List[float] = field(default_factory=list)
    residual: float = math.inf
    vertex_defects: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    damping: List[float] = field(default_factory=list)


def newton_solve(U0: GraphFunction, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER) -> Tuple[GraphFunction, SolveReport]:
    """Damped Newton iteration on the sparse Jacobian.

    Each step is halved until the sup-norm residual decreases, down to a
    2^-10 floor. At least one step is always taken.

    Args:
        U0: Initial guess
        tol: Sup-norm residual target
        max_iter: Iteration limit

    Returns:
        tuple: (solution, SolveReport)

    Raises:
        ConvergenceError: Residual above tol after max_iter steps, or a
            non-finite update; the report is attached to the exception
    """
    grid = U0.grid
    values = U0.values.astype(float).copy()
    F = _residual(grid, values)
    norm = float(np.max(np.abs(F)))
    report = SolveReport(history=[norm])

    for iteration in range(1, max_iter + 1):
        # Solve for the full Newton update
        try:
            delta = spsolve(_jacobian(grid, values), -F)
        except RuntimeError as e:
            report.iterations = iteration
            raise ConvergenceError(f"Newton system failed at iteration {iteration}: {e}", report)
        if not np.all(np.isfinite(delta)):
            report.iterations = iteration
            raise ConvergenceError(f"singular Newton system at iteration {iteration}", report)

        # Halve until the residual decreases
        step = 1.0
        while True:
            trial = values + step * delta
            F_trial = _residual(grid, trial)
            trial_norm = float(np.max(np.abs(F_trial)))
            if trial_norm < norm or trial_norm <= tol or step <= MIN_STEP:
                break
            step *= 0.5

        values, F, norm = trial, F_trial, trial_norm
        report.history.append(norm)
        report.damping.append(step)
        report.iterations = iteration
        logger.debug("Newton %d: residual %.3e, step %g", iteration, norm, step)
        if norm <= tol:
            report.converged = True
            break

    # Final report
    report.residual = norm
    report.vertex_defects = {v: abs(float(F[node])) for v, node in grid.vertex_nodes.items()}
    solution = U0.with_values(values)
    if not report.converged:
        raise ConvergenceError(
            f"Newton did not reach {tol:g} in {max_iter} iterations (residual {norm:.3e})", report)
    logger.info("Newton converged in %d iterations, residual %.2e", report.iterations, norm)
    return solution, report


@dataclass
class CheckResult:
    passed: bool
    detail: str = ""
    value: float = math.nan


@dataclass
class PropertyReport:
    checks: Dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())

    def failed(self) -> List[str]:
        return [name for name, check in self.checks.items() if not check.passed]


def _interior_maxima(w: np.ndarray) -> int:
    mid = w[1:-1]
    return int(np.count_nonzero((mid > w[:-2]) & (mid >= w[2:])))


def _interior_minima(w: np.ndarray) -> int:
    mid = w[1:-1]
    return int(np.count_nonzero((mid < w[:-2]) & (mid <= w[2:])))


def concentration_ratio(U: GraphFunction, selection: EdgeSelection) -> float:
    """L2 norm on the remainder over the L2 norm on the selected edges."""
    remainder = U.l2_squared(e.id for e in selection.remainder_edges())
    chosen = U.l2_squared(selection.selected)
    if chosen <= 0:
        return math.inf
    return math.sqrt(remainder / chosen)


def concentration_proportion(U: GraphFunction, selection: EdgeSelection) -> float:
    """Share of the L2 norm carried by the selected edges."""
    total = U.l2_squared(e.id for e in selection.graph.edges)
    if total <= 0:
        return 0.0
    return math.sqrt(U.l2_squared(selection.selected) / total)


def verify_state(U: GraphFunction, selection: EdgeSelection) -> PropertyReport:
    """Check positivity, localization, remainder shape, amplitude bounds and concentration.

    Returns:
        PropertyReport: One CheckResult per property
    """
    report = PropertyReport()
    low = float(np.min(U.values))
    report.checks["positivity"] = CheckResult(low > 0, f"min U = {low:.3e}", low)

    pattern = []
    selected_sup = math.inf
    for edge_id in selection.selected:
        kind = selection.graph.edge(edge_id).kind
        _, w = U.on_edge(edge_id)
        selected_sup = min(selected_sup, float(np.max(w)))
        maxima, minima = _interior_maxima(w), _interior_minima(w)
        if kind == PENDANT:
            # the free end is the first grid point
            ok = maxima == 0 and minima == 0 and w[0] >= w[1]
        else:
            ok = maxima == 1 and minima == 0
        if not ok:
            pattern.append(f"{edge_id}: {maxima} interior max, {minima} interior min")
    report.checks["localization"] = CheckResult(not pattern, "; ".join(pattern), len(pattern))

    bumps_on_remainder = []
    remainder_sup = 0.0
    for edge in selection.remainder_edges():
        _, w = U.on_edge(edge.id)
        remainder_sup = max(remainder_sup, float(np.max(w)))
        if edge.kind == PENDANT:
            extra = _interior_maxima(w) + int(w[0] > w[1])
        else:
            extra = _interior_maxima(w)
        if extra:
            bumps_on_remainder.append(edge.id)
    report.checks["remainder"] = CheckResult(
        not bumps_on_remainder, ", ".join(bumps_on_remainder), len(bumps_on_remainder))

    amplitude_ok = remainder_sup < LOCALIZATION_THRESHOLD < selected_sup
    report.checks["amplitude"] = CheckResult(
        amplitude_ok,
        f"sup remainder {remainder_sup:.4g}, min over selected of sup {selected_sup:.4g}",
        remainder_sup)

    ratio = concentration_ratio(U, selection)
    reference = math.exp(-U.grid.stretch * selection.ell_N)
    report.checks["concentration"] = CheckResult(
        ratio <= CONCENTRATION_CONSTANT * reference,
        f"ratio {ratio:.3e}, ratio * exp(eps ell_N) = {ratio / reference:.3g}",
        ratio)
    return report


@dataclass
class PhysicalState:
    """Unscaled samples Phi(x) = eps U(eps x) per edge."""

    eps: float
    edges: Dict[str, Tuple[np.ndarray, np.ndarray]]

    def sup(self) -> float:
        return max(float(np.max(phi)) for _, phi in self.edges.values())

    def to_scaled(self) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        return {edge_id: (x * self.eps, phi / self.eps)
                for edge_id, (x, phi) in self.edges.items()}


def rescale_state(U: GraphFunction) -> PhysicalState:
    """Map a state to unscaled variables; identity on unscaled grids."""
    grid = U.grid
    factor = grid.eps if grid.scaled else 1.0
    edges = {}
    for edge_id in grid.edges:
        z, w = U.on_edge(edge_id)
        edges[edge_id] = (z / factor, w * factor)
    return PhysicalState(grid.eps, edges)


@dataclass
class MassEnergy:
    per_edge: Dict[str, float]
    total: float
    energy: float

    def selected_mass(self, selection: EdgeSelection) -> float:
        return sum(self.per_edge[e] for e in selection.selected)


def mass_energy(U: GraphFunction) -> MassEnergy:
    """Mass per edge, total mass and energy of the unscaled state."""
    state = rescale_state(U)
    per_edge = {}
    energy = 0.0
    for edge_id, (x, phi) in state.edges.items():
        per_edge[edge_id] = float(trapezoid(phi * phi, x))
        slope = np.gradient(phi, x, edge_order=2)
        energy += float(trapezoid(slope * slope, x) - trapezoid(phi ** 4, x))
    return MassEnergy(per_edge, sum(per_edge.values()), energy)


def mass_deviation(U: GraphFunction, selection: EdgeSelection,
                   masses: Optional[MassEnergy] = None) -> Dict[str, float]:
    """|mass / (c eps) - 1| per selected edge, c = 1 for pendants and 2 otherwise."""
    masses = masses or mass_energy(U)
    result = {}
    for edge in selection.selected_edges():
        limit = (1.0 if edge.kind == PENDANT else 2.0) * U.eps
        result[edge.id] = abs(masses.per_edge[edge.id] / limit - 1.0)
    return result


def edge_maximum(U: GraphFunction, edge_id: str) -> Tuple[float, float]:
    """Location and value of the maximum on an edge, refined by a parabola."""
    z, w = U.on_edge(edge_id)
    i = int(np.argmax(w))
    if 0 < i < len(w) - 1:
        left, mid, right = w[i - 1], w[i], w[i + 1]
        curvature = left - 2.0 * mid + right
        if curvature < 0:
            shift = 0.5 * (left - right) / curvature
            h = z[1] - z[0]
            return float(z[i] + shift * h), float(mid - 0.25 * (left - right) * shift)
    return float(z[i]), float(w[i])


def pulse_edges(selection: EdgeSelection) -> List[str]:
    """Selected looping and internal edges, whose maxima sit inside the edge."""
    return [e.id for e in selection.selected_edges() if e.kind in (LOOPING, INTERNAL)]
