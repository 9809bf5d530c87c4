"""
Epsilon sweeps over a scenario: the full pipeline per ladder value and
exponential rate fits over the converged rows.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConvergenceError, RegimeError, WorkbenchError
from graph_grid import GraphFunction, build_grid
from metric_graph import INTERNAL, check_assumption_1, check_assumption_2
from phase_plane import shoot_bump
from scenarios import Scenario
from spectral import LAMBDA_TOL, homotopy_scan, morse_index
from stationary_solver import (DEFAULT_MAX_ITER, DEFAULT_TOL, concentration_ratio, mass_deviation,
                               mass_energy, newton_solve, verify_state)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("eps", "converged", "concentration", "selected_mass", "mass_deviation",
                 "n", "z", "homotopy", "dtn_residual")
FITTED = ("concentration", "dtn_residual", "mass_deviation")


@dataclass
class SweepSettings:
    h: Optional[float] = None
    z_cut: Optional[float] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    lam_tol: float = LAMBDA_TOL
    alpha_grid: Sequence[float] = ()
    random_rays: int = 0
    seed: Optional[int] = None
    workers: int = 1


@dataclass
class SweepRow:
    eps: float
    converged: bool = False
    iterations: int = 0
    residual: float = math.nan
    verified: Optional[bool] = None
    failed_checks: List[str] = field(default_factory=list)
    concentration: float = math.nan
    masses: Dict[str, float] = field(default_factory=dict)
    selected_mass: float = math.nan
    mass_deviation: float = math.nan
    n: Optional[int] = None
    z: Optional[int] = None
    homotopy: Optional[bool] = None
    dtn_residual: float = math.nan
    error: str = ""
    state: Optional[GraphFunction] = None

    def value(self, column: str):
        return getattr(self, column)


@dataclass
class RateFit:
    """log(value) = slope * eps + intercept over the converged rows."""

    name: str
    slope: float
    intercept: float
    r2: float
    points: int


@dataclass
class SweepResult:
    scenario: str
    pattern: str
    rows: List[SweepRow]
    fits: Dict[str, RateFit] = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def converged_rows(self) -> List[SweepRow]:
        return [row for row in self.rows if row.converged]


def fit_rate(name: str, eps: Sequence[float], values: Sequence[float]) -> Optional[RateFit]:
    """Least-squares line through (eps, log value).

    Rows with non-finite or non-positive values are skipped; None when fewer
    than two remain.
    """
    pairs = [(e, v) for e, v in zip(eps, values) if math.isfinite(v) and v > 0]
    if len(pairs) < 2:
        return None
    x = np.array([e for e, _ in pairs])
    y = np.log([v for _, v in pairs])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    total = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if total == 0 else 1.0 - float(np.sum((y - fitted) ** 2)) / total
    return RateFit(name, float(slope), float(intercept), r2, len(pairs))


def dtn_residual(U: GraphFunction, sc: Scenario) -> float:
    """Largest single-bump DtN residual over the selected pendant and looping edges.

    Each edge is reshot from the vertex value of the solved state; NaN when
    no edge qualifies or a value lies outside the phase-plane thresholds.
    """
    worst = math.nan
    for edge in sc.selection.selected_edges():
        if edge.kind == INTERNAL:
            continue
        try:
            bump = shoot_bump(U.eps * edge.length, U.at_vertex(edge.vertices[0]))
        except RegimeError as e:
            logger.debug("No DtN residual on '%s' at eps=%g: %s", edge.id, U.eps, e)
            return math.nan
        residual = bump.dtn_residual
        worst = residual if math.isnan(worst) else max(worst, residual)
    return worst


def run_row(sc: Scenario, eps: float, settings: SweepSettings) -> SweepRow:
    """Assumptions, asymptotics, solve, verify, spectrum and homotopy at one eps.

    Failures are recorded on the row and never raised.
    """
    row = SweepRow(eps=eps)
    try:
        for report in (check_assumption_1(sc.selection), check_assumption_2(sc.selection)):
            for reason in report.reasons:
                logger.debug("eps=%g: %s", eps, reason)
        # Solve
        grid = build_grid(sc.graph, eps, settings.h, settings.z_cut)
        U, solve = newton_solve(sc.initial_guess(grid), settings.tol, settings.max_iter)
        row.converged, row.iterations, row.residual, row.state = True, solve.iterations, solve.residual, U

        # Properties and masses
        checks = verify_state(U, sc.selection)
        row.verified, row.failed_checks = checks.passed, checks.failed()
        row.concentration = concentration_ratio(U, sc.selection)
        masses = mass_energy(U)
        row.masses = dict(masses.per_edge)
        row.selected_mass = masses.selected_mass(sc.selection)
        row.mass_deviation = max(mass_deviation(U, sc.selection, masses).values())

        # Spectrum
        spectrum = morse_index(U, sc.selection, settings.lam_tol)
        row.n, row.z = spectrum.nz
        if settings.alpha_grid:
            trace = homotopy_scan(U, sc.selection, settings.alpha_grid, settings.lam_tol,
                                  settings.random_rays, settings.seed)
            row.homotopy = trace.verdict
        row.dtn_residual = dtn_residual(U, sc)
    except ConvergenceError as e:
        row.error = str(e)
        if e.report is not None:
            row.iterations, row.residual = e.report.iterations, e.report.residual
    except WorkbenchError as e:
        row.error = str(e)
    except (np.linalg.LinAlgError, RuntimeError, ValueError, FloatingPointError) as e:
        # factorization and eigensolver failures from scipy
        row.error = f"{type(e).__name__}: {e}"
    if row.error:
        logger.warning("Sweep %s/%s failed at eps=%g: %s", sc.name, sc.pattern, eps, row.error)
    else:
        logger.debug("Sweep %s/%s eps=%g: (n, z)=(%s, %s), ratio %.3e",
                     sc.name, sc.pattern, eps, row.n, row.z, row.concentration)
    return row


def run_sweep(sc: Scenario, eps_ladder: Optional[Sequence[float]] = None,
              settings: Optional[SweepSettings] = None) -> SweepResult:
    """Run the pipeline over an eps ladder.

    Rows run concurrently on ``settings.workers`` threads and come back
    sorted by eps. Rates are fitted over converged rows only.
    """
    settings = settings or SweepSettings()
    ladder = sorted(float(e) for e in (eps_ladder or sc.eps_ladder))
    if not ladder or any(not e > 0 for e in ladder):
        raise ValueError(f"eps ladder must be nonempty and positive, got {ladder}")

    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        rows = list(pool.map(lambda e: run_row(sc, e, settings), ladder))
    rows.sort(key=lambda row: row.eps)

    result = SweepResult(sc.name, sc.pattern, rows, seed=settings.seed)
    converged = result.converged_rows
    for column in FITTED:
        fit = fit_rate(column, [r.eps for r in converged], [r.value(column) for r in converged])
        if fit is not None:
            result.fits[column] = fit
    logger.info("Sweep %s/%s: %d of %d rows converged", sc.name, sc.pattern,
                len(converged), len(rows))
    return result


def index_mismatch(expected: Tuple[int, Optional[int]], n: Optional[int],
                   z: Optional[int]) -> Optional[str]:
    """Describe a Morse index that differs from ``expected``; None on a match.

    An expected z of None accepts any zero count.
    """
    n_expected, z_expected = expected
    if n == n_expected and (z_expected is None or z == z_expected):
        return None
    return (f"(n, z) = ({n}, {z}), expected "
            f"({n_expected}, {'any' if z_expected is None else z_expected})")


def expectation_failures(result: SweepResult, sc: Scenario) -> List[str]:
    """Rows that contradict the scenario's known Morse index."""
    if sc.expected is None:
        return []
    failures = []
    for row in result.rows:
        if not row.converged:
            failures.append(f"eps={row.eps:g}: no converged state ({row.error})")
            continue
        if row.error:
            failures.append(f"eps={row.eps:g}: {row.error}")
            continue
        mismatch = index_mismatch(sc.expected, row.n, row.z)
        if mismatch:
            failures.append(f"eps={row.eps:g}: {mismatch}")
    return failures
