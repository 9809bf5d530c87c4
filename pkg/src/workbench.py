"""
Workbench class that coordinates configuration, logging and the command handlers.
"""
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from asymptotics import audit_consistency, dirichlet_data
from config_manager import ConfigurationManager
from errors import RegimeError, WorkbenchError
from export import ResultExporter, asym_csv, emit, period_csv
from graph_format import format_graph, load_graph
from graph_grid import GraphFunction, build_grid
from metric_graph import (INTERNAL, LOOPING, build_selection, check_assumption_1,
                          check_assumption_2, require_assumptions, selection_summary,
                          validate_graph)
from phase_plane import (boundary_sensitivity, energy_level_from_boundary, linearized_pair,
                         period_T_plus, period_partials, shoot_bump)
from scenarios import Scenario, scenario
from spectral import (claim2_certificate, decoupled_counts, homotopy_scan, interlacing_check,
                      morse_index, remainder_positivity, sturm_count_edge)
from stationary_solver import (SolveReport, concentration_proportion, concentration_ratio,
                               edge_maximum, mass_deviation, mass_energy, newton_solve,
                               pulse_edges, verify_state)
from sweep import SweepSettings, expectation_failures, index_mismatch, run_sweep

logger = logging.getLogger(__name__)

LOG_ENV = "QGNLS_LOG"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

EXIT_OK = 0
EXIT_EXPECTATION = 1
EXIT_ERROR = 2


def _stem(name: str) -> str:
    return name[:-4] if name.endswith(".csv") else name


def configure_logging(level: str) -> None:
    """Route every module logger to stderr; $QGNLS_LOG wins over ``level``."""
    name = os.environ.get(LOG_ENV, level).strip().lower()
    if name not in _LEVELS:
        logger.warning("Unknown log level '%s', using info", name)
        name = "info"
    logging.basicConfig(level=_LEVELS[name], format=LOG_FORMAT, stream=sys.stderr, force=True)


class Workbench:
    def __init__(self, config_path: Optional[Path] = None,
                 overrides: Optional[Dict[str, Any]] = None):
        """Initialize the workbench.

        Args:
            config_path: Configuration file, default location when None
            overrides: Configuration values replaced for this run only
        """
        self._config_path = config_path
        self._overrides = dict(overrides or {})
        self._config_manager: Optional[ConfigurationManager] = None
        self._exporter: Optional[ResultExporter] = None

    @property
    def configuration(self) -> ConfigurationManager:
        if self._config_manager is None:
            raise RuntimeError("Configuration manager not initialized")
        return self._config_manager

    @property
    def exporter(self) -> ResultExporter:
        if self._exporter is None:
            raise RuntimeError("Exporter not initialized")
        return self._exporter

    def initialize(self) -> bool:
        """Load configuration, apply run overrides and set up logging and export."""
        try:
            self._config_manager = ConfigurationManager(self._config_path)
            if not self._config_manager.load():
                return False
            self._config_manager.add_update_handler(self._handle_config_changed)

            setters = {
                "grid_step": self._config_manager.set_grid_step,
                "newton_tol": self._config_manager.set_newton_tol,
                "seed": self._config_manager.set_seed,
                "output_dir": self._config_manager.set_output_dir,
                "log_level": self._config_manager.set_log_level,
            }
            for key, value in self._overrides.items():
                if value is not None:
                    setters[key](value)

            configure_logging(self._config_manager.get_log_level())
            self._exporter = ResultExporter(str(self._config_manager.get_output_dir()))
            logger.debug("Configuration from %s", self._config_manager.path)
            return True

        except ValueError as e:
            logger.error("Invalid setting: %s", e)
            return False

    def _handle_config_changed(self) -> None:
        if self._exporter is not None:
            self._exporter = ResultExporter(str(self.configuration.get_output_dir()))

    # ------------------------------------------------------------------
    # Inputs

    def load_scenario(self, graph_path: Optional[str] = None, name: Optional[str] = None,
                      params: Optional[Dict[str, Any]] = None, select: Optional[List[str]] = None,
                      allow_fake_vertices: bool = False, strict: bool = True) -> Scenario:
        """Build a Scenario from a preset name or from a graph file.

        A graph file's own ``select`` line is used unless ``select`` is given.
        With ``strict`` an invalid graph raises GraphValidationError.
        """
        if name:
            return scenario(name, **(params or {}))
        if not graph_path:
            raise WorkbenchError("either --graph or --scenario is required")
        graph, selected = load_graph(graph_path)
        if strict:
            validate_graph(graph, allow_fake_vertices).raise_if_invalid()
        ids = select or selected
        if not ids:
            raise WorkbenchError(f"{graph_path}: no selection; add a 'select' line or pass --select")
        return Scenario(name=Path(graph_path).stem, pattern="file", graph=graph,
                        selection=build_selection(graph, ids),
                        allow_fake_vertices=allow_fake_vertices)

    def _settings(self) -> SweepSettings:
        config = self.configuration
        return SweepSettings(h=config.get_grid_step(), z_cut=config.get_halfline_cut(),
                             tol=config.get_newton_tol(), max_iter=config.get_newton_max_iter(),
                             lam_tol=config.get_lambda_tol(), alpha_grid=config.get_alpha_grid(),
                             random_rays=config.get_random_rays(), seed=config.get_seed(),
                             workers=config.get_sweep_workers())

    def _solve(self, sc: Scenario, eps: float) -> Tuple[GraphFunction, SolveReport]:
        config = self.configuration
        require_assumptions(sc.selection, strict=False)
        grid = build_grid(sc.graph, eps, config.get_grid_step(), config.get_halfline_cut())
        return newton_solve(sc.initial_guess(grid), config.get_newton_tol(),
                            config.get_newton_max_iter())

    # ------------------------------------------------------------------
    # Commands

    def validate(self, sc: Scenario) -> int:
        report = validate_graph(sc.graph, sc.allow_fake_vertices)
        print(f"graph: {len(sc.graph.vertices)} vertices, {len(sc.graph.edges)} edges, "
              f"{'valid' if report.valid else 'INVALID'}")
        for violation in report.violations:
            print(f"  violation: {violation}")
        print(f"selection: {', '.join(sc.selection.selected)}  "
              f"ell_N = {sc.selection.ell_N:g}, ell_min = {sc.selection.ell_min:g}")
        for vertex, counts in selection_summary(sc.selection).items():
            print(f"  {vertex}: " + " ".join(f"{k}={v:g}" for k, v in counts.items()))
        ok = report.valid
        for label, check in (("assumption 1", check_assumption_1(sc.selection)),
                             ("assumption 2", check_assumption_2(sc.selection))):
            print(f"{label}: {'pass' if check.passed else 'fail'}")
            for vertex, margins in check.margins.items():
                print(f"  {vertex}: margins " + ", ".join(f"{m:.6g}" for m in margins))
            for reason in check.reasons:
                print(f"  {reason}")
            ok = ok and (check.passed or sc.allow_fake_vertices)
        return EXIT_OK if ok else EXIT_EXPECTATION

    def asym(self, sc: Scenario, eps: float, refine: bool = False) -> int:
        data = dirichlet_data(sc.selection, eps, sc.offsets_at(eps), refine=refine)
        audit = audit_consistency(sc.selection, eps, data)
        print("\n".join(asym_csv(data, audit)))
        return EXIT_OK if audit.passed else EXIT_EXPECTATION

    def period(self, p: float, q: float) -> int:
        value = period_T_plus(p, q)
        dp, dq = period_partials(p, q)
        print("\n".join(period_csv(p, q, value, dp, dq)))
        try:
            level = energy_level_from_boundary(p, q)
            logger.info("beta = %.6e, p_+ = %.12g", level.beta, level.p_plus)
        except RegimeError as e:
            logger.info("Outside the homoclinic loop: %s", e)
        return EXIT_OK

    def bump(self, eps: float, ell: float, p: float, out_file: Optional[str] = None,
             reflect: bool = False) -> int:
        if not eps > 0 or not ell > 0:
            raise WorkbenchError(f"eps and ell must be positive, got {eps:g} and {ell:g}")
        solution = shoot_bump(eps * ell, p)
        print(f"span = {solution.span:g}, p = {p:.6e}")
        print(f"q = {solution.q:.12e}, beta = {solution.beta:.6e}, p_+ = {solution.p_plus:.12g}")
        print(f"DtN residual = {solution.dtn_residual:.3e}, energy drift = {solution.energy_drift:.3e}")
        pair = linearized_pair(solution)
        print(f"odd ratio = {pair.odd_ratio:.6e}, even ratio = {pair.even_ratio:.6e}")
        sensitivity = boundary_sensitivity(solution)
        print(f"du/dp at the maximum = {sensitivity[0]:.6e}")
        self.exporter.write_bump_csv(solution, out_file or f"bump_eps{eps:g}.csv", reflect)
        return EXIT_OK

    def solve(self, sc: Scenario, eps: float, formats: Tuple[str, ...] = ("csv",),
              out_file: Optional[str] = None) -> int:
        U, report = self._solve(sc, eps)
        print(f"converged in {report.iterations} iterations, residual {report.residual:.3e}")
        checks = verify_state(U, sc.selection)
        for name, check in checks.checks.items():
            print(f"  {name:>14}: {'ok' if check.passed else 'FAIL'}  {check.detail}")
        masses = mass_energy(U)
        for edge_id, mass in masses.per_edge.items():
            print(f"  mass {edge_id:>8}: {mass:.10g}")
        print(f"total mass {masses.total:.10g}, energy {masses.energy:.10g}")
        for edge_id, deviation in mass_deviation(U, sc.selection, masses).items():
            print(f"  mass deviation {edge_id}: {deviation:.3e}")
        print(f"concentration ratio {concentration_ratio(U, sc.selection):.3e}, "
              f"proportion {concentration_proportion(U, sc.selection):.12f}")
        for edge_id in pulse_edges(sc.selection):
            where, top = edge_maximum(U, edge_id)
            print(f"  maximum on {edge_id}: {top:.8f} at z = {where:.6f}")
        stem = _stem(out_file) if out_file else f"{sc.name}_eps{eps:g}"
        emit(self.exporter, U, formats, stem=stem,
             meta={"scenario": f"{sc.name}/{sc.pattern}"})
        if sc.expect_localized and not checks.passed:
            return EXIT_EXPECTATION
        return EXIT_OK

    def morse(self, sc: Scenario, eps: float,
              expect: Optional[Tuple[int, Optional[int]]] = None) -> int:
        """Print (n, z); exit 1 when it differs from ``expect`` or the scenario's known index."""
        U, _ = self._solve(sc, eps)
        report = morse_index(U, sc.selection, self.configuration.get_lambda_tol())
        n, z = report.nz
        print(f"(n, z) = ({n}, {z}), nearest eigenvalue {report.nearest:.3e}, "
              f"grid error ~ {report.grid_error:.1e}")
        expected = expect if expect is not None else sc.expected
        if expected is None:
            return EXIT_OK
        mismatch = index_mismatch(expected, n, z)
        if mismatch:
            logger.error("%s: %s", sc.name, mismatch)
            return EXIT_EXPECTATION
        return EXIT_OK

    def _print_decoupled(self, U: GraphFunction, sc: Scenario) -> None:
        """Dirichlet-decoupled block counts next to the Sturm count of each pulse edge."""
        lam_tol = self.configuration.get_lambda_tol()
        blocks = decoupled_counts(U, sc.selection, lam_tol)
        for edge in sc.selection.selected_edges():
            block = blocks[edge.id]
            if edge.kind == INTERNAL:
                print(f"  decoupled {edge.id}: n = {block.n}")
                continue
            try:
                bump = shoot_bump(U.eps * edge.length, U.at_vertex(edge.vertices[0]))
                count = sturm_count_edge(bump, symmetric=edge.kind == LOOPING)
            except RegimeError as e:
                print(f"  decoupled {edge.id}: n = {block.n}, sturm n/a ({e})")
                continue
            print(f"  decoupled {edge.id}: n = {block.n}, sturm {count.negative}")
            if count.negative != block.n:
                logger.warning("Sturm count %d on '%s' differs from the block count %d",
                               count.negative, edge.id, block.n)
        if "remainder" in blocks:
            print(f"  decoupled remainder: n = {blocks['remainder'].n}")

    def spectrum(self, sc: Scenario, eps: float, formats: Tuple[str, ...] = ("csv",),
                 alpha_scan: bool = False, out_file: Optional[str] = None) -> int:
        config = self.configuration
        U, _ = self._solve(sc, eps)
        report = morse_index(U, sc.selection, config.get_lambda_tol())
        print(f"inertia (n, z, n_plus) = {report.inertia.as_tuple()}")
        print("lowest eigenvalues: " + " ".join(f"{v:.6e}" for v in report.eigenvalues))
        for edge_id, value in report.odd_mode_estimates.items():
            print(f"  odd mode estimate on {edge_id}: {value:.3e}")
        print(f"remainder Dirichlet ground state {remainder_positivity(U, sc.selection):.6g}")

        failures = []
        if sc.expected is not None and report.nz[0] != sc.expected[0]:
            failures.append(f"negative count {report.nz[0]} != {sc.expected[0]}")
        if sc.selection.N and all(e.kind != INTERNAL for e in sc.selection.selected_edges()):
            certificate = claim2_certificate(U, sc.selection)
            for vertex, cert in certificate.vertices.items():
                print(f"  certificate {vertex}: alpha = {cert.alpha:.6g}")
            if sc.expected is not None and not certificate.holds:
                failures.append("certificate does not hold")
        self._print_decoupled(U, sc)
        if sc.allow_fake_vertices and any(e.kind == INTERNAL for e in sc.selection.selected_edges()):
            interlacing = interlacing_check(U)
            print(f"interlacing: {'holds' if interlacing.holds else 'fails'}, "
                  f"second Dirichlet eigenvalue {interlacing.dirichlet[1]:.3e}")

        # Kirchhoff point only unless a scan is requested
        if alpha_scan:
            trace = homotopy_scan(U, sc.selection, config.get_alpha_grid(), config.get_lambda_tol(),
                                  config.get_random_rays(), config.get_seed(),
                                  workers=config.get_sweep_workers())
            print(f"homotopy: {'no crossing' if trace.verdict else 'crossing'}, "
                  f"min |lambda| {trace.min_gap:.3e}")
            for reason in trace.reasons:
                print(f"  {reason}")
            if sc.expected is not None and not trace.verdict:
                failures.append("homotopy crossing")
        else:
            trace = homotopy_scan(U, sc.selection, [0.0], config.get_lambda_tol())
        stem = _stem(out_file) if out_file else f"{sc.name}_eps{eps:g}_trace"
        emit(self.exporter, trace, formats, stem=stem)
        for failure in failures:
            logger.error("%s: %s", sc.name, failure)
        return EXIT_EXPECTATION if failures else EXIT_OK

    def show_scenario(self, sc: Scenario, write: bool = False) -> int:
        text = format_graph(sc.graph, sc.selection.selected)
        print(text, end="")
        expected = "none" if sc.expected is None else str(sc.expected)
        print(f"# {sc.name}/{sc.pattern}: expected (n, z) {expected}; ladder {list(sc.eps_ladder)}")
        if sc.note:
            print(f"# {sc.note}")
        if write:
            path = Path(self.exporter.output_dir) / f"{sc.name}_{sc.pattern}.graph"
            os.makedirs(path.parent, exist_ok=True)
            path.write_text(text)
            logger.info("Wrote %s", path)
        return EXIT_OK

    def sweep(self, sc: Scenario, ladder: Optional[List[float]] = None,
              formats: Tuple[str, ...] = ("csv",)) -> int:
        settings = self._settings()
        if ladder is None and sc.pattern == "file":
            ladder = self.configuration.get_eps_ladder()
        result = run_sweep(sc, ladder, settings)
        for row in result.rows:
            status = "ok" if row.converged else f"failed: {row.error}"
            print(f"eps {row.eps:>6g}: (n, z) = ({row.n}, {row.z}), ratio {row.concentration:.3e}, "
                  f"mass dev {row.mass_deviation:.3e}  {status}")
        for fit in result.fits.values():
            print(f"fit {fit.name}: slope {fit.slope:.4f}, R^2 {fit.r2:.5f} over {fit.points} rows")
        emit(self.exporter, result, formats, stem=f"{sc.name}_{sc.pattern}_sweep")
        failures = expectation_failures(result, sc)
        for failure in failures:
            logger.error("%s/%s %s", sc.name, sc.pattern, failure)
        return EXIT_EXPECTATION if failures else EXIT_OK

