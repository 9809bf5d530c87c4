"""
Linearization -W'' + kappa2 W - 6U^2 W around a stationary state.

The operator is kept as a pencil (K, M): K is the symmetric matrix of the
quadratic form sum(W'^2) + sum(weight * (kappa2 - 6U^2) W^2) + sum(alpha_j W_j^2)
and M the lumped (trapezoid) mass. Eigenvalues are those of K w = lambda M w;
inertia counts come from LDL^T factorizations of K - sigma M.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, ldl
from scipy.sparse import coo_matrix, csr_matrix, diags, issparse
from scipy.sparse.linalg import eigsh, spsolve, splu

from errors import RegimeError
from graph_grid import CAP, GraphFunction, GraphGrid
from metric_graph import LOOPING, PENDANT, EdgeSelection
from phase_plane import ODE_ATOL, ODE_RTOL, BumpSolution, linearized_pair, shoot_bump

logger = logging.getLogger(__name__)

LAMBDA_TOL = 1e-11
DENSE_LIMIT = 800
LOW_SHIFT = -6.0
INF = math.inf

Matrix = Union[np.ndarray, csr_matrix]


@dataclass
class RobinSpec:
    """Robin parameters at boundary vertices; ``inf`` means Dirichlet."""

    alpha: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for vertex, value in self.alpha.items():
            if math.isnan(value) or value < 0:
                raise ValueError(f"Robin parameter at '{vertex}' must be >= 0 or inf, got {value}")

    @classmethod
    def uniform(cls, vertices: Iterable[str], value: float) -> "RobinSpec":
        return cls({vertex: float(value) for vertex in vertices})

    @classmethod
    def dirichlet(cls, vertices: Iterable[str]) -> "RobinSpec":
        return cls.uniform(vertices, INF)


@dataclass
class LinearizedOperator:
    grid: GraphGrid
    matrix: csr_matrix
    mass: np.ndarray
    dirichlet_nodes: Tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _form(grid: GraphGrid, values: np.ndarray,
          edge_ids: Optional[Set[str]] = None) -> Tuple[csr_matrix, np.ndarray]:
    """Stiffness plus lumped potential over the given edges (all by default)."""
    rows, cols, data = [], [], []
    weights = np.zeros(grid.n_nodes)
    for eg in grid.edges.values():
        if edge_ids is not None and eg.edge.id not in edge_ids:
            continue
        a, b, h = eg.nodes[:-1], eg.nodes[1:], eg.step
        # Element stiffness per grid cell
        for r, c, v in ((a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)):
            keep = (r != CAP) & (c != CAP)
            rows.append(r[keep])
            cols.append(c[keep])
            data.append(np.full(int(keep.sum()), v / h))
        # Trapezoid weights
        for ends in (a, b):
            live = ends[ends != CAP]
            np.add.at(weights, live, 0.5 * h)
    n = grid.n_nodes
    stiffness = coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n)).tocsr()
    potential = weights * (grid.kappa2 - 6.0 * values * values)
    return (stiffness + diags(potential)).tocsr(), weights


def assemble_L(U: GraphFunction, spec: Optional[RobinSpec] = None) -> LinearizedOperator:
    """Linearized operator with Robin data at boundary vertices.

    Args:
        U: Stationary state
        spec: Robin parameters per vertex; missing vertices keep the
            Kirchhoff condition. ``inf`` replaces the vertex row and column
            by the identity (Dirichlet), which adds a decoupled eigenvalue 1.

    Returns:
        LinearizedOperator: Symmetric pencil (matrix, mass)
    """
    grid = U.grid
    matrix, mass = _form(grid, U.values)
    # Robin terms and Dirichlet vertices
    mass = mass.copy()
    robin = np.zeros(grid.n_nodes)
    keep = np.ones(grid.n_nodes)
    dirichlet = []
    for vertex, alpha in (spec.alpha.items() if spec else ()):
        node = grid.vertex_nodes[vertex]
        if math.isinf(alpha):
            keep[node] = 0.0
            dirichlet.append(node)
        else:
            robin[node] += alpha
    matrix = matrix + diags(robin)
    # Identity rows for Dirichlet vertices
    if dirichlet:
        mask = diags(keep)
        matrix = mask @ matrix @ mask + diags(1.0 - keep)
        mass[dirichlet] = 1.0
    return LinearizedOperator(grid, matrix.tocsr(), mass, tuple(dirichlet))


@dataclass(frozen=True)
class Inertia:
    n: int
    z: int
    n_plus: int

    def as_tuple(self) -> Tuple[int, int, int]:
        return self.n, self.z, self.n_plus

    @property
    def dim(self) -> int:
        return self.n + self.z + self.n_plus


def _block_negatives(d: np.ndarray) -> int:
    """Negative eigenvalues of the block-diagonal factor of scipy.linalg.ldl."""
    count, i, n = 0, 0, d.shape[0]
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            count += int(np.count_nonzero(np.linalg.eigvalsh(d[i:i + 2, i:i + 2]) < 0))
            i += 2
        else:
            count += int(d[i, i] < 0)
            i += 1
    return count


def _sparse_negatives(shifted: csr_matrix) -> Optional[int]:
    """Pivot signs of a no-pivoting LU, or None when pivoting was needed."""
    n = shifted.shape[0]
    try:
        lu = splu(shifted.tocsc(), permc_spec="NATURAL", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError:
        return None
    identity = np.arange(n)
    if not (np.array_equal(lu.perm_r, identity) and np.array_equal(lu.perm_c, identity)):
        return None
    pivots = lu.U.diagonal()
    if not np.all(np.isfinite(pivots)) or np.any(pivots == 0.0):
        return None
    return int(np.count_nonzero(pivots < 0))


def _negatives_below(matrix: Matrix, sigma: float, mass: np.ndarray) -> int:
    """Number of pencil eigenvalues strictly below sigma (Sylvester's law)."""
    if issparse(matrix):
        shifted = (matrix - sigma * diags(mass)).tocsr()
        count = _sparse_negatives(shifted)
        if count is not None:
            return count
        logger.warning("LDL^T needed pivoting at shift %.3g; using a dense eigensolve", sigma)
        return int(np.count_nonzero(np.linalg.eigvalsh(shifted.toarray()) < 0))
    shifted = np.asarray(matrix, dtype=float) - sigma * np.diag(mass)
    _, d, _ = ldl(shifted, lower=True)
    return _block_negatives(d)


def inertia(matrix: Matrix, lam_tol: float = LAMBDA_TOL,
            mass: Optional[np.ndarray] = None) -> Inertia:
    """Inertia (n, z, n_plus) of a symmetric matrix or pencil.

    Eigenvalues with |lambda| <= lam_tol are counted as zero. Dense input
    is factored with the Bunch-Kaufman LDL^T; sparse input with a
    no-pivoting sparse LU whose pivots are the D of LDL^T, falling back to a
    dense eigensolve when the factorization needs row exchanges.
    """
    dim = matrix.shape[0]
    if mass is None:
        mass = np.ones(dim)
    below = _negatives_below(matrix, -lam_tol, mass)
    upto = _negatives_below(matrix, lam_tol, mass)
    return Inertia(below, upto - below, dim - upto)


def _pencil_eigs(matrix: Matrix, mass: np.ndarray, k: int, sigma: float) -> np.ndarray:
    """The k pencil eigenvalues closest to sigma, ascending."""
    n = matrix.shape[0]
    k = max(1, min(k, n))
    if n <= DENSE_LIMIT or k >= n - 1:
        dense = matrix.toarray() if issparse(matrix) else np.asarray(matrix)
        values = eigh(dense, np.diag(mass), eigvals_only=True)
        return np.sort(values[np.argsort(np.abs(values - sigma))[:k]])
    values = eigsh(csr_matrix(matrix).tocsc(), k=k, M=diags(mass).tocsc(), sigma=sigma,
                   which="LM", return_eigenvectors=False)
    return np.sort(values)


def lowest_eigenvalues(op: LinearizedOperator, k: int) -> np.ndarray:
    return _pencil_eigs(op.matrix, op.mass, k, LOW_SHIFT)


def nearest_to_zero(op: LinearizedOperator) -> float:
    try:
        return float(_pencil_eigs(op.matrix, op.mass, 1, 0.0)[0])
    except RuntimeError:
        # exactly singular shift-invert factor
        return 0.0


@dataclass
class HomotopyPoint:
    label: str
    alpha: Tuple[float, ...]
    inertia: Inertia
    nearest: float


@dataclass
class HomotopyTrace:
    vertices: Tuple[str, ...]
    points: List[HomotopyPoint] = field(default_factory=list)
    verdict: bool = False
    reasons: List[str] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def min_gap(self) -> float:
        return min(abs(point.nearest) for point in self.points)


@dataclass
class SpectralReport:
    inertia: Inertia
    eigenvalues: np.ndarray
    nearest: float
    lam_tol: float
    grid_error: float
    odd_mode_estimates: Dict[str, float] = field(default_factory=dict)
    trace: Optional[HomotopyTrace] = None

    @property
    def nz(self) -> Tuple[int, int]:
        return self.inertia.n, self.inertia.z


def _inward_slope(U: GraphFunction, edge_id: str) -> float:
    eg = U.grid.edges[edge_id]
    _, w = U.on_edge(edge_id)
    anchor = eg.anchors[0]
    if anchor.position == 0:
        return (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * eg.step)
    return (-3.0 * w[-1] + 4.0 * w[-2] - w[-3]) / (2.0 * eg.step)


def morse_index(U: GraphFunction, selection: EdgeSelection, lam_tol: float = LAMBDA_TOL,
                n_eigs: Optional[int] = None) -> SpectralReport:
    """Inertia and low spectrum of the Kirchhoff linearization.

    Also estimates the small positive eigenvalue 3 p q of the odd mode on
    every selected loop, p the vertex value and q the inward slope.
    """
    op = assemble_L(U)
    counts = inertia(op.matrix, lam_tol, op.mass)
    eigenvalues = lowest_eigenvalues(op, n_eigs or 2 * selection.N + 4)
    nearest = nearest_to_zero(op)
    odd = {}
    for edge in selection.selected_edges():
        if edge.kind == LOOPING:
            odd[edge.id] = 3.0 * U.at_vertex(edge.vertices[0]) * _inward_slope(U, edge.id)
    report = SpectralReport(counts, eigenvalues, nearest, lam_tol, U.grid.max_step ** 2, odd)
    logger.info("Morse index n=%d z=%d, nearest eigenvalue %.3e", counts.n, counts.z, nearest)
    return report


def homotopy_scan(U: GraphFunction, selection: EdgeSelection, alpha_grid: Sequence[float],
                  lam_tol: float = LAMBDA_TOL, random_rays: int = 0,
                  seed: Optional[int] = None, lam_gap: Optional[float] = None,
                  workers: int = 1) -> HomotopyTrace:
    """Follow inertia and the eigenvalue nearest zero from Kirchhoff to Dirichlet.

    Uniform alpha over the boundary vertices runs through ``alpha_grid``;
    each random ray scales a fixed direction in [0.1, 1]^|B| by the finite
    positive grid values.

    Returns:
        HomotopyTrace: Points in evaluation order and the no-crossing verdict
    """
    grid_values = [float(a) for a in alpha_grid]
    if any(a < 0 or math.isnan(a) for a in grid_values) or grid_values != sorted(grid_values):
        raise ValueError("alpha grid must be nonnegative and increasing")
    vertices = selection.boundary_vertices
    gap = lam_tol if lam_gap is None else lam_gap

    # Build the uniform points, then the random rays
    points: List[Tuple[str, Tuple[float, ...]]] = [
        ("uniform", tuple(a for _ in vertices)) for a in grid_values]
    rng = np.random.default_rng(seed)
    for ray in range(random_rays):
        direction = rng.uniform(0.1, 1.0, size=len(vertices))
        for a in grid_values:
            if 0 < a < INF:
                points.append((f"ray{ray + 1}", tuple(float(a * d) for d in direction)))

    def evaluate(point: Tuple[str, Tuple[float, ...]]) -> HomotopyPoint:
        label, alpha = point
        op = assemble_L(U, RobinSpec(dict(zip(vertices, alpha))))
        result = HomotopyPoint(label, alpha, inertia(op.matrix, lam_tol, op.mass),
                               nearest_to_zero(op))
        logger.debug("alpha %s (%s): inertia %s, nearest %.3e",
                     alpha, label, result.inertia.as_tuple(), result.nearest)
        return result

    # Evaluate every point
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        evaluated = list(pool.map(evaluate, points))

    trace = HomotopyTrace(vertices=vertices, points=evaluated, seed=seed)
    # Verdict
    counts = {(p.inertia.n, p.inertia.z) for p in evaluated}
    if len(counts) > 1:
        trace.reasons.append(f"inertia changes along the scan: {sorted(counts)}")
    if trace.min_gap <= gap:
        trace.reasons.append(f"eigenvalue within {gap:g} of zero (min |lambda| = {trace.min_gap:.3e})")
    uniform = [p for p in evaluated if p.label == "uniform"]
    if uniform and uniform[0].inertia.as_tuple()[:2] != uniform[-1].inertia.as_tuple()[:2]:
        trace.reasons.append("inertia at the first and last grid point differ")
    trace.verdict = not trace.reasons
    return trace


@dataclass
class SturmCount:
    negative: int
    zero_eigenvalue: bool
    terminal_value: float


def sturm_count_edge(bump: BumpSolution, symmetric: bool) -> SturmCount:
    """Negative Dirichlet eigenvalues of the linearization on one edge.

    Shoots the zero-energy linearized equation and counts interior zeros.
    ``symmetric`` takes the even extension on [-span, span] with Dirichlet
    ends (looping edge); otherwise [0, span] with Neumann at 0 (pendant).
    """
    span = bump.span

    def rhs(z, y):
        u = bump.profile(abs(z))
        return [y[1], (1.0 - 6.0 * u * u) * y[0]]

    if symmetric:
        z = np.linspace(-span, span, 2 * len(bump.z) - 1)
        start = [0.0, 1.0]
    else:
        z = bump.z
        start = [1.0, 0.0]
    sol = solve_ivp(rhs, (z[0], z[-1]), start, method="DOP853",
                    rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=z)
    w = sol.y[0][1:-1] if symmetric else sol.y[0][:-1]
    zeros = int(np.count_nonzero(np.signbit(w[:-1]) != np.signbit(w[1:])))
    terminal = float(sol.y[0][-1])
    scale = float(np.max(np.abs(sol.y[0])))
    return SturmCount(zeros, abs(terminal) <= 1e-8 * scale, terminal)


def _remainder_nodes(grid: GraphGrid, selection: EdgeSelection) -> np.ndarray:
    nodes = [grid.edges[e.id].owned for e in selection.remainder_edges()]
    nodes.append(np.array([node for vertex, node in grid.vertex_nodes.items()
                           if vertex not in selection.boundary_vertices], dtype=int))
    return np.sort(np.concatenate(nodes)).astype(int)


def remainder_positivity(U: GraphFunction, selection: EdgeSelection) -> float:
    """Smallest eigenvalue on the remainder with Dirichlet data at the boundary vertices."""
    idx = _remainder_nodes(U.grid, selection)
    if len(idx) == 0:
        return INF
    op = assemble_L(U)
    block = op.matrix[idx][:, idx]
    return float(_pencil_eigs(block, op.mass[idx], 1, LOW_SHIFT)[0])


def remainder_flux(U: GraphFunction, selection: EdgeSelection) -> Dict[str, float]:
    """Discrete outgoing flux of the remainder solution with unit data at one boundary vertex.

    Solves the remainder problem with W = 1 at v_j and W = 0 at the other
    boundary vertices, and returns minus the sum of its outgoing derivatives
    at v_j (the row of the remainder form applied to W).
    """
    grid = U.grid
    remainder_ids = {e.id for e in selection.remainder_edges()}
    form, _ = _form(grid, U.values, remainder_ids)
    idx = _remainder_nodes(grid, selection)
    block = form[idx][:, idx].tocsc()
    fluxes = {}
    for vertex in selection.boundary_vertices:
        node = grid.vertex_nodes[vertex]
        w = np.zeros(grid.n_nodes)
        w[node] = 1.0
        if len(idx):
            rhs = -form[idx][:, [node]].toarray().ravel()
            w[idx] = spsolve(block, rhs) if np.any(rhs) else 0.0
        fluxes[vertex] = float((form @ w)[node])
    return fluxes


@dataclass
class VertexCertificate:
    vertex: str
    end_alphas: Dict[str, float]
    flux_leading: float
    flux_numeric: float
    alpha: float
    applicable: bool = True


@dataclass
class Claim2Certificate:
    vertices: Dict[str, VertexCertificate]

    @property
    def holds(self) -> bool:
        return all(c.applicable and c.alpha < 0 and all(a < 0 for a in c.end_alphas.values())
                   for c in self.vertices.values())


def claim2_certificate(U: GraphFunction, selection: EdgeSelection) -> Claim2Certificate:
    """Robin value a kernel function would need at each boundary vertex.

    Each selected pendant or loop end contributes -s'/s of the even
    linearized solution on its shot bump (loops twice); the remainder
    contributes minus its flux. A negative total at every vertex rules out a
    kernel for all alpha >= 0. Vertices touching selected internal edges are
    reported as not applicable.
    """
    grid = U.grid
    if not grid.scaled:
        raise RegimeError("certificate needs a state on a scaled grid")
    graph = selection.graph
    fluxes = remainder_flux(U, selection)
    result = {}
    for part in selection.partitions:
        if part.M:
            result[part.vertex] = VertexCertificate(part.vertex, {}, float(part.D), fluxes[part.vertex],
                                                    math.nan, applicable=False)
            continue
        p_j = U.at_vertex(part.vertex)
        ends: Dict[str, float] = {}
        total = 0.0
        for edge_id in part.pendants + part.loops:
            edge = graph.edge(edge_id)
            pair = linearized_pair(shoot_bump(grid.stretch * edge.length, p_j))
            ends[edge_id] = -pair.even_ratio
            total += ends[edge_id] * (2 if edge.kind == LOOPING else 1)
        alpha = total - fluxes[part.vertex]
        result[part.vertex] = VertexCertificate(part.vertex, ends, float(part.D),
                                                fluxes[part.vertex], alpha)
        logger.debug("Certificate at %s: ends %s, flux %.4g, alpha %.4g",
                     part.vertex, ends, fluxes[part.vertex], alpha)
    return Claim2Certificate(result)


@dataclass
class InterlacingReport:
    neumann: np.ndarray
    dirichlet: np.ndarray
    holds: bool


def interlacing_check(U: GraphFunction, k: int = 3,
                      slack: Optional[float] = None) -> InterlacingReport:
    """Compare Neumann and Dirichlet spectra at the free ends of all pendants.

    Checks lambda_1^N <= lambda_1^D <= lambda_2^N <= ... up to k values of
    each. The default slack is 10 h^2, the size of the discretization error.
    The ordering holds for a single interior pulse on an interval; pulses
    sitting at the free ends break it.
    """
    grid = U.grid
    slack = 10.0 * grid.max_step ** 2 if slack is None else slack
    op = assemble_L(U)
    terminals = [eg.nodes[0] for eg in grid.edges.values() if eg.edge.kind == PENDANT]
    keep = np.setdiff1d(np.arange(grid.n_nodes), terminals)
    neumann = lowest_eigenvalues(op, k)
    dirichlet = _pencil_eigs(op.matrix[keep][:, keep], op.mass[keep], k, LOW_SHIFT)
    chain = []
    for i in range(k):
        chain.append(neumann[i])
        chain.append(dirichlet[i])
    holds = all(b - a >= -slack for a, b in zip(chain, chain[1:]))
    return InterlacingReport(neumann, dirichlet, holds)


def decoupled_counts(U: GraphFunction, selection: EdgeSelection,
                     lam_tol: float = LAMBDA_TOL) -> Mapping[str, Inertia]:
    """Per-block inertia of the Dirichlet-decoupled operator, remainder included."""
    op = assemble_L(U, RobinSpec.dirichlet(selection.boundary_vertices))
    blocks: Dict[str, Inertia] = {}
    for edge_id in selection.selected:
        idx = U.grid.edges[edge_id].owned
        blocks[edge_id] = inertia(op.matrix[idx][:, idx], lam_tol, op.mass[idx])
    idx = _remainder_nodes(U.grid, selection)
    if len(idx):
        blocks["remainder"] = inertia(op.matrix[idx][:, idx], lam_tol, op.mass[idx])
    return blocks
