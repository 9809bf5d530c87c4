"""
Phase-plane tools for the scaled stationary equation -u'' + u - 2u^3 = 0.

Orbits live on the level sets v^2 - u^2 + u^4 = beta. A single bump runs
from its maximum (p_plus, 0) at z = 0 to the boundary point (p, -q) at
z = span, so T_plus(p, q) = span is the shooting condition.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from errors import RegimeError

logger = logging.getLogger(__name__)

# Operational limits of the small-amplitude regime
P_MAX = 0.05
Q_MAX = 0.05
SPAN_MIN = 3.0

TRAJECTORY_TOL = 1e-9
ODE_RTOL = 1e-12
ODE_ATOL = 1e-15

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_LOWER_SPLIT = 0.5


def soliton(z):
    """sech(z), the homoclinic orbit with maximum 1 at z = 0.

    Evaluated through exp(-|z|) so large arguments underflow cleanly to 0.
    """
    a = np.exp(-np.abs(np.asarray(z, dtype=float)))
    value = 2.0 * a / (1.0 + a * a)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class PhasePoint:
    u: float
    v: float

    def energy(self) -> float:
        return self.v ** 2 - self.u ** 2 + self.u ** 4


@dataclass(frozen=True)
class EnergyLevel:
    beta: float
    x_minus: float  # roots of x^2 - x - beta = 0 in x = u^2
    x_plus: float

    @property
    def p_plus(self) -> float:
        return math.sqrt(self.x_plus)

    @property
    def p_minus(self) -> float:
        if self.x_minus < 0:
            raise RegimeError(f"beta = {self.beta:.6g} >= 0 has no inner turning point")
        return math.sqrt(self.x_minus)


def _level(beta: float) -> EnergyLevel:
    if not beta > -0.25:
        raise RegimeError(f"beta = {beta:.6g} must exceed -1/4")
    root = math.sqrt(1.0 + 4.0 * beta)
    # x_minus from the product x_minus * x_plus = -beta, stable for small beta
    return EnergyLevel(beta, -2.0 * beta / (1.0 + root), 0.5 * (1.0 + root))


def _boundary_level(p: float, q: float) -> EnergyLevel:
    if not p > 0:
        raise RegimeError(f"boundary value p = {p:.6g} must be positive")
    if q < 0:
        raise RegimeError(f"boundary flux q = {q:.6g} must be nonnegative")
    return _level(q * q - p * p + p ** 4)


def energy_level_from_boundary(p: float, q: float) -> EnergyLevel:
    """Energy level through (p, -q), restricted to the inner band beta in (-1/4, 0).

    Raises:
        RegimeError: beta outside (-1/4, 0)
    """
    beta = q * q - p * p + p ** 4
    if not -0.25 < beta < 0:
        raise RegimeError(f"beta = {beta:.6g} outside (-1/4, 0) for p = {p:.6g}, q = {q:.6g}")
    return _boundary_level(p, q)


def _gauss(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, width: float) -> float:
    """Composite Gauss-Legendre rule with panels no wider than ``width``."""
    if b <= a:
        return 0.0
    n = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * f(x)))


def period_T_plus(p: float, q: float) -> float:
    """Length in z of the orbit arc from (p_plus, 0) down to (p, -q).

    The integral of du / sqrt(beta + u^2 - u^4) is split at u = 1/2. Below,
    u = (e^s + x_minus e^-s) / 2 removes the 1/u-type growth; above,
    u = p_plus - t^2 removes the turning-point singularity.
    """
    level = _boundary_level(p, q)
    xm, xp = level.x_minus, level.x_plus
    p_plus = level.p_plus
    if p_plus - p <= 1e-14:
        return 0.0

    split = _LOWER_SPLIT if p < _LOWER_SPLIT else p
    total = 0.0
    if p < split:
        # p^2 - x_minus, written without cancellation
        d = q * q / (xp - p * p)
        s_low = math.log(p + math.sqrt(d))
        s_high = math.log(split + math.sqrt(split * split - xm))

        def lower(s):
            u = 0.5 * (np.exp(s) + xm * np.exp(-s))
            return 1.0 / np.sqrt(xp - u * u)

        total += _gauss(lower, s_low, s_high, 1.0)

    def upper(t):
        u = p_plus - t * t
        return 2.0 / np.sqrt((2.0 * p_plus - t * t) * (u * u - xm))

    total += _gauss(upper, 0.0, math.sqrt(p_plus - split), 0.25)
    return total


def _check_small(p: float, q: float) -> None:
    if not (0 < p <= P_MAX and 0 < q <= Q_MAX):
        raise RegimeError(
            f"(p, q) = ({p:.6g}, {q:.6g}) outside the small-amplitude box (0, {P_MAX}]^2")


def period_partials(p: float, q: float) -> Tuple[float, float]:
    """Central differences of T_plus in p and q with relative step 1e-4."""
    _check_small(p, q)
    hp, hq = 1e-4 * p, 1e-4 * q
    dp = (period_T_plus(p + hp, q) - period_T_plus(p - hp, q)) / (2.0 * hp)
    dq = (period_T_plus(p, q + hq) - period_T_plus(p, q - hq)) / (2.0 * hq)
    return dp, dq


def _rhs(z, y):
    u, v = y
    return [v, u - 2.0 * u ** 3]


@dataclass
class BumpSolution:
    """Decreasing half bump on [0, span] with u(0) = p_plus and u(span) = p."""

    span: float
    p: float
    q: float
    beta: float
    p_plus: float
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray
    energy_drift: float
    dense: Callable = field(repr=False, compare=False)

    def profile(self, z) -> np.ndarray:
        """Amplitude at arbitrary points of [0, span]."""
        return self.dense(z)[0]

    @property
    def dtn_residual(self) -> float:
        """|u'(span) - u(span) + 4 exp(-span)| for the computed bump."""
        return abs(-self.q - self.p + 4.0 * math.exp(-self.span))

    def reflected(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Even extension to [-span, span] as (z, u, v)."""
        z = np.concatenate([-self.z[:0:-1], self.z])
        u = np.concatenate([self.u[:0:-1], self.u])
        v = np.concatenate([-self.v[:0:-1], self.v])
        return z, u, v

    def reintegrate(self) -> PhasePoint:
        """Integrate forward from (p_plus, 0) and return the state at z = span."""
        sol = solve_ivp(_rhs, (0.0, self.span), [self.p_plus, 0.0], method="DOP853",
                        rtol=ODE_RTOL, atol=ODE_ATOL)
        return PhasePoint(float(sol.y[0, -1]), float(sol.y[1, -1]))


def shoot_bump(span: float, p: float, samples: int = 2001) -> BumpSolution:
    """Find the monotone bump of length ``span`` ending at amplitude p.

    Args:
        span: Scaled half-length (pendant length or loop half-length)
        p: Boundary amplitude at z = span
        samples: Number of stored samples on [0, span]

    Returns:
        BumpSolution: Sampled trajectory with its flux q

    Raises:
        RegimeError: No positive q, or a post-check on the trajectory failed
    """
    if span < SPAN_MIN:
        raise RegimeError(f"span {span:.6g} below the operational minimum {SPAN_MIN}")
    if not 0 < p <= P_MAX:
        raise RegimeError(f"boundary amplitude p = {p:.6g} outside (0, {P_MAX}]")

    longest = period_T_plus(p, 0.0)
    if span > longest:
        raise RegimeError(
            f"no positive flux for p = {p:.6g}: T_+(p, 0) = {longest:.6g} < span {span:.6g}")
    shortest = period_T_plus(p, Q_MAX)
    if span < shortest:
        raise RegimeError(
            f"flux for p = {p:.6g}, span {span:.6g} would exceed q_max = {Q_MAX}")

    def mismatch(q):
        return period_T_plus(p, q) - span

    q = brentq(mismatch, 0.0, Q_MAX, xtol=1e-22, rtol=1e-14, maxiter=200)
    # one Newton polish on the bracketed root
    if q > 0:
        hq = 1e-4 * q
        slope = (mismatch(q + hq) - mismatch(q - hq)) / (2.0 * hq)
        polished = q - mismatch(q) / slope
        if 0 < polished and abs(mismatch(polished)) <= abs(mismatch(q)):
            q = polished
    if not q > 0:
        raise RegimeError(f"degenerate flux q = {q:.3g} for p = {p:.6g}, span {span:.6g}")

    level = _boundary_level(p, q)
    sol = solve_ivp(_rhs, (span, 0.0), [p, -q], method="DOP853",
                    rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True)
    if not sol.success:
        raise RegimeError(f"bump integration failed: {sol.message}")

    z = np.linspace(0.0, span, samples)
    u, v = sol.sol(z)
    drift = float(np.max(np.abs(v * v - u * u + u ** 4 - level.beta)))

    bump = BumpSolution(span=span, p=p, q=q, beta=level.beta, p_plus=level.p_plus,
                        z=z, u=u, v=v, energy_drift=drift, dense=sol.sol)
    if drift > TRAJECTORY_TOL:
        raise RegimeError(f"energy drift {drift:.3g} along the bump exceeds {TRAJECTORY_TOL}")
    if np.any(u <= 0) or np.any(np.diff(u) >= 0):
        raise RegimeError("shot bump is not positive and decreasing")
    if u[0] <= 1.0 / math.sqrt(2.0):
        raise RegimeError(f"bump maximum {u[0]:.6g} does not exceed 1/sqrt(2)")
    logger.debug("Bump span=%.4g p=%.6g -> q=%.6g, drift %.2g", span, p, q, drift)
    return bump


@dataclass
class LinearizedPair:
    """Odd and even solutions of -w'' + w - 6u^2 w = 0 along a bump."""

    z: np.ndarray
    du: np.ndarray
    s: np.ndarray
    ds: np.ndarray
    odd_ratio: float  # u''/u' at the boundary, reflected orientation
    even_ratio: float  # s'/s at z = span
    s_zeros: int


def _linearized_rhs(bump: BumpSolution):
    def rhs(z, y):
        u = bump.profile(z)
        return [y[1], (1.0 - 6.0 * u * u) * y[0]]
    return rhs


def linearized_pair(bump: BumpSolution) -> LinearizedPair:
    """Integrate the even solution s (s(0) = 1, s'(0) = 0) along a bump.

    Raises:
        RegimeError: u' changes sign on (0, span] or s does not vanish exactly once
    """
    sol = solve_ivp(_linearized_rhs(bump), (0.0, bump.span), [1.0, 0.0], method="DOP853",
                    rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=bump.z)
    s, ds = sol.y
    if np.any(bump.v[1:] >= 0):
        raise RegimeError("u' is not negative on (0, span]")
    zeros = int(np.count_nonzero(np.signbit(s[:-1]) != np.signbit(s[1:])))
    if zeros != 1:
        raise RegimeError(f"even linearized solution has {zeros} zeros, expected 1")

    u_end, v_end = bump.u[-1], bump.v[-1]
    odd_ratio = (u_end - 2.0 * u_end ** 3) / (-v_end)
    return LinearizedPair(z=bump.z, du=bump.v, s=s, ds=ds, odd_ratio=float(odd_ratio),
                          even_ratio=float(ds[-1] / s[-1]), s_zeros=zeros)


def boundary_sensitivity(bump: BumpSolution, rel_step: float = 1e-5) -> np.ndarray:
    """d u / d p at fixed q along the bump, by re-shooting from perturbed maxima."""
    step = rel_step * bump.p
    profiles = []
    for p in (bump.p + step, bump.p - step):
        top = _boundary_level(p, bump.q).p_plus
        sol = solve_ivp(_rhs, (0.0, bump.span), [top, 0.0], method="DOP853",
                        rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=bump.z)
        profiles.append(sol.y[0])
    return (profiles[0] - profiles[1]) / (2.0 * step)
