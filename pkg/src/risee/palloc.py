"""
Energy-efficient power allocation: Dinkelbach outer loop wrapped around an
iterative quadratic transform (IQT) inner loop.

Inner update per iteration (all users at once)::

    Gamma_k = p_k z_kk / (sum_{j!=k} p_j z_kj + s2)
    y_k     = sqrt(theta (1 + Gamma_k) p_k z_kk) / (sum_j p_j z_kj + s2)
    p_k     = y_k^2 theta (1 + Gamma_k) z_kk / (rho + eta xi + sum_j y_j^2 z_jk)^2

with ``theta = 1/ln 2`` and ``rho >= 0`` the multiplier of the sum-power
constraint, found by bisection whenever the unconstrained update overshoots.

Units: the quadratic-transform objective is written per hertz of bandwidth
(``SE - eta/BW * P``), so internally ``eta`` is carried as ``eta / BW``
(bps/Hz per watt) and ``rho`` lives in the same units. Public functions take
and return ``eta`` in bits/joule and ``J`` in bits/s; tolerances are given
per hertz.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

THETA = 1.0 / math.log(2.0)

# status bits
OUTER_NOT_CONVERGED = 1
INNER_NOT_CONVERGED = 2
BISECTION_NOT_CONVERGED = 4

MAX_DOUBLINGS = 200

TRACE_COLUMNS = ("n", "t", "eta", "J", "sum_p", "rho")


class BisectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Stopping rules. ``eps_outer`` and ``eps_inner`` are in units of J/BW (bps/Hz)."""
    eps_outer: float = 1e-6
    eps_inner: float = 1e-8
    max_outer: int = 100
    max_inner: int = 5000
    max_bisect: int = 200
    bisect_tol: float = 1e-12

    def __post_init__(self):
        if not (self.eps_outer > 0 and self.eps_inner > 0 and self.bisect_tol > 0):
            raise ValueError("tolerances must be positive")
        if min(self.max_outer, self.max_inner, self.max_bisect) < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass(eq=False)
class AllocState:
    """Result (and last iterate) of the allocator.

    ``gamma``, ``y``, ``rho`` and ``eta_last`` are the quantities used in the
    final power update, so the Lagrangian stationarity of that update can be
    checked from them.
    """
    p: np.ndarray
    eta: float                 # bits/J at p
    gamma: np.ndarray
    y: np.ndarray
    rho: float                 # per-Hz multiplier of the last update
    eta_last: float            # bits/J used in the last inner loop
    outer_iter: int
    inner_iter: int
    j_value: float             # J(p; eta_last) in bits/s
    status: int = 0
    trace: np.ndarray = field(default=None, repr=False)

    @property
    def converged(self):
        return self.status == 0

    def __iter__(self):
        yield self.p
        yield self.eta


# --------------------------------------------------------------------------
# compiled kernels (per-Hz units)
# --------------------------------------------------------------------------

@njit(cache=True)
def _sinr(zeta, p, noise):
    k_users = p.shape[0]
    out = np.empty(k_users)
    for k in range(k_users):
        interf = 0.0
        for j in range(k_users):
            if j != k:
                interf += p[j] * zeta[k, j]
        out[k] = p[k] * zeta[k, k] / (interf + noise)
    return out


@njit(cache=True)
def _y(p, gamma, zeta, noise):
    k_users = p.shape[0]
    out = np.empty(k_users)
    for k in range(k_users):
        tot = noise
        for j in range(k_users):
            tot += p[j] * zeta[k, j]
        out[k] = math.sqrt(THETA * (1.0 + gamma[k]) * p[k] * zeta[k, k]) / tot
    return out


@njit(cache=True)
def _p_of_rho(gamma, y, eta_t, rho, zeta, xi, out):
    k_users = gamma.shape[0]
    total = 0.0
    for k in range(k_users):
        num = y[k] * y[k] * THETA * (1.0 + gamma[k]) * zeta[k, k]
        if num == 0.0:
            out[k] = 0.0
            continue
        den = rho + eta_t * xi
        for j in range(k_users):
            den += y[j] * y[j] * zeta[j, k]
        out[k] = num / (den * den)
        total += out[k]
    return total


@njit(cache=True)
def _solve_rho(gamma, y, eta_t, zeta, xi, pmax, tol, max_bisect, out):
    """Fill ``out`` with the feasible power update; return (rho, ok)."""
    s = _p_of_rho(gamma, y, eta_t, 0.0, zeta, xi, out)
    if s <= pmax:
        return 0.0, True
    lo = 0.0
    hi = 1.0
    n = 0
    while _p_of_rho(gamma, y, eta_t, hi, zeta, xi, out) > pmax:
        lo = hi
        hi *= 2.0
        n += 1
        if n > MAX_DOUBLINGS:
            return hi, False
    s = _p_of_rho(gamma, y, eta_t, hi, zeta, xi, out)
    ok = s >= (1.0 - tol) * pmax
    it = 0
    while not ok and it < max_bisect:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket exhausted at machine precision
            ok = True
            break
        s = _p_of_rho(gamma, y, eta_t, mid, zeta, xi, out)
        if s > pmax:
            lo = mid
        else:
            hi = mid
            ok = s >= (1.0 - tol) * pmax
        it += 1
    _p_of_rho(gamma, y, eta_t, hi, zeta, xi, out)
    return hi, ok


@njit(cache=True)
def _se(zeta, p, noise):
    g = _sinr(zeta, p, noise)
    s = 0.0
    for k in range(g.shape[0]):
        s += math.log2(1.0 + g[k])
    return s


@njit(cache=True)
def _objective(p, eta_t, zeta, noise, pfixed, xi):
    return _se(zeta, p, noise) - eta_t * (pfixed + xi * p.sum())


@njit(cache=True)
def _ee(p, zeta, noise, pfixed, xi):
    return _se(zeta, p, noise) / (pfixed + xi * p.sum())


@njit(cache=True)
def _iqt_map(p, eta_t, zeta, noise, xi, pmax, max_bisect, bis_tol, out, gamma_out, y_out):
    """One Gamma -> y -> p update; returns (rho, ok)."""
    gamma = _sinr(zeta, p, noise)
    y = _y(p, gamma, zeta, noise)
    rho, ok = _solve_rho(gamma, y, eta_t, zeta, xi, pmax, bis_tol, max_bisect, out)
    gamma_out[:] = gamma
    y_out[:] = y
    return rho, ok


@njit(cache=True)
def _iqt(p, eta_t, zeta, noise, pfixed, xi, pmax, eps_inner, max_inner, max_bisect,
         bis_tol, trace, row, n_outer, gamma_out, y_out):
    """Inner loop starting from ``p`` (modified in place).

    Each iteration is one safeguarded SQUAREM cycle over the IQT map ``T``:
    two plain updates, a squared extrapolation projected back onto the
    feasible set, and one more update from there. The extrapolated result is
    kept only if its ``J`` beats the second plain update, so ``J`` never
    decreases and the returned point is always an exact output of ``T``.

    Returns (J, iterations, rho, status, next trace row).
    """
    k_users = p.shape[0]
    status = INNER_NOT_CONVERGED
    j_prev = _objective(p, eta_t, zeta, noise, pfixed, xi)
    rho = 0.0
    p1 = np.empty(k_users)
    p2 = np.empty(k_users)
    p3 = np.empty(k_users)
    pe = np.empty(k_users)
    g1 = np.empty(k_users)
    y1 = np.empty(k_users)
    g3 = np.empty(k_users)
    y3 = np.empty(k_users)
    if row < trace.shape[0]:
        trace[row, 0] = n_outer
        trace[row, 1] = 0
        trace[row, 2] = eta_t
        trace[row, 3] = j_prev
        trace[row, 4] = p.sum()
        trace[row, 5] = np.nan
        row += 1
    j_new = j_prev
    t = 0
    while t < max_inner:
        t += 1
        r1, ok1 = _iqt_map(p, eta_t, zeta, noise, xi, pmax, max_bisect, bis_tol, p1, g1, y1)
        rho, ok2 = _iqt_map(p1, eta_t, zeta, noise, xi, pmax, max_bisect, bis_tol, p2,
                            gamma_out, y_out)
        if not (ok1 and ok2):
            status |= BISECTION_NOT_CONVERGED
        j_new = _objective(p2, eta_t, zeta, noise, pfixed, xi)
        nr = 0.0
        nv = 0.0
        for k in range(k_users):
            r = p1[k] - p[k]
            v = p2[k] - 2.0 * p1[k] + p[k]
            nr += r * r
            nv += v * v
        if nv > 0.0:
            alpha = -math.sqrt(nr / nv)
            if alpha > -1.0:
                alpha = -1.0
            s = 0.0
            for k in range(k_users):
                r = p1[k] - p[k]
                v = p2[k] - 2.0 * p1[k] + p[k]
                pe[k] = p[k] - 2.0 * alpha * r + alpha * alpha * v
                if pe[k] < 0.0 or p2[k] == 0.0:
                    pe[k] = 0.0
                s += pe[k]
            if s > pmax:
                for k in range(k_users):
                    pe[k] *= pmax / s
            if s > 0.0:
                r3, ok3 = _iqt_map(pe, eta_t, zeta, noise, xi, pmax, max_bisect, bis_tol,
                                   p3, g3, y3)
                j3 = _objective(p3, eta_t, zeta, noise, pfixed, xi)
                if ok3 and j3 >= j_new:
                    p2[:] = p3
                    gamma_out[:] = g3
                    y_out[:] = y3
                    rho = r3
                    j_new = j3
        p[:] = p2
        if row < trace.shape[0]:
            trace[row, 0] = n_outer
            trace[row, 1] = t
            trace[row, 2] = eta_t
            trace[row, 3] = j_new
            trace[row, 4] = p.sum()
            trace[row, 5] = rho
            row += 1
        if abs(j_new - j_prev) <= eps_inner:
            status &= ~INNER_NOT_CONVERGED
            break
        j_prev = j_new
    return j_new, t, rho, status, row


@njit(cache=True)
def _allocate(zeta, noise, pfixed, xi, pmax, eps_outer, eps_inner, max_outer, max_inner,
              max_bisect, bis_tol, p0, trace):
    k_users = p0.shape[0]
    p = p0.copy()
    gamma = np.zeros(k_users)
    y = np.zeros(k_users)
    any_active = False
    for k in range(k_users):
        if zeta[k, k] <= 0.0:
            p[k] = 0.0
        else:
            any_active = True
    if not any_active:
        return p * 0.0, 0.0, gamma, y, 0.0, 0.0, 0, 0, 0.0, 0, 0
    status = OUTER_NOT_CONVERGED
    row = 0
    n = 0
    inner_total = 0
    eta_t = 0.0
    rho = 0.0
    j_val = 0.0
    while n < max_outer:
        n += 1
        eta_t = _ee(p, zeta, noise, pfixed, xi)
        j_val, t, rho, st, row = _iqt(p, eta_t, zeta, noise, pfixed, xi, pmax, eps_inner,
                                      max_inner, max_bisect, bis_tol, trace, row, n, gamma, y)
        inner_total += t
        status |= st
        if abs(j_val) <= eps_outer:
            status &= ~OUTER_NOT_CONVERGED
            break
    return (p, _ee(p, zeta, noise, pfixed, xi), gamma, y, rho, eta_t, n, inner_total,
            j_val, status, row)


@njit(cache=True)
def _allocate_batch(zetas, noise, pfixed, xi, pmax, eps_outer, eps_inner, max_outer,
                    max_inner, max_bisect, bis_tol, p0):
    b = zetas.shape[0]
    k_users = zetas.shape[1]
    p_out = np.zeros((b, k_users))
    ee = np.zeros(b)
    outer = np.zeros(b, dtype=np.int64)
    status = np.zeros(b, dtype=np.int64)
    empty = np.zeros((0, 6))
    for i in range(b):
        res = _allocate(zetas[i], noise, pfixed[i], xi, pmax, eps_outer, eps_inner,
                        max_outer, max_inner, max_bisect, bis_tol, p0[i], empty)
        p_out[i] = res[0]
        ee[i] = res[1]
        outer[i] = res[6]
        status[i] = res[9]
    return p_out, ee, outer, status


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

def _arr(x):
    return np.ascontiguousarray(x, dtype=float)


def objective_J(p, eta, zeta, noise, p_fixed, xi, bandwidth):
    """``BW * SE(p) - eta * (p_fixed + xi * sum(p))`` in bits/s."""
    p = _arr(p)
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    return bandwidth * _se(_arr(zeta), p, float(noise)) - eta * (p_fixed + xi * p.sum())


def dinkelbach_eta(p_prev, zeta, noise, p_fixed, xi, bandwidth):
    """Energy efficiency (bits/J) at ``p_prev``."""
    return bandwidth * _ee(_arr(p_prev), _arr(zeta), float(noise), float(p_fixed), float(xi))


def gamma_update(p, zeta, noise):
    return _sinr(_arr(zeta), _arr(p), float(noise))


def y_update(p, gamma, zeta, noise):
    return _y(_arr(p), _arr(gamma), _arr(zeta), float(noise))


def p_update(gamma, y, eta, rho, zeta, xi, bandwidth=1.0):
    """Closed-form power update for a given multiplier ``rho``.

    ``eta`` is in bits/J and is divided by ``bandwidth``; ``rho`` is per hertz.
    With ``bandwidth=1`` the update is evaluated exactly as written above.
    """
    gamma, y, zeta = _arr(gamma), _arr(y), _arr(zeta)
    eta_t = eta / bandwidth
    den = rho + eta_t * xi + (y ** 2) @ zeta
    num = y ** 2 * THETA * (1.0 + gamma) * np.diagonal(zeta)
    if np.any((den == 0) & (num != 0)) or np.all(den == 0):
        raise ValueError("zero denominator in power update")
    out = np.empty_like(gamma)
    _p_of_rho(gamma, y, float(eta_t), float(rho), zeta, float(xi), out)
    return out


def solve_rho(gamma, y, eta, zeta, xi, p_t_max, tol=1e-12, bandwidth=1.0, max_bisect=200):
    """Multiplier of the sum-power constraint for one power update.

    Returns 0 when the unconstrained update already fits, otherwise the root
    of ``sum(p(rho)) = p_t_max`` located by doubling from 1 then bisection.
    Raises ``BisectionError`` if the iteration cap is hit first.
    """
    if not p_t_max > 0:
        raise ValueError("p_t_max must be positive")
    out = np.empty(len(gamma))
    rho, ok = _solve_rho(_arr(gamma), _arr(y), float(eta / bandwidth), _arr(zeta), float(xi),
                         float(p_t_max), float(tol), int(max_bisect), out)
    if not ok:
        raise BisectionError("bisection on the power multiplier did not converge")
    return rho


def _state(res, bandwidth, trace=None):
    p, ee_t, gamma, y, rho, eta_t, n, t, j_val, status, rows = res
    if trace is not None:
        trace = trace[:rows].copy()
        trace[:, 2] *= bandwidth
        trace[:, 3] *= bandwidth
    return AllocState(p=np.asarray(p), eta=bandwidth * ee_t, gamma=np.asarray(gamma),
                      y=np.asarray(y), rho=rho, eta_last=bandwidth * eta_t, outer_iter=int(n),
                      inner_iter=int(t), j_value=bandwidth * j_val, status=int(status),
                      trace=trace)


def _check_p0(p0, p_t_max):
    p0 = _arr(p0)
    if np.any(p0 < 0) or p0.sum() > p_t_max * (1 + 1e-12):
        raise ValueError("initial power vector is infeasible")
    return p0


def iqt_solve(p_init, eta, zeta, noise, p_fixed, xi, bandwidth, p_t_max, tol=None,
              trace=False):
    """Inner IQT loop for a fixed Dinkelbach parameter ``eta`` (bits/J).

    Stops once consecutive ``J`` values differ by at most ``tol.eps_inner * BW``.
    A non-converged run returns its last (best) iterate with
    ``INNER_NOT_CONVERGED`` set in ``status``.
    """
    tol = tol or Tolerances()
    zeta = _arr(zeta)
    p = _check_p0(p_init, p_t_max).copy()
    p[np.diagonal(zeta) <= 0] = 0.0
    buf = np.zeros((tol.max_inner + 1 if trace else 0, 6))
    gamma = np.zeros(len(p))
    y = np.zeros(len(p))
    eta_t = eta / bandwidth
    j_val, t, rho, status, rows = _iqt(p, eta_t, zeta, float(noise), float(p_fixed), float(xi),
                                       float(p_t_max), tol.eps_inner, tol.max_inner,
                                       tol.max_bisect, tol.bisect_tol, buf, 0, 0, gamma, y)
    ee_t = _ee(p, zeta, float(noise), float(p_fixed), float(xi))
    res = (p, ee_t, gamma, y, rho, eta_t, 0, t, j_val, status, rows)
    return _state(res, bandwidth, buf if trace else None)


def allocate_power(zeta, noise, p_fixed, xi, bandwidth, p_t_max, tol=None, p0=None,
                   trace=False):
    """Maximize ``BW * SE(p) / (p_fixed + xi * sum(p))`` over ``sum(p) <= p_t_max``.

    Parameters
    ----------
    zeta : (K, K) array
        Effective gains, ``zeta[k, j] = |h_k omega_j|^2``.
    p0 : (K,) array, optional
        Feasible start; defaults to the uniform split ``p_t_max / K``.
    trace : bool
        Record one row ``(n, t, eta, J, sum_p, rho)`` per iteration.

    Returns
    -------
    AllocState
        Unpacks as ``(p, eta)``.
    """
    tol = tol or Tolerances()
    zeta = _arr(zeta)
    k_users = zeta.shape[0]
    if not p_t_max > 0:
        raise ValueError("p_t_max must be positive")
    if p0 is None:
        p0 = np.full(k_users, p_t_max / k_users)
    p0 = _check_p0(p0, p_t_max)
    if not np.any(p0[np.diagonal(zeta) > 0] > 0) and np.any(np.diagonal(zeta) > 0):
        raise ValueError("initial powers of all served users are zero (fixed point)")
    rows = tol.max_outer * (tol.max_inner + 1) if trace else 0
    buf = np.zeros((rows, 6))
    res = _allocate(zeta, float(noise), float(p_fixed), float(xi), float(p_t_max),
                    tol.eps_outer, tol.eps_inner, tol.max_outer, tol.max_inner,
                    tol.max_bisect, tol.bisect_tol, p0, buf)
    return _state(res, bandwidth, buf if trace else None)


def allocate_power_batch(zetas, noise, p_fixed, xi, bandwidth, p_t_max, tol=None, p0=None):
    """``allocate_power`` over a stack of gain matrices ``(B, K, K)``.

    Returns ``(p, ee, outer_iters, status)`` with ``ee`` in bits/J.
    """
    tol = tol or Tolerances()
    zetas = np.ascontiguousarray(zetas, dtype=float)
    b, k_users = zetas.shape[:2]
    p_fixed = np.broadcast_to(np.asarray(p_fixed, dtype=float), (b,)).copy()
    if p0 is None:
        p0 = np.full((b, k_users), p_t_max / k_users)
    p, ee, outer, status = _allocate_batch(zetas, float(noise), p_fixed, float(xi),
                                           float(p_t_max), tol.eps_outer, tol.eps_inner,
                                           tol.max_outer, tol.max_inner, tol.max_bisect,
                                           tol.bisect_tol, _arr(p0))
    return p, bandwidth * ee, outer, status


def surrogate_G(p, gamma, y, eta, zeta, noise, p_fixed, xi, bandwidth=1.0):
    """Quadratic-transform surrogate in per-Hz units."""
    p, gamma, y, zeta = _arr(p), _arr(gamma), _arr(y), _arr(zeta)
    lin = 2.0 * y * np.sqrt(THETA * (1.0 + gamma) * p * np.diagonal(zeta))
    quad = y ** 2 * (zeta @ p + noise)
    return float(lin.sum() - quad.sum() - eta / bandwidth * (p_fixed + xi * p.sum()))


def lagrangian(p, gamma, y, eta, rho, zeta, noise, p_fixed, xi, p_t_max, bandwidth=1.0):
    """Surrogate plus ``rho * (p_t_max - sum(p))``, per hertz."""
    return surrogate_G(p, gamma, y, eta, zeta, noise, p_fixed, xi, bandwidth) \
        + rho * (p_t_max - float(np.sum(p)))


def lagrangian_gradient(p, gamma, y, eta, rho, zeta, xi, bandwidth=1.0):
    """Analytic ``dL/dp_k`` (undefined where ``p_k == 0``)."""
    p, gamma, y, zeta = _arr(p), _arr(gamma), _arr(y), _arr(zeta)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = y * np.sqrt(THETA * (1.0 + gamma) * np.diagonal(zeta)) / np.sqrt(p)
    return first - (y ** 2) @ zeta - eta / bandwidth * xi - rho


def write_trace(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in trace:
            w.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2:]])
