"""Brute-force multi-port solver used as the correctness oracle.

Solves the full wave-closure of the partitioned network without exploiting
any structure: the stack waves satisfy b_S = S_ST a_T + S_SS Gamma b_S, so
b_S = [I - S_SS Gamma]^-1 S_ST a_T and the end-to-end transfer is
S_RT + S_RS Gamma [I - S_SS Gamma]^-1 S_ST. Cost is O(N^3) in the total
stack port count N; the feed-forward path in ``cascade`` is validated
against this module.
"""

import warnings

import numpy as np
import scipy.linalg

from .counting import mm
from .errors import NumericalError

__all__ = [
    "solve_sim_waves",
    "internal_operator",
    "e2e_global",
    "nilpotency_check",
]

_RCOND_LIMIT = 1e-12  # condition estimate above 1e12 is rejected


def _factor(a, counter=None):
    """Pivoted LU of a with a 1-norm condition gate."""
    if counter is not None:
        n = a.shape[0]
        counter.add(n * n * n // 3)
    anorm = np.linalg.norm(a, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
        except (ValueError, scipy.linalg.LinAlgError) as exc:
            raise NumericalError(f"LU factorization failed: {exc}")
    rcond, info = scipy.linalg.lapack.zgecon(lu, anorm)
    if info < 0:
        raise NumericalError(f"condition estimate failed (info={info})")
    if not np.isfinite(rcond) or rcond < _RCOND_LIMIT:
        raise NumericalError(
            f"system is singular or ill-conditioned (rcond={rcond:.3e})"
        )
    return lu, piv


def _solve_resolvent(s_ss, gamma, rhs, counter=None):
    """Solve [I - S_SS Gamma] x = rhs by direct factorization."""
    n = s_ss.shape[0]
    a = np.eye(n, dtype=np.complex128) - mm(s_ss, gamma, counter)
    lu, piv = _factor(a, counter)
    if counter is not None:
        counter.add(n * n * (rhs.shape[1] if rhs.ndim == 2 else 1))
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite solution from the wave closure")
    return x


def solve_sim_waves(scattering, gamma, a_t, counter=None):
    """Reflected stack waves b_S for incident transmitter waves a_t.

    Returns the unique solution of b_S = S_ST a_T + S_SS Gamma b_S. The
    system must be well conditioned (estimated condition below 1e12),
    otherwise a NumericalError is raised.
    """
    a_t = np.asarray(a_t, dtype=np.complex128)
    rhs = mm(scattering.s_st, a_t, counter)
    return _solve_resolvent(scattering.s_ss, gamma, rhs, counter)


def internal_operator(s_ss, gamma, counter=None):
    """Internal propagation operator T_S = Gamma [I - S_SS Gamma]^-1."""
    n = s_ss.shape[0]
    # transpose trick keeps the factorization on the left-hand side
    a = np.eye(n, dtype=np.complex128) - mm(s_ss, gamma, counter)
    lu, piv = _factor(a.T, counter)
    if counter is not None:
        counter.add(n * n * n)
    t_s = scipy.linalg.lu_solve((lu, piv), gamma.T).T
    if not np.all(np.isfinite(t_s)):
        raise NumericalError("non-finite internal propagation operator")
    return t_s


def e2e_global(scattering, gamma, counter=None):
    """End-to-end M x L transfer S_RT + S_RS Gamma [I - S_SS Gamma]^-1 S_ST.

    This is the oracle path: one dense solve of the full N-port closure,
    with no use of the layered structure.
    """
    x = _solve_resolvent(scattering.s_ss, gamma, scattering.s_st, counter)
    gx = mm(gamma, x, counter)
    return scattering.s_rt + mm(scattering.s_rs, gx, counter)


def nilpotency_check(s_ss, gamma, tol=1e-12, max_power=None):
    """Smallest m with (S_SS Gamma)^m = 0, or None when no such m <= max_power.

    For a feed-forward stack (nearest-neighbor coupling, unilateral cells)
    the product is nilpotent with index at most Q+1; a dense long-range
    coupling generically breaks this. Entries are compared against ``tol``
    in absolute value, and ``max_power`` defaults to the matrix dimension.
    """
    n = s_ss.shape[0]
    if max_power is None:
        max_power = n
    product = s_ss @ gamma
    power = np.array(product)
    for m in range(1, max_power + 1):
        peak = np.max(np.abs(power))
        if peak <= tol:
            return m
        if not np.isfinite(peak) or peak > 1e30:
            return None
        power = power @ product
    return None
