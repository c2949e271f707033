"""JIT-compiled inner loops with a pure-numpy fallback.

The two sequential recursions below dominate simulation runtime.  By default
they are compiled with numba's ``@njit``; setting the environment variable
``MRFRF_DISABLE_NUMBA=1`` (or having numba unavailable) selects the plain
numpy implementations.  Both paths are exported so they can be benchmarked
against each other (see ``benchmarks/kernel_bench.py``).
"""

import os

import numpy as np

_ENV_DISABLED = os.environ.get("MRFRF_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on",
)


def ss_filter_numpy(A, B, C, D, u, x0):
    """State-space recursion x+ = Ax + Bu, y = Cx + Du.

    u has shape (n_samples, n_in); returns y with shape (n_samples, n_out).
    """
    n_samples = u.shape[0]
    y = np.empty((n_samples, C.shape[0]))
    x = x0.copy()
    for n in range(n_samples):
        un = u[n]
        y[n] = C @ x + D @ un
        x = A @ x + B @ un
    return y


def multirate_loop_numpy(Ap, Bp, Cp, Dp, Aw, Bw, Cw, Dw, Ac, Bc, Cc, Dc,
                         Minv, F, r, eps_h, d, eps_l):
    """One run of the multirate feedback recursion.

    The plant and input filters advance every fast step; the controller reads
    the measured slow output once per slow step and its output is held for F
    fast steps.  The direct-feedthrough loop at the sampling instants is
    resolved with the precomputed inverse ``Minv = (I + Dp Dw Dc)^-1``.

    Shapes: r, d (n_fast, n_u); eps_h (n_fast, n_y); eps_l (n_slow, n_y).
    Returns (u, y, yl, status); status is the first slow step at which the
    state norm overflowed, or -1 if the run stayed finite.
    """
    n_fast = r.shape[0]
    n_slow = n_fast // F
    n_u = r.shape[1]
    n_y = Cp.shape[0]
    xp = np.zeros(Ap.shape[0])
    xw = np.zeros(Aw.shape[0])
    xc = np.zeros(Ac.shape[0])
    u = np.empty((n_fast, n_u))
    y = np.empty((n_fast, n_y))
    yl = np.empty((n_slow, n_y))
    status = -1
    for m in range(n_slow):
        n0 = m * F
        # measured output at the sampling instant, feedthrough loop resolved
        rhs = (Cp @ xp + Dp @ (r[n0] + d[n0] - Cw @ xw - Dw @ (Cc @ xc)
                               - Dw @ (Dc @ eps_l[m])) + eps_h[n0])
        y0 = Minv @ rhs
        ylm = y0 + eps_l[m]
        yl[m] = ylm
        v = Cc @ xc + Dc @ ylm
        for i in range(F):
            n = n0 + i
            w = Cw @ xw + Dw @ v
            un = r[n] - w
            u[n] = un
            pin = un + d[n]
            if i == 0:
                y[n] = y0
            else:
                y[n] = Cp @ xp + Dp @ pin + eps_h[n]
            xp = Ap @ xp + Bp @ pin
            xw = Aw @ xw + Bw @ v
        xc = Ac @ xc + Bc @ ylm
        if status < 0:
            big = 0.0
            for j in range(xp.shape[0]):
                a = abs(xp[j])
                if a > big:
                    big = a
            if not np.isfinite(big) or big > 1e100:
                status = m
                break
    return u, y, yl, status


NUMBA_ENABLED = False
ss_filter = ss_filter_numpy
multirate_loop = multirate_loop_numpy

if not _ENV_DISABLED:
    try:
        from numba import njit

        ss_filter = njit(cache=True)(ss_filter_numpy)
        multirate_loop = njit(cache=True)(multirate_loop_numpy)
        NUMBA_ENABLED = True
    except ImportError:
        pass
