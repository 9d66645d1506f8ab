"""Synchronous explicit-Euler relaxation kernels for the shunting lattice.

Two interchangeable implementations of the same update:

* a scalar loop compiled with numba (default), and
* a vectorized numpy twin (selected by NEUROSWARM_NO_NUMBA=1).

Both accumulate the eight lateral terms in the same row-major neighbor order,
so their outputs are bit-identical; ``tests/test_binn.py`` asserts this.

Update for one step (applied to every cell from the previous iterate):

    se = [I]^+ + sum_l w_l * [x_l]^+
    si = [I]^- + sum_l g_l * [sigma - x_l]^+
    x' = clamp(x + h * (-A*x + (B - x)*se - (D + x)*si), -D, B)

Missing neighbors at the lattice boundary contribute zero.  The kernel stops
early once a step changes nothing (exact floating-point fixed point); the
remaining steps would be no-ops, so the result is unchanged.
"""

import numpy as np

from .accel import USE_NUMBA, jit_or_fallback


def _relax_loop(x, I, we_c, we_d, wi_c, wi_d, A, B, D, sigma, h, n_steps, residuals):
    """Run up to n_steps synchronous updates in place.

    Returns (steps_run, diverged, min_seen, max_seen).  residuals[t] receives
    the max absolute cell change of step t.  min/max are tracked post-clamp.
    """
    H, W = x.shape
    P = np.zeros((H + 2, W + 2))
    Q = np.zeros((H + 2, W + 2))
    xn = np.empty_like(x)
    lo = 0.0
    hi = 0.0
    steps = 0
    diverged = False
    for t in range(n_steps):
        for i in range(H):
            for j in range(W):
                v = x[i, j]
                P[i + 1, j + 1] = v if v > 0.0 else 0.0
                q = sigma - v
                Q[i + 1, j + 1] = q if q > 0.0 else 0.0
        resid = 0.0
        for i in range(H):
            for j in range(W):
                Ik = I[i, j]
                se = Ik if Ik > 0.0 else 0.0
                si = -Ik if Ik < 0.0 else 0.0
                se += we_d * P[i, j] + we_c * P[i, j + 1] + we_d * P[i, j + 2] \
                    + we_c * P[i + 1, j] + we_c * P[i + 1, j + 2] \
                    + we_d * P[i + 2, j] + we_c * P[i + 2, j + 1] + we_d * P[i + 2, j + 2]
                si += wi_d * Q[i, j] + wi_c * Q[i, j + 1] + wi_d * Q[i, j + 2] \
                    + wi_c * Q[i + 1, j] + wi_c * Q[i + 1, j + 2] \
                    + wi_d * Q[i + 2, j] + wi_c * Q[i + 2, j + 1] + wi_d * Q[i + 2, j + 2]
                v0 = x[i, j]
                nv = v0 + h * (-A * v0 + (B - v0) * se - (D + v0) * si)
                if nv != nv or nv > 1e300 or nv < -1e300:
                    diverged = True
                if nv > B:
                    nv = B
                elif nv < -D:
                    nv = -D
                d = nv - v0
                if d < 0.0:
                    d = -d
                if d > resid:
                    resid = d
                if nv < lo:
                    lo = nv
                if nv > hi:
                    hi = nv
                xn[i, j] = nv
        for i in range(H):
            for j in range(W):
                x[i, j] = xn[i, j]
        residuals[t] = resid
        steps = t + 1
        if diverged:
            break
        if resid == 0.0:
            break
    return steps, diverged, lo, hi


relax_loop_compiled = jit_or_fallback(_relax_loop)

# Padded-neighbor offsets in row-major order; each entry is (di, dj, cardinal).
_OFFSETS = (
    (0, 0, False), (0, 1, True), (0, 2, False),
    (1, 0, True), (1, 2, True),
    (2, 0, False), (2, 1, True), (2, 2, False),
)


def relax_loop_numpy(x, I, we_c, we_d, wi_c, wi_d, A, B, D, sigma, h, n_steps, residuals):
    """Vectorized twin of _relax_loop with the identical accumulation order."""
    H, W = x.shape
    P = np.zeros((H + 2, W + 2))
    Q = np.zeros((H + 2, W + 2))
    Ip = np.maximum(I, 0.0)
    Im = np.maximum(-I, 0.0)
    lo = 0.0
    hi = 0.0
    steps = 0
    diverged = False
    for t in range(n_steps):
        np.maximum(x, 0.0, out=P[1:H + 1, 1:W + 1])
        np.maximum(sigma - x, 0.0, out=Q[1:H + 1, 1:W + 1])
        # Left-fold the eight weighted neighbor terms, then add the input term,
        # matching the scalar loop's `se = [I]^+ ; se += t1 + t2 + ... + t8`.
        acc_e = None
        acc_i = None
        for di, dj, card in _OFFSETS:
            we = we_c if card else we_d
            wi = wi_c if card else wi_d
            te = we * P[di:di + H, dj:dj + W]
            ti = wi * Q[di:di + H, dj:dj + W]
            if acc_e is None:
                acc_e = te
                acc_i = ti
            else:
                acc_e += te
                acc_i += ti
        se = Ip + acc_e
        si = Im + acc_i
        nv = x + h * (-A * x + (B - x) * se - (D + x) * si)
        if not np.isfinite(nv).all():
            diverged = True
        np.clip(nv, -D, B, out=nv)
        resid = float(np.max(np.abs(nv - x)))
        lo = min(lo, float(nv.min()))
        hi = max(hi, float(nv.max()))
        x[:, :] = nv
        residuals[t] = resid
        steps = t + 1
        if diverged:
            break
        if resid == 0.0:
            break
    return steps, diverged, lo, hi


relax_loop = relax_loop_compiled if USE_NUMBA else relax_loop_numpy
