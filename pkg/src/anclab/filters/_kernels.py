"""Compiled per-sample recursions.

Every kernel walks one block held in a CMSIS-style state buffer ``buf`` of
length ``L + B - 1``: the last ``L - 1`` samples of the previous block
followed by the ``B`` new reference samples. The input window for output
``n`` is ``buf[n + L - 1 - k]`` for tap ``k``.
"""

from numba import njit

# Reassociation lets LLVM vectorize the tap reductions; results differ from
# strict left-to-right summation only at rounding level.
_FAST = {"reassoc", "contract", "nsz"}

Q15_ONE = 32768
_I16_MIN, _I16_MAX = -32768, 32767
_I32_MIN, _I32_MAX = -(2**31), 2**31 - 1


@njit(cache=True, fastmath=_FAST)
def lms_block(buf, w, d, mu, y, e):
    L = w.shape[0]
    for n in range(d.shape[0]):
        top = n + L - 1
        acc = 0.0
        for k in range(L):
            acc += w[k] * buf[top - k]
        y[n] = acc
        err = d[n] - acc
        e[n] = err
        g = mu * err
        for k in range(L):
            w[k] += g * buf[top - k]


@njit(cache=True, fastmath=_FAST)
def nlms_block(buf, w, d, mu, eps, y, e):
    L = w.shape[0]
    for n in range(d.shape[0]):
        top = n + L - 1
        acc = 0.0
        energy = 0.0
        for k in range(L):
            u = buf[top - k]
            acc += w[k] * u
            energy += u * u
        y[n] = acc
        err = d[n] - acc
        e[n] = err
        denom = eps + energy
        if denom > 0.0:
            g = mu * err / denom
            for k in range(L):
                w[k] += g * buf[top - k]


@njit(cache=True)
def rls_block(buf, w, P, d, lam, y, e, u, Pu):
    """Returns -1 on success, else the in-block index where P went indefinite."""
    L = w.shape[0]
    for n in range(d.shape[0]):
        top = n + L - 1
        for k in range(L):
            u[k] = buf[top - k]
        acc = 0.0
        for k in range(L):
            acc += w[k] * u[k]
        y[n] = acc
        err = d[n] - acc
        e[n] = err

        denom = lam
        for i in range(L):
            s = 0.0
            for j in range(L):
                s += P[i, j] * u[j]
            Pu[i] = s
            denom += u[i] * s
        # gain k = Pu / denom; P is symmetric so u^T P = Pu^T
        for i in range(L):
            w[i] += (Pu[i] / denom) * err
        inv_lam = 1.0 / lam
        for i in range(L):
            ki = Pu[i] / denom
            for j in range(L):
                P[i, j] = (P[i, j] - ki * Pu[j]) * inv_lam
        for i in range(L):
            for j in range(i + 1, L):
                s = 0.5 * (P[i, j] + P[j, i])
                P[i, j] = s
                P[j, i] = s
            if not P[i, i] > 0.0:
                return n
    return -1


@njit(cache=True)
def _sat(v, lo, hi):
    if v < lo:
        return lo, 1
    if v > hi:
        return hi, 1
    return v, 0


@njit(cache=True)
def _rshift15_round(v):
    return (v + 16384) >> 15


@njit(cache=True)
def lms_q15_block(buf, w, d, mu, y, e):
    """Q15 LMS on int64 arrays holding int16 values.

    Products are Q30, accumulated in a saturating 32-bit register, and
    brought back to Q15 with one rounding post-shift. Returns the number
    of saturation events.
    """
    L = w.shape[0]
    sat = 0
    for n in range(d.shape[0]):
        top = n + L - 1
        acc = 0
        for k in range(L):
            acc, s = _sat(acc + w[k] * buf[top - k], _I32_MIN, _I32_MAX)
            sat += s
        yq, s = _sat(_rshift15_round(acc), _I16_MIN, _I16_MAX)
        sat += s
        eq, s = _sat(d[n] - yq, _I16_MIN, _I16_MAX)
        sat += s
        y[n] = yq
        e[n] = eq
        g = _rshift15_round(mu * eq)
        for k in range(L):
            wk, s = _sat(w[k] + _rshift15_round(g * buf[top - k]), _I16_MIN, _I16_MAX)
            w[k] = wk
            sat += s
    return sat


@njit(cache=True, fastmath=_FAST)
def nlms_multi_block(bufs, w, d, mu, eps, y, e):
    """NLMS over several reference channels sharing one normalization.

    ``bufs`` is ``(R, L + B - 1)`` and ``w`` is ``(R, L)``.
    """
    R, L = w.shape
    for n in range(d.shape[0]):
        top = n + L - 1
        acc = 0.0
        energy = 0.0
        for r in range(R):
            for k in range(L):
                u = bufs[r, top - k]
                acc += w[r, k] * u
                energy += u * u
        y[n] = acc
        err = d[n] - acc
        e[n] = err
        denom = eps + energy
        if denom > 0.0:
            g = mu * err / denom
            for r in range(R):
                for k in range(L):
                    w[r, k] += g * bufs[r, top - k]

