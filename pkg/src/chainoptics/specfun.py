"""
Integer-order Bessel J and Airy Ai evaluated in-repo.

The cross-validation layer deliberately avoids calling the same numerical
stack it is meant to check, so the two special functions it needs are
implemented here with an explicit accuracy contract:

  bessel_jn_row : abs error < 1e-12 for order n <= 200 and argument t <= 500
  airy_ai       : rel error < 1e-10 on x in [-5, 5]

Both contracts are enforced by tests against an independent oracle.
"""

from __future__ import annotations

import math

import numpy as np


# ---- Bessel J_n, integer order, by Miller's backward recurrence ----

def _miller_start_order(n_max: int, t: float) -> int:
    # recurrence must start well above both the target order and the
    # turning point n ~ t; the 12*t^(1/3) margin keeps the seed error
    # below 1e-16 after normalization
    m = max(n_max, int(t + 12.0 * t ** (1.0 / 3.0))) + 22
    return m + (m % 2)  # even, so the normalization sum ends on J_0


def bessel_jn_row(n_max: int, t: float) -> np.ndarray:
    """
    J_0(t) .. J_{n_max}(t) for real t >= 0.

    Downward recurrence J_{k-1} = (2k/t) J_k - J_{k+1} from a tiny seed,
    normalized with J_0 + 2*sum_k J_{2k} = 1.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = np.zeros(n_max + 1)
    if t == 0.0:
        out[0] = 1.0
        return out

    m = _miller_start_order(n_max, t)
    jp = 0.0          # J_{k+1}
    jc = 1e-300       # J_k at k = m (arbitrary tiny seed)
    norm = 0.0        # accumulates J_0 + 2*sum J_{2k}
    for k in range(m, 0, -1):
        jm = (2.0 * k / t) * jc - jp
        jp = jc
        jc = jm
        if abs(jc) > 1e250:   # rescale long recurrences before overflow
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            out *= 1e-250
        if k - 1 <= n_max:
            out[k - 1] = jc
        if (k - 1) % 2 == 0:
            norm += 2.0 * jc
    norm -= jc  # k-1 = 0 term was added twice
    out /= norm
    return out


def bessel_jn(n: int, t: float) -> float:
    """J_n(t) for a single integer order n >= 0."""
    return float(bessel_jn_row(n, t)[n])


def bessel_jn_prime(n: int, t: float) -> float:
    """J_n'(t) from the derivative identity J_n' = (J_{n-1} - J_{n+1})/2."""
    if n == 0:
        return -bessel_jn_row(1, t)[1]
    row = bessel_jn_row(n + 1, t)
    return 0.5 * (row[n - 1] - row[n + 1])


# ---- Airy Ai by Maclaurin series ----

# Ai(x) = AI0 * f(x) - AIP0 * g(x) with
#   f(x) = sum x^{3k} * prod, term ratio x^3 / ((3k+2)(3k+3))
#   g(x) = sum x^{3k+1} * prod, term ratio x^3 / ((3k+3)(3k+4))
_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)    # Ai(0)
_AIP0 = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)   # -Ai'(0)

_SERIES_CAP = 400


def _airy_series(x: float) -> tuple[float, float]:
    """Return (Ai(x), Ai'(x)) by direct summation of the two Maclaurin series."""
    x3 = x * x * x
    # f, g and their derivatives share the same term recurrences
    tf = 1.0        # current term of f
    tg = x          # current term of g
    f = tf
    g = tg
    fp = 0.0        # f'
    gp = 1.0        # g'
    for k in range(_SERIES_CAP):
        tfp = tf * x3 / ((3 * k + 2) * (3 * k + 3))        # term of f at k+1
        tgp = tg * x3 / ((3 * k + 3) * (3 * k + 4))        # term of g at k+1
        f += tfp
        g += tgp
        if x != 0.0:
            fp += tfp * (3 * k + 3) / x
        gp += tgp * (3 * k + 4) / x if x != 0.0 else 0.0
        tf = tfp
        tg = tgp
        if abs(tf) < 1e-18 * (abs(f) + 1.0) and abs(tg) < 1e-18 * (abs(g) + 1.0):
            break
    ai = _AI0 * f - _AIP0 * g
    aip = _AI0 * fp - _AIP0 * gp
    return ai, aip


def airy_ai(x: float) -> float:
    """
    Ai(x). Series summation is accurate to < 1e-10 relative on [-5, 5]
    (cancellation grows like exp(2|x|^{3/2}/3) outside; |x| > 8 is refused).
    """
    if abs(x) > 8.0:
        raise ValueError("airy_ai is validated on |x| <= 8 only")
    return _airy_series(float(x))[0]


def airy_ai_prime(x: float) -> float:
    """Ai'(x), same domain contract as airy_ai."""
    if abs(x) > 8.0:
        raise ValueError("airy_ai_prime is validated on |x| <= 8 only")
    return _airy_series(float(x))[1]


def _xi_root() -> float:
    # first negative zero of Ai': Ai'(-xi) = 0, bisection on [0.8, 1.3]
    lo, hi = 0.8, 1.3
    flo = airy_ai_prime(-lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = airy_ai_prime(-mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


#: transfer-time constant, quoted to four figures in the source analysis
XI_ROUNDED = 1.019
#: same constant from the Ai' zero at full double precision
XI = _xi_root()
