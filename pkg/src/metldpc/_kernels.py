"""Hot numeric loops for density evolution.

Everything here is written as plain loops over small arrays so numba can
compile it; when numba is unavailable the same functions run (slowly) under
CPython with identical IEEE semantics, so results never depend on which
path executed.

Array conventions shared by both channels:

    var_coeff : float64[nv]      class coefficients L
    var_deg   : int64[nv, m_e]   per-type degrees d
    var_punct : bool_[nv]        punctured flag per class
    chk_coeff : float64[nc]      class coefficients R
    chk_deg   : int64[nc, m_e]

Edge types with zero sockets on either side carry no messages and are
pinned to their no-information value.

Erasure channel
---------------
The state is the per-type variable-to-check erasure probability x.  One
iteration is

    y_i = 1 - dR/dx_i(1-x) / dR/dx_i(1)                 (check to variable)
    x_i = dL/dx_i(rt, y) / dL/dx_i(1, 1)                (variable to check)

with rt = (1, eps): punctured bits are always erased at the channel, so
their channel factor is 1.  Decoding succeeds when every class's
a-posteriori erasure probability  ch_c * prod_j y_j^{d_cj}  drops below
``de_tol`` (ch_c = eps for transmitted classes, 1 for punctured ones); the
trajectory is monotone, so a relative-progress stall declares failure
early.  Note degree-one classes forward the raw channel message forever,
which is why success is judged on posteriors rather than on x itself.

Gaussian-noise channel
----------------------
Messages are modelled as consistent Gaussians (variance = twice the mean)
and m_ch = 2 / sigma^2 is the channel LLR mean for transmitted classes
(punctured classes get 0).  Two approximations are provided; both keep the
per-type check-to-variable mean mu as their state and judge success by the
worst per-class posterior error rate Q(sqrt(m_app / 2)) with
m_app = m_ch + sum_j d_cj * mu_j.

Error-rate rule (``ber_*``, the default): variable-to-check messages are
summarized per type by their mixed error probability, checks propagate
sign-error probabilities exactly, and the result is matched back to a
consistent Gaussian:

    p_i  = sum_c lambda_{c,i} * Q(sqrt(mv_{c,i} / 2))
    q_i  = sum_c rho_{c,i} * (1 - prod_j (1 - 2 p_j)^{d_cj - delta_ij}) / 2
    mu_i = 2 * Qinv(q_i)^2

where mv_{c,i} = m_ch + sum_j d_cj mu_j - mu_i and lambda / rho are
edge-perspective class weights.

Mean rule (``awgn_*``): the classic mean-tracking update built on
phi(m) = 1 - E[tanh(u/2)], u ~ N(m, 2m):

    t_i  = sum_c lambda_{c,i} * (1 - phi(mv_{c,i}))
    mu_i = sum_c rho_{c,i} * phi_inv(1 - prod_j t_j^{d_cj - delta_ij})

phi uses a three-piece closed form, continuous at both seams (the seams
sit at the crossings of adjacent pieces):

    m in [0, 1.43048):   1 - (m/2 - m^2/4 + c3 m^3 + ... + c7 m^7)
                         (polynomial fitted to the exact integral;
                          absolute error < 4e-5)
    m in [1.43048, 14.39435):  exp(-0.4527 m^0.86 + 0.0218)
    m >= 14.39435:       sqrt(pi/m) exp(-m/4) (1 - 10/(7m))

phi is clamped to [0, 1] and phi_inv saturates at ``mean_sat``; means are
capped there as well, which also bounds the posterior criterion.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

# Seams sit at the crossings of adjacent phi pieces (frozen by tests).
PHI_SEAM_SMALL = 1.4304775466624557
PHI_SEAM_LARGE = 14.39435294216846
PHI_AT_SEAM_SMALL = 0.5520482431290162
PHI_AT_SEAM_LARGE = 0.011514322819004807
# 1 - phi = m/2 - m^2/4 + C3 m^3 + C4 m^4 + C5 m^5 + C6 m^6 + C7 m^7
PHI_C3 = 0.19559733399319304
PHI_C4 = -0.17402508973457864
PHI_C5 = 0.11615873389533946
PHI_C6 = -0.044976500702801236
PHI_C7 = 0.007345175532482012

DECODED = 1
STALLED = 0

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)


@njit(cache=True)
def phi_ga(m):
    """Three-piece closed form for phi(m) = 1 - E[tanh(u/2)], u ~ N(m, 2m)."""
    if m <= 0.0:
        return 1.0
    if m < PHI_SEAM_SMALL:
        e = m * (0.5 + m * (-0.25 + m * (PHI_C3 + m * (PHI_C4 + m * (PHI_C5 + m * (PHI_C6 + m * PHI_C7))))))
        return 1.0 - e
    if m < PHI_SEAM_LARGE:
        return math.exp(-0.4527 * m**0.86 + 0.0218)
    if m > 2800.0:
        return 0.0
    return math.sqrt(math.pi / m) * math.exp(-0.25 * m) * (1.0 - 10.0 / (7.0 * m))


@njit(cache=True)
def phi_ga_inv(v, mean_sat):
    """Inverse of phi_ga, saturated at mean_sat."""
    if v >= 1.0:
        return 0.0
    if v <= phi_ga(mean_sat):
        return mean_sat
    if v < PHI_AT_SEAM_LARGE:
        # Newton on the log of the tail piece; -4 ln v starts above the seam.
        target = math.log(v)
        m = -4.0 * target
        for _ in range(60):
            g = 0.5 * (math.log(math.pi) - math.log(m)) - 0.25 * m \
                + math.log(1.0 - 10.0 / (7.0 * m)) - target
            gp = -0.5 / m - 0.25 + (10.0 / (7.0 * m * m)) / (1.0 - 10.0 / (7.0 * m))
            step = g / gp
            m -= step
            if m < PHI_SEAM_LARGE:
                m = PHI_SEAM_LARGE
            if abs(step) < 1e-12 * m:
                break
        return m if m < mean_sat else mean_sat
    if v < PHI_AT_SEAM_SMALL:
        return ((0.0218 - math.log(v)) / 0.4527) ** (1.0 / 0.86)
    # Newton on the polynomial piece; 1 - phi ~ m/2 seeds the iteration.
    m = 2.0 * (1.0 - v)
    if m < 1e-12:
        m = 1e-12
    for _ in range(80):
        f = phi_ga(m) - v
        d = -(0.5 + m * (-0.5 + m * (3.0 * PHI_C3 + m * (4.0 * PHI_C4 + m * (5.0 * PHI_C5 + m * (6.0 * PHI_C6 + m * 7.0 * PHI_C7))))))
        step = f / d
        m -= step
        if m <= 0.0:
            m = 1e-15
        elif m > PHI_SEAM_SMALL:
            m = PHI_SEAM_SMALL
        if abs(step) < 1e-14 * (m if m > 1e-10 else 1e-10):
            break
    return m


@njit(cache=True)
def q_func(z):
    """Gaussian tail probability Q(z)."""
    return 0.5 * math.erfc(z / SQRT2)


@njit(cache=True)
def q_inv(p):
    """Inverse Gaussian tail: z with Q(z) = p, for p in (0, 0.5].

    Rational approximation for the standard normal quantile followed by one
    Newton step on Q itself, which pushes the error to machine precision
    over the range density evolution ever visits.
    """
    if p >= 0.5:
        return 0.0
    # Acklam's quantile approximation, lower-tail form evaluated at p.
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        z = (((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
              + 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
            ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
               + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        z = (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q / \
            (((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
                - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
              - 1.328068155288572e+01) * r + 1.0)
    z = -z  # quantile of the upper tail
    # One Newton step: Q(z) - p has derivative -pdf(z).
    pdf = math.exp(-0.5 * z * z) / SQRT_2PI
    if pdf > 0.0:
        z += (q_func(z) - p) / pdf
    return z


@njit(cache=True)
def _socket_totals(coeff, deg, m_e):
    totals = np.zeros(m_e)
    for c in range(coeff.shape[0]):
        for i in range(m_e):
            totals[i] += coeff[c] * deg[c, i]
    return totals


# ---------------------------------------------------------------------------
# Erasure channel
# ---------------------------------------------------------------------------

@njit(cache=True)
def bec_check_update(chk_coeff, chk_deg, chk_sockets, active, x, y):
    m_e = x.shape[0]
    nc = chk_coeff.shape[0]
    for i in range(m_e):
        if not active[i]:
            y[i] = 0.0
            continue
        s = 0.0
        for c in range(nc):
            dci = chk_deg[c, i]
            if dci == 0:
                continue
            term = chk_coeff[c] * dci
            for j in range(m_e):
                e = chk_deg[c, j]
                if j == i:
                    e -= 1
                if e > 0:
                    term *= (1.0 - x[j]) ** e
            s += term
        v = 1.0 - s / chk_sockets[i]
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        y[i] = v


@njit(cache=True)
def bec_var_update(var_coeff, var_deg, var_punct, var_sockets, active, eps, y, x):
    m_e = x.shape[0]
    nv = var_coeff.shape[0]
    for i in range(m_e):
        if not active[i]:
            x[i] = 0.0
            continue
        s = 0.0
        for c in range(nv):
            dci = var_deg[c, i]
            if dci == 0:
                continue
            ch = 1.0 if var_punct[c] else eps
            term = var_coeff[c] * dci * ch
            for j in range(m_e):
                e = var_deg[c, j]
                if j == i:
                    e -= 1
                if e > 0:
                    term *= y[j] ** e
            s += term
        x[i] = s / var_sockets[i]


@njit(cache=True)
def bec_posterior(var_deg, var_punct, eps, y):
    """Worst per-class a-posteriori erasure probability given check messages."""
    worst = 0.0
    for c in range(var_deg.shape[0]):
        p = 1.0 if var_punct[c] else eps
        for j in range(var_deg.shape[1]):
            e = var_deg[c, j]
            if e > 0:
                p *= y[j] ** e
        if p > worst:
            worst = p
    return worst


@njit(cache=True)
def bec_init(var_coeff, var_deg, var_punct, var_sockets, active, eps):
    m_e = var_sockets.shape[0]
    x = np.zeros(m_e)
    for i in range(m_e):
        if not active[i]:
            continue
        s = 0.0
        for c in range(var_coeff.shape[0]):
            dci = var_deg[c, i]
            if dci:
                s += var_coeff[c] * dci * (1.0 if var_punct[c] else eps)
        x[i] = s / var_sockets[i]
    return x


@njit(cache=True)
def bec_run(var_coeff, var_deg, var_punct, chk_coeff, chk_deg,
            eps, de_tol, max_iter, stall_window, stall_rel):
    """Full erasure-channel density evolution at one channel parameter.

    Returns (status, iterations, final worst posterior).
    """
    m_e = var_deg.shape[1]
    var_sockets = _socket_totals(var_coeff, var_deg, m_e)
    chk_sockets = _socket_totals(chk_coeff, chk_deg, m_e)
    active = np.zeros(m_e, dtype=np.bool_)
    for i in range(m_e):
        active[i] = var_sockets[i] > 0.0 and chk_sockets[i] > 0.0

    x = bec_init(var_coeff, var_deg, var_punct, var_sockets, active, eps)
    y = np.zeros(m_e)
    checkpoint = 1.0e300
    worst = 1.0
    for t in range(1, max_iter + 1):
        bec_check_update(chk_coeff, chk_deg, chk_sockets, active, x, y)
        worst = bec_posterior(var_deg, var_punct, eps, y)
        if worst <= de_tol:
            return DECODED, t, worst
        if t % stall_window == 0:
            if worst > checkpoint * (1.0 - stall_rel):
                return STALLED, t, worst
            checkpoint = worst
        bec_var_update(var_coeff, var_deg, var_punct, var_sockets, active, eps, y, x)
    return STALLED, max_iter, worst


# ---------------------------------------------------------------------------
# Gaussian-noise channel, error-rate rule (default)
# ---------------------------------------------------------------------------

@njit(cache=True)
def ber_var_update(var_coeff, var_deg, var_punct, var_sockets, active,
                   m_ch, mu, base, perr):
    nv = var_coeff.shape[0]
    m_e = mu.shape[0]
    for c in range(nv):
        b = 0.0 if var_punct[c] else m_ch
        for j in range(m_e):
            b += var_deg[c, j] * mu[j]
        base[c] = b
    for i in range(m_e):
        if not active[i]:
            perr[i] = 0.5
            continue
        s = 0.0
        for c in range(nv):
            dci = var_deg[c, i]
            if dci == 0:
                continue
            mv = base[c] - mu[i]
            if mv < 0.0:
                mv = 0.0
            s += var_coeff[c] * dci * 0.5 * math.erfc(math.sqrt(mv) * 0.5)
        perr[i] = s / var_sockets[i]


@njit(cache=True)
def ber_check_update(chk_coeff, chk_deg, chk_sockets, active, perr, mean_sat, mu):
    nc = chk_coeff.shape[0]
    m_e = mu.shape[0]
    for i in range(m_e):
        if not active[i]:
            mu[i] = 0.0
            continue
        s = 0.0
        for c in range(nc):
            dci = chk_deg[c, i]
            if dci == 0:
                continue
            prod = 1.0
            for j in range(m_e):
                e = chk_deg[c, j]
                if j == i:
                    e -= 1
                if e > 0:
                    prod *= (1.0 - 2.0 * perr[j]) ** e
            s += chk_coeff[c] * dci * 0.5 * (1.0 - prod)
        q = s / chk_sockets[i]
        if q <= 0.0:
            mu[i] = mean_sat
        elif q >= 0.5:
            mu[i] = 0.0
        else:
            z = q_inv(q)
            m = 2.0 * z * z
            mu[i] = m if m < mean_sat else mean_sat


@njit(cache=True)
def awgn_worst_ber(var_deg, var_punct, m_ch, mu):
    """Worst per-class posterior error rate Q(sqrt(m_app/2))."""
    worst = 0.0
    for c in range(var_deg.shape[0]):
        m_app = 0.0 if var_punct[c] else m_ch
        for j in range(var_deg.shape[1]):
            m_app += var_deg[c, j] * mu[j]
        ber = 0.5 * math.erfc(math.sqrt(m_app) * 0.5)
        if ber > worst:
            worst = ber
    return worst


@njit(cache=True)
def ber_run(var_coeff, var_deg, var_punct, chk_coeff, chk_deg,
            sigma, de_tol, max_iter, stall_window, stall_rel, mean_sat):
    """Error-rate-rule density evolution at one noise level.

    Returns (status, iterations, final worst posterior error rate).
    """
    m_e = var_deg.shape[1]
    var_sockets = _socket_totals(var_coeff, var_deg, m_e)
    chk_sockets = _socket_totals(chk_coeff, chk_deg, m_e)
    active = np.zeros(m_e, dtype=np.bool_)
    for i in range(m_e):
        active[i] = var_sockets[i] > 0.0 and chk_sockets[i] > 0.0

    m_ch = 2.0 / (sigma * sigma)
    nv = var_coeff.shape[0]
    mu = np.zeros(m_e)
    base = np.zeros(nv)
    perr = np.zeros(m_e)
    checkpoint = 1.0e300
    worst = 1.0
    for t in range(1, max_iter + 1):
        worst = awgn_worst_ber(var_deg, var_punct, m_ch, mu)
        if worst <= de_tol:
            return DECODED, t, worst
        if t % stall_window == 0:
            if worst > checkpoint * (1.0 - stall_rel):
                return STALLED, t, worst
            checkpoint = worst
        ber_var_update(var_coeff, var_deg, var_punct, var_sockets, active,
                       m_ch, mu, base, perr)
        ber_check_update(chk_coeff, chk_deg, chk_sockets, active, perr, mean_sat, mu)
    return STALLED, max_iter, worst


# ---------------------------------------------------------------------------
# Gaussian-noise channel, mean-tracking rule
# ---------------------------------------------------------------------------

@njit(cache=True)
def awgn_var_update(var_coeff, var_deg, var_punct, var_sockets, active,
                    m_ch, mu, base, tstat):
    nv = var_coeff.shape[0]
    m_e = mu.shape[0]
    for c in range(nv):
        b = 0.0 if var_punct[c] else m_ch
        for j in range(m_e):
            b += var_deg[c, j] * mu[j]
        base[c] = b
    for i in range(m_e):
        if not active[i]:
            tstat[i] = 0.0
            continue
        s = 0.0
        for c in range(nv):
            dci = var_deg[c, i]
            if dci == 0:
                continue
            mv = base[c] - mu[i]
            s += var_coeff[c] * dci * (1.0 - phi_ga(mv))
        tstat[i] = s / var_sockets[i]


@njit(cache=True)
def awgn_check_update(chk_coeff, chk_deg, chk_sockets, active, tstat, mean_sat, mu):
    nc = chk_coeff.shape[0]
    m_e = mu.shape[0]
    for i in range(m_e):
        if not active[i]:
            mu[i] = 0.0
            continue
        s = 0.0
        for c in range(nc):
            dci = chk_deg[c, i]
            if dci == 0:
                continue
            prod = 1.0
            for j in range(m_e):
                e = chk_deg[c, j]
                if j == i:
                    e -= 1
                if e > 0:
                    prod *= tstat[j] ** e
            s += chk_coeff[c] * dci * phi_ga_inv(1.0 - prod, mean_sat)
        m = s / chk_sockets[i]
        mu[i] = m if m < mean_sat else mean_sat


@njit(cache=True)
def awgn_run(var_coeff, var_deg, var_punct, chk_coeff, chk_deg,
             sigma, de_tol, max_iter, stall_window, stall_rel, mean_sat):
    """Mean-tracking-rule density evolution at one noise level.

    Returns (status, iterations, final worst posterior error rate).
    """
    m_e = var_deg.shape[1]
    var_sockets = _socket_totals(var_coeff, var_deg, m_e)
    chk_sockets = _socket_totals(chk_coeff, chk_deg, m_e)
    active = np.zeros(m_e, dtype=np.bool_)
    for i in range(m_e):
        active[i] = var_sockets[i] > 0.0 and chk_sockets[i] > 0.0

    m_ch = 2.0 / (sigma * sigma)
    nv = var_coeff.shape[0]
    mu = np.zeros(m_e)
    base = np.zeros(nv)
    tstat = np.zeros(m_e)
    checkpoint = 1.0e300
    worst = 1.0
    for t in range(1, max_iter + 1):
        worst = awgn_worst_ber(var_deg, var_punct, m_ch, mu)
        if worst <= de_tol:
            return DECODED, t, worst
        if t % stall_window == 0:
            if worst > checkpoint * (1.0 - stall_rel):
                return STALLED, t, worst
            checkpoint = worst
        awgn_var_update(var_coeff, var_deg, var_punct, var_sockets, active,
                        m_ch, mu, base, tstat)
        awgn_check_update(chk_coeff, chk_deg, chk_sockets, active, tstat, mean_sat, mu)
    return STALLED, max_iter, worst
