"""Decoding thresholds via multi-edge density evolution.

Density evolution tracks one message statistic per edge type through
belief-propagation iterations on the infinite-length ensemble:

  * erasure channel: the per-type variable-to-check erasure probability;
  * Gaussian-noise channel: the per-type mean of check-to-variable LLRs
    under the consistent-Gaussian (mean-tracking) approximation.

An ensemble is decodable at a channel parameter when the worst per-class
posterior statistic (erasure probability, or error rate Q(sqrt(m/2)))
falls below ``de_tol`` before ``max_iter`` iterations; a relative-progress
stall declares failure early.  The decoding threshold is found by
bisection over the channel parameter, relying on monotone degradation
(worse channels never decode when better ones fail).

The erasure-channel recursion is exact, so those thresholds are hard
numbers.  The Gaussian-noise recursion is an approximation, selected by
``DEParams.awgn_approx``:

  * ``"ber"`` (default): consistent-Gaussian messages summarized by their
    error probability per edge type; check nodes propagate sign-error
    probabilities through the exact (1 - 2p) product rule and the result
    is matched back to a Gaussian mean.  This reproduces the published
    thresholds of the bundled benchmark ensembles to a few 1e-3 in sigma.
  * ``"mean"``: the classic mean-tracking update built on the phi
    transform, with class mixing in the 1-phi domain.  Kept as a
    cross-check; tends to be optimistic for high-degree ensembles.

Either way, Gaussian-channel thresholds are approximation-level numbers;
threshold *ordering* between similar ensembles is far more reliable than
absolute placement.

The exact message-update formulas live in :mod:`metldpc._kernels` (the
module doubles as the reference for the phi pieces and their seams); the
step functions here call the same compiled routines, so single-step and
full-run paths agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from ._kernels import DECODED, phi_ga, phi_ga_inv, q_func, q_inv
from .ensemble import Ensemble

__all__ = [
    "ChannelSpec",
    "DEParams",
    "DEState",
    "ProbeRecord",
    "ThresholdResult",
    "bec_init_state",
    "bec_de_step",
    "bec_posterior",
    "bec_decodable",
    "bec_threshold",
    "awgn_init_state",
    "awgn_de_step",
    "awgn_posterior_ber",
    "awgn_decodable",
    "awgn_threshold",
    "threshold",
    "biawgn_capacity",
    "shannon_limit",
    "phi_ga",
    "phi_ga_inv",
    "q_func",
    "q_inv",
]

BEC = "bec"
BIAWGN = "biawgn"


@dataclass(frozen=True)
class ChannelSpec:
    """A channel family plus its parameter; larger parameter = worse channel."""

    kind: str
    param: float

    def __post_init__(self) -> None:
        if self.kind not in (BEC, BIAWGN):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == BEC and not 0.0 <= self.param <= 1.0:
            raise ValueError(f"erasure probability {self.param} outside [0, 1]")
        if self.kind == BIAWGN and self.param <= 0.0:
            raise ValueError(f"noise deviation {self.param} must be positive")


@dataclass(frozen=True)
class DEParams:
    """Convergence controls for density evolution and threshold bisection.

    ``max_iter`` doubles as part of the threshold definition: near a
    continuous transition the iteration count needed to clear the
    slow-convergence tunnel diverges, so the measured threshold creeps up
    with the budget.  The default of 1000 reproduces the published
    benchmark thresholds to about 1e-4; budgets of 5000+ land up to 8e-4
    above them.
    """

    de_tol: float = 1e-7
    max_iter: int = 1000
    bisect_tol_bec: float = 1e-6
    bisect_tol_awgn: float = 1e-4
    stall_window: int = 50
    stall_rel: float = 1e-9
    mean_sat: float = 100.0
    awgn_approx: str = "ber"

    def __post_init__(self) -> None:
        if self.awgn_approx not in ("ber", "mean"):
            raise ValueError(f"unknown Gaussian approximation {self.awgn_approx!r}")


DEFAULT_PARAMS = DEParams()


@dataclass(frozen=True)
class DEState:
    """Per-edge-type message statistic plus an iteration counter."""

    values: tuple[float, ...]
    iteration: int = 0


@dataclass(frozen=True)
class ProbeRecord:
    param: float
    decodable: bool
    iterations: int


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of a threshold bisection.

    ``threshold`` is the decodable end of the final bracket.  ``degenerate``
    flags ensembles that fail even at the best probed channel, for which the
    threshold is reported as the bracket floor.
    """

    threshold: float
    bracket_width: float
    iterations_used: int
    probes: tuple[ProbeRecord, ...] = ()
    degenerate: bool = False

    def trace_csv(self) -> str:
        lines = ["probe_param,decodable,iterations"]
        for p in self.probes:
            lines.append(f"{p.param!r},{int(p.decodable)},{p.iterations}")
        return "\n".join(lines) + "\n"


def _arrays(ens: Ensemble):
    nv = len(ens.var_classes)
    nc = len(ens.chk_classes)
    vc = np.array([c.coeff for c in ens.var_classes], dtype=np.float64)
    vd = np.array([c.d for c in ens.var_classes], dtype=np.int64).reshape(nv, ens.m_e)
    punct = np.array([c.b.punctured for c in ens.var_classes], dtype=np.bool_)
    cc = np.array([c.coeff for c in ens.chk_classes], dtype=np.float64)
    cd = np.array([c.d for c in ens.chk_classes], dtype=np.int64).reshape(nc, ens.m_e)
    return vc, vd, punct, cc, cd


def _sockets_and_active(vc, vd, punct, cc, cd, m_e):
    vs = _kernels._socket_totals(vc, vd, m_e)
    cs = _kernels._socket_totals(cc, cd, m_e)
    active = np.array([vs[i] > 0.0 and cs[i] > 0.0 for i in range(m_e)], dtype=np.bool_)
    return vs, cs, active


# ---------------------------------------------------------------------------
# Erasure channel
# ---------------------------------------------------------------------------

def bec_init_state(ens: Ensemble, eps: float) -> DEState:
    """Channel initialization: per-type erased fraction of outgoing messages."""
    _check_eps(eps)
    vc, vd, punct, cc, cd = _arrays(ens)
    vs, cs, active = _sockets_and_active(vc, vd, punct, cc, cd, ens.m_e)
    x = _kernels.bec_init(vc, vd, punct, vs, active, eps)
    return DEState(tuple(float(v) for v in x), iteration=0)


def bec_de_step(ens: Ensemble, eps: float, state: DEState) -> DEState:
    """One erasure-channel iteration: check update followed by variable update."""
    _check_eps(eps)
    x = _state_array(ens, state)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("erasure state entries must lie in [0, 1]")
    vc, vd, punct, cc, cd = _arrays(ens)
    vs, cs, active = _sockets_and_active(vc, vd, punct, cc, cd, ens.m_e)
    y = np.zeros(ens.m_e)
    _kernels.bec_check_update(cc, cd, cs, active, x, y)
    _kernels.bec_var_update(vc, vd, punct, vs, active, eps, y, x)
    return DEState(tuple(float(v) for v in x), state.iteration + 1)


def bec_posterior(ens: Ensemble, eps: float, state: DEState) -> float:
    """Worst per-class a-posteriori erasure probability at the current state."""
    _check_eps(eps)
    x = _state_array(ens, state)
    vc, vd, punct, cc, cd = _arrays(ens)
    vs, cs, active = _sockets_and_active(vc, vd, punct, cc, cd, ens.m_e)
    y = np.zeros(ens.m_e)
    _kernels.bec_check_update(cc, cd, cs, active, x, y)
    return float(_kernels.bec_posterior(vd, punct, eps, y))


def bec_decodable(ens: Ensemble, eps: float, params: DEParams = DEFAULT_PARAMS) -> bool:
    """Does density evolution drive every class's posterior erasure to zero?"""
    _check_eps(eps)
    vc, vd, punct, cc, cd = _arrays(ens)
    status, _, _ = _kernels.bec_run(
        vc, vd, punct, cc, cd, eps,
        params.de_tol, params.max_iter, params.stall_window, params.stall_rel,
    )
    return status == DECODED


def bec_threshold(
    ens: Ensemble,
    params: DEParams = DEFAULT_PARAMS,
    keep_trace: bool = False,
) -> ThresholdResult:
    """Bisect the erasure probability for the decoding threshold."""
    vc, vd, punct, cc, cd = _arrays(ens)

    def probe(eps: float) -> tuple[bool, int]:
        status, iters, _ = _kernels.bec_run(
            vc, vd, punct, cc, cd, eps,
            params.de_tol, params.max_iter, params.stall_window, params.stall_rel,
        )
        return status == DECODED, iters

    return _bisect(probe, 0.0, 1.0, params.bisect_tol_bec, keep_trace)


# ---------------------------------------------------------------------------
# Gaussian-noise channel (mean-tracking approximation)
# ---------------------------------------------------------------------------

def awgn_init_state(ens: Ensemble) -> DEState:
    """No check information yet: all check-to-variable means start at zero."""
    return DEState((0.0,) * ens.m_e, iteration=0)


def awgn_de_step(
    ens: Ensemble,
    sigma: float,
    state: DEState,
    approx: str = "ber",
    mean_sat: float = DEFAULT_PARAMS.mean_sat,
) -> DEState:
    """One Gaussian-approximation iteration on the check-to-variable means."""
    _check_sigma(sigma)
    mu = _state_array(ens, state)
    if np.any(mu < 0.0) or not np.all(np.isfinite(mu)):
        raise ValueError("mean state entries must be finite and non-negative")
    vc, vd, punct, cc, cd = _arrays(ens)
    vs, cs, active = _sockets_and_active(vc, vd, punct, cc, cd, ens.m_e)
    base = np.zeros(len(ens.var_classes))
    stat = np.zeros(ens.m_e)
    if approx == "ber":
        _kernels.ber_var_update(vc, vd, punct, vs, active, 2.0 / sigma**2, mu, base, stat)
        _kernels.ber_check_update(cc, cd, cs, active, stat, mean_sat, mu)
    elif approx == "mean":
        _kernels.awgn_var_update(vc, vd, punct, vs, active, 2.0 / sigma**2, mu, base, stat)
        _kernels.awgn_check_update(cc, cd, cs, active, stat, mean_sat, mu)
    else:
        raise ValueError(f"unknown Gaussian approximation {approx!r}")
    return DEState(tuple(float(v) for v in mu), state.iteration + 1)


def awgn_posterior_ber(ens: Ensemble, sigma: float, state: DEState) -> float:
    """Worst per-class posterior error rate at the current means."""
    _check_sigma(sigma)
    mu = _state_array(ens, state)
    vc, vd, punct, cc, cd = _arrays(ens)
    return float(_kernels.awgn_worst_ber(vd, punct, 2.0 / sigma**2, mu))


def _awgn_run(vc, vd, punct, cc, cd, sigma: float, params: DEParams):
    run = _kernels.ber_run if params.awgn_approx == "ber" else _kernels.awgn_run
    return run(
        vc, vd, punct, cc, cd, sigma,
        params.de_tol, params.max_iter, params.stall_window, params.stall_rel,
        params.mean_sat,
    )


def awgn_decodable(ens: Ensemble, sigma: float, params: DEParams = DEFAULT_PARAMS) -> bool:
    _check_sigma(sigma)
    vc, vd, punct, cc, cd = _arrays(ens)
    status, _, _ = _awgn_run(vc, vd, punct, cc, cd, sigma, params)
    return status == DECODED


def awgn_threshold(
    ens: Ensemble,
    params: DEParams = DEFAULT_PARAMS,
    keep_trace: bool = False,
) -> ThresholdResult:
    """Bisect the noise deviation for the decoding threshold.

    The bracket spans [0.1, 2 * shannon_limit(rate)]; anything beyond twice
    the capacity limit is hopeless for a valid ensemble.
    """
    vc, vd, punct, cc, cd = _arrays(ens)
    hi = 2.0 * shannon_limit(BIAWGN, ens.design_rate)

    def probe(sigma: float) -> tuple[bool, int]:
        status, iters, _ = _awgn_run(vc, vd, punct, cc, cd, sigma, params)
        return status == DECODED, iters

    return _bisect(probe, 0.1, hi, params.bisect_tol_awgn, keep_trace)


def threshold(
    ens: Ensemble,
    channel: str,
    params: DEParams = DEFAULT_PARAMS,
    keep_trace: bool = False,
) -> ThresholdResult:
    """Dispatch on channel kind ('bec' or 'biawgn')."""
    if channel == BEC:
        return bec_threshold(ens, params, keep_trace)
    if channel == BIAWGN:
        return awgn_threshold(ens, params, keep_trace)
    raise ValueError(f"unknown channel kind {channel!r}")


# ---------------------------------------------------------------------------
# Shannon limits
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def biawgn_capacity(sigma: float) -> float:
    """Capacity of the binary-input AWGN channel (inputs +-1, noise std sigma).

    I(X;Y) = h(Y) - h(N), with h(Y) integrated numerically over the
    two-component Gaussian mixture the channel output follows.
    """
    from scipy.integrate import quad

    if sigma <= 0:
        raise ValueError("sigma must be positive")
    inv = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def neg_p_log2_p(y: float) -> float:
        p = 0.5 * inv * (
            math.exp(-0.5 * ((y - 1.0) / sigma) ** 2)
            + math.exp(-0.5 * ((y + 1.0) / sigma) ** 2)
        )
        return -p * math.log2(p) if p > 0.0 else 0.0

    span = 1.0 + 12.0 * sigma
    h_y, _ = quad(neg_p_log2_p, -span, span, limit=400)
    h_n = 0.5 * math.log2(2.0 * math.pi * math.e * sigma * sigma)
    return h_y - h_n


@lru_cache(maxsize=None)
def shannon_limit(kind: str, rate: float) -> float:
    """Worst channel parameter any rate-``rate`` code could tolerate.

    Erasure channel: exactly 1 - rate.  Gaussian channel: the noise
    deviation at which capacity equals the rate, solved by bisection on the
    numerically integrated capacity (absolute accuracy well under 1e-4).
    """
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    if kind == BEC:
        return 1.0 - rate
    if kind != BIAWGN:
        raise ValueError(f"unknown channel kind {kind!r}")
    lo, hi = 1e-2, 20.0
    if biawgn_capacity(lo) < rate:
        raise ValueError(f"rate {rate} out of reach for the bracket floor")
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if biawgn_capacity(mid) >= rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Internals
# ---------------------------------------------------------------------------

def _check_eps(eps: float) -> None:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"erasure probability {eps} outside [0, 1]")


def _check_sigma(sigma: float) -> None:
    if sigma <= 0.0:
        raise ValueError(f"noise deviation {sigma} must be positive")


def _state_array(ens: Ensemble, state: DEState) -> np.ndarray:
    if len(state.values) != ens.m_e:
        raise ValueError(f"state has {len(state.values)} entries, expected {ens.m_e}")
    return np.array(state.values, dtype=np.float64)


def _bisect(probe, lo: float, hi: float, tol: float, keep_trace: bool) -> ThresholdResult:
    probes: list[ProbeRecord] = []

    def run(param: float) -> bool:
        ok, iters = probe(param)
        if keep_trace:
            probes.append(ProbeRecord(param, ok, iters))
        return ok

    n = 0
    if not run(lo):
        return ThresholdResult(lo, hi - lo, 1, tuple(probes), degenerate=True)
    n += 1
    if run(hi):
        return ThresholdResult(hi, 0.0, 2, tuple(probes))
    n += 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if run(mid):
            lo = mid
        else:
            hi = mid
        n += 1
    return ThresholdResult(lo, hi - lo, n, tuple(probes))
