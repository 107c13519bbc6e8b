"""State evolution: the general two-channel recursion and its optimal
scalar reduction, plus the Gaussian-noise fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .oamp import DenoiserSet
from .scalar_channel import ScalarChannel
from .spectra import InducedMeasures, ShrinkageSet, SpectrumModel

MMSE_FLOOR = 1e-14
SE_CONVERGENCE_TOL = 1e-12


class StateEvolutionError(Exception):
    pass


@dataclass
class SeTrace:
    """Per-iteration effective channel strengths and overlap predictions."""

    w1: list = field(default_factory=list)
    w2: list = field(default_factory=list)
    rho1: list = field(default_factory=list)
    rho2: list = field(default_factory=list)
    cos2_u: list = field(default_factory=list)
    cos2_v: list = field(default_factory=list)
    mmse_u: list = field(default_factory=list)
    mmse_v: list = field(default_factory=list)
    converged_at: int | None = None


def se_step_general(measures: InducedMeasures, spectrum: SpectrumModel,
                    stats_f, stats_g, F, Ftil, G, Gtil):
    """One step of the general state evolution.

    ``stats_f = (alpha, sigma_f2)`` are the alignment and residual variance
    of the u-side scalar denoiser output; similarly ``stats_g``.  The matrix
    denoisers are callables on the lambda axis.  Returns
    (mu_u, sigma_u2, mu_v, sigma_v2) of the next iterate channels.
    """
    alpha, sf2 = stats_f
    beta, sg2 = stats_g
    d = spectrum.delta
    nu1, nu2, nu3 = measures.nu1, measures.nu2, measures.nu3
    mu = spectrum.measure()
    mu_t = spectrum.measure_tilde()

    mu_u = (alpha * nu1.integrate(F)
            + beta * (1.0 + 1.0 / d) * nu3.integrate(lambda s: s * Ftil(s ** 2)))
    mu_v = (beta * nu2.integrate(G)
            + alpha * (1.0 + d) * nu3.integrate(lambda s: s * Gtil(s ** 2)))
    sigma_u2 = (alpha ** 2 * nu1.integrate(lambda l: F(l) ** 2)
                + beta ** 2 / d * nu2.integrate(lambda l: l * Ftil(l) ** 2)
                + sf2 * mu.integrate(lambda l: F(l) ** 2)
                + 2.0 * alpha * beta * (1.0 + 1.0 / d)
                * nu3.integrate(lambda s: s * F(s ** 2) * Ftil(s ** 2))
                - mu_u ** 2
                + sg2 / d * mu_t.integrate(lambda l: l * Ftil(l) ** 2))
    sigma_v2 = (beta ** 2 * nu2.integrate(lambda l: G(l) ** 2)
                + alpha ** 2 * d * nu1.integrate(lambda l: l * Gtil(l) ** 2)
                + sf2 * d * mu.integrate(lambda l: l * Gtil(l) ** 2)
                + 2.0 * alpha * beta * (1.0 + d)
                * nu3.integrate(lambda s: s * G(s ** 2) * Gtil(s ** 2))
                - mu_v ** 2
                + sg2 * mu_t.integrate(lambda l: G(l) ** 2))
    if sigma_u2 < -1e-9 or sigma_v2 < -1e-9:
        raise StateEvolutionError(
            f"negative iterate variance: sigma_u2={sigma_u2:.3g}, "
            f"sigma_v2={sigma_v2:.3g}")
    return mu_u, max(sigma_u2, 0.0), mu_v, max(sigma_v2, 0.0)


def _rho(channel: ScalarChannel, w: float) -> float:
    m = max(channel.mmse(w), MMSE_FLOOR)
    rho = 1.0 / m - 1.0 / (1.0 - w)
    if rho <= 0:
        raise StateEvolutionError(
            f"non-positive denoiser output SNR at w={w} (mmse={m:.3g}); "
            "the scalar denoiser carries no excess information")
    return rho


def optimal_se_run(shrinkage: ShrinkageSet, channel_u: ScalarChannel,
                   channel_v: ScalarChannel, n_iter: int,
                   tol: float = SE_CONVERGENCE_TOL) -> SeTrace:
    """Scalar state-evolution recursion of the optimal iteration.

    Strengths start at w = 0; the first step draws its signal content from
    the side information folded into the scalar channels.  Once successive
    strengths move less than ``tol`` the trace is padded with the fixed
    point.
    """
    trace = SeTrace()
    w1 = w2 = 0.0
    for t in range(1, n_iter + 1):
        rho1 = _rho(channel_u, w1)
        rho2 = _rho(channel_v, w2)
        den = DenoiserSet(shrinkage, rho1, rho2)
        w1_next, w2_next = den.next_strengths()
        if w1_next > -1e-9:
            w1_next = max(w1_next, 0.0)
        if w2_next > -1e-9:
            w2_next = max(w2_next, 0.0)
        if not (0.0 <= w1_next < 1.0 and 0.0 <= w2_next < 1.0):
            raise StateEvolutionError(
                f"strength left (0, 1) at t={t}: w1={w1_next:.6g}, w2={w2_next:.6g}")
        moved = max(abs(w1_next - w1), abs(w2_next - w2))
        w1, w2 = w1_next, w2_next
        trace.w1.append(w1)
        trace.w2.append(w2)
        trace.rho1.append(rho1)
        trace.rho2.append(rho2)
        m_u, m_v = channel_u.mmse(w1), channel_v.mmse(w2)
        trace.mmse_u.append(m_u)
        trace.mmse_v.append(m_v)
        trace.cos2_u.append(1.0 - m_u)
        trace.cos2_v.append(1.0 - m_v)
        if moved < tol and trace.converged_at is None:
            trace.converged_at = t
            for _ in range(t + 1, n_iter + 1):
                for lst in (trace.w1, trace.w2, trace.rho1, trace.rho2,
                            trace.mmse_u, trace.mmse_v,
                            trace.cos2_u, trace.cos2_v):
                    lst.append(lst[-1])
            break
    return trace


def gaussian_fixed_point(theta: float, delta: float, channel_u: ScalarChannel,
                         channel_v: ScalarChannel, damping: float = 0.5,
                         tol: float = 1e-13, max_iter: int = 10000):
    """Fixed point (w1, w2) of the Gaussian-noise system

        mmse_U(w1) = 1 - (1/theta^2)   w2 / (1 - w2),
        mmse_V(w2) = 1 - (delta/theta^2) w1 / (1 - w1),

    rewritten in the forward direction (snr(w2) = theta^2 (1 - mmse_U(w1)),
    snr(w1) = (theta^2/delta)(1 - mmse_V(w2))) and solved by damped
    iteration from w = 0; side information in the channels makes the first
    step informative and the map climbs to the stable solution.
    """
    if theta < 0 or not 0.0 < delta <= 1.0:
        raise StateEvolutionError(f"invalid parameters theta={theta}, delta={delta}")
    w1 = w2 = 0.0

    def _snr_to_w(gamma):
        return gamma / (1.0 + gamma)

    for i in range(max_iter):
        w2_new = _snr_to_w(theta ** 2 * (1.0 - channel_u.mmse(w1)))
        w1_new = _snr_to_w(theta ** 2 / delta * (1.0 - channel_v.mmse(w2)))
        w1_next = (1.0 - damping) * w1_new + damping * w1
        w2_next = (1.0 - damping) * w2_new + damping * w2
        moved = max(abs(w1_next - w1), abs(w2_next - w2))
        w1, w2 = w1_next, w2_next
        if moved < tol:
            return w1, w2, channel_u.mmse(w1), channel_v.mmse(w2)
    raise StateEvolutionError(
        f"fixed-point iteration did not converge in {max_iter} steps "
        f"(last move {moved:.3g})")
