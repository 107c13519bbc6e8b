"""Baselines: PCA and the standard AMP iteration for i.i.d. Gaussian noise."""

from __future__ import annotations

import numpy as np

from .model import ProblemInstance, SvdCache
from .oamp import IterationTrace, _check_finite, _cos2
from .scalar_channel import ScalarChannel


class BaselineError(Exception):
    pass


def pca_estimate(inst: ProblemInstance, svd: SvdCache):
    """Rescaled top singular vector pair, sign-aligned with the truth.

    Returns (u_hat, v_hat, cos2_u, cos2_v) with unit-RMS normalization.
    """
    u = svd.U[:, 0] * np.sqrt(inst.M)
    v = svd.V[:, 0] * np.sqrt(inst.N)
    if u @ inst.u_star < 0:
        u = -u
    if v @ inst.v_star < 0:
        v = -v
    return u, v, _cos2(u, inst.u_star), _cos2(v, inst.v_star)


def gaussian_amp_run(inst: ProblemInstance, channel_u: ScalarChannel,
                     channel_v: ScalarChannel, n_iter: int) -> IterationTrace:
    """AMP with Onsager correction, valid for i.i.d. Gaussian noise.

    Messages are rescaled onto the unit scalar channel using the state
    evolution strengths

        snr(w2) = theta^2 (1 - mmse_U(w1)),
        snr(w1) = (theta^2 / delta)(1 - mmse_V(w2)),

    with the empirical Onsager coefficients (1/N) sum of denoiser
    derivatives.  Denoisers are posterior means conditioning jointly on the
    message and the side information.
    """
    theta, delta = inst.theta, inst.delta
    M, N = inst.M, inst.N
    trace = IterationTrace()

    # start from the side-information posterior mean (w = 0 message)
    f = channel_u.posterior_mean(np.zeros(M), inst.a, 0.0)
    alpha = 1.0 - channel_u.mmse(0.0)
    g_prev = np.zeros(N)
    f_deriv_sum = 0.0
    w1 = 0.0

    for t in range(1, n_iter + 1):
        gamma_v = theta ** 2 * (1.0 - channel_u.mmse(w1))
        w2 = gamma_v / (1.0 + gamma_v)
        if alpha <= 0:
            raise BaselineError(f"denoiser alignment vanished at t={t}")
        s_v = np.sqrt(w2) / (theta * np.sqrt(delta) * alpha) if w2 > 0 else 0.0

        x = inst.Y.T @ f - (f_deriv_sum / N) * g_prev
        x_scaled = s_v * x
        g = channel_v.posterior_mean(x_scaled, inst.b, w2)
        g_deriv_sum = s_v * float(np.sum(
            channel_v.posterior_mean_derivative(x_scaled, inst.b, w2)))
        beta = 1.0 - channel_v.mmse(w2)

        gamma_u = theta ** 2 / delta * (1.0 - channel_v.mmse(w2))
        w1 = gamma_u / (1.0 + gamma_u)
        s_u = np.sqrt(w1) * np.sqrt(delta) / (theta * beta) if w1 > 0 else 0.0

        u_msg = inst.Y @ g - (g_deriv_sum / N) * f
        u_scaled = s_u * u_msg
        f = channel_u.posterior_mean(u_scaled, inst.a, w1)
        f_deriv_sum = s_u * float(np.sum(
            channel_u.posterior_mean_derivative(u_scaled, inst.a, w1)))
        alpha = 1.0 - channel_u.mmse(w1)
        g_prev = g
        _check_finite(f, "u")
        _check_finite(g, "v")

        trace.cos2_u.append(_cos2(f, inst.u_star))
        trace.cos2_v.append(_cos2(g, inst.v_star))
        trace.mse_u.append(float(np.mean((f - inst.u_star) ** 2)))
        trace.mse_v.append(float(np.mean((g - inst.v_star) ** 2)))
        trace.w1.append(w1)
        trace.w2.append(w2)
    return trace
