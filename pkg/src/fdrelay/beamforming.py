"""Per-slot MMSE relay and receive beamforming solvers.

The relay forwards with F = alpha * F_bar, where F_bar carries the steering
directions (kept at unit Frobenius norm) and alpha the power amplification;
receivers estimate with (1/alpha) R_l^H.  Each slot's joint design alternates
between two closed-form subproblem solutions:

* relay step: the stationarity system
      W_f1 Fb G_1 + W_f2 Fb G_2 + w_f / (n_r pr) * Fb G_r = W_f0
  is solved in vectorized form; the solution is renormalized to unit Frobenius
  norm with alpha restored from the transmit power constraint
  tr(F G_r F^H) = n_r pr (the physical F is invariant to that rescaling);
* receive step: per-source regularized Wiener inverse.

The sum MSE is non-increasing across full iterations because each subproblem
is solved exactly and the receive update absorbs the scaling convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemConfig, TimeSlotChannels
from .matrix_core import frobenius_sq, kron, mat, solve_linear, vec
from .si_propagation import ResidualSICovariance

__all__ = [
    "DegenerateObjectiveError",
    "SlotOperators",
    "RelaySolution",
    "BeamformingSolution",
    "build_slot_operators",
    "solve_relay_beamformer",
    "solve_receive_beamformers",
    "evaluate_sum_mse",
    "alternate_optimize",
]


class DegenerateObjectiveError(ValueError):
    """The desired-signal operator vanished; there is nothing to beamform."""


@dataclass(frozen=True)
class SlotOperators:
    """All operators of one slot's design, for the receive matrices they were built with.

    g1/g2/gr are the relay-input covariances seen by source 1's estimate,
    source 2's estimate, and the transmit power; they do not depend on the
    receive matrices.  w_f0 is the desired-signal operator, w_f1/w_f2 the
    receive-side quadratic kernels, and w_f_scalar collects the noise and
    source-loopback power picked up by the receive matrices.  w_r1..w_r4 (the
    receive-subproblem operators) are populated when a beamformer is supplied.
    """

    g1: np.ndarray
    g2: np.ndarray
    gr: np.ndarray
    w_f0: np.ndarray
    w_f1: np.ndarray
    w_f2: np.ndarray
    w_f_scalar: float
    nu_1: float  # n_s p1 sigma_e1^2 + sigma_n1^2
    nu_2: float  # n_s p2 sigma_e2^2 + sigma_n2^2
    h_r1: np.ndarray
    h_r2: np.ndarray
    h_1r_prev: np.ndarray
    h_2r_prev: np.ndarray
    w_r1: np.ndarray | None = None
    w_r2: np.ndarray | None = None
    w_r3: np.ndarray | None = None
    w_r4: np.ndarray | None = None


@dataclass(frozen=True)
class RelaySolution:
    """Relay subproblem output: unit-norm steering, amplification, multiplier.

    ``prenorm_scale`` is the Frobenius norm of the raw vectorized solution
    before renormalization (the raw stationary point is prenorm_scale *
    f_bar); it is exposed so the stationarity residual can be checked.
    """

    f_bar: np.ndarray
    alpha: float
    lam: float
    prenorm_scale: float

    @property
    def f(self) -> np.ndarray:
        return self.alpha * self.f_bar


@dataclass(frozen=True)
class BeamformingSolution:
    """Finished per-slot design with the achieved objective."""

    f_bar: np.ndarray
    alpha: float
    f: np.ndarray
    lam: float
    r1: np.ndarray
    r2: np.ndarray
    j_value: float
    iterations_used: int
    j_trace: tuple[float, ...] = field(default=())


def relay_input_covariances(
    ch_prev: TimeSlotChannels, g_c: ResidualSICovariance, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g1, g2, gr) from the previous slot's inbound channels and residual SI."""
    hh1 = cfg.p1 * (ch_prev.h_1r @ ch_prev.h_1r.conj().T)
    hh2 = cfg.p2 * (ch_prev.h_2r @ ch_prev.h_2r.conj().T)
    base = (g_c.scale + cfg.sigma_n_sq_r) * np.eye(cfg.n_r)
    return base + hh2, base + hh1, base + hh1 + hh2


def build_slot_operators(
    ch_t: TimeSlotChannels,
    ch_prev: TimeSlotChannels,
    g_c: ResidualSICovariance,
    r1: np.ndarray,
    r2: np.ndarray,
    cfg: SystemConfig,
    f: np.ndarray | None = None,
    g_core: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> SlotOperators:
    """Assemble one slot's operators for the given receive matrices.

    ``g_core`` lets callers reuse the receive-independent covariances across
    alternation iterations.  When ``f`` is given, the receive-subproblem
    operators w_r1..w_r4 are filled in as well.
    """
    if ch_t.h_r1.shape != (cfg.n_s, cfg.n_r) or ch_prev.h_1r.shape != (cfg.n_r, cfg.n_s):
        raise ValueError("channel dimensions inconsistent with configuration")
    g1, g2, gr = g_core if g_core is not None else relay_input_covariances(ch_prev, g_c, cfg)

    b1 = r1.conj().T @ ch_t.h_r1  # R_1^H H_r1
    b2 = r2.conj().T @ ch_t.h_r2
    w_f1 = b1.conj().T @ b1
    w_f2 = b2.conj().T @ b2
    w_f0 = cfg.p1 * ch_t.h_r2.conj().T @ r2 @ ch_prev.h_1r.conj().T \
        + cfg.p2 * ch_t.h_r1.conj().T @ r1 @ ch_prev.h_2r.conj().T
    nu_1 = cfg.n_s * cfg.p1 * cfg.sigma_e_sq_1 + cfg.sigma_n_sq_1
    nu_2 = cfg.n_s * cfg.p2 * cfg.sigma_e_sq_2 + cfg.sigma_n_sq_2
    w_f_scalar = nu_1 * frobenius_sq(r1) + nu_2 * frobenius_sq(r2)

    w_r1 = w_r2 = w_r3 = w_r4 = None
    if f is not None:
        c1 = ch_t.h_r1 @ f
        c2 = ch_t.h_r2 @ f
        w_r1 = c1 @ ch_prev.h_2r
        w_r2 = c2 @ ch_prev.h_1r
        w_r3 = c1 @ g1 @ c1.conj().T + nu_1 * np.eye(cfg.n_s)
        w_r4 = c2 @ g2 @ c2.conj().T + nu_2 * np.eye(cfg.n_s)

    return SlotOperators(
        g1=g1, g2=g2, gr=gr,
        w_f0=w_f0, w_f1=w_f1, w_f2=w_f2, w_f_scalar=w_f_scalar,
        nu_1=nu_1, nu_2=nu_2,
        h_r1=ch_t.h_r1, h_r2=ch_t.h_r2,
        h_1r_prev=ch_prev.h_1r, h_2r_prev=ch_prev.h_2r,
        w_r1=w_r1, w_r2=w_r2, w_r3=w_r3, w_r4=w_r4,
    )


def solve_relay_beamformer(ops: SlotOperators, cfg: SystemConfig) -> RelaySolution:
    """Closed-form relay steering/amplification for fixed receive matrices.

    Raises :class:`DegenerateObjectiveError` when the desired-signal operator
    is exactly zero (zero source power or zero receive matrices), since
    normalizing a zero steering matrix would hide a configuration error.
    """
    if not np.any(ops.w_f0):
        raise DegenerateObjectiveError("desired-signal operator w_f0 is zero")
    n_r = cfg.n_r
    power_budget = n_r * cfg.pr
    k = kron(ops.g1.T, ops.w_f1) + kron(ops.g2.T, ops.w_f2) \
        + kron(ops.gr.T, (ops.w_f_scalar / power_budget) * np.eye(n_r))
    raw = solve_linear(k, vec(ops.w_f0))
    prenorm_scale = float(np.linalg.norm(raw))
    f_bar = mat(raw, n_r, n_r) / prenorm_scale
    gain = float(np.real(np.trace(f_bar @ ops.gr @ f_bar.conj().T)))
    if gain <= 0.0:
        raise ValueError("tr(F G_r F^H) <= 0: relay input covariance is corrupt")
    alpha = math.sqrt(power_budget / gain)
    lam = ops.w_f_scalar * gain / power_budget**2
    return RelaySolution(f_bar=f_bar, alpha=alpha, lam=lam, prenorm_scale=prenorm_scale)


def solve_receive_beamformers(
    ch_t: TimeSlotChannels,
    ch_prev: TimeSlotChannels,
    f: np.ndarray,
    alpha: float,
    g1: np.ndarray,
    g2: np.ndarray,
    cfg: SystemConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form receive matrices: R_l = alpha p_lbar (B G_l B^H + nu_l I)^-1 B H_lbar.

    B is the source-l end-to-end forward channel H_rl F.  The composite
    estimator (1/alpha) R_l^H does not depend on alpha.
    """
    nu_1 = cfg.n_s * cfg.p1 * cfg.sigma_e_sq_1 + cfg.sigma_n_sq_1
    nu_2 = cfg.n_s * cfg.p2 * cfg.sigma_e_sq_2 + cfg.sigma_n_sq_2
    eye = np.eye(cfg.n_s)
    c1 = ch_t.h_r1 @ f
    c2 = ch_t.h_r2 @ f
    r1 = alpha * cfg.p2 * np.linalg.solve(c1 @ g1 @ c1.conj().T + nu_1 * eye, c1 @ ch_prev.h_2r)
    r2 = alpha * cfg.p1 * np.linalg.solve(c2 @ g2 @ c2.conj().T + nu_2 * eye, c2 @ ch_prev.h_1r)
    return r1, r2


def evaluate_sum_mse(
    ops: SlotOperators,
    f_bar: np.ndarray,
    alpha: float,
    r1: np.ndarray,
    r2: np.ndarray,
    cfg: SystemConfig,
) -> float:
    """Analytic sum MSE of both source estimates for the given design.

    Uses the closed-form signal expectations (never sampling).  The receive
    matrices are taken from the arguments, not from the ones ``ops`` was built
    with, so the objective can be tracked right after a receive update.
    """
    f = alpha * f_bar
    w_f0 = cfg.p1 * ops.h_r2.conj().T @ r2 @ ops.h_1r_prev.conj().T \
        + cfg.p2 * ops.h_r1.conj().T @ r1 @ ops.h_2r_prev.conj().T
    cross = 2.0 * float(np.real(np.vdot(w_f0, f)))
    e1 = r1.conj().T @ ops.h_r1 @ f
    e2 = r2.conj().T @ ops.h_r2 @ f
    quad = (
        float(np.real(np.trace(e1 @ ops.g1 @ e1.conj().T)))
        + float(np.real(np.trace(e2 @ ops.g2 @ e2.conj().T)))
        + ops.nu_1 * frobenius_sq(r1)
        + ops.nu_2 * frobenius_sq(r2)
    )
    return cfg.n_s * (cfg.p1 + cfg.p2) - cross / alpha + quad / alpha**2


def alternate_optimize(
    ch_t: TimeSlotChannels,
    ch_prev: TimeSlotChannels,
    g_c: ResidualSICovariance,
    cfg: SystemConfig,
    pin_receive: bool = False,
) -> BeamformingSolution:
    """Alternate the two closed-form subproblems for one slot.

    Starts from identity beamformers (projected onto the power constraint for
    the objective trace), runs at most ``cfg.max_iterations`` rounds of
    relay-then-receive updates, and stops early once the relative objective
    change falls below ``cfg.convergence_tol``.  With ``pin_receive`` the
    receive matrices stay at identity (relay-only design).
    """
    eye_s = np.eye(cfg.n_s)
    r1 = eye_s.copy()
    r2 = eye_s.copy()
    g_core = relay_input_covariances(ch_prev, g_c, cfg)

    ops = build_slot_operators(ch_t, ch_prev, g_c, r1, r2, cfg, g_core=g_core)
    f_bar0 = np.eye(cfg.n_r) / math.sqrt(cfg.n_r)
    gain0 = float(np.real(np.trace(f_bar0 @ ops.gr @ f_bar0.conj().T)))
    alpha0 = math.sqrt(cfg.n_r * cfg.pr / gain0)
    j_prev = evaluate_sum_mse(ops, f_bar0, alpha0, r1, r2, cfg)
    j_trace = [j_prev]

    relay = RelaySolution(f_bar=f_bar0, alpha=alpha0, lam=0.0, prenorm_scale=1.0)
    iterations_used = 0
    for _ in range(cfg.max_iterations):
        ops = build_slot_operators(ch_t, ch_prev, g_c, r1, r2, cfg, g_core=g_core)
        relay = solve_relay_beamformer(ops, cfg)
        if not pin_receive:
            r1, r2 = solve_receive_beamformers(
                ch_t, ch_prev, relay.f, relay.alpha, ops.g1, ops.g2, cfg
            )
        j = evaluate_sum_mse(ops, relay.f_bar, relay.alpha, r1, r2, cfg)
        j_trace.append(j)
        iterations_used += 1
        if abs(j - j_prev) <= cfg.convergence_tol * max(1.0, abs(j_prev)):
            j_prev = j
            break
        j_prev = j

    return BeamformingSolution(
        f_bar=relay.f_bar,
        alpha=relay.alpha,
        f=relay.f,
        lam=relay.lam,
        r1=r1,
        r2=r2,
        j_value=j_prev,
        iterations_used=iterations_used,
        j_trace=tuple(j_trace),
    )
