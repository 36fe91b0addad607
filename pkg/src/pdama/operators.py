"""Oracles for the dual components of the supported problem class.

Every function is a closed form for ``g(u) = 1/2 ||D u - q||^2`` on a box
``U`` and ``h`` the indicator of a box ``V``. Functions that accept an
optional ``smoothing`` fall back to the unsmoothed (strongly convex) oracle
when it is ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotStronglyConvex, SingularB, UnattainedMin, UnboundedV
from .model import ProblemSpec, SmoothingSetup

TIE_TOL = 1e-14


@dataclass(frozen=True)
class SharpResult:
    point: np.ndarray
    tie_mask: np.ndarray


@dataclass(frozen=True)
class DualValueBundle:
    d1: float
    d2: float
    linear: float
    total: float


def smoothed_u_argmin(spec: ProblemSpec, smoothing: SmoothingSetup, lam) -> np.ndarray:
    """Unique minimizer of ``g(u) - <A^T lam, u> + gamma/2 ||u - center||^2`` over ``U``."""
    d, q = spec.g.diag, spec.g.shift
    s = spec.A.T @ lam
    gam = smoothing.gamma * smoothing.mu_p
    u = (d * q + s + gam * smoothing.center) / (d * d + gam)
    return spec.U.clip(u)


def sharp_u(spec: ProblemSpec, s) -> SharpResult:
    d = spec.g.diag
    if np.any(d == 0):
        raise NotStronglyConvex("sharp_u needs every diagonal entry of D positive")
    u = spec.U.clip((d * spec.g.shift + s) / (d * d))
    return SharpResult(u, np.zeros(u.size, dtype=bool))


def u_oracle(spec: ProblemSpec, smoothing: SmoothingSetup | None, lam) -> np.ndarray:
    if smoothing is None:
        return sharp_u(spec, spec.A.T @ lam).point
    return smoothed_u_argmin(spec, smoothing, lam)


def grad_d1_gamma(spec: ProblemSpec, smoothing: SmoothingSetup | None, lam) -> np.ndarray:
    return -(spec.A @ u_oracle(spec, smoothing, lam))


def sharp_v(spec: ProblemSpec, s, tie_hint=None) -> SharpResult:
    """A maximizer of ``<s, v>`` over the box ``V``.

    Coordinates with ``|s_i| <= 1e-14`` are ties; they take the clipped
    hint when one is given and the box midpoint otherwise.
    """
    V = spec.V
    if not V.is_bounded:
        raise UnboundedV("sharp_v needs a bounded V")
    s = np.asarray(s, dtype=float)
    tie = np.abs(s) <= TIE_TOL
    v = np.where(s > 0, V.upper, V.lower)
    if tie.any():
        fill = 0.5 * (V.lower + V.upper) if tie_hint is None else V.clip(tie_hint)
        v = np.where(tie, fill, v)
    return SharpResult(v, tie)


def v_subproblem(spec: ProblemSpec, lam, u_tilde, eta: float) -> np.ndarray:
    """Exact minimizer of ``-<B^T lam, v> + eta/2 ||c - A u_tilde - B v||^2`` over ``V``."""
    beta = spec.beta
    if np.any(beta == 0):
        raise SingularB("B has a zero column")
    w = spec.c - spec.A @ u_tilde
    v = (spec.B.T @ lam + eta * (spec.B.T @ w)) / (eta * beta)
    return spec.V.clip(v)


def _coord_min(d, q, s, lo, up):
    """Coordinatewise minimizer of ``1/2 (d u - q)^2 - s u`` on ``[lo, up]``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        stationary = (d * q + s) / (d * d)
    flat = d == 0
    unattained = flat & (((s > 0) & ~np.isfinite(up)) | ((s < 0) & ~np.isfinite(lo)))
    if unattained.any():
        raise UnattainedMin(f"d1 is -inf (coordinates {np.flatnonzero(unattained).tolist()})")
    linear_pick = np.where(s > 0, up, np.where(s < 0, lo, np.clip(0.0, lo, up)))
    u = np.where(flat, linear_pick, stationary)
    return np.minimum(np.maximum(u, lo), up)


def d1_value(spec: ProblemSpec, lam) -> float:
    """``min_{u in U} g(u) - <A^T lam, u>``."""
    d, q = spec.g.diag, spec.g.shift
    s = spec.A.T @ lam
    u = _coord_min(d, q, s, spec.U.lower, spec.U.upper)
    return spec.g.value(u) - float(s @ u)


def d1_gamma_value(spec: ProblemSpec, smoothing: SmoothingSetup | None, lam) -> float:
    if smoothing is None:
        return d1_value(spec, lam)
    u = smoothed_u_argmin(spec, smoothing, lam)
    s = spec.A.T @ lam
    return spec.g.value(u) - float(s @ u) + smoothing.gamma * smoothing.prox(u)


def d2_value(spec: ProblemSpec, lam) -> float:
    """``min_{v in V} -<B^T lam, v>``."""
    if not spec.V.is_bounded:
        raise UnboundedV("d2 is not finite on an unbounded V")
    t = spec.B.T @ lam
    return -float(np.sum(np.maximum(t * spec.V.upper, t * spec.V.lower)))


def _bundle(d1, d2, linear):
    return DualValueBundle(d1=d1, d2=d2, linear=linear, total=d1 + d2 + linear)


def dual_values(spec: ProblemSpec, smoothing: SmoothingSetup | None, lam):
    """Return ``(smoothed, plain)`` bundles; ``smoothed`` is None without smoothing."""
    d2 = d2_value(spec, lam)
    linear = float(spec.c @ lam)
    plain = _bundle(d1_value(spec, lam), d2, linear)
    smoothed = None if smoothing is None else _bundle(d1_gamma_value(spec, smoothing, lam), d2, linear)
    return smoothed, plain


def dual_value(spec: ProblemSpec, lam) -> float:
    return dual_values(spec, None, lam)[1].total


def quad_surrogate(spec: ProblemSpec, smoothing: SmoothingSetup | None, lam, lam_hat, L: float) -> float:
    """Concave quadratic minorant of ``d1_gamma`` built at ``lam_hat`` with curvature ``L``."""
    diff = np.asarray(lam, dtype=float) - lam_hat
    return (
        d1_gamma_value(spec, smoothing, lam_hat)
        + float(grad_d1_gamma(spec, smoothing, lam_hat) @ diff)
        - 0.5 * L * float(diff @ diff)
    )


def prox_neg_d2(spec: ProblemSpec, y, eta: float) -> np.ndarray:
    """``argmin_lam -eta*d2(lam) + 1/2 ||lam - y||^2`` for square diagonal ``B``.

    Here ``-d2`` is a sum of scalar piecewise-linear functions of ``lam_i``,
    so the prox is a shifted soft-threshold. It does not touch the
    v-subproblem, which makes it usable as a cross-check of the dual step.
    """
    B = spec.B
    if B.shape[0] != B.shape[1] or np.any(B - np.diag(np.diag(B))):
        raise NotImplementedError("closed-form prox only for square diagonal B")
    b = np.diag(B)
    s1 = b * spec.V.lower
    s2 = b * spec.V.upper
    lo_slope = np.minimum(s1, s2)
    hi_slope = np.maximum(s1, s2)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    right = y - eta * hi_slope
    left = y - eta * lo_slope
    out = np.where(right > 0, right, out)
    out = np.where(left < 0, left, out)
    return out
