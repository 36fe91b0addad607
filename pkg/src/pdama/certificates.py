"""Executable convergence bounds and trace certification.

Four bound families are provided, keyed by a short name:

    smoothed        non-accelerated, smoothed          O(1/k) + smoothing floor
    smoothed_accel  accelerated, smoothed              O(1/k^2) + smoothing floor
    strong          non-accelerated, strongly convex   O(1/k)
    strong_accel    accelerated, strongly convex       O(1/k^2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotStronglyConvex, TraceVariantMismatch, Unreachable, ValidationError

BOUND_KINDS = ("smoothed", "smoothed_accel", "strong", "strong_accel")
REL_TOL = 1e-6
ABS_TOL = 1e-9
# absorbs rounding in gamma * D_U == epsilon under the accelerated auto policy
EPS_SLACK = 1e-12
K_MAX = 2**62


def bound_kind(variant: str, strongly_convex: bool) -> str:
    if strongly_convex:
        return "strong_accel" if variant == "ama_accel" else "strong"
    return "smoothed_accel" if variant == "ama_accel" else "smoothed"


@dataclass(frozen=True)
class CertificateInputs:
    f_star: float
    lambda_star: np.ndarray
    lambda0: np.ndarray
    d_u: float
    norm_A: float
    gamma: float
    mu_p: float = 1.0
    mu_g: float = 0.0
    line_search: bool = False

    @property
    def L_d1(self) -> float:
        """``||A||^2 / mu_p``, doubled for line-search traces."""
        L = self.norm_A**2 / self.mu_p
        return 2.0 * L if self.line_search else L

    @property
    def L_sc(self) -> float:
        if not self.mu_g > 0:
            raise NotStronglyConvex("mu_g must be positive")
        L = self.norm_A**2 / self.mu_g
        return 2.0 * L if self.line_search else L

    @property
    def r_lam0(self) -> float:
        return float(np.linalg.norm(self.lambda0))

    @property
    def r_star(self) -> float:
        return float(np.linalg.norm(self.lambda_star))

    @property
    def r_dist(self) -> float:
        return float(np.linalg.norm(np.asarray(self.lambda0) - self.lambda_star))

    def with_gamma(self, gamma: float) -> "CertificateInputs":
        return CertificateInputs(
            f_star=self.f_star,
            lambda_star=self.lambda_star,
            lambda0=self.lambda0,
            d_u=self.d_u,
            norm_A=self.norm_A,
            gamma=gamma,
            mu_p=self.mu_p,
            mu_g=self.mu_g,
            line_search=self.line_search,
        )


@dataclass(frozen=True)
class BoundPair:
    obj_bound: float
    feas_bound: float

    @property
    def worst(self) -> float:
        return max(self.obj_bound, self.feas_bound)


def bound_smoothed(k: int, inp: CertificateInputs) -> BoundPair:
    L, g, D = inp.L_d1, inp.gamma, inp.d_u
    kk = k + 1.0
    root = math.sqrt(L * D / kk)
    obj = max(
        L * inp.r_lam0**2 / (g * kk) + g * D,
        2.0 * L * inp.r_star * inp.r_dist / (g * kk) + inp.r_star * root,
    )
    feas = 2.0 * L * inp.r_dist / (g * kk) + root
    return BoundPair(obj, feas)


def bound_smoothed_accel(k: int, inp: CertificateInputs) -> BoundPair:
    L, g, D = inp.L_d1, inp.gamma, inp.d_u
    kk = (k + 1.0) * (k + 2.0)
    root = math.sqrt(4.0 * L * D / kk)
    obj = max(
        2.0 * L * inp.r_lam0**2 / (g * kk) + g * D,
        8.0 * L * inp.r_star * inp.r_dist / (g * kk) + inp.r_star * root,
    )
    feas = 8.0 * L * inp.r_dist / (g * kk) + root
    return BoundPair(obj, feas)


def bound_strong(k: int, inp: CertificateInputs, accelerated: bool = False) -> BoundPair:
    L = inp.L_sc
    if accelerated:
        kk = (k + 1.0) * (k + 2.0)
        obj = 2.0 * L / kk * max(inp.r_lam0**2, 4.0 * inp.r_star * inp.r_dist)
        feas = 8.0 * L * inp.r_dist / kk
    else:
        kk = k + 1.0
        obj = L / kk * max(inp.r_lam0**2, 2.0 * inp.r_star * inp.r_dist)
        feas = 2.0 * L * inp.r_dist / kk
    return BoundPair(obj, feas)


def bound(kind: str, k: int, inp: CertificateInputs) -> BoundPair:
    if kind == "smoothed":
        return bound_smoothed(k, inp)
    if kind == "smoothed_accel":
        return bound_smoothed_accel(k, inp)
    if kind == "strong":
        return bound_strong(k, inp, accelerated=False)
    if kind == "strong_accel":
        return bound_strong(k, inp, accelerated=True)
    raise ValidationError(f"unknown bound kind {kind!r}")


def auto_gamma_for(kind: str, epsilon: float, d_u: float) -> float:
    return epsilon / (2.0 * d_u) if kind == "smoothed" else epsilon / d_u


def predict_iterations(kind: str, epsilon: float, inp: CertificateInputs, auto_gamma: bool = True) -> int:
    """Least ``k`` whose bound pair is at most ``epsilon``.

    With ``auto_gamma`` the smoothing parameter is reset from ``epsilon``
    by the policy matching ``kind``. Binary search over ``[0, 2**62]``
    relies on every bound being non-increasing in ``k``.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    if kind in ("smoothed", "smoothed_accel") and auto_gamma:
        inp = inp.with_gamma(auto_gamma_for(kind, epsilon, inp.d_u))
    target = epsilon * (1.0 + EPS_SLACK)

    def ok(k):
        return bound(kind, k, inp).worst <= target

    if not ok(K_MAX):
        raise Unreachable(f"{kind} bound stays above epsilon={epsilon:g}")
    lo, hi = 0, K_MAX
    if ok(lo):
        return 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class CheckResult:
    k: int
    obj_ok: bool
    feas_ok: bool
    lower_ok: bool

    @property
    def ok(self) -> bool:
        return self.obj_ok and self.feas_ok and self.lower_ok


@dataclass
class CertificateReport:
    kind: str
    passed: bool
    first_violation: int | None
    checks: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "first_violation": self.first_violation,
            "reason": self.reason,
            "checked": len(self.checks),
            "failed_k": [c.k for c in self.checks if not c.ok],
        }


def dominated(value: float, limit: float, rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> bool:
    return value <= limit * (1.0 + rel_tol) + abs_tol


def check_trace(
    trace,
    inp: CertificateInputs,
    kind: str,
    trace_kind: str | None = None,
    rel_tol: float = REL_TOL,
    abs_tol: float = ABS_TOL,
) -> CertificateReport:
    """Check every record of ``trace`` against the ``kind`` bounds.

    Also checks the saddle-point lower estimate
    ``f(x) - f* >= -||lambda*|| * ||Au + Bv - c||``.
    """
    if kind not in BOUND_KINDS:
        raise ValidationError(f"unknown bound kind {kind!r}")
    if trace_kind is not None and trace_kind != kind:
        raise TraceVariantMismatch(f"trace was produced by {trace_kind}, asked to certify {kind}")
    checks = []
    first = None
    reason = ""
    for rec in trace:
        b = bound(kind, rec.k, inp)
        resid = rec.f_avg - inp.f_star
        c = CheckResult(
            k=rec.k,
            obj_ok=dominated(abs(resid), b.obj_bound, rel_tol, abs_tol),
            feas_ok=dominated(rec.feas, b.feas_bound, rel_tol, abs_tol),
            lower_ok=resid >= -inp.r_star * rec.feas - abs_tol,
        )
        checks.append(c)
        if not c.ok and (first is None or rec.k < first):
            first = rec.k
            failed = [n for n, flag in (("objective", c.obj_ok), ("feasibility", c.feas_ok), ("lower", c.lower_ok)) if not flag]
            reason = f"k={rec.k}: {', '.join(failed)} bound violated"
    return CertificateReport(kind=kind, passed=first is None, first_violation=first, checks=checks, reason=reason)
