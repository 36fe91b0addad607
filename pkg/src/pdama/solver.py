"""Primal-dual alternating minimization (AMA) and its accelerated variant.

Both methods run proximal-gradient ascent on the (smoothed) dual and
recover a primal point by weighted averaging of the sharp-operator outputs.
The strongly convex variants skip smoothing and use the exact u-oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import operators as ops
from ._kernels import fixed_step_loop
from .errors import SingularB, StepTooSmall, ValidationError
from .model import (
    MEMBERSHIP_TOL,
    BoxSet,
    PrimalPoint,
    ProblemSpec,
    QuadraticObjective,
    SmoothingSetup,
    make_smoothing,
    prox_diameter,
    spectral_norm,
    validate,
)

log = logging.getLogger(__name__)

VARIANTS = ("ama", "ama_accel")
MOMENTUM_MODES = ("extrapolated", "classic")
STEP_POLICIES = ("fixed", "line_search")
MIN_STEP = 1e-18
MAX_DOUBLINGS = 60
LEMMA_TOL = 1e-9


@dataclass
class SolverConfig:
    variant: str = "ama"
    strongly_convex: bool = False
    epsilon: float = 1e-2
    gamma: float | None = None  # None selects the variant's auto policy
    step_policy: str = "fixed"
    lower_L: float | None = None
    max_iter: int = 1000
    momentum_mode: str = "extrapolated"
    swap_sides: bool = False
    lambda0: np.ndarray | None = None
    center: np.ndarray | None = None
    f_star: float | None = None
    trace: bool = True
    keep_history: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}")
        if self.momentum_mode not in MOMENTUM_MODES:
            raise ValidationError(f"momentum_mode must be one of {MOMENTUM_MODES}")
        if self.step_policy not in STEP_POLICIES:
            raise ValidationError(f"step_policy must be one of {STEP_POLICIES}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        if self.max_iter < 0:
            raise ValidationError("max_iter must be nonnegative")

    @property
    def accelerated(self) -> bool:
        return self.variant == "ama_accel"

    @property
    def label(self) -> str:
        """Short name used in trace headers and reports, e.g. ``ama_accel/smoothed``."""
        return f"{self.variant}/{'strongly_convex' if self.strongly_convex else 'smoothed'}"


def auto_gamma(variant: str, epsilon: float, d_u: float) -> float:
    if d_u <= 0:
        raise ValidationError("prox-diameter is zero; choose gamma explicitly")
    return epsilon / (2.0 * d_u) if variant == "ama" else epsilon / d_u


@dataclass
class SolverState:
    k: int
    lam: np.ndarray
    lam_hat: np.ndarray
    t: float
    s_weight: float
    u_bar: np.ndarray
    v_bar: np.ndarray
    eta_prev: float | None = None
    L_prev: float | None = None


@dataclass(frozen=True)
class IterationRecord:
    k: int
    eta: float
    f_avg: float
    feas: float
    d_gamma: float
    d_plain: float
    lemma_ok: bool
    linesearch_evals: int
    tie_count: int


@dataclass(frozen=True)
class StepInfo:
    """Intermediate quantities of one iteration, kept for diagnostics."""

    u_tilde: np.ndarray
    v_hat: np.ndarray
    v_tilde: np.ndarray
    lam_hat: np.ndarray
    lam_next: np.ndarray
    eta: float
    weight: float
    evals: int
    lemma_ok: bool
    tie_count: int


@dataclass
class RunResult:
    trace: list
    final: PrimalPoint
    final_dual: np.ndarray
    config: SolverConfig
    spec: ProblemSpec
    smoothing: SmoothingSetup | None
    lipschitz: float
    d_gamma_initial: float
    swapped: bool = False
    history: list = field(default_factory=list)
    last: IterationRecord | None = None

    @property
    def iterations(self) -> int:
        return self.last.k + 1 if self.last is not None else 0


def swap_sides(spec: ProblemSpec) -> ProblemSpec:
    """Exchange the roles of ``(g, U, A)`` and ``(h, V, B)``.

    Only defined when ``g`` is constant on ``U`` (all of ``D`` zero) and
    ``A^T A`` is diagonal, so the swapped problem stays in the supported
    class. The constant ``1/2 ||q||^2`` is carried by a one-hot shift.
    """
    if np.any(spec.g.diag != 0):
        raise ValidationError("swap_sides needs a constant g (D = 0)")
    shift = np.zeros(spec.p2)
    shift[0] = np.linalg.norm(spec.g.shift)
    swapped = ProblemSpec(
        A=spec.B,
        B=spec.A,
        c=spec.c,
        g=QuadraticObjective(np.zeros(spec.p2), shift),
        U=spec.V,
        V=spec.U,
    )
    return validate(swapped)


def _default_center(U: BoxSet) -> np.ndarray:
    return U.clip(np.zeros(U.dim))


class AMASolver:
    """Holds the precomputed setup for one solver run.

    ``run`` drives the loop; ``step`` performs a single iteration and is
    what :func:`step_ama` and :func:`step_ama_accel` wrap. The per-iteration
    arithmetic is inlined on cached arrays; :mod:`pdama.operators` holds the
    same formulas as standalone functions and the tests check that the two
    agree.
    """

    def __init__(self, spec: ProblemSpec, config: SolverConfig, norm_A: float | None = None):
        self.spec = validate(spec)
        self.config = config
        self.norm_A = spectral_norm(spec.A) if norm_A is None else float(norm_A)
        if self.norm_A == 0:
            raise ValidationError("A is zero; the dual step is unbounded")
        if config.strongly_convex:
            if not spec.strongly_convex:
                raise ValidationError("strongly convex variant needs all entries of D positive")
            self.smoothing = None
            self.lipschitz = self.norm_A**2 / spec.g.mu
        else:
            center = _default_center(spec.U) if config.center is None else np.asarray(config.center, float)
            d_u = prox_diameter(spec.U, center)
            gamma = config.gamma if config.gamma is not None else auto_gamma(config.variant, config.epsilon, d_u)
            self.smoothing = make_smoothing(spec, gamma, center=center, norm_A=self.norm_A)
            self.lipschitz = self.smoothing.lipschitz_smoothed
        self.lower_L = self.lipschitz / 16.0 if config.lower_L is None else float(config.lower_L)
        if not 0 < self.lower_L:
            raise ValidationError("lower_L must be positive")
        if self.lower_L > self.lipschitz * (1 + 1e-12):
            raise ValidationError("lower_L must not exceed the Lipschitz constant")
        self._prepare()
        self._cache = None

    def _prepare(self):
        spec, sm = self.spec, self.smoothing
        self._A = np.ascontiguousarray(spec.A)
        self._AT = np.ascontiguousarray(spec.A.T)
        self._B = np.ascontiguousarray(spec.B)
        self._BT = np.ascontiguousarray(spec.B.T)
        self._c = spec.c
        self._beta = spec.beta
        if np.any(self._beta == 0):
            raise SingularB("B has a zero column")
        d, q = spec.g.diag, spec.g.shift
        self._d, self._q, self._dq = d, q, d * q
        if sm is None:
            self._gam = 0.0
            self._center = np.zeros(spec.p1)
        else:
            self._gam = sm.gamma * sm.mu_p
            self._center = sm.center
        self._den = d * d + self._gam
        self._gc = self._gam * self._center
        self._ulo, self._uhi = spec.U.lower, spec.U.upper
        self._uclip = bool(np.isfinite(self._ulo).any() or np.isfinite(self._uhi).any())
        self._vlo, self._vhi = spec.V.lower, spec.V.upper
        # unsmoothed d1: flat coordinates (D_i = 0) minimize a linear term over [lo, up]
        self._flat = d == 0
        self._dd_safe = np.where(self._flat, 1.0, d * d)
        self._u_zero = np.minimum(np.maximum(0.0, self._ulo), self._uhi)

    # -- oracles on cached arrays -----------------------------------------
    def _u(self, lam):
        s = self._AT.dot(lam)
        u = (self._dq + s + self._gc) / self._den
        if self._uclip:
            u = np.minimum(np.maximum(u, self._ulo), self._uhi)
        return u, s

    def _d1(self, u, s):
        r = self._d * u - self._q
        val = 0.5 * r.dot(r) - s.dot(u)
        if self._gam:
            e = u - self._center
            val += 0.5 * self._gam * e.dot(e)
        return float(val)

    def _d1_plain(self, lam) -> float:
        s = self._AT.dot(lam)
        u = (self._dq + s) / self._dd_safe
        if self._flat.any():
            u = np.where(self._flat, np.where(s > 0, self._uhi, np.where(s < 0, self._ulo, self._u_zero)), u)
        u = np.minimum(np.maximum(u, self._ulo), self._uhi)
        r = self._d * u - self._q
        return float(0.5 * r.dot(r) - s.dot(u))

    def _d1_at(self, lam):
        c = self._cache
        if c is not None and c[0] is lam:
            return c[3]
        u, s = self._u(lam)
        return self._d1(u, s)

    def _trial(self, lam_hat, w, BTl, BTw, eta):
        v = (BTl + eta * BTw) / (eta * self._beta)
        v = np.minimum(np.maximum(v, self._vlo), self._vhi)
        lam_next = lam_hat + eta * (w - self._B.dot(v))
        return v, lam_next

    def _lemma(self, lam_hat, d1_hat, Au, lam_next, L):
        """Return ``(d1_next, surrogate)`` and cache the oracle at ``lam_next``."""
        u_n, s_n = self._u(lam_next)
        d1_next = self._d1(u_n, s_n)
        self._cache = (lam_next, u_n, s_n, d1_next)
        diff = lam_next - lam_hat
        q = d1_hat - float(Au.dot(diff)) - 0.5 * L * float(diff.dot(diff))
        return d1_next, q

    # -- pieces -----------------------------------------------------------
    def initial_state(self) -> SolverState:
        spec = self.spec
        lam0 = np.zeros(spec.n) if self.config.lambda0 is None else np.array(self.config.lambda0, dtype=float)
        if lam0.shape != (spec.n,):
            raise ValidationError("lambda0 has the wrong length")
        self._cache = None
        return SolverState(
            k=0,
            lam=lam0,
            lam_hat=lam0,
            t=1.0,
            s_weight=0.0,
            u_bar=np.zeros(spec.p1),
            v_bar=np.zeros(spec.p2),
        )

    def line_search_eta(self, lam_hat, u_tilde, prev_L):
        """Back-tracking on ``L``: double until the surrogate condition holds.

        Starts at ``max(lower_L, prev_L / 2)`` (``prev_L`` without halving in
        the accelerated method, so steps never grow). Returns
        ``(eta, L, evals, v_hat, lam_next, lemma_ok)``.
        """
        Au = self._A.dot(u_tilde)
        w = self._c - Au
        BTl = self._BT.dot(lam_hat)
        BTw = self._BT.dot(w)
        if prev_L is None:
            L = self.lower_L
        elif self.config.accelerated:
            L = max(self.lower_L, prev_L)
        else:
            L = max(self.lower_L, prev_L / 2.0)
        d1_hat = self._d1_at(lam_hat)
        for evals in range(1, MAX_DOUBLINGS + 2):
            eta = 1.0 / L
            if eta < MIN_STEP:
                break
            v_hat, lam_next = self._trial(lam_hat, w, BTl, BTw, eta)
            d1_next, q = self._lemma(lam_hat, d1_hat, Au, lam_next, L)
            if d1_next >= q - 1e-12 * (1.0 + abs(d1_next)):
                return eta, L, evals, v_hat, lam_next, d1_next >= q - LEMMA_TOL
            L *= 2.0
        raise StepTooSmall("line search exceeded the doubling budget")

    def step(self, state: SolverState, check_lemma: bool = True) -> StepInfo:
        """Advance ``state`` in place by one iteration."""
        cfg = self.config
        lam_hat = state.lam_hat if cfg.accelerated else state.lam
        cache = self._cache
        if cache is not None and cache[0] is lam_hat:
            u_tilde = cache[1]
        else:
            u_tilde = self._u(lam_hat)[0]

        if cfg.step_policy == "fixed":
            L = self.lipschitz
            eta = 1.0 / L
            Au = self._A.dot(u_tilde)
            w = self._c - Au
            v_hat, lam_next = self._trial(lam_hat, w, self._BT.dot(lam_hat), self._BT.dot(w), eta)
            evals = 1
            lemma_ok = True
            if check_lemma:
                d1_hat = self._d1_at(lam_hat)
                d1_next, q = self._lemma(lam_hat, d1_hat, Au, lam_next, L)
                lemma_ok = d1_next >= q - LEMMA_TOL
        else:
            eta, L, evals, v_hat, lam_next, lemma_ok = self.line_search_eta(lam_hat, u_tilde, state.L_prev)
        if eta < MIN_STEP:
            raise StepTooSmall(f"step {eta:g} below {MIN_STEP:g}")

        t_dual = self._BT.dot(lam_next)
        v_tilde = np.where(t_dual > 0, self._vhi, self._vlo)
        tie = np.abs(t_dual) <= ops.TIE_TOL
        ties = int(tie.sum())
        if ties:
            v_tilde = np.where(tie, v_hat, v_tilde)

        weight = eta * state.t if cfg.accelerated else eta
        state.s_weight += weight
        tau = weight / state.s_weight
        state.u_bar = (1.0 - tau) * state.u_bar + tau * u_tilde
        state.v_bar = (1.0 - tau) * state.v_bar + tau * v_tilde

        if cfg.accelerated:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.t * state.t))
            beta = (state.t - 1.0) / t_next
            # "extrapolated" steps along lam_next - lam_hat, "classic" along lam_next - lam
            if cfg.momentum_mode == "extrapolated":
                delta = lam_next - lam_hat
            else:
                delta = lam_next - state.lam
            state.lam_hat = lam_next + beta * delta
            state.t = t_next
        else:
            state.lam_hat = lam_next
        state.lam = lam_next
        state.eta_prev = eta
        state.L_prev = L
        state.k += 1
        return StepInfo(
            u_tilde=u_tilde,
            v_hat=v_hat,
            v_tilde=v_tilde,
            lam_hat=lam_hat,
            lam_next=lam_next,
            eta=eta,
            weight=weight,
            evals=evals,
            lemma_ok=bool(lemma_ok),
            tie_count=ties,
        )

    def _fast_path_ok(self) -> bool:
        cfg = self.config
        return not cfg.trace and not cfg.keep_history and cfg.step_policy == "fixed" and cfg.f_star is None

    def advance_compiled(self, state: SolverState, iters: int) -> None:
        """Run ``iters`` fixed-step iterations in the compiled loop, updating ``state``."""
        cfg = self.config
        lam, lam_hat, t, s_weight, u_bar, v_bar = fixed_step_loop(
            self._A, self._B, self._c, self._beta, self._dq, self._den, self._gc,
            self._ulo, self._uhi, self._vlo, self._vhi, 1.0 / self.lipschitz,
            cfg.accelerated, cfg.momentum_mode == "extrapolated",
            state.lam, state.lam_hat, state.t, state.s_weight, state.u_bar, state.v_bar, iters,
        )
        state.lam, state.lam_hat, state.t, state.s_weight = lam, lam_hat, t, s_weight
        state.u_bar, state.v_bar = u_bar, v_bar
        state.k += iters
        state.eta_prev = 1.0 / self.lipschitz
        state.L_prev = self.lipschitz
        self._cache = None

    def d_gamma(self, lam) -> float:
        return self._d1_at(lam) + self._d2(lam) + float(self._c.dot(lam))

    def _d2(self, lam) -> float:
        t = self._BT.dot(lam)
        return -float(np.maximum(t * self._vhi, t * self._vlo).sum())

    def record(self, k: int, state: SolverState, info: StepInfo) -> IterationRecord:
        spec = self.spec
        lam = state.lam
        d2 = self._d2(lam)
        linear = float(self._c.dot(lam))
        d_gamma = self._d1_at(lam) + d2 + linear
        d_plain = d_gamma if self.smoothing is None else self._d1_plain(lam) + d2 + linear
        x = PrimalPoint(state.u_bar, state.v_bar)
        return IterationRecord(
            k=k,
            eta=info.eta,
            f_avg=_objective(spec, x),
            feas=_gap(spec, x),
            d_gamma=d_gamma,
            d_plain=d_plain,
            lemma_ok=info.lemma_ok,
            linesearch_evals=info.evals,
            tie_count=info.tie_count,
        )

    def run(self) -> RunResult:
        cfg = self.config
        state = self.initial_state()
        trace = []
        history = []
        last = None
        d0 = self.d_gamma(state.lam)
        f_star = cfg.f_star
        spec = self.spec
        start = 0
        if self._fast_path_ok() and cfg.max_iter > 1:
            start = cfg.max_iter - 1
            self.advance_compiled(state, start)
        for k in range(start, cfg.max_iter):
            info = self.step(state, check_lemma=cfg.trace)
            if cfg.keep_history:
                history.append(info)
            want_record = cfg.trace or k == cfg.max_iter - 1
            if f_star is not None and not want_record:
                x = PrimalPoint(state.u_bar, state.v_bar)
                if abs(_objective(spec, x) - f_star) <= cfg.epsilon and _gap(spec, x) <= cfg.epsilon:
                    want_record = True
            if want_record:
                last = self.record(k, state, info)
                if cfg.trace:
                    trace.append(last)
                if f_star is not None and abs(last.f_avg - f_star) <= cfg.epsilon and last.feas <= cfg.epsilon:
                    log.debug("epsilon-solution reached at k=%d", k)
                    break
        final = PrimalPoint(state.u_bar.copy(), state.v_bar.copy(), valid=state.k > 0)
        return RunResult(
            trace=trace,
            final=final,
            final_dual=state.lam.copy(),
            config=cfg,
            spec=spec,
            smoothing=self.smoothing,
            lipschitz=self.lipschitz,
            d_gamma_initial=d0,
            history=history,
            last=last,
        )


def _objective(spec, x):
    tol = MEMBERSHIP_TOL
    if (x.v < spec.V.lower - tol).any() or (x.v > spec.V.upper + tol).any():
        return math.inf
    return spec.g.value(x.u)


def _gap(spec, x):
    r = spec.A.dot(x.u) + spec.B.dot(x.v) - spec.c
    return math.sqrt(float(r.dot(r)))


def step_ama(state: SolverState, solver: AMASolver):
    """One iteration of the non-accelerated method; returns ``(state, record)``."""
    if solver.config.accelerated:
        raise ValidationError("solver is configured for the accelerated variant")
    k = state.k
    info = solver.step(state)
    return state, solver.record(k, state, info)


def step_ama_accel(state: SolverState, solver: AMASolver):
    """One iteration of the accelerated method; returns ``(state, record)``."""
    if not solver.config.accelerated:
        raise ValidationError("solver is configured for the non-accelerated variant")
    k = state.k
    info = solver.step(state)
    return state, solver.record(k, state, info)


def run(spec: ProblemSpec, config: SolverConfig) -> RunResult:
    """Solve ``spec``; optionally exchanges the two sides first (see :func:`swap_sides`)."""
    spec = validate(spec)
    if config.swap_sides and not config.strongly_convex and spec.V.is_bounded and spec.U.is_bounded:
        d_u = prox_diameter(spec.U, _default_center(spec.U))
        d_v = prox_diameter(spec.V, _default_center(spec.V))
        if d_v < d_u:
            swapped = swap_sides(spec)
            res = AMASolver(swapped, replace(config, center=None, lambda0=config.lambda0)).run()
            res.final = PrimalPoint(res.final.v, res.final.u, res.final.valid)
            res.swapped = True
            return res
    return AMASolver(spec, config).run()
