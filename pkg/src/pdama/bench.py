"""Seeded polytope-projection instances and an exact active-set reference solver.

Instances are ``min 1/2||Du - q||^2 s.t. a <= Au <= b, ||u||_inf <= r`` and
are solved in their slack form ``Au - v = 0``.

Random stream (PCG64 seeded with ``seed``, uniforms from ``random()``),
consumed in this order:

    1. A, row-major, standard normal
    2. anchor x, standard normal
    3. u1 then u2, open-interval uniforms (zero draws are rejected)
    4. D: p1 uniforms; strongly convex adds 0.1 to each; otherwise p1 more
       uniforms pick the zeroed entries (< 0.5), and if none is picked the
       entry with the smallest pick-uniform is zeroed
    5. q, standard normal

Each standard normal consumes two consecutive uniforms through Box-Muller
(cosine branch): ``sqrt(-2 log(1 - U1)) * cos(2 pi U2)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import certificates as cert
from . import operators as ops
from .errors import Infeasible, TooLarge, Unreachable, ValidationError
from .model import PrimalPoint, ProblemSpec, prox_diameter, reformulate_qp, spectral_norm, validate
from .solver import AMASolver, SolverConfig, _default_center

MAX_DESK = 12
SIGN_TOL = 1e-12
FEAS_TOL = 1e-10
COND_LIMIT = 1e12


class SeededStream:
    """Uniform and Box-Muller normal variates from a PCG64 generator."""

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))

    def uniform(self) -> float:
        return float(self._gen.random())

    def open_uniform(self) -> float:
        while True:
            x = self.uniform()
            if x > 0.0:
                return x

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, size: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(size)])

    def uniforms(self, size: int, open_interval=False) -> np.ndarray:
        draw = self.open_uniform if open_interval else self.uniform
        return np.array([draw() for _ in range(size)])


@dataclass(frozen=True)
class InstanceRecipe:
    seed: int
    n: int
    p1: int
    strongly_convex: bool = True
    r_policy: str | None = None  # None: "infinite" if strongly convex else "from_anchor"

    def __post_init__(self):
        if self.n < 1 or self.p1 < 1:
            raise ValidationError("n and p1 must be at least 1")
        if self.r_policy not in (None, "infinite", "from_anchor"):
            raise ValidationError("r_policy must be 'infinite' or 'from_anchor'")

    @property
    def resolved_r_policy(self) -> str:
        if self.r_policy is not None:
            return self.r_policy
        return "infinite" if self.strongly_convex else "from_anchor"

    @property
    def oracle_eligible(self) -> bool:
        return self.n + self.p1 <= MAX_DESK


@dataclass(frozen=True)
class QPInstance:
    D: np.ndarray
    q: np.ndarray
    A: np.ndarray
    a: np.ndarray
    b: np.ndarray
    r: float | None
    anchor: np.ndarray

    def to_spec(self) -> ProblemSpec:
        return reformulate_qp(self.D, self.q, self.A, self.a, self.b, self.r)

    def to_dict(self) -> dict:
        return {
            "D": self.D.tolist(),
            "q": self.q.tolist(),
            "A": self.A.tolist(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "r": self.r,
        }


def generate(recipe: InstanceRecipe) -> QPInstance:
    n, p1 = recipe.n, recipe.p1
    rs = SeededStream(recipe.seed)
    A = rs.normals(n * p1).reshape(n, p1)
    anchor = rs.normals(p1)
    u1 = rs.uniforms(n, open_interval=True)
    u2 = rs.uniforms(n, open_interval=True)
    D = rs.uniforms(p1)
    if recipe.strongly_convex:
        D = D + 0.1
    else:
        pick = rs.uniforms(p1)
        zero = pick < 0.5
        if not zero.any():
            zero[np.argmin(pick)] = True
        D = np.where(zero, 0.0, D)
    q = rs.normals(p1)
    Ax = A @ anchor
    r = None if recipe.resolved_r_policy == "infinite" else float(np.max(np.abs(anchor)))
    return QPInstance(D=D, q=q, A=A, a=Ax - u1, b=Ax + u2, r=r, anchor=anchor)


@dataclass(frozen=True)
class ReferenceSolution:
    f_star: float
    x_star: PrimalPoint
    lambda_star: np.ndarray
    active_set: tuple
    kkt_residual: float

    def to_dict(self) -> dict:
        return {
            "f_star": self.f_star,
            "u_star": self.x_star.u.tolist(),
            "v_star": self.x_star.v.tolist(),
            "lambda_star": self.lambda_star.tolist(),
            "active_set": list(self.active_set),
            "kkt_residual": self.kkt_residual,
        }


def _check_oracle_shape(spec: ProblemSpec):
    if spec.p1 + spec.n > MAX_DESK:
        raise TooLarge(f"p1 + n = {spec.p1 + spec.n} exceeds the desk-scale limit {MAX_DESK}")
    if spec.B.shape != (spec.n, spec.n) or not np.array_equal(spec.B, -np.eye(spec.n)):
        raise ValidationError("oracle needs the slack form with B = -I")


def oracle_solve(spec: ProblemSpec) -> ReferenceSolution:
    """Exact solution by enumerating every active set of the box bounds.

    Variable ``j`` of ``x = (u, v)`` owns inequality ``2j`` (lower bound)
    and ``2j + 1`` (upper bound); only finite bounds are enumerated. Each
    candidate solves the equality-constrained KKT system with the active
    variables fixed; rank-deficient systems are skipped. Among accepted
    candidates the least objective wins, ties going to the
    lexicographically smallest active set.
    """
    _check_oracle_shape(spec)
    spec = validate(spec)
    p1, n = spec.p1, spec.n
    m = p1 + n
    lower = np.concatenate([spec.U.lower, spec.V.lower])
    upper = np.concatenate([spec.U.upper, spec.V.upper])
    M = np.hstack([spec.A, spec.B])
    d, q = spec.g.diag, spec.g.shift
    H = np.zeros(m)
    H[:p1] = d * d
    lin = np.zeros(m)
    lin[:p1] = d * q
    choices = []
    for j in range(m):
        opts = [0]
        if np.isfinite(lower[j]):
            opts.append(-1)
        if np.isfinite(upper[j]):
            opts.append(1)
        choices.append(opts)

    best = None
    for state in itertools.product(*choices):
        st = np.array(state)
        free = st == 0
        nf = int(free.sum())
        if nf < n:
            continue
        x = np.where(st < 0, lower, np.where(st > 0, upper, 0.0))
        Mf = M[:, free]
        rhs_eq = spec.c - M[:, ~free] @ x[~free]
        K = np.zeros((nf + n, nf + n))
        K[:nf, :nf] = np.diag(H[free])
        K[:nf, nf:] = -Mf.T
        K[nf:, :nf] = Mf
        if np.linalg.cond(K) > COND_LIMIT:
            continue
        sol = np.linalg.solve(K, np.concatenate([lin[free], rhs_eq]))
        x[free] = sol[:nf]
        lam = sol[nf:]
        if np.any(x < lower - FEAS_TOL) or np.any(x > upper + FEAS_TOL):
            continue
        # stationarity: H x - lin - M^T lam + sign * mu = 0 on fixed coordinates
        grad = H * x - lin - M.T @ lam
        mu = np.where(st > 0, -grad, np.where(st < 0, grad, 0.0))
        if np.any(mu < -SIGN_TOL):
            continue
        fval = 0.5 * float(np.sum((d * x[:p1] - q) ** 2))
        active = tuple(int(2 * j + (1 if st[j] > 0 else 0)) for j in range(m) if st[j] != 0)
        cand = (fval, active, x.copy(), lam.copy(), mu)
        if best is None or fval < best[0] - 1e-12 * (1 + abs(fval)) or (
            abs(fval - best[0]) <= 1e-12 * (1 + abs(fval)) and active < best[1]
        ):
            best = cand
    if best is None:
        raise Infeasible("no active set satisfies the KKT conditions")
    fval, active, x, lam, mu = best
    st = np.zeros(m)
    for idx in active:
        st[idx // 2] = 1 if idx % 2 else -1
    grad = H * x - lin - M.T @ lam + st * mu
    kkt = max(float(np.max(np.abs(grad))), float(np.max(np.abs(M @ x - spec.c))))
    return ReferenceSolution(
        f_star=fval,
        x_star=PrimalPoint(x[:p1], x[p1:]),
        lambda_star=lam,
        active_set=active,
        kkt_residual=kkt,
    )


def certificate_inputs(spec: ProblemSpec, ref: ReferenceSolution, config: SolverConfig, smoothing=None, norm_A=None):
    norm_A = spectral_norm(spec.A) if norm_A is None else norm_A
    lam0 = np.zeros(spec.n) if config.lambda0 is None else np.asarray(config.lambda0, float)
    if smoothing is not None:
        d_u, gamma = smoothing.d_u, smoothing.gamma
    elif spec.U.is_bounded:
        d_u, gamma = prox_diameter(spec.U, _default_center(spec.U)), 1.0
    else:
        d_u, gamma = math.inf, 1.0
    return cert.CertificateInputs(
        f_star=ref.f_star,
        lambda_star=ref.lambda_star,
        lambda0=lam0,
        d_u=d_u,
        norm_A=norm_A,
        gamma=gamma,
        mu_g=spec.g.mu,
        line_search=config.step_policy == "line_search",
    )


def first_epsilon_k(trace, f_star: float, epsilon: float):
    for rec in trace:
        if abs(rec.f_avg - f_star) <= epsilon and rec.feas <= epsilon:
            return rec.k
    return None


def _variant_configs(recipe: InstanceRecipe, variants, momentum_modes, base: dict):
    out = []
    for variant in variants:
        modes = momentum_modes if variant == "ama_accel" else ("extrapolated",)
        for mode in modes:
            cfg = SolverConfig(variant=variant, strongly_convex=recipe.strongly_convex, momentum_mode=mode, **base)
            name = cfg.label + (f"/{mode}" if variant == "ama_accel" else "")
            out.append((name, cfg))
    return out


def run_experiment(
    recipe: InstanceRecipe,
    variants=("ama", "ama_accel"),
    epsilon: float = 1e-2,
    max_iter: int = 2000,
    step_policy: str = "fixed",
    momentum_modes=("extrapolated", "classic"),
    series_every: int = 1,
) -> dict:
    """Generate, oracle-solve, run each variant and certify its trace.

    Returns a JSON-ready report: recipe echo, oracle solution, one verdict
    per variant (with predicted and actual epsilon-solution iteration
    counts), and empirical-vs-bound series.
    """
    if not recipe.oracle_eligible:
        raise TooLarge(f"n + p1 = {recipe.n + recipe.p1} exceeds {MAX_DESK}")
    inst = generate(recipe)
    spec = validate(inst.to_spec())
    ref = oracle_solve(spec)
    norm_A = spectral_norm(spec.A)
    base = dict(epsilon=epsilon, max_iter=max_iter, step_policy=step_policy)
    results = {}
    all_pass = True
    for name, cfg in _variant_configs(recipe, variants, momentum_modes, base):
        solver = AMASolver(spec, cfg, norm_A=norm_A)
        res = solver.run()
        kind = cert.bound_kind(cfg.variant, cfg.strongly_convex)
        inp = certificate_inputs(spec, ref, cfg, res.smoothing, norm_A)
        report = cert.check_trace(res.trace, inp, kind)
        try:
            predicted = cert.predict_iterations(kind, epsilon, inp)
        except Unreachable:
            predicted = None
        series = [
            {
                "k": rec.k,
                "obj_resid": abs(rec.f_avg - ref.f_star),
                "obj_bound": cert.bound(kind, rec.k, inp).obj_bound,
                "feas": rec.feas,
                "feas_bound": cert.bound(kind, rec.k, inp).feas_bound,
            }
            for rec in res.trace
            if rec.k % series_every == 0 or rec.k == res.trace[-1].k
        ]
        all_pass &= report.passed
        results[name] = {
            "bound": kind,
            "momentum_mode": cfg.momentum_mode if cfg.accelerated else None,
            "gamma": None if res.smoothing is None else res.smoothing.gamma,
            "verdict": report.to_dict(),
            "predicted_iterations": predicted,
            "actual_iterations": first_epsilon_k(res.trace, ref.f_star, epsilon),
            "final_objective": res.trace[-1].f_avg if res.trace else None,
            "final_feasibility": res.trace[-1].feas if res.trace else None,
            "series": series,
        }
    return {
        "recipe": asdict(recipe) | {"r_policy": recipe.resolved_r_policy},
        "instance": inst.to_dict(),
        "oracle": ref.to_dict(),
        "epsilon": epsilon,
        "max_iter": max_iter,
        "step_policy": step_policy,
        "variants": results,
        "passed": bool(all_pass),
    }


def dual_gap_at_oracle(spec: ProblemSpec, ref: ReferenceSolution) -> float:
    """``f* - d(lambda*)``; zero under strong duality."""
    return ref.f_star - ops.dual_value(spec, ref.lambda_star)
