import math

import numpy as np
import pytest

from pdama import AMASolver, PrimalPoint, SolverConfig, make_smoothing, run
from pdama import certificates as cert
from pdama import operators as ops
from pdama.bench import oracle_solve
from pdama.errors import StepTooSmall, ValidationError
from pdama.solver import auto_gamma, step_ama, step_ama_accel, swap_sides

from conftest import scalar_spec, seeded_specs

GOLDEN = (1 + math.sqrt(5)) / 2


def _cfg(**kw):
    kw.setdefault("max_iter", 100)
    return SolverConfig(**kw)


def test_first_average_equals_first_point(box_spec):
    solver = AMASolver(box_spec, _cfg())
    state = solver.initial_state()
    info = solver.step(state)
    assert info.weight / state.s_weight == 1.0
    assert np.array_equal(state.u_bar, info.u_tilde)
    assert np.array_equal(state.v_bar, info.v_tilde)


def test_fixed_step_size(box_spec):
    cfg = _cfg(epsilon=1e-2, max_iter=20)
    res = run(box_spec, cfg)
    sm = res.smoothing
    assert sm.gamma == auto_gamma("ama", 1e-2, sm.d_u) == 1e-2 / (2 * sm.d_u)
    expected = sm.gamma * sm.mu_p / sm.norm_A**2
    assert all(r.eta == pytest.approx(expected, rel=1e-14) for r in res.trace)


def test_auto_gamma_accelerated(box_spec):
    res = run(box_spec, _cfg(variant="ama_accel", epsilon=1e-2, max_iter=1))
    assert res.smoothing.gamma == 1e-2 / res.smoothing.d_u


def test_scalar_instance_feasibility_bound():
    # r = 1 bounds U for smoothing; the optimum u* = 0.5 is unchanged
    spec = scalar_spec(r=1.0)
    ref = oracle_solve(spec)
    assert ref.f_star == pytest.approx(0.125)
    cfg = _cfg(epsilon=1e-2, max_iter=201)
    res = run(spec, cfg)
    inp = cert.CertificateInputs(
        f_star=ref.f_star, lambda_star=ref.lambda_star, lambda0=np.zeros(1), d_u=res.smoothing.d_u,
        norm_A=res.smoothing.norm_A, gamma=res.smoothing.gamma,
    )
    assert res.trace[200].feas <= cert.bound_smoothed(200, inp).feas_bound


def test_momentum_scalars(box_spec):
    solver = AMASolver(box_spec, _cfg(variant="ama_accel"))
    state = solver.initial_state()
    assert state.t == 1.0
    info = solver.step(state)
    assert state.t == pytest.approx(GOLDEN, rel=1e-15)
    assert np.array_equal(state.lam_hat, info.lam_next)


def test_t_bracket():
    t = 1.0
    for k in range(10_001):
        assert (k + 1) / 2 <= t <= k + 1
        t = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def test_line_search_at_lipschitz_passes_first_trial(box_spec):
    probe = AMASolver(box_spec, _cfg())
    L = probe.lipschitz
    res = run(box_spec, _cfg(step_policy="line_search", lower_L=L, max_iter=50))
    assert all(r.linesearch_evals == 1 for r in res.trace)
    assert all(r.eta == pytest.approx(1 / L) for r in res.trace)


@pytest.mark.parametrize("variant", ["ama", "ama_accel"])
def test_line_search_overshoot(box_spec, variant):
    probe = AMASolver(box_spec, _cfg(variant=variant))
    L = probe.lipschitz
    res = run(box_spec, _cfg(variant=variant, step_policy="line_search", lower_L=L / 8, max_iter=200))
    assert all(1.0 / r.eta <= 2 * L * (1 + 1e-12) for r in res.trace)
    assert all(r.lemma_ok for r in res.trace)
    if variant == "ama_accel":
        etas = [r.eta for r in res.trace]
        assert all(b <= a for a, b in zip(etas, etas[1:]))


def test_line_search_fixed_point():
    # q = 0, centered prox, 0 inside V: lam = 0 maps to itself
    spec = scalar_spec(D=1.0, q=0.0, lo=-1.0, hi=1.0, r=1.0)
    solver = AMASolver(spec, _cfg(step_policy="line_search", lower_L=0.01))
    lam = np.zeros(1)
    u = solver._u(lam)[0]
    eta, L, evals, v_hat, lam_next, ok = solver.line_search_eta(lam, u, None)
    assert (L, evals) == (0.01, 1)
    assert np.array_equal(lam_next, lam)


def test_step_too_small(box_spec):
    probe = AMASolver(box_spec, _cfg())
    with pytest.raises(StepTooSmall):
        run(box_spec, _cfg(step_policy="line_search", lower_L=probe.lipschitz * 1e-30, max_iter=3))


def test_zero_budget(box_spec):
    res = run(box_spec, _cfg(max_iter=0))
    assert res.trace == []
    assert not res.final.valid
    assert not res.final.u.any() and not res.final.v.any()


@pytest.mark.parametrize("variant, kind", [("ama", "strong"), ("ama_accel", "strong_accel")])
def test_strongly_convex_scalar_bounds(variant, kind):
    spec = scalar_spec()
    ref = oracle_solve(spec)
    res = run(spec, _cfg(variant=variant, strongly_convex=True, max_iter=1001))
    inp = cert.CertificateInputs(
        f_star=ref.f_star, lambda_star=ref.lambda_star, lambda0=np.zeros(1), d_u=math.inf, norm_A=1.0,
        gamma=1.0, mu_g=spec.g.mu,
    )
    report = cert.check_trace(res.trace, inp, kind)
    assert report.passed, report.reason


@pytest.mark.parametrize("spec", seeded_specs(False, 4))
def test_dual_ascent_monotone(spec):
    res = run(spec, _cfg(max_iter=300))
    d = [res.d_gamma_initial] + [r.d_gamma for r in res.trace]
    assert all(b >= a - 1e-10 for a, b in zip(d, d[1:]))


@pytest.mark.parametrize("variant", ["ama", "ama_accel"])
@pytest.mark.parametrize("policy", ["fixed", "line_search"])
@pytest.mark.parametrize("spec", seeded_specs(False, 3))
def test_lemma_and_forward_backward(spec, variant, policy):
    cfg = _cfg(variant=variant, step_policy=policy, max_iter=80, keep_history=True)
    solver = AMASolver(spec, cfg)
    res = solver.run()
    sm = res.smoothing
    for rec, info in zip(res.trace, res.history):
        assert rec.lemma_ok
        L = 1.0 / info.eta
        d1n = ops.d1_gamma_value(spec, sm, info.lam_next)
        assert d1n >= ops.quad_surrogate(spec, sm, info.lam_next, info.lam_hat, L) - 1e-9
        y = info.lam_hat + info.eta * (ops.grad_d1_gamma(spec, sm, info.lam_hat) + spec.c)
        fb = ops.prox_neg_d2(spec, y, info.eta)
        assert np.allclose(fb, info.lam_next, rtol=0, atol=1e-9 * (1 + np.abs(fb).max()))


@pytest.mark.parametrize("variant", ["ama", "ama_accel"])
@pytest.mark.parametrize("sc", [False, True])
def test_averaging_matches_history(variant, sc):
    spec = seeded_specs(sc, 2)[1]
    cfg = _cfg(variant=variant, strongly_convex=sc, max_iter=101, keep_history=True, step_policy="line_search")
    solver = AMASolver(spec, cfg)
    state = solver.initial_state()
    us, vs, ws = [], [], []
    for k in range(101):
        info = solver.step(state)
        us.append(info.u_tilde)
        vs.append(info.v_tilde)
        ws.append(info.weight)
        w = np.array(ws)
        assert state.s_weight == pytest.approx(w.sum(), rel=1e-13)
        assert np.allclose(state.u_bar, w @ np.array(us) / w.sum(), rtol=0, atol=1e-12)
        assert np.allclose(state.v_bar, w @ np.array(vs) / w.sum(), rtol=0, atol=1e-12)
        assert spec.U.contains(state.u_bar) and spec.V.contains(state.v_bar)


@pytest.mark.parametrize("variant", ["ama", "ama_accel"])
def test_weight_sum_lower_bounds(box_spec, variant):
    solver = AMASolver(box_spec, _cfg(variant=variant))
    sm = solver.smoothing
    L = sm.lipschitz_base
    state = solver.initial_state()
    for k in range(500):
        solver.step(state, check_lemma=False)
        if variant == "ama":
            assert state.s_weight >= sm.gamma * (k + 1) / L * (1 - 1e-12)
        else:
            assert state.s_weight >= sm.gamma * (k + 1) * (k + 2) / (4 * L) * (1 - 1e-12)


def test_v_tilde_membership(box_spec):
    solver = AMASolver(box_spec, _cfg(max_iter=200, keep_history=True))
    res = solver.run()
    V = box_spec.V
    for info in res.history:
        t = box_spec.B.T @ info.lam_next
        best = float(np.sum(np.maximum(t * V.upper, t * V.lower)))
        assert float(t @ info.v_tilde) >= best - 1e-12 * (1 + abs(best))
        free = np.abs(t) > ops.TIE_TOL
        # on tie-free coordinates v_tilde equals the subproblem output
        assert np.array_equal(info.v_tilde[free], info.v_hat[free])


@pytest.mark.parametrize("variant", ["ama", "ama_accel"])
@pytest.mark.parametrize("sc", [False, True])
def test_inline_oracles_match_operators(variant, sc):
    spec = seeded_specs(sc, 3)[2]
    solver = AMASolver(spec, _cfg(variant=variant, strongly_convex=sc, keep_history=True, max_iter=30))
    res = solver.run()
    sm = res.smoothing
    for rec, info in zip(res.trace, res.history):
        assert np.allclose(info.u_tilde, ops.u_oracle(spec, sm, info.lam_hat), atol=1e-13)
        assert np.allclose(info.v_hat, ops.v_subproblem(spec, info.lam_hat, info.u_tilde, info.eta), atol=1e-13)
        smoothed, plain = ops.dual_values(spec, sm, info.lam_next)
        assert rec.d_plain == pytest.approx(plain.total, rel=1e-12, abs=1e-12)
        assert rec.d_gamma == pytest.approx((smoothed or plain).total, rel=1e-12, abs=1e-12)
        assert rec.feas >= 0 and rec.linesearch_evals >= 1


def test_step_wrappers(box_spec):
    solver = AMASolver(box_spec, _cfg())
    state, rec = step_ama(solver.initial_state(), solver)
    assert rec.k == 0 and state.k == 1
    with pytest.raises(ValidationError):
        step_ama_accel(state, solver)
    acc = AMASolver(box_spec, _cfg(variant="ama_accel"))
    state, rec = step_ama_accel(acc.initial_state(), acc)
    assert state.t == pytest.approx(GOLDEN)


@pytest.mark.parametrize("variant", ["ama", "ama_accel"])
@pytest.mark.parametrize("mode", ["extrapolated", "classic"])
@pytest.mark.parametrize("sc", [False, True])
def test_compiled_loop_matches_numpy(variant, mode, sc):
    spec = seeded_specs(sc, 5)[4]
    traced = run(spec, _cfg(variant=variant, momentum_mode=mode, strongly_convex=sc, max_iter=400))
    lean = run(spec, _cfg(variant=variant, momentum_mode=mode, strongly_convex=sc, max_iter=400, trace=False))
    assert lean.trace == [] and lean.last.k == 399
    assert np.allclose(lean.final.u, traced.final.u, rtol=0, atol=1e-12)
    assert np.allclose(lean.final.v, traced.final.v, rtol=0, atol=1e-12)
    assert np.allclose(lean.final_dual, traced.final_dual, rtol=1e-12, atol=1e-12)
    assert lean.last.f_avg == pytest.approx(traced.trace[-1].f_avg, rel=1e-10, abs=1e-12)


def test_f_star_stopping():
    spec = scalar_spec(r=1.0)
    res = run(spec, _cfg(epsilon=1e-2, max_iter=100_000, f_star=0.125))
    assert res.iterations < 100_000
    last = res.trace[-1]
    assert abs(last.f_avg - 0.125) <= 1e-2 and last.feas <= 1e-2


def test_swap_sides_transform():
    spec = scalar_spec(D=0.0, q=0.0, lo=-0.2, hi=0.3, r=4.0)
    swapped = swap_sides(spec)
    assert np.array_equal(swapped.A, spec.B) and swapped.U == spec.V and swapped.V == spec.U
    assert swap_sides(swapped) == spec
    res = run(spec, _cfg(swap_sides=True, max_iter=50))
    assert res.swapped
    assert res.final.u.shape == (1,) and res.final.v.shape == (1,)
    with pytest.raises(ValidationError):
        swap_sides(scalar_spec(r=1.0))


def test_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(variant="admm")
    with pytest.raises(ValidationError):
        SolverConfig(momentum_mode="nesterov")
    with pytest.raises(ValidationError):
        SolverConfig(epsilon=0.0)


def test_strongly_convex_requires_positive_diag():
    spec = seeded_specs(False, 1)[0]
    with pytest.raises(ValidationError):
        run(spec, _cfg(strongly_convex=True))
