import json

import numpy as np
import pytest

from pdama import AMASolver, SolverConfig
from pdama import operators as ops
from pdama.bench import (
    MAX_DESK,
    InstanceRecipe,
    SeededStream,
    dual_gap_at_oracle,
    generate,
    oracle_solve,
    run_experiment,
)
from pdama.errors import TooLarge, ValidationError
from pdama.model import reformulate_qp

from conftest import scalar_spec, seeded_recipes
from oracles import grid_qp


def test_stream_box_muller():
    # the normal variate is a fixed function of two consecutive uniforms
    raw = np.random.Generator(np.random.PCG64(42))
    u1, u2 = raw.random(), raw.random()
    expected = np.sqrt(-2 * np.log(1 - u1)) * np.cos(2 * np.pi * u2)
    assert SeededStream(42).normal() == expected


def test_stream_order():
    recipe = InstanceRecipe(seed=3, n=2, p1=2, strongly_convex=False)
    inst = generate(recipe)
    rs = SeededStream(3)
    A = rs.normals(4).reshape(2, 2)
    anchor = rs.normals(2)
    u1 = rs.uniforms(2, open_interval=True)
    u2 = rs.uniforms(2, open_interval=True)
    D = rs.uniforms(2)
    pick = rs.uniforms(2)
    q = rs.normals(2)
    assert np.array_equal(inst.A, A) and np.array_equal(inst.anchor, anchor)
    assert np.array_equal(inst.a, A @ anchor - u1) and np.array_equal(inst.b, A @ anchor + u2)
    zero = pick < 0.5
    if not zero.any():
        zero[np.argmin(pick)] = True
    assert np.array_equal(inst.D, np.where(zero, 0.0, D))
    assert np.array_equal(inst.q, q)
    assert inst.r == np.max(np.abs(anchor))


@pytest.mark.parametrize("recipe", seeded_recipes(False) + seeded_recipes(True))
def test_generator_guarantees(recipe):
    inst = generate(recipe)
    Ax = inst.A @ inst.anchor
    assert np.all(inst.a < Ax) and np.all(Ax < inst.b)
    if recipe.strongly_convex:
        assert inst.D.min() >= 0.1 and inst.r is None
    else:
        assert (inst.D == 0).any()
        assert np.max(np.abs(inst.anchor)) <= inst.r
    again = generate(recipe)
    for name in ("D", "q", "A", "a", "b", "anchor"):
        assert getattr(inst, name).tobytes() == getattr(again, name).tobytes()


def test_scalar_oracle():
    ref = oracle_solve(scalar_spec())
    assert ref.f_star == pytest.approx(0.125)
    assert ref.x_star.u[0] == pytest.approx(0.5) and ref.x_star.v[0] == pytest.approx(0.5)
    assert ref.lambda_star[0] == pytest.approx(-0.5)
    assert ref.kkt_residual <= 1e-10


def test_interior_oracle():
    spec = reformulate_qp([1.0, 2.0], [0.3, -0.4], [[1.0, 0.5], [0.0, 1.0]], [-10.0, -10.0], [10.0, 10.0])
    ref = oracle_solve(spec)
    assert np.allclose(ref.x_star.u, [0.3, -0.2])
    assert np.allclose(ref.lambda_star, 0.0, atol=1e-12)
    assert ref.active_set == ()


def test_degenerate_tie_unique_value():
    # zero objective on the whole feasible set: many optimal active sets
    spec = reformulate_qp([0.0], [0.0], [[1.0]], [-1.0], [1.0], r=1.0)
    ref = oracle_solve(spec)
    assert ref.f_star == 0.0


@pytest.mark.parametrize("recipe", seeded_recipes(False) + seeded_recipes(True))
def test_oracle_self_consistency(recipe):
    spec = generate(recipe).to_spec()
    ref = oracle_solve(spec)
    assert ref.kkt_residual <= 1e-10
    assert spec.U.contains(ref.x_star.u, tol=1e-10) and spec.V.contains(ref.x_star.v, tol=1e-10)
    assert abs(dual_gap_at_oracle(spec, ref)) <= 1e-8
    assert ops.dual_value(spec, ref.lambda_star) == pytest.approx(ref.f_star, abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n, p1", [(1, 1), (1, 2), (2, 1)])
def test_oracle_matches_grid(seed, n, p1):
    inst = generate(InstanceRecipe(seed=seed, n=n, p1=p1, strongly_convex=False))
    ref = oracle_solve(inst.to_spec())
    g = grid_qp(inst.D, inst.q, inst.A, inst.a, inst.b, inst.r)
    assert g >= ref.f_star - 1e-9
    assert g - ref.f_star <= 1e-2


def test_oracle_too_large():
    recipe = InstanceRecipe(seed=0, n=7, p1=6)
    assert not recipe.oracle_eligible
    with pytest.raises(TooLarge):
        oracle_solve(generate(recipe).to_spec())
    with pytest.raises(TooLarge):
        run_experiment(recipe)


def test_recipe_validation():
    with pytest.raises(ValidationError):
        InstanceRecipe(seed=0, n=0, p1=1)
    assert MAX_DESK == 12


def test_experiment_strongly_convex():
    report = run_experiment(InstanceRecipe(seed=1, n=3, p1=2), max_iter=1000, momentum_modes=("classic",))
    assert report["passed"]
    kinds = {v["bound"] for v in report["variants"].values()}
    assert kinds == {"strong", "strong_accel"}
    json.dumps(report)


def test_epsilon_solution_within_prediction():
    recipe = InstanceRecipe(seed=1, n=3, p1=2, strongly_convex=False)
    report = run_experiment(recipe, variants=("ama",), max_iter=50)
    predicted = report["variants"]["ama/smoothed"]["predicted_iterations"]
    spec = generate(recipe).to_spec()
    res = AMASolver(spec, SolverConfig(epsilon=1e-2, max_iter=predicted + 1, trace=False)).run()
    f_star = report["oracle"]["f_star"]
    assert abs(res.last.f_avg - f_star) <= 1e-2 and res.last.feas <= 1e-2


def test_experiment_deterministic():
    recipe = InstanceRecipe(seed=4, n=2, p1=2)
    a = json.dumps(run_experiment(recipe, max_iter=200), sort_keys=True)
    b = json.dumps(run_experiment(recipe, max_iter=200), sort_keys=True)
    assert a == b
