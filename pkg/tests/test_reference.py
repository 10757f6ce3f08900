import json

import numpy as np
import pytest
import scipy.sparse as sp

from dasvrda import (
    ElasticNet,
    Squared,
    SyntheticSpec,
    compute_reference,
    full_gradient,
    generate_synthetic,
    load_reference,
    make_dataset,
    make_problem,
    objective,
    save_reference,
)
from dasvrda.reference import problem_fingerprint


def lasso_problem(l1=0.05, l2=0.0, seed=0, n=60, d=20):
    data, _ = generate_synthetic(
        SyntheticSpec(kind="lasso", n=n, d=d, sparsity=5, seed=seed)
    )
    return make_problem(data, Squared(), ElasticNet(l1, l2))


def test_reference_satisfies_first_order_optimality():
    problem = lasso_problem()
    ref = compute_reference(problem, 1e-13)
    assert ref.converged
    # At the minimizer, x = prox_eta(x - eta grad F(x)) for any eta > 0; the
    # fixed-point residual is a computable optimality certificate.
    from dasvrda.problem import prox_elastic_net

    eta = 1.0 / problem.mean_smoothness
    step = prox_elastic_net(
        ref.x - eta * full_gradient(problem, ref.x), eta, problem.reg
    )
    assert np.max(np.abs(step - ref.x)) <= 1e-7
    assert objective(problem, ref.x) == pytest.approx(ref.objective, rel=1e-15)


def test_reference_certifies_zero_solution():
    problem = lasso_problem(l1=2.0)
    g0 = np.abs(full_gradient(problem, np.zeros(problem.d))).max()
    assert g0 <= 2.0  # premise: l1 dominates the gradient at the origin
    ref = compute_reference(problem, 1e-12)
    assert ref.converged
    assert np.array_equal(ref.x, np.zeros(problem.d))
    assert ref.objective == objective(problem, np.zeros(problem.d))


def test_reference_budget_exhaustion_flagged():
    problem = lasso_problem(l1=1e-4)
    ref = compute_reference(problem, 1e-14, max_stages=99, stall_window=100)
    assert not ref.converged
    assert np.isfinite(ref.objective)


def test_reference_beats_everything_nearby():
    problem = lasso_problem(l1=0.02, l2=0.01)
    ref = compute_reference(problem, 1e-13)
    rng = np.random.default_rng(0)
    for scale in (1e-5, 1e-3):
        for _ in range(20):
            other = ref.x + scale * rng.standard_normal(problem.d)
            assert objective(problem, other) >= ref.objective - 1e-14


def test_reference_cache_round_trip(tmp_path):
    problem = lasso_problem(l1=0.03)
    path = str(tmp_path / "ref.json")
    ref = compute_reference(problem, 1e-12, cache_path=path)
    payload = load_reference(path)
    assert payload is not None
    assert payload["fingerprint"] == problem_fingerprint(problem)
    assert payload["objective"] == ref.objective
    cached = compute_reference(problem, 1e-10, cache_path=path)
    assert np.array_equal(cached.x, ref.x)
    assert cached.tolerance == 1e-12  # the cached, tighter run is reused

    # A different problem must not reuse the file.
    other = lasso_problem(l1=0.04)
    fresh = compute_reference(other, 1e-12, cache_path=str(tmp_path / "o.json"))
    assert problem_fingerprint(other) != problem_fingerprint(problem)
    assert fresh.objective != ref.objective


def test_fingerprint_sensitivity():
    data, _ = generate_synthetic(
        SyntheticSpec(kind="lasso", n=10, d=5, sparsity=3, seed=0)
    )
    base = make_problem(data, Squared(), ElasticNet(0.1, 0.0))
    same = make_problem(data, Squared(), ElasticNet(0.1, 0.0))
    assert problem_fingerprint(base) == problem_fingerprint(same)
    reg = make_problem(data, Squared(), ElasticNet(0.1, 1e-9))
    assert problem_fingerprint(base) != problem_fingerprint(reg)
    bumped = data.features.toarray()
    bumped[0, 0] += 1e-12
    other = make_problem(
        make_dataset(sp.csr_matrix(bumped), data.labels), Squared(),
        ElasticNet(0.1, 0.0),
    )
    assert problem_fingerprint(base) != problem_fingerprint(other)


def test_load_reference_rejects_garbage(tmp_path):
    missing = tmp_path / "missing.json"
    assert load_reference(str(missing)) is None
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert load_reference(str(bad)) is None
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps(["list"]))
    assert load_reference(str(wrong)) is None


def test_save_reference_is_atomic_and_readable(tmp_path):
    problem = lasso_problem(l1=0.05)
    ref = compute_reference(problem, 1e-10)
    path = tmp_path / "out.json"
    save_reference(ref, problem, str(path))
    assert path.exists()
    assert not (tmp_path / "out.json.tmp").exists()
    payload = load_reference(str(path))
    assert payload["converged"] is True
    assert np.allclose(payload["x"], ref.x)
