import numpy as np
import pytest

from sipsolve.errors import InputError
from sipsolve.qp import solve_qp
from sipsolve.regression import assemble_loss


def test_instance_r_oracle(spec_r):
    loss = assemble_loss(spec_r)
    res = solve_qp(loss.Q, loss.c, [[0.0, -1.0]], [0.0], d=loss.d)
    ridge = spec_r.ridge
    w0 = 1.0 / (2.0 + ridge)
    assert res.x == pytest.approx([w0, 0.0], abs=1e-10)
    assert res.objective == pytest.approx((w0 - 1) ** 2 + w0**2 + ridge * w0**2)
    assert res.active == (0,)


def test_unconstrained_interior():
    Q = np.array([[1.0, 0.0], [0.0, 2.0]])
    c = np.array([-2.0, -4.0])
    res = solve_qp(Q, c, [[1.0, 0.0], [0.0, 1.0]], [5.0, 5.0])
    assert res.x == pytest.approx([1.0, 1.0])
    assert res.active == ()


def test_kkt_conditions_on_random_instances():
    rng = np.random.default_rng(9)
    for _ in range(40):
        n = int(rng.integers(1, 4))
        M = rng.normal(size=(n, n))
        Q = M.T @ M + 0.5 * np.eye(n)
        c = rng.normal(size=n)
        m = int(rng.integers(1, 6))
        G = rng.normal(size=(m, n))
        h = rng.uniform(0.1, 2.0, m)  # keeps w = 0 feasible
        res = solve_qp(Q, c, G, h)
        assert np.all(G @ res.x <= h + 1e-7)
        grad = (Q + Q.T) @ res.x + c
        if res.active:
            Ga = G[list(res.active)]
            lam, *_ = np.linalg.lstsq(Ga.T, -grad, rcond=None)
            assert np.all(lam >= -1e-6)
            assert np.max(np.abs(Ga.T @ lam + grad)) <= 1e-6
        else:
            assert np.max(np.abs(grad)) <= 1e-7


def test_matches_fine_grid():
    Q = np.array([[1.0, 0.2], [0.2, 1.5]])
    c = np.array([0.5, -1.0])
    G = np.array([[1.0, 1.0], [-1.0, 0.5]])
    h = np.array([0.5, 0.8])
    res = solve_qp(Q, c, G, h)
    xs = np.linspace(-2, 2, 301)
    best = np.inf
    for a in xs:
        for b in xs:
            w = np.array([a, b])
            if np.all(G @ w <= h):
                best = min(best, float(w @ Q @ w + c @ w))
    assert res.objective <= best + 1e-6


def test_rejects_infeasible_start():
    with pytest.raises(InputError):
        solve_qp([[1.0]], [0.0], [[1.0]], [-1.0])
