"""Small dense active-set solver for strictly convex quadratic programs.

    min  w.Q w + c.w + d   s.t.  G w <= h

Primal active-set with equality-constrained KKT subproblems; Q must be
positive definite.  Problem sizes here are a handful of variables against up
to a few thousand rows, which a dense KKT solve handles comfortably.  Used
as an independent reference for the cutting-plane route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

_TOL = 1e-10


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    active: tuple[int, ...]
    iterations: int


def solve_qp(Q, c, G, h, x0=None, max_iters: int = 500, d: float = 0.0) -> QpResult:
    """Solve min w.Q w + c.w + d s.t. G w <= h from a feasible start.

    ``x0`` defaults to the zero vector and must satisfy G x0 <= h.  Ties in
    the blocking-constraint and multiplier choices break toward the smallest
    row index, so the path is deterministic.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    G = np.asarray(G, dtype=float).reshape(-1, n)
    h = np.asarray(h, dtype=float).ravel()
    if G.shape[0] != h.size:
        raise InputError("G/h row mismatch")
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    if np.any(G @ x > h + 1e-8):
        raise InputError("starting point is infeasible")
    H = Q + Q.T  # gradient of w.Qw is (Q + Q.T) w

    active: list[int] = [
        int(i) for i in np.flatnonzero(np.abs(G @ x - h) <= _TOL)
    ]

    def kkt_step(act: list[int]) -> tuple[np.ndarray, np.ndarray]:
        """Minimizer over the affine set {G_act w = h_act} and multipliers."""
        na = len(act)
        K = np.zeros((n + na, n + na))
        K[:n, :n] = H
        if na:
            Ga = G[act]
            K[:n, n:] = Ga.T
            K[n:, :n] = Ga
        rhs = np.concatenate([-c, h[act]]) if na else -c
        sol = np.linalg.solve(K, rhs) if na else np.linalg.solve(H, rhs)
        return sol[:n], sol[n:]

    for it in range(1, max_iters + 1):
        w_eq, lam = kkt_step(active)
        step = w_eq - x
        if np.max(np.abs(step)) <= _TOL * (1.0 + np.max(np.abs(x))):
            # stationary on the active set: check multiplier signs
            if len(active) == 0 or np.all(lam >= -_TOL):
                obj = float(x @ Q @ x + c @ x + d)
                return QpResult(x, obj, tuple(sorted(active)), it)
            drop_pos = int(np.argmin(lam))
            active.pop(drop_pos)
            continue
        # longest feasible step toward the equality minimizer
        alpha, blocker = 1.0, -1
        Gx = G @ x
        Gs = G @ step
        for i in range(G.shape[0]):
            if i in active or Gs[i] <= _TOL:
                continue
            a_i = (h[i] - Gx[i]) / Gs[i]
            if a_i < alpha - _TOL or (a_i < alpha + _TOL and (blocker < 0 or i < blocker)):
                alpha, blocker = min(a_i, 1.0), i
        x = x + alpha * step
        if blocker >= 0 and alpha < 1.0 - _TOL:
            active.append(blocker)
            active.sort()
    raise InputError(f"active-set QP did not converge within {max_iters} iterations")
