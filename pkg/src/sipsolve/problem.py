"""Problem model: box domains, convex objectives, constraint families and
assembled semi-infinite program instances.

All objects are immutable after construction and their oracles are expected to
be pure, so instances can be shared freely between workers.  Lipschitz
constants are caller-supplied metadata; they are trusted, never estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError

# Absolute slack used whenever "g <= -eps" has to be decided in floating point.
FEASTOL = 1e-10


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a read-only 1-D float64 vector, optionally checking length."""
    p = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if p.ndim != 1:
        raise InputError(f"expected a vector, got array of shape {p.shape}")
    if dim is not None and p.size != dim:
        raise InputError(f"dimension mismatch: expected {dim}, got {p.size}")
    p.setflags(write=False)
    return p


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with the max-metric."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper, dim=lo.size)
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise InputError("box bounds must be finite")
        if np.any(lo > hi):
            raise InputError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def diameter(self) -> float:
        """Max-norm diameter."""
        return float(np.max(self.widths)) if self.dim else 0.0

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 1e-9) -> bool:
        p = as_point(x, dim=self.dim)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(as_point(x, dim=self.dim), self.lower, self.upper)

    def grid(self, resolution: float, max_points: int | None = None) -> np.ndarray:
        """Uniform grid including all box corners, spacing <= resolution per
        axis.  Returns an (N, dim) array in lexicographic axis order."""
        if resolution <= 0:
            raise InputError("grid resolution must be positive")
        axes = []
        for j in range(self.dim):
            w = float(self.widths[j])
            n = max(2, int(np.ceil(w / resolution)) + 1) if w > 0 else 1
            axes.append(np.linspace(self.lower[j], self.upper[j], n))
        total = int(np.prod([len(a) for a in axes]))
        if max_points is not None and total > max_points:
            raise InputError(
                f"grid would hold {total} points, exceeding cap {max_points}"
            )
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class ConvexObjective:
    """Convex objective given by value/subgradient oracles.

    ``lipschitz_constant`` is a Lipschitz constant with respect to the
    max-norm on the decision box (so ``|f(a)-f(b)| <= L* ||a-b||_inf``);
    drivers need it only for the a-priori termination index.
    ``strictly_convex`` is a declared contract, never checked at runtime.
    """

    value: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_constant: float | None = None
    strictly_convex: bool = False

    def __post_init__(self):
        if self.lipschitz_constant is not None and self.lipschitz_constant <= 0:
            raise InputError("objective Lipschitz constant must be positive")


@dataclass(frozen=True)
class ConstraintFamily:
    """One family g_i(x, y) of constraints indexed by y in a box.

    ``lipschitz_in_y`` bounds |g(x,a) - g(x,b)| / ||a-b||_inf uniformly over
    the decision box; it is what makes certified index-set maximization
    possible.  A value of 0 declares the family constant in y.
    ``lipschitz_in_y_at``, when given, returns a Lipschitz constant of
    y -> g(x, y) for one concrete x; structured families derive it from
    polynomial coefficient bounds and it sharpens certificates a lot when
    the uniform constant is loose at the query point.
    ``batch_eval``, when given, evaluates g(x, y) for a whole (N, q) array of
    index points at once and is used to speed up dense grid scans.
    ``custom_maximizer`` may replace the built-in certified maximizer; it must
    honor the same certificate contract (see lower_level.certified_max).
    """

    index: int
    value: Callable[[np.ndarray, np.ndarray], float]
    subgradient_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz_in_y: float
    y_domain: BoxDomain
    batch_eval: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    custom_maximizer: Callable | None = None
    lipschitz_in_y_at: Callable[[np.ndarray], float] | None = None

    def local_lipschitz_in_y(self, x: np.ndarray) -> float:
        if self.lipschitz_in_y_at is None:
            return self.lipschitz_in_y
        return min(self.lipschitz_in_y, max(0.0, float(self.lipschitz_in_y_at(x))))

    def __post_init__(self):
        if self.lipschitz_in_y < 0 or not np.isfinite(self.lipschitz_in_y):
            raise InputError("lipschitz_in_y must be finite and nonnegative")

    def eval_grid(self, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Evaluate g(x, y) for every row y of ``ys``."""
        if self.batch_eval is not None:
            return np.asarray(self.batch_eval(x, ys), dtype=float).reshape(len(ys))
        return np.array([self.value(x, y) for y in ys], dtype=float)


@dataclass(frozen=True)
class SipProblem:
    """A convex semi-infinite program min f(x) s.t. g_i(x,y) <= 0 on Y."""

    x_domain: BoxDomain
    y_domain: BoxDomain
    objective: ConvexObjective
    constraints: tuple[ConstraintFamily, ...]
    slater_point: np.ndarray | None = None

    def __post_init__(self):
        if not self.constraints:
            raise InputError("a SipProblem needs at least one constraint family")
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for fam in self.constraints:
            if fam.y_domain.dim != self.y_domain.dim or not (
                np.array_equal(fam.y_domain.lower, self.y_domain.lower)
                and np.array_equal(fam.y_domain.upper, self.y_domain.upper)
            ):
                raise InputError(
                    f"constraint family {fam.index} carries a different y-domain"
                )
        if self.slater_point is not None:
            sp = as_point(self.slater_point, dim=self.x_domain.dim)
            if not self.x_domain.contains(sp):
                raise InputError("slater_point lies outside the decision box")
            object.__setattr__(self, "slater_point", sp)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(f.index for f in self.constraints)

    def max_lipschitz_in_y(self) -> float:
        return max(f.lipschitz_in_y for f in self.constraints)


@dataclass(frozen=True)
class RegularityBundle:
    """Strict-feasibility margin eps_star (some F_{-eps_star} is nonempty)
    plus a max-norm Lipschitz constant of the objective."""

    eps_star: float
    lipschitz_f: float

    def __post_init__(self):
        if self.eps_star <= 0:
            raise InputError("eps_star must be positive")
        if self.lipschitz_f <= 0:
            raise InputError("lipschitz_f must be positive")


def feasibility_margin(problem: SipProblem, x, grid_resolution: float) -> float:
    """Dense-grid estimate of the worst constraint value at x.

    Returns max over families and grid points of g_i(x, y).  The true
    supremum exceeds the returned value by at most
    max_i lipschitz_in_y * grid_resolution.
    """
    p = as_point(x, dim=problem.x_domain.dim)
    if grid_resolution <= 0:
        raise InputError("grid_resolution must be positive")
    ys = problem.y_domain.grid(grid_resolution)
    return float(max(np.max(fam.eval_grid(p, ys)) for fam in problem.constraints))


def default_margin_resolution(problem: SipProblem, max_points: int = 100_000) -> float:
    """Finest grid resolution whose full grid stays under ``max_points``."""
    q = problem.y_domain.dim
    width = max(float(np.max(problem.y_domain.widths)), 1e-12)
    per_axis = max(2, int(max_points ** (1.0 / q)))
    return max(width / (per_axis - 1), 1e-6)


def derive_eps_star(problem: SipProblem, oracle_tol: float) -> RegularityBundle:
    """Turn a Slater point into a usable strict-feasibility margin.

    eps_star is the (certified) distance of the Slater point from the
    constraint boundary, shaved by oracle_tol; by construction the Slater
    point lies in F_{-eps_star}(Y).
    """
    from .lower_level import certified_max  # local import to avoid a cycle

    if problem.slater_point is None:
        raise InputError("derive_eps_star requires a slater_point")
    if oracle_tol <= 0:
        raise InputError("oracle_tol must be positive")
    bound = -np.inf
    for fam in problem.constraints:
        cm = certified_max(fam, problem.slater_point, oracle_tol)
        bound = max(bound, cm.value + cm.gap)
    eps_star = -bound - oracle_tol
    if eps_star <= 0:
        raise InputError(
            "no strict feasibility evidence: certified constraint bound "
            f"{bound:.3e} at the slater point is not safely negative"
        )
    lip = problem.objective.lipschitz_constant
    if lip is None:
        raise InputError(
            "objective carries no Lipschitz constant; cannot build a "
            "regularity bundle"
        )
    return RegularityBundle(eps_star=eps_star, lipschitz_f=lip)


@dataclass
class OracleCheckReport:
    """Outcome of the sampled oracle-consistency checks."""

    convexity_violation: float = 0.0
    subgradient_violation: float = 0.0
    lipschitz_violation: float = 0.0
    slater_bound: float | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_problem(
    problem: SipProblem,
    samples: int = 100,
    rel_tol: float = 1e-9,
    seed: int = 0,
) -> OracleCheckReport:
    """Spot-check oracle consistency on deterministic random samples.

    Checks, per constraint family and for the objective: the convexity
    inequality on sampled triples, the subgradient cut inequality, and the
    declared y-Lipschitz bound on sampled pairs.  When a Slater point is
    present its certificate is verified through the certified maximizer.
    Raises nothing; the report lists failures so callers decide.
    """
    from .lower_level import certified_max

    rng = np.random.default_rng(seed)
    rep = OracleCheckReport()
    X, Y = problem.x_domain, problem.y_domain

    def rand_x():
        return X.lower + rng.random(X.dim) * X.widths

    def rand_y():
        return Y.lower + rng.random(Y.dim) * Y.widths

    f = problem.objective
    for _ in range(samples):
        a, b, lam = rand_x(), rand_x(), rng.random()
        mid = lam * a + (1 - lam) * b
        scale = 1.0 + abs(f.value(a)) + abs(f.value(b))
        viol = (f.value(mid) - (lam * f.value(a) + (1 - lam) * f.value(b))) / scale
        rep.convexity_violation = max(rep.convexity_violation, viol)
        cut = f.value(a) + float(np.dot(f.subgradient(a), b - a))
        rep.subgradient_violation = max(
            rep.subgradient_violation, (cut - f.value(b)) / scale
        )
        if f.lipschitz_constant is not None:
            gap = abs(f.value(a) - f.value(b)) - f.lipschitz_constant * float(
                np.max(np.abs(a - b))
            )
            rep.lipschitz_violation = max(rep.lipschitz_violation, gap / scale)

    for fam in problem.constraints:
        for _ in range(samples):
            a, b, y, lam = rand_x(), rand_x(), rand_y(), rng.random()
            mid = lam * a + (1 - lam) * b
            scale = 1.0 + abs(fam.value(a, y)) + abs(fam.value(b, y))
            viol = (
                fam.value(mid, y)
                - (lam * fam.value(a, y) + (1 - lam) * fam.value(b, y))
            ) / scale
            rep.convexity_violation = max(rep.convexity_violation, viol)
            cut = fam.value(a, y) + float(np.dot(fam.subgradient_x(a, y), b - a))
            rep.subgradient_violation = max(
                rep.subgradient_violation, (cut - fam.value(b, y)) / scale
            )
            x, ya, yb = rand_x(), rand_y(), rand_y()
            gap = abs(fam.value(x, ya) - fam.value(x, yb)) - fam.lipschitz_in_y * float(
                np.max(np.abs(ya - yb))
            )
            rep.lipschitz_violation = max(
                rep.lipschitz_violation, gap / (1.0 + abs(fam.value(x, ya)))
            )

    if rep.convexity_violation > rel_tol:
        rep.failures.append(f"convexity violated by {rep.convexity_violation:.3e}")
    if rep.subgradient_violation > rel_tol:
        rep.failures.append(f"subgradient cut violated by {rep.subgradient_violation:.3e}")
    if rep.lipschitz_violation > rel_tol:
        rep.failures.append(f"Lipschitz bound violated by {rep.lipschitz_violation:.3e}")

    if problem.slater_point is not None:
        bound = max(
            certified_max(fam, problem.slater_point, 1e-6).value + 1e-6
            for fam in problem.constraints
        )
        rep.slater_bound = bound
        if bound >= 0:
            rep.failures.append(
                f"slater certificate failed: certified bound {bound:.3e} >= 0"
            )
    return rep
