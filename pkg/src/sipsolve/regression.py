"""Shape-constrained polynomial regression assembled as a semi-infinite
program.

The model is a polynomial of bounded degree with coefficients confined to a
box; the loss is the ridge-regularized sum of squared residuals (an exact
convex quadratic in the coefficients); each shape constraint is an affine
combination of model derivatives required nonpositive on the whole input
box, which makes it affine in the coefficients with polynomial dependence on
the input.  Lipschitz data is derived analytically from the polynomial
coefficient bounds, so the certified lower-level machinery applies as-is.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .polynomials import Polynomial, PolynomialBasis, infer_basis
from .problem import BoxDomain, ConstraintFamily, ConvexObjective, SipProblem


@dataclass(frozen=True)
class ShapeConstraint:
    """sum_alpha weight[alpha] * d^alpha v(u) + offset <= 0 on all of U."""

    weights: dict[tuple[int, ...], float]
    offset: float = 0.0

    def __post_init__(self):
        if not self.weights:
            raise InputError("shape constraint needs at least one derivative weight")
        cleaned = {}
        for alpha, w in self.weights.items():
            a = tuple(int(v) for v in alpha)
            if any(v < 0 for v in a):
                raise InputError("derivative multi-indices must be nonnegative")
            cleaned[a] = float(w)
        object.__setattr__(self, "weights", cleaned)

    @property
    def order(self) -> int:
        return max(sum(a) for a in self.weights)


def monotone_increasing(dim: int = 1, axis: int = 0) -> ShapeConstraint:
    """-dv/du_axis <= 0, i.e. the model increases along an axis."""
    alpha = tuple(1 if j == axis else 0 for j in range(dim))
    return ShapeConstraint(weights={alpha: -1.0})


def convex_1d() -> ShapeConstraint:
    """-v'' <= 0 for univariate models."""
    return ShapeConstraint(weights={(2,): -1.0})


@dataclass(frozen=True)
class RegressionSpec:
    data: np.ndarray  # (N, d + 1): input columns then target
    degree: int
    coeff_box: BoxDomain
    u_domain: BoxDomain
    ridge: float = 1e-6
    shape_constraints: tuple[ShapeConstraint, ...] = ()
    slater_point: np.ndarray | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InputError("data must be a nonempty (N, d+1) array")
        if arr.shape[1] != self.u_domain.dim + 1:
            raise InputError(
                f"data rows must hold {self.u_domain.dim} inputs plus a target"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.degree < 0:
            raise InputError("degree must be nonnegative")
        if self.ridge <= 0:
            raise InputError("ridge must be positive (it certifies strict convexity)")
        object.__setattr__(
            self, "shape_constraints", tuple(self.shape_constraints)
        )
        basis = PolynomialBasis(self.u_domain.dim, self.degree)
        if self.coeff_box.dim != basis.size:
            raise InputError(
                f"coeff_box must have dimension {basis.size} for degree "
                f"{self.degree} in {self.u_domain.dim} input variables"
            )
        for sc in self.shape_constraints:
            if any(len(a) != self.u_domain.dim for a in sc.weights):
                raise InputError("shape constraint multi-index dimension mismatch")
            if sc.order > self.degree:
                raise InputError(
                    f"derivative order {sc.order} exceeds model degree {self.degree}"
                )

    @property
    def basis(self) -> PolynomialBasis:
        return PolynomialBasis(self.u_domain.dim, self.degree)

    @property
    def inputs(self) -> np.ndarray:
        return self.data[:, :-1]

    @property
    def targets(self) -> np.ndarray:
        return self.data[:, -1]


@dataclass(frozen=True)
class QuadraticForm:
    """f(w) = w.Q w + c.w + d with Q symmetric positive definite here."""

    Q: np.ndarray
    c: np.ndarray
    d: float

    def value(self, w: np.ndarray) -> float:
        return float(w @ self.Q @ w + self.c @ w + self.d)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return 2.0 * (self.Q @ w) + self.c

    def lipschitz_maxnorm(self, box: BoxDomain) -> float:
        """sup over the box of the 1-norm of the gradient."""
        m = np.maximum(np.abs(box.lower), np.abs(box.upper))
        return float(np.sum(2.0 * np.abs(self.Q) @ m + np.abs(self.c)))


def assemble_loss(spec: RegressionSpec) -> QuadraticForm:
    """Exact quadratic form of the ridge-regularized squared loss."""
    basis = spec.basis
    feats = np.stack([basis.features(u) for u in spec.inputs])
    Q = feats.T @ feats + spec.ridge * np.eye(basis.size)
    c = -2.0 * feats.T @ spec.targets
    d = float(spec.targets @ spec.targets)
    return QuadraticForm(Q=Q, c=c, d=d)


def constraint_coefficient_polys(
    spec: RegressionSpec, sc: ShapeConstraint
) -> tuple[list[Polynomial], float]:
    """Polynomials a_beta(u) with g(w, u) = sum_beta a_beta(u) w_beta + offset."""
    basis = spec.basis
    coeffs = [Polynomial.zero(spec.u_domain.dim) for _ in range(basis.size)]
    for alpha, weight in sorted(sc.weights.items()):
        _, polys = basis.derivative_weights(alpha)
        for t in range(basis.size):
            if polys[t].coeffs.any():
                scaled = polys[t].scaled(weight)
                merged = Polynomial(
                    np.vstack([coeffs[t].exponents, scaled.exponents]),
                    np.concatenate([coeffs[t].coeffs, scaled.coeffs]),
                )
                coeffs[t] = merged
    return coeffs, sc.offset


def constraint_lipschitz_in_u(
    spec: RegressionSpec, coeff_polys: list[Polynomial]
) -> float:
    """Max-metric Lipschitz bound of u -> g(w, u), uniform over the
    coefficient box, from term-wise polynomial bounds."""
    from .polynomials import affine_in_x_lipschitz

    return affine_in_x_lipschitz(coeff_polys, None, spec.coeff_box, spec.u_domain)


def _family_from_polys(
    index: int,
    coeff_polys: list[Polynomial],
    offset: float,
    u_domain: BoxDomain,
    lipschitz: float,
) -> ConstraintFamily:
    from .polynomials import affine_in_x_lipschitz_at

    def value(w, u):
        return float(
            sum(p(u) * w[t] for t, p in enumerate(coeff_polys) if p.coeffs.any())
            + offset
        )

    def subgradient_x(w, u):
        return np.array([p(u) for p in coeff_polys])

    def batch_eval(w, us):
        us = np.asarray(us, dtype=float).reshape(-1, u_domain.dim)
        out = np.full(len(us), offset)
        for t, p in enumerate(coeff_polys):
            if p.coeffs.any() and w[t] != 0.0:
                out += w[t] * p.eval_many(us)
        return out

    return ConstraintFamily(
        index=index,
        value=value,
        subgradient_x=subgradient_x,
        lipschitz_in_y=lipschitz,
        y_domain=u_domain,
        batch_eval=batch_eval,
        lipschitz_in_y_at=lambda w: affine_in_x_lipschitz_at(
            coeff_polys, None, w, u_domain
        ),
    )


def synthesize_slater_point(
    spec: RegressionSpec, families: list[ConstraintFamily], max_vertex_dim: int = 12
) -> np.ndarray | None:
    """Best-effort search for a strictly feasible coefficient vector: the zero
    polynomial, then box vertices pulled 1% toward the center.  Certified
    through the lower-level maximizer; None when nothing passes."""
    from .lower_level import certified_max

    box = spec.coeff_box
    candidates = [np.zeros(box.dim)]
    if box.dim <= max_vertex_dim:
        center = box.center()
        for corner in itertools.product(*zip(box.lower, box.upper)):
            candidates.append(center + 0.99 * (np.asarray(corner) - center))
    for w in candidates:
        if not box.contains(w):
            continue
        bound = max(
            (lambda cm: cm.value + cm.gap)(certified_max(fam, w, 1e-7))
            for fam in families
        )
        if bound < -1e-9:
            return w
    return None


def build_problem(spec: RegressionSpec) -> SipProblem:
    """Assemble the regression instance as a SipProblem: decisions are the
    model coefficients, the index set is the input box."""
    if not spec.shape_constraints:
        raise InputError("regression instance needs at least one shape constraint")
    loss = assemble_loss(spec)
    objective = ConvexObjective(
        value=loss.value,
        subgradient=loss.gradient,
        lipschitz_constant=loss.lipschitz_maxnorm(spec.coeff_box),
        strictly_convex=True,
    )
    families = []
    for idx, sc in enumerate(spec.shape_constraints):
        coeff_polys, offset = constraint_coefficient_polys(spec, sc)
        lip = constraint_lipschitz_in_u(spec, coeff_polys)
        families.append(
            _family_from_polys(idx, coeff_polys, offset, spec.u_domain, lip)
        )
    slater = spec.slater_point
    if slater is None:
        slater = synthesize_slater_point(spec, families)
    return SipProblem(
        x_domain=spec.coeff_box,
        y_domain=spec.u_domain,
        objective=objective,
        constraints=tuple(families),
        slater_point=slater,
    )


def eval_polynomial_derivative(w, alpha, u) -> float:
    """Exact d^alpha v_w(u) for the monomial-basis polynomial with
    coefficient vector w over inputs of dimension len(u)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) != u.size:
        raise InputError("alpha and u must have the same dimension")
    basis = infer_basis(w.size, u.size)
    if sum(alpha) > basis.degree:
        raise InputError(
            f"derivative order {sum(alpha)} out of range for degree {basis.degree}"
        )
    return basis.derivative_eval(w, alpha, u)
