"""Problem template, feasible boxes and basic numerical utilities.

The supported instance class is

    minimize    g(u) + h(v)
    subject to  A u + B v = c,   u in U,   v in V

with ``g(u) = 1/2 ||D u - q||^2`` (diagonal ``D``), ``h`` the zero function
on the box ``V`` and ``B^T B`` diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadBounds,
    DimensionMismatch,
    NonConvergence,
    NotSmoothable,
    UnboundedSet,
    UnboundedV,
    UnsupportedB,
    ValidationError,
)

MEMBERSHIP_TOL = 1e-12


def _vec(x, name="vector"):
    arr = np.array(x, dtype=float).reshape(-1)
    if np.isnan(arr).any():
        raise ValidationError(f"{name} contains NaN")
    return arr


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Coordinatewise interval ``lower <= x <= upper``; infinities allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _vec(self.lower, "lower")
        up = _vec(self.upper, "upper")
        if lo.shape != up.shape:
            raise DimensionMismatch("box bounds differ in length")
        if np.any(lo > up):
            raise BadBounds("box has lower > upper")
        lo.setflags(write=False)
        up.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def free(cls, dim):
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def clip(self, x):
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def __eq__(self, other):
        if not isinstance(other, BoxSet):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``g(u) = 1/2 ||diag * u - shift||^2``."""

    diag: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        d = _vec(self.diag, "D")
        q = _vec(self.shift, "q")
        if d.shape != q.shape:
            raise DimensionMismatch("D and q differ in length")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValidationError("D must be finite and nonnegative")
        if not np.all(np.isfinite(q)):
            raise ValidationError("q must be finite")
        d.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "shift", q)

    @property
    def mu(self) -> float:
        """Strong convexity modulus ``min diag^2`` (zero when some entry is zero)."""
        return float(np.min(self.diag) ** 2) if self.diag.size else 0.0

    def value(self, u) -> float:
        r = self.diag * u - self.shift
        return 0.5 * float(r @ r)

    def __eq__(self, other):
        if not isinstance(other, QuadraticObjective):
            return NotImplemented
        return np.array_equal(self.diag, other.diag) and np.array_equal(self.shift, other.shift)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    g: QuadraticObjective
    U: BoxSet
    V: BoxSet
    h_is_zero_indicator: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        B = np.atleast_2d(np.array(self.B, dtype=float))
        c = _vec(self.c, "c")
        for arr in (A, B, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def p1(self) -> int:
        return self.A.shape[1]

    @property
    def p2(self) -> int:
        return self.B.shape[1]

    @property
    def strongly_convex(self) -> bool:
        return self.g.mu > 0

    @property
    def beta(self) -> np.ndarray:
        """Diagonal of ``B^T B``."""
        return np.einsum("ij,ij->j", self.B, self.B)

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return (
            np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
            and np.array_equal(self.c, other.c)
            and self.g == other.g
            and self.U == other.U
            and self.V == other.V
            and self.h_is_zero_indicator == other.h_is_zero_indicator
        )

    __hash__ = None


@dataclass(frozen=True)
class PrimalPoint:
    u: np.ndarray
    v: np.ndarray
    valid: bool = True


@dataclass(frozen=True)
class SmoothingSetup:
    """Constants of the quadratic prox-function ``1/2 ||u - center||^2``."""

    center: np.ndarray
    gamma: float
    d_u: float
    norm_A: float
    mu_p: float = 1.0
    lipschitz_smoothed: float = field(init=False)
    lipschitz_base: float = field(init=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        object.__setattr__(self, "lipschitz_base", self.norm_A**2 / self.mu_p)
        object.__setattr__(self, "lipschitz_smoothed", self.norm_A**2 / (self.gamma * self.mu_p))

    def prox(self, u) -> float:
        r = np.asarray(u, dtype=float) - self.center
        return 0.5 * self.mu_p * float(r @ r)


def validate(spec: ProblemSpec) -> ProblemSpec:
    """Check every supported-class invariant and return ``spec`` unchanged.

    Raises the matching :class:`ValidationError` subclass on the first
    violated invariant.
    """
    n = spec.c.size
    if spec.A.ndim != 2 or spec.B.ndim != 2:
        raise DimensionMismatch("A and B must be matrices")
    if spec.A.shape[0] != n or spec.B.shape[0] != n:
        raise DimensionMismatch(f"A has {spec.A.shape[0]} rows, B has {spec.B.shape[0]}, c has {n}")
    if spec.g.diag.size != spec.A.shape[1] or spec.U.dim != spec.A.shape[1]:
        raise DimensionMismatch("D, q and U must match the columns of A")
    if spec.V.dim != spec.B.shape[1]:
        raise DimensionMismatch("V must match the columns of B")
    for name, arr in (("A", spec.A), ("B", spec.B), ("c", spec.c)):
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} must be finite")

    btb = spec.B.T @ spec.B
    off = btb - np.diag(np.diag(btb))
    scale = max(1.0, float(np.max(np.abs(btb), initial=0.0)))
    if np.max(np.abs(off), initial=0.0) > 1e-12 * scale:
        raise UnsupportedB("B^T B is not diagonal")

    if spec.h_is_zero_indicator and not spec.V.is_bounded:
        raise UnboundedV("V must be bounded for an indicator h")
    if not spec.strongly_convex and not spec.U.is_bounded:
        raise NotSmoothable("g is not strongly convex and U is unbounded")
    return spec


def spectral_norm(A, tol=1e-10, max_iter=10_000) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    The first start vector is the normalized all-ones vector. A second,
    index-weighted start guards against an all-ones vector that happens to
    be orthogonal to the leading singular subspace.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise DimensionMismatch("empty matrix")
    p = A.shape[1]
    if not np.any(A):
        return 0.0
    starts = [np.ones(p), np.arange(1.0, p + 1.0) ** 0.5 * (-1.0) ** np.arange(p)]
    return max(_power_iteration(A, v0, tol, max_iter) for v0 in starts)


def _power_iteration(A, v, tol, max_iter):
    v = v / np.linalg.norm(v)
    w = A @ v
    sigma2 = float(w @ w)
    deltas = []
    for _ in range(max_iter):
        z = A.T @ w
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        v = z / nz
        w = A @ v
        new = float(w @ w)
        deltas.append(abs(new - sigma2))
        sigma2 = new
        if deltas[-1] == 0.0:
            return float(np.sqrt(sigma2))
        if len(deltas) >= 4:
            # geometric tail estimate; the largest recent ratio guards against a
            # transient first step and against rounding noise in the ratios
            d = deltas[-4:]
            rate = max(d[1] / d[0], d[2] / d[1], d[3] / d[2])
            if rate < 1.0 and d[3] * rate / (1.0 - rate) <= tol * 1e-2 * sigma2:
                return float(np.sqrt(sigma2))
    raise NonConvergence(f"power iteration did not converge in {max_iter} iterations")


def prox_diameter(U: BoxSet, center) -> float:
    """Exact ``sup_{u in U} 1/2 ||u - center||^2`` over a bounded box."""
    if not U.is_bounded:
        raise UnboundedSet("prox-diameter of an unbounded box is infinite")
    center = np.asarray(center, dtype=float)
    far = np.maximum((U.upper - center) ** 2, (U.lower - center) ** 2)
    return 0.5 * float(np.sum(far))


def reformulate_qp(D, q, A, a, b, r=None) -> ProblemSpec:
    """Slack reformulation of ``min 1/2||Du-q||^2 s.t. a <= Au <= b, ||u||_inf <= r``.

    Introduces ``v = A u`` so that ``B = -I``, ``c = 0``, ``U = [-r, r]^p1``
    and ``V = [a, b]``. ``r=None`` means ``r = +inf``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a = _vec(a, "a")
    b = _vec(b, "b")
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        if np.any(D - np.diag(np.diag(D))):
            raise ValidationError("D must be diagonal")
        D = np.diag(D)
    n, p1 = A.shape
    if a.size != n or b.size != n:
        raise DimensionMismatch("a and b must have one entry per row of A")
    if np.any(a >= b):
        raise BadBounds("require a < b componentwise")
    r = np.inf if r is None else float(r)
    if not r > 0:
        raise BadBounds("r must be positive")
    return ProblemSpec(
        A=A,
        B=-np.eye(n),
        c=np.zeros(n),
        g=QuadraticObjective(D, q),
        U=BoxSet(np.full(p1, -r), np.full(p1, r)),
        V=BoxSet(a, b),
    )


def make_smoothing(spec: ProblemSpec, gamma: float, center=None, norm_A=None) -> SmoothingSetup:
    center = np.zeros(spec.p1) if center is None else np.asarray(center, dtype=float)
    if norm_A is None:
        norm_A = spectral_norm(spec.A)
    return SmoothingSetup(center=center, gamma=float(gamma), d_u=prox_diameter(spec.U, center), norm_A=norm_A)


def residual(spec: ProblemSpec, u, v) -> np.ndarray:
    return spec.A @ u + spec.B @ v - spec.c


def feasibility_gap(spec: ProblemSpec, x: PrimalPoint) -> float:
    return float(np.linalg.norm(residual(spec, x.u, x.v)))


def objective(spec: ProblemSpec, x: PrimalPoint) -> float:
    """``g(u) + h(v)``; ``+inf`` when ``v`` leaves ``V`` by more than 1e-12."""
    if spec.h_is_zero_indicator and not spec.V.contains(x.v):
        return np.inf
    return spec.g.value(x.u)
