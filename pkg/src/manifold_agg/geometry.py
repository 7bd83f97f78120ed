"""Chart-free Riemannian kernels for Euclidean space, the unit sphere and the hyperboloid.

Points live in embedded coordinates: plain vectors for Euclidean(n), unit vectors
in R^3 for the sphere, and the upper sheet {x3^2 - x1^2 - x2^2 = 1, x3 > 0} of the
hyperboloid in Minkowski R^{2,1} (timelike coordinate last).  Exponential map,
logarithm, parallel transport and distance are exact closed forms; results are
renormalized onto the constraint surface after every mutation.

All operations are pure functions of their inputs; nothing here mutates shared
state, so values are safe to share across threads.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    AntipodalPair,
    ExceedsInjectivity,
    ManifoldAggError,
    OffManifold,
    RadiusTooLarge,
)

ON_MANIFOLD_TOL = 1e-10     # membership tolerance for point/tangent invariants
ANTIPODAL_GUARD = 1e-6      # sphere ops reject pairs with d >= pi - guard
FD_STEP = float(np.cbrt(np.finfo(float).eps))  # ~6.06e-6, truncation/round-off balance
_TINY = 1e-300


@dataclass(frozen=True)
class ManifoldPoint:
    """A point in embedded coordinates. Build via ``Manifold.point`` to validate."""

    coords: np.ndarray

    def __array__(self, dtype=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector with its base point. Build via ``Manifold.tangent``."""

    base: ManifoldPoint
    comps: np.ndarray

    def __array__(self, dtype=None):
        return np.asarray(self.comps, dtype=dtype)


def _as_vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Manifold(ABC):
    """Descriptor + kernels for one concrete manifold.

    Subclasses implement the row-wise vectorized kernels (``*_rows``) on (K, d)
    arrays; scalar and all-pairs variants are derived here.  Curvature bounds
    (lambda, mu), injectivity and convexity radii are class data.
    """

    kind: str
    ambient_dim: int
    dim: int
    curvature_lower: float   # lambda <= 0
    curvature_upper: float   # mu >= 0
    injectivity_radius: float
    convexity_radius: float

    # -- validation -------------------------------------------------------

    @abstractmethod
    def check_point(self, x) -> np.ndarray:
        """Return x as an array, raising OffManifold if invariants fail."""

    @abstractmethod
    def check_tangent(self, x, v) -> np.ndarray:
        """Return v as an array, raising OffManifold if not tangent at x."""

    @abstractmethod
    def project_point(self, x) -> np.ndarray:
        ...

    @abstractmethod
    def project_tangent(self, x, v) -> np.ndarray:
        ...

    def point(self, coords) -> ManifoldPoint:
        return ManifoldPoint(self.check_point(coords))

    def tangent(self, base, comps) -> TangentVector:
        b = self.check_point(base)
        return TangentVector(ManifoldPoint(b), self.check_tangent(b, comps))

    @property
    @abstractmethod
    def base_point(self) -> np.ndarray:
        """A canonical point used as default sampling center."""

    # -- row-wise kernels (implemented per manifold) -----------------------

    @abstractmethod
    def distance_rows(self, X, Y) -> np.ndarray:
        ...

    @abstractmethod
    def log_rows(self, X, Y) -> np.ndarray:
        ...

    @abstractmethod
    def exp_rows(self, X, V) -> np.ndarray:
        ...

    @abstractmethod
    def transport_rows(self, X, Y, V) -> np.ndarray:
        """Parallel transport of V[i] from X[i] to Y[i] along the geodesic."""

    @abstractmethod
    def inner_rows(self, X, U, V) -> np.ndarray:
        ...

    @abstractmethod
    def tangent_basis(self, x) -> np.ndarray:
        """(dim, ambient_dim) orthonormal basis of the tangent space at x."""

    @abstractmethod
    def _radial_inverse_cdf(self, u, radius) -> np.ndarray:
        """Inverse CDF of the ball radius under the volume element's radial factor."""

    # -- scalar wrappers ---------------------------------------------------
    #
    # Scalar ops validate their point arguments (OffManifold on failure); the
    # row-wise kernels trust theirs, so bulk callers validate once up front.
    # Tangent arguments are shape-checked only: derivative quotients are
    # tangent merely up to round-off and must not be rejected.

    def _ensure_ambient(self, v) -> np.ndarray:
        v = _as_vec(v)
        if v.shape != (self.ambient_dim,) or not np.all(np.isfinite(v)):
            raise OffManifold(
                f"expected finite vector of length {self.ambient_dim}, got {v!r}")
        return v

    def distance(self, x, y) -> float:
        x, y = self.check_point(x), self.check_point(y)
        return float(self.distance_rows(x[None, :], y[None, :])[0])

    def exp(self, x, v) -> np.ndarray:
        x, v = self.check_point(x), self._ensure_ambient(v)
        return self.exp_rows(x[None, :], v[None, :])[0]

    def log(self, x, y) -> np.ndarray:
        x, y = self.check_point(x), self.check_point(y)
        return self.log_rows(x[None, :], y[None, :])[0]

    def transport(self, x, y, v) -> np.ndarray:
        x, y = self.check_point(x), self.check_point(y)
        v = self._ensure_ambient(v)
        return self.transport_rows(x[None, :], y[None, :], v[None, :])[0]

    def inner(self, x, u, v) -> float:
        u, v = self._ensure_ambient(u), self._ensure_ambient(v)
        return float(self.inner_rows(_as_vec(x)[None, :], u[None, :], v[None, :])[0])

    def norm(self, x, v) -> float:
        return math.sqrt(max(self.inner(x, v, v), 0.0))

    def geodesic(self, x, y, t: float) -> np.ndarray:
        """Point at parameter t on the minimizing geodesic from x to y."""
        x = _as_vec(x)
        return self.exp(x, t * self.log(x, y))

    # -- all-pairs kernels -------------------------------------------------

    def distance_matrix(self, X, Y) -> np.ndarray:
        X, Y = _as_vec(X), _as_vec(Y)
        n, m = X.shape[0], Y.shape[0]
        Xr = np.repeat(X, m, axis=0)
        Yr = np.tile(Y, (n, 1))
        return self.distance_rows(Xr, Yr).reshape(n, m)

    def log_pairs(self, X, Y) -> np.ndarray:
        """log_{X[i]}(Y[j]) for all pairs, shape (N, M, ambient_dim)."""
        X, Y = _as_vec(X), _as_vec(Y)
        n, m = X.shape[0], Y.shape[0]
        Xr = np.repeat(X, m, axis=0)
        Yr = np.tile(Y, (n, 1))
        return self.log_rows(Xr, Yr).reshape(n, m, X.shape[1])

    # -- covariant finite differences ---------------------------------------

    def covariant_fd(self, field, x, v, h: float | None = None, scheme: str = "auto") -> np.ndarray:
        """Directional covariant derivative of a vector field by finite differences.

        Returns (Pi^{-1}_{x gamma(h)} field(gamma(h)) - field(x)) / h with gamma the
        geodesic from x with velocity v.  scheme 'auto' upgrades to a central
        difference whenever the opposite geodesic point is admissible.
        """
        x, v = _as_vec(x), _as_vec(v)
        if h is None:
            h = FD_STEP / max(1.0, self.norm(x, v))
        if scheme not in ("auto", "forward", "central"):
            raise ValueError(f"unknown finite-difference scheme {scheme!r}")
        xf = self.exp(x, h * v)
        pulled_fwd = self.transport(xf, x, field(xf))
        if scheme in ("auto", "central"):
            try:
                xb = self.exp(x, -h * v)
                pulled_bwd = self.transport(xb, x, field(xb))
                return (pulled_fwd - pulled_bwd) / (2.0 * h)
            except ManifoldAggError:
                # opposite geodesic point inadmissible; fall back to forward
                if scheme == "central":
                    raise
        return (pulled_fwd - field(x)) / h

    def hessian_d2_quadform(self, x, z, v, h: float | None = None, scheme: str = "auto") -> float:
        """<Hess_v d^2_z(x), v>_x, via grad d^2_z = -2 log_.(z) and covariant_fd."""
        x, z, v = _as_vec(x), _as_vec(z), _as_vec(v)
        deriv = self.covariant_fd(lambda p: self.log(p, z), x, v, h=h, scheme=scheme)
        return -2.0 * self.inner(x, deriv, v)

    # -- sampling ------------------------------------------------------------

    def random_tangent(self, rng: np.random.Generator, x, norm: float = 1.0) -> np.ndarray:
        """Tangent vector at x with direction uniform on the unit tangent sphere."""
        x = _as_vec(x)
        basis = self.tangent_basis(x)
        coeff = rng.standard_normal(self.dim)
        nrm = np.linalg.norm(coeff)
        while nrm < 1e-12:  # pragma: no cover - probability zero
            coeff = rng.standard_normal(self.dim)
            nrm = np.linalg.norm(coeff)
        return (norm / nrm) * (coeff @ basis)

    def ball_points(self, rng: np.random.Generator, center, radius: float, count: int,
                    radial_mode: str = "volume") -> np.ndarray:
        """(count, ambient_dim) points at distance < radius from center."""
        center = self.check_point(center)
        if count == 0:
            return np.empty((0, self.ambient_dim))
        coeff = rng.standard_normal((count, self.dim))
        nrm = np.linalg.norm(coeff, axis=1, keepdims=True)
        nrm[nrm < 1e-12] = 1.0
        dirs = (coeff / nrm) @ self.tangent_basis(center)
        u = rng.random(count)
        if radial_mode == "volume":
            r = self._radial_inverse_cdf(u, radius)
        elif radial_mode == "uniform":
            r = radius * u
        else:
            raise ValueError(f"unknown radial_mode {radial_mode!r}")
        return self.exp_rows(np.tile(center, (count, 1)), r[:, None] * dirs)

    def sample_in_ball(self, center, radius: float, count: int, seed: int,
                       radial_mode: str = "volume") -> list[ManifoldPoint]:
        """Seeded, deterministic sample of `count` points in the open geodesic ball."""
        if radius >= self.convexity_radius:
            raise RadiusTooLarge(
                f"radius {radius} >= convexity radius {self.convexity_radius} of {self.kind}"
            )
        pts = self.ball_points(np.random.default_rng(seed), center, radius, count,
                               radial_mode=radial_mode)
        return [ManifoldPoint(p) for p in pts]

    def __repr__(self):
        return f"{type(self).__name__}()"


class Euclidean(Manifold):
    """Flat R^n with the usual inner product; transport is the identity."""

    kind = "euclidean"
    curvature_lower = 0.0
    curvature_upper = 0.0
    injectivity_radius = math.inf
    convexity_radius = math.inf

    def __init__(self, dim: int = 2):
        if dim < 1:
            raise ValueError("Euclidean dimension must be >= 1")
        self.dim = int(dim)
        self.ambient_dim = int(dim)

    def __repr__(self):
        return f"Euclidean({self.dim})"

    @property
    def base_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def check_point(self, x) -> np.ndarray:
        x = _as_vec(x)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            raise OffManifold(f"expected finite vector of length {self.dim}, got {x!r}")
        return x

    def check_tangent(self, x, v) -> np.ndarray:
        v = _as_vec(v)
        if v.shape != (self.dim,) or not np.all(np.isfinite(v)):
            raise OffManifold(f"expected finite vector of length {self.dim}, got {v!r}")
        return v

    def project_point(self, x):
        return _as_vec(x)

    def project_tangent(self, x, v):
        return _as_vec(v)

    def distance_rows(self, X, Y):
        return np.linalg.norm(_as_vec(Y) - _as_vec(X), axis=-1)

    def distance_matrix(self, X, Y):
        return cdist(_as_vec(X), _as_vec(Y))

    def log_rows(self, X, Y):
        return _as_vec(Y) - _as_vec(X)

    def exp_rows(self, X, V):
        return _as_vec(X) + _as_vec(V)

    def transport_rows(self, X, Y, V):
        return _as_vec(V).copy()

    def inner_rows(self, X, U, V):
        return np.einsum("...i,...i->...", _as_vec(U), _as_vec(V))

    def tangent_basis(self, x):
        return np.eye(self.dim)

    def _radial_inverse_cdf(self, u, radius):
        return radius * np.asarray(u) ** (1.0 / self.dim)


class Sphere(Manifold):
    """Unit sphere S^2 in R^3; curvature +1, antipodal pairs are rejected."""

    kind = "sphere"
    ambient_dim = 3
    dim = 2
    curvature_lower = 0.0
    curvature_upper = 1.0
    injectivity_radius = math.pi
    convexity_radius = math.pi / 2

    @property
    def base_point(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    def check_point(self, x) -> np.ndarray:
        x = _as_vec(x)
        if x.shape != (3,) or not np.all(np.isfinite(x)):
            raise OffManifold(f"expected finite 3-vector, got {x!r}")
        if abs(np.linalg.norm(x) - 1.0) > ON_MANIFOLD_TOL:
            raise OffManifold(f"|x| = {np.linalg.norm(x)!r} != 1 beyond tolerance")
        return x

    def check_tangent(self, x, v) -> np.ndarray:
        v = _as_vec(v)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise OffManifold(f"expected finite 3-vector, got {v!r}")
        if abs(float(np.dot(x, v))) > ON_MANIFOLD_TOL:
            raise OffManifold(f"<x, v> = {float(np.dot(x, v))!r} != 0 beyond tolerance")
        return v

    def project_point(self, x):
        x = _as_vec(x)
        n = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(n < 1e-12):
            raise OffManifold("cannot project the origin onto the sphere")
        return x / n

    def project_tangent(self, x, v):
        x, v = _as_vec(x), _as_vec(v)
        return v - np.einsum("...i,...i->...", x, v)[..., None] * x

    def _angles(self, X, Y):
        c = np.einsum("...i,...i->...", X, Y)
        s = np.linalg.norm(np.cross(X, Y), axis=-1)
        theta = np.arctan2(s, c)
        if np.any(theta >= math.pi - ANTIPODAL_GUARD):
            raise AntipodalPair(
                f"pair at distance >= pi - {ANTIPODAL_GUARD} (cut locus guard)"
            )
        return theta, c, s

    def distance_rows(self, X, Y):
        return self._angles(_as_vec(X), _as_vec(Y))[0]

    def distance_matrix(self, X, Y):
        X, Y = _as_vec(X), _as_vec(Y)
        return self._angles(X[:, None, :], Y[None, :, :])[0]

    def log_rows(self, X, Y):
        X, Y = _as_vec(X), _as_vec(Y)
        theta, c, s = self._angles(X, Y)
        u = Y - c[..., None] * X
        factor = np.where(s > 1e-16, theta / np.maximum(s, _TINY), 1.0)
        return factor[..., None] * u

    def exp_rows(self, X, V):
        X, V = _as_vec(X), _as_vec(V)
        n = np.linalg.norm(V, axis=-1)
        if np.any(n >= math.pi - ANTIPODAL_GUARD):
            raise ExceedsInjectivity(
                f"|v| = {float(np.max(n))!r} >= pi - {ANTIPODAL_GUARD}"
            )
        sinc = np.where(n > 1e-16, np.sin(n) / np.maximum(n, _TINY), 1.0)
        out = np.cos(n)[..., None] * X + sinc[..., None] * V
        return self.project_point(out)

    def transport_rows(self, X, Y, V):
        X, Y, V = _as_vec(X), _as_vec(Y), _as_vec(V)
        theta = self.distance_rows(X, Y)
        logs = self.log_rows(X, Y)
        safe = theta > 1e-16
        u_hat = np.where(safe[..., None], logs / np.maximum(theta, _TINY)[..., None], 0.0)
        a = np.einsum("...i,...i->...", V, u_hat)
        shift = a[..., None] * (
            -np.sin(theta)[..., None] * X + (np.cos(theta) - 1.0)[..., None] * u_hat
        )
        out = np.where(safe[..., None], V + shift, V)
        return self.project_tangent(Y, out)

    def inner_rows(self, X, U, V):
        return np.einsum("...i,...i->...", _as_vec(U), _as_vec(V))

    def tangent_basis(self, x):
        x = _as_vec(x)
        seed = np.zeros(3)
        seed[int(np.argmin(np.abs(x)))] = 1.0
        b1 = seed - np.dot(seed, x) * x
        b1 /= np.linalg.norm(b1)
        b2 = np.cross(x, b1)
        return np.vstack([b1, b2])

    def _radial_inverse_cdf(self, u, radius):
        # area element ~ sin(r) dr
        return np.arccos(1.0 - np.asarray(u) * (1.0 - math.cos(radius)))


def _mink(U, V):
    """Minkowski product with signature (+, +, -), timelike coordinate last."""
    U, V = _as_vec(U), _as_vec(V)
    return (
        np.einsum("...i,...i->...", U[..., :2], V[..., :2]) - U[..., 2] * V[..., 2]
    )


class Hyperbolic(Manifold):
    """Upper hyperboloid sheet in Minkowski R^{2,1}; curvature -1."""

    kind = "hyperbolic"
    ambient_dim = 3
    dim = 2
    curvature_lower = -1.0
    curvature_upper = 0.0
    injectivity_radius = math.inf
    convexity_radius = math.inf

    @property
    def base_point(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    def check_point(self, x) -> np.ndarray:
        x = _as_vec(x)
        if x.shape != (3,) or not np.all(np.isfinite(x)):
            raise OffManifold(f"expected finite 3-vector, got {x!r}")
        if abs(float(_mink(x, x)) + 1.0) > ON_MANIFOLD_TOL or x[2] <= 0.0:
            raise OffManifold(
                f"<x, x>_M = {float(_mink(x, x))!r} != -1 (or lower sheet) beyond tolerance"
            )
        return x

    def check_tangent(self, x, v) -> np.ndarray:
        v = _as_vec(v)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise OffManifold(f"expected finite 3-vector, got {v!r}")
        if abs(float(_mink(x, v))) > ON_MANIFOLD_TOL:
            raise OffManifold(f"<x, v>_M = {float(_mink(x, v))!r} != 0 beyond tolerance")
        return v

    def project_point(self, x):
        x = _as_vec(x)
        q = -_mink(x, x)
        if np.any(q <= 0.0) or np.any(x[..., 2] <= 0.0):
            raise OffManifold("point cannot be rescaled onto the upper sheet")
        return x / np.sqrt(q)[..., None]

    def project_tangent(self, x, v):
        x, v = _as_vec(x), _as_vec(v)
        return v + _mink(v, x)[..., None] * x

    @staticmethod
    def _chord_sq(X, Y):
        # Minkowski square of the chord; equals 2(cosh d - 1) and is stable for
        # nearby points, unlike arccosh of the raw Minkowski product
        diff = Y - X
        return np.maximum(_mink(diff, diff), 0.0)

    def distance_rows(self, X, Y):
        q = self._chord_sq(_as_vec(X), _as_vec(Y))
        return 2.0 * np.arcsinh(0.5 * np.sqrt(q))

    def distance_matrix(self, X, Y):
        X, Y = _as_vec(X), _as_vec(Y)
        q = self._chord_sq(X[:, None, :], Y[None, :, :])
        return 2.0 * np.arcsinh(0.5 * np.sqrt(q))

    def log_rows(self, X, Y):
        X, Y = _as_vec(X), _as_vec(Y)
        q = self._chord_sq(X, Y)
        theta = 2.0 * np.arcsinh(0.5 * np.sqrt(q))
        c = -1.0 - 0.5 * q  # = <x, y>_M
        u = Y + c[..., None] * X
        s = np.sqrt(q * (1.0 + 0.25 * q))  # = sinh(theta)
        factor = np.where(s > 1e-16, theta / np.maximum(s, _TINY), 1.0)
        return factor[..., None] * u

    def exp_rows(self, X, V):
        X, V = _as_vec(X), _as_vec(V)
        n = np.sqrt(np.maximum(_mink(V, V), 0.0))
        sinhc = np.where(n > 1e-16, np.sinh(n) / np.maximum(n, _TINY), 1.0)
        out = np.cosh(n)[..., None] * X + sinhc[..., None] * V
        return self.project_point(out)

    def transport_rows(self, X, Y, V):
        X, Y, V = _as_vec(X), _as_vec(Y), _as_vec(V)
        theta = self.distance_rows(X, Y)
        logs = self.log_rows(X, Y)
        safe = theta > 1e-16
        u_hat = np.where(safe[..., None], logs / np.maximum(theta, _TINY)[..., None], 0.0)
        a = _mink(V, u_hat)
        shift = a[..., None] * (
            np.sinh(theta)[..., None] * X + (np.cosh(theta) - 1.0)[..., None] * u_hat
        )
        out = np.where(safe[..., None], V + shift, V)
        return self.project_tangent(Y, out)

    def inner_rows(self, X, U, V):
        return _mink(U, V)

    def tangent_basis(self, x):
        x = _as_vec(x)
        basis = []
        for seed in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]),
                     np.array([0.0, 0.0, 1.0])):
            cand = seed + _mink(seed, x) * x
            for b in basis:
                cand = cand - _mink(cand, b) * b
            q = _mink(cand, cand)
            if q > 1e-12:
                basis.append(cand / math.sqrt(q))
            if len(basis) == 2:
                break
        return np.vstack(basis)

    def _radial_inverse_cdf(self, u, radius):
        # area element ~ sinh(r) dr
        return np.arccosh(1.0 + np.asarray(u) * (math.cosh(radius) - 1.0))


def make_manifold(kind: str, dim: int | None = None) -> Manifold:
    """Build a manifold descriptor from its config name."""
    kind = kind.lower()
    if kind == "euclidean":
        return Euclidean(dim if dim is not None else 2)
    if kind == "sphere":
        return Sphere()
    if kind == "hyperbolic":
        return Hyperbolic()
    raise ValueError(f"unknown manifold kind {kind!r}")
