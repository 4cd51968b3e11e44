"""Model state spaces: Euclidean R^d and the round 2-sphere.

Conventions shared by every module: the generator is the *full* Laplacian,
so the Euclidean transition kernel is

    p(t, x, y) = (4*pi*t)^(-d/2) * exp(-|x-y|^2 / (4t)),

i.e. per-coordinate transition variance 2t, and the sphere kernel is the
spectral series with eigenvalues l(l+1)/radius^2.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import integrate

from . import streams
from .errors import InvalidPointError, TimeDomainError, TooSmallTimeError

_SPHERE_MIN_TIME = 1e-3  # below this the spectral series is not certified
_SPHERE_TAIL_TOL = 1e-13
_SPHERE_SUBSTEP = 1e-3  # geodesic-walk substep duration (intrinsic time)


@dataclass(frozen=True)
class StateSpace:
    """A model geometry: metric, measure, exact heat kernel, sampler."""

    kind: str  # "euclidean" | "sphere2"
    dimension: int
    ricci_lower_bound: float  # the curvature parameter K
    radius: float = 1.0
    heat_kernel_truncation: int = 512

    # -- construction ------------------------------------------------------

    def __post_init__(self):
        if self.kind not in ("euclidean", "sphere2"):
            raise InvalidPointError(f"unknown space kind {self.kind!r}")
        if self.dimension < 1:
            raise InvalidPointError("dimension must be >= 1")

    @property
    def embedding_dim(self):
        return self.dimension if self.kind == "euclidean" else 3

    # -- points ------------------------------------------------------------

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.embedding_dim,):
            raise InvalidPointError(
                f"point has shape {x.shape}, expected ({self.embedding_dim},)"
            )
        if self.kind == "sphere2":
            if abs(np.linalg.norm(x) - self.radius) > 1e-12:
                raise InvalidPointError(
                    f"|x| = {np.linalg.norm(x)!r} is not on the sphere of "
                    f"radius {self.radius}"
                )
        return x

    # -- metric ------------------------------------------------------------

    def distance(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        return float(self.distance_batch(x[None, :], y[None, :])[0])

    def distance_batch(self, xs, ys):
        """Pairwise distances of two (..., embedding_dim) arrays."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if self.kind == "euclidean":
            return np.linalg.norm(xs - ys, axis=-1)
        r = self.radius
        cosang = np.clip(np.sum(xs * ys, axis=-1) / (r * r), -1.0, 1.0)
        return r * np.arccos(cosang)

    # -- heat kernel ---------------------------------------------------------

    def heat_kernel(self, t, x, y):
        if t <= 0:
            raise TimeDomainError("heat kernel requires t > 0")
        x = self.check_point(x)
        y = self.check_point(y)
        if self.kind == "euclidean":
            d = self.dimension
            sq = float(np.sum((x - y) ** 2))
            return (4.0 * math.pi * t) ** (-d / 2.0) * math.exp(-sq / (4.0 * t))
        theta = self.distance(x, y) / self.radius
        return float(self.sphere_kernel_theta(t, theta))

    def sphere_series_length(self, t):
        """Smallest series length L with certified tail below 1e-13."""
        t_eff = t / (self.radius * self.radius)
        if t_eff < _SPHERE_MIN_TIME:
            raise TooSmallTimeError(
                f"sphere kernel needs t/radius^2 >= {_SPHERE_MIN_TIME}; "
                f"got {t_eff:g}"
            )
        for ell in range(self.heat_kernel_truncation + 1):
            tail = (2 * ell + 3) * math.exp(-(ell + 1) * (ell + 2) * t_eff)
            if tail < _SPHERE_TAIL_TOL:
                return ell
        raise TooSmallTimeError(
            f"series cap {self.heat_kernel_truncation} too small for t={t:g}"
        )

    def sphere_kernel_theta(self, t, theta):
        """Spectral kernel as a function of the angle; vectorized in theta."""
        if self.kind != "sphere2":
            raise InvalidPointError("sphere_kernel_theta needs a sphere2 space")
        if t <= 0:
            raise TimeDomainError("heat kernel requires t > 0")
        r = self.radius
        t_eff = t / (r * r)
        ell_max = self.sphere_series_length(t)
        ells = np.arange(ell_max + 1)
        coeffs = (2 * ells + 1) / (4.0 * math.pi * r * r) * np.exp(
            -ells * (ells + 1) * t_eff
        )
        return npleg.legval(np.cos(np.asarray(theta, dtype=float)), coeffs)

    # -- transition sampling -------------------------------------------------

    def sample_transition(self, t, x, rng):
        return self.sample_transition_batch(t, x, 1, rng)[0]

    def sample_transition_batch(self, t, x, n, rng):
        """n independent samples of X_t started at x; exact on R^d,
        geodesic random walk on the sphere."""
        if t < 0:
            raise TimeDomainError("transition requires t >= 0")
        x = self.check_point(x)
        if t == 0:
            return np.tile(x, (n, 1))
        if self.kind == "euclidean":
            return x + math.sqrt(2.0 * t) * rng.standard_normal((n, self.dimension))
        return self._sphere_walk(t, np.tile(x, (n, 1)), rng)

    def _sphere_walk(self, t, pts, rng):
        r = self.radius
        t_eff = t / (r * r)
        n_sub = max(1, math.ceil(t_eff / _SPHERE_SUBSTEP))
        h = t / n_sub
        p = pts.copy()
        n = p.shape[0]
        for _ in range(n_sub):
            v = rng.standard_normal((n, 3))
            g = rng.standard_normal((n, 2))
            phat = p / np.linalg.norm(p, axis=1, keepdims=True)
            w = v - np.sum(v * phat, axis=1, keepdims=True) * phat
            wn = np.linalg.norm(w, axis=1, keepdims=True)
            # a projected draw can degenerate only with probability 0
            wn = np.where(wn < 1e-300, 1.0, wn)
            u = w / wn
            step = np.sqrt(2.0 * h * np.sum(g * g, axis=1))  # chi(2) length
            ang = (step / r)[:, None]
            p = np.cos(ang) * p + np.sin(ang) * r * u
            p *= r / np.linalg.norm(p, axis=1, keepdims=True)
        return p

    def sample_transition_each(self, ts, x, rng):
        """One sample per entry of ts (varying horizons, common start)."""
        ts = np.asarray(ts, dtype=float)
        x = self.check_point(x)
        if np.any(ts < 0):
            raise TimeDomainError("transition requires t >= 0")
        if self.kind == "euclidean":
            z = rng.standard_normal((ts.size, self.dimension))
            return x + np.sqrt(2.0 * ts)[:, None] * z
        out = np.empty((ts.size, 3))
        for i, t in enumerate(ts):
            out[i] = self.sample_transition_batch(float(t), x, 1, rng)[0]
        return out


def euclidean(d):
    """Flat R^d with Lebesgue measure; K = 0."""
    return StateSpace("euclidean", int(d), 0.0)


def sphere2(radius=1.0, heat_kernel_truncation=512):
    """Round 2-sphere of the given radius; K = 1/radius^2."""
    radius = float(radius)
    return StateSpace(
        "sphere2",
        2,
        1.0 / (radius * radius),
        radius,
        int(heat_kernel_truncation),
    )


# ---------------------------------------------------------------------------
# moment and kernel diagnostics
# ---------------------------------------------------------------------------


@dataclass
class MomentEstimate:
    order: int
    t: float
    value: float
    stderr: float
    n_samples: int
    details: dict = field(default_factory=dict)


def moment_check(space, t, x, order, n_samples, seed, workers=1):
    """Monte Carlo estimate of the order-th distance moment of p(t, x, .)."""
    if order not in (2, 4):
        raise TimeDomainError("order must be 2 or 4")
    if n_samples < 10**4:
        raise TimeDomainError("moment_check needs n_samples >= 10^4")
    x = space.check_point(x)

    def chunk(rng, size, _k):
        ys = space.sample_transition_batch(t, x, size, rng)
        dist = space.distance_batch(np.tile(x, (size, 1)), ys)
        vals = dist**order
        return float(np.sum(vals)), float(np.sum(vals * vals)), size

    parts = streams.map_chunks(
        chunk, n_samples, seed, streams.TAG_MOMENT, workers=workers
    )
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    n = sum(p[2] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return MomentEstimate(order, t, mean, math.sqrt(var / n), n)


def exact_euclidean_moment(d, t, order):
    """Closed-form Gaussian distance moments: 2dt and 4d(d+2)t^2."""
    if order == 2:
        return 2.0 * d * t
    if order == 4:
        return 4.0 * d * (d + 2) * t * t
    raise TimeDomainError("order must be 2 or 4")


def conservativeness_defect(space, t, x):
    """|integral of p(t,x,.) dm - 1| by radial quadrature."""
    x = space.check_point(x)
    if space.kind == "euclidean":
        d = space.dimension
        area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)

        def dens(rho):
            return (
                area
                * rho ** (d - 1)
                * (4.0 * math.pi * t) ** (-d / 2.0)
                * math.exp(-rho * rho / (4.0 * t))
            )

        hi = 20.0 * math.sqrt(t) + 1.0
        val, _ = integrate.quad(dens, 0.0, hi, limit=200)
        return abs(val - 1.0)
    r = space.radius

    def dens(theta):
        return 2.0 * math.pi * r * r * math.sin(theta) * float(
            space.sphere_kernel_theta(t, theta)
        )

    val, _ = integrate.quad(dens, 0.0, math.pi, limit=200)
    return abs(val - 1.0)


def chapman_kolmogorov_defect(space, t, s, x, y):
    """|int p(t,x,z) p(s,z,y) dz - p(t+s,x,y)| by quadrature."""
    x = space.check_point(x)
    y = space.check_point(y)
    if space.kind == "euclidean" and space.dimension == 1:
        w = 14.0 * math.sqrt(max(t, s)) + abs(x[0]) + abs(y[0]) + 1.0

        def integrand(z):
            pz = np.array([z])
            return space.heat_kernel(t, x, pz) * space.heat_kernel(s, pz, y)

        val, _ = integrate.quad(integrand, -w, w, limit=400)
        return abs(val - space.heat_kernel(t + s, x, y))
    if space.kind == "sphere2":
        # integrate over the sphere in coordinates polar about x
        r = space.radius
        xhat = x / r
        # orthonormal frame (xhat, e1, e2)
        probe = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(probe, xhat)) > 0.9:
            probe = np.array([0.0, 1.0, 0.0])
        e1 = probe - np.dot(probe, xhat) * xhat
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(xhat, e1)

        def inner(theta):
            def by_phi(phi):
                z = r * (
                    math.cos(theta) * xhat
                    + math.sin(theta) * (math.cos(phi) * e1 + math.sin(phi) * e2)
                )
                ang_zy = math.acos(
                    min(1.0, max(-1.0, float(np.dot(z, y)) / (r * r)))
                )
                return float(
                    space.sphere_kernel_theta(t, theta)
                ) * float(space.sphere_kernel_theta(s, ang_zy))

            val, _ = integrate.quad(by_phi, 0.0, 2.0 * math.pi, limit=100)
            return val * math.sin(theta) * r * r

        val, _ = integrate.quad(inner, 0.0, math.pi, limit=100)
        return abs(val - space.heat_kernel(t + s, x, y))
    raise InvalidPointError("Chapman-Kolmogorov quadrature supports R^1 and S^2")


def ball_volume(space, geodesic_radius):
    """Measure of a metric ball (used by the Li-Yau sanity scan)."""
    if space.kind == "euclidean":
        d = space.dimension
        unit = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
        return unit * geodesic_radius**d
    r = space.radius
    ang = min(geodesic_radius / r, math.pi)
    return 2.0 * math.pi * r * r * (1.0 - math.cos(ang))


def li_yau_constant_scan(space, t_grid, dist_grid, c_grid=None):
    """Smallest C on a grid with p(t,x,y) <= C/m(B(x,sqrt t)) * exp(-d^2/(Ct)).

    Only a sanity inequality on model spaces, never a proof.
    """
    if c_grid is None:
        c_grid = np.geomspace(1.0, 1e3, 200)
    if space.kind == "euclidean":
        x = np.zeros(space.dimension)

        def kern(t, dist):
            y = x.copy()
            y[0] = dist
            return space.heat_kernel(t, x, y)

    else:
        x = np.array([0.0, 0.0, space.radius])

        def kern(t, dist):
            return float(space.sphere_kernel_theta(t, dist / space.radius))

    for c in c_grid:
        ok = True
        for t in t_grid:
            vol = ball_volume(space, math.sqrt(t))
            for dist in dist_grid:
                lhs = kern(t, dist)
                rhs = c / vol * math.exp(-dist * dist / (c * t))
                if lhs > rhs * (1.0 + 1e-12):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return float(c)
    return math.inf
