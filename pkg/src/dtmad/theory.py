"""Finite-sample deviation bounds, separation thresholds and population
oracles for neighbor-radius / distance-to-measure anomaly scoring.

The deviation bounds are parametric in a regularity constant C that links
perturbations of ball masses to perturbations of ball radii around the
p-NN radius. C is a property of the sampled distribution and is never
estimated implicitly; :func:`fit_regularity_constant` inverts an observed
deviation into the implied C for calibration workflows.

Reference distributions provide exact ball masses, population p-NN radii
and population DTM values; they serve as oracles when validating the
empirical estimators on synthetic data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

INF = float("inf")

_BISECT_TOL = 1e-12
_QUAD_RTOL = 1e-9
_QUAD_MAX_DEPTH = 60


# ---------------------------------------------------------------------------
# Deviation rates and bounds
# ---------------------------------------------------------------------------


def global_deviation_rate(n: int, d: int, delta: float) -> float:
    """sqrt((4/n) ((d+1) ln(2n) + ln(8/delta))): the VC-type rate governing
    empirical ball-mass deviations uniformly over all centers in R^d."""
    _check_n(n, 1)
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    _check_delta(delta)
    return math.sqrt((4.0 / n) * ((d + 1) * math.log(2 * n) + math.log(8.0 / delta)))


def sample_deviation_rate(n: int, delta: float) -> float:
    """sqrt((4/(n-1)) (ln(2(n-1)) + ln(8n/delta))): the dimension-free rate
    governing ball-mass deviations at the sample points themselves."""
    _check_n(n, 2)
    _check_delta(delta)
    return math.sqrt(
        (4.0 / (n - 1)) * (math.log(2 * (n - 1)) + math.log(8.0 * n / delta))
    )


def radius_deviation_bound(n: int, d: int, delta: float, p: float, C: float) -> float:
    """High-probability bound C (rate^2 + rate sqrt(p)) on the worst-case
    error of the empirical p-NN radius over all centers; p must equal k/n
    for an integer k."""
    _check_mass_ratio(p, n)
    _check_C(C)
    rate = global_deviation_rate(n, d, delta)
    return C * (rate * rate + rate * math.sqrt(p))


def radius_deviation_bound_sample(n: int, delta: float, p: float, C: float) -> float:
    """Sample-point analogue C (rate^2 + rate sqrt(p') + 1/n) with
    p' = (k-1)/(n-1); dimension-free."""
    k = _check_mass_ratio(p, n)
    _check_C(C)
    _check_n(n, 2)
    p_prime = (k - 1) / (n - 1)
    rate = sample_deviation_rate(n, delta)
    return C * (rate * rate + rate * math.sqrt(p_prime) + 1.0 / n)


def dtm_deviation_bound(n: int, d: int, delta: float, m: float, C: float) -> float:
    """High-probability sup-norm bound C rate (rate + sqrt(m)) on the
    empirical DTM error over all centers; valid for every order q >= 1."""
    _check_mass(m)
    _check_C(C)
    rate = global_deviation_rate(n, d, delta)
    return C * rate * (rate + math.sqrt(m))


def dtm_deviation_bound_sample(n: int, delta: float, m: float, C: float) -> float:
    """Sample-point analogue of :func:`dtm_deviation_bound`; dimension-free."""
    _check_mass(m)
    _check_C(C)
    rate = sample_deviation_rate(n, delta)
    return C * rate * (rate + math.sqrt(m))


def fit_regularity_constant(observed_deviation: float, n: int, delta: float,
                            m: float) -> float:
    """Invert the sample-point DTM bound: the C that would make the bound
    exactly equal an observed max deviation."""
    if observed_deviation < 0:
        raise ValueError("observed deviation must be >= 0")
    return observed_deviation / dtm_deviation_bound_sample(n, delta, m, 1.0)


# ---------------------------------------------------------------------------
# Separation thresholds
# ---------------------------------------------------------------------------


def safety_density_threshold(m: float, epsilon: float, eta: float, h: float,
                             b: float, q: float) -> float:
    """Minimum density-profile level g0 defining the safety zone.

    Points of the normal support whose density profile reaches g0 have a
    population DTM smaller (by more than the buffer h) than anywhere on the
    anomalous support at separation eta. Requires m > epsilon, and the
    separation must be large enough for the buffer.
    """
    _check_mixture(m, epsilon)
    _check_shape_params(b, q)
    if eta < 0 or h < 0:
        raise ValueError("eta and h must be >= 0")
    if q == INF:
        if eta - h <= 0:
            raise ValueError(
                f"separation eta={eta} must exceed buffer h={h} for q=inf"
            )
        return m / (1.0 - epsilon) * (eta - h) ** (-b)
    inner = (b + q) / b * ((m - epsilon) / m * eta**q - h)
    if inner <= 0:
        raise ValueError(
            f"separation eta={eta} too small for buffer h={h} at m={m}, "
            f"epsilon={epsilon}: no attainable density threshold"
        )
    return m / (1.0 - epsilon) * inner ** (-b / q)


def full_support_separation(m: float, epsilon: float, a0: float, b: float,
                            q: float, h: float = 0.0) -> float:
    """Smallest separation for which the safety zone is the whole normal
    support when the density profile is bounded below by a0.

    Exact functional inverse (in eta) of :func:`safety_density_threshold`
    at threshold a0. Note the overall exponent is +1/q: solving the
    threshold formula for eta gives
    eta^q = m/(m-eps) * (b/(b+q) (m/(a0(1-eps)))^(q/b) + h).
    """
    _check_mixture(m, epsilon)
    _check_shape_params(b, q)
    if a0 <= 0:
        raise ValueError(f"need a0 > 0, got {a0}")
    if h < 0:
        raise ValueError("h must be >= 0")
    if q == INF:
        return (m / (a0 * (1.0 - epsilon))) ** (1.0 / b) + h
    base = m / (m - epsilon) * (
        b / (b + q) * (m / (a0 * (1.0 - epsilon))) ** (q / b) + h
    )
    return base ** (1.0 / q)


# ---------------------------------------------------------------------------
# Reference distributions (population oracles)
# ---------------------------------------------------------------------------


class ReferenceDistribution:
    """A distribution with computable ball masses P(B(x, r)).

    Subclasses may add closed forms for the population p-NN radius and DTM;
    the generic paths below only need :meth:`ball_mass` plus a bound on the
    distance from a query point to the support.
    """

    dim: int

    def ball_mass(self, x, r: float) -> float:
        raise NotImplementedError

    def farthest_support_distance(self, x) -> float:
        """Upper bound on the distance from x to any support point."""
        raise NotImplementedError

    # Geometry used by the separation machinery; optional for mixtures.

    def support_center(self) -> np.ndarray:
        raise NotImplementedError

    def support_radius(self) -> float:
        raise NotImplementedError

    def boundary_depth(self, x) -> float:
        """Distance from x to the support boundary (negative outside)."""
        raise NotImplementedError

    def support_grid(self, size: int) -> np.ndarray:
        raise NotImplementedError

    # (a, b)-condition profile of the normal component.

    @property
    def ab_exponent(self) -> float:
        raise NotImplementedError

    def density_floor(self, depth: float) -> float:
        """Nondecreasing profile g: a lower bound valid for every support
        point at the given boundary depth."""
        raise NotImplementedError

    def min_depth_for_density(self, level: float) -> float:
        """inf of the preimage {z >= 0 : g(z) >= level} (inf over an empty
        set is +inf, meaning no depth qualifies)."""
        raise NotImplementedError

    def _point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ValueError(f"point must have shape ({self.dim},), got {x.shape}")
        return x


class UniformInterval(ReferenceDistribution):
    """Uniform distribution on a closed interval [low, high]."""

    dim = 1

    def __init__(self, low: float = 0.0, high: float = 1.0):
        if not high > low:
            raise ValueError(f"need high > low, got [{low}, {high}]")
        self.low = float(low)
        self.high = float(high)
        self.length = self.high - self.low

    def ball_mass(self, x, r):
        x = float(self._point(x)[0])
        if r < 0:
            return 0.0
        lo = max(x - r, self.low)
        hi = min(x + r, self.high)
        return max(0.0, hi - lo) / self.length

    def farthest_support_distance(self, x):
        x = float(self._point(x)[0])
        return max(abs(x - self.low), abs(x - self.high))

    def support_center(self):
        return np.array([(self.low + self.high) / 2.0])

    def support_radius(self):
        return self.length / 2.0

    def boundary_depth(self, x):
        x = float(self._point(x)[0])
        return min(x - self.low, self.high - x)

    def support_grid(self, size):
        return np.linspace(self.low, self.high, size)[:, None]

    @property
    def ab_exponent(self):
        return 1.0

    def density_floor(self, depth):
        # One-sided coverage gives mass >= min(1, r/L) at every support point.
        return 1.0 / self.length

    def min_depth_for_density(self, level):
        return 0.0 if level <= 1.0 / self.length + 1e-15 else INF

    # closed forms ----------------------------------------------------------

    def radius_closed_many(self, xs, p: float) -> np.ndarray:
        """Population p-NN radius at many points; piecewise linear in p."""
        _check_p(p)
        xs = np.atleast_1d(np.asarray(xs, dtype=float)).reshape(-1)
        L = self.length
        inside = (xs >= self.low) & (xs <= self.high)
        near_in = np.minimum(xs - self.low, self.high - xs)
        two_sided = p * L / 2.0
        r_in = np.where(two_sided <= near_in, two_sided, p * L - near_in)
        near_out = np.where(xs < self.low, self.low - xs, xs - self.high)
        return np.where(inside, r_in, near_out + p * L)

    def radius_closed(self, x, p: float) -> float:
        return float(self.radius_closed_many(self._point(x), p)[0])

    def dtm_closed_many(self, xs, m: float, q: float) -> np.ndarray:
        """Population DTM at many points by integrating the piecewise-linear
        radius exactly."""
        _check_mass(m)
        _check_q(q)
        if q == INF:
            return self.radius_closed_many(xs, m)
        xs = np.atleast_1d(np.asarray(xs, dtype=float)).reshape(-1)
        L = self.length
        qp = q + 1.0

        def seg(a, bcoef, p0, p1):
            # integral of (a + bcoef*p)^q dp over [p0, p1], elementwise
            width = np.maximum(p1 - p0, 0.0)
            hi = (a + bcoef * (p0 + width)) ** qp
            lo = (a + bcoef * p0) ** qp
            return (hi - lo) / (bcoef * qp)

        inside = (xs >= self.low) & (xs <= self.high)
        near_in = np.minimum(xs - self.low, self.high - xs)
        p_kink = np.clip(2.0 * near_in / L, 0.0, None)
        # each branch is only meaningful on its side of `inside`; the other
        # side may produce NaN from negative bases and is discarded by where
        with np.errstate(invalid="ignore"):
            total_in = seg(0.0, L / 2.0, 0.0, np.minimum(m, p_kink)) \
                + seg(np.minimum(-near_in, 0.0), L, p_kink, np.full_like(xs, m))
            near_out = np.where(xs < self.low, self.low - xs, xs - self.high)
            total_out = seg(np.maximum(near_out, 0.0), L, 0.0, np.full_like(xs, m))
        total = np.where(inside, total_in, total_out)
        return (total / m) ** (1.0 / q)

    def dtm_closed(self, x, m: float, q: float) -> float:
        return float(self.dtm_closed_many(self._point(x), m, q)[0])


class PointMass(ReferenceDistribution):
    """Unit mass at a single location."""

    def __init__(self, location):
        self.location = np.atleast_1d(np.asarray(location, dtype=float))
        self.dim = self.location.size

    def ball_mass(self, x, r):
        x = self._point(x)
        return 1.0 if float(np.linalg.norm(x - self.location)) <= r else 0.0

    def farthest_support_distance(self, x):
        return float(np.linalg.norm(self._point(x) - self.location))

    def support_center(self):
        return self.location.copy()

    def support_radius(self):
        return 0.0

    def boundary_depth(self, x):
        return 0.0

    def support_grid(self, size):
        return self.location[None, :].copy()

    def radius_closed(self, x, p: float) -> float:
        _check_p(p)
        return float(np.linalg.norm(self._point(x) - self.location))

    def dtm_closed(self, x, m: float, q: float) -> float:
        _check_mass(m)
        _check_q(q)
        return self.radius_closed(x, m)


def _unit_ball_log_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)


def _cap_fraction(d: int, rho: float, a: float) -> float:
    """Fraction of a d-ball of radius rho beyond a plane at signed distance a
    from its center (a in [-rho, rho])."""
    if a >= rho:
        return 0.0
    if a <= -rho:
        return 1.0
    t = 1.0 - (a / rho) ** 2
    frac = 0.5 * betainc((d + 1) / 2.0, 0.5, t)
    return frac if a >= 0 else 1.0 - frac


def _ball_intersection_fraction(d: int, r: float, R: float, dist: float) -> float:
    """vol(B(x, r) ∩ B(c, R)) / vol(B(c, R)) with dist = |x - c|."""
    if r <= 0:
        return 0.0
    if dist >= r + R:
        return 0.0
    if dist + r <= R:
        return math.exp(d * math.log(r / R))
    if dist + R <= r:
        return 1.0
    a1 = (dist * dist + r * r - R * R) / (2.0 * dist)
    a2 = dist - a1
    frac_r = _cap_fraction(d, r, a1) * math.exp(d * math.log(r / R))
    frac_R = _cap_fraction(d, R, a2)
    return min(1.0, frac_r + frac_R)


class UniformBall(ReferenceDistribution):
    """Uniform distribution on a solid Euclidean ball."""

    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = self.center.size

    def ball_mass(self, x, r):
        x = self._point(x)
        dist = float(np.linalg.norm(x - self.center))
        return _ball_intersection_fraction(self.dim, r, self.radius, dist)

    def farthest_support_distance(self, x):
        x = self._point(x)
        return float(np.linalg.norm(x - self.center)) + self.radius

    def support_center(self):
        return self.center.copy()

    def support_radius(self):
        return self.radius

    def boundary_depth(self, x):
        x = self._point(x)
        return self.radius - float(np.linalg.norm(x - self.center))

    def support_grid(self, size):
        # Radial grid along the first axis; by symmetry this covers every
        # boundary depth once.
        ts = np.linspace(-self.radius, self.radius, size)
        grid = np.zeros((size, self.dim))
        grid[:, 0] = ts
        return self.center + grid

    @property
    def ab_exponent(self):
        return float(self.dim)

    def density_floor(self, depth):
        """Numeric inf over r of mass(x, r) / r^d at boundary depth ``depth``.

        Monotone nondecreasing in depth. Exact limits are used for r <= depth
        (fully inside) and the worst case is searched on a log grid of radii.
        """
        if depth < 0:
            raise ValueError("depth must be >= 0")
        depth = min(depth, self.radius)
        d, R = self.dim, self.radius
        # r <= depth: mass = (r/R)^d so the ratio is R^-d exactly.
        best = math.exp(-d * math.log(R))
        dist = R - depth
        if dist <= 0:
            return best
        lo = max(depth, 1e-9 * R)
        for r in np.geomspace(lo, dist + R, 2048):
            mass = _ball_intersection_fraction(d, float(r), R, dist)
            best = min(best, mass / float(r) ** d)
        return best

    def min_depth_for_density(self, level):
        if level <= self.density_floor(0.0):
            return 0.0
        if level > self.density_floor(self.radius) * (1 + 1e-12):
            return INF
        lo, hi = 0.0, self.radius
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.density_floor(mid) >= level:
                hi = mid
            else:
                lo = mid
        return hi


class HuberMixture(ReferenceDistribution):
    """(1-eps) * clean + eps * contaminant."""

    def __init__(self, clean: ReferenceDistribution,
                 contaminant: ReferenceDistribution, epsilon: float):
        if clean.dim != contaminant.dim:
            raise ValueError("mixture components must share a dimension")
        if not 0.0 <= epsilon < 1.0:
            raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
        self.clean = clean
        self.contaminant = contaminant
        self.epsilon = float(epsilon)
        self.dim = clean.dim

    def ball_mass(self, x, r):
        return ((1.0 - self.epsilon) * self.clean.ball_mass(x, r)
                + self.epsilon * self.contaminant.ball_mass(x, r))

    def farthest_support_distance(self, x):
        return max(self.clean.farthest_support_distance(x),
                   self.contaminant.farthest_support_distance(x))

    def support_grid(self, size):
        return np.vstack([self.clean.support_grid(size),
                          self.contaminant.support_grid(size)])


# ---------------------------------------------------------------------------
# Population radius / DTM
# ---------------------------------------------------------------------------


def population_radius(dist: ReferenceDistribution, x, p: float) -> float:
    """Radius of the smallest ball at x holding mass >= p.

    Uses a closed form when the distribution provides one, otherwise
    monotone bisection on r -> P(B(x, r)) to absolute tolerance 1e-12.
    """
    _check_p(p)
    closed = getattr(dist, "radius_closed", None)
    if closed is not None:
        return closed(x, p)
    if dist.ball_mass(x, 0.0) >= p:
        return 0.0
    lo = 0.0
    hi = dist.farthest_support_distance(x) + 1.0
    if dist.ball_mass(x, hi) < p:
        raise ValueError("distribution mass never reaches p; bad ball_mass?")
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if dist.ball_mass(x, mid) >= p:
            hi = mid
        else:
            lo = mid
    return hi


def population_dtm(dist: ReferenceDistribution, x, m: float, q: float) -> float:
    """Population DTM ((1/m) integral_0^m radius(p)^q dp)^(1/q).

    Finite q integrates by adaptive Simpson quadrature to relative
    tolerance 1e-9 (the integrand is bounded and monotone in p, so the
    rule's error estimate is reliable); q = inf is the p = m radius.
    """
    _check_mass(m)
    _check_q(q)
    if q == INF:
        return population_radius(dist, x, m)

    def integrand(p: float) -> float:
        p = max(p, 1e-300)
        return population_radius(dist, x, p) ** q

    total = _adaptive_simpson(integrand, 0.0, m)
    return (max(total, 0.0) / m) ** (1.0 / q)


def _adaptive_simpson(f, a: float, b: float) -> float:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = max(abs(whole) * _QUAD_RTOL, 1e-15)
    value, leftover = _simpson_step(f, a, b, fa, fm, fb, whole, tol,
                                    _QUAD_MAX_DEPTH)
    if leftover > 100.0 * tol:
        raise RuntimeError(
            f"quadrature did not converge: residual {leftover:.3e} over [{a}, {b}]"
        )
    return value


def _simpson_step(f, a, b, fa, fm, fb, whole, tol, depth):
    mid = 0.5 * (a + b)
    lm = f(0.5 * (a + mid))
    rm = f(0.5 * (mid + b))
    left = (mid - a) / 6.0 * (fa + 4.0 * lm + fm)
    right = (b - mid) / 6.0 * (fm + 4.0 * rm + fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol or depth <= 0:
        leftover = 0.0 if abs(err) <= 15.0 * tol else abs(err)
        return left + right + err / 15.0, leftover
    lv, lres = _simpson_step(f, a, mid, fa, lm, fm, left, tol / 2.0, depth - 1)
    rv, rres = _simpson_step(f, mid, b, fm, rm, fb, right, tol / 2.0, depth - 1)
    return lv + rv, lres + rres


# ---------------------------------------------------------------------------
# Separation check
# ---------------------------------------------------------------------------


def support_gap(dist0: ReferenceDistribution, dist1: ReferenceDistribution) -> float:
    """Minimum distance between the two supports (exact for the ball-like
    supports used here: intervals, balls, point masses)."""
    c0, c1 = dist0.support_center(), dist1.support_center()
    gap = float(np.linalg.norm(c0 - c1)) - dist0.support_radius() - dist1.support_radius()
    return max(0.0, gap)


@dataclass(frozen=True)
class SeparationReport:
    holds: bool
    lhs_sup: float | None
    rhs_inf: float | None
    eta: float
    h: float
    g0: float | None
    min_depth: float | None
    n_safety_points: int
    safety_zone_empty: bool
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "lhs_sup": self.lhs_sup,
            "rhs_inf": self.rhs_inf,
            "eta": self.eta,
            "h": self.h,
            "g0": self.g0,
            "min_depth": None if self.min_depth in (None, INF) else self.min_depth,
            "n_safety_points": self.n_safety_points,
            "safety_zone_empty": self.safety_zone_empty,
            "reason": self.reason,
        }


def check_separation(dist0: ReferenceDistribution, dist1: ReferenceDistribution,
                     epsilon: float, m: float, q: float, h: float,
                     eta: float | None = None,
                     normal_grid: np.ndarray | None = None,
                     anomaly_grid: np.ndarray | None = None,
                     grid_size: int = 101) -> SeparationReport:
    """Evaluate whether the population DTM separates the safety zone of the
    normal support from the anomalous support with buffer h.

    The mixture DTM is evaluated on a grid over the safety zone (normal
    support points deep enough for the density threshold) and over the
    anomalous support; the check is sup + h < inf. An empty safety-zone
    sample is reported, not an error.
    """
    _check_mixture(m, epsilon)
    if eta is None:
        eta = support_gap(dist0, dist1)
    b = dist0.ab_exponent
    try:
        g0 = safety_density_threshold(m, epsilon, eta, h, b, q)
    except ValueError as exc:
        return SeparationReport(holds=False, lhs_sup=None, rhs_inf=None,
                                eta=eta, h=h, g0=None, min_depth=None,
                                n_safety_points=0, safety_zone_empty=True,
                                reason=str(exc))
    min_depth = dist0.min_depth_for_density(g0)
    mixture = HuberMixture(dist0, dist1, epsilon)

    grid0 = normal_grid if normal_grid is not None else dist0.support_grid(grid_size)
    grid0 = np.atleast_2d(np.asarray(grid0, dtype=float))
    depths = np.array([dist0.boundary_depth(x) for x in grid0])
    safe = grid0[depths >= min_depth - 1e-12] if min_depth != INF else grid0[:0]

    grid1 = anomaly_grid if anomaly_grid is not None else dist1.support_grid(grid_size)
    grid1 = np.atleast_2d(np.asarray(grid1, dtype=float))

    lhs = max((population_dtm(mixture, x, m, q) for x in safe), default=None)
    rhs = min(population_dtm(mixture, y, m, q) for y in grid1)
    empty = lhs is None
    holds = True if empty else (lhs + h < rhs)
    return SeparationReport(holds=holds, lhs_sup=lhs, rhs_inf=rhs, eta=eta, h=h,
                            g0=g0, min_depth=min_depth,
                            n_safety_points=int(len(safe)),
                            safety_zone_empty=empty,
                            reason="safety zone sample is empty" if empty else None)


# ---------------------------------------------------------------------------
# Bound report (CLI surface)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryInputs:
    n: int
    d: int
    delta: float = 0.05
    m: float = 0.03
    C: float = 1.0
    epsilon: float = 0.0
    eta: float | None = None
    h: float = 0.0
    a0: float | None = None
    b: float | None = None
    q: float = 2.0

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        if self.q == INF:
            out["q"] = "inf"
        return out


def compute_report(inputs: TheoryInputs) -> dict:
    """Every bound/threshold valid for the inputs; quantities whose
    preconditions fail are reported with a reason string instead."""
    entries: dict[str, dict] = {}

    def attempt(name, fn, *args, **kwargs):
        try:
            entries[name] = {"value": fn(*args, **kwargs)}
        except ValueError as exc:
            entries[name] = {"skipped": str(exc)}

    i = inputs
    attempt("global_deviation_rate", global_deviation_rate, i.n, i.d, i.delta)
    attempt("sample_deviation_rate", sample_deviation_rate, i.n, i.delta)
    k = max(1, math.ceil(i.m * i.n))
    p = k / i.n
    entries["radius_mass_ratio"] = {"value": p}
    attempt("radius_deviation_bound", radius_deviation_bound, i.n, i.d, i.delta, p, i.C)
    attempt("radius_deviation_bound_sample", radius_deviation_bound_sample,
            i.n, i.delta, p, i.C)
    attempt("dtm_deviation_bound", dtm_deviation_bound, i.n, i.d, i.delta, i.m, i.C)
    attempt("dtm_deviation_bound_sample", dtm_deviation_bound_sample,
            i.n, i.delta, i.m, i.C)
    if i.eta is not None and i.b is not None:
        attempt("safety_density_threshold", safety_density_threshold,
                i.m, i.epsilon, i.eta, i.h, i.b, i.q)
    else:
        entries["safety_density_threshold"] = {
            "skipped": "requires eta and b inputs"}
    if i.a0 is not None and i.b is not None:
        attempt("full_support_separation", full_support_separation,
                i.m, i.epsilon, i.a0, i.b, i.q, i.h)
    else:
        entries["full_support_separation"] = {
            "skipped": "requires a0 and b inputs"}
    return {"inputs": inputs.to_dict(), "quantities": entries}


# ---------------------------------------------------------------------------
# Shared validation
# ---------------------------------------------------------------------------


def _check_n(n, minimum):
    if n < minimum:
        raise ValueError(f"need n >= {minimum}, got {n}")


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")


def _check_C(C):
    if C <= 0:
        raise ValueError(f"regularity constant must be > 0, got {C}")


def _check_mass(m):
    if not 0.0 < m < 1.0:
        raise ValueError(f"mass m must be in (0, 1), got {m}")


def _check_p(p):
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")


def _check_q(q):
    if q != INF and q < 1:
        raise ValueError(f"q must be in [1, inf], got {q}")


def _check_mass_ratio(p, n) -> int:
    """p must be k/n for integer k in [1, n]; returns k."""
    k = p * n
    k_round = round(k)
    if not math.isclose(k, k_round, rel_tol=0.0, abs_tol=1e-9) or not 1 <= k_round <= n:
        raise ValueError(f"p={p} is not k/n for an integer 1 <= k <= n={n}")
    return int(k_round)


def _check_mixture(m, epsilon):
    _check_mass(m)
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    if m <= epsilon:
        raise ValueError(
            f"mass m={m} must exceed contamination epsilon={epsilon}"
        )


def _check_shape_params(b, q):
    if b <= 0:
        raise ValueError(f"intrinsic dimension b must be > 0, got {b}")
    _check_q(q)
