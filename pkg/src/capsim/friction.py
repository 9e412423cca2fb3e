"""Frictional resistance of the capsule against the lumen wall.

Three component forces (Coulomb, environmental pressure, visco-adhesive
drag) plus the fitted piecewise-logarithmic total-friction curve that
stands in for their sum inside the dynamics loop.  Curve units are
millinewtons against millimeters per second; conversion to SI happens
at the dynamics boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, NonConvergenceError, RankDeficientError, ValidationError

V_EPS = 1e-6  # m/s; below this the capsule counts as at rest

#: mm/s; the constant branch of the total-friction curve ends here
CURVE_KNEE = 1.0


@dataclass(frozen=True)
class FrictionParams:
    """Coefficients of the resistance model.

    mu_c and gamma drive the component forces; (a, b, c, C) define the
    total curve f(x) = C for x <= 1 mm/s, a*ln(b*x + c) + C beyond it.
    mu_c and gamma defaults are tuning values, the curve defaults come
    from a published fit.
    """

    mu_c: float = 0.08
    gamma: float = 0.05
    a: float = 55.04
    b: float = 0.23
    c: float = 1.04
    big_c: float = 100.0

    def __post_init__(self):
        if self.mu_c < 0 or self.gamma < 0:
            raise ValidationError("friction coefficients must be nonnegative", field="mu_c/gamma")


@dataclass(frozen=True)
class ContactFrame:
    """Local contact description for the environmental-resistance term."""

    normal_force: np.ndarray
    surface: np.ndarray  # area-weighted contact surface normal, m^2
    skew_angle: float  # rad, in [0, pi/2]
    pressure: float  # Pa

    def __post_init__(self):
        if not 0.0 <= self.skew_angle <= math.pi / 2.0:
            raise ValidationError("skew angle must lie in [0, pi/2]", field="skew_angle")


def coulomb_friction(mu_c: float, normal_force, velocity) -> np.ndarray:
    """Kinetic Coulomb force, opposing motion; zero at rest."""
    v = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed <= V_EPS:
        return np.zeros(3)
    return -mu_c * float(np.linalg.norm(normal_force)) * v / speed


def environmental_resistance(frame: ContactFrame) -> float:
    """Magnitude of the pressure-driven resistance, P * |S| * sin(theta)."""
    return frame.pressure * float(np.linalg.norm(frame.surface)) * math.sin(frame.skew_angle)


def visco_adhesive(gamma: float, velocity) -> np.ndarray:
    """Mucus drag, linear in velocity."""
    return -gamma * np.asarray(velocity, dtype=float)


def total_friction_curve(x: float, params: FrictionParams) -> float:
    """Total resistance magnitude (mN) at sliding speed ``x`` (mm/s).

    Constant C up to the 1 mm/s knee, logarithmic growth beyond.  The
    two branches do not meet: there is a step of a*ln(b + c) at the
    knee, kept exactly as published.
    """
    if x < 0:
        raise DomainError("speed must be nonnegative")
    if x <= CURVE_KNEE:
        return params.big_c
    arg = params.b * x + params.c
    if arg <= 0:
        raise DomainError(f"log argument b*x + c = {arg:.4g} is not positive")
    return params.a * math.log(arg) + params.big_c


def curve_step_at_knee(params: FrictionParams) -> float:
    """Size of the discontinuity between the two branches at 1 mm/s."""
    return params.a * math.log(params.b * CURVE_KNEE + params.c)


def _curve_vec(x: np.ndarray, a: float, b: float, c: float, big_c: float) -> np.ndarray:
    out = np.full_like(x, big_c)
    hi = x > CURVE_KNEE
    out[hi] = a * np.log(b * x[hi] + c) + big_c
    return out


def fit_friction_params(samples, max_iter: int = 200) -> tuple:
    """Least-squares fit of (a, b, c, C) to (speed, force) samples.

    Levenberg-Marquardt from a fixed initialization, so the result is
    deterministic.  Needs at least four distinct speeds above the knee
    to constrain the log branch and at least one at-or-below it to pin
    C.  Returns (FrictionParams, rmse).
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("samples must be (x, f) pairs", field="samples")
    x, f = pts[:, 0], pts[:, 1]
    n_hi = len(np.unique(x[x > CURVE_KNEE]))
    n_lo = int(np.sum(x <= CURVE_KNEE))
    if n_hi < 4 or n_lo < 1:
        raise RankDeficientError(
            f"need >= 4 distinct speeds above {CURVE_KNEE} and >= 1 at or below it "
            f"(got {n_hi} and {n_lo})"
        )

    def residual(theta):
        a, b, c, big_c = theta
        arg = b * x + c
        if np.any(arg[x > CURVE_KNEE] <= 0):
            # keep LM inside the log domain with a steep penalty wall
            return 1e6 * np.ones_like(f)
        return _curve_vec(x, a, b, c, big_c) - f

    theta0 = np.array([10.0, 0.1, 1.0, float(np.mean(f[x <= CURVE_KNEE]))])
    result = least_squares(residual, theta0, method="lm", max_nfev=max_iter * len(theta0))
    if not result.success:
        raise NonConvergenceError("curve fit did not converge",
                                  residual=float(np.sqrt(np.mean(result.fun ** 2))))
    a, b, c, big_c = result.x
    rmse = float(np.sqrt(np.mean(result.fun ** 2)))
    return FrictionParams(a=float(a), b=float(b), c=float(c), big_c=float(big_c)), rmse


# --- stiction / kinetic resolution used by the dynamics loop ---

MM_PER_M = 1000.0
N_PER_MN = 1e-3


def lumen_friction_force(velocity, applied_tangential, params: FrictionParams,
                         mass: float, dt: float) -> np.ndarray:
    """Friction force (SI) on a capsule in lumen contact.

    At rest the capsule sticks: applied tangential force below the
    static threshold C is cancelled exactly; a larger pull breaks away
    against the threshold.  While sliding, the curve magnitude applies
    opposite the velocity, clamped so one discrete step can at most
    bring the capsule to rest, never reverse it.
    """
    v = np.asarray(velocity, dtype=float)
    f_app = np.asarray(applied_tangential, dtype=float)
    speed = float(np.linalg.norm(v))
    threshold = params.big_c * N_PER_MN

    if speed <= V_EPS:
        app = float(np.linalg.norm(f_app))
        if app <= threshold or app == 0.0:
            return -f_app
        return -threshold * f_app / app

    direction = v / speed
    curve = total_friction_curve(speed * MM_PER_M, params) * N_PER_MN
    # impulse cap: friction may stop the capsule within the step plus
    # cancel whatever applied force drives it forward, nothing more
    cap = mass * speed / dt + max(0.0, float(f_app @ direction))
    return -min(curve, cap) * direction
