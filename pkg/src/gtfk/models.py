"""One-factor short-rate diffusions and their unit-volatility transforms.

A model starts life as ``dY = mu_y(Y) dt + sigma_y(Y) dW`` with a rate map
``r(Y)``.  Pricing works on the transformed coordinate ``x = gamma(y)`` in
which the volatility is the constant ``sigma``; the transform, the drift
``mu(x)`` it induces, and the scalar drift potential

    V(x) = mu(x)^2 / (2 sigma^2) + mu'(x) / 2 + lam * r(x)

are what the rest of the package consumes.  Four built-in models are
provided (Vasicek, quadratic rate map, Black-Karasinski, GARCH linear SDE);
user-defined dynamics enter through :class:`TransformedModel` directly.

All model objects are immutable after construction and every operation is a
pure function of its arguments, so they are safe to share across threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "DomainError",
    "ShortRateModel",
    "TransformedModel",
    "vasicek",
    "quadratic",
    "black_karasinski",
    "garch",
    "MODEL_BUILDERS",
    "build_model",
    "lamperti_transform",
    "lamperti_inverse",
    "transformed_drift",
    "drift_potential",
    "drift_potential_curvature",
    "drift_primitive",
    "quadratic_rate_positivity",
]

ArrayLike = float | np.ndarray


class DomainError(ValueError):
    """A state value lies outside the open domain of a model."""


@dataclass(frozen=True)
class ShortRateModel:
    """Diffusion ``dY = mu_y(Y) dt + sigma_y(Y) dW`` with short rate ``r(Y)``.

    Attributes
    ----------
    name : str
        Identifier, e.g. ``"garch"``.
    params : Mapping[str, float]
        Named parameters (``a``, ``b``, ``sigma``; the quadratic model adds
        the rate-map coefficients ``beta`` and ``gamma``).
    drift_y, vol_y : callable
        Drift and volatility functions of the state ``y``.
    rate_map : callable
        Short rate ``r(y)``.
    y_domain : (float, float)
        Open interval on which the model lives.
    base_point : float
        Reference point of the volatility integral defining the transform;
        densities are invariant under its choice (only differences of the
        transformed coordinate survive the Jacobian).
    """

    name: str
    params: Mapping[str, float]
    drift_y: Callable[[ArrayLike], ArrayLike]
    vol_y: Callable[[ArrayLike], ArrayLike]
    rate_map: Callable[[ArrayLike], ArrayLike]
    y_domain: tuple[float, float]
    base_point: float


@dataclass(frozen=True)
class TransformedModel:
    """A :class:`ShortRateModel` rewritten in unit-volatility coordinates.

    Carries everything the solver and the oracles need: the transform pair
    ``to_x``/``to_y``, the transformed drift and its derivative, the drift
    potential and its second derivative (both functions of ``(x, lam)``),
    the primitive ``W(x0, xT) = -(1/sigma^2) * integral of mu`` between two
    points, and optionally closed forms for the Gaussian averages of the
    potential used by the self-consistent solver.

    ``closed_form_smears``, when present, is a pair of callables
    ``(xbar, alpha, lam) -> value`` returning the Gaussian average of the
    potential and of its second derivative; they must agree with generic
    Gauss-Hermite smearing, which is always available as a fallback.
    """

    base: ShortRateModel
    sigma: float
    x_domain: tuple[float, float]
    to_x: Callable[[ArrayLike], ArrayLike]
    to_y: Callable[[ArrayLike], ArrayLike]
    drift: Callable[[ArrayLike], ArrayLike]
    drift_derivative: Callable[[ArrayLike], ArrayLike]
    rate_x: Callable[[ArrayLike], ArrayLike]
    potential: Callable[[ArrayLike, float], ArrayLike]
    potential_second: Callable[[ArrayLike, float], ArrayLike]
    drift_primitive: Callable[[ArrayLike, ArrayLike], ArrayLike]
    closed_form_smears: tuple[Callable, Callable] | None = None

    @property
    def name(self) -> str:
        return self.base.name

    @property
    def params(self) -> Mapping[str, float]:
        return self.base.params


def _check_domain(value: ArrayLike, domain: tuple[float, float], what: str) -> None:
    lo, hi = domain
    arr = np.asarray(value)
    if np.any(~((arr > lo) & (arr < hi))):
        raise DomainError(f"{what} outside open domain ({lo}, {hi})")


# ---------------------------------------------------------------------------
# Operations on models.  Thin wrappers over the callables stored on the
# dataclasses, adding domain checks; all accept scalars or arrays.
# ---------------------------------------------------------------------------


def lamperti_transform(model: TransformedModel, y: ArrayLike) -> ArrayLike:
    """Map a state ``y`` to the unit-volatility coordinate ``x = gamma(y)``.

    ``gamma(y) = sigma * integral dz / sigma_y(z)`` from the model's base
    point; strictly increasing on the state domain.
    """
    _check_domain(y, model.base.y_domain, "y")
    return model.to_x(y)


def lamperti_inverse(model: TransformedModel, x: ArrayLike) -> ArrayLike:
    """Inverse of :func:`lamperti_transform`."""
    _check_domain(x, model.x_domain, "x")
    return model.to_y(x)


def transformed_drift(model: TransformedModel, x: ArrayLike) -> ArrayLike:
    """Drift ``mu(x)`` of the transformed process ``dX = mu dt + sigma dW``."""
    return model.drift(x)


def drift_potential(model: TransformedModel, x: ArrayLike, lam: float) -> ArrayLike:
    """Drift potential ``V(x) = mu^2/(2 sigma^2) + mu'/2 + lam * r(x)``."""
    return model.potential(x, lam)


def drift_potential_curvature(model: TransformedModel, x: ArrayLike, lam: float) -> ArrayLike:
    """Second derivative ``V''(x)`` of the drift potential."""
    return model.potential_second(x, lam)


def drift_primitive(model: TransformedModel, x0: ArrayLike, x_t: ArrayLike) -> ArrayLike:
    """``W(x0, xT) = -(1/sigma^2) * integral of mu from x0 to xT``.

    Antisymmetric under swapping its endpoints.  The density in the
    transformed coordinate factorises as ``exp(-W) * (harmonic part)``.
    """
    return model.drift_primitive(x0, x_t)


def quadratic_rate_positivity(beta: float, gamma: float) -> dict[str, bool | float]:
    """Diagnostics for positivity of the quadratic rate map ``1 + beta*x + gamma*x^2``.

    Completing the square shows the map is positive definite iff ``gamma > 0``
    and ``beta^2 < 4*gamma``; an alternative criterion (``beta > 0`` and
    ``gamma^2 < 4*beta``) circulates and is reported alongside for
    comparison.  Neither condition blocks evaluation anywhere.
    """
    return {
        "discriminant": beta * beta - 4.0 * gamma,
        "positive_definite": gamma > 0.0 and beta * beta < 4.0 * gamma,
        "alternative_condition": beta > 0.0 and gamma * gamma < 4.0 * beta,
    }


# ---------------------------------------------------------------------------
# Built-in models
# ---------------------------------------------------------------------------


def _validate_core(a: float, sigma: float) -> None:
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if a <= 0.0:
        raise ValueError(f"mean-reversion speed a must be positive, got {a}")


def _generic_potential(model_drift, model_drift_derivative, rate_x, sigma):
    def potential(x, lam):
        mu = model_drift(x)
        return mu * mu / (2.0 * sigma * sigma) + 0.5 * model_drift_derivative(x) + lam * rate_x(x)

    return potential


def _ou_primitive(a: float, b: float, sigma: float):
    # integral of a*(b - x) is a*(b*x - x^2/2); W = -(1/sigma^2) * [...]
    def primitive(x0, x_t):
        return -(a / (sigma * sigma)) * (b * (x_t - x0) - 0.5 * (x_t * x_t - x0 * x0))

    return primitive


def vasicek(a: float, b: float, sigma: float) -> TransformedModel:
    """Ornstein-Uhlenbeck short rate: ``dX = a(b - X) dt + sigma dW``, ``r(x) = x``.

    The volatility is already constant, so the transform is the identity.
    """
    _validate_core(a, sigma)
    base = ShortRateModel(
        name="vasicek",
        params={"a": a, "b": b, "sigma": sigma},
        drift_y=lambda y: a * (b - y),
        vol_y=lambda y: np.full_like(np.asarray(y, dtype=float), sigma),
        rate_map=lambda y: y,
        y_domain=(-math.inf, math.inf),
        base_point=0.0,
    )
    identity = lambda v: np.asarray(v, dtype=float) + 0.0  # noqa: E731
    drift = lambda x: a * (b - x)  # noqa: E731
    drift_derivative = lambda x: np.full_like(np.asarray(x, dtype=float), -a)  # noqa: E731
    rate_x = identity
    s2 = sigma * sigma

    def smear_value(xbar, alpha, lam):
        # <<V>> for quadratic V: V(xbar) + V''/2 * alpha with V'' = a^2/sigma^2
        d = b - xbar
        return a * a * (d * d + alpha) / (2.0 * s2) - 0.5 * a + lam * xbar

    def smear_second(xbar, alpha, lam):
        return np.full_like(np.asarray(xbar, dtype=float), a * a / s2)

    return TransformedModel(
        base=base,
        sigma=sigma,
        x_domain=(-math.inf, math.inf),
        to_x=identity,
        to_y=identity,
        drift=drift,
        drift_derivative=drift_derivative,
        rate_x=rate_x,
        potential=_generic_potential(drift, drift_derivative, rate_x, sigma),
        potential_second=lambda x, lam: np.full_like(np.asarray(x, dtype=float), a * a / s2),
        drift_primitive=_ou_primitive(a, b, sigma),
        closed_form_smears=(smear_value, smear_second),
    )


def quadratic(a: float, b: float, sigma: float, beta: float, gamma: float) -> TransformedModel:
    """OU state with quadratic rate map ``r(x) = 1 + beta*x + gamma*x^2``.

    Positivity of the rate map is reported via
    :func:`quadratic_rate_positivity` and a warning, never enforced.
    """
    _validate_core(a, sigma)
    diag = quadratic_rate_positivity(beta, gamma)
    if not diag["positive_definite"]:
        warnings.warn(
            "quadratic rate map 1 + beta*x + gamma*x^2 is not positive definite "
            f"(beta={beta}, gamma={gamma}); proceeding anyway",
            RuntimeWarning,
            stacklevel=2,
        )
    base = ShortRateModel(
        name="quadratic",
        params={"a": a, "b": b, "sigma": sigma, "beta": beta, "gamma": gamma},
        drift_y=lambda y: a * (b - y),
        vol_y=lambda y: np.full_like(np.asarray(y, dtype=float), sigma),
        rate_map=lambda y: 1.0 + beta * y + gamma * y * y,
        y_domain=(-math.inf, math.inf),
        base_point=0.0,
    )
    identity = lambda v: np.asarray(v, dtype=float) + 0.0  # noqa: E731
    drift = lambda x: a * (b - x)  # noqa: E731
    drift_derivative = lambda x: np.full_like(np.asarray(x, dtype=float), -a)  # noqa: E731
    rate_x = lambda x: 1.0 + beta * x + gamma * x * x  # noqa: E731
    s2 = sigma * sigma

    def smear_value(xbar, alpha, lam):
        d = b - xbar
        quad_rate = 1.0 + beta * xbar + gamma * (xbar * xbar + alpha)
        return a * a * (d * d + alpha) / (2.0 * s2) - 0.5 * a + lam * quad_rate

    def smear_second(xbar, alpha, lam):
        return np.full_like(np.asarray(xbar, dtype=float), a * a / s2 + 2.0 * lam * gamma)

    return TransformedModel(
        base=base,
        sigma=sigma,
        x_domain=(-math.inf, math.inf),
        to_x=identity,
        to_y=identity,
        drift=drift,
        drift_derivative=drift_derivative,
        rate_x=rate_x,
        potential=_generic_potential(drift, drift_derivative, rate_x, sigma),
        potential_second=lambda x, lam: np.full_like(
            np.asarray(x, dtype=float), a * a / s2 + 2.0 * lam * gamma
        ),
        drift_primitive=_ou_primitive(a, b, sigma),
        closed_form_smears=(smear_value, smear_second),
    )


def black_karasinski(a: float, b: float, sigma: float) -> TransformedModel:
    """Lognormal short rate: OU state ``x`` with ``r(x) = exp(x)``.

    The state coordinate is already unit-volatility, so ``y = x`` and the
    rate is positive on the whole domain.
    """
    _validate_core(a, sigma)
    base = ShortRateModel(
        name="bk",
        params={"a": a, "b": b, "sigma": sigma},
        drift_y=lambda y: a * (b - y),
        vol_y=lambda y: np.full_like(np.asarray(y, dtype=float), sigma),
        rate_map=lambda y: np.exp(y),
        y_domain=(-math.inf, math.inf),
        base_point=0.0,
    )
    identity = lambda v: np.asarray(v, dtype=float) + 0.0  # noqa: E731
    drift = lambda x: a * (b - x)  # noqa: E731
    drift_derivative = lambda x: np.full_like(np.asarray(x, dtype=float), -a)  # noqa: E731
    rate_x = lambda x: np.exp(x)  # noqa: E731
    s2 = sigma * sigma

    def smear_value(xbar, alpha, lam):
        d = b - xbar
        return a * a * (d * d + alpha) / (2.0 * s2) - 0.5 * a + lam * np.exp(xbar + 0.5 * alpha)

    def smear_second(xbar, alpha, lam):
        return a * a / s2 + lam * np.exp(xbar + 0.5 * alpha)

    return TransformedModel(
        base=base,
        sigma=sigma,
        x_domain=(-math.inf, math.inf),
        to_x=identity,
        to_y=identity,
        drift=drift,
        drift_derivative=drift_derivative,
        rate_x=rate_x,
        potential=_generic_potential(drift, drift_derivative, rate_x, sigma),
        potential_second=lambda x, lam: a * a / s2 + lam * np.exp(x),
        drift_primitive=_ou_primitive(a, b, sigma),
        closed_form_smears=(smear_value, smear_second),
    )


def garch(a: float, b: float, sigma: float, base_point: float = 1.0) -> TransformedModel:
    """GARCH linear SDE ``dY = a(b - Y) dt + sigma * Y dW`` with ``r(y) = y``.

    The state is strictly positive; ``x = log(y / base_point)`` makes the
    volatility constant with drift ``mu(x) = a*b*exp(-x)/base_point - a -
    sigma^2/2``.  Densities are invariant under the base point (only
    differences of the transformed coordinate survive the Jacobian); the
    conventional choice ``base_point = 1`` gives ``x = log y``.  The drift
    potential is of Morse form, a combination of ``exp(-2x)``, ``exp(-x)``
    and ``exp(x)`` terms, so all Gaussian averages are available in closed
    form.
    """
    _validate_core(a, sigma)
    if b <= 0.0:
        raise ValueError(f"mean-reversion level b must be positive, got {b}")
    if base_point <= 0.0:
        raise ValueError(f"base_point must be positive, got {base_point}")
    base = ShortRateModel(
        name="garch",
        params={"a": a, "b": b, "sigma": sigma},
        drift_y=lambda y: a * (b - y),
        vol_y=lambda y: sigma * np.asarray(y, dtype=float),
        rate_map=lambda y: y,
        y_domain=(0.0, math.inf),
        base_point=base_point,
    )
    s2 = sigma * sigma
    c = a + 0.5 * s2        # constant part of the transformed drift
    bb = b / base_point     # level expressed in units of the base point
    drift = lambda x: a * bb * np.exp(-x) - c  # noqa: E731
    drift_derivative = lambda x: -a * bb * np.exp(-x)  # noqa: E731
    rate_x = lambda x: base_point * np.exp(x)  # noqa: E731

    def potential_second(x, lam):
        e1 = np.exp(-x)
        return (
            (2.0 * a * a * bb * bb / s2) * e1 * e1
            - (a * bb * (a + s2) / s2) * e1
            + lam * base_point * np.exp(x)
        )

    def primitive(x0, x_t):
        # integral of mu is -a*bb*exp(-x) - c*x
        return (a * bb * (np.exp(-x_t) - np.exp(-x0)) + c * (x_t - x0)) / s2

    def smear_value(xbar, alpha, lam):
        e1 = np.exp(-xbar + 0.5 * alpha)
        e2 = np.exp(-2.0 * xbar + 2.0 * alpha)
        e3 = np.exp(xbar + 0.5 * alpha)
        return (
            (a * a * bb * bb / (2.0 * s2)) * e2
            - (a * bb * (a + s2) / s2) * e1
            + c * c / (2.0 * s2)
            + lam * base_point * e3
        )

    def smear_second(xbar, alpha, lam):
        e1 = np.exp(-xbar + 0.5 * alpha)
        e2 = np.exp(-2.0 * xbar + 2.0 * alpha)
        e3 = np.exp(xbar + 0.5 * alpha)
        return (
            (2.0 * a * a * bb * bb / s2) * e2
            - (a * bb * (a + s2) / s2) * e1
            + lam * base_point * e3
        )

    return TransformedModel(
        base=base,
        sigma=sigma,
        x_domain=(-math.inf, math.inf),
        to_x=lambda y: np.log(y / base_point),
        to_y=lambda x: base_point * np.exp(x),
        drift=drift,
        drift_derivative=drift_derivative,
        rate_x=rate_x,
        potential=_generic_potential(drift, drift_derivative, rate_x, sigma),
        potential_second=potential_second,
        drift_primitive=primitive,
        closed_form_smears=(smear_value, smear_second),
    )


MODEL_BUILDERS: dict[str, Callable[..., TransformedModel]] = {
    "vasicek": vasicek,
    "quadratic": quadratic,
    "bk": black_karasinski,
    "garch": garch,
}


def build_model(name: str, params: Mapping[str, float]) -> TransformedModel:
    """Construct a built-in model from a flat parameter mapping.

    Expects keys ``a``, ``b``, ``sigma`` and, for the quadratic model,
    ``beta`` and ``gamma``.
    """
    if name not in MODEL_BUILDERS:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODEL_BUILDERS)}")
    required = ["a", "b", "sigma"] + (["beta", "gamma"] if name == "quadratic" else [])
    missing = [k for k in required if k not in params]
    if missing:
        raise ValueError(f"model {name!r} missing parameters {missing}")
    args = {k: float(params[k]) for k in required}
    return MODEL_BUILDERS[name](**args)
