"""Autoregressive modelling of stationary colored noise.

An AR(p) model n_k = sum_i psi_i n_{k-i} + e_k with white circularly
symmetric innovations e_k is fit to a measured autocorrelation sequence by
solving the Yule-Walker equations.  The Levinson-Durbin recursion is used,
which certifies stability for free through its reflection coefficients; a
dense Toeplitz solve is kept as a fallback.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.signal

__all__ = [
    "ArModel",
    "IllConditioned",
    "NonPositiveInnovation",
    "UnstableModel",
    "fit_yule_walker",
    "ar_autocorrelation",
    "generate_ar_noise",
]


class IllConditioned(ValueError):
    """The Yule-Walker system is too ill conditioned to solve reliably."""


class NonPositiveInnovation(ValueError):
    """The implied innovation variance is not strictly positive."""


class UnstableModel(ValueError):
    """The fitted AR polynomial has roots on or outside the unit circle."""


_STABILITY_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class ArModel:
    """AR(p) noise model: coeffs are (psi_1, ..., psi_p)."""

    order: int
    coeffs: np.ndarray
    innovation_var: float

    def __post_init__(self) -> None:
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if self.order == 0:
            coeffs = coeffs.reshape(0)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.shape != (self.order,):
            raise ValueError(f"expected {self.order} coefficients, got {coeffs.shape}")
        if self.innovation_var <= 0:
            raise NonPositiveInnovation(
                f"innovation variance must be > 0, got {self.innovation_var}"
            )

    def char_roots(self) -> np.ndarray:
        """Roots of z^p - psi_1 z^(p-1) - ... - psi_p."""
        if self.order == 0:
            return np.zeros(0)
        return np.roots(np.concatenate(([1.0], -self.coeffs)))

    def is_stable(self) -> bool:
        if self.order == 0:
            return True
        return bool(np.max(np.abs(self.char_roots())) < 1.0 - _STABILITY_MARGIN)

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.order,
                "coeffs": self.coeffs.tolist(),
                "innovation_var": self.innovation_var,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ArModel":
        d = json.loads(text)
        return cls(order=int(d["p"]), coeffs=np.asarray(d["coeffs"], dtype=float),
                   innovation_var=float(d["innovation_var"]))


def _levinson(gamma: np.ndarray) -> tuple[np.ndarray, float]:
    """Levinson-Durbin recursion on gamma[0..p]; returns (coeffs, innovation)."""
    p = len(gamma) - 1
    err = gamma[0]
    if err <= 0:
        raise NonPositiveInnovation(f"gamma[0] must be > 0, got {gamma[0]}")
    a = np.zeros(0)
    for m in range(1, p + 1):
        acc = gamma[m] - np.dot(a, gamma[m - 1 : 0 : -1]) if m > 1 else gamma[1]
        k = acc / err
        a = np.concatenate((a - k * a[::-1], [k]))
        err = err * (1.0 - k * k)
        if err <= 0:
            raise NonPositiveInnovation(
                f"innovation variance became non-positive at order {m} "
                f"(reflection coefficient {k})"
            )
    return a, float(err)


def fit_yule_walker(gamma: np.ndarray, cond_limit: float = 1e12) -> ArModel:
    """Fit an AR(len(gamma) - 1) model to autocorrelation lags gamma[0..p].

    Raises IllConditioned when the Toeplitz system's condition number exceeds
    ``cond_limit`` and NonPositiveInnovation when the implied innovation
    variance is not strictly positive.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1 or len(gamma) < 1:
        raise ValueError("gamma must be a 1-d sequence of lags 0..p")
    p = len(gamma) - 1
    if p == 0:
        return ArModel(order=0, coeffs=np.zeros(0), innovation_var=float(gamma[0]))

    toep = scipy.linalg.toeplitz(gamma[:p])
    cond = np.linalg.cond(toep)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditioned(f"Yule-Walker system condition {cond:.3e} exceeds {cond_limit:.1e}")

    try:
        coeffs, innovation = _levinson(gamma)
    except NonPositiveInnovation:
        raise
    except FloatingPointError:
        coeffs = np.linalg.solve(toep, gamma[1 : p + 1])
        innovation = float(gamma[0] - np.dot(coeffs, gamma[1 : p + 1]))
        if innovation <= 0:
            raise NonPositiveInnovation(
                f"innovation variance {innovation} is not positive"
            ) from None

    model = ArModel(order=p, coeffs=coeffs, innovation_var=innovation)
    if not model.is_stable():
        raise UnstableModel(
            f"characteristic roots reach modulus {np.max(np.abs(model.char_roots())):.12f}"
        )
    return model


def ar_autocorrelation(model: ArModel, max_lag: int) -> np.ndarray:
    """Stationary autocorrelation gamma[0..max_lag] implied by ``model``.

    Lags 0..p solve the stationary Yule-Walker system; further lags follow
    the AR recursion gamma[j] = sum_i psi_i gamma[j - i].
    """
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    p = model.order
    if p == 0:
        out = np.zeros(max_lag + 1)
        out[0] = model.innovation_var
        return out
    psi = model.coeffs
    # Unknowns gamma[0..p]; row j encodes gamma[j] - sum_i psi_i gamma[|j-i|].
    c = np.eye(p + 1)
    for j in range(p + 1):
        for i in range(1, p + 1):
            c[j, abs(j - i)] -= psi[i - 1]
    rhs = np.zeros(p + 1)
    rhs[0] = model.innovation_var
    head = np.linalg.solve(c, rhs)
    out = np.zeros(max_lag + 1)
    n = min(max_lag, p) + 1
    out[:n] = head[:n]
    for j in range(p + 1, max_lag + 1):
        out[j] = np.dot(psi, out[j - 1 : j - p - 1 : -1])
    return out


def generate_ar_noise(
    model: ArModel, length: int, rng: np.random.Generator, burn_in_factor: int = 100
) -> np.ndarray:
    """Draw ``length`` samples of the stationary AR process.

    Innovations are circularly symmetric complex Gaussian with total variance
    ``innovation_var``.  A burn-in of ``burn_in_factor * order`` samples is
    discarded so the output is (numerically) stationary.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    burn = burn_in_factor * model.order
    total = length + burn
    scale = np.sqrt(model.innovation_var / 2.0)
    innov = scale * (rng.standard_normal(total) + 1j * rng.standard_normal(total))
    if model.order == 0:
        return innov[burn:]
    a = np.concatenate(([1.0], -model.coeffs))
    out = scipy.signal.lfilter([1.0], a, innov)
    return out[burn:]
