"""Root-raised-cosine pulses, ISI tap profiles, and matched-filter noise statistics.

Time is measured in units of the orthogonal symbol period (T = 1), so a
faster-than-Nyquist system signals every ``tau`` time units with ``tau < 1``.
Tap profiles are computed by Riemann-sum quadrature of the pulse
autocorrelation on a grid commensurate with the signalling interval, so lag
shifts are exact sample shifts.  That keeps profiles exactly symmetric and
their Toeplitz matrices positive semidefinite up to rounding, and it is the
same discretization the channel simulator uses to draw matched-filter noise.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PulseSpec",
    "IsiProfile",
    "NoiseAutocorr",
    "rrc_amplitude",
    "sampled_pulse",
    "taps_from_samples",
    "isi_taps",
    "noise_autocorr",
]


@dataclass(frozen=True)
class PulseSpec:
    """Root-raised-cosine pulse description.

    alpha: roll-off in [0, 1].
    half_span: one-sided truncation length in symbol periods T.
    oversampling: target samples per T for numerical integration.
    """

    alpha: float = 0.3
    half_span: int = 8
    oversampling: int = 16

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"roll-off must be in [0, 1], got {self.alpha}")
        if self.half_span < 1:
            raise ValueError(f"half_span must be >= 1, got {self.half_span}")
        if self.oversampling < 2:
            raise ValueError(f"oversampling must be >= 2, got {self.oversampling}")


def rrc_amplitude(spec: PulseSpec, t) -> np.ndarray:
    """Unit-energy root-raised-cosine amplitude at time ``t`` (units of T).

    Evaluates the closed form with the removable singularities at t = 0 and
    |t| = 1/(4 alpha) replaced by their limits.  The pulse is evaluated at
    |t| so evenness holds bit-exactly.
    """
    a = float(spec.alpha)
    t = np.abs(np.asarray(t, dtype=float))
    if a == 0.0:
        return np.sinc(t)

    ts = 1.0 / (4.0 * a)
    # Relative tolerance wide enough that grid points that should hit the
    # singular abscissa but missed it by rounding still take the limit value.
    at_zero = t < 1e-10
    at_sing = np.abs(t - ts) < 1e-8 * max(1.0, ts)
    regular = ~(at_zero | at_sing)

    out = np.empty_like(t)
    out[at_zero] = 1.0 - a + 4.0 * a / np.pi
    out[at_sing] = (a / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * a))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * a))
    )
    tr = t[regular]
    num = np.sin(np.pi * tr * (1.0 - a)) + 4.0 * a * tr * np.cos(np.pi * tr * (1.0 + a))
    den = np.pi * tr * (1.0 - (4.0 * a * tr) ** 2)
    out[regular] = num / den
    return out


def sampled_pulse(spec: PulseSpec, tau: float) -> tuple[np.ndarray, float, int]:
    """Truncated pulse sampled on a grid commensurate with ``tau``.

    Returns ``(samples, dt, n_sub)`` where ``n_sub = tau / dt`` is an integer,
    the grid is symmetric about t = 0, and the samples are normalized to unit
    energy under Riemann-sum quadrature (so the lag-0 tap is exactly 1).
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    n_sub = max(1, round(spec.oversampling * tau))
    dt = tau / n_sub
    m = int(np.floor(spec.half_span / dt + 1e-9))
    grid = np.arange(-m, m + 1) * dt
    p = rrc_amplitude(spec, grid)
    p = p / np.sqrt(dt * np.sum(p * p))
    return p, dt, n_sub


@dataclass(frozen=True, eq=False)
class IsiProfile:
    """Symmetric ISI tap profile h[-L..L] of a matched-filter FTN channel."""

    tau: float
    half_length: int
    taps: np.ndarray

    def __post_init__(self) -> None:
        taps = np.asarray(self.taps, dtype=float)
        object.__setattr__(self, "taps", taps)
        L = self.half_length
        if taps.shape != (2 * L + 1,):
            raise ValueError(f"expected {2 * L + 1} taps, got shape {taps.shape}")
        if abs(taps[L] - 1.0) > 1e-6:
            raise ValueError(f"center tap must be 1 within 1e-6, got {taps[L]!r}")
        if not np.array_equal(taps, taps[::-1]):
            raise ValueError("tap profile must be exactly symmetric")

    @property
    def center(self) -> int:
        return self.half_length

    def one_sided(self) -> np.ndarray:
        """Taps h[0..L]."""
        return self.taps[self.half_length :]

    def toeplitz(self, n: int) -> np.ndarray:
        """Dense n-by-n Toeplitz matrix with entries h[j - i]."""
        idx = np.arange(n)
        lag = idx[None, :] - idx[:, None]
        out = np.zeros((n, n))
        mask = np.abs(lag) <= self.half_length
        out[mask] = self.taps[lag[mask] + self.half_length]
        return out

    def to_json(self) -> str:
        return json.dumps(
            {"tau": self.tau, "L": self.half_length, "taps": self.taps.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "IsiProfile":
        d = json.loads(text)
        return cls(tau=float(d["tau"]), half_length=int(d["L"]),
                   taps=np.asarray(d["taps"], dtype=float))


@dataclass(frozen=True, eq=False)
class NoiseAutocorr:
    """One-sided autocorrelation gamma[0..K] of the matched-filter noise."""

    n0: float
    lags: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lags", np.asarray(self.lags, dtype=float))

    @property
    def max_lag(self) -> int:
        return len(self.lags) - 1


def taps_from_samples(samples: np.ndarray, dt: float, tau: float, half_length: int) -> np.ndarray:
    """Taps h[-L..L] from an arbitrary sampled pulse by lag correlation.

    ``tau / dt`` must be (numerically) an integer so every lag lands on the
    grid.  The samples are used as given; normalize beforehand if a unit
    center tap is wanted.
    """
    samples = np.asarray(samples, dtype=float)
    n_sub_f = tau / dt
    n_sub = round(n_sub_f)
    if n_sub < 1 or abs(n_sub_f - n_sub) > 1e-9:
        raise ValueError(f"tau/dt = {n_sub_f} is not an integer lag shift")
    full = np.correlate(samples, samples, mode="full") * dt
    c = len(samples) - 1
    taps = np.zeros(2 * half_length + 1)
    for k in range(half_length + 1):
        off = k * n_sub
        val = full[c + off] if off <= c else 0.0
        taps[half_length + k] = val
        taps[half_length - k] = val
    return taps


def isi_taps(spec: PulseSpec, tau: float, half_length: int) -> IsiProfile:
    """ISI profile of ``spec`` at signalling interval ``tau`` T.

    h[k] is the Riemann-sum approximation of the pulse autocorrelation at lag
    k tau T, computed from the truncated pulse normalized so h[0] = 1.
    """
    if half_length < 0:
        raise ValueError(f"half_length must be >= 0, got {half_length}")
    if half_length * tau >= 2.0 * spec.half_span:
        warnings.warn(
            "requested lags extend past the truncated pulse support; "
            "the profile tail is identically zero",
            stacklevel=2,
        )
    p, dt, _ = sampled_pulse(spec, tau)
    taps = taps_from_samples(p, dt, tau, half_length)
    return IsiProfile(tau=tau, half_length=half_length, taps=taps)


def noise_autocorr(profile: IsiProfile, n0: float, max_lag: int | None = None) -> NoiseAutocorr:
    """Autocorrelation of matched-filter noise: gamma[k] = N0 h[k].

    Lags beyond the profile's half length are zero (truncated support).
    """
    if n0 < 0:
        raise ValueError(f"noise level must be >= 0, got {n0}")
    if max_lag is None:
        max_lag = profile.half_length
    lags = np.zeros(max_lag + 1)
    avail = min(max_lag, profile.half_length)
    lags[: avail + 1] = n0 * profile.one_sided()[: avail + 1]
    return NoiseAutocorr(n0=n0, lags=lags)
