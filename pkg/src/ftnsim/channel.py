"""Constellations, banded ISI channels, and matched-filter noise simulation.

The link is simulated at the matched-filter output level: a block of N
symbols produces N samples r = H x + n where H is the banded Toeplitz matrix
of the tap profile and n is stationary noise.  In ``exact`` mode n has
covariance N0 times the tap Toeplitz matrix (drawn through a banded Cholesky
factor); in ``ar`` mode n follows a given AR model, which is what the
reduced equalizer assumes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.signal

from .pulse import IsiProfile, NoiseAutocorr

__all__ = [
    "Constellation",
    "constellation",
    "modulate",
    "hard_demap",
    "build_convolution_matrix",
    "apply_channel_taps",
    "ColoredNoiseFactor",
    "colored_noise_factor",
    "MatchedNoiseSampler",
    "FactorizationError",
    "ReceivedBlock",
    "simulate_block",
]

_EIG_FLOOR = 1e-12


class FactorizationError(np.linalg.LinAlgError):
    """Noise covariance could not be factorized (not PSD beyond tolerance)."""


@dataclass(frozen=True, eq=False)
class Constellation:
    """Complex constellation with Gray bit labels.

    ``points[i]`` carries label ``labels[i]`` (bits, MSB first within the
    symbol).  Mean energy equals ``es``.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray
    es: float = 1.0

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=complex)
        labels = np.asarray(self.labels, dtype=np.uint8)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        m, l = labels.shape
        if points.shape != (m,) or m != 2 ** l:
            raise ValueError("labels must enumerate all bit patterns of the points")
        if abs(np.mean(np.abs(points) ** 2) - self.es) > 1e-9 * self.es:
            raise ValueError("constellation energy does not match es")

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    def bit_index(self) -> np.ndarray:
        """Integer value of each label (for table lookups)."""
        l = self.bits_per_symbol
        return self.labels.dot(1 << np.arange(l)[::-1]).astype(np.int64)

    def zero_masks(self) -> np.ndarray:
        """Boolean (l, M) masks selecting points whose bit q equals 0."""
        return (self.labels.T == 0)


def _pam_gray_rec(bits: tuple[int, ...]) -> int:
    """Gray-labelled PAM: bits (MSB first) -> odd level in {+-1, ..., +-(2^k - 1)}.

    Level index i gets label gray(i) = i ^ (i >> 1), so neighbouring
    amplitudes differ in exactly one bit; here the label is decoded back.
    """
    g = 0
    for b in bits:
        g = (g << 1) | int(b)
    i = g
    m = g >> 1
    while m:
        i ^= m
        m >>= 1
    return (2 ** len(bits) - 1) - 2 * i


def constellation(name: str, es: float = 1.0) -> Constellation:
    """Factory for bpsk / qpsk / 16qam / 64qam with Gray labelling.

    Square QAM splits the label bits alternately between I (even positions)
    and Q (odd positions), each dimension reflected-Gray coded.
    """
    key = name.lower()
    if key == "bpsk":
        points = np.sqrt(es) * np.array([1.0 + 0j, -1.0 + 0j])
        labels = np.array([[0], [1]], dtype=np.uint8)
        return Constellation(name=key, points=points, labels=labels, es=es)
    sizes = {"qpsk": 2, "16qam": 4, "64qam": 6}
    if key not in sizes:
        raise ValueError(f"unknown constellation {name!r}")
    l = sizes[key]
    m = 2 ** l
    labels = ((np.arange(m)[:, None] >> np.arange(l)[::-1]) & 1).astype(np.uint8)
    raw = np.empty(m, dtype=complex)
    for i in range(m):
        bi = tuple(int(b) for b in labels[i, 0::2])
        bq = tuple(int(b) for b in labels[i, 1::2])
        raw[i] = _pam_gray_rec(bi) + 1j * _pam_gray_rec(bq)
    norm = np.sqrt(np.mean(np.abs(raw) ** 2) / es)
    return Constellation(name=key, points=raw / norm, labels=labels, es=es)


def modulate(bits: np.ndarray, const: Constellation) -> np.ndarray:
    """Map bits (last axis, length divisible by bits/symbol) to symbols."""
    bits = np.asarray(bits)
    l = const.bits_per_symbol
    if bits.shape[-1] % l:
        raise ValueError(f"bit count {bits.shape[-1]} not divisible by {l}")
    groups = bits.reshape(*bits.shape[:-1], -1, l)
    idx = groups.dot(1 << np.arange(l)[::-1]).astype(np.int64)
    # labels enumerate patterns in binary order already
    order = np.argsort(const.bit_index())
    return const.points[order][idx]


def hard_demap(symbols: np.ndarray, const: Constellation) -> np.ndarray:
    """Nearest-point decision back to bits (inverse of modulate, no noise)."""
    symbols = np.asarray(symbols, dtype=complex)
    d2 = np.abs(symbols[..., None] - const.points) ** 2
    idx = np.argmin(d2, axis=-1)
    out = const.labels[idx]
    return out.reshape(*symbols.shape[:-1], -1) if symbols.ndim > 1 else out.reshape(-1)


def build_convolution_matrix(taps: np.ndarray, dmin: int, n: int) -> np.ndarray:
    """Dense n-by-n banded Toeplitz H with H[i, j] = taps[j - i - dmin].

    ``taps`` covers relative lags dmin..dmin+len(taps)-1 of the model
    r_k = sum_d taps[d - dmin] x_{k+d}; symbols outside the block are zero.
    """
    taps = np.asarray(taps)
    idx = np.arange(n)
    lag = idx[None, :] - idx[:, None] - dmin
    out = np.zeros((n, n), dtype=taps.dtype)
    mask = (lag >= 0) & (lag < len(taps))
    out[mask] = taps[lag[mask]]
    return out


def apply_channel_taps(x: np.ndarray, taps: np.ndarray, dmin: int) -> np.ndarray:
    """Banded Toeplitz matvec r_k = sum_d taps[d-dmin] x_{k+d} (batched on axis -1)."""
    x = np.asarray(x)
    taps = np.asarray(taps)
    dmax = dmin + len(taps) - 1
    if dmin > 0 or dmax < 0:
        raise ValueError("tap window must include relative lag 0")
    rev = taps[::-1]
    if x.ndim == 1:
        full = np.convolve(x, rev)
    else:
        full = scipy.signal.fftconvolve(x, rev[None, :], axes=-1)
    return full[..., dmax : dmax + x.shape[-1]]


@dataclass(frozen=True, eq=False)
class ColoredNoiseFactor:
    """Upper banded Cholesky factor U of a unit-level Toeplitz covariance.

    Scaled samples ``sqrt(n0) * (U^H w)`` with white unit-variance w have
    covariance n0 * (Toeplitz + jitter).
    """

    band: np.ndarray  # scipy upper-banded storage, shape (bw + 1, n)
    bw: int
    n: int
    jitter: float

    def sample(self, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
        shape = (self.n,) if batch is None else (batch, self.n)
        w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        return self.multiply(w)

    def multiply(self, w: np.ndarray) -> np.ndarray:
        """U^H w for white input w (last axis length n)."""
        out = np.zeros_like(w, dtype=complex)
        u = self.bw
        for d in range(self.bw + 1):
            # n_j += conj(U[j-d, j]) * w_{j-d}
            out[..., d:] += np.conj(self.band[u - d, d:]) * w[..., : self.n - d]
        return out


@dataclass(frozen=True, eq=False)
class MatchedNoiseSampler:
    """Matched-filter noise: white noise filtered by the pulse, subsampled.

    Samples have covariance exactly Toeplitz(h) at unit level, where h is
    the discrete pulse autocorrelation used for the tap profile.  Being a
    Gram form this is PSD by construction, so it works for deep compression
    where a truncated lag window would go indefinite.
    """

    pulse: np.ndarray
    dt: float
    n_sub: int
    n: int

    @classmethod
    def from_pulse(cls, spec, tau: float, n: int) -> "MatchedNoiseSampler":
        from .pulse import sampled_pulse

        p, dt, n_sub = sampled_pulse(spec, tau)
        return cls(pulse=p, dt=dt, n_sub=n_sub, n=n)

    def sample(self, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
        fine = len(self.pulse) + (self.n - 1) * self.n_sub
        shape = (fine,) if batch is None else (batch, fine)
        w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        if w.ndim == 1:
            full = np.convolve(w, self.pulse[::-1], mode="valid")
        else:
            full = scipy.signal.fftconvolve(w, self.pulse[None, ::-1], axes=-1, mode="valid")
        return np.sqrt(self.dt) * full[..., :: self.n_sub]


def colored_noise_factor(lags: np.ndarray, n: int) -> ColoredNoiseFactor:
    """Banded Cholesky factor of the Toeplitz matrix of one-sided ``lags``.

    Semidefinite cases get a diagonal jitter of 1e-12 times the lag-0 value;
    a genuinely indefinite sequence raises FactorizationError with the
    offending eigenvalue.
    """
    lags = np.asarray(lags, dtype=float)
    bw = min(len(lags) - 1, n - 1)
    ab = np.zeros((bw + 1, n))
    for d in range(bw + 1):
        ab[bw - d, d:] = lags[d]
    jitter = 0.0
    try:
        band = scipy.linalg.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError:
        jitter = _EIG_FLOOR * lags[0]
        ab2 = ab.copy()
        ab2[bw, :] += jitter
        try:
            band = scipy.linalg.cholesky_banded(ab2, lower=False)
        except np.linalg.LinAlgError:
            low = scipy.linalg.eigvals_banded(ab, lower=False, select="i", select_range=(0, 0))
            raise FactorizationError(
                f"noise covariance is not PSD: smallest eigenvalue {low[0]:.6e}"
            ) from None
    return ColoredNoiseFactor(band=band, bw=bw, n=n, jitter=jitter)


@dataclass(eq=False)
class ReceivedBlock:
    """Matched-filter samples of one block plus the metadata used to make them."""

    samples: np.ndarray
    n: int
    n0: float
    noise_mode: str
    taps: np.ndarray
    dmin: int
    tau: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "samples": [[float(z.real), float(z.imag)] for z in self.samples],
                "n": self.n,
                "n0": self.n0,
                "noise_mode": self.noise_mode,
                "taps": np.asarray(self.taps, dtype=float).tolist(),
                "dmin": self.dmin,
                "tau": self.tau,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ReceivedBlock":
        d = json.loads(text)
        samples = np.array([complex(re, im) for re, im in d["samples"]])
        return cls(
            samples=samples,
            n=int(d["n"]),
            n0=float(d["n0"]),
            noise_mode=str(d["noise_mode"]),
            taps=np.asarray(d["taps"], dtype=float),
            dmin=int(d["dmin"]),
            tau=d.get("tau"),
        )


def simulate_block(
    symbols: np.ndarray,
    profile: IsiProfile,
    n0: float,
    rng: np.random.Generator,
    noise_mode: str = "exact",
    ar=None,
    sampler=None,
) -> ReceivedBlock:
    """One block through the matched-filter channel.

    ``exact`` draws noise with covariance N0 Toeplitz(h) through ``sampler``
    (a MatchedNoiseSampler, or any object with a compatible ``sample``; by
    default a banded Cholesky factor of the profile lags, which requires
    them to be PSD).  ``ar`` draws the stationary AR process of ``ar``
    (whose innovation variance already includes the noise level).
    """
    symbols = np.asarray(symbols, dtype=complex)
    n = len(symbols)
    sig = apply_channel_taps(symbols, profile.taps, -profile.half_length)
    if noise_mode == "exact":
        if sampler is None:
            sampler = colored_noise_factor(profile.one_sided(), n)
        noise = np.sqrt(n0) * sampler.sample(rng)
    elif noise_mode == "ar":
        if ar is None:
            raise ValueError("ar noise mode needs an ArModel")
        from .arfit import generate_ar_noise

        noise = generate_ar_noise(ar, n, rng)
    else:
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    return ReceivedBlock(
        samples=sig + noise,
        n=n,
        n0=n0,
        noise_mode=noise_mode,
        taps=profile.taps,
        dmin=-profile.half_length,
        tau=profile.tau,
    )
