"""Soft symbol mapping between bit LLRs and Gaussian symbol moments.

The equalizer works with per-symbol means and variances; the decoder works
with per-bit LLRs.  Both directions use the same Gaussian observation model
z = x + CN(0, v), which keeps the intrinsic-minus-prior subtraction
consistent: the prior side of the difference is recomputed through the
identical kernel instead of reusing the decoder's own numbers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import Constellation

__all__ = [
    "DEFAULT_LLR_CAP",
    "clip_llrs",
    "llr_to_prior",
    "moments_to_bit_llrs",
    "intrinsic_llr",
    "recalculated_prior_llr",
    "extrinsic_llr",
    "direct_extrinsic_llr",
    "ScalingPolicy",
]

DEFAULT_LLR_CAP = 30.0
_VAR_FLOOR_FRAC = 1e-8


def clip_llrs(llr: np.ndarray, cap: float = DEFAULT_LLR_CAP) -> np.ndarray:
    return np.clip(llr, -cap, cap)


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log(1 / (1 + exp(-x))), stable on both tails
    return -np.logaddexp(0.0, -x)


def llr_to_prior(llrs: np.ndarray, const: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Per-bit LLRs (symbol order, MSB first) -> symbol prior mean/variance.

    Input shape (..., N * l) for l bits per symbol; outputs are (..., N).
    Variances are floored at 1e-8 of the symbol energy so saturated priors
    stay usable downstream.
    """
    llrs = np.asarray(llrs, dtype=float)
    l = const.bits_per_symbol
    if llrs.shape[-1] % l:
        raise ValueError(f"LLR count {llrs.shape[-1]} not divisible by {l}")
    lam = llrs.reshape(*llrs.shape[:-1], -1, l)
    if const.name == "bpsk":
        root = np.sqrt(const.es)
        mean = root * np.tanh(lam[..., 0] / 2.0) + 0j
        var = const.es - np.abs(mean) ** 2
        return mean, np.maximum(var, _VAR_FLOOR_FRAC * const.es)
    # log prior of each point: sum over bits of log P(bit = label bit)
    logp = np.zeros((*lam.shape[:-1], len(const.points)))
    for q in range(l):
        lq = lam[..., q, None]
        bit0 = const.labels[:, q] == 0
        logp += np.where(bit0, _log_sigmoid(lq), _log_sigmoid(-lq))
    logp -= logp.max(axis=-1, keepdims=True)
    p = np.exp(logp)
    p /= p.sum(axis=-1, keepdims=True)
    mean = p @ const.points
    e2 = p @ (np.abs(const.points) ** 2)
    var = e2 - np.abs(mean) ** 2
    return mean, np.maximum(var, _VAR_FLOOR_FRAC * const.es)


def moments_to_bit_llrs(
    mean: np.ndarray,
    var: np.ndarray,
    const: Constellation,
) -> np.ndarray:
    """Bit LLRs of symbols observed as z = x + CN(0, v) with z = ``mean``.

    Returns shape (..., N * l), bits in symbol order, MSB first.
    """
    mean = np.asarray(mean)
    var = np.asarray(var, dtype=float)
    if const.name == "bpsk":
        out = 4.0 * np.sqrt(const.es) * mean.real / var
        return out.reshape(*mean.shape[:-1], -1) if mean.ndim > 1 else out
    scores = -(np.abs(mean[..., None] - const.points) ** 2) / var[..., None]
    l = const.bits_per_symbol
    out = np.empty((*mean.shape, l))
    for q in range(l):
        bit0 = const.labels[:, q] == 0
        s0 = _lse_last(np.where(bit0, scores, -np.inf))
        s1 = _lse_last(np.where(bit0, -np.inf, scores))
        out[..., q] = s0 - s1
    return out.reshape(*mean.shape[:-1], -1)


def _lse_last(a: np.ndarray) -> np.ndarray:
    hi = a.max(axis=-1, keepdims=True)
    return hi[..., 0] + np.log(np.sum(np.exp(a - hi), axis=-1))


def intrinsic_llr(mean: np.ndarray, var: np.ndarray, const: Constellation) -> np.ndarray:
    """Demap posterior symbol moments to bit LLRs."""
    return moments_to_bit_llrs(mean, var, const)


def recalculated_prior_llr(
    prior_mean: np.ndarray,
    prior_var: np.ndarray,
    const: Constellation,
) -> np.ndarray:
    """Bit LLRs the Gaussian-projected prior itself encodes.

    Running the prior moments through the same demapping kernel as the
    posterior makes the subtraction in ``extrinsic_llr`` self-consistent.
    """
    return moments_to_bit_llrs(prior_mean, prior_var, const)


def extrinsic_llr(
    post_mean: np.ndarray,
    post_var: np.ndarray,
    prior_mean: np.ndarray,
    prior_var: np.ndarray,
    const: Constellation,
    scale: float = 1.0,
    cap: float | None = DEFAULT_LLR_CAP,
) -> np.ndarray:
    """Scaled extrinsic bit LLRs with the prior recomputed from its moments."""
    out = scale * (
        intrinsic_llr(post_mean, post_var, const)
        - recalculated_prior_llr(prior_mean, prior_var, const)
    )
    return out if cap is None else clip_llrs(out, cap)


def direct_extrinsic_llr(
    post_mean: np.ndarray,
    post_var: np.ndarray,
    prior_llrs: np.ndarray,
    const: Constellation,
    scale: float = 1.0,
    cap: float | None = DEFAULT_LLR_CAP,
) -> np.ndarray:
    """Conventional rule: subtract the decoder-supplied prior LLRs as-is."""
    out = scale * (intrinsic_llr(post_mean, post_var, const) - np.asarray(prior_llrs))
    return out if cap is None else clip_llrs(out, cap)


@dataclass(frozen=True)
class ScalingPolicy:
    """Per-iteration damping of the exchanged extrinsic LLRs.

    Scalars apply to every iteration; sequences index by iteration and hold
    their last value afterwards.  Values must sit in (0, 2].
    """

    equalizer: float | Sequence[float] = 1.0
    decoder: float | Sequence[float] = 1.0

    def __post_init__(self) -> None:
        for raw in (self.equalizer, self.decoder):
            vals = [raw] if np.isscalar(raw) else list(raw)
            if not vals or any(not 0.0 < float(v) <= 2.0 for v in vals):
                raise ValueError("scale factors must lie in (0, 2]")

    def _at(self, raw, iteration: int) -> float:
        if np.isscalar(raw):
            return float(raw)
        seq = list(raw)
        return float(seq[min(iteration, len(seq) - 1)])

    def eq_scale(self, iteration: int) -> float:
        return self._at(self.equalizer, iteration)

    def dec_scale(self, iteration: int) -> float:
        return self._at(self.decoder, iteration)
