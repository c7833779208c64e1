"""Terminated convolutional coding, log-MAP APP decoding, and interleaving.

The decoder is a standard BCJR over the code trellis, batched over frames.
LLR convention everywhere: L = log P(bit = 0) - log P(bit = 1), so L > 0
means bit 0 is more likely.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvCode",
    "conv_encode",
    "app_decode",
    "Interleaver",
    "random_interleaver",
]

_NEG = -1e30  # effective log(0); never -inf so arithmetic stays NaN-free


@dataclass(frozen=True, eq=False)
class ConvCode:
    """Rate 1/n feedforward convolutional code, terminated with a zero tail.

    ``generators`` are the octal generator polynomials as plain integers
    (e.g. 0o7 = 1 + D + D^2, MSB multiplies the current input bit).
    """

    memory: int
    generators: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        top = 1 << (self.memory + 1)
        for g in self.generators:
            if not 0 < g < top:
                raise ValueError(f"generator {g:o} does not fit constraint length {self.memory + 1}")

    @classmethod
    def from_spec(cls, text: str) -> "ConvCode":
        """Parse "7,5" style octal generator lists; memory from the largest one."""
        gens = tuple(int(part.strip(), 8) for part in text.split(","))
        if not gens:
            raise ValueError("empty generator list")
        memory = max(g.bit_length() for g in gens) - 1
        return cls(memory=memory, generators=gens)

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    def n_coded(self, n_info: int) -> int:
        """Coded bits per frame including the tail."""
        return (n_info + self.memory) * self.n_out

    def trellis(self) -> "_Trellis":
        return _trellis_cache(self)


@dataclass(frozen=True, eq=False)
class _Trellis:
    next_state: np.ndarray  # (S, 2) int
    out_bits: np.ndarray    # (S, 2, n) uint8
    prev_state: np.ndarray  # (S, 2) int
    prev_input: np.ndarray  # (S, 2) int
    out_sign: np.ndarray    # (S, 2, n) float, +1 for bit 0 / -1 for bit 1


_TRELLISES: dict[tuple[int, tuple[int, ...]], _Trellis] = {}


def _trellis_cache(code: ConvCode) -> _Trellis:
    key = (code.memory, code.generators)
    hit = _TRELLISES.get(key)
    if hit is not None:
        return hit
    m, n = code.memory, code.n_out
    s_count = 1 << m
    next_state = np.zeros((s_count, 2), dtype=np.int64)
    out_bits = np.zeros((s_count, 2, n), dtype=np.uint8)
    for s in range(s_count):
        for u in (0, 1):
            reg = (u << m) | s  # [u_t, u_{t-1}, ..., u_{t-m}]
            next_state[s, u] = reg >> 1
            for j, g in enumerate(code.generators):
                out_bits[s, u, j] = bin(reg & g).count("1") & 1
    prev_state = np.zeros((s_count, 2), dtype=np.int64)
    prev_input = np.zeros((s_count, 2), dtype=np.int64)
    seen = np.zeros(s_count, dtype=np.int64)
    for s in range(s_count):
        for u in (0, 1):
            ns = next_state[s, u]
            prev_state[ns, seen[ns]] = s
            prev_input[ns, seen[ns]] = u
            seen[ns] += 1
    if not np.all(seen == 2):
        raise ValueError("trellis is not binary-regular; bad generator set")
    tr = _Trellis(
        next_state=next_state,
        out_bits=out_bits,
        prev_state=prev_state,
        prev_input=prev_input,
        out_sign=1.0 - 2.0 * out_bits.astype(float),
    )
    _TRELLISES[key] = tr
    return tr


def conv_encode(bits: np.ndarray, code: ConvCode) -> np.ndarray:
    """Encode info bits (last axis) with a zero tail appended.

    Output interleaves the generator streams per step: the coded vector is
    c[t * n + j] = output j at trellis step t, length (K + m) * n.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    m, n = code.memory, code.n_out
    pad = np.zeros((*bits.shape[:-1], m), dtype=np.uint8)
    u = np.concatenate([bits, pad], axis=-1)
    steps = u.shape[-1]
    out = np.zeros((*u.shape[:-1], steps, n), dtype=np.uint8)
    for j, g in enumerate(code.generators):
        acc = np.zeros_like(u)
        for i in range(m + 1):
            if (g >> (m - i)) & 1:
                if i == 0:
                    acc ^= u
                else:
                    acc[..., i:] ^= u[..., : steps - i]
        out[..., j] = acc
    return out.reshape(*u.shape[:-1], steps * n)


def _lse(a: np.ndarray, b: np.ndarray, max_log: bool) -> np.ndarray:
    return np.maximum(a, b) if max_log else np.logaddexp(a, b)


def app_decode(
    llr_coded: np.ndarray,
    code: ConvCode,
    n_info: int,
    max_log: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """APP decode coded-bit LLRs, batched over leading axis.

    Returns ``(info_llr, coded_extrinsic)``: posterior LLRs of the K info
    bits and extrinsic LLRs (posterior minus input) of all (K + m) * n coded
    bits.  The zero tail is enforced through the branch metrics, and the
    trellis starts and ends in state 0.
    """
    llr = np.atleast_2d(np.asarray(llr_coded, dtype=float))
    squeeze = np.asarray(llr_coded).ndim == 1
    m, n = code.memory, code.n_out
    steps = n_info + m
    if llr.shape[-1] != steps * n:
        raise ValueError(f"expected {steps * n} coded LLRs, got {llr.shape[-1]}")
    batch = llr.shape[0]
    llr3 = llr.reshape(batch, steps, n)
    tr = code.trellis()
    s_count = tr.next_state.shape[0]

    # gamma[b, t, s, u] = 0.5 * sum_j sign(c_j) * L[b, t, j], tail forces u = 0
    gamma = 0.5 * np.einsum("suj,btj->btsu", tr.out_sign, llr3)
    gamma[:, n_info:, :, 1] = _NEG

    alpha = np.full((batch, steps + 1, s_count), _NEG)
    alpha[:, 0, 0] = 0.0
    for t in range(steps):
        cand = alpha[:, t][:, tr.prev_state] + gamma[:, t][:, tr.prev_state, tr.prev_input]
        nxt = _lse(cand[..., 0], cand[..., 1], max_log)
        nxt -= nxt.max(axis=-1, keepdims=True)
        alpha[:, t + 1] = nxt

    info_llr = np.empty((batch, n_info))
    post = np.empty((batch, steps, n))
    beta = np.full((batch, s_count), _NEG)
    beta[:, 0] = 0.0
    flat_bits = tr.out_bits.reshape(s_count * 2, n)
    for t in range(steps - 1, -1, -1):
        nb = beta[:, tr.next_state]                      # (B, S, 2)
        branch = alpha[:, t][:, :, None] + gamma[:, t] + nb
        if t < n_info:
            l0 = branch[:, :, 0]
            l1 = branch[:, :, 1]
            info_llr[:, t] = _reduce(l0, max_log) - _reduce(l1, max_log)
        bf = branch.reshape(batch, s_count * 2)
        for j in range(n):
            mask0 = flat_bits[:, j] == 0
            p0 = _reduce(np.where(mask0, bf, _NEG), max_log)
            p1 = _reduce(np.where(mask0, _NEG, bf), max_log)
            post[:, t, j] = p0 - p1
        beta = _lse(nb[..., 0] + gamma[:, t][..., 0], nb[..., 1] + gamma[:, t][..., 1], max_log)
        beta -= beta.max(axis=-1, keepdims=True)

    extrinsic = post.reshape(batch, steps * n) - llr
    if squeeze:
        return info_llr[0], extrinsic[0]
    return info_llr, extrinsic


def _reduce(a: np.ndarray, max_log: bool) -> np.ndarray:
    if max_log:
        return a.max(axis=-1)
    # logsumexp over the last axis without scipy: stable shift
    hi = a.max(axis=-1, keepdims=True)
    return hi[..., 0] + np.log(np.sum(np.exp(a - hi), axis=-1))


@dataclass(frozen=True, eq=False)
class Interleaver:
    """Fixed permutation: interleaved[i] = plain[perm[i]]."""

    perm: np.ndarray

    def __post_init__(self) -> None:
        perm = np.asarray(self.perm, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "_inv", np.argsort(perm))
        if not np.array_equal(np.sort(perm), np.arange(len(perm))):
            raise ValueError("perm is not a permutation")

    @property
    def n(self) -> int:
        return len(self.perm)

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return np.take(x, self.perm, axis=-1)

    def deinterleave(self, x: np.ndarray) -> np.ndarray:
        return np.take(x, self._inv, axis=-1)


def random_interleaver(n: int, rng: np.random.Generator) -> Interleaver:
    return Interleaver(perm=rng.permutation(n))
