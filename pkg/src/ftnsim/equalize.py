"""Soft-input soft-output LMMSE equalizers for ISI channels with colored noise.

Two implementations of the same Gaussian inference problem:

* ``ilmmse_equalize`` conditions on the whole block at once (dense or banded
  linear algebra, cost grows like N^2 or worse).

* ``rilmmse_equalize`` runs a forward/backward sweep over a sliding state
  that stacks the symbol window covered by the taps and the last p noise
  samples of an AR(p) noise model.  The new noise sample never gets its own
  process-noise term: given the observation r_k and the symbol window it is
  determined exactly, which is what keeps the state small and the inference
  exact whenever the noise really is AR(p).  Cost grows linearly in N.

Both return posterior symbol moments; priors are per-symbol independent
Gaussians, and symbols outside the block are treated as known zeros.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .arfit import ArModel, ar_autocorrelation
from .channel import apply_channel_taps, build_convolution_matrix

__all__ = [
    "EqualizeResult",
    "StateMatrices",
    "build_state_matrices",
    "rilmmse_equalize",
    "ilmmse_equalize",
    "complexity_probe",
]

_VAR_FLOOR_FRAC = 1e-10
_RIDGE = 1e-10


@dataclass(eq=False)
class EqualizeResult:
    """Posterior symbol moments plus numerical-health counters."""

    mean: np.ndarray
    var: np.ndarray
    floored: int = 0  # posterior variances clamped at the floor
    ridged: int = 0   # combine solves that needed a diagonal ridge


@dataclass(frozen=True, eq=False)
class StateMatrices:
    """Dense matrices of the sliding-window chain (for cross-checks).

    State = [x_{k-Lm} ... x_{k+Lp}, n_{k-p} ... n_{k-1}];
    next = transition @ state + input_symbol * x_new + input_sample * r_k,
    r_k = observation @ state + e_k with innovation variance of the AR model.
    """

    transition: np.ndarray
    observation: np.ndarray
    input_symbol: np.ndarray
    input_sample: np.ndarray
    window: int
    order: int


def build_state_matrices(taps: np.ndarray, dmin: int, ar: ArModel) -> StateMatrices:
    taps = np.asarray(taps, dtype=float)
    wh = len(taps)
    lm, lp = -dmin, dmin + wh - 1
    if lm < 0 or lp < 0:
        raise ValueError("tap window must include relative lag 0")
    p = ar.order
    dim = wh + p
    hbar = np.concatenate([taps, ar.coeffs[::-1]]) if p else taps.copy()
    m = np.zeros((dim, dim))
    for i in range(wh - 1):
        m[i, i + 1] = 1.0
    for j in range(p - 1):
        m[wh + j, wh + j + 1] = 1.0
    f1 = np.zeros(dim)
    f1[wh - 1] = 1.0
    f2 = np.zeros(dim)
    if p:
        # n_k = r_k - taps . symbol window, substituted from the observation
        m[dim - 1, :wh] = -taps
        f2[dim - 1] = 1.0
    return StateMatrices(
        transition=m,
        observation=hbar,
        input_symbol=f1,
        input_sample=f2,
        window=wh,
        order=p,
    )


class _Chain:
    """Batched forward/backward message passing over the sliding state."""

    def __init__(self, taps, dmin, ar, r, pm, pv, chunk):
        self.taps = np.asarray(taps, dtype=float)
        self.wh = len(self.taps)
        self.lm = -dmin
        self.lp = dmin + self.wh - 1
        if self.lm < 0 or self.lp < 0:
            raise ValueError("tap window must include relative lag 0")
        self.p = ar.order
        self.dim = self.wh + self.p
        self.ar = ar
        self.s2 = ar.innovation_var
        self.hbar = np.concatenate([self.taps, ar.coeffs[::-1]]) if self.p else self.taps
        self.hneg = np.concatenate([-self.taps, np.zeros(self.p)])
        self.obs_w = np.outer(self.hbar, self.hbar) / self.s2
        self.r = r            # (B, N) complex
        self.pm = pm          # (B, N) complex prior means
        self.pv = pv          # (B, N) float prior variances
        self.batch, self.n = r.shape
        self.chunk = max(int(chunk), 1)

    def _new_symbol_prior(self, k):
        """Prior of the symbol entering the state at step k -> k+1."""
        j = k + 1 + self.lp
        if j < self.n:
            return self.pm[:, j], self.pv[:, j]
        z = np.zeros(self.batch)
        return z + 0j, z  # out-of-block symbols are known zeros

    # -- backward pass: quadratic form exp(-x^H W x + 2 Re(x^H xi)) --------

    def _backward_step(self, w, xi, k):
        wh, p, dim = self.wh, self.p, self.dim
        mn, vn = self._new_symbol_prior(k)
        # integrate the fresh symbol slot against its prior (v = 0 pins it)
        a = w[:, :, wh - 1]
        xi_e = xi[:, wh - 1]
        pos = vn > 0
        inv = np.where(pos, 1.0 / np.where(pos, vn, 1.0), 0.0)
        c = w[:, wh - 1, wh - 1].real + inv
        c_safe = np.where(pos, c, 1.0)               # c > 0 whenever pos
        beta = xi_e + mn * inv
        shift = np.where(pos, beta / c_safe, mn)     # coefficient of a in xi
        coef = np.where(pos, 1.0 / c_safe, 0.0)      # coefficient of aa^H in W
        w = w - coef[:, None, None] * (a[:, :, None] * a.conj()[:, None, :])
        xi = xi - shift[:, None] * a
        if p:
            # absorb the observed sample feeding the new noise slot
            xi = xi - self.r[:, k, None] * w[:, :, dim - 1]
        # conjugate by the transition: reverse-shift the window blocks
        w2 = np.zeros_like(w)
        xi2 = np.zeros_like(xi)
        w2[:, 1:wh, 1:wh] = w[:, : wh - 1, : wh - 1]
        xi2[:, 1:wh] = xi[:, : wh - 1]
        if p:
            w2[:, 1:wh, wh + 1 :] = w[:, : wh - 1, wh : dim - 1]
            w2[:, wh + 1 :, 1:wh] = w[:, wh : dim - 1, : wh - 1]
            w2[:, wh + 1 :, wh + 1 :] = w[:, wh : dim - 1, wh : dim - 1]
            xi2[:, wh + 1 :] = xi[:, wh : dim - 1]
            t_vec = np.zeros((self.batch, dim), dtype=complex)
            t_vec[:, 1:wh] = w[:, : wh - 1, dim - 1]
            t_vec[:, wh + 1 :] = w[:, wh : dim - 1, dim - 1]
            hneg = self.hneg
            w2 += t_vec[:, :, None] * hneg[None, None, :]
            w2 += hneg[None, :, None] * t_vec.conj()[:, None, :]
            w2 += w[:, dim - 1, dim - 1].real[:, None, None] * np.outer(hneg, hneg)
            xi2 += self.hneg[None, :] * xi[:, dim - 1, None]
        # multiply in the likelihood of r_k
        w2 += self.obs_w
        xi2 += self.hbar[None, :] * (self.r[:, k, None] / self.s2)
        return w2, xi2

    def backward_checkpoints(self):
        """Sweep k = N-1..chunk, keeping the message at chunk boundaries."""
        b, dim = self.batch, self.dim
        w = np.zeros((b, dim, dim), dtype=complex)
        xi = np.zeros((b, dim), dtype=complex)
        stored = {}
        for k in range(self.n - 1, self.chunk - 1, -1):
            w, xi = self._backward_step(w, xi, k)
            if k % self.chunk == 0:
                stored[k] = (w.copy(), xi.copy())
                if k == self.chunk:
                    break
        return stored

    def replay(self, c0, c1, stored, need):
        """Recompute backward messages for steps [c0, c1), keeping ``need``."""
        b, dim = self.batch, self.dim
        if c1 in stored:
            w, xi = stored[c1]
            w, xi = w.copy(), xi.copy()
        else:
            if c1 < self.n:
                raise RuntimeError(f"missing backward checkpoint at step {c1}")
            w = np.zeros((b, dim, dim), dtype=complex)
            xi = np.zeros((b, dim), dtype=complex)
        buf = {}
        for k in range(c1 - 1, c0 - 1, -1):
            w, xi = self._backward_step(w, xi, k)
            if k in need:
                buf[k] = (w.copy(), xi.copy())
        return buf

    # -- forward pass: moments (m, V), predicted before each observation ---

    def initial_state(self):
        b, dim, wh = self.batch, self.dim, self.wh
        m = np.zeros((b, dim), dtype=complex)
        v = np.zeros((b, dim, dim), dtype=complex)
        for j in range(wh):
            sym = j - self.lm
            if 0 <= sym < self.n:
                m[:, j] = self.pm[:, sym]
                v[:, j, j] = self.pv[:, sym]
        if self.p:
            gam = ar_autocorrelation(self.ar, self.p - 1)
            v[:, wh:, wh:] = scipy.linalg.toeplitz(gam)
        return m, v

    def forward_update(self, m, v, k):
        """Observation update with r_k, then transition to step k + 1."""
        wh, dim = self.wh, self.dim
        u = v @ self.hbar
        s = np.einsum("bd,d->b", u, self.hbar).real + self.s2
        innov = self.r[:, k] - m @ self.hbar
        g = u / s[:, None]
        m = m + g * innov[:, None]
        v = v - g[:, :, None] * u.conj()[:, None, :]
        v = 0.5 * (v + v.conj().transpose(0, 2, 1))
        mn, vn = self._new_symbol_prior(k)
        m2 = np.zeros_like(m)
        v2 = np.zeros_like(v)
        m2[:, : wh - 1] = m[:, 1:wh]
        m2[:, wh - 1] = mn
        v2[:, : wh - 1, : wh - 1] = v[:, 1:wh, 1:wh]
        if self.p:
            z = v[:, :, :wh] @ self.taps
            m2[:, wh : dim - 1] = m[:, wh + 1 :]
            m2[:, dim - 1] = self.r[:, k] - m[:, :wh] @ self.taps
            v2[:, : wh - 1, wh : dim - 1] = v[:, 1:wh, wh + 1 :]
            v2[:, wh : dim - 1, : wh - 1] = v[:, wh + 1 :, 1:wh]
            v2[:, wh : dim - 1, wh : dim - 1] = v[:, wh + 1 :, wh + 1 :]
            col = np.zeros_like(m)
            col[:, : wh - 1] = -z[:, 1:wh]
            col[:, wh : dim - 1] = -z[:, wh + 1 :]
            v2[:, :, dim - 1] = col
            v2[:, dim - 1, :] = col.conj()
            v2[:, dim - 1, dim - 1] = np.einsum("bi,i->b", z[:, :wh], self.taps).real
        v2[:, wh - 1, wh - 1] = vn
        return m2, v2


def _combine(m, v, w, xi, slots, es):
    """Posterior moments of the given state slots from forward x backward."""
    batch, dim = m.shape
    eye = np.eye(dim)
    a = eye + v @ w
    rhs = np.concatenate(
        [v[:, :, slots], (m + np.einsum("bij,bj->bi", v, xi))[:, :, None]], axis=2
    )
    ridged = 0
    try:
        x = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        x = np.linalg.solve(a + _RIDGE * eye, rhs)
        ridged = 1
    mu = x[:, :, -1]
    post_m = mu[:, slots]
    post_v = x[:, slots, np.arange(len(slots))].real
    floor = _VAR_FLOOR_FRAC * es
    floored = int(np.count_nonzero(post_v < floor))
    return post_m, np.maximum(post_v, floor), floored, ridged


def _readout_schedule(readout, n, wh, lm, lp):
    """Map readout state k -> slots to read there (slot j holds symbol k - lm + j)."""
    need: dict[int, list[int]] = {}
    if readout == "center" or n < wh:
        for k in range(n):
            need[k] = [lm]
        return need
    if readout != "block":
        raise ValueError(f"unknown readout {readout!r}")
    covered = 0
    for k in range(lm, n - lp, wh):
        need[k] = list(range(wh))
        covered = k + lp + 1
    if covered < n:
        kf = n - 1 - lp
        extra = [j for j in range(wh) if covered <= kf - lm + j < n]
        need.setdefault(kf, [])
        need[kf] = sorted(set(need[kf]) | set(extra))
    return need


def _scalar_fast_path(r, h0, s2, pm, pv, es):
    """No ISI window, white noise: closed-form per-symbol MMSE, fully vectorized."""
    prec = 1.0 / pv + (h0 * h0) / s2
    post_v = 1.0 / prec
    post_m = post_v * (pm / pv + (h0 / s2) * r)
    floor = _VAR_FLOOR_FRAC * es
    floored = int(np.count_nonzero(post_v < floor))
    return post_m, np.maximum(post_v, floor), floored


def rilmmse_equalize(
    r: np.ndarray,
    taps: np.ndarray,
    dmin: int,
    ar: ArModel,
    prior_mean: np.ndarray,
    prior_var: np.ndarray,
    es: float = 1.0,
    readout: str = "center",
    chunk: int = 128,
) -> EqualizeResult:
    """Sliding-window LMMSE posterior moments, batched over leading axis.

    ``readout`` picks the state each symbol is read from: ``center`` reads
    slot Lm of every state, ``block`` reads whole windows every wh steps.
    The inference is exact either way, so results agree to rounding; block
    does O(window) fewer posterior solves.
    """
    r_in = np.asarray(r, dtype=complex)
    squeeze = r_in.ndim == 1
    r2 = np.atleast_2d(r_in)
    pm = np.broadcast_to(np.asarray(prior_mean, dtype=complex), r2.shape)
    pv = np.broadcast_to(np.asarray(prior_var, dtype=float), r2.shape)
    if np.any(pv <= 0):
        raise ValueError("prior variances must be positive")
    taps = np.asarray(taps, dtype=float)
    if len(taps) == 1 and ar.order == 0 and dmin == 0:
        post_m, post_v, floored = _scalar_fast_path(
            r2, taps[0], ar.innovation_var, pm, pv, es
        )
        if squeeze:
            return EqualizeResult(post_m[0], post_v[0], floored, 0)
        return EqualizeResult(post_m, post_v, floored, 0)

    chain = _Chain(taps, dmin, ar, r2, pm, pv, chunk)
    n = chain.n
    need = _readout_schedule(readout, n, chain.wh, chain.lm, chain.lp)
    stored = chain.backward_checkpoints() if n > chain.chunk else {}

    out_m = np.zeros_like(r2)
    out_v = np.zeros(r2.shape)
    floored = ridged = 0
    m, v = chain.initial_state()
    buf: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k in range(n):
        if k % chain.chunk == 0:
            c1 = min(k + chain.chunk, n)
            buf = chain.replay(k, c1, stored, need.keys())
        if k in need:
            slots = np.asarray(need[k])
            wk, xik = buf[k]
            pmk, pvk, fl, rd = _combine(m, v, wk, xik, slots, es)
            floored += fl
            ridged += rd
            syms = k - chain.lm + slots
            out_m[:, syms] = pmk
            out_v[:, syms] = pvk
        m, v = chain.forward_update(m, v, k)
    if squeeze:
        return EqualizeResult(out_m[0], out_v[0], floored, ridged)
    return EqualizeResult(out_m, out_v, floored, ridged)


def _noise_toeplitz(noise_lags: np.ndarray, n: int) -> np.ndarray:
    lags = np.zeros(n)
    take = min(len(noise_lags), n)
    lags[:take] = np.asarray(noise_lags, dtype=float)[:take]
    return scipy.linalg.toeplitz(lags)


# FTN compression below the pulse bandwidth leaves dead spectral bands, so
# the block covariance is PSD but (numerically) singular; lift the diagonal
# just enough for the factorization to go through.
_JITTER_STEPS = (0.0, 1e-12, 1e-9, 1e-6, 1e-3)


def _ilmmse_dense_one(r, h, rn, pm, pv):
    a = (h * pv[None, :]) @ h.T + rn
    scale = np.trace(a) / len(a)
    for eps in _JITTER_STEPS:
        try:
            cho = scipy.linalg.cho_factor(a + (eps * scale) * np.eye(len(a)))
            break
        except np.linalg.LinAlgError:
            if eps == _JITTER_STEPS[-1]:
                raise ValueError(
                    "block covariance is far from PSD; the assumed noise lags "
                    "are probably truncated too aggressively"
                ) from None
    z = scipy.linalg.cho_solve(cho, h)
    wt = np.einsum("ij,ij->j", h, z)
    q = scipy.linalg.cho_solve(cho, r - h @ pm)
    g = h.T @ q
    return pm + pv * g, pv - pv * pv * wt.real


def _taps_adjoint(q, taps, dmin):
    """(H^T q)_j for the banded H of apply_channel_taps."""
    full = np.convolve(q, taps)
    lm = -dmin
    return full[lm : lm + len(q)]


def _diag_band(bw: int, n: int) -> np.ndarray:
    out = np.zeros((bw + 1, n))
    out[bw, :] = 1.0
    return out


def _ilmmse_banded_one(r, taps, dmin, noise_lags, pm, pv, rhs_chunk=256):
    n = len(r)
    wh = len(taps)
    gam = np.zeros(wh + len(noise_lags))
    gam[: len(noise_lags)] = noise_lags
    bw = max(wh - 1, len(noise_lags) - 1)
    bw = min(bw, n - 1)
    ab = np.zeros((bw + 1, n))
    vpad = np.zeros(n + 2 * wh)
    vpad[wh : wh + n] = pv
    for d in range(bw + 1):
        row = np.zeros(n - d)
        for u in range(0, wh - d):
            t2 = taps[u + d] * taps[u]
            if t2 == 0.0:
                continue
            idx = np.arange(n - d) + d + dmin + u + wh
            row += t2 * vpad[idx]
        row += gam[d]
        ab[bw - d, d:] = row
    scale = np.mean(ab[bw, :])
    for eps in _JITTER_STEPS:
        try:
            lifted = ab if eps == 0.0 else ab + eps * scale * _diag_band(bw, n)
            cho = scipy.linalg.cholesky_banded(lifted, lower=False)
            break
        except np.linalg.LinAlgError:
            if eps == _JITTER_STEPS[-1]:
                raise ValueError(
                    "block covariance is far from PSD; the assumed noise lags "
                    "are probably truncated too aggressively"
                ) from None

    q = scipy.linalg.cho_solve_banded((cho, False), r - apply_channel_taps(pm, taps, dmin))
    g = _taps_adjoint(q, taps, dmin)
    wt = np.empty(n)
    offsets = np.arange(wh)
    for j0 in range(0, n, rhs_chunk):
        cols = np.arange(j0, min(j0 + rhs_chunk, n))
        hc = np.zeros((n, len(cols)))
        for idx, j in enumerate(cols):
            rows = j - dmin - offsets
            ok = (rows >= 0) & (rows < n)
            hc[rows[ok], idx] = taps[offsets[ok]]
        zc = scipy.linalg.cho_solve_banded((cho, False), hc)
        wt[cols] = np.einsum("ij,ij->j", hc, zc)
    return pm + pv * g, pv - pv * pv * wt


def ilmmse_equalize(
    r: np.ndarray,
    taps: np.ndarray,
    dmin: int,
    noise_lags: np.ndarray,
    prior_mean: np.ndarray,
    prior_var: np.ndarray,
    es: float = 1.0,
    method: str = "banded",
) -> EqualizeResult:
    """Whole-block LMMSE posterior moments against a Toeplitz noise covariance.

    ``noise_lags`` is the one-sided noise autocovariance, already scaled to
    the operating noise level; lags beyond it are taken as zero.  ``dense``
    factorizes the full covariance (use for cross-checks or when the lags
    span the block); ``banded`` exploits the finite bandwidth.
    """
    r_in = np.asarray(r, dtype=complex)
    squeeze = r_in.ndim == 1
    r2 = np.atleast_2d(r_in)
    pm = np.broadcast_to(np.asarray(prior_mean, dtype=complex), r2.shape)
    pv = np.broadcast_to(np.asarray(prior_var, dtype=float), r2.shape)
    taps = np.asarray(taps, dtype=float)
    n = r2.shape[1]
    out_m = np.zeros_like(r2)
    out_v = np.zeros(r2.shape)
    if method == "dense":
        h = build_convolution_matrix(taps, dmin, n)
        rn = _noise_toeplitz(noise_lags, n)
        for b in range(r2.shape[0]):
            out_m[b], out_v[b] = _ilmmse_dense_one(r2[b], h, rn, pm[b], pv[b])
    elif method == "banded":
        for b in range(r2.shape[0]):
            out_m[b], out_v[b] = _ilmmse_banded_one(
                r2[b], taps, dmin, np.asarray(noise_lags, dtype=float), pm[b], pv[b]
            )
    else:
        raise ValueError(f"unknown method {method!r}")
    floor = _VAR_FLOOR_FRAC * es
    floored = int(np.count_nonzero(out_v < floor))
    out_v = np.maximum(out_v, floor)
    if squeeze:
        return EqualizeResult(out_m[0], out_v[0], floored, 0)
    return EqualizeResult(out_m, out_v, floored, 0)


def complexity_probe(runner, sizes, repeats: int = 3) -> np.ndarray:
    """Best-of-``repeats`` wall time of ``runner(n)`` for each block size."""
    out = np.empty(len(sizes))
    for i, n in enumerate(sizes):
        runner(int(n))  # warm-up / JIT caches out of the timing
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            runner(int(n))
            best = min(best, time.perf_counter() - t0)
        out[i] = best
    return out
