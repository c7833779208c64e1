"""Convolutional encoder, APP decoder against exhaustive enumeration, interleaver."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftnsim import ConvCode, Interleaver, app_decode, conv_encode, random_interleaver


def enumerate_posteriors(llr, code, n_info, max_log=False):
    """Brute-force bit posteriors: enumerate every info word, weigh by the LLRs.

    Channel model behind the LLRs: P(c | L) proportional to exp(0.5 * s(c) * L)
    with s(c) = +1 for bit 0 and -1 for bit 1, independent across bits.
    """
    words = ((np.arange(2**n_info)[:, None] >> np.arange(n_info)[::-1]) & 1).astype(np.uint8)
    coded = conv_encode(words, code)
    sign = 1.0 - 2.0 * coded.astype(float)
    metric = 0.5 * sign @ np.asarray(llr, dtype=float)

    def reduce(m):
        if len(m) == 0:
            return -np.inf
        if max_log:
            return m.max()
        hi = m.max()
        return hi + np.log(np.sum(np.exp(m - hi)))

    info_llr = np.empty(n_info)
    for t in range(n_info):
        zero = words[:, t] == 0
        info_llr[t] = reduce(metric[zero]) - reduce(metric[~zero])
    n_coded = coded.shape[1]
    coded_post = np.empty(n_coded)
    for j in range(n_coded):
        zero = coded[:, j] == 0
        coded_post[j] = reduce(metric[zero]) - reduce(metric[~zero])
    return info_llr, coded_post


class TestConvEncode:
    def test_impulse_response_7_5(self):
        code = ConvCode.from_spec("7,5")
        out = conv_encode(np.array([1, 0, 0], dtype=np.uint8), code)
        # 1 + D + D^2 and 1 + D^2 driven by a single one, then flushed
        assert np.array_equal(out, [1, 1, 1, 0, 1, 1, 0, 0, 0, 0])

    def test_linearity(self):
        code = ConvCode.from_spec("7,5")
        rng = np.random.default_rng(0)
        a = rng.integers(0, 2, 24, dtype=np.uint8)
        b = rng.integers(0, 2, 24, dtype=np.uint8)
        assert np.array_equal(
            conv_encode(a ^ b, code), conv_encode(a, code) ^ conv_encode(b, code)
        )

    def test_termination_flushes_to_zero_state(self):
        code = ConvCode.from_spec("133,171")
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 40, dtype=np.uint8)
        out = conv_encode(bits, code)
        assert out.shape == (code.n_coded(40),)
        # encoding the word again after the tail is the same as starting fresh:
        # the tail must have cleared the register
        twice = conv_encode(np.concatenate([bits, np.zeros(6, np.uint8), bits]), code)
        assert np.array_equal(twice[: len(out) - 12], out[:-12])

    def test_batched(self):
        code = ConvCode.from_spec("7,5")
        rng = np.random.default_rng(2)
        bits = rng.integers(0, 2, (4, 10), dtype=np.uint8)
        batch = conv_encode(bits, code)
        for b in range(4):
            assert np.array_equal(batch[b], conv_encode(bits[b], code))

    def test_spec_parsing(self):
        code = ConvCode.from_spec("133,171")
        assert code.memory == 6
        assert code.generators == (0o133, 0o171)
        assert code.rate == 0.5
        with pytest.raises(ValueError):
            ConvCode(memory=2, generators=(0o17,))


class TestAppDecode:
    @pytest.mark.parametrize("max_log", (False, True))
    def test_matches_exhaustive_enumeration(self, max_log):
        code = ConvCode.from_spec("7,5")
        n_info = 12
        rng = np.random.default_rng(3)
        for _ in range(50):
            llr = 3.0 * rng.standard_normal(code.n_coded(n_info))
            want_info, want_post = enumerate_posteriors(llr, code, n_info, max_log)
            got_info, got_ext = app_decode(llr, code, n_info, max_log=max_log)
            assert got_info == pytest.approx(want_info, abs=1e-9)
            assert got_ext == pytest.approx(want_post - llr, abs=1e-9)

    def test_matches_enumeration_long_memory(self):
        code = ConvCode.from_spec("133,171")
        n_info = 8
        rng = np.random.default_rng(4)
        llr = 2.0 * rng.standard_normal(code.n_coded(n_info))
        want_info, want_post = enumerate_posteriors(llr, code, n_info)
        got_info, got_ext = app_decode(llr, code, n_info)
        assert got_info == pytest.approx(want_info, abs=1e-9)
        assert got_ext == pytest.approx(want_post - llr, abs=1e-9)

    def test_noiseless_decoding(self):
        code = ConvCode.from_spec("7,5")
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, 30, dtype=np.uint8)
        llr = 20.0 * (1.0 - 2.0 * conv_encode(bits, code).astype(float))
        info_llr, _ = app_decode(llr, code, 30)
        assert np.array_equal((info_llr < 0).astype(np.uint8), bits)

    def test_batched_matches_single(self):
        code = ConvCode.from_spec("7,5")
        rng = np.random.default_rng(6)
        llr = rng.standard_normal((3, code.n_coded(9)))
        gi, ge = app_decode(llr, code, 9)
        for b in range(3):
            si, se = app_decode(llr[b], code, 9)
            assert gi[b] == pytest.approx(si, abs=1e-12)
            assert ge[b] == pytest.approx(se, abs=1e-12)

    def test_wrong_length_rejected(self):
        code = ConvCode.from_spec("7,5")
        with pytest.raises(ValueError):
            app_decode(np.zeros(11), code, 4)

    def test_zero_input_gives_zero_info_llrs(self):
        # symmetric channel, no evidence: info bits stay undecided
        code = ConvCode.from_spec("7,5")
        info_llr, _ = app_decode(np.zeros(code.n_coded(8)), code, 8)
        assert info_llr == pytest.approx(np.zeros(8), abs=1e-9)


class TestInterleaver:
    def test_round_trip(self):
        rng = np.random.default_rng(7)
        il = random_interleaver(64, rng)
        x = rng.standard_normal(64)
        assert np.array_equal(il.deinterleave(il.interleave(x)), x)
        assert np.array_equal(il.interleave(il.deinterleave(x)), x)

    def test_batched(self):
        rng = np.random.default_rng(8)
        il = random_interleaver(16, rng)
        x = rng.standard_normal((3, 16))
        got = il.interleave(x)
        for b in range(3):
            assert np.array_equal(got[b], il.interleave(x[b]))

    def test_non_permutation_rejected(self):
        with pytest.raises(ValueError):
            Interleaver(perm=np.array([0, 0, 2]))

    def test_is_a_permutation(self):
        il = random_interleaver(100, np.random.default_rng(9))
        assert np.array_equal(np.sort(il.perm), np.arange(100))
        assert il.n == 100


@settings(max_examples=20, deadline=None)
@given(
    n_info=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_decoder_equals_enumeration_any_small_frame(n_info, seed):
    code = ConvCode.from_spec("7,5")
    rng = np.random.default_rng(seed)
    llr = 4.0 * rng.standard_normal(code.n_coded(n_info))
    want_info, want_post = enumerate_posteriors(llr, code, n_info)
    got_info, got_ext = app_decode(llr, code, n_info)
    assert got_info == pytest.approx(want_info, abs=1e-8)
    got_post = got_ext + llr
    # very short frames can force a coded bit to one value across the whole
    # codebook; the oracle says +-inf there, the decoder a huge finite LLR
    free = np.isfinite(want_post)
    assert got_post[free] == pytest.approx(want_post[free], abs=1e-8)
    assert np.all(np.abs(got_post[~free]) > 1e9)
    assert np.all(np.sign(got_post[~free]) == np.sign(want_post[~free]))
