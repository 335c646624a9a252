import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusforge import audiocore as ac
from corpusforge.errors import DecodeError

from conftest import RATE, tone


def make_buf(samples, rate=RATE):
    return ac.AudioBuffer(np.asarray(samples, dtype=np.float64), rate)


class TestDecodeWav:
    def test_silence_roundtrip(self):
        buf = ac.decode_wav(ac.encode_wav(make_buf(np.zeros(RATE))))
        assert buf.sample_rate == RATE
        assert len(buf.samples) == RATE
        assert np.all(buf.samples == 0.0)

    def test_full_scale_sine_peak(self):
        # reference writer: direct int16 packing of a full-scale sine
        t = np.arange(RATE) / RATE
        sine = np.sin(2 * np.pi * 440 * t)
        ints = np.clip(np.rint(sine * 32767), -32768, 32767).astype("<i2")
        raw = ints.tobytes()
        header = (
            b"RIFF"
            + (36 + len(raw)).to_bytes(4, "little")
            + b"WAVEfmt "
            + (16).to_bytes(4, "little")
            + (1).to_bytes(2, "little")
            + (1).to_bytes(2, "little")
            + RATE.to_bytes(4, "little")
            + (RATE * 2).to_bytes(4, "little")
            + (2).to_bytes(2, "little")
            + (16).to_bytes(2, "little")
            + b"data"
            + len(raw).to_bytes(4, "little")
        )
        buf = ac.decode_wav(header + raw)
        assert abs(buf.samples.max() - 1.0) <= 1 / 32768

    def test_truncated_header(self):
        with pytest.raises(DecodeError, match="missing data chunk"):
            ac.decode_wav(b"RIFF\x04\x00\x00\x00WAVE")

    def test_not_riff(self):
        with pytest.raises(DecodeError, match="RIFF"):
            ac.decode_wav(b"OggS" + b"\x00" * 100)

    def test_unsupported_codec_names_chunk(self):
        data = ac.encode_wav(make_buf(np.zeros(100)))
        # flip audio format to 7 (mu-law)
        mangled = data[:20] + (7).to_bytes(2, "little") + data[22:]
        with pytest.raises(DecodeError, match='"fmt "'):
            ac.decode_wav(mangled)

    def test_float32_and_stereo(self):
        t = np.arange(1000) / RATE
        left = np.sin(2 * np.pi * 300 * t)
        right = np.sin(2 * np.pi * 600 * t)
        pcm = np.stack([left, right], axis=1).astype("<f4").tobytes()
        import struct

        header = struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF", 36 + len(pcm), b"WAVE", b"fmt ", 16,
            3, 2, RATE, RATE * 8, 8, 32, b"data", len(pcm),
        )
        buf = ac.decode_wav(header + pcm)
        assert buf.channels == 2
        assert np.allclose(buf.samples[:, 0], left, atol=1e-6)
        mono = ac.downmix(buf)
        assert np.allclose(mono.samples, (left + right) / 2, atol=1e-6)

    def test_encode_decode_quantization(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-0.99, 0.99, 5000)
        back = ac.decode_wav(ac.encode_wav(make_buf(x)))
        assert np.abs(back.samples - x).max() <= 1 / 32768


class TestResample:
    def test_identity_bit_exact(self):
        buf = make_buf(tone(440, 1.0))
        out = ac.resample(buf, RATE)
        assert np.array_equal(out.samples, buf.samples)

    def test_48k_to_16k_tone_bin(self):
        t = np.arange(48000) / 48000
        buf = ac.AudioBuffer(np.sin(2 * np.pi * 1000 * t), 48000)
        out = ac.resample(buf, 16000)
        spectrum = np.abs(np.fft.rfft(out.samples))
        bin_hz = 16000 / len(out.samples)
        assert abs(spectrum.argmax() * bin_hz - 1000) <= bin_hz

    def test_duration_within_one_sample(self):
        for n in (48000, 48001, 12345):
            buf = ac.AudioBuffer(np.zeros(n), 48000)
            out = ac.resample(buf, 16000)
            assert 0 <= out.duration - buf.duration < 1 / 16000 + 1e-12

    def test_8k_doubles_length(self):
        buf = ac.AudioBuffer(np.zeros(4000), 8000)
        out = ac.resample(buf, 16000)
        assert abs(len(out.samples) - 8000) <= 1

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            ac.resample(make_buf(np.zeros(100)), 0)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=9600)
        b = rng.normal(size=9600)
        ra = ac.resample(ac.AudioBuffer(a, 48000), 16000).samples
        rb = ac.resample(ac.AudioBuffer(b, 48000), 16000).samples
        rab = ac.resample(ac.AudioBuffer(a + b, 48000), 16000).samples
        assert np.sqrt(np.mean((rab - (ra + rb)) ** 2)) < 1e-6

    def test_44100_to_16000(self):
        t = np.arange(44100) / 44100
        out = ac.resample(ac.AudioBuffer(np.sin(2 * np.pi * 1000 * t), 44100), 16000)
        spectrum = np.abs(np.fft.rfft(out.samples))
        bin_hz = 16000 / len(out.samples)
        assert abs(spectrum.argmax() * bin_hz - 1000) <= bin_hz


class TestTrimPad:
    def test_trim_zero_identity(self):
        buf = make_buf(tone(200, 1.0))
        out = ac.trim_from(buf, 0.0)
        assert np.array_equal(out.samples, buf.samples)

    def test_trim_index_arithmetic(self):
        buf = make_buf(np.arange(10 * RATE, dtype=np.float64) / (10 * RATE))
        out = ac.trim_from(buf, 2.5)
        assert out.duration == pytest.approx(7.5)
        assert out.samples[0] == buf.samples[int(2.5 * RATE)]

    def test_trim_beyond_end(self):
        with pytest.raises(ValueError):
            ac.trim_from(make_buf(np.zeros(10 * RATE)), 11.0)

    def test_pad_zero_identity(self):
        buf = make_buf(tone(200, 1.0))
        assert ac.pad_silence(buf, 0.0) is buf

    def test_pad_quarter_second(self):
        out = ac.pad_silence(make_buf(np.ones(RATE)), 0.25)
        assert len(out.samples) == 20000
        assert np.all(out.samples[-4000:] == 0.0)

    def test_pad_empty_buffer(self):
        out = ac.pad_silence(make_buf(np.zeros(0)), 1.0)
        assert len(out.samples) == RATE

    @given(
        trim_s=st.floats(0.0, 2.0),
        pad_s=st.floats(0.0, 1.0),
        total_s=st.floats(2.0, 4.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_duration_bookkeeping(self, trim_s, pad_s, total_s):
        buf = make_buf(np.zeros(int(round(total_s * RATE))))
        out = ac.pad_silence(ac.trim_from(buf, trim_s), pad_s)
        expected = buf.duration - trim_s + pad_s
        assert abs(out.duration - expected) <= 1 / RATE


class TestFrameEnergies:
    def test_zero_buffer(self):
        fe = ac.frame_energies(make_buf(np.zeros(RATE)))
        assert np.all(fe.energies == 0.0)

    def test_constant_half(self):
        fe = ac.frame_energies(make_buf(np.full(RATE, 0.5)))
        assert np.allclose(fe.energies, 0.25)

    def test_frame_count_invariant(self):
        buf = make_buf(np.zeros(RATE))  # 1.0 s
        fe = ac.frame_energies(buf)
        expected = int((1.0 - 0.025) / 0.010) + 1
        assert len(fe.energies) == expected

    def test_two_plateaus(self):
        half = RATE
        square = np.concatenate([np.zeros(half), np.ones(half)])
        fe = ac.frame_energies(make_buf(square))
        energies = fe.energies
        # frames fully inside each half
        n_half = int((1.0 - 0.025) / 0.010) + 1
        assert np.allclose(energies[: n_half - 3], 0.0)
        assert np.allclose(energies[-(n_half - 3) :], 1.0)

    def test_too_short(self):
        with pytest.raises(ValueError):
            ac.frame_energies(make_buf(np.zeros(100)))

    def test_include_partial_counts_every_hop(self):
        buf = make_buf(np.zeros(480))  # 30 ms
        fe = ac.frame_energies(buf, include_partial=True)
        assert len(fe.energies) == 3  # hops at 0, 10, 20 ms
