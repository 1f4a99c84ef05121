import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hma_perception.errors import BadFrameSize, EmptyBand, NoFrames, SignalTooShort, TooManySources
from hma_perception.localization import (LocalizationParams, MicArray, MultichannelSignal, SpatialSpectrum,
                                         find_peaks, localize, make_window, music_spectrum,
                                         spatial_covariance, steering_delays, steering_vector, stft)
from hma_perception.simulate import AudioSceneSpec, AudioSource, synth_array_signal

from conftest import wrap_deg

FS = 16000.0


def sig(x):
    return MultichannelSignal(np.atleast_2d(x), FS)


# ---- STFT ---------------------------------------------------------------------

def test_stft_dc():
    f = stft(sig(np.ones(512)), 512, 256, "rect")
    assert f.n_frames == 1
    assert abs(f.data[0, 0, 0] - 512) < 1e-9
    assert np.abs(f.data[0, 0, 1:]).max() < 1e-9


def test_stft_sinusoid_on_bin():
    n = np.arange(512)
    x = np.cos(2 * np.pi * 1000 * n / FS)  # bin 32 exactly
    f = stft(sig(x), 512, 256, "rect")
    mag = np.abs(f.data[0, 0])
    assert int(np.argmax(mag)) == 32
    assert abs(mag[32] - 256) < 1e-9
    assert mag[32] ** 2 / (mag ** 2).sum() > 0.99


def test_stft_matches_naive_dft():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 1024))
    f = stft(sig(x), 256, 128, "hann")
    win = make_window("hann", 256)
    k = np.arange(129)[:, None]
    basis = np.exp(-2j * np.pi * k * np.arange(256)[None, :] / 256)
    assert f.n_frames == 1 + (1024 - 256) // 128
    for c in range(2):
        for t in range(f.n_frames):
            ref = basis @ (x[c, t * 128:t * 128 + 256] * win)
            assert np.abs(f.data[c, t] - ref).max() < 1e-9


def test_stft_errors():
    with pytest.raises(SignalTooShort):
        stft(sig(np.zeros(100)), 512, 256)
    with pytest.raises(BadFrameSize):
        stft(sig(np.zeros(1000)), 500, 256)
    with pytest.raises(BadFrameSize):
        stft(sig(np.zeros(1000)), 32, 16)


# ---- covariance ---------------------------------------------------------------

def test_covariance_single_active_channel():
    x = np.zeros((3, 512))
    x[0] = np.cos(2 * np.pi * 1000 * np.arange(512) / FS)
    f = stft(sig(x), 512, 256, "rect")
    r = spatial_covariance(f, 32)
    assert abs(r[0, 0] - 256 ** 2) < 1e-6
    r[0, 0] = 0
    assert np.abs(r).max() < 1e-9


def test_covariance_single_frame_e1():
    x = np.zeros((4, 64))
    x[0, 0] = 1.0  # impulse: flat unit spectrum on channel 0 only
    f = stft(sig(x), 64, 64, "rect")
    r = spatial_covariance(f, 5)
    e1 = np.zeros(4)
    e1[0] = 1
    assert np.abs(r - np.outer(e1, e1)).max() < 1e-12


def test_covariance_hermitian_and_white_noise():
    x = np.random.default_rng(1).normal(size=(4, int(FS) * 30))
    f = stft(sig(x), 512, 256, "rect")
    r = spatial_covariance(f, 60)
    assert np.array_equal(r, r.conj().T)
    r = r / 512  # rectangular window: E|X_k|^2 = N * variance
    assert np.abs(r - np.eye(4)).max() < 0.1


# ---- steering -----------------------------------------------------------------

def test_steering_single_mic_at_origin():
    arr = MicArray(np.zeros((1, 3)))
    for az in (0, 90, 200):
        assert abs(steering_vector(arr, az, 1000)[0] - 1) < 1e-15


def test_steering_broadside_equal_phase():
    arr = MicArray([[0, -0.05, 0], [0, 0.05, 0]])
    a = steering_vector(arr, 0.0, 2000)  # source along +x, mics on y axis
    assert abs(a[0] - a[1]) < 1e-15


def test_steering_endfire_pair_broadside():
    arr = MicArray([[-0.05, 0, 0], [0.05, 0, 0]])
    a = steering_vector(arr, 90.0, 1500)
    assert abs(np.angle(a[0] / a[1])) < 1e-12


def test_steering_matches_delay_oracle():
    arr = MicArray.circular(8, 0.0365)
    for az in (0.0, 37.0, 90.0, 271.5):
        u = np.array([np.cos(np.radians(az)), np.sin(np.radians(az)), 0])
        for f in (500.0, 2500.0):
            a = steering_vector(arr, az, f)
            for m in range(8):
                tau = -(u @ arr.positions[m]) / 343.0
                assert abs(a[m] - np.exp(-2j * np.pi * f * tau) / np.sqrt(8)) < 1e-12
            assert abs(np.linalg.norm(a) - 1) < 1e-12


def test_delays_physical_direction():
    # the microphone nearest the source hears it first
    arr = MicArray.circular(8, 0.0365)
    tau = steering_delays(arr, [90.0])[0]
    assert int(np.argmin(tau)) == 2  # mic at 90 degrees


# ---- MUSIC spectrum -----------------------------------------------------------

def rank_one_covs(arr, az, freqs, noise=1e-3):
    out = []
    for f in freqs:
        a = steering_vector(arr, az, f)
        out.append(np.outer(a, a.conj()) + noise * np.eye(arr.n_mics))
    return np.array(out)


def test_music_peak_at_source():
    arr = MicArray.circular()
    freqs = np.linspace(500, 3000, 20)
    spec = music_spectrum(rank_one_covs(arr, 90.0, freqs), freqs, arr, 1, 1.0, (500, 3000))
    assert int(np.argmax(spec.power)) == 90
    assert spec.azimuths.size == 360


def test_music_noiseless_source_peak_exact():
    arr = MicArray.circular()
    s = synth_array_signal(arr, AudioSceneSpec((AudioSource(90.0),), snr_db=np.inf, seed=0))
    res = localize(s, arr)
    assert res.azimuths == [90.0]
    assert int(np.argmax(res.spectrum.power)) == 90


def test_music_white_noise_flat():
    arr = MicArray.circular()
    freqs = np.linspace(500, 3000, 40)
    covs = np.array([np.eye(8, dtype=complex)] * 40)
    spec = music_spectrum(covs, freqs, arr, 1, 1.0, (500, 3000))
    db = 10 * np.log10(spec.power)
    assert db.max() - db.min() < 3.0


def test_music_errors():
    arr = MicArray.circular()
    freqs = np.array([1000.0])
    covs = rank_one_covs(arr, 0, freqs)
    with pytest.raises(TooManySources):
        music_spectrum(covs, freqs, arr, 8)
    with pytest.raises(EmptyBand):
        music_spectrum(covs, freqs, arr, 1, 1.0, (4000, 5000))


# ---- peaks --------------------------------------------------------------------

def spectrum(power):
    power = np.asarray(power, dtype=float)
    return SpatialSpectrum(np.arange(power.size) * 360.0 / power.size, power, (0, 1))


def brute_peaks(p, k):
    n = len(p)
    found = []
    seen = set()
    for i in range(n):
        if p[i] == p[(i - 1) % n]:
            continue  # not the first index of a plateau
        j = i
        while p[(j + 1) % n] == p[i] and (j + 1) % n != i:
            j += 1
        if p[(i - 1) % n] < p[i] and p[(j + 1) % n] < p[i] and i not in seen:
            found.append((-p[i], i))
            seen.add(i)
    found.sort()
    return [i for _, i in found[:k]]


def test_peaks_lobes():
    az = np.arange(360.0)
    one = np.exp(-0.5 * ((az - 77) / 10) ** 2)
    assert find_peaks(spectrum(one), 3) == [77.0]
    two = one + 2 * np.exp(-0.5 * ((az - 250) / 10) ** 2)
    assert find_peaks(spectrum(two), 2) == [250.0, 77.0]


def test_peaks_examples():
    assert find_peaks(spectrum([0, 1, 5, 1, 0, 2, 0, 0]), 2) == [90.0, 225.0]
    assert find_peaks(spectrum([3, 1, 1, 1]), 1) == [0.0]  # wraps around
    assert find_peaks(spectrum([1, 1, 1, 1]), 1) == []
    assert find_peaks(spectrum([0, 4, 4, 0]), 1) == [90.0]  # plateau -> first index


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=3, max_size=40), st.integers(1, 5))
def test_peaks_match_brute_force(values, k):
    spec = spectrum(values)
    got = find_peaks(spec, k)
    assert got == [float(spec.azimuths[i]) for i in brute_peaks(values, k)]


# ---- end to end ---------------------------------------------------------------

def test_localize_single_source_120():
    arr = MicArray.circular()
    s = synth_array_signal(arr, AudioSceneSpec((AudioSource(120.0),), snr_db=20, seed=1))
    res = localize(s, arr)
    assert wrap_deg(res.azimuths[0] - 120.0) <= 5.0


def test_localize_two_sources():
    arr = MicArray.circular()
    s = synth_array_signal(arr, AudioSceneSpec((AudioSource(60.0), AudioSource(240.0)), snr_db=20, seed=2))
    res = localize(s, arr, LocalizationParams(n_sources=2))
    assert sorted(res.azimuths) == pytest.approx([60.0, 240.0], abs=5.0)


def test_localize_silent():
    arr = MicArray.circular()
    with pytest.raises(NoFrames):
        localize(MultichannelSignal(np.zeros((8, 8000)), FS), arr)


def test_localize_channel_mismatch():
    with pytest.raises(ValueError):
        localize(MultichannelSignal(np.zeros((4, 8000)), FS), MicArray.circular())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 359), st.sampled_from([15.0, 45.0, 90.0, 137.0]))
def test_rotational_equivariance(az, rot):
    arr = MicArray.circular()
    spec = AudioSceneSpec((AudioSource(float(az)),), snr_db=np.inf, duration=0.3, seed=az)
    a = localize(synth_array_signal(arr, spec), arr).azimuths[0]
    rotated = arr.rotated(rot)
    spec2 = AudioSceneSpec((AudioSource(float((az + rot) % 360)),), snr_db=np.inf, duration=0.3, seed=az)
    b = localize(synth_array_signal(rotated, spec2), rotated).azimuths[0]
    assert wrap_deg(b - a - rot) <= 2.0


def test_amplitude_scaling_invariance():
    arr = MicArray.circular()
    s = synth_array_signal(arr, AudioSceneSpec((AudioSource(250.0),), seed=3, duration=0.5))
    a = localize(s, arr)
    b = localize(MultichannelSignal(s.channels * 7.5, FS), arr)
    assert a.azimuths == b.azimuths
    pa, pb = a.spectrum.power, b.spectrum.power
    assert np.abs(pa / pa.max() - pb / pb.max()).max() < 1e-6


def test_higher_snr_is_sharper():
    arr = MicArray.circular()
    sharper = 0
    for seed in range(20):
        ratios = []
        for snr in (0.0, 20.0):
            s = synth_array_signal(arr, AudioSceneSpec((AudioSource(200.0),), snr_db=snr,
                                                        duration=0.5, seed=seed))
            p = localize(s, arr).spectrum.power
            ratios.append(p.max() / np.median(p))
        sharper += ratios[1] > ratios[0]
    assert sharper >= 18
