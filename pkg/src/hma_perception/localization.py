"""Sound-source azimuth estimation with narrowband MUSIC.

Signals are framed and transformed (:func:`stft`), a spatial covariance is
estimated per frequency bin, its noise subspace is taken from
:func:`~hma_perception.eigen.hermitian_eig_batch`, and the MUSIC
pseudospectrum is averaged over the bins of the analysis band. Peaks of the
resulting azimuth spectrum are the source directions.

Far-field model: a plane wave from azimuth ``az`` travels along
``-u(az)``, ``u = (cos az, sin az, 0)``, so microphone ``m`` at ``p_m`` hears
it with delay ``tau_m = -(u . p_m) / c`` relative to the array origin.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .eigen import hermitian_eig_batch
from .errors import BadFrameSize, EmptyBand, NoFrames, SignalTooShort, TooManySources

log = logging.getLogger(__name__)

# Default geometry: 8 microphones on a uniform horizontal circle.
DEFAULT_N_MICS = 8
DEFAULT_RADIUS = 0.0365


@dataclass(frozen=True, eq=False)
class MicArray:
    positions: np.ndarray  # (C, 3) meters
    sample_rate: float = 16000.0
    speed_of_sound: float = 343.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        if pos.shape[0] < 1:
            raise ValueError("array needs microphones")
        if pos.shape[0] >= 2 and np.ptp(pos, axis=0).max() == 0:
            raise ValueError("microphone positions all coincide")
        if self.sample_rate <= 0 or self.speed_of_sound <= 0:
            raise ValueError("sample_rate and speed_of_sound must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_mics(self):
        return self.positions.shape[0]

    @classmethod
    def circular(cls, n_mics=DEFAULT_N_MICS, radius=DEFAULT_RADIUS, sample_rate=16000.0,
                 speed_of_sound=343.0, start_deg=0.0):
        a = np.deg2rad(start_deg + 360.0 * np.arange(n_mics) / n_mics)
        pos = np.stack([radius * np.cos(a), radius * np.sin(a), np.zeros(n_mics)], axis=1)
        return cls(pos, sample_rate, speed_of_sound)

    def rotated(self, angle_deg):
        """Array with every microphone rotated about +z by ``angle_deg``."""
        a = np.deg2rad(angle_deg)
        rz = np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])
        return MicArray(self.positions @ rz.T, self.sample_rate, self.speed_of_sound)


@dataclass(frozen=True, eq=False)
class MultichannelSignal:
    channels: np.ndarray  # (C, N)
    sample_rate: float

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=np.float64))
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def n_samples(self):
        return self.channels.shape[1]


@dataclass(frozen=True, eq=False)
class SpectralFrames:
    data: np.ndarray  # (C, T, F) complex
    frame_size: int
    hop: int
    window: str
    sample_rate: float

    @property
    def n_frames(self):
        return self.data.shape[1]

    def bin_frequency(self, k):
        return np.asarray(k) * self.sample_rate / self.frame_size


@dataclass(frozen=True, eq=False)
class SpatialSpectrum:
    azimuths: np.ndarray  # degrees, uniform over [0, 360)
    power: np.ndarray
    band: Tuple[float, float]


@dataclass(frozen=True)
class LocalizationParams:
    frame_size: int = 512
    hop: int = 256
    window: str = "hann"
    band: Tuple[float, float] = (500.0, 3000.0)
    n_sources: int = 1
    grid_step: float = 1.0


def make_window(name, n):
    k = np.arange(n)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * k / n)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * k / n)
    if name in ("rect", "rectangular", "boxcar"):
        return np.ones(n)
    raise ValueError(f"unknown window {name!r}")


def stft(signal, frame_size=512, hop=256, window="hann"):
    """Windowed real FFT frames; frame ``t`` covers samples ``[t*hop, t*hop + frame_size)``."""
    if frame_size < 64 or frame_size & (frame_size - 1):
        raise BadFrameSize(f"frame_size must be a power of two >= 64, got {frame_size}")
    if hop < 1:
        raise BadFrameSize(f"hop must be positive, got {hop}")
    x = signal.channels
    n = x.shape[1]
    if n < frame_size:
        raise SignalTooShort(f"{n} samples < frame size {frame_size}")
    n_frames = 1 + (n - frame_size) // hop
    starts = np.arange(n_frames) * hop
    idx = starts[:, None] + np.arange(frame_size)[None, :]
    frames = x[:, idx] * make_window(window, frame_size)
    return SpectralFrames(np.fft.rfft(frames, axis=-1), frame_size, hop, window, signal.sample_rate)


def spatial_covariances(frames, bins):
    """Sample covariances ``(1/T) sum_t x_t x_t^H`` for each bin, shape ``(B, C, C)``."""
    c, t, _ = frames.data.shape
    if t == 0:
        raise NoFrames("no frames to average")
    if t < c:
        log.warning("only %d frames for %d channels: covariance is rank deficient", t, c)
    x = frames.data[:, :, np.asarray(bins)]  # (C, T, B)
    r = np.einsum("itb,jtb->bij", x, x.conj()) / t
    return 0.5 * (r + np.conj(np.swapaxes(r, 1, 2)))


def spatial_covariance(frames, bin):
    return spatial_covariances(frames, [bin])[0]


def steering_delays(array, azimuths_deg):
    """Per-direction, per-microphone delays ``tau_m`` in seconds, shape ``(G, C)``."""
    a = np.deg2rad(np.asarray(azimuths_deg, dtype=np.float64))
    u = np.stack([np.cos(a), np.sin(a), np.zeros_like(a)], axis=-1)
    return -(u @ array.positions.T) / array.speed_of_sound


def steering_vector(array, azimuth, freq):
    """Unit-norm far-field array response at one azimuth (degrees) and frequency (Hz)."""
    tau = steering_delays(array, [azimuth])[0]
    return np.exp(-2j * np.pi * freq * tau) / np.sqrt(array.n_mics)


def _azimuth_grid(step):
    n = 360.0 / step
    if step <= 0 or abs(n - round(n)) > 1e-9:
        raise ValueError(f"grid step {step} does not divide 360")
    return np.arange(int(round(n))) * float(step)


def music_spectrum(covariances, freqs, array, n_sources=1, grid_step=1.0, band=None):
    """Bin-averaged MUSIC pseudospectrum over a uniform azimuth grid.

    ``covariances[b]`` is the spatial covariance at frequency ``freqs[b]``;
    bins outside ``band`` (inclusive, Hz) are ignored.
    """
    c = array.n_mics
    if n_sources >= c or n_sources < 1:
        raise TooManySources(f"n_sources={n_sources} needs 1 <= n_sources < {c}")
    covariances = np.asarray(covariances)
    freqs = np.asarray(freqs, dtype=np.float64)
    lo, hi = band if band is not None else (freqs.min(initial=np.inf), freqs.max(initial=-np.inf))
    sel = (freqs >= lo) & (freqs <= hi) & (freqs > 0)
    if not sel.any():
        raise EmptyBand(f"no frequency bins in [{lo}, {hi}] Hz")
    covariances, freqs = covariances[sel], freqs[sel]

    grid = _azimuth_grid(grid_step)
    _, vecs = hermitian_eig_batch(covariances)
    noise = vecs[:, :, n_sources:]  # (B, C, C - n_sources)
    tau = steering_delays(array, grid)  # (G, C)
    a = np.exp(-2j * np.pi * freqs[:, None, None] * tau[None]) / np.sqrt(c)  # (B, G, C)
    proj = np.einsum("bgc,bcn->bgn", a.conj(), noise)
    denom = np.maximum((np.abs(proj) ** 2).sum(axis=-1), 1e-300)
    power = (1.0 / denom).mean(axis=0)
    return SpatialSpectrum(grid, power, (float(lo), float(hi)))


def find_peaks(spec, k):
    """Azimuths of the ``k`` strongest circular local maxima, strongest first.

    A maximum has both circular neighbours strictly smaller; a flat-topped
    maximum is reported at its first grid index (in circular order).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    p = np.asarray(spec.power)
    n = p.size
    change = np.flatnonzero(p != np.roll(p, 1))
    if change.size == 0:
        return []
    peaks = []
    starts = list(change) + [change[0] + n]
    for s, nxt in zip(starts[:-1], starts[1:]):
        e = nxt - 1  # run covers s..e (indices mod n)
        val = p[s % n]
        if p[(s - 1) % n] < val and p[(e + 1) % n] < val:
            peaks.append((s % n, val))
    peaks.sort(key=lambda item: (-item[1], item[0]))
    return [float(spec.azimuths[i]) for i, _ in peaks[:k]]


@dataclass
class LocalizationResult:
    azimuths: List[float]
    spectrum: SpatialSpectrum
    n_frames: int


def localize(signal, array, params=LocalizationParams()):
    """Full chain: STFT, per-bin covariance over the band, MUSIC spectrum, peaks."""
    if signal.n_channels != array.n_mics:
        raise ValueError(f"signal has {signal.n_channels} channels, array has {array.n_mics} mics")
    frames = stft(signal, params.frame_size, params.hop, params.window)
    energy = (np.abs(frames.data) ** 2).sum(axis=(0, 2))
    active = energy > 0
    if not active.any():
        raise NoFrames("every frame is silent")
    frames = SpectralFrames(frames.data[:, active], frames.frame_size, frames.hop,
                            frames.window, frames.sample_rate)
    freqs = frames.bin_frequency(np.arange(frames.data.shape[2]))
    lo, hi = params.band
    bins = np.flatnonzero((freqs >= lo) & (freqs <= hi) & (freqs > 0))
    if bins.size == 0:
        raise EmptyBand(f"no frequency bins in [{lo}, {hi}] Hz")
    covs = spatial_covariances(frames, bins)
    spec = music_spectrum(covs, freqs[bins], array, params.n_sources, params.grid_step, params.band)
    return LocalizationResult(find_peaks(spec, params.n_sources), spec, frames.n_frames)
