"""Time-domain filter-and-sum processing and anechoic scene synthesis.

Scenes are rendered by convolving mono source signals with per-microphone
impulse responses: windowed-sinc fractional delays for the free-field model,
or measured impulse responses from an HRTF dataset. Rendering is pure given
the scene seed.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import i0

from .geometry import Direction
from .steering import SPEED_OF_SOUND, propagation_delays

#: fractional-delay interpolator length and Kaiser shape parameter
FRAC_DELAY_TAPS = 64
FRAC_DELAY_BETA = 8.0


@dataclass(frozen=True)
class AudioBuffer:
    """Multichannel audio: samples[channel][time], nominal amplitude in [-1, 1]."""

    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("samples must be [channel][time] with >= 1 channel")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def num_channels(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    def channel(self, index):
        """Single channel as a mono AudioBuffer."""
        return AudioBuffer(self.sample_rate, self.samples[index][None, :])


def filter_and_sum(bf, x):
    """y[k] = sum_n sum_l w_{n,l} x_n[k-l]; full convolution, mono output."""
    if x.num_channels != bf.num_mics:
        raise ValueError(f"{x.num_channels} channels but {bf.num_mics} filters")
    if x.sample_rate != bf.sample_rate:
        raise ValueError("sample rates of filters and signal differ")
    y = np.zeros(x.num_samples + bf.num_taps - 1)
    for n in range(bf.num_mics):
        y += fftconvolve(x.samples[n], bf.taps[n])
    return AudioBuffer(x.sample_rate, y[None, :])


def fractional_delay_kernel(delay_samples, num_taps=FRAC_DELAY_TAPS, beta=FRAC_DELAY_BETA):
    """Windowed-sinc interpolator realizing a (possibly fractional) delay.

    Returns (kernel, shift): the kernel delays by ``delay_samples - shift``
    where ``shift`` is an integer; placing the kernel at offset ``shift``
    realizes the full delay. The Kaiser window rides on the sinc center, so
    integer delays reduce to an exact unit impulse.
    """
    base = num_taps // 2 - 1
    shift = math.floor(delay_samples - base)
    center = delay_samples - shift  # in [base, base + 1)
    k = np.arange(num_taps)
    t = k - center
    half = (num_taps - 1) / 2.0
    arg = 1.0 - (t / half) ** 2
    window = np.where(arg > 0.0, i0(beta * np.sqrt(np.maximum(arg, 0.0))) / i0(beta), 0.0)
    return np.sinc(t) * window, shift


@dataclass(frozen=True)
class SceneSource:
    """A mono signal arriving from one direction with a broadband gain."""

    signal: np.ndarray
    direction: Direction
    gain_db: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.signal, dtype=float).reshape(-1)
        if x.size < 1:
            raise ValueError("source signal must be non-empty")
        if not np.all(np.isfinite(x)):
            raise ValueError("source signal must be finite")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "signal", x)


@dataclass(frozen=True)
class SceneSpec:
    """A synthesis scene: sources, one target, optional sensor noise, a seed."""

    sources: tuple
    target_index: int
    duration_s: float
    sensor_noise_snr_db: float = None
    seed: int = 0

    def __post_init__(self):
        sources = tuple(self.sources)
        if not sources:
            raise ValueError("scene must contain at least one source")
        if not 0 <= self.target_index < len(sources):
            raise ValueError("target_index out of range")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValueError("duration must be positive")
        object.__setattr__(self, "sources", sources)

    @property
    def target(self):
        return self.sources[self.target_index]


@dataclass(frozen=True)
class SceneRender:
    """Rendered microphone signals: the mix, per-source stems, and bookkeeping."""

    mix: AudioBuffer
    stems: tuple
    target_index: int
    frontmost_index: int
    bulk_delay_samples: float


def _fit_length(signal, num_samples):
    if signal.size >= num_samples:
        return signal[:num_samples]
    return np.concatenate([signal, np.zeros(num_samples - signal.size)])


def _free_field_irs(geom, directions, sample_rate, c):
    """Per-direction (N, P) impulse responses; common bulk delay, aligned lengths."""
    delays = np.array(
        [propagation_delays(geom, d, c) * sample_rate for d in directions]
    )  # (S, N) in samples
    bulk = FRAC_DELAY_TAPS // 2 + math.ceil(max(0.0, -delays.min())) if delays.size else 0
    total = delays + bulk
    shifts = np.empty(total.shape, dtype=int)
    kernels = np.empty(total.shape + (FRAC_DELAY_TAPS,))
    for s in range(total.shape[0]):
        for n in range(total.shape[1]):
            kernels[s, n], shifts[s, n] = fractional_delay_kernel(total[s, n])
    length = int(shifts.max()) + FRAC_DELAY_TAPS
    irs = np.zeros(total.shape + (length,))
    for s in range(total.shape[0]):
        for n in range(total.shape[1]):
            irs[s, n, shifts[s, n] : shifts[s, n] + FRAC_DELAY_TAPS] = kernels[s, n]
    return irs, float(bulk)


def render_scene(scene, geom, sample_rate, hrtf=None, c=SPEED_OF_SOUND):
    """Convolve each source with its direction's impulse responses and mix.

    Free-field mode synthesizes fractional-delay filters from the geometry;
    with ``hrtf`` given, each source direction must be a dataset grid node
    and the measured impulse responses are used instead. Sensor noise, when
    enabled, is white Gaussian at the requested SNR relative to the target
    stem at the frontmost microphone.
    """
    t_len = int(round(scene.duration_s * sample_rate))
    directions = [src.direction for src in scene.sources]

    if hrtf is not None:
        if hrtf.sample_rate != sample_rate:
            raise ValueError("HRTF dataset sample rate differs from the scene rate")
        idx = [hrtf.grid.index_of(d) for d in directions]
        irs = hrtf.impulse_responses[idx].astype(float)
        bulk = 0.0
        num_mics = hrtf.geometry.num_mics
        frontmost = hrtf.geometry.frontmost_index
    else:
        irs, bulk = _free_field_irs(geom, directions, sample_rate, c)
        num_mics = geom.num_mics
        frontmost = geom.frontmost_index

    out_len = t_len + irs.shape[2] - 1
    stems = []
    for s, src in enumerate(scene.sources):
        x = _fit_length(src.signal, t_len) * 10.0 ** (src.gain_db / 20.0)
        stem = np.empty((num_mics, out_len))
        for n in range(num_mics):
            stem[n] = fftconvolve(x, irs[s, n])
        stems.append(AudioBuffer(sample_rate, stem))

    mix = np.sum([stem.samples for stem in stems], axis=0)
    if scene.sensor_noise_snr_db is not None:
        target_front = stems[scene.target_index].samples[frontmost]
        rms = math.sqrt(float(np.mean(target_front**2)))
        if rms == 0.0:
            raise ValueError("cannot scale sensor noise: target stem is silent")
        sigma = rms * 10.0 ** (-scene.sensor_noise_snr_db / 20.0)
        rng = np.random.default_rng(scene.seed)
        mix = mix + sigma * rng.standard_normal(mix.shape)

    return SceneRender(
        mix=AudioBuffer(sample_rate, mix),
        stems=tuple(stems),
        target_index=scene.target_index,
        frontmost_index=frontmost,
        bulk_delay_samples=bulk,
    )


@dataclass(frozen=True)
class ReferenceSignals:
    """Aligned reference/test pairs at the beamformer input and output."""

    input_ref: AudioBuffer
    input_test: AudioBuffer
    output_ref: AudioBuffer
    output_test: AudioBuffer


def reference_signals(render, bf):
    """Reference/test pairs: target-only versus full mix, before and after the beamformer.

    All four signals pass through identical processing chains, so no
    resynchronization is needed.
    """
    target_stem = render.stems[render.target_index]
    return ReferenceSignals(
        input_ref=target_stem.channel(render.frontmost_index),
        input_test=render.mix.channel(render.frontmost_index),
        output_ref=filter_and_sum(bf, target_stem),
        output_test=filter_and_sum(bf, render.mix),
    )


def speech_shaped_noise(duration_s, sample_rate, seed):
    """Deterministic unit-RMS noise with a speech-like long-term spectrum.

    White Gaussian noise shaped by a gentle high-pass below ~100 Hz and a
    single-pole rolloff above ~500 Hz.
    """
    t_len = int(round(duration_s * sample_rate))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(t_len)
    spectrum = np.fft.rfft(x)
    f = np.fft.rfftfreq(t_len, d=1.0 / sample_rate)
    shape = (f / np.sqrt(f**2 + 100.0**2)) / np.sqrt(1.0 + (f / 500.0) ** 2)
    y = np.fft.irfft(spectrum * shape, n=t_len)
    return y / math.sqrt(float(np.mean(y**2)))
