"""Time-domain FIR realization of the per-frequency optimum weights.

The optimum phase responses are not causal-compatible, so a bulk modeling
delay of L/2 samples is applied in the frequency domain before the inverse
transform; the resulting real taps reproduce the delayed per-bin targets
exactly at the bin frequencies (up to the real-forced endpoints at DC and
Nyquist).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _manifest
from .errors import FormatError
from .geometry import Direction
from .steering import FrequencyGrid

FILTER_FORMAT = "beamformer-filters"
FILTER_VERSION = 1


@dataclass(frozen=True)
class BeamformerFilters:
    """Real FIR taps [mic n][tap l] plus the bulk modeling delay."""

    taps: np.ndarray
    sample_rate: float
    discarded_imag_ratio: float = 0.0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 2 or taps.shape[0] < 1 or taps.shape[1] < 2:
            raise ValueError("taps must be an (N, L) matrix")
        if taps.shape[1] % 2 != 0:
            raise ValueError("filter length must be even")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        taps = taps.copy()
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def num_mics(self):
        return self.taps.shape[0]

    @property
    def num_taps(self):
        return self.taps.shape[1]

    @property
    def modeling_delay(self):
        """Bulk delay in samples introduced by the synthesis (L/2)."""
        return self.num_taps // 2


def synthesize_fir(fd):
    """Inverse-transform the per-bin weights into length-L real FIR filters.

    Per microphone: multiply W_n(omega_q) by the linear-phase delay factor
    exp(-j*omega_q*L/2) = (-1)^q, force the DC and Nyquist bins real, and
    take the length-L inverse real FFT. The imaginary energy discarded at
    the forced-real bins is reported as a fraction of the total weight
    energy (flag-worthy above 1e-6).
    """
    L = fd.freqs.num_taps
    q = np.arange(fd.freqs.num_bins)
    delay_sign = np.where(q % 2 == 0, 1.0, -1.0)
    half = fd.weights.T * delay_sign[None, :]

    total = float(np.sum(np.abs(fd.weights) ** 2))
    discarded = float(abs(half[:, 0].imag @ half[:, 0].imag) + abs(half[:, -1].imag @ half[:, -1].imag))
    ratio = discarded / total if total > 0 else 0.0
    half = half.copy()
    half[:, 0] = half[:, 0].real
    half[:, -1] = half[:, -1].real

    taps = np.fft.irfft(half, n=L, axis=1)
    return BeamformerFilters(taps, fd.freqs.sample_rate, discarded_imag_ratio=ratio)


def filter_response(bf, f):
    """Exact DTFT of every tap row at frequency f (Hz); no bin snapping."""
    if not 0.0 <= f <= bf.sample_rate / 2.0:
        raise ValueError(f"frequency {f} outside [0, fs/2]")
    omega = 2.0 * np.pi * f / bf.sample_rate
    phases = np.exp(-1j * omega * np.arange(bf.num_taps))
    return bf.taps @ phases


def filter_response_many(bf, freqs_hz):
    """DTFT at several frequencies at once; returns [freq][mic]."""
    f = np.asarray(freqs_hz, dtype=float)
    if np.any(f < 0.0) or np.any(f > bf.sample_rate / 2.0):
        raise ValueError("frequency outside [0, fs/2]")
    omega = 2.0 * np.pi * f / bf.sample_rate
    phases = np.exp(-1j * np.outer(omega, np.arange(bf.num_taps)))
    return phases @ bf.taps.T


def save_filters(bf, path, look=None, gamma_db=None, data_file=None):
    """Filter file: JSON metadata plus float64-LE taps, row-major [mic][tap]."""
    import os

    path = os.fspath(path)
    if data_file is None:
        base = os.path.basename(path)
        stem = base[: -len(".json")] if base.endswith(".json") else base
        data_file = stem + ".bin"
    doc = {
        "format": FILTER_FORMAT,
        "version": FILTER_VERSION,
        "num_mics": int(bf.num_mics),
        "num_taps": int(bf.num_taps),
        "sample_rate_hz": float(bf.sample_rate),
        "modeling_delay_samples": int(bf.modeling_delay),
        "discarded_imag_ratio": float(bf.discarded_imag_ratio),
        "look": None
        if look is None
        else {"azimuth_deg": look.azimuth, "elevation_deg": look.elevation},
        "gamma_db": None if gamma_db is None else float(gamma_db),
        "dtype": "float64-le",
        "layout": "mic_tap",
        "data_file": data_file,
    }
    payload = np.ascontiguousarray(bf.taps.astype("<f8")).tobytes()
    _manifest.write_container(path, doc, payload)


def load_filters(path):
    """Load a filter file; returns (BeamformerFilters, metadata dict)."""
    doc = _manifest.read_manifest(path, FILTER_FORMAT, FILTER_VERSION)
    try:
        n = int(doc["num_mics"])
        L = int(doc["num_taps"])
        fs = float(doc["sample_rate_hz"])
        ratio = float(doc.get("discarded_imag_ratio", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest {path}: {exc}", byte_offset=0) from exc
    if doc.get("dtype") != "float64-le" or doc.get("layout") != "mic_tap":
        raise FormatError(f"manifest {path}: unsupported dtype/layout", byte_offset=0)
    payload = _manifest.read_payload(path, doc, n * L * 8)
    taps = np.frombuffer(payload, dtype="<f8").reshape(n, L)
    bad = np.flatnonzero(~np.isfinite(taps.ravel()))
    if bad.size:
        raise FormatError(f"payload of {path} contains a non-finite tap", byte_offset=int(bad[0]) * 8)
    meta = {
        "look": None
        if doc.get("look") is None
        else Direction(doc["look"]["azimuth_deg"], doc["look"]["elevation_deg"]),
        "gamma_db": doc.get("gamma_db"),
    }
    return BeamformerFilters(taps, fs, discarded_imag_ratio=ratio), meta


def reconstruction_error(bf, fd):
    """Max |DTFT(taps) - delayed target| over all bins; the FIR quality figure."""
    f = fd.freqs.bin_frequencies
    got = filter_response_many(bf, f)
    q = np.arange(fd.freqs.num_bins)
    want = fd.weights * np.where(q % 2 == 0, 1.0, -1.0)[:, None]
    return float(np.max(np.abs(got - want)))
