"""Sensor responses g_n(omega, phi, theta) over a direction grid.

Two sources are supported: synthetic free-field plane-wave steering for
desk-scale work, and measured head-related impulse-response datasets whose
transforms are used as steering vectors directly.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _manifest
from .errors import FormatError
from .geometry import ArrayGeometry, DirectionGrid

#: speed of sound, m/s, at room temperature
SPEED_OF_SOUND = 343.0

HRTF_FORMAT = "hrtf-ir-container"
HRTF_VERSION = 1


@dataclass(frozen=True)
class FrequencyGrid:
    """The L/2 + 1 DFT bin frequencies of an even-length real FIR design."""

    sample_rate: float
    num_taps: int

    def __post_init__(self):
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        if self.num_taps < 2 or self.num_taps % 2 != 0:
            raise ValueError("num_taps must be even and >= 2")

    @property
    def num_bins(self):
        return self.num_taps // 2 + 1

    @property
    def bin_frequencies(self):
        """Bin frequencies f_q = q * f_s / L, Hz, q = 0 ... L/2."""
        return np.arange(self.num_bins) * (self.sample_rate / self.num_taps)

    def band_bins(self, f_lo, f_hi):
        """Indices of bins whose frequency lies in [f_lo, f_hi]."""
        f = self.bin_frequencies
        return np.flatnonzero((f >= f_lo) & (f <= f_hi))


@dataclass(frozen=True)
class SteeringSet:
    """Complex sensor responses indexed [bin q][direction m][mic n]."""

    grid: DirectionGrid
    freqs: FrequencyGrid
    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.complex128)
        expected = (self.freqs.num_bins, self.grid.size)
        if g.ndim != 3 or g.shape[:2] != expected:
            raise ValueError(f"steering tensor shape {g.shape} inconsistent with grid/freqs")
        if not np.all(np.isfinite(g)):
            raise ValueError("steering tensor contains non-finite entries")
        if np.max(np.abs(g[0].imag)) > 1e-12:
            raise ValueError("steering entries at the DC bin must be real")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def num_mics(self):
        return self.g.shape[2]


def free_field_steering(geom, grid, freqs, c=SPEED_OF_SOUND):
    """Plane-wave steering with the phase reference at the array centroid.

    The per-mic delay is tau_n = (r_n . u)/c with u the unit vector toward
    the source, so microphones on the source side carry positive delay and
    g_n = exp(-j*omega*tau_n) has unit modulus everywhere.
    """
    if not (math.isfinite(c) and c > 0):
        raise ValueError("sound speed must be positive")
    tau = (grid.unit_vectors() @ geom.relative_positions().T) / c
    f = freqs.bin_frequencies
    g = np.exp(-2j * np.pi * f[:, None, None] * tau[None, :, :])
    return SteeringSet(grid, freqs, g)


def propagation_delays(geom, direction, c=SPEED_OF_SOUND):
    """Per-mic free-field delays (seconds) for one direction, centroid-referenced."""
    return (geom.relative_positions() @ direction.unit_vector()) / c


@dataclass(frozen=True)
class HrtfDataset:
    """Measured impulse responses from grid directions to array microphones.

    ``impulse_responses`` is a float32 tensor [direction m][mic n][tap];
    samples are kept in storage precision so container round-trips are
    bit-exact.
    """

    geometry: ArrayGeometry
    grid: DirectionGrid
    sample_rate: float
    impulse_responses: np.ndarray

    def __post_init__(self):
        ir = np.ascontiguousarray(self.impulse_responses, dtype=np.float32)
        if ir.ndim != 3:
            raise ValueError("impulse_responses must be [direction][mic][tap]")
        m, n, t = ir.shape
        if m != self.grid.size:
            raise ValueError(f"{m} impulse-response directions but grid has {self.grid.size}")
        if n != self.geometry.num_mics:
            raise ValueError(f"{n} impulse-response channels but geometry has {self.geometry.num_mics} mics")
        if t < 1:
            raise ValueError("ir_length must be >= 1")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(ir)):
            raise ValueError("impulse responses contain non-finite samples")
        ir = ir.copy()
        ir.setflags(write=False)
        object.__setattr__(self, "impulse_responses", ir)

    @property
    def ir_length(self):
        return self.impulse_responses.shape[2]


def save_hrtf_dataset(ds, path, data_file=None):
    """Write the dataset as a JSON manifest plus a raw float32-LE payload."""
    import os

    path = os.fspath(path)
    if data_file is None:
        base = os.path.basename(path)
        stem = base[: -len(".json")] if base.endswith(".json") else base
        data_file = stem + ".bin"
    m, n, t = ds.impulse_responses.shape
    doc = {
        "format": HRTF_FORMAT,
        "version": HRTF_VERSION,
        "sample_rate_hz": float(ds.sample_rate),
        "num_directions": int(m),
        "num_mics": int(n),
        "ir_length": int(t),
        "dtype": "float32-le",
        "layout": "direction_mic_tap",
        "data_file": data_file,
        "geometry": ds.geometry.to_json_dict(),
        "grid": ds.grid.to_json_dict(),
    }
    payload = ds.impulse_responses.astype("<f4").tobytes()
    _manifest.write_container(path, doc, payload)


def load_hrtf_dataset(path):
    """Load and fully validate an HRTF container; see ``save_hrtf_dataset``."""
    doc = _manifest.read_manifest(path, HRTF_FORMAT, HRTF_VERSION)
    try:
        m = int(doc["num_directions"])
        n = int(doc["num_mics"])
        t = int(doc["ir_length"])
        fs = float(doc["sample_rate_hz"])
        geometry = ArrayGeometry.from_json_dict(doc["geometry"])
        grid = DirectionGrid.from_json_dict(doc["grid"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest {path}: {exc}", byte_offset=0) from exc
    if doc.get("dtype") != "float32-le" or doc.get("layout") != "direction_mic_tap":
        raise FormatError(f"manifest {path}: unsupported dtype/layout", byte_offset=0)
    payload = _manifest.read_payload(path, doc, m * n * t * 4)
    ir = np.frombuffer(payload, dtype="<f4").reshape(m, n, t)
    bad = np.flatnonzero(~np.isfinite(ir.ravel()))
    if bad.size:
        raise FormatError(
            f"payload of {path} contains a non-finite sample", byte_offset=int(bad[0]) * 4
        )
    return HrtfDataset(geometry, grid, fs, ir)


def hrtf_steering(ds, freqs):
    """Steering set from measured impulse responses.

    Each g[q][m][n] is the length-L DFT (negative-exponent convention) of
    the zero-padded impulse response from direction m to microphone n,
    evaluated at bin q.
    """
    if ds.sample_rate != freqs.sample_rate:
        raise ValueError(
            f"dataset sample rate {ds.sample_rate} != design sample rate {freqs.sample_rate}"
        )
    if ds.ir_length > freqs.num_taps:
        raise ValueError(
            f"impulse responses ({ds.ir_length} taps) longer than the design length {freqs.num_taps}"
        )
    h = np.fft.rfft(ds.impulse_responses.astype(np.float64), n=freqs.num_taps, axis=2)
    return SteeringSet(ds.grid, freqs, np.transpose(h, (2, 0, 1)))


def steering_submatrix(steer, q, dir_indices):
    """Rows of G(omega_q) for the requested direction indices (row m, column n)."""
    if not 0 <= q < steer.freqs.num_bins:
        raise IndexError(f"bin {q} out of range")
    idx = np.asarray(dir_indices, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= steer.grid.size):
        raise IndexError("direction index out of range")
    return steer.g[q][idx.reshape(-1), :].copy()
