"""Signal-independent beamformer evaluation.

Beampatterns are complex maps B(omega, phi, theta) = sum_n W_n(omega) *
g_n(omega, phi, theta); white noise gain and directivity index are reported
as dB curves over frequency. Two dB normalizations are provided: against
the global maximum, or against the maximum within a fixed-elevation design
plane (which can push off-plane values above 0 dB).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .fir import filter_response_many
from .geometry import FOUR_PI, DirectionGrid

#: dB floor applied when exporting beampattern maps to CSV
EXPORT_DB_FLOOR = -80.0


@dataclass(frozen=True)
class BeampatternMap:
    """Complex beamformer response sampled on [frequency][direction]."""

    freqs: np.ndarray
    grid: DirectionGrid
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        v = np.asarray(self.values, dtype=np.complex128)
        if f.ndim != 1 or v.shape != (f.size, self.grid.size):
            raise ValueError(f"beampattern shape {v.shape} inconsistent with freqs/grid")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(v))):
            raise ValueError("beampattern entries must be finite")
        f = f.copy()
        f.setflags(write=False)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class CurveReport:
    """A dB-vs-frequency curve; ``kind`` is "WNG" or "DI"."""

    freqs: np.ndarray
    values_db: np.ndarray
    kind: str

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        v = np.asarray(self.values_db, dtype=float)
        if f.shape != v.shape or f.ndim != 1:
            raise ValueError("freqs and values must be equal-length vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(v))):
            raise ValueError("curve entries must be finite")
        f = f.copy()
        f.setflags(write=False)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values_db", v)


def _select_bins(steer, bins):
    if bins is None:
        return np.arange(steer.freqs.num_bins)
    idx = np.asarray(bins, dtype=int).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= steer.freqs.num_bins):
        raise IndexError("bin index outside the steering set")
    return idx


def beampattern(bf, steer, bins=None):
    """Beampattern of synthesized FIR filters at the selected DFT bins."""
    if bf.num_mics != steer.num_mics:
        raise ValueError("filters and steering disagree on the number of microphones")
    idx = _select_bins(steer, bins)
    f = steer.freqs.bin_frequencies[idx]
    w = filter_response_many(bf, f)
    values = np.einsum("fn,fmn->fm", w, steer.g[idx])
    return BeampatternMap(f, steer.grid, values)


def design_beampattern(fd, steer, bins=None):
    """Beampattern of the per-bin optimum weights, before FIR approximation."""
    if fd.num_mics != steer.num_mics:
        raise ValueError("design and steering disagree on the number of microphones")
    if fd.freqs != steer.freqs:
        raise ValueError("design and steering frequency grids differ")
    idx = _select_bins(steer, bins)
    values = np.einsum("fn,fmn->fm", fd.weights[idx], steer.g[idx])
    return BeampatternMap(steer.freqs.bin_frequencies[idx], steer.grid, values)


def white_noise_gain(w, d):
    """WNG = |w^T d|^2 / (w^H w), linear."""
    w = np.asarray(w, dtype=np.complex128)
    d = np.asarray(d, dtype=np.complex128)
    return float(abs(w @ d) ** 2 / np.vdot(w, w).real)


def wng_curve(fd):
    """Per-bin white noise gain of a frequency design (from its diagnostics)."""
    f = fd.freqs.bin_frequencies
    db = np.array([diag.wng_db for diag in fd.diagnostics])
    return CurveReport(f, db, "WNG")


def wng_curve_fir(bf, steer, look):
    """White noise gain of the synthesized filters, sampled at the bin frequencies."""
    look_idx = steer.grid.index_of(look)
    f = steer.freqs.bin_frequencies
    w = filter_response_many(bf, f)
    d = steer.g[:, look_idx, :]
    num = np.abs(np.einsum("fn,fn->f", w, d)) ** 2
    den = np.einsum("fn,fn->f", w, w.conj()).real
    return CurveReport(f, 10.0 * np.log10(num / den), "WNG")


def directivity_index(bp, look):
    """DI(omega) = 10 log10(|B(look)|^2 / mean_{sphere} |B|^2), by quadrature."""
    look_idx = bp.grid.index_of(look)
    power = np.abs(bp.values) ** 2
    diffuse = power @ bp.grid.weights / FOUR_PI
    if np.any(diffuse == 0.0):
        raise NumericalError("diffuse-field response is zero at some frequency")
    look_power = power[:, look_idx]
    if np.any(look_power == 0.0):
        raise NumericalError("look-direction response is zero at some frequency")
    return CurveReport(bp.freqs, 10.0 * np.log10(look_power / diffuse), "DI")


def normalize_db(bp, mode="global", plane_elevation=None):
    """Magnitude map in dB, shifted so the reference region peaks at 0 dB.

    ``mode="global"`` references the maximum over all frequencies and
    directions; ``mode="plane"`` references the maximum over directions at
    ``plane_elevation`` only, reproducing the scaling mismatch between
    plane-referenced and globally-referenced maps.
    """
    mags = np.abs(bp.values)
    if mode == "global":
        ref = mags.max()
    elif mode == "plane":
        if plane_elevation is None:
            raise ValueError("plane mode requires plane_elevation")
        sel = np.abs(bp.grid.elevations - plane_elevation) <= 1e-9
        if not np.any(sel):
            raise ValueError(f"no grid directions at elevation {plane_elevation}")
        ref = mags[:, sel].max()
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    if ref == 0.0:
        raise NumericalError("all-zero beampattern cannot be normalized")
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(mags / ref)


def write_beampattern_csv(path, bp, db_map, config_hash=None):
    """CSV rows (f_hz, phi_deg, theta_deg, level_db), floored at -80 dB."""
    clipped = np.maximum(db_map, EXPORT_DB_FLOOR)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config-hash: {config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["f_hz", "phi_deg", "theta_deg", "level_db"])
        for i, f in enumerate(bp.freqs):
            for m in range(bp.grid.size):
                writer.writerow(
                    [
                        f"{f:.6f}",
                        f"{bp.grid.azimuths[m]:.6f}",
                        f"{bp.grid.elevations[m]:.6f}",
                        f"{clipped[i, m]:.6f}",
                    ]
                )


def write_curve_csv(path, curve, config_hash=None):
    """CSV rows (f_hz, <kind>_db)."""
    column = "wng_db" if curve.kind == "WNG" else "di_db"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config-hash: {config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["f_hz", column])
        for f, v in zip(curve.freqs, curve.values_db):
            writer.writerow([f"{f:.6f}", f"{v:.6f}"])
