"""Frequency-weighted segmental SNR and the two-speaker evaluation protocol.

The metric frames both signals, pools magnitude spectra into triangular
mel-spaced bands, clamps the per-band SNR, and averages the band-weighted
frame scores. Scenario evaluation renders every (target, interferer) cell,
scores the beamformer input against its output, and aggregates per-target
means over the interferer positions.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dsp import reference_signals, render_scene
from .errors import NumericalError


@dataclass(frozen=True)
class FwSegSnrParams:
    """Metric configuration; defaults follow the usual published setup."""

    frame_ms: float = 30.0
    overlap: float = 0.75
    num_bands: int = 25
    weight_exponent: float = 0.2
    clamp_db: tuple = (-10.0, 35.0)
    band_lo_hz: float = 50.0
    silence_threshold_dbfs: float = -60.0

    def __post_init__(self):
        if not (math.isfinite(self.frame_ms) and self.frame_ms > 0):
            raise ValueError("frame_ms must be positive")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError("overlap must lie in [0, 1)")
        if self.num_bands < 1:
            raise ValueError("at least one band is required")
        lo, hi = self.clamp_db
        if not lo < hi:
            raise ValueError("clamp_db must be an increasing pair")
        object.__setattr__(self, "clamp_db", (float(lo), float(hi)))


@dataclass(frozen=True)
class FwSegSnrResult:
    score_db: float
    frames_total: int
    frames_scored: int
    frames_excluded: int


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def _mel_filterbank(num_bands, frame_len, sample_rate, f_lo):
    """Triangular mel-spaced band weights over the rfft bins of a frame."""
    f_hi = sample_rate / 2.0
    edges = _mel_to_hz(np.linspace(_hz_to_mel(f_lo), _hz_to_mel(f_hi), num_bands + 2))
    bins_hz = np.fft.rfftfreq(frame_len, d=1.0 / sample_rate)
    bank = np.zeros((num_bands, bins_hz.size))
    for j in range(num_bands):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        rising = (bins_hz - lo) / (mid - lo)
        falling = (hi - bins_hz) / (hi - mid)
        bank[j] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return bank


def fwsegsnr_details(ref, test, params=None):
    """Frequency-weighted segmental SNR with frame accounting."""
    p = params if params is not None else FwSegSnrParams()
    if ref.num_channels != 1 or test.num_channels != 1:
        raise ValueError("fwsegsnr expects mono buffers")
    if ref.sample_rate != test.sample_rate:
        raise ValueError("sample rates differ")
    if ref.num_samples != test.num_samples:
        raise ValueError(f"lengths differ: {ref.num_samples} vs {test.num_samples}")
    x = ref.samples[0]
    y = test.samples[0]
    if not np.any(x != 0.0):
        raise ValueError("reference signal is identically zero")

    fs = ref.sample_rate
    frame_len = int(round(p.frame_ms * 1e-3 * fs))
    hop = max(1, int(round(frame_len * (1.0 - p.overlap))))
    if x.size < frame_len:
        raise ValueError("signal shorter than one frame")
    num_frames = (x.size - frame_len) // hop + 1

    window = np.hanning(frame_len)
    bank = _mel_filterbank(p.num_bands, frame_len, fs, p.band_lo_hz)
    clamp_lo, clamp_hi = p.clamp_db
    silence_rms = 10.0 ** (p.silence_threshold_dbfs / 20.0)

    starts = np.arange(num_frames) * hop
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    frames_ref = x[idx]
    frames_test = y[idx]

    rms = np.sqrt(np.mean(frames_ref**2, axis=1))
    keep = rms >= silence_rms
    scored = int(np.count_nonzero(keep))
    if scored == 0:
        raise ValueError("all frames are below the silence threshold")

    mag_ref = np.abs(np.fft.rfft(frames_ref[keep] * window, axis=1))
    mag_test = np.abs(np.fft.rfft(frames_test[keep] * window, axis=1))
    band_ref = mag_ref @ bank.T
    band_test = mag_test @ bank.T

    err2 = (band_ref - band_test) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = 10.0 * np.log10(band_ref**2 / err2)
    snr = np.where(np.isnan(snr), clamp_lo, snr)  # empty band: zero weight anyway
    snr = np.clip(snr, clamp_lo, clamp_hi)

    weights = band_ref**p.weight_exponent
    totals = weights.sum(axis=1)
    if np.any(totals == 0.0):
        raise NumericalError("a scored frame has zero total band weight")
    score = float(np.mean((weights * snr).sum(axis=1) / totals))
    return FwSegSnrResult(
        score_db=score,
        frames_total=int(num_frames),
        frames_scored=scored,
        frames_excluded=int(num_frames) - scored,
    )


def fwsegsnr(ref, test, params=None):
    """Frequency-weighted segmental SNR in dB (see ``fwsegsnr_details``)."""
    return fwsegsnr_details(ref, test, params).score_db


class FilterBank:
    """Per-look-direction beamformer filters, selected by a scene's target."""

    def __init__(self, filters_by_look):
        self._filters = {}
        for direction, bf in filters_by_look.items():
            key = (round(direction.azimuth * 1e6), round(direction.elevation * 1e6))
            self._filters[key] = bf
        if not self._filters:
            raise ValueError("filter bank must not be empty")

    def for_direction(self, direction):
        key = (round(direction.azimuth * 1e6), round(direction.elevation * 1e6))
        if key not in self._filters:
            raise KeyError(
                f"no filters for look direction ({direction.azimuth}, {direction.elevation})"
            )
        return self._filters[key]


def _resolve_filters(entry, direction):
    if isinstance(entry, FilterBank):
        return entry.for_direction(direction)
    return entry


@dataclass(frozen=True)
class CellResult:
    """Scores for one (target position, interferer position) combination."""

    phi_ld: float
    theta_int: float
    phi_int: float
    input_db: float
    output_db: dict


@dataclass(frozen=True)
class ScenarioReport:
    cells: tuple
    design_ids: tuple

    def per_target_means(self):
        """Rows ((phi_ld, theta_int), mean input dB, {design: mean output dB})."""
        groups = {}
        for cell in self.cells:
            groups.setdefault((cell.phi_ld, cell.theta_int), []).append(cell)
        rows = []
        for key in sorted(groups):
            members = groups[key]
            mean_in = float(np.mean([c.input_db for c in members]))
            mean_out = {
                did: float(np.mean([c.output_db[did] for c in members]))
                for did in self.design_ids
            }
            rows.append((key, mean_in, mean_out))
        return rows


def eval_scenario(designs, scenes, geom, sample_rate, params=None, hrtf=None):
    """Render every scene, score each design, and aggregate per-target means.

    ``designs`` maps a design id to either fixed ``BeamformerFilters`` or a
    ``FilterBank`` steered per scene target. Scenes must contain exactly a
    target and one interfering source so the cells can be labeled.
    """
    cells = []
    for scene in scenes:
        if len(scene.sources) != 2:
            raise ValueError("scenario scenes must contain a target and one interferer")
        target_dir = scene.target.direction
        interferer = scene.sources[1 - scene.target_index]
        render = render_scene(scene, geom, sample_rate, hrtf=hrtf)
        outputs = {}
        input_db = None
        for design_id, entry in designs.items():
            bf = _resolve_filters(entry, target_dir)
            refs = reference_signals(render, bf)
            if input_db is None:
                input_db = fwsegsnr(refs.input_ref, refs.input_test, params)
            outputs[design_id] = fwsegsnr(refs.output_ref, refs.output_test, params)
        cells.append(
            CellResult(
                phi_ld=target_dir.azimuth,
                theta_int=interferer.direction.elevation,
                phi_int=interferer.direction.azimuth,
                input_db=input_db,
                output_db=outputs,
            )
        )
    return ScenarioReport(cells=tuple(cells), design_ids=tuple(designs.keys()))


def write_report_csv(path, report, config_hash=None):
    """Per-cell rows (phi_ld, theta_int, phi_int, design_id, input_db, output_db)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config-hash: {config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["phi_ld", "theta_int", "phi_int", "design_id", "input_db", "output_db"])
        for cell in report.cells:
            for design_id in report.design_ids:
                writer.writerow(
                    [
                        f"{cell.phi_ld:.6f}",
                        f"{cell.theta_int:.6f}",
                        f"{cell.phi_int:.6f}",
                        design_id,
                        f"{cell.input_db:.6f}",
                        f"{cell.output_db[design_id]:.6f}",
                    ]
                )


def write_summary_csv(path, report, config_hash=None):
    """Per-target means over interferer positions, one row per design."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config-hash: {config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["phi_ld", "theta_int", "design_id", "mean_input_db", "mean_output_db"])
        for (phi_ld, theta_int), mean_in, mean_out in report.per_target_means():
            for design_id in report.design_ids:
                writer.writerow(
                    [
                        f"{phi_ld:.6f}",
                        f"{theta_int:.6f}",
                        design_id,
                        f"{mean_in:.6f}",
                        f"{mean_out[design_id]:.6f}",
                    ]
                )
