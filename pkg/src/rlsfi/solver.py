"""Per-frequency constrained least-squares beamformer weights.

At each design frequency the weights solve

    min_w ||G w - b_hat||^2   s.t.   w^T d = 1,   |w^T d|^2 / (w^H w) >= gamma,

i.e. a least-squares fit of the desired response under a distortionless
response constraint and a white-noise-gain floor. Substituting the equality
constraint turns the WNG inequality into the ball ||w||^2 <= 1/gamma, which
is solved exactly by null-space elimination plus a monotone bisection on the
regularization multiplier (an LSQI / trust-region-style subproblem).
"""

import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
import scipy.linalg

from . import _manifest
from .errors import FeasibilityError, FormatError, NumericalError
from .geometry import Direction, DirectionGrid
from .steering import FrequencyGrid

DESIGN_FORMAT = "beamformer-design"
DESIGN_VERSION = 1

#: relative slack on the feasibility test gamma <= ||d||^2
FEASIBILITY_SLACK = 1e-12

#: bisection stopping rules (see solve_frequency)
BALL_TOLERANCE = 1e-10
BRACKET_TOLERANCE = 1e-14
MAX_BISECT_ITER = 200


def feasibility_bound(d):
    """Largest feasible WNG floor for steering vector d: gamma_max = ||d||^2.

    The constraint set is nonempty iff gamma <= ||d||^2, since the smallest
    ||w||^2 subject to w^T d = 1 is 1/||d||^2, attained at w = conj(d)/||d||^2.
    """
    d = np.asarray(d, dtype=np.complex128).reshape(-1)
    nd2 = float(np.vdot(d, d).real)
    if nd2 == 0.0:
        raise ValueError("steering vector must be nonzero")
    return nd2


@dataclass(frozen=True)
class BinDiagnostics:
    """Solver certificates and quality figures for one frequency bin."""

    frequency_hz: float
    residual: float
    wng_linear: float
    wng_db: float
    lambda_reg: float
    gamma_used: float
    gamma_max: float
    feasibility_margin: float
    clamped: bool
    distortionless_error: float
    stationarity_residual: float
    stationarity_scale: float


def solve_frequency(G, b_hat, d, gamma):
    """Solve one per-frequency design problem; returns (w, lambda, diagnostics).

    Steps: particular solution w_p = conj(d)/||d||^2 of the distortionless
    constraint; orthonormal basis U of its feasible subspace; then
    min_z ||(G U) z - (b_hat - G w_p)||^2 with ||z||^2 <= rho^2 =
    1/gamma - 1/||d||^2, solved through the SVD of G U. The multiplier is 0
    when the minimum-norm least-squares solution already lies in the ball,
    otherwise it is bisected until ||z(lambda)||^2 hits rho^2.
    """
    G = np.asarray(G, dtype=np.complex128)
    d = np.asarray(d, dtype=np.complex128).reshape(-1)
    b = np.asarray(b_hat, dtype=float).reshape(-1)
    if G.ndim != 2 or G.shape != (b.size, d.size):
        raise ValueError(f"G shape {G.shape} inconsistent with b ({b.size}) and d ({d.size})")
    if G.shape[0] < 1:
        raise ValueError("at least one design direction is required")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(b)) and np.all(np.isfinite(d))):
        raise ValueError("non-finite design inputs")
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError("gamma must be positive")

    nd2 = feasibility_bound(d)
    if gamma > nd2 * (1.0 + FEASIBILITY_SLACK):
        raise FeasibilityError(
            f"WNG floor {gamma:.6g} exceeds the feasible maximum {nd2:.6g}", gamma_max=nd2
        )

    w_p = d.conj() / nd2
    # rho^2 = 1/gamma - 1/||d||^2, written to avoid cancellation near the bound;
    # a gap within the feasibility slack is rounding noise, not freedom to move
    gap = (nd2 - gamma) / nd2
    rho2 = gap / gamma if gap > FEASIBILITY_SLACK else 0.0

    U = scipy.linalg.null_space(d[None, :])
    A = G @ U
    r = b - G @ w_p

    if U.shape[1] == 0 or rho2 == 0.0:
        # feasible set is the single point w_p (N = 1, or gamma at the bound)
        z = np.zeros(U.shape[1], dtype=np.complex128)
        lam = 0.0
    else:
        z, lam = _ball_constrained_lstsq(A, r, rho2)

    w = w_p + U @ z
    resid_vec = A @ z - r
    stat = float(np.linalg.norm(A.conj().T @ resid_vec + lam * z))
    scale = float(np.linalg.norm(A.conj().T @ r))
    wtd = complex(w @ d)
    wng = abs(wtd) ** 2 / float(np.vdot(w, w).real)
    diag = BinDiagnostics(
        frequency_hz=float("nan"),
        residual=float(np.linalg.norm(G @ w - b)),
        wng_linear=wng,
        wng_db=10.0 * math.log10(wng),
        lambda_reg=lam,
        gamma_used=gamma,
        gamma_max=nd2,
        feasibility_margin=nd2 - gamma,
        clamped=False,
        distortionless_error=abs(wtd - 1.0),
        stationarity_residual=stat,
        stationarity_scale=scale,
    )
    return w, lam, diag


def _ball_constrained_lstsq(A, r, rho2):
    """min_z ||A z - r||^2 s.t. ||z||^2 <= rho2 via SVD and multiplier bisection."""
    Ua, s, Vh = np.linalg.svd(A, full_matrices=False)
    c = Ua.conj().T @ r
    cutoff = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    keep = s > cutoff
    s_k = s[keep]
    c_k = c[keep]
    V_k = Vh[keep].conj().T

    def z_norm2(lam):
        coef = s_k / (s_k * s_k + lam)
        return float(np.sum(np.abs(coef * c_k) ** 2))

    def z_of(lam):
        coef = s_k / (s_k * s_k + lam)
        return V_k @ (coef * c_k)

    if z_norm2(0.0) <= rho2 * (1.0 + 1e-12):
        return z_of(0.0), 0.0

    lam_hi = 1.0
    for _ in range(MAX_BISECT_ITER):
        if z_norm2(lam_hi) <= rho2:
            break
        lam_hi *= 2.0
    else:
        raise NumericalError(
            f"bisection bracket not found: lambda_hi={lam_hi:.3g}, "
            f"||z||^2={z_norm2(lam_hi):.3g}, rho^2={rho2:.3g}"
        )

    # bisect to the bracket-width limit: results are then reproducible to
    # ~1e-13 relative, which satisfies the ball tolerance a fortiori
    lam_lo = 0.0
    for _ in range(MAX_BISECT_ITER):
        lam = 0.5 * (lam_lo + lam_hi)
        v = z_norm2(lam)
        if v == rho2:
            return z_of(lam), lam
        if v > rho2:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo <= BRACKET_TOLERANCE * lam_hi:
            final = z_norm2(lam_hi)
            if abs(final - rho2) > BALL_TOLERANCE * max(rho2, 1.0):
                raise NumericalError(
                    f"multiplier bisection stalled: bracket [{lam_lo:.6g}, {lam_hi:.6g}], "
                    f"||z||^2={final:.6g}, rho^2={rho2:.6g}"
                )
            return z_of(lam_hi), lam_hi
    raise NumericalError(
        f"multiplier bisection did not converge: bracket [{lam_lo:.6g}, {lam_hi:.6g}], "
        f"rho^2={rho2:.3g}"
    )


@dataclass(frozen=True)
class DesignConfig:
    """User-level design parameters; the WNG floor is supplied in dB."""

    gamma_db: float
    look: Direction
    beamwidth_3db: float
    num_taps: int
    sample_rate: float
    design_band: tuple = (300.0, 5000.0)

    def __post_init__(self):
        if not math.isfinite(self.gamma_db):
            raise ValueError("gamma_db must be finite")
        if self.num_taps < 2 or self.num_taps % 2 != 0:
            raise ValueError("num_taps must be even and >= 2")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        if not (math.isfinite(self.beamwidth_3db) and self.beamwidth_3db > 0):
            raise ValueError("beamwidth_3db must be positive")
        lo, hi = self.design_band
        if not 0.0 <= lo < hi <= self.sample_rate / 2.0:
            raise ValueError(f"design_band {self.design_band} outside [0, fs/2]")
        object.__setattr__(self, "design_band", (float(lo), float(hi)))

    @property
    def gamma(self):
        """Linear WNG floor; positive by construction."""
        return 10.0 ** (self.gamma_db / 10.0)

    @property
    def frequency_grid(self):
        return FrequencyGrid(self.sample_rate, self.num_taps)


@dataclass(frozen=True)
class FrequencyDesign:
    """Per-bin optimum weights with multipliers and solver diagnostics."""

    freqs: FrequencyGrid
    weights: np.ndarray
    multipliers: np.ndarray
    diagnostics: tuple
    look: Direction
    gamma: float
    grid_hash: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128)
        lam = np.asarray(self.multipliers, dtype=float)
        if w.ndim != 2 or w.shape[0] != self.freqs.num_bins:
            raise ValueError(f"weights shape {w.shape} inconsistent with {self.freqs.num_bins} bins")
        if lam.shape != (w.shape[0],):
            raise ValueError("one multiplier per bin is required")
        if len(self.diagnostics) != w.shape[0]:
            raise ValueError("one diagnostics record per bin is required")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(lam < 0.0):
            raise ValueError("multipliers must be nonnegative")
        w = w.copy()
        w.setflags(write=False)
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "multipliers", lam)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    @property
    def num_mics(self):
        return self.weights.shape[1]

    def assert_bin_invariants(self):
        """Check the per-bin KKT tolerances; raises AssertionError on violation."""
        for q, diag in enumerate(self.diagnostics):
            g_used = diag.gamma_used
            w = self.weights[q]
            lam = float(self.multipliers[q])
            norm2 = float(np.vdot(w, w).real)
            assert diag.distortionless_error <= 1e-9, f"bin {q}: w^T d off by {diag.distortionless_error}"
            assert norm2 <= (1.0 / g_used) * (1.0 + 1e-8), f"bin {q}: WNG ball violated"
            assert lam >= 0.0, f"bin {q}: negative multiplier"
            slack = abs(lam * (norm2 - 1.0 / g_used))
            assert slack <= 1e-8 / g_used, f"bin {q}: complementary slackness {slack}"


def grid_fingerprint(grid):
    """Stable hash of a direction grid, for provenance checks in design files."""
    blob = json.dumps(grid.to_json_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def subset_indices(sub, full):
    """Map each direction of ``sub`` to its index in ``full`` (identity match)."""
    keys = {}
    for i, (a, e) in enumerate(zip(full.azimuths, full.elevations)):
        keys[(round(a * 1e6), round(e * 1e6))] = i
    idx = np.empty(sub.size, dtype=int)
    for j, (a, e) in enumerate(zip(sub.azimuths, sub.elevations)):
        key = (round(a * 1e6), round(e * 1e6))
        if key not in keys:
            raise ValueError(f"design direction ({a}, {e}) is not in the steering grid")
        idx[j] = keys[key]
    return idx


def design_broadband(steer, desired, cfg):
    """Run the per-frequency solver at every DFT bin.

    Bins where the requested floor exceeds the feasible maximum ||d||^2 are
    solved with gamma clamped to 0.999 * ||d||^2 and flagged in diagnostics.
    """
    if steer.freqs != cfg.frequency_grid:
        raise ValueError("steering frequencies do not match the design configuration")
    look_idx = steer.grid.index_of(cfg.look)
    rows = subset_indices(desired.grid, steer.grid)
    f_hz = steer.freqs.bin_frequencies
    gamma = cfg.gamma

    n = steer.num_mics
    q_bins = steer.freqs.num_bins
    weights = np.empty((q_bins, n), dtype=np.complex128)
    multipliers = np.empty(q_bins)
    diagnostics = []
    for q in range(q_bins):
        d = steer.g[q, look_idx, :]
        G = steer.g[q][rows, :]
        gamma_max = feasibility_bound(d)
        clamped = gamma > gamma_max * (1.0 + FEASIBILITY_SLACK)
        gamma_used = 0.999 * gamma_max if clamped else gamma
        try:
            w, lam, diag = solve_frequency(G, desired.values, d, gamma_used)
        except (NumericalError, ValueError) as exc:
            raise NumericalError(f"bin {q} ({f_hz[q]:.1f} Hz): {exc}") from exc
        weights[q] = w
        multipliers[q] = lam
        diagnostics.append(
            _replace_diag(diag, frequency_hz=float(f_hz[q]), clamped=clamped,
                          feasibility_margin=gamma_max - gamma)
        )
    return FrequencyDesign(
        freqs=steer.freqs,
        weights=weights,
        multipliers=multipliers,
        diagnostics=tuple(diagnostics),
        look=cfg.look,
        gamma=gamma,
        grid_hash=grid_fingerprint(desired.grid),
    )


def _replace_diag(diag, **updates):
    doc = asdict(diag)
    doc.update(updates)
    return BinDiagnostics(**doc)


def save_design(fd, path, data_file=None):
    """Design file: JSON metadata plus a complex64-LE weight tensor [bin][mic]."""
    import os

    path = os.fspath(path)
    if data_file is None:
        base = os.path.basename(path)
        stem = base[: -len(".json")] if base.endswith(".json") else base
        data_file = stem + ".bin"
    doc = {
        "format": DESIGN_FORMAT,
        "version": DESIGN_VERSION,
        "sample_rate_hz": float(fd.freqs.sample_rate),
        "num_taps": int(fd.freqs.num_taps),
        "num_bins": int(fd.freqs.num_bins),
        "num_mics": int(fd.num_mics),
        "gamma_linear": float(fd.gamma),
        "gamma_db": 10.0 * math.log10(fd.gamma),
        "look": {"azimuth_deg": fd.look.azimuth, "elevation_deg": fd.look.elevation},
        "grid_hash": fd.grid_hash,
        "dtype": "complex64-le",
        "layout": "bin_mic",
        "data_file": data_file,
        "multipliers": [float(v) for v in fd.multipliers],
        "diagnostics": [asdict(d) for d in fd.diagnostics],
    }
    payload = np.ascontiguousarray(fd.weights.astype(np.complex64)).tobytes()
    _manifest.write_container(path, doc, payload)


def load_design(path):
    doc = _manifest.read_manifest(path, DESIGN_FORMAT, DESIGN_VERSION)
    try:
        freqs = FrequencyGrid(float(doc["sample_rate_hz"]), int(doc["num_taps"]))
        n = int(doc["num_mics"])
        look = Direction(doc["look"]["azimuth_deg"], doc["look"]["elevation_deg"])
        gamma = float(doc["gamma_linear"])
        multipliers = np.asarray(doc["multipliers"], dtype=float)
        diagnostics = tuple(BinDiagnostics(**rec) for rec in doc["diagnostics"])
        grid_hash = str(doc["grid_hash"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest {path}: {exc}", byte_offset=0) from exc
    if doc.get("dtype") != "complex64-le" or doc.get("layout") != "bin_mic":
        raise FormatError(f"manifest {path}: unsupported dtype/layout", byte_offset=0)
    q = freqs.num_bins
    payload = _manifest.read_payload(path, doc, q * n * 8)
    weights = np.frombuffer(payload, dtype="<c8").reshape(q, n).astype(np.complex128)
    if not np.all(np.isfinite(weights)):
        raise FormatError(f"payload of {path} contains non-finite weights", byte_offset=0)
    return FrequencyDesign(freqs, weights, multipliers, diagnostics, look, gamma, grid_hash)
