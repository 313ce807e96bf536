"""Frequency-invariant desired beamformer responses over a direction grid.

The desired response is a real vector in [0, 1] with value 1 at the look
direction, rolling off with great-circle distance. It is stored once,
frequency-free: the same target is used at every design frequency.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Direction,
    DirectionGrid,
    FOUR_PI,
    distances_to,
)


def taper(delta, beamwidth_3db):
    """Raised-cosine rolloff: cos(pi*delta/(2*bw)) for delta < bw, else 0.

    ``bw`` is the 3-dB beamwidth: the response crosses 1/sqrt(2) at bw/2
    and reaches exactly zero at bw. Accepts scalars or arrays of distances
    in degrees.
    """
    if not (math.isfinite(beamwidth_3db) and beamwidth_3db > 0):
        raise ValueError("beamwidth_3db must be positive")
    d = np.asarray(delta, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    # the relative epsilon keeps grid nodes that land on the support boundary
    # (up to angle rounding) at exactly zero
    inside = d < beamwidth_3db * (1.0 - 1e-12)
    out = np.where(inside, np.cos(np.pi * d / (2.0 * beamwidth_3db)), 0.0)
    if np.isscalar(delta) or getattr(delta, "ndim", 0) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class DesiredResponse:
    """Target response b_hat over the design directions."""

    grid: DirectionGrid
    values: np.ndarray
    look_index: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.grid.size:
            raise ValueError("values must match the grid size")
        if not 0 <= self.look_index < v.size:
            raise ValueError("look_index out of range")
        if v[self.look_index] != 1.0:
            raise ValueError("desired response must be exactly 1 at the look direction")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("desired response values must lie in [0, 1]")
        if np.count_nonzero(v == 1.0) != 1:
            raise ValueError("exactly one direction may have desired response 1")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def look_direction(self):
        return self.grid.direction(self.look_index)


def _on_lattice(value, step, tol=1e-9):
    ratio = value / step
    return abs(ratio - round(ratio)) <= tol


def build_desired_1d(az_step, elevation, look, beamwidth_3db):
    """Desired response on a single azimuth ring at a fixed elevation.

    The grid is the ring {0, az_step, ...} x {elevation}; the look direction
    must lie on that ring. Ring nodes get uniform (placeholder) quadrature
    weights; they matter only for full-sphere grids.
    """
    n_az = 360.0 / az_step
    if not (az_step > 0 and abs(n_az - round(n_az)) <= 1e-9):
        raise ValueError(f"az_step {az_step} does not divide 360")
    if not 0.0 < elevation < 180.0:
        raise ValueError("ring elevation must lie strictly between the poles")
    if abs(look.elevation - elevation) > 1e-9:
        raise ValueError(f"look elevation {look.elevation} is off the ring at {elevation}")
    if not _on_lattice(look.azimuth, az_step):
        raise ValueError(f"look azimuth {look.azimuth} is off the {az_step}-degree lattice")

    n = int(round(n_az))
    azimuths = np.arange(n) * float(az_step)
    grid = DirectionGrid(azimuths, np.full(n, float(elevation)), np.full(n, FOUR_PI / n))
    look_index = int(round(look.azimuth / az_step)) % n
    values = taper(distances_to(grid, look), beamwidth_3db)
    values[look_index] = 1.0
    return DesiredResponse(grid, values, look_index)


def build_desired_2d(grid, look, beamwidth_3db):
    """Desired response over a full direction grid, isotropic in great-circle distance."""
    look_index = grid.index_of(look)
    values = taper(distances_to(grid, look), beamwidth_3db)
    values[look_index] = 1.0
    return DesiredResponse(grid, values, look_index)


def write_desired_csv(desired, path, config_hash=None):
    """Dump (phi, theta, value) rows for plotting the desired-response map."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config-hash: {config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["phi_deg", "theta_deg", "value"])
        for az, el, v in zip(desired.grid.azimuths, desired.grid.elevations, desired.values):
            writer.writerow([f"{az:.6f}", f"{el:.6f}", f"{v:.12g}"])
