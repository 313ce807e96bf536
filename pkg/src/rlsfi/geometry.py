"""Microphone-array geometry, spherical direction grids, and angular arithmetic.

Angles follow the spherical-array convention: azimuth ``phi`` is measured in
degrees from the positive x-axis, elevation ``theta`` in degrees from the
positive z-axis (colatitude), so ``theta = 90`` is the horizontal plane.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * math.pi

#: minimum admissible spacing between two microphones, meters
MIN_MIC_SPACING = 1e-6

#: angular slack (degrees) used to detect ties in nearest-direction lookups
TIE_TOLERANCE_DEG = 1e-9


@dataclass(frozen=True)
class Direction:
    """A direction on the sphere: azimuth in [0, 360), elevation in [0, 180]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = float(self.azimuth)
        el = float(self.elevation)
        if not (math.isfinite(az) and math.isfinite(el)):
            raise ValueError("direction angles must be finite")
        if not 0.0 <= az < 360.0:
            raise ValueError(f"azimuth {az} outside [0, 360)")
        if not 0.0 <= el <= 180.0:
            raise ValueError(f"elevation {el} outside [0, 180]")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    def unit_vector(self):
        """Unit vector pointing from the origin toward this direction."""
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        return np.array(
            [math.sin(el) * math.cos(az), math.sin(el) * math.sin(az), math.cos(el)]
        )


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in a head-fixed Cartesian frame (meters).

    ``frontmost_index`` names the reference microphone used when evaluating
    input signals; it is configuration, not inferred from the coordinates.
    """

    mics: np.ndarray
    frontmost_index: int = 0

    def __post_init__(self):
        mics = np.asarray(self.mics, dtype=float)
        if mics.ndim != 2 or mics.shape[1] != 3 or mics.shape[0] < 1:
            raise ValueError("mics must be an (N, 3) array with N >= 1")
        if not np.all(np.isfinite(mics)):
            raise ValueError("microphone positions must be finite")
        if not 0 <= self.frontmost_index < mics.shape[0]:
            raise ValueError(f"frontmost_index {self.frontmost_index} out of range")
        diff = mics[:, None, :] - mics[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        np.fill_diagonal(dist, np.inf)
        if dist.min() < MIN_MIC_SPACING:
            raise ValueError("two microphones closer than the minimum spacing")
        mics = mics.copy()
        mics.setflags(write=False)
        object.__setattr__(self, "mics", mics)

    @property
    def num_mics(self):
        return self.mics.shape[0]

    def centroid(self):
        return self.mics.mean(axis=0)

    def relative_positions(self):
        """Positions relative to the array centroid (the phase reference)."""
        return self.mics - self.centroid()

    def to_json_dict(self):
        return {
            "mics_m": [[float(v) for v in row] for row in self.mics],
            "frontmost_index": int(self.frontmost_index),
        }

    @classmethod
    def from_json_dict(cls, doc):
        return cls(np.asarray(doc["mics_m"], dtype=float), int(doc["frontmost_index"]))


def save_geometry(geom, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(geom.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_geometry(path):
    with open(path, "r", encoding="utf-8") as fh:
        return ArrayGeometry.from_json_dict(json.load(fh))


def load_geometry_csv(path, frontmost_index=0):
    """Read microphone positions from a plain CSV of x,y,z rows (meters)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for record in csv.reader(fh):
            if not record or record[0].lstrip().startswith("#"):
                continue
            if len(record) != 3:
                raise ValueError(f"expected 3 columns per row, got {len(record)}")
            rows.append([float(v) for v in record])
    if not rows:
        raise ValueError("geometry CSV contains no coordinate rows")
    return ArrayGeometry(np.asarray(rows, dtype=float), frontmost_index)


@dataclass(frozen=True)
class DirectionGrid:
    """An ordered set of directions with spherical quadrature weights.

    Weights are strictly positive and sum to 4*pi (steradians of the full
    sphere) so that ``sum(w_m * f_m)`` approximates the integral of ``f``
    over the sphere.
    """

    azimuths: np.ndarray
    elevations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        az = np.asarray(self.azimuths, dtype=float)
        el = np.asarray(self.elevations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (az.ndim == el.ndim == w.ndim == 1 and az.size == el.size == w.size):
            raise ValueError("azimuths, elevations, weights must be equal-length vectors")
        if az.size < 1:
            raise ValueError("grid must contain at least one direction")
        if not (np.all(np.isfinite(az)) and np.all(np.isfinite(el)) and np.all(np.isfinite(w))):
            raise ValueError("grid entries must be finite")
        if np.any(az < 0.0) or np.any(az >= 360.0):
            raise ValueError("azimuths must lie in [0, 360)")
        if np.any(el < 0.0) or np.any(el > 180.0):
            raise ValueError("elevations must lie in [0, 180]")
        if np.any(w <= 0.0):
            raise ValueError("quadrature weights must be strictly positive")
        total = w.sum()
        if abs(total - FOUR_PI) > 1e-6 * FOUR_PI:
            raise ValueError(f"quadrature weights sum to {total}, expected 4*pi")
        keys = {(round(a * 1e9), round(e * 1e9)) for a, e in zip(az, el)}
        if len(keys) != az.size:
            raise ValueError("grid directions must be unique")
        for pole in (0.0, 180.0):
            if np.count_nonzero(el == pole) > 1:
                raise ValueError(f"pole elevation {pole} appears more than once")
        for arr, name in ((az, "azimuths"), (el, "elevations"), (w, "weights")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self):
        return self.azimuths.size

    def direction(self, index):
        return Direction(float(self.azimuths[index]), float(self.elevations[index]))

    def directions(self):
        return [self.direction(i) for i in range(self.size)]

    def unit_vectors(self):
        """(M, 3) matrix of unit vectors toward each grid direction."""
        az = np.radians(self.azimuths)
        el = np.radians(self.elevations)
        return np.stack(
            [np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)], axis=1
        )

    def index_of(self, direction, tol=1e-9):
        """Index of the grid node matching ``direction`` exactly (within tol degrees)."""
        hit = np.flatnonzero(
            (np.abs(self.azimuths - direction.azimuth) <= tol)
            & (np.abs(self.elevations - direction.elevation) <= tol)
        )
        if hit.size == 0:
            raise ValueError(
                f"direction ({direction.azimuth}, {direction.elevation}) is not a grid node"
            )
        return int(hit[0])

    def to_json_dict(self):
        return {
            "azimuths_deg": [float(v) for v in self.azimuths],
            "elevations_deg": [float(v) for v in self.elevations],
            "weights_sr": [float(v) for v in self.weights],
        }

    @classmethod
    def from_json_dict(cls, doc):
        return cls(
            np.asarray(doc["azimuths_deg"], dtype=float),
            np.asarray(doc["elevations_deg"], dtype=float),
            np.asarray(doc["weights_sr"], dtype=float),
        )


def save_grid(grid, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(grid.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_grid(path):
    with open(path, "r", encoding="utf-8") as fh:
        return DirectionGrid.from_json_dict(json.load(fh))


def _check_step(step, span, name):
    if not (math.isfinite(step) and step > 0):
        raise ValueError(f"{name} must be positive, got {step}")
    count = span / step
    if abs(count - round(count)) > 1e-9:
        raise ValueError(f"{name} {step} does not divide {span}")
    return int(round(count))


def make_uniform_grid(az_step, el_step, include_poles=True):
    """Build the uniform azimuth x elevation product grid.

    Azimuths run over {0, az_step, ..., 360 - az_step}, elevations over
    {el_step, ..., 180 - el_step}; each pole contributes a single direction
    at azimuth 90 when ``include_poles`` is set. Ordering is elevation-major
    (theta ascending, then phi ascending) with the poles first and last.
    Non-pole weights follow the product rule (proportional to sin(theta)),
    poles get their spherical-cap area; the total is rescaled to 4*pi.
    """
    n_az = _check_step(float(az_step), 360.0, "az_step")
    n_el = _check_step(float(el_step), 180.0, "el_step") - 1

    ring_az = np.arange(n_az) * float(az_step)
    ring_el = (np.arange(n_el) + 1) * float(el_step)

    az_parts, el_parts, w_parts = [], [], []
    d_az = math.radians(float(az_step))
    d_el = math.radians(float(el_step))
    cap_area = 2.0 * math.pi * (1.0 - math.cos(d_el / 2.0))

    if include_poles:
        az_parts.append([90.0])
        el_parts.append([0.0])
        w_parts.append([cap_area])
    for theta in ring_el:
        az_parts.append(ring_az)
        el_parts.append(np.full(n_az, theta))
        band = d_az * 2.0 * math.sin(d_el / 2.0) * math.sin(math.radians(theta))
        w_parts.append(np.full(n_az, band))
    if include_poles:
        az_parts.append([90.0])
        el_parts.append([180.0])
        w_parts.append([cap_area])

    az = np.concatenate([np.asarray(p, dtype=float) for p in az_parts])
    el = np.concatenate([np.asarray(p, dtype=float) for p in el_parts])
    w = np.concatenate([np.asarray(p, dtype=float) for p in w_parts])
    w *= FOUR_PI / w.sum()
    return DirectionGrid(az, el, w)


def great_circle_distance(a, b):
    """Central angle between two directions, degrees in [0, 180].

    Evaluated as atan2(|u_a x u_b|, u_a . u_b), which equals
    arccos(u_a . u_b) but stays well-conditioned near 0 and 180 degrees.
    """
    ua = a.unit_vector()
    ub = b.unit_vector()
    cross = np.linalg.norm(np.cross(ua, ub))
    dot = float(np.dot(ua, ub))
    return math.degrees(math.atan2(cross, dot))


def distances_to(grid, target):
    """Great-circle distance (degrees) from every grid node to ``target``."""
    u = grid.unit_vectors()
    ut = target.unit_vector()
    dot = u @ ut
    cross = np.linalg.norm(np.cross(u, ut[None, :]), axis=1)
    return np.degrees(np.arctan2(cross, dot))


def nearest_direction(grid, target):
    """Index of the grid node closest to ``target``; ties go to the lowest index."""
    d = distances_to(grid, target)
    return int(np.argmax(d <= d.min() + TIE_TOLERANCE_DEG))
