"""Reference microphone arrays used by the demos and tests.

The 12-microphone head array is a desk-scale stand-in for a humanoid-head
mounting: microphones scattered over a sphere of roughly 9 cm radius, denser
on the left side, with the front along the +y axis (azimuth 90, elevation
90). The frontmost microphone is the one with the largest y coordinate.
"""

import numpy as np

from .geometry import ArrayGeometry

# positions in meters, rounded to 0.1 mm
_HEAD_12_POSITIONS = [
    [0.0492, 0.0281, 0.0655],
    [-0.0445, 0.0361, 0.0638],
    [0.0731, 0.0430, -0.0237],
    [-0.0678, 0.0524, 0.0098],
    [0.0200, 0.0851, 0.0262],
    [-0.0254, 0.0809, -0.0322],
    [0.0847, -0.0273, 0.0194],
    [-0.0882, -0.0180, -0.0113],
    [0.0314, -0.0672, 0.0549],
    [-0.0391, -0.0766, 0.0229],
    [0.0061, -0.0366, -0.0786],
    [-0.0541, 0.0224, -0.0666],
]


def head_array_12():
    """The canonical 12-microphone head-mounted array."""
    mics = np.asarray(_HEAD_12_POSITIONS, dtype=float)
    frontmost = int(np.argmax(mics[:, 1]))
    return ArrayGeometry(mics, frontmost_index=frontmost)
