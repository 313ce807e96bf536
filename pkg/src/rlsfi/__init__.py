"""Robust least-squares frequency-invariant (RLSFI) beamforming toolkit.

Designs filter-and-sum beamformers for 3-D microphone arrays with an
explicit white-noise-gain floor and a two-dimensional (azimuth x elevation)
frequency-invariant desired response, and evaluates them via beampatterns,
white noise gain, directivity index, and frequency-weighted segmental SNR
on synthesized scenes.
"""

from .analysis import (
    BeampatternMap,
    CurveReport,
    beampattern,
    design_beampattern,
    directivity_index,
    normalize_db,
    white_noise_gain,
    wng_curve,
    wng_curve_fir,
)
from .arrays import head_array_12
from .desired import DesiredResponse, build_desired_1d, build_desired_2d, taper
from .dsp import (
    AudioBuffer,
    SceneRender,
    SceneSource,
    SceneSpec,
    filter_and_sum,
    reference_signals,
    render_scene,
    speech_shaped_noise,
)
from .errors import FeasibilityError, FormatError, NumericalError
from .fir import BeamformerFilters, filter_response, load_filters, save_filters, synthesize_fir
from .geometry import (
    ArrayGeometry,
    Direction,
    DirectionGrid,
    great_circle_distance,
    load_geometry,
    load_geometry_csv,
    make_uniform_grid,
    nearest_direction,
    save_geometry,
)
from .metrics import (
    FilterBank,
    FwSegSnrParams,
    ScenarioReport,
    eval_scenario,
    fwsegsnr,
    fwsegsnr_details,
)
from .solver import (
    DesignConfig,
    FrequencyDesign,
    design_broadband,
    feasibility_bound,
    load_design,
    save_design,
    solve_frequency,
)
from .steering import (
    FrequencyGrid,
    HrtfDataset,
    SteeringSet,
    free_field_steering,
    hrtf_steering,
    load_hrtf_dataset,
    save_hrtf_dataset,
    steering_submatrix,
)
from .wavio import read_wav, write_wav

__version__ = "0.1.0"
