"""Model of a waveguide type-II PDC heralded single-photon source: dispersion,
phasematching, joint spectra, loss budget and click-level counting statistics."""

from .components import ComponentChain, GaussianMode, OpticalElement, chain_transmission, mode_overlap
from .config import RunConfig, load_config
from .counting import CountRecord, DetectorModel, ExperimentConfig, SourceState, run_experiment
from .dispersion import MaterialModel, get_material, group_index, refractive_index
from .jsa import JointSpectralAmplitude, PumpEnvelope, SpectralFilter, SpectralGridAxes, build_jsa
from .phasematch import PolarizationMap, WaveguideSpec, calibrate_offset, find_degenerate_wavelength

__version__ = "0.1.0"
