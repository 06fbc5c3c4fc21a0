//! Cut-and-project model sets, their correlations and diffraction, and the
//! cycle function linking moments to Bragg amplitudes.

pub mod correlations;
pub mod cyclefunc;
pub mod cycles;
pub mod error;
pub mod modelset;
pub mod numeric;
pub mod rng;
pub mod scheme;
pub mod spectrum;
pub mod window;

pub use correlations::{birkhoff_moment, npoint_correlation, GaussianTestFunction, TranslateGrid};
pub use cyclefunc::{estimate_a, CycleFunction, CycleFunctionEstimate};
pub use cycles::{decompose, sum_as_bragg, Cycle};
pub use error::{Error, Result};
pub use modelset::{generate_patch, sample_hull, sample_patch, HullPoint, PatchPoint, PointPatch};
pub use num_complex::Complex64;
pub use scheme::{preset, CutProjectScheme, ModuleVector, Side};
pub use spectrum::{bombieri_taylor, enumerate_spectrum, Classification, PeakRecord, SpectrumParams, SpectrumTable};
pub use window::Window;
