//! Benchmark fixtures for the kernels in `benches/`.

use quasicorr::scheme::TAU;
use quasicorr::{enumerate_spectrum, preset, sample_patch, PointPatch, SpectrumParams, SpectrumTable, Window};

pub fn fibonacci_patch(r: f64) -> PointPatch {
    let s = preset("fibonacci").expect("preset");
    let w = Window::interval(0.0, TAU).expect("window");
    sample_patch(&s, &w, r, 7).expect("patch")
}

pub fn fibonacci_table(k_max: f64) -> SpectrumTable {
    let s = preset("fibonacci").expect("preset");
    let w = Window::interval(0.0, TAU).expect("window");
    let mut p = SpectrumParams::with_defaults(k_max, TAU / 5f64.sqrt());
    p.eps_bragg = 1e-4;
    enumerate_spectrum(&s, &w, p).expect("table")
}
