//! Finite patches `Λ ∩ C_R` of model sets and torus-parametrised hull sampling.

mod io;

pub use io::{read_patch, write_patch};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scheme::{CutProjectScheme, ModuleVector, Side};
use crate::window::Window;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Internal coordinates closer than this to `∂W` make a hull point singular.
pub const SINGULAR_TOL: f64 = 1e-9;
pub const DEFAULT_POINT_CAP: u64 = 10_000_000;
const HULL_RETRIES: usize = 64;

/// A translate `(u, v)` of the embedded lattice: an element of the hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Smallest distance from a generated internal coordinate to `∂W`
    /// (infinite until a patch has been generated).
    #[serde(default = "infinity")]
    pub singular_margin: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}

impl HullPoint {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Self {
        HullPoint {
            u,
            v,
            singular_margin: f64::INFINITY,
        }
    }

    pub fn origin(d: usize, e: usize) -> Self {
        Self::new(vec![0.0; d], vec![0.0; e])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchPoint {
    pub m: ModuleVector,
    pub x: Vec<f64>,
}

/// `Λ ∩ C_R` for one hull element, sorted by physical position.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPatch {
    pub scheme: CutProjectScheme,
    pub window: Window,
    pub hull: HullPoint,
    pub r: f64,
    pub points: Vec<PatchPoint>,
    pub seed: Option<u64>,
}

impl PointPatch {
    pub fn d(&self) -> usize {
        self.scheme.d()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.r.powi(self.d() as i32)
    }

    /// Points per unit volume of `C_R`.
    pub fn density(&self) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::EmptyPatch);
        }
        Ok(self.points.len() as f64 / self.volume())
    }

    /// Identity hash over scheme, window, hull translate and cube size.
    pub fn id(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.scheme.label().as_bytes());
        for x in self.scheme.basis().iter() {
            h.update(x.to_le_bytes());
        }
        h.update(self.window.to_string().as_bytes());
        for x in self.hull.u.iter().chain(&self.hull.v) {
            h.update(x.to_le_bytes());
        }
        h.update(self.r.to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Indices of points whose first coordinate lies in `[lo, hi]`.
    pub fn slab(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.points.partition_point(|p| p.x[0] < lo);
        let b = self.points.partition_point(|p| p.x[0] <= hi);
        a..b.max(a)
    }

    /// Smallest pairwise distance (the uniform-discreteness radius of the sample).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                if q.x[0] - p.x[0] >= best {
                    break;
                }
                let dist = crate::numeric::norm(
                    &p.x.iter().zip(&q.x).map(|(a, b)| a - b).collect::<Vec<_>>(),
                );
                best = best.min(dist);
            }
        }
        best
    }
}

/// Checks that a window lives in the scheme's internal space.
fn check_window(scheme: &CutProjectScheme, window: &Window) -> Result<()> {
    window.validate()?;
    if window.dim() != scheme.e() {
        return Err(Error::DimensionMismatch {
            expected: scheme.e(),
            got: window.dim(),
        });
    }
    if scheme.side() != Side::Physical {
        return Err(Error::SideMismatch {
            expected: Side::Physical,
            got: scheme.side(),
        });
    }
    Ok(())
}

/// `{ phys(m)+u : phys(m)+u ∈ C_R, star(m)+v ∈ W }`, enumerated completely.
pub fn generate_patch(
    scheme: &CutProjectScheme,
    window: &Window,
    hull: &HullPoint,
    r: f64,
) -> Result<PointPatch> {
    generate_patch_capped(scheme, window, hull, r, DEFAULT_POINT_CAP)
}

pub fn generate_patch_capped(
    scheme: &CutProjectScheme,
    window: &Window,
    hull: &HullPoint,
    r: f64,
    cap: u64,
) -> Result<PointPatch> {
    check_window(scheme, window)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("cube size must be positive, got {r}")));
    }
    let (d, e) = (scheme.d(), scheme.e());
    if hull.u.len() != d || hull.v.len() != e {
        return Err(Error::DimensionMismatch {
            expected: d + e,
            got: hull.u.len() + hull.v.len(),
        });
    }
    let expected = window.volume() * r.powi(d as i32) / scheme.covolume();
    if expected > cap as f64 {
        return Err(Error::ResourceCap {
            estimate: expected as u64,
            cap,
        });
    }
    let (wlo, whi) = window.bounding_box();
    let mut lo = Vec::with_capacity(d + e);
    let mut hi = Vec::with_capacity(d + e);
    for k in 0..d {
        lo.push(-r / 2.0 - hull.u[k]);
        hi.push(r / 2.0 - hull.u[k]);
    }
    for k in 0..e {
        lo.push(wlo[k] - hull.v[k] - 1e-6);
        hi.push(whi[k] - hull.v[k] + 1e-6);
    }
    let candidates = scheme.lattice_points_in_box(&lo, &hi, cap.saturating_mul(64))?;

    let half = r / 2.0;
    let mut margin = f64::INFINITY;
    let mut points = Vec::new();
    for m in candidates {
        let full = scheme.embed_raw(&m.coords);
        let x: Vec<f64> = (0..d).map(|k| full[k] + hull.u[k]).collect();
        if !x.iter().all(|c| c.abs() < half) {
            continue;
        }
        let y: Vec<f64> = (0..e).map(|k| full[d + k] + hull.v[k]).collect();
        let sd = window.signed_distance(&y);
        margin = margin.min(sd.abs());
        if sd.abs() < SINGULAR_TOL {
            return Err(Error::Singular { margin: sd.abs() });
        }
        if sd > 0.0 {
            points.push(PatchPoint { m, x });
        }
    }
    points.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.m.cmp(&b.m))
    });
    let mut hull = hull.clone();
    hull.singular_margin = margin;
    Ok(PointPatch {
        scheme: scheme.clone(),
        window: window.clone(),
        hull,
        r,
        points,
        seed: None,
    })
}

/// Draws `(u, v) = B·t` with `t` uniform in `[0,1)^{d+e}`, resampling until the
/// patch of size `r` is nonsingular.
pub fn sample_hull(
    scheme: &CutProjectScheme,
    window: &Window,
    r: f64,
    seed: u64,
) -> Result<HullPoint> {
    check_window(scheme, window)?;
    let mut rng = SeededRng::new(seed);
    let n = scheme.rank();
    for _ in 0..HULL_RETRIES {
        let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let mut full = vec![0.0; n];
        for (i, f) in full.iter_mut().enumerate() {
            *f = (0..n).map(|j| scheme.basis()[(i, j)] * t[j]).sum();
        }
        let hull = HullPoint::new(full[..scheme.d()].to_vec(), full[scheme.d()..].to_vec());
        match generate_patch(scheme, window, &hull, r) {
            Ok(patch) => return Ok(patch.hull),
            Err(Error::Singular { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(Error::RetryExhausted {
        attempts: HULL_RETRIES,
    })
}

/// Samples a hull point and generates its patch, recording the seed.
pub fn sample_patch(
    scheme: &CutProjectScheme,
    window: &Window,
    r: f64,
    seed: u64,
) -> Result<PointPatch> {
    let hull = sample_hull(scheme, window, r, seed)?;
    let mut patch = generate_patch(scheme, window, &hull, r)?;
    patch.seed = Some(seed);
    Ok(patch)
}

pub fn density(patch: &PointPatch) -> Result<f64> {
    patch.density()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{preset, TAU};

    fn fib() -> (CutProjectScheme, Window) {
        (preset("fibonacci").unwrap(), Window::for_preset("fibonacci").unwrap())
    }

    #[test]
    fn z_fixture_is_the_integers() {
        let s = preset("z-fixture").unwrap();
        let w = Window::for_preset("z-fixture").unwrap();
        let p = generate_patch(&s, &w, &HullPoint::origin(1, 1), 10.0).unwrap();
        let xs: Vec<f64> = p.points.iter().map(|p| p.x[0]).collect();
        assert_eq!(xs, (-4..=4).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(p.density().unwrap(), 0.9);
    }

    #[test]
    fn open_cube_excludes_faces() {
        let s = preset("z-fixture").unwrap();
        let w = Window::for_preset("z-fixture").unwrap();
        let p = generate_patch(&s, &w, &HullPoint::origin(1, 1), 8.0).unwrap();
        assert_eq!(p.len(), 7);
    }

    #[test]
    fn singular_hull_is_rejected() {
        let (s, w) = fib();
        let err = generate_patch(&s, &w, &HullPoint::origin(1, 1), 100.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn points_satisfy_membership() {
        let (s, w) = fib();
        let hull = HullPoint::new(vec![0.3], vec![0.001]);
        let p = generate_patch(&s, &w, &hull, 500.0).unwrap();
        for pt in &p.points {
            assert!(pt.x[0].abs() < 250.0);
            let y = s.star_coords(&pt.m).unwrap()[0] + 0.001;
            assert!(y > 0.0 && y < TAU);
        }
        assert!(p.hull.singular_margin >= SINGULAR_TOL);
    }

    #[test]
    fn monotone_in_cube_size() {
        let (s, w) = fib();
        let hull = HullPoint::new(vec![0.1], vec![0.2]);
        let small = generate_patch(&s, &w, &hull, 300.0).unwrap();
        let large = generate_patch(&s, &w, &hull, 700.0).unwrap();
        let restricted: Vec<_> = large
            .points
            .iter()
            .filter(|p| p.x[0].abs() < 150.0)
            .cloned()
            .collect();
        assert_eq!(restricted, small.points);
    }

    #[test]
    fn translation_consistency() {
        let (s, w) = fib();
        let r = 400.0;
        let u = 3.7;
        let shifted = generate_patch(&s, &w, &HullPoint::new(vec![u], vec![0.2]), r).unwrap();
        let base = generate_patch(&s, &w, &HullPoint::new(vec![0.0], vec![0.2]), r).unwrap();
        let a: Vec<_> = shifted.points.iter().map(|p| p.m.clone()).filter(|m| {
            let x = s.phys_coords(m).unwrap()[0];
            (x + u).abs() < r / 2.0 && x.abs() < r / 2.0
        }).collect();
        let b: Vec<_> = base.points.iter().map(|p| p.m.clone()).filter(|m| {
            let x = s.phys_coords(m).unwrap()[0];
            (x + u).abs() < r / 2.0
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_hull_is_deterministic_and_uniform() {
        let s = preset("z-fixture").unwrap();
        let w = Window::for_preset("z-fixture").unwrap();
        assert_eq!(sample_hull(&s, &w, 10.0, 7).unwrap(), sample_hull(&s, &w, 10.0, 7).unwrap());
        let mean: f64 = (0..1000)
            .map(|seed| sample_hull(&s, &w, 10.0, seed).unwrap().u[0])
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn degenerate_window_fails() {
        let s = preset("z-fixture").unwrap();
        let w = Window::Interval { lo: 0.0, hi: 1e-10 };
        assert!(matches!(sample_hull(&s, &w, 10.0, 1), Err(Error::InvalidWindow(_))));
    }

    #[test]
    fn empty_patch_has_no_density() {
        let s = preset("z-fixture").unwrap();
        let w = Window::interval(0.2, 0.4).unwrap();
        let p = generate_patch(&s, &w, &HullPoint::origin(1, 1), 10.0).unwrap();
        assert!(p.is_empty());
        assert_eq!(density(&p), Err(Error::EmptyPatch));
    }

    #[test]
    fn resource_cap() {
        let (s, w) = fib();
        let err = generate_patch_capped(&s, &w, &HullPoint::new(vec![0.0], vec![0.2]), 1e6, 1000)
            .unwrap_err();
        assert!(matches!(err, Error::ResourceCap { .. }));
    }

    #[test]
    fn ammann_beenker_density() {
        let s = preset("ammann-beenker").unwrap();
        let w = Window::for_preset("ammann-beenker").unwrap();
        let hull = sample_hull(&s, &w, 60.0, 3).unwrap();
        let p = generate_patch(&s, &w, &hull, 60.0).unwrap();
        let expected = w.volume() / s.covolume();
        assert!((p.density().unwrap() - expected).abs() / expected < 0.03);
        assert!(p.min_separation() > 0.5);
    }
}
