//! Acceptance windows in internal space and their Fourier transforms.

use crate::error::{Error, Result};
use crate::numeric::{expm1_over, sinc};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

pub const MIN_WINDOW_VOLUME: f64 = 1e-9;

/// A compact window: a closed interval (`e = 1`) or a convex polygon (`e = 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Interval { lo: f64, hi: f64 },
    /// Counter-clockwise vertex list.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Window {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let w = Window::Interval { lo, hi };
        w.validate()?;
        Ok(w)
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let w = Window::Polygon { vertices };
        w.validate()?;
        Ok(w)
    }

    /// Regular octagon with unit edges centred at the origin.
    pub fn octagon() -> Self {
        let r = 0.5 / (PI / 8.0).sin();
        let vertices = (0..8)
            .map(|l| {
                let a = (2 * l + 1) as f64 * PI / 8.0;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        Window::Polygon { vertices }
    }

    /// Default window for a preset scheme.
    pub fn for_preset(name: &str) -> Result<Self> {
        match name {
            "z-fixture" => Window::interval(-0.5, 0.5),
            "fibonacci" => Window::interval(0.0, crate::scheme::TAU),
            "silver-mean" => Window::interval(0.0, 2f64.sqrt()),
            "ammann-beenker" => Ok(Window::octagon()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Window::Interval { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidWindow("non-finite endpoint".into()));
                }
                if hi - lo < MIN_WINDOW_VOLUME {
                    return Err(Error::InvalidWindow(format!(
                        "interval [{lo}, {hi}] has empty interior"
                    )));
                }
            }
            Window::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidWindow("polygon needs at least 3 vertices".into()));
                }
                let n = vertices.len();
                for i in 0..n {
                    let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if cross < -1e-12 {
                        return Err(Error::InvalidWindow(
                            "polygon must be convex and counter-clockwise".into(),
                        ));
                    }
                }
                if self.volume() < MIN_WINDOW_VOLUME {
                    return Err(Error::InvalidWindow("polygon has empty interior".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Interval { .. } => 1,
            Window::Polygon { .. } => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Window::Interval { lo, hi } => hi - lo,
            Window::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum::<f64>()
            }
        }
    }

    /// Length of the boundary (two for an interval: its endpoint count).
    pub fn perimeter(&self) -> f64 {
        match self {
            Window::Interval { .. } => 2.0,
            Window::Polygon { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
                    })
                    .sum()
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Window::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Window::Polygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_distance(&self, y: &[f64]) -> f64 {
        match self {
            Window::Interval { lo, hi } => (y[0] - lo).min(hi - y[0]),
            Window::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = true;
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                    let (px, py) = (y[0] - a[0], y[1] - a[1]);
                    if ex * py - ey * px < 0.0 {
                        inside = false;
                    }
                    let len2 = ex * ex + ey * ey;
                    let t = ((px * ex + py * ey) / len2).clamp(0.0, 1.0);
                    let (dx, dy) = (px - t * ex, py - t * ey);
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
                if inside {
                    best
                } else {
                    -best
                }
            }
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.signed_distance(y) >= 0.0
    }

    /// `1̂_W(y) = ∫_W e^{-2πi y·v} dv`, in closed form.
    pub fn fourier_transform(&self, y: &[f64]) -> Complex64 {
        match self {
            Window::Interval { lo, hi } => {
                let a = hi - lo;
                let c = 0.5 * (lo + hi);
                let phase = Complex64::from_polar(1.0, -2.0 * PI * y[0] * c);
                phase * (a * sinc(PI * a * y[0]))
            }
            Window::Polygon { vertices } => polygon_ft(vertices, [y[0], y[1]]),
        }
    }

    /// `sup_{|y| ≥ r} |1̂_W(y)|` bound from boundary decay: `perimeter / (2π r)`.
    pub fn decay_bound(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.volume();
        }
        self.volume().min(self.perimeter() / (2.0 * PI * r))
    }

    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Interval { lo, hi } => write!(f, "interval:{lo:?},{hi:?}"),
            Window::Polygon { vertices } => {
                write!(f, "polygon:")?;
                for (i, v) in vertices.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{:?},{:?}", v[0], v[1])?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("window value `{t}`: {e}")))
        };
        if let Some(rest) = s.strip_prefix("interval:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("bad interval `{s}`")));
            }
            Window::interval(parse(parts[0])?, parse(parts[1])?)
        } else if let Some(rest) = s.strip_prefix("polygon:") {
            let mut vertices = Vec::new();
            for v in rest.split(';') {
                let xy: Vec<&str> = v.split(',').collect();
                if xy.len() != 2 {
                    return Err(Error::Parse(format!("bad polygon vertex `{v}`")));
                }
                vertices.push([parse(xy[0])?, parse(xy[1])?]);
            }
            Window::polygon(vertices)
        } else {
            Err(Error::Parse(format!("unrecognised window `{s}`")))
        }
    }
}

/// Polygon transform via the divergence theorem, one term per edge.
fn polygon_ft(vertices: &[[f64; 2]], xi: [f64; 2]) -> Complex64 {
    let n = vertices.len();
    let xi2 = xi[0] * xi[0] + xi[1] * xi[1];
    let diam = vertices
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .fold(0.0, f64::max);
    if xi2.sqrt() * diam < 1e-4 {
        return polygon_ft_taylor(vertices, xi);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        // outward normal scaled by edge length for a CCW polygon
        let xi_n = xi[0] * dy - xi[1] * dx;
        let phase_a = Complex64::from_polar(1.0, -2.0 * PI * (xi[0] * a[0] + xi[1] * a[1]));
        let along = expm1_over(-2.0 * PI * (xi[0] * dx + xi[1] * dy));
        acc += phase_a * along * xi_n;
    }
    acc * Complex64::new(0.0, 1.0 / (2.0 * PI * xi2))
}

/// Second-order expansion `∫(1 - 2πi ξ·x - 2π²(ξ·x)²)dx` for tiny `|ξ|`.
fn polygon_ft_taylor(vertices: &[[f64; 2]], xi: [f64; 2]) -> Complex64 {
    let n = vertices.len();
    let (mut area, mut mx, mut my, mut mxx, mut mxy, mut myy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (vertices[i], vertices[(i + 1) % n]);
        let c = p[0] * q[1] - q[0] * p[1];
        area += c / 2.0;
        mx += (p[0] + q[0]) * c / 6.0;
        my += (p[1] + q[1]) * c / 6.0;
        mxx += (p[0] * p[0] + p[0] * q[0] + q[0] * q[0]) * c / 12.0;
        myy += (p[1] * p[1] + p[1] * q[1] + q[1] * q[1]) * c / 12.0;
        mxy += (2.0 * p[0] * p[1] + p[0] * q[1] + q[0] * p[1] + 2.0 * q[0] * q[1]) * c / 24.0;
    }
    let first = xi[0] * mx + xi[1] * my;
    let second = xi[0] * xi[0] * mxx + 2.0 * xi[0] * xi[1] * mxy + xi[1] * xi[1] * myy;
    Complex64::new(area - 2.0 * PI * PI * second, -2.0 * PI * first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::TAU;

    /// Composite Simpson quadrature of `∫_W e^{-2πi y·v} dv`.
    fn quad_interval(lo: f64, hi: f64, y: f64) -> Complex64 {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |v: f64| Complex64::from_polar(1.0, -2.0 * PI * y * v);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(lo + i as f64 * h) * w;
        }
        acc * h / 3.0
    }

    fn quad_polygon(w: &Window, xi: [f64; 2]) -> Complex64 {
        let (lo, hi) = w.bounding_box();
        let n = 1200;
        let (hx, hy) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let p = [lo[0] + (i as f64 + 0.5) * hx, lo[1] + (j as f64 + 0.5) * hy];
                if w.contains(&p) {
                    acc += Complex64::from_polar(1.0, -2.0 * PI * (xi[0] * p[0] + xi[1] * p[1]));
                }
            }
        }
        acc * hx * hy
    }

    #[test]
    fn interval_transform_matches_quadrature() {
        for &(lo, hi) in &[(-0.5, 0.5), (0.0, TAU), (-0.3, 1.1)] {
            let w = Window::interval(lo, hi).unwrap();
            for &y in &[0.0, 0.2, -0.7, 1.3, 3.9] {
                let q = quad_interval(lo, hi, y);
                assert!((w.fourier_transform(&[y]) - q).norm() < 1e-10, "[{lo},{hi}] y={y}");
            }
        }
    }

    #[test]
    fn centred_interval_is_sinc() {
        let a = 0.8;
        let w = Window::interval(-a / 2.0, a / 2.0).unwrap();
        for &y in &[0.1, 0.9, -2.2] {
            let v = w.fourier_transform(&[y]);
            assert!((v.re - a * (PI * a * y).sin() / (PI * a * y)).abs() < 1e-14);
            assert!(v.im.abs() < 1e-15);
        }
        for m in 1..5 {
            assert!(w.fourier_transform(&[m as f64 / a]).norm() < 1e-14);
        }
        assert_eq!(w.fourier_transform(&[0.0]).re, a);
    }

    #[test]
    fn golden_window_zero() {
        let w = Window::interval(0.0, TAU).unwrap();
        assert!(w.fourier_transform(&[1.0 / TAU]).norm() < 1e-12);
        assert!((w.fourier_transform(&[0.0]).re - TAU).abs() < 1e-15);
    }

    #[test]
    fn degenerate_windows_rejected() {
        assert!(Window::interval(0.0, 5e-10).is_err());
        assert!(Window::interval(1.0, 0.0).is_err());
        assert!(Window::polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        // clockwise
        assert!(Window::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn octagon_geometry_and_transform() {
        let w = Window::octagon();
        assert!((w.volume() - 2.0 * (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((w.perimeter() - 8.0).abs() < 1e-12);
        assert_eq!(w.fourier_transform(&[0.0, 0.0]).re, w.volume());
        for xi in [[0.13, -0.07], [0.5, 0.2], [1e-6, 2e-6], [0.0, 0.9]] {
            let exact = w.fourier_transform(&xi);
            let q = quad_polygon(&w, xi);
            assert!((exact - q).norm() < 2e-3, "xi={xi:?}: {exact} vs {q}");
        }
    }

    #[test]
    fn polygon_branches_meet() {
        let w = Window::octagon();
        let diam = 0.5 / (PI / 8.0).sin();
        let r = 1e-4 / diam;
        let below = w.fourier_transform(&[r * 0.999, 0.0]);
        let above = w.fourier_transform(&[r * 1.001, 0.0]);
        assert!((below - above).norm() < 1e-8);
    }

    #[test]
    fn signed_distance_polygon() {
        let sq = Window::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!((sq.signed_distance(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!((sq.signed_distance(&[1.5, 0.5]) + 0.5).abs() < 1e-15);
        assert!((sq.signed_distance(&[0.5, 0.1]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn decay_bound_holds() {
        let w = Window::interval(0.0, TAU).unwrap();
        for i in 1..2000 {
            let y = i as f64 * 0.037;
            assert!(w.fourier_transform(&[y]).norm() <= w.decay_bound(y) + 1e-15);
        }
    }

    #[test]
    fn display_round_trips() {
        for w in [Window::interval(0.0, TAU).unwrap(), Window::octagon()] {
            let back: Window = w.to_string().parse().unwrap();
            assert_eq!(back, w);
        }
    }
}
