//! The `verify` suite: a fixed list of numerical checks, each a measured
//! value against a tolerance.

use crate::commands::{pipeline_options, probes, Context};
use crate::error::CliError;
use quasicorr::correlations::verify_reduced_moment_identity;
use quasicorr::cyclefunc::{check_properties, peak_alphabet, random_zero_sum_cycle, reconstruct_pipeline};
use quasicorr::cycles::product;
use quasicorr::rng::SeededRng;
use quasicorr::spectrum::{verify_bragg_consistency, verify_extinction_sum_decomposition};
use quasicorr::{bombieri_taylor, decompose, sum_as_bragg, Error, GaussianTestFunction, TranslateGrid};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;

/// Relative floating-point allowance on top of reported error bounds.
const ROUNDOFF: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

fn max_abs_diff(a: &quasicorr::scheme::CutProjectScheme, b: &quasicorr::scheme::CutProjectScheme) -> f64 {
    a.basis()
        .iter()
        .zip(b.basis().iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn run_suite(ctx: &Context) -> Result<VerifyReport, CliError> {
    let cfg = &ctx.config;
    let mut checks = Vec::new();

    let scheme = cfg.scheme()?;
    checks.push(Check::new("dual_involution", max_abs_diff(&scheme.dual()?.dual()?, &scheme), 1e-12));

    let patch = ctx.patch()?;
    let table = ctx.table(Some(&patch))?;
    let density = patch.density()?;

    if scheme.label() == "z-fixture" {
        let bound = 2.0 / patch.r;
        let mut integer: f64 = 0.0;
        let mut half: f64 = 0.0;
        for k in 0..=5 {
            integer = integer.max((bombieri_taylor(&patch, &[k as f64])?.norm() - density).abs());
            half = half.max(bombieri_taylor(&patch, &[k as f64 + 0.5])?.norm());
        }
        checks.push(Check::new("crystal_integer", integer, bound));
        checks.push(Check::new("crystal_half_integer", half, bound));
    }

    let bragg = verify_bragg_consistency(&patch, &table, cfg.tolerance, Some(cfg.top_peaks))?;
    checks.push(Check::new("bragg_consistency", bragg.max_relative_error, cfg.tolerance));
    let ext = verify_extinction_sum_decomposition(&table);
    checks.push(Check::new("extinction_witnesses", ext.unresolved.len() as f64, 0.0));

    let cycles = ctx.cycles(&table)?;
    let props = check_properties(&patch, &table, &cycles)?;
    checks.push(Check::new("cycle_zero", props.zero_residual, 0.0));
    checks.push(Check::new("cycle_pair", props.pair_residual, 0.02));
    checks.push(Check::new("cycle_homomorphism", props.homomorphism_residual, 0.05));
    checks.push(Check::new("cycle_reflection", props.reflection_residual, 0.02));
    checks.push(Check::new("cycle_theory", props.theory_residual, cfg.tolerance));

    let n = cfg.n;
    let alpha = peak_alphabet(&table, cfg.alphabet_size);
    let mut rng = SeededRng::new(cfg.seed);
    let mut bad = 0usize;
    for i in 0..cfg.cycle_count {
        let Some(c) = random_zero_sum_cycle(&table, &alpha, 2 * n + 2 + i % 2, &mut rng) else {
            bad += 1;
            continue;
        };
        match decompose(&c.balanced(), n, |t| sum_as_bragg(&table, t, n)) {
            Ok(fs) => {
                let short = fs.iter().all(|f| f.reduced_length() <= 2 * n + 1);
                if !short || product(&fs)?.reduce() != c.reduce() {
                    bad += 1;
                }
            }
            Err(Error::OracleFailure { .. }) => bad += 1,
            Err(e) => return Err(e.into()),
        }
    }
    checks.push(Check::new("decomposition_failures", bad as f64, 0.0));

    let moments = probes(ctx, &table)?;
    let rec = reconstruct_pipeline(&table, &patch, n, &moments, &pipeline_options(ctx))?;
    checks.push(Check::new("extension_residual", rec.extension_residual, cfg.tolerance));
    for row in &rec.rows {
        checks.push(Check::new(format!("moment_order_{}", row.order), row.relative_residual, cfg.moment_tolerance));
        let absolute = (row.spectral - row.birkhoff).norm();
        let reported = row.tail_estimate + 3.0 * row.birkhoff_stderr + ROUNDOFF * row.birkhoff.norm();
        checks.push(Check::new(format!("moment_error_covered_{}", row.order), absolute, reported));
    }

    let s = patch.min_separation();
    let g = GaussianTestFunction::unit(vec![0.0; patch.d()], 0.5)?;
    let mut hs = Vec::new();
    for (order, sign) in [(2, 1.0), (3, -1.0)] {
        let mut c = vec![0.0; patch.d()];
        c[0] = sign * s;
        hs.push(GaussianTestFunction::unit(c, 0.3)?);
        let grid = match cfg.grid {
            Some(grid) => grid,
            None => TranslateGrid::new(0.1, g.reach() + hs.iter().map(|h| h.reach()).fold(0.0, f64::max))?,
        };
        let rep = verify_reduced_moment_identity(&patch, &g, &hs, &grid)?;
        checks.push(Check::new(format!("reduced_identity_n{order}"), rep.relative_discrepancy, cfg.identity_tolerance));
    }
    Ok(VerifyReport { checks })
}

pub fn verify(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let report = run_suite(ctx)?;
    for c in &report.checks {
        log::info!(
            "{} {}: {:e} (tolerance {:e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    let body = json!({
        "checks": serde_json::to_value(&report.checks).expect("serializable"),
        "passed": report.passed(),
    });
    let path = ctx.out.json("verify.json", "verify", body)?;
    if !report.passed() {
        return Err(CliError::Checks(report.failed()));
    }
    Ok(vec![path])
}
