//! One function per subcommand.

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{complex_cells, int_cell, num, vec_cell, OutputDir};
use quasicorr::correlations::verify_reduced_moment_identity;
use quasicorr::cyclefunc::{
    check_properties, cyclefunction_from_moments, peak_alphabet, probe_moments, random_zero_sum_cycle, reconstruct_pipeline,
    theoretical_a, top_peak_cycles, PipelineOptions, DEFAULT_LEAKAGE_TOL,
};
use quasicorr::cycles::product;
use quasicorr::modelset::{generate_patch, read_patch, sample_patch, write_patch};
use quasicorr::rng::SeededRng;
use quasicorr::spectrum::{verify_bragg_consistency, verify_extinction_sum_decomposition};
use quasicorr::{
    birkhoff_moment, decompose, enumerate_spectrum, estimate_a, npoint_correlation, sum_as_bragg, Cycle,
    GaussianTestFunction, PointPatch, SpectrumParams, SpectrumTable, TranslateGrid,
};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Everything a command needs: the parsed config, its hash, where relative
/// paths resolve, and where outputs go.
pub struct Context {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub base_dir: PathBuf,
    pub out: OutputDir,
}

impl Context {
    pub fn new(config: ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Self, CliError> {
        let config_hash = config.hash();
        let out = OutputDir::create(out, &config_hash)?;
        Ok(Context {
            config,
            config_hash,
            base_dir: base_dir.to_path_buf(),
            out,
        })
    }

    /// The configured patch file, or a patch at the configured hull point,
    /// or one at a hull point drawn from the seed.
    pub fn patch(&self) -> Result<PointPatch, CliError> {
        let cfg = &self.config;
        let scheme = cfg.scheme()?;
        let window = cfg.window()?;
        let patch = if let Some(rel) = &cfg.patch {
            let path = self.base_dir.join(rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read patch {}: {e}", path.display())))?;
            let patch = read_patch(&text)?;
            if patch.scheme != scheme || patch.window != window {
                return Err(CliError::Usage(format!(
                    "patch {} was generated for a different scheme or window",
                    path.display()
                )));
            }
            patch
        } else if let Some(hull) = cfg.hull() {
            generate_patch(&scheme, &window, &hull, cfg.r)?
        } else {
            sample_patch(&scheme, &window, cfg.r, cfg.seed)?
        };
        log::info!("patch: {} points, R = {}", patch.len(), patch.r);
        Ok(patch)
    }

    /// Spectrum table with amplitudes measured on `patch` when given.
    pub fn table(&self, patch: Option<&PointPatch>) -> Result<SpectrumTable, CliError> {
        let cfg = &self.config;
        let scheme = cfg.scheme()?;
        let window = cfg.window()?;
        let density = window.volume() / scheme.covolume();
        let mut params = SpectrumParams::with_defaults(cfg.k_max, density);
        if let Some(eps) = cfg.eps_bragg {
            params.eps_bragg = eps;
        }
        params.eps_ext = cfg.eps_ext();
        let mut table = enumerate_spectrum(&scheme, &window, params)?;
        if let Some(p) = patch {
            table.attach_amplitudes(p)?;
        }
        log::info!("spectrum: {} records, {} Bragg", table.records.len(), table.bragg().count());
        Ok(table)
    }

    /// Explicit cycles from the config, else the strongest-peak cycles.
    pub fn cycles(&self, table: &SpectrumTable) -> Result<Vec<Cycle>, CliError> {
        let cfg = &self.config;
        if !cfg.cycles.is_empty() {
            return cfg
                .cycles
                .iter()
                .map(|c| Cycle::from_coords(c).map_err(CliError::from))
                .collect();
        }
        let cycles = top_peak_cycles(table, cfg.alphabet_size, cfg.cycle_length, cfg.cycle_count);
        if cycles.is_empty() {
            return Err(CliError::Usage(format!(
                "no zero-sum cycles of length {} among the {} strongest peaks",
                cfg.cycle_length, cfg.alphabet_size
            )));
        }
        Ok(cycles)
    }

    fn grid_for(&self, fns: &[GaussianTestFunction]) -> Result<TranslateGrid, CliError> {
        match self.config.grid {
            Some(g) => Ok(g),
            None => Ok(TranslateGrid::default_for(fns)?),
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cycle_value(c: &Cycle) -> Value {
    to_value(&c.to_coords())
}

pub fn scheme(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let s = ctx.config.scheme()?;
    let w = ctx.config.window()?;
    let dual = s.dual()?;
    let body = json!({
        "scheme": to_value(&s.description()),
        "dual": to_value(&dual.description()),
        "window": w.to_string(),
        "covolume": s.covolume(),
        "density": w.volume() / s.covolume(),
    });
    Ok(vec![ctx.out.json("scheme.json", "scheme", body)?])
}

pub fn generate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let patch = ctx.patch()?;
    Ok(vec![ctx.out.text("patch.txt", &write_patch(&patch))?])
}

pub fn diffract(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let patch = ctx.patch()?;
    let table = ctx.table(Some(&patch))?;
    let rows: Vec<Vec<String>> = table
        .records
        .iter()
        .map(|r| {
            let [re, im] = complex_cells(r.amplitude);
            let measured = r.amplitude.map(|a| num(a.norm_sqr())).unwrap_or_default();
            vec![
                int_cell(&r.k),
                vec_cell(&r.k_phys),
                vec_cell(&r.k_star),
                r.classification.as_str().to_string(),
                num(r.intensity_theory),
                re,
                im,
                measured,
            ]
        })
        .collect();
    let header = [
        "k",
        "k_phys",
        "k_star",
        "class",
        "intensity_theory",
        "amplitude_re",
        "amplitude_im",
        "intensity_measured",
    ];
    let csv = ctx.out.csv("peaks.csv", &header, &rows)?;
    let bragg = verify_bragg_consistency(&patch, &table, ctx.config.tolerance, Some(ctx.config.top_peaks))?;
    let ext = verify_extinction_sum_decomposition(&table);
    let mut counts = std::collections::BTreeMap::new();
    for r in &table.records {
        *counts.entry(r.classification.as_str()).or_insert(0usize) += 1;
    }
    let body = json!({
        "patch_id": format!("{:016x}", patch.id()),
        "points": patch.len(),
        "k_max": table.k_max,
        "eps_bragg": table.eps_bragg,
        "eps_ext": table.eps_ext,
        "star_cut": table.star_cut,
        "counts": counts,
        "bragg_consistency": to_value(&bragg),
        "extinctions": to_value(&ext),
    });
    Ok(vec![csv, ctx.out.json("peaks.json", "diffract", body)?])
}

pub fn correlate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let gs = &ctx.config.gaussians;
    if gs.is_empty() {
        return Err(CliError::Usage("correlate needs at least one entry in `gaussians`".into()));
    }
    let patch = ctx.patch()?;
    let corr = npoint_correlation(&patch, gs)?;
    let grid = ctx.grid_for(gs)?;
    let moment = birkhoff_moment(&patch, gs, &grid)?;
    let identity = if gs.len() >= 2 {
        let grid = match ctx.config.grid {
            Some(g) => g,
            None => {
                let inner = gs[1..].iter().map(|h| h.reach()).fold(0.0, f64::max);
                TranslateGrid::new(grid.spacing, gs[0].reach() + inner)?
            }
        };
        to_value(&verify_reduced_moment_identity(&patch, &gs[0], &gs[1..], &grid)?)
    } else {
        Value::Null
    };
    let body = json!({
        "correlation": to_value(&corr),
        "moment": to_value(&moment),
        "grid": to_value(&grid),
        "reduced_identity": identity,
    });
    Ok(vec![ctx.out.json("correlation.json", "correlate", body)?])
}

pub fn cyclefn(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let patch = ctx.patch()?;
    let table = ctx.table(Some(&patch))?;
    let cycles = ctx.cycles(&table)?;
    let mut entries = Vec::with_capacity(cycles.len());
    let mut rows = Vec::with_capacity(cycles.len());
    for c in &cycles {
        let est = estimate_a(&patch, c, &table)?;
        let theory = theoretical_a(&table, c)?;
        let from_moments = match cyclefunction_from_moments(&patch, c, &table, ctx.config.grid, ctx.config.sigma_k, DEFAULT_LEAKAGE_TOL) {
            Ok(m) => json!({
                "re": m.estimate.value.re,
                "im": m.estimate.value.im,
                "raw_modulus": m.estimate.raw_modulus,
                "phase_error": m.estimate.phase_error,
                "leakage": m.leakage,
            }),
            Err(e @ (quasicorr::Error::Leakage { .. } | quasicorr::Error::MarginViolation { .. })) => {
                json!({ "skipped": e.to_string() })
            }
            Err(e) => return Err(e.into()),
        };
        let [tr, ti] = complex_cells(Some(theory));
        rows.push(vec![
            c.to_string().replace(',', ";"),
            num(est.value.re),
            num(est.value.im),
            num(est.raw_modulus),
            num(est.phase_error),
            tr,
            ti,
        ]);
        entries.push(json!({
            "cycle": cycle_value(&est.cycle),
            "re": est.value.re,
            "im": est.value.im,
            "raw_modulus": est.raw_modulus,
            "phase_error": est.phase_error,
            "r": est.r,
            "theory": [theory.re, theory.im],
            "from_moments": from_moments,
        }));
    }
    let report = check_properties(&patch, &table, &cycles)?;
    let header = ["cycle", "a_re", "a_im", "raw_modulus", "phase_error", "theory_re", "theory_im"];
    let csv = ctx.out.csv("cyclefn.csv", &header, &rows)?;
    let body = json!({ "cycles": entries, "properties": to_value(&report) });
    Ok(vec![csv, ctx.out.json("cyclefn.json", "cyclefn", body)?])
}

pub fn decompose_cmd(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let table = ctx.table(None)?;
    let cycles: Vec<Cycle> = if cfg.cycles.is_empty() {
        let alpha = peak_alphabet(&table, cfg.alphabet_size);
        let mut rng = SeededRng::new(cfg.seed);
        (0..cfg.cycle_count)
            .filter_map(|_| random_zero_sum_cycle(&table, &alpha, cfg.cycle_length, &mut rng))
            .collect()
    } else {
        ctx.cycles(&table)?
    };
    let n = cfg.n;
    let mut entries = Vec::with_capacity(cycles.len());
    for c in &cycles {
        let ordered = c.reduce().balanced();
        let factors = decompose(&ordered, n, |t| sum_as_bragg(&table, t, n))?;
        let exact = product(&factors)?.reduce() == c.reduce();
        entries.push(json!({
            "cycle": cycle_value(c),
            "reduced_length": c.reduced_length(),
            "factors": factors.iter().map(cycle_value).collect::<Vec<_>>(),
            "max_factor_length": factors.iter().map(|f| f.reduced_length()).max().unwrap_or(0),
            "product_matches": exact,
        }));
    }
    let body = json!({ "n": n, "bound": 2 * n + 1, "decompositions": entries });
    Ok(vec![ctx.out.json("decompose.json", "decompose", body)?])
}

/// Probe Gaussians for each configured moment order.
pub fn probes(ctx: &Context, table: &SpectrumTable) -> Result<Vec<Vec<GaussianTestFunction>>, CliError> {
    ctx.config
        .moments
        .iter()
        .map(|&m| probe_moments(table, m, ctx.config.probe_sigma).map_err(CliError::from))
        .collect()
}

pub fn pipeline_options(ctx: &Context) -> PipelineOptions {
    PipelineOptions {
        tail_budget: f64::INFINITY,
        grid: ctx.config.grid,
        extension_samples: ctx.config.extension_samples,
        alphabet_size: ctx.config.alphabet_size,
        seed: ctx.config.seed,
    }
}

pub fn reconstruct(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let patch = ctx.patch()?;
    let table = ctx.table(Some(&patch))?;
    let moments = probes(ctx, &table)?;
    let report = reconstruct_pipeline(&table, &patch, ctx.config.n, &moments, &pipeline_options(ctx))?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.order.to_string(),
                num(r.spectral.re),
                num(r.spectral.im),
                num(r.birkhoff.re),
                num(r.birkhoff.im),
                num(r.birkhoff_stderr),
                num(r.tail_estimate),
                num(r.relative_residual),
                r.tuples.to_string(),
            ]
        })
        .collect();
    let header = [
        "order",
        "spectral_re",
        "spectral_im",
        "birkhoff_re",
        "birkhoff_im",
        "birkhoff_stderr",
        "tail_estimate",
        "relative_residual",
        "tuples",
    ];
    let csv = ctx.out.csv("reconstruct.csv", &header, &rows)?;
    let mut summary = format!(
        "n = {}\nmeasured lookups = {}\nextended lookups = {}\nextension checked = {}, failures = {}, max residual = {}\n",
        report.n,
        report.measured_lookups,
        report.extended_lookups,
        report.extension_checked,
        report.extension_failures,
        num(report.extension_residual)
    );
    for r in &report.rows {
        summary.push_str(&format!(
            "order {}: relative residual {} (tail {})\n",
            r.order,
            num(r.relative_residual),
            num(r.tail_estimate)
        ));
    }
    if let Some(t) = &report.failed_target {
        summary.push_str(&format!("failed target {t:?}\n"));
    }
    let txt = ctx.out.text("reconstruct.txt", &summary)?;
    if let Some(target) = report.failed_target {
        return Err(CliError::Oracle { target });
    }
    Ok(vec![csv, txt])
}
