//! The campaign runners. Each experiment enumerates deterministic cells,
//! skips cells already in the manifest, computes the rest (instances in
//! parallel), and assembles the final CSV/JSON artifacts.

use super::config::{CampaignConfig, Grid};
use super::fits::{fit_scaling, linear_fit, LinearFit, ScalingFit};
use super::store::{CampaignStore, CellError, GapRow};
use super::{ensemble, gap_of, gap_row, mean, std_err, CampaignError, Strategy};
use crate::instances::boltzmann_target;
use crate::mps::{phi_log2_values, phi_statistics};
use crate::phase::{disorder_averages, find_crossing, gibbs_diagonal, order_moments, BinderCurve, CrossingEstimate, OrderMoments};
use crate::schedopt::optimize_schedule;
use crate::unitary::{build_hamiltonian, decompose, proposal_from_eigen, Schedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Run a resumable cell; computation failures are recorded as tags and the
/// campaign continues, store failures abort.
fn try_cell<T, F>(
    store: &mut CampaignStore,
    key: &str,
    failures: &mut Vec<String>,
    compute: F,
) -> Result<Option<T>, CampaignError>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T, CampaignError>,
{
    match store.cell(key, compute) {
        Ok(value) => Ok(Some(value)),
        Err(CellError::Compute(e)) => {
            failures.push(format!("{key}: {e}"));
            Ok(None)
        }
        Err(CellError::Store(e)) => Err(CampaignError::Store(e)),
    }
}

fn collect_rows<F>(config: &CampaignConfig, n: usize, per_instance: F) -> Result<Vec<GapRow>, CampaignError>
where
    F: Fn(&crate::instances::IsingInstance) -> Result<Vec<GapRow>, CampaignError> + Sync + Send,
{
    let instances = ensemble(config, n)?;
    let nested: Result<Vec<Vec<GapRow>>, CampaignError> =
        instances.par_iter().map(per_instance).collect();
    Ok(nested?.into_iter().flatten().collect())
}

fn group_deltas_by_n(rows: &[GapRow]) -> Vec<(usize, Vec<f64>)> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| (n, rows.iter().filter(|r| r.n == n).map(|r| r.delta).collect()))
        .collect()
}

// ---------------------------------------------------------------------------
// Scaling study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub fits: Vec<ScalingFit>,
    /// k_c / k_q with k_c from the local strategy and k_q from the exact
    /// quantum strategy.
    pub alpha: Option<f64>,
    pub failures: Vec<String>,
}

/// Gap scaling for every strategy: classical baselines, the fixed quantum
/// strategy, its Trotterization, and the truncated MPS emulations.
pub fn run_scaling(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<ScalingSummary, CampaignError> {
    let sizes = config.sizes_or(&[3, 4, 5, 6, 7, 8, 9]);
    let mut strategies = vec![
        Strategy::Local,
        Strategy::Uniform,
        Strategy::Exact { gamma: config.gamma, t: config.t },
        Strategy::Trotter { gamma: config.gamma, t: config.t, dt: config.dt },
    ];
    for &chi in &config.chis {
        strategies.push(Strategy::Mps { gamma: config.gamma, t: config.t, dt: config.dt, chi });
    }
    let mut failures = Vec::new();
    let mut all_rows = Vec::new();
    let mut fits = Vec::new();
    for strategy in &strategies {
        let mut rows = Vec::new();
        for &n in &sizes {
            let key = format!("scaling-{}-n{n}", strategy.label());
            if let Some(cell_rows) = try_cell(store, &key, &mut failures, || {
                collect_rows(config, n, |inst| Ok(vec![gap_row(inst, strategy, config.temperature)?]))
            })? {
                rows.extend(cell_rows);
            }
        }
        match fit_scaling(&strategy.label(), &group_deltas_by_n(&rows)) {
            Ok(fit) => fits.push(fit),
            Err(e) => failures.push(format!("fit-{}: {e}", strategy.label())),
        }
        all_rows.extend(rows);
    }
    let k_of = |label: &str| fits.iter().find(|f| f.kind == label).map(|f| f.k);
    let alpha = match (k_of("local"), k_of("exact")) {
        (Some(kc), Some(kq)) if kq > 0.0 => Some(kc / kq),
        _ => None,
    };
    store.write_gap_csv("gaps.csv", &all_rows)?;
    let summary = ScalingSummary { fits, alpha, failures };
    store.write_json("scaling_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Grid search over (gamma, t)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchSummary {
    /// (n, gamma_opt) pairs; gamma_opt maximizes delta averaged over the
    /// t window and the ensemble.
    pub gamma_opt: Vec<(usize, f64)>,
    /// Mean delta at gamma_opt per size.
    pub peak_delta: Vec<(usize, f64)>,
    pub failures: Vec<String>,
}

pub fn run_grid_search(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<GridSearchSummary, CampaignError> {
    let sizes = config.sizes_or(&[9]);
    let gammas = config.gamma_grid.unwrap_or(Grid::new(0.0, 1.0, 0.02)).values();
    let ts = config.t_grid.unwrap_or(Grid::new(12.0, 30.0, 1.0)).values();
    let mut failures = Vec::new();
    let mut all_rows = Vec::new();
    let mut gamma_opt = Vec::new();
    let mut peak_delta = Vec::new();
    for &n in &sizes {
        let mut avg_by_gamma: Vec<(f64, f64)> = Vec::new();
        for (gi, &gamma) in gammas.iter().enumerate() {
            let key = format!("grid-n{n}-g{gi:03}");
            let ts_ref = &ts;
            let rows = try_cell(store, &key, &mut failures, || {
                collect_rows(config, n, |inst| {
                    // One eigendecomposition per (instance, gamma), reused
                    // across the whole t row.
                    let eigen = decompose(&build_hamiltonian(inst, gamma)?)?;
                    ts_ref
                        .iter()
                        .map(|&t| {
                            let q = proposal_from_eigen(&eigen, t)?;
                            let (delta, method) = gap_of(&q, inst, config.temperature)?;
                            Ok(GapRow {
                                n,
                                seed: inst.seed,
                                kind: "exact-unitary".into(),
                                gamma: Some(gamma),
                                t: Some(t),
                                dt: None,
                                chi: None,
                                temperature: Some(config.temperature),
                                delta,
                                method,
                            })
                        })
                        .collect()
                })
            })?;
            if let Some(rows) = rows {
                let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
                avg_by_gamma.push((gamma, mean(&deltas)));
                all_rows.extend(rows);
            }
        }
        if let Some(&(g, d)) = avg_by_gamma
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            gamma_opt.push((n, g));
            peak_delta.push((n, d));
        }
        let records: Vec<Vec<String>> = avg_by_gamma
            .iter()
            .map(|(g, d)| vec![n.to_string(), format!("{g}"), format!("{d}")])
            .collect();
        store.write_csv_records(
            &format!("delta_avg_n{n}.csv"),
            &["n", "gamma", "delta_avg"],
            &records,
        )?;
    }
    store.write_gap_csv("gaps.csv", &all_rows)?;
    let records: Vec<Vec<String>> = gamma_opt
        .iter()
        .map(|(n, g)| vec![n.to_string(), format!("{g}")])
        .collect();
    store.write_csv_records("gamma_opt.csv", &["n", "gamma_opt"], &records)?;
    let summary = GridSearchSummary { gamma_opt, peak_delta, failures };
    store.write_json("gridsearch_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Hitting time t_0.01(n)
// ---------------------------------------------------------------------------

/// Per-size optimum of gamma from the grid-search study (n = 3..9); sizes
/// beyond the table use the last entry.
pub fn default_gamma_opt(n: usize) -> f64 {
    const TABLE: [f64; 7] = [0.55, 0.52, 0.49, 0.47, 0.45, 0.43, 0.42];
    TABLE[(n.saturating_sub(3)).min(TABLE.len() - 1)]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingTimeSummary {
    /// (n, gamma, time at which the ensemble-mean gap reaches the
    /// threshold, interpolated between scan points). None means the
    /// threshold was never crossed.
    pub hit_times: Vec<(usize, f64, Option<f64>)>,
    pub fit: Option<LinearFit>,
    pub failures: Vec<String>,
}

pub fn run_hitting_time(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<HittingTimeSummary, CampaignError> {
    let sizes = config.sizes_or(&[3, 4, 5, 6, 7, 8, 9]);
    let t_step = 0.5;
    let mut failures = Vec::new();
    let mut all_rows = Vec::new();
    let mut hit_times = Vec::new();
    for &n in &sizes {
        let gamma = default_gamma_opt(n);
        let key = format!("hittime-n{n}");
        let rows = try_cell(store, &key, &mut failures, || {
            let instances = ensemble(config, n)?;
            let eigens: Result<Vec<_>, CampaignError> = instances
                .par_iter()
                .map(|inst| Ok(decompose(&build_hamiltonian(inst, gamma)?)?))
                .collect();
            let eigens = eigens?;
            let mut rows = Vec::new();
            let mut t = t_step;
            while t <= config.hit_t_max + 1e-9 {
                let step_rows: Result<Vec<GapRow>, CampaignError> = instances
                    .par_iter()
                    .zip(eigens.par_iter())
                    .map(|(inst, eigen)| {
                        let q = proposal_from_eigen(eigen, t)?;
                        let (delta, method) = gap_of(&q, inst, config.temperature)?;
                        Ok(GapRow {
                            n,
                            seed: inst.seed,
                            kind: "exact-unitary".into(),
                            gamma: Some(gamma),
                            t: Some(t),
                            dt: None,
                            chi: None,
                            temperature: Some(config.temperature),
                            delta,
                            method,
                        })
                    })
                    .collect();
                let step_rows = step_rows?;
                let deltas: Vec<f64> = step_rows.iter().map(|r| r.delta).collect();
                let reached = mean(&deltas) >= config.hit_threshold;
                rows.extend(step_rows);
                if reached {
                    break;
                }
                t += t_step;
            }
            Ok(rows)
        })?;
        if let Some(rows) = rows {
            // Recover t_hit from the stored rows (resume-safe).
            let mut ts: Vec<f64> = rows.iter().filter_map(|r| r.t).collect();
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup();
            let mut hit = None;
            let (mut prev_t, mut prev_delta) = (0.0, 0.0);
            for &t in &ts {
                let deltas: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.t == Some(t))
                    .map(|r| r.delta)
                    .collect();
                let delta = mean(&deltas);
                if delta >= config.hit_threshold {
                    // Linear interpolation between scan points (delta(0) = 0)
                    // removes the grid quantization from the reported time.
                    let frac = (config.hit_threshold - prev_delta) / (delta - prev_delta);
                    hit = Some(prev_t + (t - prev_t) * frac);
                    break;
                }
                (prev_t, prev_delta) = (t, delta);
            }
            if hit.is_none() {
                failures.push(format!("hittime-n{n}: threshold never crossed up to t={}", config.hit_t_max));
            }
            hit_times.push((n, gamma, hit));
            all_rows.extend(rows);
        }
    }
    store.write_gap_csv("gaps.csv", &all_rows)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = hit_times
        .iter()
        .filter_map(|(n, _, t)| t.map(|t| (*n as f64, t)))
        .unzip();
    let fit = linear_fit(&xs, &ys).ok();
    let records: Vec<Vec<String>> = hit_times
        .iter()
        .map(|(n, g, t)| {
            vec![n.to_string(), format!("{g}"), t.map(|t| format!("{t}")).unwrap_or_default()]
        })
        .collect();
    store.write_csv_records("hit_times.csv", &["n", "gamma", "t_hit"], &records)?;
    let summary = HittingTimeSummary { hit_times, fit, failures };
    store.write_json("hittime_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Trotter step-size sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrotterSummary {
    /// Per size: dt maximizing f(dt) = mean_delta(dt) * dt / t.
    pub best_dt: Vec<(usize, f64)>,
    /// Per size: (mean, stderr) of the continuous-time gap.
    pub continuous: Vec<(usize, f64, f64)>,
    /// Per size and dt: (dt, mean delta, stderr, f).
    pub curves: Vec<(usize, Vec<(f64, f64, f64, f64)>)>,
    pub failures: Vec<String>,
}

pub fn run_trotter_sweep(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<TrotterSummary, CampaignError> {
    let sizes = config.sizes_or(&[9]);
    let dts = config.dt_grid.unwrap_or(Grid::new(0.1, 2.0, 0.1)).values();
    let mut failures = Vec::new();
    let mut all_rows = Vec::new();
    let mut best_dt = Vec::new();
    let mut continuous = Vec::new();
    let mut curves = Vec::new();
    for &n in &sizes {
        // Continuous-time reference at the same (gamma, t).
        let exact = Strategy::Exact { gamma: config.gamma, t: config.t };
        let key = format!("trotter-exact-n{n}");
        if let Some(rows) = try_cell(store, &key, &mut failures, || {
            collect_rows(config, n, |inst| Ok(vec![gap_row(inst, &exact, config.temperature)?]))
        })? {
            let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
            continuous.push((n, mean(&deltas), std_err(&deltas)));
            all_rows.extend(rows);
        }
        let mut curve = Vec::new();
        for (di, &dt) in dts.iter().enumerate() {
            let strategy = Strategy::Trotter { gamma: config.gamma, t: config.t, dt };
            let key = format!("trotter-n{n}-dt{di:02}");
            if let Some(rows) = try_cell(store, &key, &mut failures, || {
                collect_rows(config, n, |inst| Ok(vec![gap_row(inst, &strategy, config.temperature)?]))
            })? {
                let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
                let m = mean(&deltas);
                curve.push((dt, m, std_err(&deltas), crate::unitary::trotter_objective(m, dt, config.t)));
                all_rows.extend(rows);
            }
        }
        if let Some(&(dt, ..)) = curve.iter().max_by(|a, b| a.3.partial_cmp(&b.3).unwrap()) {
            best_dt.push((n, dt));
        }
        curves.push((n, curve));
    }
    store.write_gap_csv("gaps.csv", &all_rows)?;
    let mut records = Vec::new();
    for (n, curve) in &curves {
        for (dt, m, se, f) in curve {
            records.push(vec![
                n.to_string(),
                format!("{dt}"),
                format!("{m}"),
                format!("{se}"),
                format!("{f}"),
            ]);
        }
    }
    store.write_csv_records(
        "trotter_curve.csv",
        &["n", "dt", "delta_mean", "delta_stderr", "f"],
        &records,
    )?;
    let summary = TrotterSummary { best_dt, continuous, curves, failures };
    store.write_json("trotter_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Phi asymmetry study
// ---------------------------------------------------------------------------

pub const PHI_HIST_MIN: f64 = -8.0;
pub const PHI_HIST_MAX: f64 = 8.0;
pub const PHI_HIST_BINS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PhiInstance {
    seed: u64,
    sigma: f64,
    unresolved: usize,
    /// Gap with the Hastings-corrected acceptance (ratio Phi included).
    delta_corrected: f64,
    /// Gap when the proposal is treated as symmetric (Phi ignored).
    delta_uncorrected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PhiCell {
    per_instance: Vec<PhiInstance>,
    histogram: Vec<u64>, // PHI_HIST_BINS bins over log2 Phi
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSummary {
    /// Per chi: mean sigma per size and the fitted sigma-vs-n slope.
    pub sigma_table: Vec<(usize, Vec<(usize, f64)>)>,
    pub slopes: Vec<(usize, LinearFit)>,
    /// Per chi and size: mean gap with and without the Hastings correction,
    /// side by side (the truncated proposal is asymmetric, so the two
    /// acceptance rules genuinely differ).
    pub gap_comparison: Vec<(usize, Vec<(usize, f64, f64)>)>,
    pub failures: Vec<String>,
}

pub fn run_phi_study(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<PhiSummary, CampaignError> {
    let sizes = config.sizes_or(&[4, 5, 6, 7]);
    let mut failures = Vec::new();
    let mut sigma_rows: Vec<Vec<String>> = Vec::new();
    let mut hist_rows: Vec<Vec<String>> = Vec::new();
    let mut sigma_table = Vec::new();
    let mut slopes = Vec::new();
    let mut gap_comparison = Vec::new();
    let bin_width = (PHI_HIST_MAX - PHI_HIST_MIN) / PHI_HIST_BINS as f64;
    for &chi in &config.chis {
        let mut by_size = Vec::new();
        let mut gaps_by_size = Vec::new();
        for &n in &sizes {
            let key = format!("phi-chi{chi}-n{n}");
            let cell = try_cell(store, &key, &mut failures, || {
                let instances = ensemble(config, n)?;
                let per: Result<Vec<_>, CampaignError> = instances
                    .par_iter()
                    .map(|inst| {
                        let q = crate::mps::mps_proposal_matrix(
                            inst,
                            config.gamma,
                            config.t,
                            config.dt,
                            chi,
                        )?;
                        let stats = phi_statistics(&q);
                        let (values, _) = phi_log2_values(&q);
                        let mut hist = vec![0u64; PHI_HIST_BINS];
                        for v in values {
                            let b = ((v - PHI_HIST_MIN) / bin_width)
                                .floor()
                                .clamp(0.0, (PHI_HIST_BINS - 1) as f64)
                                as usize;
                            hist[b] += 1;
                        }
                        // Both acceptance rules, side by side: Hastings-
                        // corrected, and the symmetric rule that ignores Phi.
                        let target = boltzmann_target(inst, config.temperature)?;
                        let tc = crate::chain::mh_transition(&q, &target, true)?;
                        let tu = crate::chain::mh_transition(&q, &target, false)?;
                        let delta_corrected = crate::chain::spectral_gap(&tc)?.delta;
                        let delta_uncorrected = crate::chain::spectral_gap(&tu)?.delta;
                        Ok((
                            PhiInstance {
                                seed: inst.seed,
                                sigma: stats.sigma_log2,
                                unresolved: stats.unresolved,
                                delta_corrected,
                                delta_uncorrected,
                            },
                            hist,
                        ))
                    })
                    .collect();
                let per = per?;
                let mut histogram = vec![0u64; PHI_HIST_BINS];
                let mut per_instance = Vec::new();
                for (entry, hist) in per {
                    per_instance.push(entry);
                    for (acc, h) in histogram.iter_mut().zip(hist) {
                        *acc += h;
                    }
                }
                Ok(PhiCell { per_instance, histogram })
            })?;
            if let Some(cell) = cell {
                for pi in &cell.per_instance {
                    sigma_rows.push(vec![
                        n.to_string(),
                        pi.seed.to_string(),
                        chi.to_string(),
                        format!("{}", pi.sigma),
                        pi.unresolved.to_string(),
                        format!("{}", pi.delta_corrected),
                        format!("{}", pi.delta_uncorrected),
                    ]);
                }
                for (b, count) in cell.histogram.iter().enumerate() {
                    hist_rows.push(vec![
                        n.to_string(),
                        chi.to_string(),
                        format!("{}", PHI_HIST_MIN + b as f64 * bin_width),
                        format!("{}", PHI_HIST_MIN + (b + 1) as f64 * bin_width),
                        count.to_string(),
                    ]);
                }
                let sigmas: Vec<f64> = cell.per_instance.iter().map(|e| e.sigma).collect();
                by_size.push((n, mean(&sigmas)));
                let dc: Vec<f64> =
                    cell.per_instance.iter().map(|e| e.delta_corrected).collect();
                let du: Vec<f64> =
                    cell.per_instance.iter().map(|e| e.delta_uncorrected).collect();
                gaps_by_size.push((n, mean(&dc), mean(&du)));
            }
        }
        let xs: Vec<f64> = by_size.iter().map(|(n, _)| *n as f64).collect();
        let ys: Vec<f64> = by_size.iter().map(|(_, s)| *s).collect();
        match linear_fit(&xs, &ys) {
            Ok(fit) => slopes.push((chi, fit)),
            Err(e) => failures.push(format!("phi-slope-chi{chi}: {e}")),
        }
        sigma_table.push((chi, by_size));
        gap_comparison.push((chi, gaps_by_size));
    }
    store.write_csv_records(
        "phi_sigma.csv",
        &["n", "seed", "chi", "sigma", "unresolved_count", "delta_corrected", "delta_uncorrected"],
        &sigma_rows,
    )?;
    store.write_csv_records(
        "phi_hist.csv",
        &["n", "chi", "bin_left", "bin_right", "count"],
        &hist_rows,
    )?;
    let summary = PhiSummary { sigma_table, slopes, gap_comparison, failures };
    store.write_json("phi_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Temperature sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TempSweepSummary {
    /// Per strategy label: (T, mean delta, stderr).
    pub curves: Vec<(String, Vec<(f64, f64, f64)>)>,
    pub failures: Vec<String>,
}

pub fn run_temperature_sweep(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<TempSweepSummary, CampaignError> {
    let default_n = if config.quick { 6 } else { 8 };
    let sizes = config.sizes_or(&[default_n]);
    let temps = config.temperature_grid.unwrap_or(Grid::new(0.2, 2.0, 0.2)).values();
    let mut strategies = vec![
        Strategy::Local,
        Strategy::Uniform,
        Strategy::Exact { gamma: config.gamma, t: config.t },
        Strategy::Trotter { gamma: config.gamma, t: config.t, dt: config.dt },
    ];
    for &chi in &config.chis {
        strategies.push(Strategy::Mps { gamma: config.gamma, t: config.t, dt: config.dt, chi });
    }
    let mut failures = Vec::new();
    let mut all_rows = Vec::new();
    let mut curves = Vec::new();
    for &n in &sizes {
        for strategy in &strategies {
            let key = format!("tempsweep-{}-n{n}", strategy.label());
            let temps_ref = &temps;
            let rows = try_cell(store, &key, &mut failures, || {
                collect_rows(config, n, |inst| {
                    // The proposal is temperature-independent; build once.
                    let q = strategy.build(inst)?;
                    let template = gap_row(inst, strategy, temps_ref[0])?;
                    temps_ref
                        .iter()
                        .map(|&temp| {
                            let (delta, method) = gap_of(&q, inst, temp)?;
                            Ok(GapRow {
                                temperature: Some(temp),
                                delta,
                                method,
                                ..template.clone()
                            })
                        })
                        .collect()
                })
            })?;
            if let Some(rows) = rows {
                let curve: Vec<(f64, f64, f64)> = temps
                    .iter()
                    .map(|&temp| {
                        let deltas: Vec<f64> = rows
                            .iter()
                            .filter(|r| r.temperature == Some(temp))
                            .map(|r| r.delta)
                            .collect();
                        (temp, mean(&deltas), std_err(&deltas))
                    })
                    .collect();
                curves.push((format!("{}-n{n}", strategy.label()), curve));
                all_rows.extend(rows);
            }
        }
    }
    store.write_gap_csv("gaps.csv", &all_rows)?;
    let summary = TempSweepSummary { curves, failures };
    store.write_json("tempsweep_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// QAOA sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaoaSummary {
    /// Per (n, p): optimized theta, mean delta, stderr.
    pub points: Vec<(usize, usize, f64, f64, f64)>,
    /// Scaling fit per depth p.
    pub fits: Vec<(usize, ScalingFit)>,
    /// Fixed-strategy scaling fit for comparison.
    pub fixed_fit: Option<ScalingFit>,
    pub failures: Vec<String>,
}

pub fn run_qaoa(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<QaoaSummary, CampaignError> {
    let sizes = config.sizes_or(&[3, 4, 5, 6, 7]);
    let theta_grid: Vec<f64> = (0..config.theta_points)
        .map(|k| 0.01 + k as f64 * (1.5 - 0.01) / (config.theta_points - 1) as f64)
        .collect();
    let mut failures = Vec::new();
    let mut all_rows = Vec::new();
    let mut points = Vec::new();
    let mut fits = Vec::new();
    // Fixed quantum strategy baseline over the same sizes.
    let mut fixed_rows = Vec::new();
    for &n in &sizes {
        let exact = Strategy::Exact { gamma: config.gamma, t: config.t };
        let key = format!("qaoa-fixed-n{n}");
        if let Some(rows) = try_cell(store, &key, &mut failures, || {
            collect_rows(config, n, |inst| Ok(vec![gap_row(inst, &exact, config.temperature)?]))
        })? {
            fixed_rows.extend(rows);
        }
    }
    for &p in &config.qaoa_depths {
        let mut p_rows = Vec::new();
        for &n in &sizes {
            let key = format!("qaoa-p{p}-n{n}");
            let grid = &theta_grid;
            if let Some(rows) = try_cell(store, &key, &mut failures, || {
                let instances = ensemble(config, n)?;
                // Ensemble-level grid search for the tied angle, then
                // per-instance gaps at the optimum.
                let curve: Result<Vec<(f64, f64)>, CampaignError> = grid
                    .par_iter()
                    .map(|&theta| {
                        let strategy = Strategy::Qaoa { theta, p };
                        let mut acc = 0.0;
                        for inst in &instances {
                            acc += gap_row(inst, &strategy, config.temperature)?.delta;
                        }
                        Ok((theta, acc / instances.len() as f64))
                    })
                    .collect();
                let curve = curve?;
                let (theta_opt, _) = curve
                    .iter()
                    .cloned()
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .expect("nonempty grid");
                let strategy = Strategy::Qaoa { theta: theta_opt, p };
                let rows: Result<Vec<GapRow>, CampaignError> = instances
                    .par_iter()
                    .map(|inst| gap_row(inst, &strategy, config.temperature))
                    .collect();
                rows
            })? {
                let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
                let theta_opt = rows.first().and_then(|r| r.t).unwrap_or(f64::NAN);
                points.push((n, p, theta_opt, mean(&deltas), std_err(&deltas)));
                p_rows.extend(rows);
            }
        }
        match fit_scaling(&format!("qaoa-p{p}"), &group_deltas_by_n(&p_rows)) {
            Ok(fit) => fits.push((p, fit)),
            Err(e) => failures.push(format!("fit-qaoa-p{p}: {e}")),
        }
        all_rows.extend(p_rows);
    }
    let fixed_fit = fit_scaling("exact", &group_deltas_by_n(&fixed_rows)).ok();
    all_rows.extend(fixed_rows);
    store.write_gap_csv("gaps.csv", &all_rows)?;
    let summary = QaoaSummary { points, fits, fixed_fit, failures };
    store.write_json("qaoa_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Schedule optimization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScheduleCell {
    seed: u64,
    controls: [f64; 5],
    gap: f64,
    fixed_gap: f64,
    incumbent: Vec<f64>,
    history: Vec<([f64; 5], f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleBoSummary {
    /// Per size: (mean optimized gap, mean fixed-strategy gap).
    pub per_size: Vec<(usize, f64, f64)>,
    pub failures: Vec<String>,
}

pub fn run_schedule_bo(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<ScheduleBoSummary, CampaignError> {
    let sizes = config.sizes_or(&[4, 5]);
    let mut failures = Vec::new();
    let mut per_size = Vec::new();
    for &n in &sizes {
        let instances = ensemble(config, n)?;
        let mut cells = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let key = format!("schedule-n{n}-s{}", inst.seed);
            let cell = try_cell(store, &key, &mut failures, || {
                let mut rng = ChaCha8Rng::seed_from_u64(config.instance_seed(i) ^ BO_SEED_SALT);
                let result = optimize_schedule(
                    inst,
                    config.tau,
                    config.steps,
                    config.temperature,
                    config.bo_budget,
                    &mut rng,
                )?;
                let fixed = Strategy::Exact { gamma: config.gamma, t: config.t };
                let fixed_gap = gap_row(inst, &fixed, config.temperature)?.delta;
                Ok(ScheduleCell {
                    seed: inst.seed,
                    controls: result.schedule.control_values,
                    gap: result.gap,
                    fixed_gap,
                    incumbent: result.incumbent,
                    history: result.history,
                })
            })?;
            if let Some(cell) = cell {
                let records: Vec<Vec<String>> = cell
                    .history
                    .iter()
                    .zip(cell.incumbent.iter())
                    .enumerate()
                    .map(|(it, ((theta, y), inc))| {
                        let mut rec = vec![it.to_string()];
                        rec.extend(theta.iter().map(|v| format!("{v}")));
                        rec.push(format!("{y}"));
                        rec.push(format!("{inc}"));
                        rec
                    })
                    .collect();
                store.write_csv_records(
                    &format!("schedule_history_n{n}_s{}.csv", cell.seed),
                    &[
                        "iteration",
                        "theta_1",
                        "theta_2",
                        "theta_3",
                        "theta_4",
                        "theta_5",
                        "objective",
                        "incumbent",
                    ],
                    &records,
                )?;
                cells.push(cell);
            }
        }
        if cells.is_empty() {
            continue;
        }
        let optimized: Vec<f64> = cells.iter().map(|c| c.gap).collect();
        let fixed: Vec<f64> = cells.iter().map(|c| c.fixed_gap).collect();
        per_size.push((n, mean(&optimized), mean(&fixed)));
        // Best schedule of the ensemble as the representative artifact.
        let best = cells
            .iter()
            .max_by(|a, b| a.gap.partial_cmp(&b.gap).unwrap())
            .expect("nonempty");
        let schedule = Schedule::new(config.tau, best.controls);
        let knots: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let values: Vec<f64> = knots.iter().map(|&s| schedule.gamma(s)).collect();
        store.write_json(
            &format!("best_schedule_n{n}.json"),
            &serde_json::json!({ "tau": config.tau, "knots": knots, "values": values }),
        )?;
    }
    let summary = ScheduleBoSummary { per_size, failures };
    store.write_json("schedule_summary.json", &summary)?;
    Ok(summary)
}

/// Seed salt for the optimizer's random stream, so it never shares a stream
/// with instance generation.
const BO_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

// ---------------------------------------------------------------------------
// Phase diagram / Binder crossing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub curves: Vec<BinderCurve>,
    pub crossing: Option<CrossingEstimate>,
    pub failures: Vec<String>,
}

pub fn run_phase(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<PhaseSummary, CampaignError> {
    let sizes = config.sizes_or(&[4, 6, 8]);
    let gammas = config.gamma_grid.unwrap_or(Grid::new(0.30, 0.70, 0.02)).values();
    let temperature = config.phase_temperature;
    let mut failures = Vec::new();
    let mut records: Vec<Vec<String>> = Vec::new();
    let mut curves = Vec::new();
    for &n in &sizes {
        let mut g_curve = Vec::new();
        for (gi, &gamma) in gammas.iter().enumerate() {
            let key = format!("phase-n{n}-g{gi:03}");
            let cell: Option<Vec<(u64, OrderMoments)>> = try_cell(store, &key, &mut failures, || {
                let instances = ensemble(config, n)?;
                instances
                    .par_iter()
                    .map(|inst| {
                        let p = gibbs_diagonal(inst, gamma, temperature)?;
                        Ok((inst.seed, order_moments(n, &p)))
                    })
                    .collect()
            })?;
            if let Some(cell) = cell {
                let moments: Vec<OrderMoments> = cell.iter().map(|(_, m)| *m).collect();
                let avg = disorder_averages(&moments);
                let eas: Vec<f64> = moments.iter().map(|m| m.ea).collect();
                let gs: Vec<f64> =
                    moments.iter().map(|m| 0.5 * (3.0 - m.q4 / (m.q2 * m.q2))).collect();
                records.push(vec![
                    n.to_string(),
                    format!("{gamma}"),
                    format!("{temperature}"),
                    format!("{}", avg.ea),
                    format!("{}", std_err(&eas)),
                    format!("{}", avg.binder),
                    format!("{}", std_err(&gs)),
                    moments.len().to_string(),
                ]);
                g_curve.push(avg.binder);
            }
        }
        if g_curve.len() == gammas.len() {
            curves.push(BinderCurve { n, gammas: gammas.clone(), g: g_curve });
        }
    }
    store.write_csv_records(
        "phase.csv",
        &["n", "gamma", "T", "q_mean", "q_stderr", "g_mean", "g_stderr", "instances_used"],
        &records,
    )?;
    let crossing = match find_crossing(&curves) {
        Ok(c) => Some(c),
        Err(e) => {
            failures.push(format!("crossing: {e}"));
            None
        }
    };
    let summary = PhaseSummary { curves, crossing, failures };
    store.write_json("phase_summary.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Threshold report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvantageScenario {
    pub alpha: f64,
    pub samples_per_month: f64,
    pub seconds_per_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Budget scenarios derived from a 10^18-update, one-month classical
    /// baseline: a speedup of order alpha needs 10^(18/alpha) samples.
    pub scenarios: Vec<AdvantageScenario>,
    /// SWAP gates per Trotter step for n = 3..10.
    pub swap_counts: Vec<(usize, usize)>,
    /// Leading-order cost rows (proposal, memory, time).
    pub cost_table: Vec<(String, String, String)>,
    /// Fixed point of the quantum-inspired threshold for the configured
    /// (m, chi) at the reference exponents.
    pub quantum_inspired_threshold: Vec<(usize, f64)>,
    pub k_q: f64,
    pub k_c: f64,
}

pub const SECONDS_PER_MONTH: f64 = 30.0 * 24.0 * 3600.0;
pub const REFERENCE_K_Q: f64 = 0.264;
pub const REFERENCE_K_C: f64 = 0.94;

pub fn report_thresholds(config: &CampaignConfig) -> ThresholdReport {
    let scenarios = [4.0, 3.0, 2.0]
        .iter()
        .map(|&alpha| {
            let samples = 10f64.powf(18.0 / alpha);
            AdvantageScenario {
                alpha,
                samples_per_month: samples,
                seconds_per_step: SECONDS_PER_MONTH / samples,
            }
        })
        .collect();
    let swap_counts = (3..=10).map(|n| (n, crate::mps::swap_count(n))).collect();
    let cost_table = vec![
        ("local".into(), "O(n)".into(), "O(1)".into()),
        ("uniform".into(), "O(n)".into(), "O(n)".into()),
        ("mps".into(), "O(2 n chi^2 + 16 n^2)".into(), "O(8 m n^3 chi^3)".into()),
    ];
    let m = (config.t / config.dt).round() as usize;
    let quantum_inspired_threshold = config
        .chis
        .iter()
        .map(|&chi| {
            (chi, crate::mps::threshold_size_quantum_inspired(REFERENCE_K_Q, REFERENCE_K_C, m, chi))
        })
        .collect();
    ThresholdReport {
        scenarios,
        swap_counts,
        cost_table,
        quantum_inspired_threshold,
        k_q: REFERENCE_K_Q,
        k_c: REFERENCE_K_C,
    }
}

pub fn write_threshold_report(
    config: &CampaignConfig,
    store: &CampaignStore,
) -> Result<ThresholdReport, CampaignError> {
    let report = report_thresholds(config);
    store.write_json("thresholds.json", &report)?;
    let mut text = String::new();
    text.push_str(&format!(
        "Reference exponents: k_q = {}, k_c = {}, alpha = {:.2}\n\n",
        report.k_q,
        report.k_c,
        report.k_c / report.k_q
    ));
    for s in &report.scenarios {
        text.push_str(&format!(
            "alpha = {}: 10^{:.1} samples per month -> one step every {:.3} s\n",
            s.alpha,
            s.samples_per_month.log10(),
            s.seconds_per_step
        ));
    }
    text.push_str("\nSWAP gates per Trotter step:\n");
    for (n, c) in &report.swap_counts {
        text.push_str(&format!("  n = {n}: {c}\n"));
    }
    text.push_str("\nPer-step cost estimates:\n");
    for (kind, memory, time) in &report.cost_table {
        text.push_str(&format!("  {kind}: memory {memory}, time {time}\n"));
    }
    text.push_str("\nQuantum-inspired threshold sizes (fixed point):\n");
    for (chi, n) in &report.quantum_inspired_threshold {
        text.push_str(&format!("  chi = {chi}: n > {n:.1}\n"));
    }
    let path = store.dir().join("thresholds.txt");
    std::fs::write(&path, text).map_err(|e| {
        CampaignError::Store(super::store::StoreError::Io { path, source: e })
    })?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Single chain run
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRunSummary {
    pub n: usize,
    pub seed: u64,
    pub steps: usize,
    pub acceptance_rate: f64,
    /// Total variation between the visit histogram and the target.
    pub tv_to_target: f64,
}

pub fn run_chain_campaign(
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<ChainRunSummary, CampaignError> {
    let n = *config.sizes_or(&[5]).first().unwrap_or(&5);
    let inst = crate::instances::generate_instance(n, config.instance_seed(0))?;
    let strategy = Strategy::Exact { gamma: config.gamma, t: config.t };
    let q = strategy.build(&inst)?;
    let target = boltzmann_target(&inst, config.temperature)?;
    let mut sampler = crate::chain::MatrixSampler { proposal: &q };
    let trace = crate::chain::run_chain(
        &inst,
        &mut sampler,
        config.temperature,
        config.chain_steps,
        config.base_seed ^ 0xc4a1_9ca1,
    )?;
    let records: Vec<Vec<String>> = trace
        .states
        .iter()
        .zip(trace.accepted.iter())
        .enumerate()
        .map(|(i, (s, a))| vec![i.to_string(), s.to_string(), (*a as u8).to_string()])
        .collect();
    store.write_csv_records("chain.csv", &["step", "state", "accepted"], &records)?;
    let dim = 1usize << n;
    let mut hist = ndarray::Array1::<f64>::zeros(dim);
    for &s in &trace.states {
        hist[s] += 1.0 / trace.states.len() as f64;
    }
    let summary = ChainRunSummary {
        n,
        seed: inst.seed,
        steps: config.chain_steps,
        acceptance_rate: trace.acceptance_rate,
        tv_to_target: crate::chain::total_variation(&hist, &target.probabilities),
    };
    store.write_json("chain_summary.json", &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn temp_store(tag: &str, config: &CampaignConfig) -> (PathBuf, CampaignStore) {
        let dir =
            std::env::temp_dir().join(format!("qemc-exp-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let store = CampaignStore::open(&dir, config).unwrap();
        (dir, store)
    }

    fn tiny_config() -> CampaignConfig {
        let mut c = CampaignConfig::default();
        c.instances = 3;
        c.base_seed = 100;
        c.sizes = vec![3, 4, 5, 6];
        c.chis = vec![2];
        c
    }

    #[test]
    fn scaling_campaign_produces_fits() {
        let config = tiny_config();
        let (dir, mut store) = temp_store("scaling", &config);
        let summary = run_scaling(&config, &mut store).unwrap();
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        // local, uniform, exact, trotter, mps-chi2
        assert_eq!(summary.fits.len(), 5);
        for fit in &summary.fits {
            assert!(fit.k.is_finite());
            assert_eq!(fit.sizes, vec![3, 4, 5, 6]);
        }
        assert!(summary.alpha.unwrap() > 1.0, "classical should scale worse");
        assert!(dir.join("gaps.csv").exists());
        let rows = crate::campaign::store::read_gap_csv(&dir.join("gaps.csv")).unwrap();
        assert_eq!(rows.len(), 5 * 4 * 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn grid_search_small() {
        let mut config = tiny_config();
        config.sizes = vec![4];
        config.gamma_grid = Some(Grid::new(0.1, 0.9, 0.2));
        config.t_grid = Some(Grid::new(12.0, 16.0, 2.0));
        let (dir, mut store) = temp_store("grid", &config);
        let summary = run_grid_search(&config, &mut store).unwrap();
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        assert_eq!(summary.gamma_opt.len(), 1);
        let (n, g) = summary.gamma_opt[0];
        assert_eq!(n, 4);
        assert!((0.1..=0.9).contains(&g));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn hitting_time_monotone_on_tiny_ensemble() {
        let mut config = tiny_config();
        config.sizes = vec![3, 4, 5];
        let (dir, mut store) = temp_store("hittime", &config);
        let summary = run_hitting_time(&config, &mut store).unwrap();
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        assert_eq!(summary.hit_times.len(), 3);
        for (_, _, t) in &summary.hit_times {
            assert!(t.is_some());
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn threshold_report_arithmetic() {
        let config = CampaignConfig::default();
        let report = report_thresholds(&config);
        // alpha = 4 -> 10^4.5 samples -> about 82 s per step.
        assert!((report.scenarios[0].samples_per_month - 10f64.powf(4.5)).abs() < 1.0);
        assert!((report.scenarios[0].seconds_per_step - 81.97).abs() < 0.5);
        // alpha = 3 -> 10^6 -> 2.59 s; alpha = 2 -> 10^9 -> 2.6 ms.
        assert!((report.scenarios[1].seconds_per_step - 2.592).abs() < 0.01);
        assert!((report.scenarios[2].seconds_per_step - 2.592e-3).abs() < 1e-5);
        assert_eq!(report.swap_counts[0], (3, 2));
        assert_eq!(report.swap_counts[1], (4, 8));
    }

    #[test]
    fn resume_reproduces_identical_files() {
        // Run a small campaign, delete the final CSV, reopen and re-run:
        // every cell is loaded from the manifest and the assembled output
        // is byte-identical.
        let mut config = tiny_config();
        config.sizes = vec![3, 4, 5, 6];
        let (dir, mut store) = temp_store("resume-exp", &config);
        run_scaling(&config, &mut store).unwrap();
        let first = std::fs::read(dir.join("gaps.csv")).unwrap();
        std::fs::remove_file(dir.join("gaps.csv")).unwrap();
        drop(store);
        let mut store = CampaignStore::open(&dir, &config).unwrap();
        run_scaling(&config, &mut store).unwrap();
        let second = std::fs::read(dir.join("gaps.csv")).unwrap();
        assert_eq!(first, second);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
