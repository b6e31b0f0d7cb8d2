use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Preset};
use super::output::{write_csv, write_plot, write_summary, Series, SummaryRow};
use super::rng::RngStream;
use crate::chaos::{chaos_rate, ChaosConfig, ChaosReport};
use crate::diagnostics::{simulate, DiagnosticsRecord, RunSpec};
use crate::dynamics::{eps_sweep, inertial_params, UpdateRule};
use crate::error::{Error, Result};
use crate::objectives::{MeanMatch, Objective, TeacherStudent};
use crate::product::{BlockPoint, BlockShape, Ensemble};

/// Mean-matching instance: `M` Gaussian targets then `N` Gaussian particles,
/// all scaled by `1/√cols`, zero initial momenta.
pub fn exp1_problem(cfg: &ExperimentConfig) -> Result<(MeanMatch, Ensemble)> {
    let mut rng = RngStream::new(cfg.seed);
    let scale = 1.0 / (cfg.cols as f64).sqrt();
    let targets = (0..cfg.m).map(|_| rng.gaussian_matrix(cfg.rows, cfg.cols, scale)).collect::<Result<Vec<_>>>()?;
    let obj = MeanMatch::from_targets(&targets)?;
    let positions = (0..cfg.n)
        .map(|_| Ok(BlockPoint::single(rng.gaussian_matrix(cfg.rows, cfg.cols, scale)?)))
        .collect::<Result<Vec<_>>>()?;
    let ens = Ensemble::at_rest(obj.shape().clone(), positions)?;
    Ok((obj, ens))
}

/// Teacher-student instance: `M` teachers `(A/√r, B/√d)`, `N` students at
/// scale 0.1, then `S` standard Gaussian inputs.
pub fn exp2_problem(cfg: &ExperimentConfig) -> Result<(TeacherStudent, Ensemble)> {
    let (d, r, p) = (cfg.d, cfg.r, cfg.p);
    let shape = BlockShape::new(vec![(p, r), (r, d)])?;
    let mut rng = RngStream::new(cfg.seed);
    let mut pair = |sa: f64, sb: f64| -> Result<BlockPoint> {
        BlockPoint::new(&shape, vec![rng.gaussian_matrix(p, r, sa)?, rng.gaussian_matrix(r, d, sb)?])
    };
    let teachers = (0..cfg.m)
        .map(|_| pair(1.0 / (r as f64).sqrt(), 1.0 / (d as f64).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let students = (0..cfg.n).map(|_| pair(0.1, 0.1)).collect::<Result<Vec<_>>>()?;
    let inputs = (0..cfg.samples).map(|_| (0..d).map(|_| rng.gaussian()).collect()).collect();
    let obj = TeacherStudent::from_teacher(d, r, p, &teachers, inputs)?;
    let ens = Ensemble::at_rest(shape, students)?;
    Ok((obj, ens))
}

/// Objective and initial ensemble for a setting.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(Box<dyn Objective>, Ensemble)> {
    match cfg.preset {
        Preset::Exp2 => {
            let (o, e) = exp2_problem(cfg)?;
            Ok((Box::new(o), e))
        }
        _ => {
            let (o, e) = exp1_problem(cfg)?;
            Ok((Box::new(o), e))
        }
    }
}

/// File stem of a rule's CSV, e.g. `hard` or `regularized_eps1e-2`.
pub fn cell_name(rule: &UpdateRule) -> String {
    match rule.eps() {
        Some(e) => format!("regularized_eps{e:e}"),
        None => rule.label().to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub rule: UpdateRule,
    pub records: Vec<DiagnosticsRecord>,
    pub max_p_norm: f64,
    pub error: Option<Error>,
}

impl CellResult {
    pub fn final_record(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone)]
pub struct SettingReport {
    pub config: ExperimentConfig,
    pub dir: PathBuf,
    pub cells: Vec<CellResult>,
}

impl SettingReport {
    pub fn cell(&self, rule: &UpdateRule) -> Option<&CellResult> {
        self.cells.iter().find(|c| &c.rule == rule)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub settings: Vec<SettingReport>,
    pub chaos: Option<ChaosReport>,
    /// `(ε, max divergence from hard Muon)` rows of an ε-sweep.
    pub divergence: Vec<(f64, f64)>,
}

impl RunReport {
    /// First aborted cell, if any.
    pub fn first_error(&self) -> Option<&Error> {
        self.settings.iter().flat_map(|s| &s.cells).find_map(|c| c.error.as_ref())
    }
}

fn positive_series(name: &str, recs: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> Series {
    Series { name: name.to_string(), points: recs.iter().map(|r| (r.t, f(r))).filter(|p| p.1 > 0.0).collect() }
}

/// Runs every configured rule from the same initial data and writes the
/// per-rule CSVs, `summary.csv`, `config.txt` and the two plots into `dir`.
pub fn run_setting(cfg: &ExperimentConfig, dir: &Path) -> Result<SettingReport> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_kv())?;
    let (obj, ens) = build_problem(cfg)?;
    let params = inertial_params(cfg.h, cfg.gamma)?;
    let rules = cfg.update_rules()?;
    let cells: Vec<CellResult> = rules
        .par_iter()
        .map(|rule| {
            let spec = RunSpec { params, rule: *rule, n_steps: cfg.iters, stride: cfg.record_stride, alpha: cfg.alpha };
            let out = simulate(obj.as_ref(), &ens, &spec)?;
            Ok(CellResult { rule: *rule, records: out.records, max_p_norm: out.max_p_norm, error: out.error })
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    for c in &cells {
        write_csv(&c.records, &dir.join(format!("{}.csv", cell_name(&c.rule))))?;
        let last = c.final_record().expect("a run records its initial state");
        summary.push(SummaryRow {
            rule: c.rule.label().to_string(),
            eps: c.rule.eps(),
            final_j: last.J,
            final_h: last.H,
            max_p_norm: c.max_p_norm,
            steps: last.step,
        });
    }
    write_summary(&summary, &dir.join("summary.csv"))?;

    let label = cfg.label();
    let j_series: Vec<Series> = cells.iter().map(|c| positive_series(&cell_name(&c.rule), &c.records, |r| r.J)).collect();
    let h_series: Vec<Series> = cells.iter().map(|c| positive_series(&cell_name(&c.rule), &c.records, |r| r.H)).collect();
    let title = format!("{} (M, N) = ({}, {})", cfg.preset.name(), cfg.m, cfg.n);
    if j_series.iter().any(|s| !s.points.is_empty()) {
        write_plot(&j_series, &dir.join(format!("objective_{label}.svg")), true, &title, "J_N")?;
    }
    if h_series.iter().any(|s| !s.points.is_empty()) {
        write_plot(&h_series, &dir.join(format!("hamiltonian_{label}.svg")), true, &title, "H = K + γJ_N")?;
    }
    Ok(SettingReport { config: cfg.clone(), dir: dir.to_path_buf(), cells })
}

fn chaos_config(cfg: &ExperimentConfig) -> ChaosConfig {
    ChaosConfig {
        n_list: cfg.n_list.clone(),
        n_ref: cfg.n_ref,
        t_end: cfg.iters as f64 * cfg.h,
        h_ode: cfg.h,
        n_seeds: cfg.n_seeds,
        eps: cfg.eps_list.first().copied().unwrap_or(1.0),
        gamma: cfg.gamma,
        seed: cfg.seed,
        init_scale: 1.0,
    }
}

fn run_chaos(cfg: &ExperimentConfig, dir: &Path) -> Result<ChaosReport> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_kv())?;
    let mut rng = RngStream::new(cfg.seed);
    let target = rng.gaussian_matrix(cfg.rows, cfg.cols, 1.0 / (cfg.cols as f64).sqrt())?;
    let obj = MeanMatch::new(target)?;
    let report = chaos_rate(&obj, &chaos_config(cfg))?;
    let mut w = csv::Writer::from_path(dir.join("chaos.csv")).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(["N", "mean_sq_error"]).map_err(|e| Error::Io(e.to_string()))?;
    for &(n, e) in &report.errors {
        w.write_record([n.to_string(), super::output::fmt_f64(e)]).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    fs::write(
        dir.join("chaos_fit.txt"),
        format!("slope = {}\nintercept = {}\nc_poc = {}\n", report.slope, report.intercept, report.c_poc),
    )?;
    let pts = report.errors.iter().map(|&(n, e)| ((n as f64).log2(), e)).collect();
    write_plot(&[Series { name: "coupled error".into(), points: pts }], &dir.join("chaos.svg"), true, "propagation of chaos", "error vs log2 N")?;
    Ok(report)
}

fn sweep_divergence(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<(f64, f64)>> {
    let (obj, ens) = exp1_problem(cfg)?;
    let params = inertial_params(cfg.h, cfg.gamma)?;
    let sweep = eps_sweep(&obj, &ens, &params, &cfg.eps_list, cfg.iters)?;
    let rows: Vec<(f64, f64)> = sweep
        .regularized
        .iter()
        .map(|r| (r.rule.eps().expect("sweep runs are regularized"), r.divergence_from_hard))
        .collect();
    let mut w = csv::Writer::from_path(dir.join("divergence.csv")).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(["eps", "max_divergence"]).map_err(|e| Error::Io(e.to_string()))?;
    for &(e, d) in &rows {
        w.write_record([super::output::fmt_f64(e), super::output::fmt_f64(d)]).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(rows)
}

/// Runs resolved settings of one preset inside a pool of `threads` workers.
///
/// Experiment presets write each `(M, N)` row into `out_dir/m{M}_n{N}`;
/// the sweep and chaos presets write into `out_dir` directly. All outputs
/// are written before a non-finite abort is reported as an error.
pub fn run_preset(configs: &[ExperimentConfig]) -> Result<RunReport> {
    let first = configs.first().ok_or_else(|| Error::InvalidConfig("no settings to run".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(first.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let report = pool.install(|| -> Result<RunReport> {
        let mut report = RunReport { settings: Vec::new(), chaos: None, divergence: Vec::new() };
        for cfg in configs {
            cfg.validate()?;
            match cfg.preset {
                Preset::Chaos => report.chaos = Some(run_chaos(cfg, &cfg.out_dir)?),
                Preset::EpsSweep => {
                    report.settings.push(run_setting(cfg, &cfg.out_dir)?);
                    report.divergence = sweep_divergence(cfg, &cfg.out_dir)?;
                }
                _ => {
                    let dir = cfg.out_dir.join(cfg.label());
                    report.settings.push(run_setting(cfg, &dir)?);
                }
            }
        }
        Ok(report)
    })?;
    match report.first_error() {
        Some(e) => Err(e.clone()),
        None => Ok(report),
    }
}
