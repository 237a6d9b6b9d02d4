//! The five experiment commands: existence, asymptotic, simulate, tune and
//! compare. Each returns a [`Table`]; rows carry a schema version, the seed
//! and a full parameter echo so any row can be reproduced on its own.

use crate::config::{ExperimentConfig, MetricModeCfg, ModelKind};
use crate::table::{Table, Value};
use advlim::geometry::{
    consistent_attack_exists, dual_norm_distance, existence_probability_latent,
    existence_probability_wellspec, AttackGeometry, FeatureMap, LatentPair, LinearPair,
};
use advlim::metrics::{metrics_latent, MetricsReport};
use advlim::rng::{derive_seed, Stream};
use advlim::simulation::{
    empirical_metrics, generate_latent, generate_wellspec, train_robust_erm, MetricMode,
    TrainConfig, TrainedPredictor,
};
use advlim::state_evolution::{solve_fixed_point, OverlapState, StateEvolutionError};
use rayon::prelude::*;
use std::fmt;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug)]
pub struct CommandError(pub String);

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for CommandError {}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::WellSpecified => "wellspec",
        ModelKind::Latent => "latent",
    }
}

fn nan_values(k: usize) -> Vec<Value> {
    (0..k).map(|_| Value::Num(f64::NAN)).collect()
}

// ---------------------------------------------------------------------------
// existence
// ---------------------------------------------------------------------------

/// Theory vs Monte Carlo frequency for the existence probability of a
/// consistent attack, on a grid of radii and geometries.
pub fn cmd_existence(cfg: &ExperimentConfig) -> Result<Table, CommandError> {
    let mut table = Table::new(&[
        "schema",
        "command",
        "seed",
        "model",
        "q_att",
        "d",
        "p",
        "m_target",
        "eps",
        "p_theory",
        "p_montecarlo",
        "std_err",
        "samples",
        "status",
    ]);
    let n = cfg.exist_samples;
    match cfg.model {
        ModelKind::WellSpecified => {
            for (iq, &q_att) in cfg.exist_q_att.iter().enumerate() {
                for (id, &d) in cfg.exist_d.iter().enumerate() {
                    let instance_seed = derive_seed(cfg.seed, &[1, iq as u64, id as u64]);
                    let pair = correlated_pair(d, cfg.exist_m, instance_seed);
                    for &eps in &cfg.exist_eps {
                        let geom = AttackGeometry::new(q_att, eps)
                            .map_err(|e| CommandError(e.to_string()))?;
                        let p_theory = existence_probability_wellspec(&pair, &geom);
                        let mut hits = 0usize;
                        for s in 0..n {
                            let mut draw =
                                Stream::new(instance_seed, &[2, eps.to_bits(), s as u64]);
                            let x: Vec<f64> = (0..d)
                                .map(|_| draw.standard_normal() / (d as f64).sqrt())
                                .collect();
                            if consistent_attack_exists(&pair, &x, &geom) {
                                hits += 1;
                            }
                        }
                        let freq = hits as f64 / n as f64;
                        let se = (p_theory * (1.0 - p_theory) / n as f64).sqrt();
                        table.push(vec![
                            SCHEMA_VERSION.into(),
                            "existence".into(),
                            cfg.seed.into(),
                            "wellspec".into(),
                            q_att.into(),
                            d.into(),
                            d.into(),
                            cfg.exist_m.into(),
                            eps.into(),
                            p_theory.into(),
                            freq.into(),
                            se.into(),
                            n.into(),
                            "ok".into(),
                        ]);
                    }
                }
            }
        }
        ModelKind::Latent => {
            for (iq, &q_att) in cfg.exist_q_att.iter().enumerate() {
                for (id, &d) in cfg.exist_d.iter().enumerate() {
                    let p = (cfg.exist_p_over_d * d as f64).round() as usize;
                    let fmap = FeatureMap::new(p, d);
                    let instance_seed = derive_seed(cfg.seed, &[3, iq as u64, id as u64]);
                    let mut rng = Stream::new(instance_seed, &[0]);
                    let mut teacher = rng.normal_vec(d);
                    let norm: f64 = teacher.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for t in teacher.iter_mut() {
                        *t *= (d as f64).sqrt() / norm;
                    }
                    let theta = rng.normal_vec(p);
                    let pair = LatentPair::new(teacher.clone(), theta.clone(), fmap)
                        .map_err(|e| CommandError(e.to_string()))?;
                    let ft = fmap.transpose_apply(&theta);
                    let coef = dotp(&teacher, &ft) / d as f64;
                    let proj: Vec<f64> =
                        ft.iter().zip(&teacher).map(|(a, b)| a - coef * b).collect();
                    for &eps in &cfg.exist_eps {
                        let geom = AttackGeometry::new(q_att, eps)
                            .map_err(|e| CommandError(e.to_string()))?;
                        let p_theory = existence_probability_latent(&pair, &geom)
                            .map_err(|e| CommandError(e.to_string()))?;
                        let (dist, _) = dual_norm_distance(&proj, &teacher, geom.q_dual())
                            .map_err(|e| CommandError(e.to_string()))?;
                        let mut hits = 0usize;
                        for s in 0..n {
                            let mut draw =
                                Stream::new(instance_seed, &[4, eps.to_bits(), s as u64]);
                            let z: Vec<f64> = (0..d)
                                .map(|_| draw.standard_normal() / (d as f64).sqrt())
                                .collect();
                            let u: Vec<f64> = (0..p)
                                .map(|_| draw.standard_normal() / (p as f64).sqrt())
                                .collect();
                            let fz = fmap.apply(&z);
                            let margin: f64 = theta
                                .iter()
                                .zip(fz.iter().zip(&u))
                                .map(|(t, (a, b))| t * (a + b))
                                .sum();
                            if eps * dist >= margin.abs() {
                                hits += 1;
                            }
                        }
                        let freq = hits as f64 / n as f64;
                        let se = (p_theory * (1.0 - p_theory) / n as f64).sqrt();
                        table.push(vec![
                            SCHEMA_VERSION.into(),
                            "existence".into(),
                            cfg.seed.into(),
                            "latent".into(),
                            q_att.into(),
                            d.into(),
                            p.into(),
                            f64::NAN.into(),
                            eps.into(),
                            p_theory.into(),
                            freq.into(),
                            se.into(),
                            n.into(),
                            "ok".into(),
                        ]);
                    }
                }
            }
        }
    }
    Ok(table)
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Teacher sqrt(d) e1 together with a unit-sphere model at the requested
/// overlap, the standard probe for the existence plots.
fn correlated_pair(d: usize, m: f64, seed: u64) -> LinearPair {
    let mut ws = vec![0.0; d];
    ws[0] = (d as f64).sqrt();
    let mut rng = Stream::new(seed, &[0]);
    let mut noise = rng.normal_vec(d);
    noise[0] = 0.0;
    let nn: f64 = noise.iter().map(|x| x * x).sum::<f64>().sqrt();
    let w: Vec<f64> = (0..d)
        .map(|i| m * ws[i] + (1.0 - m * m).max(0.0).sqrt() * (d as f64).sqrt() * noise[i] / nn)
        .collect();
    LinearPair::new(ws, w).expect("valid pair")
}

// ---------------------------------------------------------------------------
// asymptotic
// ---------------------------------------------------------------------------

struct SolveOutcome {
    state: OverlapState,
    report: Option<MetricsReport>,
    status: String,
}

fn solve_point(cfg: &ExperimentConfig, value: f64) -> SolveOutcome {
    let point = cfg.at_sweep_value(value);
    let model = point.latent_config();
    match solve_fixed_point(&model, &point.solver) {
        Ok(state) => {
            let q_dual = advlim::geometry::dual_exponent(point.q_att);
            match metrics_latent(
                &state,
                model.gamma(),
                model.lambda,
                q_dual,
                &point.eps_tilde,
            ) {
                Ok(report) => SolveOutcome {
                    state,
                    report: Some(report),
                    status: "ok".into(),
                },
                Err(e) => SolveOutcome {
                    state,
                    report: None,
                    status: format!("metrics failed: {e}"),
                },
            }
        }
        Err(StateEvolutionError::NotConverged { state, trace }) => SolveOutcome {
            state: *state,
            report: None,
            status: format!("not converged after {} iterations", trace.len()),
        },
        Err(e) => SolveOutcome {
            state: OverlapState::initial(),
            report: None,
            status: format!("solver failed: {e}"),
        },
    }
}

const ASYMPTOTIC_COLUMNS: &[&str] = &[
    "schema",
    "command",
    "seed",
    "model",
    "axis",
    "axis_value",
    "alpha",
    "psi",
    "gamma",
    "lambda",
    "r",
    "q_att",
    "eps_tilde",
    "m",
    "q",
    "v",
    "p",
    "q_l",
    "q_f",
    "m_hat",
    "q_hat",
    "v_hat",
    "p_hat",
    "iterations",
    "residual",
    "e_clean",
    "e_rob",
    "e_rob_cns",
    "e_bnd_cns",
    "status",
];

/// State evolution plus asymptotic metric curves over the sweep grid.
/// Non-converged points are emitted with a status flag rather than dropped.
pub fn cmd_asymptotic(cfg: &ExperimentConfig) -> Result<Table, CommandError> {
    require_latent(cfg, "asymptotic")?;
    let mut table = Table::new(ASYMPTOTIC_COLUMNS);
    let outcomes: Vec<(f64, SolveOutcome)> = cfg
        .sweep_values()
        .into_par_iter()
        .map(|v| (v, solve_point(cfg, v)))
        .collect();
    for (value, outcome) in outcomes {
        let point = cfg.at_sweep_value(value);
        let st = &outcome.state;
        for (i, &et) in point.eps_tilde.iter().enumerate() {
            let mut row: Vec<Value> = vec![
                SCHEMA_VERSION.into(),
                "asymptotic".into(),
                cfg.seed.into(),
                "latent".into(),
                cfg.axis_name().into(),
                value.into(),
                point.alpha.into(),
                point.psi.into(),
                point.gamma().into(),
                point.lambda.into(),
                point.r.into(),
                point.q_att.into(),
                et.into(),
                st.m.into(),
                st.q.into(),
                st.v.into(),
                st.p.into(),
                st.q_l.into(),
                st.q_f.into(),
                st.m_hat.into(),
                st.q_hat.into(),
                st.v_hat.into(),
                st.p_hat.into(),
                st.iterations.into(),
                st.residual.into(),
            ];
            match &outcome.report {
                Some(rep) => {
                    row.push(rep.e_clean.into());
                    row.push(rep.e_rob[i].into());
                    row.push(rep.e_rob_cns[i].into());
                    row.push(rep.e_bnd_cns[i].into());
                }
                None => row.extend(nan_values(4)),
            }
            row.push(outcome.status.clone().into());
            table.push(row);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct RunOutcome {
    train_seed: u64,
    pred: Option<TrainedPredictor>,
    report: Option<MetricsReport>,
    status: String,
}

fn simulate_runs(cfg: &ExperimentConfig, value: f64, value_idx: usize) -> Vec<RunOutcome> {
    let point = cfg.at_sweep_value(value);
    (0..point.repetitions as u64)
        .into_par_iter()
        .map(|rep| {
            let train_seed = derive_seed(point.seed, &[10, value_idx as u64, rep]);
            let d = point.d;
            let n = (point.alpha * d as f64).round().max(1.0) as usize;
            let data = match point.model {
                ModelKind::WellSpecified => generate_wellspec(d, n, point.link, train_seed),
                ModelKind::Latent => {
                    let p = (d as f64 / point.gamma()).round().max(1.0) as usize;
                    generate_latent(d, p, n, point.link, train_seed)
                }
            };
            let tc = TrainConfig {
                loss: point.loss,
                lambda: point.lambda,
                r: point.r,
                s_dual: 1.0,
                ..TrainConfig::default()
            };
            match train_robust_erm(&data, &tc) {
                Ok(pred) => {
                    let mode = match point.metric_mode {
                        MetricModeCfg::Plugin => MetricMode::Plugin,
                        MetricModeCfg::MonteCarlo(n_test) => MetricMode::MonteCarlo { n_test },
                    };
                    match empirical_metrics(&pred, &data, point.q_att, &point.eps_tilde, mode) {
                        Ok(report) => RunOutcome {
                            train_seed,
                            pred: Some(pred),
                            report: Some(report),
                            status: "ok".into(),
                        },
                        Err(e) => RunOutcome {
                            train_seed,
                            pred: Some(pred),
                            report: None,
                            status: format!("metrics failed: {e}"),
                        },
                    }
                }
                Err(e) => RunOutcome {
                    train_seed,
                    pred: None,
                    report: None,
                    status: format!("training failed: {e}"),
                },
            }
        })
        .collect()
}

const SIMULATE_COLUMNS: &[&str] = &[
    "schema",
    "command",
    "seed",
    "model",
    "axis",
    "axis_value",
    "alpha",
    "psi",
    "gamma",
    "lambda",
    "r",
    "q_att",
    "d",
    "p",
    "n",
    "rep",
    "stat",
    "train_seed",
    "m",
    "q",
    "q_l",
    "q_f",
    "p_norm",
    "objective",
    "train_iterations",
    "eps_tilde",
    "e_clean",
    "e_rob",
    "e_rob_cns",
    "e_bnd_cns",
    "status",
];

/// Finite-dimensional runs: generate, train, measure overlaps, evaluate the
/// empirical metrics. Per-repetition rows are followed by mean/std rows.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Table, CommandError> {
    let mut table = Table::new(SIMULATE_COLUMNS);
    let values = cfg.sweep_values();
    let all_runs: Vec<(f64, Vec<RunOutcome>)> = values
        .iter()
        .enumerate()
        .map(|(idx, &v)| (v, simulate_runs(cfg, v, idx)))
        .collect();
    for (value, runs) in all_runs {
        let point = cfg.at_sweep_value(value);
        let d = point.d;
        let n = (point.alpha * d as f64).round().max(1.0) as usize;
        let p = match point.model {
            ModelKind::WellSpecified => d,
            ModelKind::Latent => (d as f64 / point.gamma()).round().max(1.0) as usize,
        };
        let echo = |rep: Value, stat: &str, train_seed: Value| -> Vec<Value> {
            vec![
                SCHEMA_VERSION.into(),
                "simulate".into(),
                cfg.seed.into(),
                model_name(point.model).into(),
                cfg.axis_name().into(),
                value.into(),
                point.alpha.into(),
                point.psi.into(),
                point.gamma().into(),
                point.lambda.into(),
                point.r.into(),
                point.q_att.into(),
                d.into(),
                p.into(),
                n.into(),
                rep,
                stat.into(),
                train_seed,
            ]
        };
        for (rep_idx, run) in runs.iter().enumerate() {
            for (i, &et) in point.eps_tilde.iter().enumerate() {
                let mut row = echo(rep_idx.into(), "rep", run.train_seed.into());
                match (&run.pred, &run.report) {
                    (Some(pred), Some(rep)) => {
                        row.push(pred.overlaps.m.into());
                        row.push(pred.overlaps.q.into());
                        row.push(pred.overlaps.q_l.into());
                        row.push(pred.overlaps.q_f.into());
                        row.push(pred.overlaps.p_norm.into());
                        row.push(pred.objective.into());
                        row.push(pred.iterations.into());
                        row.push(et.into());
                        row.push(rep.e_clean.into());
                        row.push(rep.e_rob[i].into());
                        row.push(rep.e_rob_cns[i].into());
                        row.push(rep.e_bnd_cns[i].into());
                    }
                    _ => {
                        row.extend(nan_values(7));
                        row.push(et.into());
                        row.extend(nan_values(4));
                    }
                }
                row.push(run.status.clone().into());
                table.push(row);
            }
        }
        // aggregate rows over converged repetitions
        let good: Vec<(&TrainedPredictor, &MetricsReport)> = runs
            .iter()
            .filter_map(|r| match (&r.pred, &r.report) {
                (Some(p), Some(m)) => Some((p, m)),
                _ => None,
            })
            .collect();
        if good.is_empty() {
            continue;
        }
        let agg = |f: &dyn Fn(&(&TrainedPredictor, &MetricsReport)) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = good.iter().map(f).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std = if vals.len() > 1 {
                (vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (vals.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            (mean, std)
        };
        for (i, &et) in point.eps_tilde.iter().enumerate() {
            let fields: Vec<(f64, f64)> = vec![
                agg(&|g| g.0.overlaps.m),
                agg(&|g| g.0.overlaps.q),
                agg(&|g| g.0.overlaps.q_l),
                agg(&|g| g.0.overlaps.q_f),
                agg(&|g| g.0.overlaps.p_norm),
                agg(&|g| g.0.objective),
                agg(&|g| g.0.iterations as f64),
                agg(&|g| g.1.e_clean),
                agg(&|g| g.1.e_rob[i]),
                agg(&|g| g.1.e_rob_cns[i]),
                agg(&|g| g.1.e_bnd_cns[i]),
            ];
            for (stat_idx, stat) in ["mean", "std"].iter().enumerate() {
                let mut row = echo(good.len().into(), stat, 0u64.into());
                for (k, &(mean, std)) in fields.iter().enumerate() {
                    if k == 7 {
                        row.push(et.into());
                    }
                    row.push(if stat_idx == 0 {
                        mean.into()
                    } else {
                        std.into()
                    });
                }
                row.push("ok".into());
                table.push(row);
            }
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

const TUNE_COLUMNS: &[&str] = &[
    "schema",
    "command",
    "seed",
    "model",
    "axis",
    "axis_value",
    "alpha",
    "psi",
    "gamma",
    "lambda0",
    "r0",
    "q_att",
    "objective",
    "lambda_star",
    "r_star",
    "value",
    "evaluations",
    "status",
];

fn objective_name(obj: advlim::metrics::TuneObjective) -> String {
    use advlim::metrics::TuneObjective::*;
    match obj {
        Clean => "clean".into(),
        Robust { eps_tilde, .. } => format!("rob@{eps_tilde}"),
        RobustConsistent { eps_tilde, .. } => format!("rob_cns@{eps_tilde}"),
        BoundaryConsistent { eps_tilde, .. } => format!("bnd_cns@{eps_tilde}"),
    }
}

/// Gradient-free hyperparameter optimization per sweep point.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<Table, CommandError> {
    require_latent(cfg, "tune")?;
    let mut table = Table::new(TUNE_COLUMNS);
    let results: Vec<(f64, Result<advlim::state_evolution::TuneResult, String>)> = cfg
        .sweep_values()
        .into_par_iter()
        .map(|v| {
            let point = cfg.at_sweep_value(v);
            let model = point.latent_config();
            let res = advlim::metrics::tune_metric(
                &model,
                &point.solver,
                point.tunables,
                point.objective,
            )
            .map_err(|e| e.to_string());
            (v, res)
        })
        .collect();
    for (value, res) in results {
        let point = cfg.at_sweep_value(value);
        let mut row: Vec<Value> = vec![
            SCHEMA_VERSION.into(),
            "tune".into(),
            cfg.seed.into(),
            "latent".into(),
            cfg.axis_name().into(),
            value.into(),
            point.alpha.into(),
            point.psi.into(),
            point.gamma().into(),
            point.lambda.into(),
            point.r.into(),
            point.q_att.into(),
            objective_name(point.objective).into(),
        ];
        match res {
            Ok(t) => {
                row.push(t.lambda.into());
                row.push(t.r.into());
                row.push(t.value.into());
                row.push(t.evaluations.into());
                row.push("ok".into());
            }
            Err(e) => {
                row.extend(nan_values(3));
                row.push(0usize.into());
                row.push(format!("tune failed: {e}").into());
            }
        }
        table.push(row);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

const COMPARE_COLUMNS: &[&str] = &[
    "schema",
    "command",
    "seed",
    "model",
    "axis",
    "axis_value",
    "alpha",
    "psi",
    "gamma",
    "lambda",
    "r",
    "q_att",
    "d",
    "reps",
    "eps_tilde",
    "m_theory",
    "m_sim",
    "m_std",
    "z_m",
    "q_theory",
    "q_sim",
    "q_std",
    "z_q",
    "e_rob_theory",
    "e_rob_sim",
    "e_rob_std",
    "z_rob",
    "e_rob_cns_theory",
    "e_rob_cns_sim",
    "e_rob_cns_std",
    "z_rob_cns",
    "e_bnd_cns_theory",
    "e_bnd_cns_sim",
    "e_bnd_cns_std",
    "z_bnd_cns",
    "status",
];

fn z_score(theory: f64, mean: f64, std: f64, reps: usize) -> f64 {
    let sem = std / (reps as f64).sqrt();
    if sem > 0.0 {
        (theory - mean).abs() / sem
    } else if (theory - mean).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Paired theory/simulation run on the identical sweep grid with z-scores per
/// overlap and metric.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Table, CommandError> {
    require_latent(cfg, "compare")?;
    let mut table = Table::new(COMPARE_COLUMNS);
    let values = cfg.sweep_values();
    let work: Vec<(f64, SolveOutcome, Vec<RunOutcome>)> = values
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let theory = solve_point(cfg, v);
            let runs = simulate_runs(cfg, v, idx);
            (v, theory, runs)
        })
        .collect();
    for (value, theory, runs) in work {
        let point = cfg.at_sweep_value(value);
        let good: Vec<(&TrainedPredictor, &MetricsReport)> = runs
            .iter()
            .filter_map(|r| match (&r.pred, &r.report) {
                (Some(p), Some(m)) => Some((p, m)),
                _ => None,
            })
            .collect();
        let reps = good.len();
        let status = if theory.report.is_none() {
            theory.status.clone()
        } else if reps < runs.len() {
            format!("{} of {} repetitions failed", runs.len() - reps, runs.len())
        } else {
            "ok".into()
        };
        let stats = |f: &dyn Fn(&(&TrainedPredictor, &MetricsReport)) -> f64| -> (f64, f64) {
            if reps == 0 {
                return (f64::NAN, f64::NAN);
            }
            let vals: Vec<f64> = good.iter().map(f).collect();
            let mean = vals.iter().sum::<f64>() / reps as f64;
            let std = if reps > 1 {
                (vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            (mean, std)
        };
        for (i, &et) in point.eps_tilde.iter().enumerate() {
            let mut row: Vec<Value> = vec![
                SCHEMA_VERSION.into(),
                "compare".into(),
                cfg.seed.into(),
                "latent".into(),
                cfg.axis_name().into(),
                value.into(),
                point.alpha.into(),
                point.psi.into(),
                point.gamma().into(),
                point.lambda.into(),
                point.r.into(),
                point.q_att.into(),
                point.d.into(),
                reps.into(),
                et.into(),
            ];
            let pairs: Vec<(f64, (f64, f64))> = vec![
                (theory.state.m, stats(&|g| g.0.overlaps.m)),
                (theory.state.q, stats(&|g| g.0.overlaps.q)),
                (
                    theory.report.as_ref().map_or(f64::NAN, |r| r.e_rob[i]),
                    stats(&|g| g.1.e_rob[i]),
                ),
                (
                    theory.report.as_ref().map_or(f64::NAN, |r| r.e_rob_cns[i]),
                    stats(&|g| g.1.e_rob_cns[i]),
                ),
                (
                    theory.report.as_ref().map_or(f64::NAN, |r| r.e_bnd_cns[i]),
                    stats(&|g| g.1.e_bnd_cns[i]),
                ),
            ];
            for (th, (mean, std)) in pairs {
                row.push(th.into());
                row.push(mean.into());
                row.push(std.into());
                row.push(z_score(th, mean, std, reps.max(1)).into());
            }
            row.push(status.clone().into());
            table.push(row);
        }
    }
    Ok(table)
}

fn require_latent(cfg: &ExperimentConfig, command: &str) -> Result<(), CommandError> {
    if cfg.model != ModelKind::Latent {
        return Err(CommandError(format!(
            "{command} requires model = latent (the well-specified model has no state-evolution solver here; use simulate)"
        )));
    }
    Ok(())
}
