//! Finite-dimensional ground truth: dataset generation, robust ERM training,
//! overlap measurement and empirical metric evaluation.
//!
//! The simulator exists to validate every asymptotic formula in the crate,
//! so its conventions match the solver's exactly: teacher fields are
//! <w_star, z>/sqrt(d) with unit-variance latents, model fields are
//! <theta, x>/sqrt(p) (latent model) or <w, x> with x ~ N(0, Id/d)
//! (well-specified model), and overlaps are measured as the covariances of
//! those fields.

use crate::geometry::{dual_norm_distance, lq_norm, AttackGeometry, FeatureMap};
use crate::metrics::{metrics_from_shifts, MetricsError, MetricsReport, OverlapPair, Provenance};
use crate::rng::Stream;
use crate::special::SpecialError;
use crate::state_evolution::{Link, Loss};
use crate::vecops::{axpy, dot, norm2};
use std::fmt;

#[derive(Debug, Clone)]
pub enum SimulationError {
    InvalidConfig(String),
    Training { message: String, iterations: usize },
    Numerics(SpecialError),
    Metrics(MetricsError),
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulationError::InvalidConfig(msg) => write!(f, "invalid simulation config: {msg}"),
            SimulationError::Training {
                message,
                iterations,
            } => {
                write!(
                    f,
                    "training failed after {iterations} iterations: {message}"
                )
            }
            SimulationError::Numerics(e) => write!(f, "numerical failure: {e}"),
            SimulationError::Metrics(e) => write!(f, "metric evaluation failed: {e}"),
        }
    }
}

impl std::error::Error for SimulationError {}

impl From<MetricsError> for SimulationError {
    fn from(e: MetricsError) -> Self {
        SimulationError::Metrics(e)
    }
}

/// A generated classification problem instance.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// covariates, n x dim row-major
    pub xs: Vec<f64>,
    /// labels in {-1, +1}
    pub ys: Vec<f64>,
    /// teacher weights on the sphere of radius sqrt(d)
    pub teacher: Vec<f64>,
    /// latent draws (n x d) when the model is latent
    pub zs: Option<Vec<f64>>,
    pub fmap: Option<FeatureMap>,
    pub n: usize,
    /// feature dimension the estimator lives in (d or p)
    pub dim: usize,
    /// latent/teacher dimension
    pub d_latent: usize,
    pub link: Link,
    pub seed: u64,
}

impl Dataset {
    pub fn is_latent(&self) -> bool {
        self.fmap.is_some()
    }

    /// Columnar CSV dump for inspection: one row per sample with the label,
    /// covariates and (for the latent model) the latent draws.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,y");
        for j in 0..self.dim {
            out.push_str(&format!(",x{j}"));
        }
        if self.zs.is_some() {
            for j in 0..self.d_latent {
                out.push_str(&format!(",z{j}"));
            }
        }
        out.push('\n');
        for i in 0..self.n {
            out.push_str(&format!("{i},{}", self.ys[i]));
            for v in self.x_row(i) {
                out.push_str(&format!(",{v}"));
            }
            if let Some(zs) = &self.zs {
                for v in &zs[i * self.d_latent..(i + 1) * self.d_latent] {
                    out.push_str(&format!(",{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    /// Normalization of the model field <w, x> / field_scale.
    pub fn field_scale(&self) -> f64 {
        if self.is_latent() {
            (self.dim as f64).sqrt()
        } else {
            1.0
        }
    }
}

fn teacher_on_sphere(rng: &mut Stream, d: usize) -> Vec<f64> {
    let mut w = rng.normal_vec(d);
    let scale = (d as f64).sqrt() / norm2(&w);
    for x in w.iter_mut() {
        *x *= scale;
    }
    w
}

fn draw_label(link: Link, field: f64, rng: &mut Stream) -> f64 {
    match link {
        Link::Sign => {
            if field >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        Link::Probit { .. } => rng.rademacher(link.prob_plus(field)),
    }
}

/// Well-specified data: x ~ N(0, Id/d), labels from the teacher field <w_star, x>.
pub fn generate_wellspec(d: usize, n: usize, link: Link, seed: u64) -> Dataset {
    let mut rng = Stream::new(seed, &[0x77]);
    let teacher = teacher_on_sphere(&mut rng, d);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let mut row_rng = Stream::new(seed, &[0x78, i as u64]);
        let start = xs.len();
        for _ in 0..d {
            xs.push(row_rng.standard_normal() * inv_sqrt_d);
        }
        let field = dot(&teacher, &xs[start..]);
        ys.push(draw_label(link, field, &mut row_rng));
    }
    Dataset {
        xs,
        ys,
        teacher,
        zs: None,
        fmap: None,
        n,
        dim: d,
        d_latent: d,
        link,
        seed,
    }
}

/// Latent-model data: z ~ N(0, Id_d), u ~ N(0, Id_p), x = F z + u, labels
/// from the latent field <w_star, z> / sqrt(d).
pub fn generate_latent(d: usize, p: usize, n: usize, link: Link, seed: u64) -> Dataset {
    let mut rng = Stream::new(seed, &[0x79]);
    let teacher = teacher_on_sphere(&mut rng, d);
    let fmap = FeatureMap::new(p, d);
    let sqrt_d = (d as f64).sqrt();
    let mut xs = Vec::with_capacity(n * p);
    let mut zs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let mut row_rng = Stream::new(seed, &[0x7a, i as u64]);
        let z = row_rng.normal_vec(d);
        let mut x = fmap.apply(&z);
        for xj in x.iter_mut() {
            *xj += row_rng.standard_normal();
        }
        let field = dot(&teacher, &z) / sqrt_d;
        ys.push(draw_label(link, field, &mut row_rng));
        xs.extend_from_slice(&x);
        zs.extend_from_slice(&z);
    }
    Dataset {
        xs,
        ys,
        teacher,
        zs: Some(zs),
        fmap: Some(fmap),
        n,
        dim: p,
        d_latent: d,
        link,
        seed,
    }
}

/// Training hyperparameters for robust ERM.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub loss: Loss,
    pub lambda: f64,
    /// training radius in rescaled units (0 = plain ERM)
    pub r: f64,
    /// dual exponent of the training geometry (1 = l-infinity training)
    pub s_dual: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: Loss::Logistic,
            lambda: 1e-3,
            r: 0.0,
            s_dual: 1.0,
            tol: 1e-8,
            max_iter: 200_000,
        }
    }
}

/// Field-convention overlaps of a weight vector against the teacher.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredOverlaps {
    pub m: f64,
    pub q: f64,
    pub q_l: f64,
    pub q_f: f64,
    /// ||w||_{s*}^{s*} / dim
    pub p_norm: f64,
}

impl MeasuredOverlaps {
    pub fn pair(&self) -> Result<OverlapPair, MetricsError> {
        OverlapPair::new(self.m, self.q)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPredictor {
    pub weights: Vec<f64>,
    pub overlaps: MeasuredOverlaps,
    pub objective: f64,
    /// norm of the proximal-gradient mapping at the solution
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// set when lambda = 0 and n < dim leave the minimizer non-unique
    pub non_unique_warning: bool,
}

impl TrainedPredictor {
    /// Columnar CSV dump: the measured overlaps and diagnostics on one row,
    /// then one row per weight coordinate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,q,q_l,q_f,p_norm,objective,stationarity,iterations\n");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            self.overlaps.m,
            self.overlaps.q,
            self.overlaps.q_l,
            self.overlaps.q_f,
            self.overlaps.p_norm,
            self.objective,
            self.stationarity,
            self.iterations
        ));
        out.push_str("coordinate,weight\n");
        for (j, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("{j},{w}\n"));
        }
        out
    }
}

/// Overlaps of an arbitrary weight vector under the dataset's conventions.
pub fn measure_overlaps(weights: &[f64], data: &Dataset, s_dual: f64) -> MeasuredOverlaps {
    let dimf = data.dim as f64;
    if let Some(fmap) = &data.fmap {
        let ft = fmap.transpose_apply(weights);
        let d = data.d_latent as f64;
        let m = dot(&data.teacher, &ft) / (d * dimf).sqrt();
        let q_l = dot(&ft, &ft) / dimf;
        let q_f = dot(weights, weights) / dimf;
        MeasuredOverlaps {
            m,
            q: q_l + q_f,
            q_l,
            q_f,
            p_norm: lq_norm(weights, s_dual).powf(s_dual) / dimf,
        }
    } else {
        let d = data.d_latent as f64;
        let m = dot(&data.teacher, weights) / d;
        let q = dot(weights, weights) / d;
        MeasuredOverlaps {
            m,
            q,
            q_l: q,
            q_f: 0.0,
            p_norm: lq_norm(weights, s_dual).powf(s_dual) / d,
        }
    }
}

/// Worst-case margin shift an attacker can force on the normalized model
/// field, per unit radius: consistent attacks pay the dual-norm distance to
/// the teacher span, unconstrained ones the plain dual norm.
///
/// `field_scale` is the divisor in the caller's field definition
/// (sqrt(p) for latent fields, 1 for well-specified fields over N(0, Id/d)
/// covariates).
pub fn worst_case_margin_shift(
    w: &[f64],
    w_star: &[f64],
    geom: &AttackGeometry,
    consistent: bool,
    field_scale: f64,
) -> f64 {
    let q_dual = geom.q_dual();
    let dist = if consistent {
        match dual_norm_distance(w, w_star, q_dual) {
            Ok((d, _)) => d,
            Err(_) => 0.0,
        }
    } else {
        lq_norm(w, q_dual)
    };
    geom.eps * dist / field_scale
}

/// Per-unit-eps_tilde margin shifts of a predictor. Multiplying by eps_tilde
/// gives the shift at that rescaled radius; the d^{-1/q*} factor converts the
/// finite-dimensional dual norm into rescaled units for both models.
pub fn shifts_per_unit_radius(
    weights: &[f64],
    data: &Dataset,
    q_att: f64,
) -> Result<(f64, f64), SimulationError> {
    let geom = AttackGeometry::new(q_att, 1.0)
        .map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
    let q_dual = geom.q_dual();
    let unit = (data.d_latent as f64).powf(-1.0 / q_dual);
    let w_eff: Vec<f64> = if let Some(fmap) = &data.fmap {
        fmap.transpose_apply(weights)
    } else {
        weights.to_vec()
    };
    let cns = match dual_norm_distance(&w_eff, &data.teacher, q_dual) {
        Ok((dist, _)) => dist,
        Err(_) => 0.0,
    };
    let rob = lq_norm(&w_eff, q_dual);
    Ok((unit * cns, unit * rob))
}

/// How to evaluate the empirical metrics.
#[derive(Debug, Clone, Copy)]
pub enum MetricMode {
    /// condition on the trained weights and evaluate the exact Gaussian flip
    /// probabilities (deterministic, no test-set noise)
    Plugin,
    /// draw fresh samples and count flip events
    MonteCarlo { n_test: usize },
}

/// Empirical clean/robust/consistent metrics of a trained predictor over a
/// grid of rescaled radii.
pub fn empirical_metrics(
    pred: &TrainedPredictor,
    data: &Dataset,
    q_att: f64,
    eps_tilde: &[f64],
    mode: MetricMode,
) -> Result<MetricsReport, SimulationError> {
    let (per_unit_cns, per_unit_rob) = shifts_per_unit_radius(&pred.weights, data, q_att)?;
    match mode {
        MetricMode::Plugin => {
            let ov = pred.overlaps.pair()?;
            Ok(metrics_from_shifts(
                &ov,
                eps_tilde,
                per_unit_cns,
                per_unit_rob,
                Provenance::EmpiricalPlugin,
            )?)
        }
        MetricMode::MonteCarlo { n_test } => {
            let k = eps_tilde.len();
            let mut rob = vec![0usize; k];
            let mut cns = vec![0usize; k];
            let mut bnd = vec![0usize; k];
            let mut clean = 0usize;
            let sqrt_d = (data.d_latent as f64).sqrt();
            for s in 0..n_test {
                let mut rng = Stream::new(data.seed, &[0x7b, s as u64]);
                let (nu, mu) = if let Some(fmap) = &data.fmap {
                    let z = rng.normal_vec(data.d_latent);
                    let mut x = fmap.apply(&z);
                    for xj in x.iter_mut() {
                        *xj += rng.standard_normal();
                    }
                    (
                        dot(&data.teacher, &z) / sqrt_d,
                        dot(&pred.weights, &x) / (data.dim as f64).sqrt(),
                    )
                } else {
                    let x: Vec<f64> = (0..data.dim)
                        .map(|_| rng.standard_normal() / sqrt_d)
                        .collect();
                    (dot(&data.teacher, &x), dot(&pred.weights, &x))
                };
                // the metrics use the noiseless teacher sign
                let y = if nu >= 0.0 { 1.0 } else { -1.0 };
                let margin = y * mu;
                if margin <= 0.0 {
                    clean += 1;
                }
                for (i, &et) in eps_tilde.iter().enumerate() {
                    if margin <= et * per_unit_rob {
                        rob[i] += 1;
                    }
                    if margin <= et * per_unit_cns {
                        cns[i] += 1;
                        if margin > 0.0 {
                            bnd[i] += 1;
                        }
                    }
                }
            }
            let nf = n_test as f64;
            Ok(MetricsReport {
                eps_tilde: eps_tilde.to_vec(),
                e_clean: clean as f64 / nf,
                e_rob: rob.iter().map(|&c| c as f64 / nf).collect(),
                e_rob_cns: cns.iter().map(|&c| c as f64 / nf).collect(),
                e_bnd_cns: bnd.iter().map(|&c| c as f64 / nf).collect(),
                provenance: Provenance::EmpiricalMonteCarlo,
            })
        }
    }
}

/// Robust empirical risk minimization:
/// min_w sum_i loss(<a_i, w> - c ||w||_{s*}) + lambda ||w||^2 with
/// a_i = y_i x_i / field_scale and c = r dim^{-1/s*}.
///
/// FISTA with adaptive restart and backtracking; for s* = 1 the norm
/// coupling is handled by soft-thresholding with the data-dependent weight
/// -c sum_i loss'(t_i), for s* > 1 the (smooth away from zero) norm gradient
/// joins the gradient step.
pub fn train_robust_erm(
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainedPredictor, SimulationError> {
    if !(cfg.lambda >= 0.0) || !(cfg.r >= 0.0) || !(cfg.s_dual >= 1.0) {
        return Err(SimulationError::InvalidConfig(
            "lambda, r must be nonnegative and s_dual >= 1".into(),
        ));
    }
    let non_unique_warning = cfg.lambda == 0.0 && data.n < data.dim;
    let dim = data.dim;
    let field_scale = data.field_scale();
    let c_norm = cfg.r * (dim as f64).powf(-1.0 / cfg.s_dual);
    let a: Vec<f64> = (0..data.n)
        .flat_map(|i| {
            let y = data.ys[i];
            data.x_row(i).iter().map(move |&x| y * x / field_scale)
        })
        .collect();
    let margins = |w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        let ns = if c_norm > 0.0 {
            lq_norm(w, cfg.s_dual)
        } else {
            0.0
        };
        for i in 0..data.n {
            out.push(dot(&a[i * dim..(i + 1) * dim], w) - c_norm * ns);
        }
    };
    let objective = |w: &[f64], t: &[f64]| -> f64 {
        t.iter().map(|&ti| cfg.loss.value(ti)).sum::<f64>() + cfg.lambda * dot(w, w)
    };
    // gradient of the smooth part; returns the soft-threshold weight
    // beta = -c sum_i loss'(t_i) >= 0 that carries the l1 coupling
    let smooth_grad = |w: &[f64], t: &[f64], g: &mut Vec<f64>| -> f64 {
        g.clear();
        g.resize(dim, 0.0);
        let mut dsum = 0.0;
        for i in 0..data.n {
            let d = cfg.loss.derivative(t[i]);
            if d != 0.0 {
                axpy(g, d, &a[i * dim..(i + 1) * dim]);
                dsum += d;
            }
        }
        axpy(g, 2.0 * cfg.lambda, w);
        let mut beta = 0.0;
        if c_norm > 0.0 {
            if cfg.s_dual == 1.0 {
                beta = -c_norm * dsum;
            } else {
                // gradient of ||w||_{s*}: sign(w_j)|w_j|^{s*-1} / ||w||^{s*-1}
                let ns = lq_norm(w, cfg.s_dual);
                if ns > 0.0 {
                    let coef = -c_norm * dsum / ns.powf(cfg.s_dual - 1.0);
                    for (gj, &wj) in g.iter_mut().zip(w) {
                        *gj += coef * wj.signum() * wj.abs().powf(cfg.s_dual - 1.0);
                    }
                }
            }
        }
        beta.max(0.0)
    };
    let prox_step = |w: &[f64], g: &[f64], beta: f64, eta: f64, out: &mut Vec<f64>| {
        out.clear();
        let thr = eta * beta;
        for (wj, gj) in w.iter().zip(g) {
            let v = wj - eta * gj;
            out.push(if thr > 0.0 {
                v.signum() * (v.abs() - thr).max(0.0)
            } else {
                v
            });
        }
    };

    let mut w = vec![0.0; dim];
    let mut v = w.clone();
    let mut t_buf = Vec::with_capacity(data.n);
    let mut tv_buf = Vec::with_capacity(data.n);
    let mut g = Vec::with_capacity(dim);
    let mut w_next = Vec::with_capacity(dim);
    margins(&w, &mut t_buf);
    let mut obj_w = objective(&w, &t_buf);
    let mut eta = 1.0f64;
    let mut momentum = 1.0f64;
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0usize;
    let mut converged = false;
    // consecutive accepted iterations without f64-resolvable progress
    let mut stalled = 0usize;
    let l1 = |w: &[f64]| -> f64 { w.iter().map(|x| x.abs()).sum() };
    while iterations < cfg.max_iter {
        iterations += 1;
        margins(&v, &mut tv_buf);
        let obj_v = objective(&v, &tv_buf);
        let beta = smooth_grad(&v, &tv_buf, &mut g);
        // backtracking on the composite model: the l1-coupled part enters
        // through its own prox decrease, the rest through the linearization
        let mut obj_next;
        loop {
            prox_step(&v, &g, beta, eta, &mut w_next);
            margins(&w_next, &mut t_buf);
            obj_next = objective(&w_next, &t_buf);
            let dv: f64 = w_next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            let lin: f64 = w_next
                .iter()
                .zip(&v)
                .zip(g.iter())
                .map(|((a, b), gj)| (a - b) * gj)
                .sum();
            let coupling = if beta > 0.0 {
                beta * (l1(&w_next) - l1(&v))
            } else {
                0.0
            };
            let rhs = obj_v + lin + coupling + dv / (2.0 * eta) + 4.0 * f64::EPSILON * obj_v.abs();
            if obj_next.is_finite() && obj_next <= rhs {
                break;
            }
            eta *= 0.5;
            if eta < 1e-18 {
                return Err(SimulationError::Training {
                    message: "line search collapsed".into(),
                    iterations,
                });
            }
        }
        let step_norm: f64 = w_next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        stationarity = step_norm / eta;
        let tol_eff = cfg.tol * obj_w.abs().max(1.0);
        if obj_next >= obj_w - 8.0 * f64::EPSILON * obj_w.abs() {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if obj_next > obj_w {
            // momentum overshoot: restart and take a plain step next round
            momentum = 1.0;
            v.copy_from_slice(&w);
            if stationarity <= tol_eff {
                converged = true;
                break;
            }
        } else {
            let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let mix = (momentum - 1.0) / momentum_next;
            v = w_next
                .iter()
                .zip(&w)
                .map(|(new, old)| new + mix * (new - old))
                .collect();
            momentum = momentum_next;
            w.copy_from_slice(&w_next);
            obj_w = obj_next;
            if stationarity <= tol_eff {
                converged = true;
                break;
            }
            eta = (eta * 1.3).min(1e12);
        }
        if stalled >= 64 {
            // the objective has stopped moving at machine precision; accept
            // only if the mapping norm sits at the f64-attainable floor for
            // this curvature, otherwise report the stall as a failure
            let floor = 20.0 * (2.0 * f64::EPSILON * obj_w.abs().max(1e-300) / eta).sqrt();
            if stationarity <= floor.max(tol_eff) {
                converged = true;
                break;
            }
            return Err(SimulationError::Training {
                message: format!(
                    "objective stalled at machine precision with mapping norm {stationarity:.3e}"
                ),
                iterations,
            });
        }
    }
    if !converged {
        return Err(SimulationError::Training {
            message: format!("proximal-gradient mapping norm {stationarity:.3e} above tolerance"),
            iterations,
        });
    }
    margins(&w, &mut t_buf);
    let obj_final = objective(&w, &t_buf);
    let overlaps = measure_overlaps(&w, data, cfg.s_dual);
    Ok(TrainedPredictor {
        weights: w,
        overlaps,
        objective: obj_final,
        stationarity,
        iterations,
        converged,
        non_unique_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{craft_consistent_attack, LinearPair};

    #[test]
    fn wellspec_generation_basics() {
        let data = generate_wellspec(10, 2000, Link::Sign, 7);
        assert_eq!(data.ys.len(), 2000);
        // sign link labels are exactly the teacher sign
        for i in 0..data.n {
            let f = dot(&data.teacher, data.x_row(i));
            assert_eq!(data.ys[i], if f >= 0.0 { 1.0 } else { -1.0 });
        }
        assert!((norm2(&data.teacher) - (10f64).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn wellspec_covariance_and_balance() {
        let d = 10;
        let n = 100_000;
        let data = generate_wellspec(d, n, Link::Sign, 11);
        let mut cov = vec![0.0; d * d];
        for i in 0..n {
            let x = data.x_row(i);
            for j in 0..d {
                for k in j..d {
                    cov[j * d + k] += x[j] * x[k];
                }
            }
        }
        let scale = 1.0 / n as f64;
        for j in 0..d {
            for k in j..d {
                let c = cov[j * d + k] * scale;
                let want = if j == k { 1.0 / d as f64 } else { 0.0 };
                assert!(
                    (c - want).abs() < 0.02 / d as f64,
                    "cov[{j},{k}] = {c}, want {want}"
                );
            }
        }
        let plus = data.ys.iter().filter(|&&y| y > 0.0).count() as f64 / n as f64;
        let se = 0.5 / (n as f64).sqrt();
        assert!((plus - 0.5).abs() < 3.0 * se, "balance {plus}");
    }

    #[test]
    fn latent_generation_structure() {
        let d = 10;
        let p = 20;
        let data = generate_latent(d, p, 500, Link::Sign, 3);
        let fmap = data.fmap.unwrap();
        assert_eq!(fmap.scale(), (2.0f64).sqrt());
        // rho = ||w_star||^2 / d = 1
        assert!((dot(&data.teacher, &data.teacher) / d as f64 - 1.0).abs() < 1e-10);
        // x - F z equals the noise on the latent block
        let z = &data.zs.as_ref().unwrap()[0..d];
        let x = data.x_row(0);
        let fz = fmap.apply(z);
        let noise_scale: f64 =
            (0..p).map(|j| (x[j] - fz[j]) * (x[j] - fz[j])).sum::<f64>() / p as f64;
        assert!(noise_scale > 0.3 && noise_scale < 3.0);
        // p < d branch: truncated identity
        let narrow = FeatureMap::new(5, 10);
        assert_eq!(narrow.scale(), 1.0);
        let z: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(narrow.apply(&z), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn measured_overlaps_latent_identities() {
        let d = 8;
        let p = 16;
        let data = generate_latent(d, p, 10, Link::Sign, 5);
        let z = measure_overlaps(&vec![0.0; p], &data, 1.0);
        assert_eq!(z.m, 0.0);
        assert_eq!(z.q, 0.0);
        // weights supported beyond the latent block: q_l = 0 and m = 0
        let mut w = vec![0.0; p];
        for j in d..p {
            w[j] = 1.0;
        }
        let o = measure_overlaps(&w, &data, 1.0);
        assert_eq!(o.q_l, 0.0);
        assert_eq!(o.m, 0.0);
        assert!((o.q - o.q_l - o.q_f).abs() < 1e-12);
        assert!((o.q_f - (p - d) as f64 / p as f64).abs() < 1e-12);
    }

    #[test]
    fn heavy_ridge_shrinks_weights() {
        let data = generate_wellspec(20, 60, Link::Sign, 9);
        let cfg = TrainConfig {
            lambda: 1e3,
            ..TrainConfig::default()
        };
        let pred = train_robust_erm(&data, &cfg).unwrap();
        assert!(norm2(&pred.weights) < 0.05);
        assert!(pred.objective <= data.n as f64 * Loss::Logistic.value(0.0) + 1e-9);
    }

    #[test]
    fn separable_toy_data_converges_to_max_margin_direction() {
        // four separable points: the first and third are the (mirrored)
        // support pair, the others sit far from the boundary, so the
        // vanishing-ridge logistic path pins the max-margin direction fast
        let xs = vec![1.0, 0.3, 2.0, -1.5, -1.0, 0.3, -2.2, 1.4];
        let ys = vec![1.0, 1.0, -1.0, -1.0];
        let teacher = vec![2.0f64.sqrt(), 0.0];
        let data = Dataset {
            xs: xs.clone(),
            ys: ys.clone(),
            teacher,
            zs: None,
            fmap: None,
            n: 4,
            dim: 2,
            d_latent: 2,
            link: Link::Sign,
            seed: 0,
        };
        let cfg = TrainConfig {
            lambda: 1e-6,
            tol: 1e-10,
            ..TrainConfig::default()
        };
        let pred = train_robust_erm(&data, &cfg).unwrap();
        // max-margin direction by dense angle scan (independent oracle)
        let margin_of = |theta: f64| -> f64 {
            let w = [theta.cos(), theta.sin()];
            (0..4)
                .map(|i| ys[i] * (w[0] * xs[2 * i] + w[1] * xs[2 * i + 1]))
                .fold(f64::INFINITY, f64::min)
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut th = 0.0;
        while th < 2.0 * std::f64::consts::PI {
            let m = margin_of(th);
            if m > best.0 {
                best = (m, th);
            }
            th += 1e-5;
        }
        let angle = pred.weights[1].atan2(pred.weights[0]);
        let mut diff = (angle - best.1).abs();
        if diff > std::f64::consts::PI {
            diff = 2.0 * std::f64::consts::PI - diff;
        }
        assert!(
            diff < 1.0f64.to_radians(),
            "angle off by {} degrees",
            diff.to_degrees()
        );
    }

    #[test]
    fn trained_objective_is_locally_optimal() {
        let data = generate_latent(15, 30, 40, Link::Sign, 13);
        let cfg = TrainConfig {
            lambda: 1e-2,
            r: 0.2,
            ..TrainConfig::default()
        };
        let pred = train_robust_erm(&data, &cfg).unwrap();
        let c_norm = cfg.r * (data.dim as f64).powf(-1.0 / cfg.s_dual);
        let scale = data.field_scale();
        let obj = |w: &[f64]| -> f64 {
            let ns = lq_norm(w, cfg.s_dual);
            let mut o = cfg.lambda * dot(w, w);
            for i in 0..data.n {
                let t = data.ys[i] * dot(data.x_row(i), w) / scale - c_norm * ns;
                o += cfg.loss.value(t);
            }
            o
        };
        let base = obj(&pred.weights);
        assert!((base - pred.objective).abs() < 1e-8 * base.max(1.0));
        let mut rng = Stream::new(99, &[1]);
        for _ in 0..100 {
            let probe: Vec<f64> = pred
                .weights
                .iter()
                .map(|w| w + 0.01 * rng.standard_normal())
                .collect();
            assert!(obj(&probe) >= base - 1e-9 * base.max(1.0));
        }
    }

    #[test]
    fn reduced_objective_dominates_sampled_perturbations() {
        // the closed-form margin shift is the worst case over the training
        // perturbation ball; sampled feasible perturbations only do worse,
        // while the dual-norm maximizer attains the bound
        let d = 5;
        let n = 8;
        let data = generate_wellspec(d, n, Link::Sign, 21);
        let mut rng = Stream::new(22, &[0]);
        let w = rng.normal_vec(d);
        let r_fin = 0.3;
        let s_att = f64::INFINITY; // training ball geometry s = infinity
        let s_dual = 1.0;
        for i in 0..n {
            let y = data.ys[i];
            let base = y * dot(data.x_row(i), &w);
            let reduced = Loss::Logistic.value(base - r_fin * lq_norm(&w, s_dual));
            let mut worst_sampled = f64::NEG_INFINITY;
            for s in 0..200 {
                let mut vr = Stream::new(23, &[i as u64, s]);
                let mut v: Vec<f64> = (0..d).map(|_| vr.uniform_in(-1.0, 1.0)).collect();
                let nv = lq_norm(&v, s_att);
                for vj in v.iter_mut() {
                    *vj *= r_fin / nv.max(1e-300);
                }
                let loss = Loss::Logistic.value(y * (dot(data.x_row(i), &w) + dot(&v, &w)));
                worst_sampled = worst_sampled.max(loss);
            }
            assert!(worst_sampled <= reduced + 1e-12);
            // the sign-vector perturbation attains the reduction
            let v: Vec<f64> = w.iter().map(|&wj| -y * r_fin * wj.signum()).collect();
            let attained = Loss::Logistic.value(y * (dot(data.x_row(i), &w) + dot(&v, &w)));
            assert!((attained - reduced).abs() < 1e-3);
        }
    }

    #[test]
    fn crafted_attacks_flip_exactly_below_threshold() {
        let d = 12;
        let data = generate_wellspec(d, 0, Link::Sign, 31);
        let mut rng = Stream::new(32, &[0]);
        let w = rng.normal_vec(d);
        let pair = LinearPair::new(data.teacher.clone(), w.clone()).unwrap();
        let geom = AttackGeometry::new(2.0, 0.25).unwrap();
        let (dist, _) =
            dual_norm_distance(&pair.model_perp(), &data.teacher, geom.q_dual()).unwrap();
        let mut flipped_below = 0;
        let mut total_below = 0;
        for s in 0..300u64 {
            let mut xr = Stream::new(33, &[s]);
            let x: Vec<f64> = (0..d)
                .map(|_| xr.standard_normal() / (d as f64).sqrt())
                .collect();
            let margin = dot(&w, &x).abs();
            if geom.eps * dist > margin {
                total_below += 1;
                let delta = craft_consistent_attack(&pair, &x, &geom).unwrap();
                let moved: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
                if dot(&w, &moved).signum() != dot(&w, &x).signum() {
                    flipped_below += 1;
                }
            } else {
                // feasible consistent perturbations never flip above threshold
                for t in 0..10u64 {
                    let mut pr = Stream::new(34, &[s, t]);
                    let mut delta = pr.normal_vec(d);
                    let coef = dot(&delta, &data.teacher) / dot(&data.teacher, &data.teacher);
                    axpy(&mut delta, -coef, &data.teacher);
                    let nd = lq_norm(&delta, geom.q_att());
                    for dj in delta.iter_mut() {
                        *dj *= geom.eps / nd;
                    }
                    let moved: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
                    assert_eq!(dot(&w, &moved).signum(), dot(&w, &x).signum());
                }
            }
        }
        assert!(total_below > 10, "threshold never crossed; weak test");
        assert_eq!(
            flipped_below, total_below,
            "crafted attack must always flip"
        );
    }

    #[test]
    fn plugin_and_monte_carlo_agree() {
        let eps: Vec<f64> = vec![0.0, 0.5, 1.0, 2.0];
        for trial in 0..20u64 {
            let latent = trial % 2 == 0;
            let (data, cfg) = if latent {
                (
                    generate_latent(30, 45, 60, Link::Sign, 100 + trial),
                    TrainConfig {
                        lambda: 1e-2,
                        ..TrainConfig::default()
                    },
                )
            } else {
                (
                    generate_wellspec(30, 60, Link::Sign, 200 + trial),
                    TrainConfig {
                        lambda: 1e-2,
                        ..TrainConfig::default()
                    },
                )
            };
            let pred = train_robust_erm(&data, &cfg).unwrap();
            let q_att = if trial % 4 < 2 { 2.0 } else { f64::INFINITY };
            let plugin = empirical_metrics(&pred, &data, q_att, &eps, MetricMode::Plugin).unwrap();
            let n_test = 100_000;
            let mc =
                empirical_metrics(&pred, &data, q_att, &eps, MetricMode::MonteCarlo { n_test })
                    .unwrap();
            assert_eq!(plugin.chain_violation(), 0.0);
            assert_eq!(mc.chain_violation(), 0.0);
            for i in 0..eps.len() {
                for (a, b) in [
                    (plugin.e_rob[i], mc.e_rob[i]),
                    (plugin.e_rob_cns[i], mc.e_rob_cns[i]),
                    (plugin.e_bnd_cns[i], mc.e_bnd_cns[i]),
                ] {
                    let se = (a * (1.0 - a) / n_test as f64).sqrt().max(1e-4);
                    assert!(
                        (a - b).abs() <= 3.0 * se,
                        "trial {trial} eps {} plugin {a} mc {b}",
                        eps[i]
                    );
                }
            }
            // zero radius: robust metrics equal the clean error, boundary zero
            assert!((plugin.e_rob[0] - plugin.e_clean).abs() < 1e-12);
            assert!((plugin.e_rob_cns[0] - plugin.e_clean).abs() < 1e-12);
            assert_eq!(mc.e_bnd_cns[0], 0.0);
        }
    }

    #[test]
    fn probit_labels_are_noisy_but_balanced() {
        let link = Link::Probit { noise_var: 0.5 };
        let d = 12;
        let n = 40_000;
        let data = generate_wellspec(d, n, link, 61);
        // deterministic given the seed
        let again = generate_wellspec(d, n, link, 61);
        assert_eq!(data.ys, again.ys);
        let mut agree = 0usize;
        let mut plus = 0usize;
        for i in 0..n {
            let f = dot(&data.teacher, data.x_row(i));
            if data.ys[i] * f > 0.0 {
                agree += 1;
            }
            if data.ys[i] > 0.0 {
                plus += 1;
            }
        }
        let se = 0.5 / (n as f64).sqrt();
        assert!((plus as f64 / n as f64 - 0.5).abs() < 4.0 * se);
        // label noise: agreement strictly between chance and certainty, and
        // matching E[Phi(|f|/sqrt(var))] with f ~ N(0,1)
        let expected = crate::special::gauss_expectation(
            |f| crate::special::std_normal_cdf(f.abs() / 0.5f64.sqrt()),
            &crate::special::QuadratureSpec::default(),
        )
        .unwrap();
        let got = agree as f64 / n as f64;
        assert!(
            (got - expected).abs() < 4.0 * se + 0.005,
            "teacher agreement {got} vs {expected}"
        );
    }

    #[test]
    fn csv_dumps_are_well_formed() {
        let data = generate_latent(4, 6, 3, Link::Sign, 5);
        let csv = data.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("sample,y,x0"));
        assert!(csv.contains(",z0"));
        let pred = train_robust_erm(
            &generate_wellspec(6, 20, Link::Sign, 6),
            &TrainConfig::default(),
        )
        .unwrap();
        let csv = pred.to_csv();
        assert!(csv.starts_with("m,q,q_l,q_f"));
        assert_eq!(csv.lines().count(), 2 + 1 + 6);
    }

    #[test]
    fn shift_ordering_and_alignment() {
        let d = 14;
        let mut rng = Stream::new(55, &[0]);
        let data = generate_wellspec(d, 0, Link::Sign, 55);
        let w = rng.normal_vec(d);
        for &q_att in &[1.5, 2.0, 4.0, f64::INFINITY] {
            let geom = AttackGeometry::new(q_att, 0.7).unwrap();
            let cns = worst_case_margin_shift(&w, &data.teacher, &geom, true, 1.0);
            let rob = worst_case_margin_shift(&w, &data.teacher, &geom, false, 1.0);
            assert!(cns <= rob + 1e-12, "q_att {q_att}");
        }
        // perfectly aligned model cannot be consistently attacked
        let geom = AttackGeometry::new(2.0, 1.0).unwrap();
        let aligned = worst_case_margin_shift(&data.teacher, &data.teacher, &geom, true, 1.0);
        assert!(aligned < 1e-10);
    }
}
