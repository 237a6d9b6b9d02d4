//! Dual-norm geometry of consistent attacks on linear classifiers.
//!
//! A perturbation is *consistent* when it flips the model's sign while
//! leaving the teacher's sign untouched; for linear teachers that means the
//! perturbation is orthogonal to the teacher weights. The largest margin
//! shift such a perturbation can produce inside an lq ball of radius eps is
//! `eps * inf_k || w - k w_star ||_{q_dual}`, so everything in this module
//! reduces to that one-dimensional convex minimization.

use crate::special::{find_root, minimize_in, std_normal_cdf, RootFindSpec};
use crate::vecops::{dot, norm2};
use std::fmt;

#[derive(Debug, Clone)]
pub enum GeometryError {
    InvalidGeometry(String),
    ShapeMismatch { expected: usize, got: usize },
    NoAttackPossible,
    ZeroTeacher,
    TeacherOffSphere { norm: f64, expected: f64 },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InvalidGeometry(msg) => write!(f, "invalid attack geometry: {msg}"),
            GeometryError::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected length {expected}, got {got}")
            }
            GeometryError::NoAttackPossible => {
                write!(
                    f,
                    "model weights lie in the teacher span; no consistent attack exists"
                )
            }
            GeometryError::ZeroTeacher => write!(f, "teacher weights must be nonzero"),
            GeometryError::TeacherOffSphere { norm, expected } => write!(
                f,
                "teacher norm {norm:.12e} is off the sphere radius {expected:.12e}"
            ),
        }
    }
}

impl std::error::Error for GeometryError {}

/// lq norm; `q` may be `f64::INFINITY`.
pub fn lq_norm(v: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    }
    if q == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    if q == 2.0 {
        return norm2(v);
    }
    let scale = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(q)).sum();
    scale * s.powf(1.0 / q)
}

/// Dual exponent: 1/q + 1/q* = 1, with infinity and 1 mapped to each other.
pub fn dual_exponent(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else if q == 1.0 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}

/// Attack geometry: lq-ball exponent and radius.
///
/// The attack exponent must exceed 1 so the dual exponent stays finite.
#[derive(Debug, Clone, Copy)]
pub struct AttackGeometry {
    q_att: f64,
    pub eps: f64,
}

impl AttackGeometry {
    pub fn new(q_att: f64, eps: f64) -> Result<Self, GeometryError> {
        if !(q_att > 1.0) {
            return Err(GeometryError::InvalidGeometry(format!(
                "attack exponent must be in (1, inf], got {q_att}"
            )));
        }
        if !(eps >= 0.0) {
            return Err(GeometryError::InvalidGeometry(format!(
                "radius must be nonnegative, got {eps}"
            )));
        }
        Ok(AttackGeometry { q_att, eps })
    }

    pub fn q_att(&self) -> f64 {
        self.q_att
    }

    pub fn q_dual(&self) -> f64 {
        dual_exponent(self.q_att)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        AttackGeometry { eps, ..*self }
    }

    /// Rescaled radius for the well-specified model: eps_tilde = eps * d^{1/q*}.
    pub fn eps_tilde_wellspec(&self, d: usize) -> f64 {
        self.eps * (d as f64).powf(1.0 / self.q_dual())
    }

    /// Radius whose rescaled value is `eps_tilde` in dimension `d`.
    pub fn from_rescaled_wellspec(
        q_att: f64,
        eps_tilde: f64,
        d: usize,
    ) -> Result<Self, GeometryError> {
        let g = AttackGeometry::new(q_att, 0.0)?;
        let eps = eps_tilde * (d as f64).powf(-1.0 / g.q_dual());
        AttackGeometry::new(q_att, eps)
    }

    /// Latent-space rescaling: eps_tilde = eps * d^{1/q*} / sqrt(p), matching
    /// margins measured as <theta, x> / sqrt(p).
    pub fn from_rescaled_latent(
        q_att: f64,
        eps_tilde: f64,
        d: usize,
        p: usize,
    ) -> Result<Self, GeometryError> {
        let g = AttackGeometry::new(q_att, 0.0)?;
        let eps = eps_tilde * (p as f64).sqrt() * (d as f64).powf(-1.0 / g.q_dual());
        AttackGeometry::new(q_att, eps)
    }
}

/// Teacher/model weight pair for the well-specified model.
///
/// The teacher lives on the sphere of radius sqrt(d).
#[derive(Debug, Clone)]
pub struct LinearPair {
    pub teacher: Vec<f64>,
    pub model: Vec<f64>,
}

impl LinearPair {
    pub fn new(teacher: Vec<f64>, model: Vec<f64>) -> Result<Self, GeometryError> {
        if teacher.len() != model.len() {
            return Err(GeometryError::ShapeMismatch {
                expected: teacher.len(),
                got: model.len(),
            });
        }
        let d = teacher.len() as f64;
        let norm = norm2(&teacher);
        if norm == 0.0 {
            return Err(GeometryError::ZeroTeacher);
        }
        if (norm - d.sqrt()).abs() > 1e-10 * d.sqrt() {
            return Err(GeometryError::TeacherOffSphere {
                norm,
                expected: d.sqrt(),
            });
        }
        Ok(LinearPair { teacher, model })
    }

    pub fn dim(&self) -> usize {
        self.teacher.len()
    }

    /// Model component orthogonal to the teacher.
    pub fn model_perp(&self) -> Vec<f64> {
        let d = self.dim() as f64;
        let c = dot(&self.teacher, &self.model) / d;
        self.model
            .iter()
            .zip(&self.teacher)
            .map(|(w, ws)| w - c * ws)
            .collect()
    }

    /// Dual-norm distance of the model to the teacher span, with cancellation
    /// noise from the projection floored to an exact zero.
    fn span_distance(&self, q_dual: f64) -> Result<(f64, f64), GeometryError> {
        let perp = self.model_perp();
        if norm2(&perp) <= 1e-13 * norm2(&self.model) {
            return Ok((0.0, 0.0));
        }
        dual_norm_distance(&perp, &self.teacher, q_dual)
    }
}

/// Structured feature matrix of the latent model: a sqrt(p/d)-scaled identity
/// stacked on zero rows when p >= d, a truncated identity when p < d.
#[derive(Debug, Clone, Copy)]
pub struct FeatureMap {
    pub p: usize,
    pub d: usize,
}

impl FeatureMap {
    pub fn new(p: usize, d: usize) -> Self {
        FeatureMap { p, d }
    }

    pub fn scale(&self) -> f64 {
        if self.p >= self.d {
            (self.p as f64 / self.d as f64).sqrt()
        } else {
            1.0
        }
    }

    /// x-contribution F z (length p).
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.d);
        let s = self.scale();
        let mut out = vec![0.0; self.p];
        for i in 0..self.d.min(self.p) {
            out[i] = s * z[i];
        }
        out
    }

    /// Latent projection F^T theta (length d).
    pub fn transpose_apply(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.p);
        let s = self.scale();
        let mut out = vec![0.0; self.d];
        for i in 0..self.d.min(self.p) {
            out[i] = s * theta[i];
        }
        out
    }
}

/// Teacher (latent space) plus feature-space estimator.
#[derive(Debug, Clone)]
pub struct LatentPair {
    pub teacher: Vec<f64>,
    pub theta: Vec<f64>,
    pub fmap: FeatureMap,
}

impl LatentPair {
    pub fn new(
        teacher: Vec<f64>,
        theta: Vec<f64>,
        fmap: FeatureMap,
    ) -> Result<Self, GeometryError> {
        if teacher.len() != fmap.d {
            return Err(GeometryError::ShapeMismatch {
                expected: fmap.d,
                got: teacher.len(),
            });
        }
        if theta.len() != fmap.p {
            return Err(GeometryError::ShapeMismatch {
                expected: fmap.p,
                got: theta.len(),
            });
        }
        let d = fmap.d as f64;
        let norm = norm2(&teacher);
        if norm == 0.0 {
            return Err(GeometryError::ZeroTeacher);
        }
        if (norm - d.sqrt()).abs() > 1e-10 * d.sqrt() {
            return Err(GeometryError::TeacherOffSphere {
                norm,
                expected: d.sqrt(),
            });
        }
        Ok(LatentPair {
            teacher,
            theta,
            fmap,
        })
    }
}

/// Distance to the teacher span in the dual norm together with the margin
/// quantities derived from it.
#[derive(Debug, Clone, Copy)]
pub struct MarginSummary {
    /// inf_k || w_perp - k w_star ||_{q_dual}
    pub dual_distance: f64,
    /// minimizing multiplier
    pub kappa_star: f64,
    /// |<w, x>| / dual_distance
    pub margin: f64,
    /// dual_distance / ||w||_{q_dual}, always in [0, 1]
    pub rho_ratio: f64,
}

/// Minimum of || v - k w_star ||_{q_dual} over k, returning the distance and
/// the minimizer. For q_dual in (1, inf) the objective is strictly convex so
/// the minimizer is unique; at q_dual = 1 ties break toward the smallest |k|.
pub fn dual_norm_distance(
    v: &[f64],
    w_star: &[f64],
    q_dual: f64,
) -> Result<(f64, f64), GeometryError> {
    if !(q_dual >= 1.0) || q_dual.is_infinite() {
        return Err(GeometryError::InvalidGeometry(format!(
            "dual exponent must be in [1, inf), got {q_dual}"
        )));
    }
    if v.len() != w_star.len() {
        return Err(GeometryError::ShapeMismatch {
            expected: w_star.len(),
            got: v.len(),
        });
    }
    let ws_max = w_star.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if ws_max == 0.0 {
        return Err(GeometryError::ZeroTeacher);
    }
    let v_max = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if v_max == 0.0 {
        return Ok((0.0, 0.0));
    }
    let residual = |k: f64| -> f64 {
        let diff: Vec<f64> = v.iter().zip(w_star).map(|(a, b)| a - k * b).collect();
        lq_norm(&diff, q_dual)
    };
    let half_width = 2.0 * v_max / ws_max;
    let res = minimize_in(residual, -half_width, half_width, 1e-12, 400);
    let mut kappa = res.argmin;
    let mut dist = res.min;
    if q_dual > 1.0 {
        // polish the minimizer by zeroing the stationarity functional
        // sum_i sign(v_i - k w*_i) |v_i - k w*_i|^{q*-1} w*_i, which is
        // continuous and nonincreasing in k
        let pairing = |k: f64| -> f64 {
            v.iter()
                .zip(w_star)
                .map(|(a, b)| {
                    let t = a - k * b;
                    t.signum() * t.abs().powf(q_dual - 1.0) * b
                })
                .sum::<f64>()
        };
        let w = (half_width * 1e-6).max(1e-9 * (1.0 + kappa.abs()));
        let spec = RootFindSpec {
            tol: 1e-14,
            ..RootFindSpec::default()
        };
        if let Ok(k2) = find_root(pairing, (kappa - w, kappa + w), &spec) {
            let d2 = residual(k2);
            if d2 <= dist * (1.0 + 1e-12) {
                kappa = k2;
                dist = d2;
            }
        }
    } else {
        // piecewise-linear objective: flat minima are possible, tie-break to
        // the smallest |k|
        let at_zero = residual(0.0);
        if at_zero <= dist * (1.0 + 1e-12) + 1e-300 {
            kappa = 0.0;
            dist = at_zero;
        }
    }
    // distances below float resolution are genuinely zero
    if dist <= 1e-11 * lq_norm(v, q_dual) {
        dist = 0.0;
    }
    Ok((dist, kappa))
}

/// Margin diagnostics of a model/covariate pair under the given geometry.
pub fn margin_summary(
    pair: &LinearPair,
    x: &[f64],
    geom: &AttackGeometry,
) -> Result<MarginSummary, GeometryError> {
    let q_dual = geom.q_dual();
    let (dist, kappa) = pair.span_distance(q_dual)?;
    let margin_raw = dot(&pair.model, x).abs();
    let model_dual = lq_norm(&pair.model, q_dual);
    Ok(MarginSummary {
        dual_distance: dist,
        kappa_star: kappa,
        margin: if dist > 0.0 {
            margin_raw / dist
        } else {
            f64::INFINITY
        },
        rho_ratio: if model_dual > 0.0 {
            (dist / model_dual).min(1.0)
        } else {
            0.0
        },
    })
}

/// Whether a consistent attack of the given radius exists for covariate `x`.
///
/// Zero-margin covariates sit on the decision boundary already and count as
/// attackable for any eps > 0.
pub fn consistent_attack_exists(pair: &LinearPair, x: &[f64], geom: &AttackGeometry) -> bool {
    let margin = dot(&pair.model, x).abs();
    if margin == 0.0 {
        return geom.eps > 0.0;
    }
    match pair.span_distance(geom.q_dual()) {
        Ok((dist, _)) => geom.eps * dist >= margin,
        Err(_) => false,
    }
}

/// Whether an attack exists when the consistency constraint is dropped.
pub fn inconsistent_attack_exists(pair: &LinearPair, x: &[f64], geom: &AttackGeometry) -> bool {
    let margin = dot(&pair.model, x).abs();
    if margin == 0.0 {
        return geom.eps > 0.0;
    }
    geom.eps * lq_norm(&pair.model, geom.q_dual()) >= margin
}

/// Build the worst-case consistent perturbation: orthogonal to the teacher,
/// of norm eps in the attack exponent, and pushing the model margin by
/// -sign(<w, x>) * eps * dual_distance.
pub fn craft_consistent_attack(
    pair: &LinearPair,
    x: &[f64],
    geom: &AttackGeometry,
) -> Result<Vec<f64>, GeometryError> {
    let q_dual = geom.q_dual();
    let perp = pair.model_perp();
    if norm2(&perp) <= 1e-13 * norm2(&pair.model).max(1e-300) {
        return Err(GeometryError::NoAttackPossible);
    }
    let (_, kappa) = dual_norm_distance(&perp, &pair.teacher, q_dual)?;
    let tilted: Vec<f64> = perp
        .iter()
        .zip(&pair.teacher)
        .map(|(a, b)| a - kappa * b)
        .collect();
    let mut delta: Vec<f64> = if q_dual == 1.0 {
        // attack ball is l-infinity: the maximizer is a sign vector, with
        // the coordinates where the tilted vector vanishes used to cancel
        // the residual teacher component exactly
        let scale = tilted.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
        let tol = 1e-9 * scale;
        let mut delta: Vec<f64> = tilted
            .iter()
            .map(|&t| if t.abs() > tol { t.signum() } else { 0.0 })
            .collect();
        let residual = dot(&delta, &pair.teacher);
        let zero_mass: f64 = tilted
            .iter()
            .zip(&pair.teacher)
            .filter(|(t, _)| t.abs() <= tol)
            .map(|(_, ws)| ws * ws)
            .sum();
        if zero_mass > 0.0 {
            let coef = -residual / zero_mass;
            for (d, (t, ws)) in delta.iter_mut().zip(tilted.iter().zip(&pair.teacher)) {
                if t.abs() <= tol {
                    *d = (coef * ws).clamp(-1.0, 1.0);
                }
            }
        }
        delta
    } else {
        tilted
            .iter()
            .map(|&t| t.signum() * t.abs().powf(q_dual - 1.0))
            .collect()
    };
    let nrm = lq_norm(&delta, geom.q_att());
    if nrm == 0.0 {
        return Err(GeometryError::NoAttackPossible);
    }
    let sign = -dot(&pair.model, x).signum();
    let sign = if sign == 0.0 { -1.0 } else { sign };
    let s = sign * geom.eps / nrm;
    for d in delta.iter_mut() {
        *d *= s;
    }
    Ok(delta)
}

/// Probability over isotropic Gaussian covariates x ~ N(0, Id/d) that a
/// consistent attack exists: 2 Phi(eps sqrt(d) dist / ||w||_2) - 1.
pub fn existence_probability_wellspec(pair: &LinearPair, geom: &AttackGeometry) -> f64 {
    let d = pair.dim() as f64;
    let model_norm = norm2(&pair.model);
    if model_norm == 0.0 {
        return if geom.eps > 0.0 { 1.0 } else { 0.0 };
    }
    let (dist, _) = match pair.span_distance(geom.q_dual()) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    (2.0 * std_normal_cdf(geom.eps * d.sqrt() * dist / model_norm) - 1.0).clamp(0.0, 1.0)
}

/// Probability over z ~ N(0, Id_d/d), u ~ N(0, Id_p/p) that a consistent
/// latent-space attack exists for the feature-space estimator theta.
pub fn existence_probability_latent(
    pair: &LatentPair,
    geom: &AttackGeometry,
) -> Result<f64, GeometryError> {
    let p = pair.fmap.p as f64;
    let d = pair.fmap.d as f64;
    let ft = pair.fmap.transpose_apply(&pair.theta);
    // project out the teacher span before taking the distance
    let coef = dot(&pair.teacher, &ft) / d;
    let proj: Vec<f64> = ft
        .iter()
        .zip(&pair.teacher)
        .map(|(a, b)| a - coef * b)
        .collect();
    let (dist, _) = dual_norm_distance(&proj, &pair.teacher, geom.q_dual())?;
    let denom = (dot(&pair.theta, &pair.theta) + (p / d) * dot(&ft, &ft)).sqrt();
    if denom == 0.0 {
        return Ok(if geom.eps > 0.0 { 1.0 } else { 0.0 });
    }
    Ok((2.0 * std_normal_cdf(p.sqrt() * geom.eps * dist / denom) - 1.0).clamp(0.0, 1.0))
}
