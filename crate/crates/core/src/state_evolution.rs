//! Self-consistent equations for robust ERM in the latent-variable model,
//! solved by damped fixed-point iteration.
//!
//! The iteration alternates two maps. The channel map turns the current
//! overlaps (m, q, V, P) into conjugates (m_hat, q_hat, V_hat, P_hat) through
//! one-dimensional Gaussian expectations of the loss's proximal operator,
//! with the training radius entering as a margin shift r * P^{1/s*}. The
//! prior map inverts the conjugates into fresh overlaps through the
//! elastic-net proximal operator of the ridge-plus-threshold per-coordinate
//! problem; its two branches cover the overparameterized (gamma <= 1, p >= d)
//! and underparameterized (gamma > 1) regimes and agree at gamma = 1.
//!
//! Conventions: overlaps are local-field covariances. The teacher field
//! nu = <w_star, z>/sqrt(d) has unit variance, the model field
//! mu = <theta, x>/sqrt(p) has variance q = q_l + q_f with
//! q_l = theta^T F F^T theta / p and q_f = ||theta||^2 / p, and
//! m = E[nu mu] = w_star^T F^T theta / sqrt(d p). The finite-dimensional
//! simulator measures exactly these quantities.

use crate::special::{
    find_root, gauss_expectation_multi, minimize_in, nelder_mead, std_normal_cdf, std_normal_pdf,
    QuadratureSpec, RootFindSpec, SpecialError,
};
use std::fmt;

#[derive(Debug, Clone)]
pub enum StateEvolutionError {
    InvalidConfig(String),
    InvalidArgument(String),
    Numerics {
        context: String,
        source: SpecialError,
    },
    NotConverged {
        state: Box<OverlapState>,
        trace: Vec<f64>,
    },
}

impl fmt::Display for StateEvolutionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateEvolutionError::InvalidConfig(msg) => write!(f, "invalid model config: {msg}"),
            StateEvolutionError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            StateEvolutionError::Numerics { context, source } => {
                write!(f, "numerical failure in {context}: {source}")
            }
            StateEvolutionError::NotConverged { state, trace } => write!(
                f,
                "fixed point not reached after {} iterations (residual {:.3e})",
                trace.len(),
                state.residual
            ),
        }
    }
}

impl std::error::Error for StateEvolutionError {}

/// Label-generating link: hard sign or probit with additive noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Sign,
    Probit { noise_var: f64 },
}

impl Link {
    fn effective_var(&self, v: f64) -> f64 {
        match self {
            Link::Sign => v,
            Link::Probit { noise_var } => v + noise_var,
        }
    }

    /// P(y = +1 | teacher field nu).
    pub fn prob_plus(&self, nu: f64) -> f64 {
        match self {
            Link::Sign => {
                if nu > 0.0 {
                    1.0
                } else if nu < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            Link::Probit { noise_var } => {
                if *noise_var > 0.0 {
                    std_normal_cdf(nu / noise_var.sqrt())
                } else {
                    Link::Sign.prob_plus(nu)
                }
            }
        }
    }
}

/// Convex non-increasing margin losses with cheap proximal maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Logistic,
    Hinge,
}

impl Loss {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            // log(1 + e^-t), stable in both tails
            Loss::Logistic => {
                if t > 0.0 {
                    (-t).exp().ln_1p()
                } else {
                    -t + t.exp().ln_1p()
                }
            }
            Loss::Hinge => (1.0 - t).max(0.0),
        }
    }

    /// Derivative in the margin; for the hinge this is the a.e. derivative.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Loss::Logistic => -sigmoid(-t),
            Loss::Hinge => {
                if t < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Partition function of the label channel: the probability of label `y`
/// when the preactivation is N(omega, v).
pub fn z0_channel(link: Link, y: f64, omega: f64, v: f64) -> Result<f64, StateEvolutionError> {
    if !(v > 0.0) {
        return Err(StateEvolutionError::InvalidArgument(format!(
            "channel variance must be positive, got {v}"
        )));
    }
    let veff = link.effective_var(v);
    Ok(std_normal_cdf(y.signum() * omega / veff.sqrt()))
}

/// d/d omega of [`z0_channel`].
pub fn dz0_domega(link: Link, y: f64, omega: f64, v: f64) -> Result<f64, StateEvolutionError> {
    if !(v > 0.0) {
        return Err(StateEvolutionError::InvalidArgument(format!(
            "channel variance must be positive, got {v}"
        )));
    }
    let veff = link.effective_var(v);
    Ok(y.signum() * std_normal_pdf(omega / veff.sqrt()) / veff.sqrt())
}

/// Proximal point of the shifted margin loss:
/// argmin_z [ loss(y z - shift) + (z - omega)^2 / (2 v) ].
pub fn prox_shifted_loss(
    loss: Loss,
    y: f64,
    omega: f64,
    v: f64,
    shift: f64,
) -> Result<f64, StateEvolutionError> {
    if !(v > 0.0) {
        return Err(StateEvolutionError::InvalidArgument(format!(
            "prox scale must be positive, got {v}"
        )));
    }
    let y = y.signum();
    // reduce to the y = +1 problem in u = y z
    let u = prox_margin_plus(loss, y * omega, v, shift)?;
    Ok(y * u)
}

/// y = +1 case: argmin_u [ loss(u - shift) + (u - w)^2 / (2 v) ].
fn prox_margin_plus(loss: Loss, w: f64, v: f64, shift: f64) -> Result<f64, StateEvolutionError> {
    match loss {
        Loss::Hinge => {
            let kink = 1.0 + shift;
            Ok(if w >= kink {
                w
            } else if w <= kink - v {
                w + v
            } else {
                kink
            })
        }
        Loss::Logistic => {
            // stationarity: u = w + v * sigmoid(shift - u), root in [w, w + v]
            let g = |u: f64| u - w - v * sigmoid(shift - u);
            let spec = RootFindSpec {
                tol: 1e-13,
                ..RootFindSpec::default()
            };
            find_root(g, (w, w + v), &spec).map_err(|source| StateEvolutionError::Numerics {
                context: format!("logistic prox at (omega {w:.3e}, v {v:.3e}, shift {shift:.3e})"),
                source,
            })
        }
    }
}

/// Elastic-net proximal map: argmin_z [ lambda z^2 + pi |z| + cap z^2 / 2 - v z ]
/// = sign(v) max(|v| - pi, 0) / (cap + 2 lambda).
pub fn prox_elastic_net(
    v: f64,
    cap_lambda: f64,
    pi_threshold: f64,
    lambda: f64,
) -> Result<f64, StateEvolutionError> {
    if !(cap_lambda > 0.0) {
        return Err(StateEvolutionError::InvalidArgument(format!(
            "curvature must be positive, got {cap_lambda}"
        )));
    }
    if !(pi_threshold >= 0.0) || !(lambda >= 0.0) {
        return Err(StateEvolutionError::InvalidArgument(
            "threshold and ridge strength must be nonnegative".into(),
        ));
    }
    Ok(v.signum() * (v.abs() - pi_threshold).max(0.0) / (cap_lambda + 2.0 * lambda))
}

/// d/dv of [`prox_elastic_net`] (exact away from the threshold set).
pub fn d_prox_elastic_net(v: f64, cap_lambda: f64, pi_threshold: f64, lambda: f64) -> f64 {
    if v.abs() > pi_threshold {
        1.0 / (cap_lambda + 2.0 * lambda)
    } else {
        0.0
    }
}

/// Latent-model problem instance at fixed aspect ratios.
#[derive(Debug, Clone, Copy)]
pub struct LatentModelConfig {
    /// samples per latent dimension, n/d
    pub alpha: f64,
    /// features per sample, p/n
    pub psi: f64,
    /// ridge strength
    pub lambda: f64,
    /// training attack radius (rescaled units)
    pub r: f64,
    /// dual exponent of the training attack geometry; only s* = 1
    /// (l-infinity training attacks) admits the closed-form prior
    pub s_dual: f64,
    pub loss: Loss,
    pub link: Link,
}

impl LatentModelConfig {
    pub fn new(alpha: f64, psi: f64, lambda: f64, r: f64, loss: Loss, link: Link) -> Self {
        LatentModelConfig {
            alpha,
            psi,
            lambda,
            r,
            s_dual: 1.0,
            loss,
            link,
        }
    }

    /// Construct from (alpha, gamma) with gamma = d/p, so psi = 1/(alpha gamma).
    pub fn from_alpha_gamma(
        alpha: f64,
        gamma: f64,
        lambda: f64,
        r: f64,
        loss: Loss,
        link: Link,
    ) -> Self {
        LatentModelConfig::new(alpha, 1.0 / (alpha * gamma), lambda, r, loss, link)
    }

    /// gamma = d/p = 1/(alpha psi)
    pub fn gamma(&self) -> f64 {
        1.0 / (self.alpha * self.psi)
    }

    pub fn validate(&self) -> Result<(), StateEvolutionError> {
        if !(self.alpha > 0.0) || !(self.psi > 0.0) {
            return Err(StateEvolutionError::InvalidConfig(format!(
                "aspect ratios must be positive (alpha {}, psi {})",
                self.alpha, self.psi
            )));
        }
        if !(self.lambda >= 0.0) || !(self.r >= 0.0) {
            return Err(StateEvolutionError::InvalidConfig(
                "lambda and r must be nonnegative".into(),
            ));
        }
        if (self.gamma() * self.alpha * self.psi - 1.0).abs() > 1e-12 {
            return Err(StateEvolutionError::InvalidConfig(
                "gamma alpha psi must equal 1".into(),
            ));
        }
        if self.s_dual != 1.0 {
            return Err(StateEvolutionError::InvalidConfig(format!(
                "only s* = 1 training geometry is supported, got {}",
                self.s_dual
            )));
        }
        if let Link::Probit { noise_var } = self.link {
            if !(noise_var >= 0.0) {
                return Err(StateEvolutionError::InvalidConfig(
                    "probit noise variance must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Order parameters of the fixed point: overlaps, conjugates and the
/// latent/feature decomposition q = q_l + q_f, plus solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct OverlapState {
    pub m: f64,
    pub q: f64,
    pub v: f64,
    pub p: f64,
    pub q_l: f64,
    pub q_f: f64,
    pub m_hat: f64,
    pub q_hat: f64,
    pub v_hat: f64,
    pub p_hat: f64,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

impl OverlapState {
    /// Interior default initialization.
    pub fn initial() -> Self {
        OverlapState {
            m: 0.1,
            q: 1.0,
            v: 1.0,
            p: 0.1,
            q_l: 0.5,
            q_f: 0.5,
            m_hat: 0.0,
            q_hat: 0.1,
            v_hat: 0.1,
            p_hat: 0.0,
            converged: false,
            residual: f64::INFINITY,
            iterations: 0,
        }
    }

    pub fn check_invariants(&self) -> Result<(), StateEvolutionError> {
        if self.q < self.m * self.m - 1e-9 {
            return Err(StateEvolutionError::InvalidArgument(format!(
                "q = {} < m^2 = {}",
                self.q,
                self.m * self.m
            )));
        }
        if !(self.v > 0.0) || !(self.p >= 0.0) || self.q_l < -1e-12 || self.q_f < -1e-12 {
            return Err(StateEvolutionError::InvalidArgument(
                "V must be positive and P, q_l, q_f nonnegative".into(),
            ));
        }
        if (self.q - self.q_l - self.q_f).abs() > 1e-8 * self.q.abs().max(1.0) {
            return Err(StateEvolutionError::InvalidArgument(format!(
                "q = {} != q_l + q_f = {}",
                self.q,
                self.q_l + self.q_f
            )));
        }
        Ok(())
    }

    /// Flat key-value view for CSV emission.
    pub fn to_record(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("m", self.m),
            ("q", self.q),
            ("v", self.v),
            ("p", self.p),
            ("q_l", self.q_l),
            ("q_f", self.q_f),
            ("m_hat", self.m_hat),
            ("q_hat", self.q_hat),
            ("v_hat", self.v_hat),
            ("p_hat", self.p_hat),
            ("residual", self.residual),
            ("iterations", self.iterations as f64),
        ]
    }
}

/// Damping, tolerance and iteration budget of the fixed-point loop.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// weight of the fresh update in (0, 1]
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub quad: QuadratureSpec,
    pub init: Option<(f64, f64, f64, f64)>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            damping: 0.7,
            tol: 1e-5,
            max_iter: 2000,
            // one node evaluation of the channel integrand carries ~1e-10 of
            // finite-difference noise, so the quadrature target sits above it
            quad: QuadratureSpec {
                abs_tol: 1e-9,
                rel_tol: 1e-9,
                cutoff: 8.0,
            },
            init: None,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), StateEvolutionError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(StateEvolutionError::InvalidConfig(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(StateEvolutionError::InvalidConfig(
                "tolerance must be positive and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConjugateUpdate {
    pub m_hat: f64,
    pub q_hat: f64,
    pub v_hat: f64,
    pub p_hat: f64,
}

/// f_loss = (prox of the shifted loss - omega) / V, the negative envelope
/// gradient that drives all four channel integrands.
fn f_loss(loss: Loss, y: f64, omega: f64, v: f64, shift: f64) -> Result<f64, StateEvolutionError> {
    let z = prox_shifted_loss(loss, y, omega, v, shift)?;
    Ok((z - omega) / v)
}

/// Channel half of the fixed point: Gaussian expectations over the joint
/// teacher/model field of the loss prox and its omega-derivative.
///
/// The four conjugates use distinct integrands: the score-weighted prox for
/// m_hat, its square for q_hat, its omega-derivative for V_hat, and the
/// label-weighted prox for P_hat with prefactor alpha gamma r s* P^{s*-1}.
pub fn channel_update(
    state: &OverlapState,
    cfg: &LatentModelConfig,
    quad: &QuadratureSpec,
) -> Result<ConjugateUpdate, StateEvolutionError> {
    cfg.validate()?;
    if !(state.v > 0.0) || !(state.q > 0.0) {
        return Err(StateEvolutionError::InvalidArgument(format!(
            "channel needs positive V and q (V {}, q {})",
            state.v, state.q
        )));
    }
    let gamma = cfg.gamma();
    let m = state.m;
    let q = state.q;
    let v = state.v;
    let p = state.p.max(0.0);
    let shift = cfg.r * p.powf(1.0 / cfg.s_dual);
    let cond_var = (1.0 - m * m / q).max(1e-14);
    let mut failure: Option<StateEvolutionError> = None;
    let integrals = gauss_expectation_multi(
        |xi, out| {
            out.fill(0.0);
            if failure.is_some() {
                return;
            }
            let omega0 = (m / q.sqrt()) * xi;
            let omega_f = q.sqrt() * xi;
            let h = 1e-6 * omega_f.abs().max(1.0);
            let mut acc = [0.0f64; 4];
            for &y in &[1.0, -1.0] {
                let fl = match f_loss(cfg.loss, y, omega_f, v, shift) {
                    Ok(val) => val,
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                };
                let hi = f_loss(cfg.loss, y, omega_f + h, v, shift);
                let lo = f_loss(cfg.loss, y, omega_f - h, v, shift);
                let dfl = match (hi, lo) {
                    (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
                    (Err(e), _) | (_, Err(e)) => {
                        failure = Some(e);
                        return;
                    }
                };
                let z0 = z0_channel(cfg.link, y, omega0, cond_var).unwrap_or(0.0);
                let dz0 = dz0_domega(cfg.link, y, omega0, cond_var).unwrap_or(0.0);
                acc[0] += dz0 * fl;
                acc[1] += z0 * fl * fl;
                acc[2] += z0 * dfl;
                acc[3] += y * z0 * fl;
            }
            out.copy_from_slice(&acc);
        },
        4,
        quad,
    )
    .map_err(|source| StateEvolutionError::Numerics {
        context: "channel update".into(),
        source,
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let p_prefactor = cfg.alpha * gamma * cfg.r * cfg.s_dual * p.powf(cfg.s_dual - 1.0);
    Ok(ConjugateUpdate {
        m_hat: cfg.alpha * gamma.sqrt() * integrals[0],
        q_hat: cfg.alpha * gamma * integrals[1],
        v_hat: -cfg.alpha * gamma * integrals[2],
        p_hat: p_prefactor * integrals[3],
    })
}

#[derive(Debug, Clone, Copy)]
pub struct OverlapUpdate {
    pub m: f64,
    pub q: f64,
    pub v: f64,
    pub p: f64,
    pub q_l: f64,
    pub q_f: f64,
}

/// Prior half of the fixed point: per-coordinate elastic-net statistics under
/// the teacher-tilted Gaussian field.
///
/// The teacher-coupled sector has effective field xi ~ N(0, 1 + b^2) with
/// b = m_hat / sqrt((1+gamma) q_hat) (b = m_hat / sqrt(2 q_hat) for
/// gamma > 1); the tilt is equivalent to xi = b w_star + zeta with
/// independent standard normal w_star, zeta, which is also how the overlap
/// with the teacher is read out.
pub fn prior_update(
    hats: &ConjugateUpdate,
    cfg: &LatentModelConfig,
    quad: &QuadratureSpec,
) -> Result<OverlapUpdate, StateEvolutionError> {
    cfg.validate()?;
    if !(hats.q_hat > 0.0) || !(hats.v_hat > 0.0) {
        return Err(StateEvolutionError::InvalidArgument(format!(
            "prior needs positive q_hat and V_hat (q_hat {}, v_hat {})",
            hats.q_hat, hats.v_hat
        )));
    }
    let gamma = cfg.gamma();
    let pi_thr = hats.p_hat.max(0.0) / 2.0;
    let lambda = cfg.lambda;
    let s_dual = cfg.s_dual;
    if gamma <= 1.0 {
        let b = hats.m_hat / ((1.0 + gamma) * hats.q_hat).sqrt();
        let amp = (1.0 + b * b).sqrt();
        let field = (hats.q_hat * (1.0 + 1.0 / gamma)).sqrt();
        let curvature = hats.v_hat * (1.0 + 1.0 / gamma);
        let teacher = gauss_expectation_multi(
            |u, out| {
                let xi = amp * u;
                let rho = field * xi;
                let f = prox_elastic_net(rho, curvature, pi_thr, lambda).unwrap_or(0.0);
                out[0] = (b * u / amp) * f; // E[w_star theta] through the tilt
                out[1] = f * f;
                out[2] = d_prox_elastic_net(rho, curvature, pi_thr, lambda);
                out[3] = f.abs().powf(s_dual);
            },
            4,
            quad,
        )
        .map_err(|source| StateEvolutionError::Numerics {
            context: "prior update (teacher sector)".into(),
            source,
        })?;
        let free_field = hats.q_hat.sqrt();
        let free = gauss_expectation_multi(
            |xi, out| {
                let rho = free_field * xi;
                let f = prox_elastic_net(rho, hats.v_hat, pi_thr, lambda).unwrap_or(0.0);
                out[0] = f * f;
                out[1] = d_prox_elastic_net(rho, hats.v_hat, pi_thr, lambda);
                out[2] = f.abs().powf(s_dual);
            },
            3,
            quad,
        )
        .map_err(|source| StateEvolutionError::Numerics {
            context: "prior update (free sector)".into(),
            source,
        })?;
        let q_l = teacher[1];
        let q_f = gamma * teacher[1] + (1.0 - gamma) * free[0];
        Ok(OverlapUpdate {
            m: teacher[0],
            q: q_l + q_f,
            v: (1.0 + gamma) * teacher[2] + (1.0 - gamma) * free[1],
            p: gamma * teacher[3] + (1.0 - gamma) * free[2],
            q_l,
            q_f,
        })
    } else {
        let b = hats.m_hat / (2.0 * hats.q_hat).sqrt();
        let amp = (1.0 + b * b).sqrt();
        let field = (2.0 * hats.q_hat).sqrt();
        let curvature = 2.0 * hats.v_hat;
        let teacher = gauss_expectation_multi(
            |u, out| {
                let xi = amp * u;
                let rho = field * xi;
                let f = prox_elastic_net(rho, curvature, pi_thr, lambda).unwrap_or(0.0);
                out[0] = (b * u / amp) * f;
                out[1] = f * f;
                out[2] = d_prox_elastic_net(rho, curvature, pi_thr, lambda);
                out[3] = f.abs().powf(s_dual);
            },
            4,
            quad,
        )
        .map_err(|source| StateEvolutionError::Numerics {
            context: "prior update (gamma > 1)".into(),
            source,
        })?;
        let q_half = teacher[1];
        Ok(OverlapUpdate {
            m: teacher[0] / gamma.sqrt(),
            q: 2.0 * q_half,
            v: 2.0 * teacher[2],
            p: teacher[3],
            q_l: q_half,
            q_f: q_half,
        })
    }
}

/// Damped fixed-point iteration of the channel and prior maps until the
/// largest absolute change across all order parameters drops below the
/// tolerance.
pub fn solve_fixed_point(
    cfg: &LatentModelConfig,
    settings: &SolverSettings,
) -> Result<OverlapState, StateEvolutionError> {
    cfg.validate()?;
    settings.validate()?;
    let mu = settings.damping;
    let mut state = OverlapState::initial();
    if let Some((m, q, v, p)) = settings.init {
        state.m = m;
        state.q = q;
        state.v = v;
        state.p = p;
    }
    // conjugates start from one raw channel pass
    let first = channel_update(&state, cfg, &settings.quad)?;
    state.m_hat = first.m_hat;
    state.q_hat = first.q_hat.max(1e-12);
    state.v_hat = first.v_hat.max(1e-12);
    state.p_hat = first.p_hat;
    let mut trace = Vec::with_capacity(64);
    for iter in 1..=settings.max_iter {
        let hats = channel_update(&state, cfg, &settings.quad)?;
        let m_hat = mu * hats.m_hat + (1.0 - mu) * state.m_hat;
        let q_hat = (mu * hats.q_hat + (1.0 - mu) * state.q_hat).max(1e-12);
        let v_hat = (mu * hats.v_hat + (1.0 - mu) * state.v_hat).max(1e-12);
        let p_hat = mu * hats.p_hat + (1.0 - mu) * state.p_hat;
        let mut residual = (m_hat - state.m_hat)
            .abs()
            .max((q_hat - state.q_hat).abs())
            .max((v_hat - state.v_hat).abs())
            .max((p_hat - state.p_hat).abs());
        state.m_hat = m_hat;
        state.q_hat = q_hat;
        state.v_hat = v_hat;
        state.p_hat = p_hat;

        let damped_hats = ConjugateUpdate {
            m_hat,
            q_hat,
            v_hat,
            p_hat,
        };
        let fresh = prior_update(&damped_hats, cfg, &settings.quad)?;
        let m = mu * fresh.m + (1.0 - mu) * state.m;
        let q = (mu * fresh.q + (1.0 - mu) * state.q).max(1e-12);
        let v = (mu * fresh.v + (1.0 - mu) * state.v).max(1e-12);
        let p = (mu * fresh.p + (1.0 - mu) * state.p).max(0.0);
        residual = residual
            .max((m - state.m).abs())
            .max((q - state.q).abs())
            .max((v - state.v).abs())
            .max((p - state.p).abs());
        state.m = m;
        state.q = q;
        state.v = v;
        state.p = p;
        // damp the readouts alongside q so q = q_l + q_f survives damping
        state.q_l = mu * fresh.q_l + (1.0 - mu) * state.q_l;
        state.q_f = mu * fresh.q_f + (1.0 - mu) * state.q_f;

        state.residual = residual;
        state.iterations = iter;
        trace.push(residual);
        if residual < settings.tol {
            state.converged = true;
            return Ok(state);
        }
    }
    Err(StateEvolutionError::NotConverged {
        state: Box::new(state),
        trace,
    })
}

/// Which hyperparameters the tuner may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tunables {
    Lambda,
    Radius,
    Both,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub lambda: f64,
    pub r: f64,
    pub value: f64,
    pub evaluations: usize,
    /// (lambda, r, objective) for every probed point, failures as +inf
    pub trace: Vec<(f64, f64, f64)>,
}

const LOG_LAMBDA_RANGE: (f64, f64) = (-6.0, 2.0);
const LOG_RADIUS_RANGE: (f64, f64) = (-3.0, 1.0);

/// Gradient-free hyperparameter search over log-parameterized (lambda, r).
///
/// The objective maps a converged state to a scalar, typically one of the
/// asymptotic error metrics; probe points whose inner solve fails are
/// penalized with +inf and recorded in the trace.
pub fn tune_hyperparameters<F>(
    cfg: &LatentModelConfig,
    settings: &SolverSettings,
    tunables: Tunables,
    objective: F,
) -> Result<TuneResult, StateEvolutionError>
where
    F: Fn(&OverlapState, &LatentModelConfig) -> Option<f64>,
{
    cfg.validate()?;
    let trace = std::cell::RefCell::new(Vec::new());
    let probe = |lambda: f64, r: f64| -> f64 {
        let mut c = *cfg;
        c.lambda = lambda;
        c.r = r;
        let value = match solve_fixed_point(&c, settings) {
            Ok(state) => objective(&state, &c).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        };
        trace.borrow_mut().push((lambda, r, value));
        value
    };
    let (lambda, r, value) = match tunables {
        Tunables::Lambda => {
            let res = minimize_in(
                |ll| probe(10f64.powf(ll), cfg.r),
                LOG_LAMBDA_RANGE.0,
                LOG_LAMBDA_RANGE.1,
                1e-4,
                120,
            );
            (10f64.powf(res.argmin), cfg.r, res.min)
        }
        Tunables::Radius => {
            let res = minimize_in(
                |lr| probe(cfg.lambda, 10f64.powf(lr)),
                LOG_RADIUS_RANGE.0,
                LOG_RADIUS_RANGE.1,
                1e-4,
                120,
            );
            // r = 0 (plain ERM) sits on the boundary of the log chart
            let at_zero = probe(cfg.lambda, 0.0);
            if at_zero <= res.min {
                (cfg.lambda, 0.0, at_zero)
            } else {
                (cfg.lambda, 10f64.powf(res.argmin), res.min)
            }
        }
        Tunables::Both => {
            let start = [
                cfg.lambda
                    .max(1e-6)
                    .log10()
                    .clamp(LOG_LAMBDA_RANGE.0, LOG_LAMBDA_RANGE.1),
                cfg.r
                    .max(1e-2)
                    .log10()
                    .clamp(LOG_RADIUS_RANGE.0, LOG_RADIUS_RANGE.1),
            ];
            let (x, v, _) = nelder_mead(
                |x| probe(10f64.powf(x[0]), 10f64.powf(x[1])),
                &start,
                0.5,
                1e-4,
                200,
            );
            // compare against the r = 0 slice
            let res0 = minimize_in(
                |ll| probe(10f64.powf(ll), 0.0),
                LOG_LAMBDA_RANGE.0,
                LOG_LAMBDA_RANGE.1,
                1e-4,
                80,
            );
            if res0.min <= v {
                (10f64.powf(res0.argmin), 0.0, res0.min)
            } else {
                (10f64.powf(x[0]), 10f64.powf(x[1]), v)
            }
        }
    };
    let trace = trace.into_inner();
    if !value.is_finite() {
        return Err(StateEvolutionError::InvalidConfig(
            "no tunable point produced a converged solve".into(),
        ));
    }
    Ok(TuneResult {
        lambda,
        r,
        value,
        evaluations: trace.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::special::gauss_expectation;

    fn quad() -> QuadratureSpec {
        SolverSettings::default().quad
    }

    #[test]
    fn z0_examples_and_normalization() {
        for &link in &[Link::Sign, Link::Probit { noise_var: 0.3 }] {
            assert!((z0_channel(link, 1.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
            assert!((z0_channel(link, -1.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
            for &omega in &[-1.3, 0.4, 2.2] {
                let sum = z0_channel(link, 1.0, omega, 0.7).unwrap()
                    + z0_channel(link, -1.0, omega, 0.7).unwrap();
                assert!((sum - 1.0).abs() < 1e-14);
            }
        }
        assert!(
            (z0_channel(Link::Sign, 1.0, 2.0, 1.0).unwrap() - 0.9772498680518208).abs() < 1e-12
        );
        assert!(z0_channel(Link::Sign, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn z0_derivative_matches_finite_differences() {
        let mut rng = Stream::new(41, &[0]);
        for _ in 0..20 {
            let omega = rng.uniform_in(-3.0, 3.0);
            let v = rng.uniform_in(0.2, 2.0);
            let y = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            let link = if rng.uniform() < 0.5 {
                Link::Sign
            } else {
                Link::Probit { noise_var: 0.4 }
            };
            let h = 1e-6;
            let fd = (z0_channel(link, y, omega + h, v).unwrap()
                - z0_channel(link, y, omega - h, v).unwrap())
                / (2.0 * h);
            let an = dz0_domega(link, y, omega, v).unwrap();
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "fd {fd} an {an}");
        }
    }

    #[test]
    fn prox_collapses_to_identity_at_small_v() {
        for &loss in &[Loss::Logistic, Loss::Hinge] {
            let z = prox_shifted_loss(loss, 1.0, 0.37, 1e-12, 0.2).unwrap();
            assert!((z - 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn hinge_prox_regions() {
        // inactive region: margin beyond the kink, loss locally zero
        let z = prox_shifted_loss(Loss::Hinge, 1.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(z, 2.0);
        let z = prox_shifted_loss(Loss::Hinge, 1.0, -1.0, 0.5, 0.0).unwrap();
        assert_eq!(z, -0.5);
        let z = prox_shifted_loss(Loss::Hinge, 1.0, 0.8, 1.0, 0.0).unwrap();
        assert_eq!(z, 1.0);
        // shift moves the kink
        let z = prox_shifted_loss(Loss::Hinge, 1.0, 1.2, 1.0, 0.5).unwrap();
        assert_eq!(z, 1.5);
    }

    #[test]
    fn logistic_prox_matches_grid_minimization() {
        let cases = [
            (1.0, 0.0, 1.0, 0.3),
            (1.0, 1.5, 0.7, 0.0),
            (-1.0, -0.4, 1.3, 0.6),
            (-1.0, 2.0, 0.2, 0.1),
        ];
        for &(y, omega, v, shift) in &cases {
            let z = prox_shifted_loss(Loss::Logistic, y, omega, v, shift).unwrap();
            let obj = |t: f64| {
                Loss::Logistic.value(y * t - shift) + (t - omega) * (t - omega) / (2.0 * v)
            };
            let mut best = (f64::INFINITY, 0.0);
            let mut t = omega - v - 1.0;
            while t <= omega + v + 1.0 {
                let o = obj(t);
                if o < best.0 {
                    best = (o, t);
                }
                t += 1e-5;
            }
            assert!(
                (z - best.1).abs() < 1e-4,
                "prox {z} grid {} at (y {y}, omega {omega})",
                best.1
            );
            assert!(obj(z) <= best.0 + 1e-10);
        }
    }

    #[test]
    fn prox_maps_are_nonexpansive() {
        let mut rng = Stream::new(42, &[0]);
        for _ in 0..1000 {
            let v = rng.uniform_in(0.05, 3.0);
            let shift = rng.uniform_in(0.0, 1.0);
            let o1 = rng.uniform_in(-4.0, 4.0);
            let o2 = rng.uniform_in(-4.0, 4.0);
            let y = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            for &loss in &[Loss::Logistic, Loss::Hinge] {
                let z1 = prox_shifted_loss(loss, y, o1, v, shift).unwrap();
                let z2 = prox_shifted_loss(loss, y, o2, v, shift).unwrap();
                assert!(
                    (z1 - z2).abs() <= (o1 - o2).abs() + 1e-10,
                    "{loss:?}: |{z1} - {z2}| > |{o1} - {o2}|"
                );
            }
            let lam = rng.uniform_in(0.0, 1.0);
            let pi = rng.uniform_in(0.0, 1.0);
            let cap = rng.uniform_in(0.1, 2.0);
            let p1 = prox_elastic_net(o1, cap, pi, lam).unwrap();
            let p2 = prox_elastic_net(o2, cap, pi, lam).unwrap();
            assert!((p1 - p2).abs() <= (o1 - o2).abs() / cap + 1e-12);
        }
    }

    #[test]
    fn elastic_net_examples() {
        // no penalty: plain rescaling
        assert!((prox_elastic_net(1.7, 2.0, 0.0, 0.0).unwrap() - 0.85).abs() < 1e-15);
        // dead zone
        assert_eq!(prox_elastic_net(0.4, 1.0, 0.5, 0.3).unwrap(), 0.0);
        // worked value, cross-checked by direct minimization
        let got = prox_elastic_net(2.0, 1.0, 0.5, 0.25).unwrap();
        assert!((got - 1.0).abs() < 1e-15);
        let obj = |z: f64| 0.25 * z * z + 0.5 * z.abs() + 0.5 * z * z - 2.0 * z;
        let mut best = (f64::INFINITY, 0.0);
        let mut z = -3.0;
        while z <= 3.0 {
            if obj(z) < best.0 {
                best = (obj(z), z);
            }
            z += 1e-6;
        }
        assert!((got - best.1).abs() < 1e-5);
        assert!(prox_elastic_net(1.0, 0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn finite_difference_derivatives_richardson_consistent() {
        let mut rng = Stream::new(43, &[0]);
        for _ in 0..30 {
            let y = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            let omega = rng.uniform_in(-2.0, 2.0);
            let v = rng.uniform_in(0.3, 1.5);
            let shift = rng.uniform_in(0.0, 0.5);
            let fd = |h: f64| {
                (f_loss(Loss::Logistic, y, omega + h, v, shift).unwrap()
                    - f_loss(Loss::Logistic, y, omega - h, v, shift).unwrap())
                    / (2.0 * h)
            };
            let d5 = fd(1e-5);
            let d6 = fd(1e-6);
            assert!(
                (d5 - d6).abs() <= 0.05 * d6.abs().max(1e-8),
                "fd(1e-5) = {d5}, fd(1e-6) = {d6}"
            );
        }
    }

    #[test]
    fn channel_symmetry_and_sign_structure() {
        let cfg =
            LatentModelConfig::from_alpha_gamma(1.0, 0.5, 1e-3, 0.0, Loss::Logistic, Link::Sign);
        let mut state = OverlapState::initial();
        state.m = 0.3;
        state.q = 1.0;
        state.v = 0.5;
        state.p = 0.2;
        let hats = channel_update(&state, &cfg, &quad()).unwrap();
        assert!(
            hats.m_hat > 0.0,
            "m_hat agrees in sign with m on the m >= 0 branch"
        );
        assert!(hats.q_hat > 0.0);
        assert!(hats.v_hat > 0.0, "prox is nonexpansive so -d_omega f >= 0");
        assert_eq!(hats.p_hat, 0.0, "no training radius, no P_hat");
        // the m_hat integrand is pointwise even in m (the score of the sign
        // channel depends on |omega| only), so the iteration lives on the
        // nonnegative-m branch
        state.m = -0.3;
        let flipped = channel_update(&state, &cfg, &quad()).unwrap();
        assert!((flipped.m_hat - hats.m_hat).abs() < 1e-6);
        assert!(flipped.m_hat > 0.0);
    }

    #[test]
    fn channel_matches_monte_carlo_oracle() {
        let cfg =
            LatentModelConfig::from_alpha_gamma(1.0, 0.5, 1e-3, 0.1, Loss::Logistic, Link::Sign);
        let mut state = OverlapState::initial();
        state.m = 0.3;
        state.q = 1.0;
        state.v = 0.5;
        state.p = 0.2;
        let hats = channel_update(&state, &cfg, &quad()).unwrap();
        // Monte Carlo estimate of the same expectations
        let n = 2_000_000usize;
        let mut rng = Stream::new(44, &[7]);
        let mut acc = [0.0f64; 4];
        let mut acc2 = [0.0f64; 4];
        let shift = cfg.r * state.p;
        let cond_var = 1.0 - state.m * state.m / state.q;
        for _ in 0..n {
            let xi = rng.standard_normal();
            let omega0 = (state.m / state.q.sqrt()) * xi;
            let omega_f = state.q.sqrt() * xi;
            let h = 1e-6 * omega_f.abs().max(1.0);
            let mut term = [0.0f64; 4];
            for &y in &[1.0, -1.0] {
                let fl = f_loss(cfg.loss, y, omega_f, state.v, shift).unwrap();
                let dfl = (f_loss(cfg.loss, y, omega_f + h, state.v, shift).unwrap()
                    - f_loss(cfg.loss, y, omega_f - h, state.v, shift).unwrap())
                    / (2.0 * h);
                let z0 = z0_channel(cfg.link, y, omega0, cond_var).unwrap();
                let dz0 = dz0_domega(cfg.link, y, omega0, cond_var).unwrap();
                term[0] += dz0 * fl;
                term[1] += z0 * fl * fl;
                term[2] += z0 * dfl;
                term[3] += y * z0 * fl;
            }
            for i in 0..4 {
                acc[i] += term[i];
                acc2[i] += term[i] * term[i];
            }
        }
        let gamma = cfg.gamma();
        let scale = [
            cfg.alpha * gamma.sqrt(),
            cfg.alpha * gamma,
            -cfg.alpha * gamma,
            cfg.alpha * gamma * cfg.r,
        ];
        let got = [hats.m_hat, hats.q_hat, hats.v_hat, hats.p_hat];
        for i in 0..4 {
            let mean = acc[i] / n as f64;
            let var = (acc2[i] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            let mc = scale[i] * mean;
            let tol = 3.0 * scale[i].abs() * se + 1e-9;
            assert!(
                (got[i] - mc).abs() < tol,
                "component {i}: quadrature {} vs mc {mc} (tol {tol})",
                got[i]
            );
        }
    }

    #[test]
    fn prior_parity_and_sum_rule() {
        let cfg =
            LatentModelConfig::from_alpha_gamma(1.0, 0.5, 1e-2, 0.0, Loss::Logistic, Link::Sign);
        // m_hat = 0 forces m = 0 by parity
        let hats = ConjugateUpdate {
            m_hat: 0.0,
            q_hat: 0.8,
            v_hat: 0.6,
            p_hat: 0.3,
        };
        let up = prior_update(&hats, &cfg, &quad()).unwrap();
        assert!(up.m.abs() < 1e-12);
        assert!((up.q - up.q_l - up.q_f).abs() < 1e-10);
        // random hats keep the sum rule
        let mut rng = Stream::new(45, &[0]);
        for trial in 0..10u64 {
            let hats = ConjugateUpdate {
                m_hat: rng.uniform_in(-1.0, 1.0),
                q_hat: rng.uniform_in(0.1, 2.0),
                v_hat: rng.uniform_in(0.1, 2.0),
                p_hat: rng.uniform_in(0.0, 1.0),
            };
            let gamma = [0.3, 0.7, 1.0, 1.5, 4.0][trial as usize % 5];
            let c = LatentModelConfig::from_alpha_gamma(
                1.0,
                gamma,
                1e-2,
                0.0,
                Loss::Logistic,
                Link::Sign,
            );
            let up = prior_update(&hats, &c, &quad()).unwrap();
            assert!(
                (up.q - up.q_l - up.q_f).abs() < 1e-8 * up.q.max(1.0),
                "gamma {gamma}"
            );
        }
    }

    #[test]
    fn prior_ridge_closed_form_gamma_big() {
        // P_hat = 0, lambda > 0, gamma > 1: the per-coordinate map is linear,
        // so every moment has a closed form in the tilted Gaussian field
        let gamma = 2.0f64;
        let lambda = 0.3f64;
        let cfg = LatentModelConfig::from_alpha_gamma(
            1.0,
            gamma,
            lambda,
            0.0,
            Loss::Logistic,
            Link::Sign,
        );
        let hats = ConjugateUpdate {
            m_hat: 0.7,
            q_hat: 0.9,
            v_hat: 0.5,
            p_hat: 0.0,
        };
        let up = prior_update(&hats, &cfg, &quad()).unwrap();
        let c = 1.0 / (2.0 * hats.v_hat + 2.0 * lambda);
        let b = hats.m_hat / (2.0 * hats.q_hat).sqrt();
        let amp2 = 1.0 + b * b;
        // theta = c sqrt(2 q_hat) xi with xi = b w + zeta
        let e_theta_w = c * (2.0 * hats.q_hat).sqrt() * b;
        let e_theta2 = c * c * 2.0 * hats.q_hat * amp2;
        assert!((up.m - e_theta_w / gamma.sqrt()).abs() < 1e-9);
        assert!((up.q - 2.0 * e_theta2).abs() < 1e-9);
        assert!((up.v - 2.0 * c).abs() < 1e-9);
        // P readout is E|theta| for s* = 1
        let e_abs = e_theta2.sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        assert!((up.p - e_abs).abs() < 1e-9);
    }

    #[test]
    fn prior_branches_agree_at_gamma_one() {
        let mut rng = Stream::new(46, &[0]);
        for _ in 0..5 {
            let hats = ConjugateUpdate {
                m_hat: rng.uniform_in(-1.0, 1.0),
                q_hat: rng.uniform_in(0.2, 2.0),
                v_hat: rng.uniform_in(0.2, 2.0),
                p_hat: rng.uniform_in(0.0, 0.8),
            };
            let lambda = rng.uniform_in(1e-3, 0.5);
            // gamma = 1 approached from both sides of the branch point
            let lo = LatentModelConfig::from_alpha_gamma(
                1.0,
                1.0,
                lambda,
                0.0,
                Loss::Logistic,
                Link::Sign,
            );
            let hi = LatentModelConfig {
                psi: lo.psi * (1.0 - 1e-14),
                ..lo
            };
            assert!(hi.gamma() > 1.0);
            let a = prior_update(&hats, &lo, &quad()).unwrap();
            let b = prior_update(&hats, &hi, &quad()).unwrap();
            for (x, y) in [
                (a.m, b.m),
                (a.q, b.q),
                (a.v, b.v),
                (a.p, b.p),
                (a.q_l, b.q_l),
                (a.q_f, b.q_f),
            ] {
                assert!((x - y).abs() < 1e-8, "branch mismatch: {x} vs {y}");
            }
        }
    }

    #[test]
    fn solver_converges_and_residual_is_fixed_point() {
        let cfg =
            LatentModelConfig::from_alpha_gamma(1.0, 0.5, 1e-3, 0.0, Loss::Logistic, Link::Sign);
        let settings = SolverSettings::default();
        let state = solve_fixed_point(&cfg, &settings).unwrap();
        assert!(state.converged);
        assert!(state.residual < settings.tol);
        state.check_invariants().unwrap();
        assert!(state.q >= state.m * state.m);
        // re-applying one full update moves nothing by more than 10x tol
        let hats = channel_update(&state, &cfg, &settings.quad).unwrap();
        let up = prior_update(&hats, &cfg, &settings.quad).unwrap();
        for (new, old) in [
            (hats.m_hat, state.m_hat),
            (hats.q_hat, state.q_hat),
            (hats.v_hat, state.v_hat),
            (hats.p_hat, state.p_hat),
            (up.m, state.m),
            (up.q, state.q),
            (up.v, state.v),
            (up.p, state.p),
        ] {
            assert!(
                (new - old).abs() <= 10.0 * settings.tol,
                "fixed-point residual too large: {new} vs {old}"
            );
        }
    }

    #[test]
    fn solver_damping_independence() {
        let cfg =
            LatentModelConfig::from_alpha_gamma(1.5, 0.8, 1e-2, 0.1, Loss::Logistic, Link::Sign);
        let s1 = SolverSettings {
            damping: 0.3,
            ..SolverSettings::default()
        };
        let s2 = SolverSettings {
            damping: 0.7,
            ..SolverSettings::default()
        };
        let a = solve_fixed_point(&cfg, &s1).unwrap();
        let b = solve_fixed_point(&cfg, &s2).unwrap();
        for (x, y) in [
            (a.m, b.m),
            (a.q, b.q),
            (a.v, b.v),
            (a.p, b.p),
            (a.m_hat, b.m_hat),
            (a.q_hat, b.q_hat),
            (a.v_hat, b.v_hat),
            (a.p_hat, b.p_hat),
        ] {
            assert!((x - y).abs() < 1e-4, "damping dependence: {x} vs {y}");
        }
    }

    #[test]
    fn heavy_regularization_shrinks_overlaps_monotonically() {
        let mut prev_m = f64::INFINITY;
        let mut prev_q = f64::INFINITY;
        for &lambda in &[1.0, 10.0, 100.0, 1000.0] {
            let cfg = LatentModelConfig::from_alpha_gamma(
                1.0,
                0.5,
                lambda,
                0.0,
                Loss::Logistic,
                Link::Sign,
            );
            let state = solve_fixed_point(&cfg, &SolverSettings::default()).unwrap();
            assert!(state.m < prev_m + 1e-9);
            assert!(state.q < prev_q + 1e-9);
            prev_m = state.m;
            prev_q = state.q;
        }
        assert!(prev_m < 1e-2);
        assert!(prev_q < 1e-2);
    }

    #[test]
    fn hinge_loss_solves_too() {
        let cfg =
            LatentModelConfig::from_alpha_gamma(1.0, 1.0, 1e-2, 0.05, Loss::Hinge, Link::Sign);
        let state = solve_fixed_point(&cfg, &SolverSettings::default()).unwrap();
        assert!(state.converged);
        assert!(state.m > 0.0);
        assert!(state.p_hat >= 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg =
            LatentModelConfig::from_alpha_gamma(1.0, 0.5, 1e-3, 0.0, Loss::Logistic, Link::Sign);
        assert!(cfg.validate().is_ok());
        assert!((cfg.gamma() * cfg.alpha * cfg.psi - 1.0).abs() < 1e-12);
        cfg.s_dual = 2.0;
        assert!(cfg.validate().is_err());
        cfg.s_dual = 1.0;
        cfg.lambda = -1.0;
        assert!(cfg.validate().is_err());
        let bad = LatentModelConfig::new(-1.0, 1.0, 0.1, 0.0, Loss::Logistic, Link::Sign);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn expectation_of_tilt_is_normalized() {
        // E_xi[Z_w(b xi, b^2)] = 1: the tilted sector is a probability law;
        // the cutoff scales with the widened effective std sqrt(1 + b^2)
        for &b in &[0.0f64, 0.4, 1.3] {
            let spec = QuadratureSpec {
                cutoff: 8.0 * (1.0 + b * b).sqrt(),
                ..QuadratureSpec::default()
            };
            let z = gauss_expectation(
                |xi| (b * b * xi * xi / (2.0 * (b * b + 1.0))).exp() / (b * b + 1.0).sqrt(),
                &spec,
            )
            .unwrap();
            assert!((z - 1.0).abs() < 1e-9, "b {b}: {z}");
        }
    }
}
