//! Consistent adversarial attacks on high-dimensional linear classifiers.
//!
//! The crate has three layers:
//!
//! * exact dual-norm attack geometry at finite dimension ([`geometry`]),
//! * high-dimensional limits: closed-form error metrics ([`metrics`]) and the
//!   state-evolution solver for robust ERM in a latent-variable data model
//!   ([`state_evolution`]),
//! * a finite-dimensional simulator that trains robust ERM predictors and
//!   measures the same metrics empirically ([`simulation`]).
//!
//! [`special`] holds the shared numeric kernels and [`rng`] the counter-based
//! random streams that make every experiment reproducible from one seed.

pub mod geometry;
pub mod metrics;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod state_evolution;

pub(crate) mod vecops {
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm2(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    /// a += s * b
    pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
        debug_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter_mut().zip(b) {
            *x += s * y;
        }
    }
}
