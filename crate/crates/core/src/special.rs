//! Shared numerical kernels: normal CDF, gamma function, adaptive quadrature,
//! bracketing root finder and derivative-free scalar minimization.
//!
//! Everything here is pure and carries no shared state, so the kernels can be
//! called concurrently from sweep workers.

use std::fmt;

/// Tolerances for the adaptive Gauss-Kronrod integrator.
///
/// Gaussian expectations truncate the real line at `cutoff` standard
/// deviations; the default 8 leaves tail mass below 1e-15.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub cutoff: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            cutoff: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), SpecialError> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(SpecialError::InvalidSpec(
                "quadrature tolerances must be > 0",
            ));
        }
        if !(self.cutoff >= 6.0) {
            return Err(SpecialError::InvalidSpec("quadrature cutoff must be >= 6"));
        }
        Ok(())
    }
}

/// Controls for the bracketing root finder.
#[derive(Debug, Clone, Copy)]
pub struct RootFindSpec {
    /// Multiplicative bracket growth used when the initial interval does not
    /// straddle a sign change.
    pub expansion: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootFindSpec {
    fn default() -> Self {
        RootFindSpec {
            expansion: 1.6,
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl RootFindSpec {
    pub fn validate(&self) -> Result<(), SpecialError> {
        if !(self.tol > 0.0) {
            return Err(SpecialError::InvalidSpec("root tolerance must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(SpecialError::InvalidSpec("max iterations must be >= 1"));
        }
        if !(self.expansion > 1.0) {
            return Err(SpecialError::InvalidSpec("bracket expansion must be > 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum SpecialError {
    InvalidSpec(&'static str),
    /// Integration budget exhausted; carries the partial estimate and the
    /// error bound it reached.
    QuadratureBudget {
        estimate: f64,
        error: f64,
    },
    /// No sign change found after expanding the bracket.
    NoBracket {
        lo: f64,
        hi: f64,
    },
    RootIterations {
        best: f64,
        residual: f64,
    },
}

impl fmt::Display for SpecialError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecialError::InvalidSpec(msg) => write!(f, "invalid spec: {msg}"),
            SpecialError::QuadratureBudget { estimate, error } => write!(
                f,
                "quadrature budget exhausted (estimate {estimate:.6e}, error bound {error:.3e})"
            ),
            SpecialError::NoBracket { lo, hi } => {
                write!(
                    f,
                    "no sign change in bracket [{lo:.6e}, {hi:.6e}] after expansion"
                )
            }
            SpecialError::RootIterations { best, residual } => write!(
                f,
                "root finder hit the iteration budget (best {best:.6e}, residual {residual:.3e})"
            ),
        }
    }
}

impl std::error::Error for SpecialError {}

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, accurate in both tails.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * INV_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Single Gauss-Kronrod panel; returns (kronrod, |kronrod - gauss| * h).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

const MAX_PANELS: usize = 2048;

/// Adaptive integral of `f` over [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64, SpecialError> {
    spec.validate()?;
    if a == b {
        return Ok(0.0);
    }
    // (neg error, a, b, value) kept sorted by error via linear scan; panel
    // counts stay small for the smooth integrands used here.
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&mut f, a, b);
    panels.push((e, a, b, v));
    loop {
        let total: f64 = panels.iter().map(|p| p.3).sum();
        let err: f64 = panels.iter().map(|p| p.0).sum();
        if err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(SpecialError::QuadratureBudget {
                estimate: total,
                error: err,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .map(|(i, _)| i)
            .unwrap();
        let (_, pa, pb, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        panels.push((e1, pa, mid, v1));
        panels.push((e2, mid, pb, v2));
    }
}

/// Adaptive integral of a vector-valued integrand over [a, b]; all components
/// share panels, so expensive common work inside `f` is evaluated once per
/// node. The error control is per component.
pub fn integrate_multi<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    k: usize,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, SpecialError> {
    spec.validate()?;
    if a == b || k == 0 {
        return Ok(vec![0.0; k]);
    }
    struct Panel {
        a: f64,
        b: f64,
        values: Vec<f64>,
        errors: Vec<f64>,
        worst: f64,
    }
    let mut scratch = vec![0.0; k];
    let eval = |f: &mut F, a: f64, b: f64, scratch: &mut Vec<f64>| -> Panel {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut kron = vec![0.0; k];
        let mut gauss = vec![0.0; k];
        f(c, scratch);
        for i in 0..k {
            kron[i] += scratch[i] * WGK[7];
            gauss[i] += scratch[i] * WG[3];
        }
        for j in 0..7 {
            let x = h * XGK[j];
            for &node in &[c - x, c + x] {
                f(node, scratch);
                for i in 0..k {
                    kron[i] += scratch[i] * WGK[j];
                    if j % 2 == 1 {
                        gauss[i] += scratch[i] * WG[j / 2];
                    }
                }
            }
        }
        let mut errors = vec![0.0; k];
        let mut worst = 0.0f64;
        for i in 0..k {
            kron[i] *= h;
            errors[i] = (kron[i] - gauss[i] * h).abs();
            worst = worst.max(errors[i]);
        }
        Panel {
            a,
            b,
            values: kron,
            errors,
            worst,
        }
    };
    let mut panels = vec![eval(&mut f, a, b, &mut scratch)];
    loop {
        let mut total = vec![0.0; k];
        let mut err = vec![0.0; k];
        for p in &panels {
            for i in 0..k {
                total[i] += p.values[i];
                err[i] += p.errors[i];
            }
        }
        let ok = (0..k).all(|i| err[i] <= spec.abs_tol.max(spec.rel_tol * total[i].abs()));
        if ok {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(SpecialError::QuadratureBudget {
                estimate: total[0],
                error: err.iter().fold(0.0f64, |m, &e| m.max(e)),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.worst.total_cmp(&y.1.worst))
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(eval(&mut f, p.a, mid, &mut scratch));
        panels.push(eval(&mut f, mid, p.b, &mut scratch));
    }
}

/// Expectation of `f` under the standard normal law, truncated at
/// `spec.cutoff` standard deviations.
pub fn gauss_expectation<F: FnMut(f64) -> f64>(
    mut f: F,
    spec: &QuadratureSpec,
) -> Result<f64, SpecialError> {
    integrate(
        |x| f(x) * std_normal_pdf(x),
        -spec.cutoff,
        spec.cutoff,
        spec,
    )
}

/// Vector-valued Gaussian expectation sharing nodes across components.
pub fn gauss_expectation_multi<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    k: usize,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, SpecialError> {
    integrate_multi(
        |x, out| {
            f(x, out);
            let w = std_normal_pdf(x);
            for v in out.iter_mut() {
                *v *= w;
            }
        },
        k,
        -spec.cutoff,
        spec.cutoff,
        spec,
    )
}

/// Brent root bracketing: expands the interval geometrically until the sign
/// changes, then hands off to `brent_root`.
pub fn find_root<F: FnMut(f64) -> f64>(
    mut g: F,
    bracket: (f64, f64),
    spec: &RootFindSpec,
) -> Result<f64, SpecialError> {
    spec.validate()?;
    let (mut a, mut b) = bracket;
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut fa = g(a);
    let mut fb = g(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut tries = 0usize;
    while fa * fb > 0.0 {
        if tries >= 60 {
            return Err(SpecialError::NoBracket { lo: a, hi: b });
        }
        let width = (b - a).max(f64::EPSILON);
        if fa.abs() < fb.abs() {
            a -= spec.expansion * width;
            fa = g(a);
        } else {
            b += spec.expansion * width;
            fb = g(b);
        }
        tries += 1;
    }
    brent_root(&mut g, a, b, fa, fb, spec)
}

fn brent_root<F: FnMut(f64) -> f64>(
    g: &mut F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    spec: &RootFindSpec,
) -> Result<f64, SpecialError> {
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..spec.max_iter {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * spec.tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(SpecialError::RootIterations {
        best: b,
        residual: fb,
    })
}

/// Result of a scalar minimization; `converged == false` flags a best-effort
/// iterate returned after the iteration budget.
#[derive(Debug, Clone, Copy)]
pub struct MinResult {
    pub argmin: f64,
    pub min: f64,
    pub converged: bool,
}

/// Golden-section minimizer with parabolic acceleration on [a, b].
///
/// Handles non-smooth objectives (kinks from absolute values) since the
/// parabolic step is only accepted when it behaves.
pub fn minimize_in<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> MinResult {
    const GOLD: f64 = 0.381_966_011_250_105_2; // 2 - golden ratio
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut x = a + GOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d = 0.0f64;
    let mut e = 0.0f64;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return MinResult {
                argmin: x,
                min: fx,
                converged: true,
            };
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_old = e;
            e = d;
            if p.abs() < (0.5 * q * e_old).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if (u - a) < tol2 || (b - u) < tol2 {
                    d = tol1.copysign(m - x);
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    MinResult {
        argmin: x,
        min: fx,
        converged: false,
    }
}

/// Derivative-free minimization of a unimodal function starting from a hint.
///
/// Brackets the minimum by geometric expansion around the hint, then refines
/// with [`minimize_in`] at tolerance 1e-10.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, hint: f64) -> MinResult {
    let step0 = 1.0f64.max(hint.abs() * 0.1);
    let mut lo = hint - step0;
    let mut hi = hint + step0;
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut fmid = f(hint);
    let mut mid;
    let mut grow = step0;
    for _ in 0..80 {
        if fmid <= flo && fmid <= fhi {
            break;
        }
        grow *= 1.9;
        if flo < fhi {
            mid = lo;
            fmid = flo;
            hi = mid + grow * 0.5;
            fhi = f(hi);
            lo = mid - grow;
            flo = f(lo);
        } else {
            mid = hi;
            fmid = fhi;
            lo = mid - grow * 0.5;
            flo = f(lo);
            hi = mid + grow;
            fhi = f(hi);
        }
    }
    let bracketed = fmid <= flo && fmid <= fhi;
    let res = minimize_in(&mut f, lo, hi, 1e-10, 400);
    MinResult {
        converged: res.converged && bracketed,
        ..res
    }
}

/// Nelder-Mead simplex minimization in low dimension.
///
/// Returns (argmin, min, evaluations). Infinite objective values are allowed
/// and act as rejections, so callers can penalize failed inner solves.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut evals = 0usize;
    let eval = |f: &mut F, x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&mut f, x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&mut f, &x, &mut evals);
        simplex.push((x, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if (worst - best).abs() <= tol * (1.0 + best.abs()) && spread <= tol.max(1e-12) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let dir: Vec<f64> = (0..n).map(|j| centroid[j] - simplex[n].0[j]).collect();
        let at = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * dir[j]).collect() };
        let xr = at(1.0);
        let fr = eval(&mut f, &xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = at(2.0);
            let fe = eval(&mut f, &xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = at(0.5);
                let v = eval(&mut f, &x, &mut evals);
                (x, v)
            } else {
                let x = at(-0.5);
                let v = eval(&mut f, &x, &mut evals);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best_x = simplex[0].0.clone();
                for k in 1..=n {
                    let x: Vec<f64> = simplex[k]
                        .0
                        .iter()
                        .zip(&best_x)
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    let v = eval(&mut f, &x, &mut evals);
                    simplex[k] = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0.clone(), simplex[0].1, evals)
}
