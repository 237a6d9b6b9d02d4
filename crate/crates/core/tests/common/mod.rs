//! Shared helpers for the integration suites: summary statistics and the
//! projected-ascent oracle used to certify the dual-norm reductions.
//!
//! Each integration target compiles its own copy, so helpers unused by one
//! target are expected.
#![allow(dead_code)]

use advlim::geometry::lq_norm;
use advlim::rng::Stream;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn sem(v: &[f64]) -> f64 {
    std_dev(v) / (v.len() as f64).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximize <w, delta> over { ||delta||_q <= eps, <w_star, delta> = 0 }.
///
/// Primal route, independent of the library's dual-norm reduction: projected
/// gradient ascent (hyperplane projection plus radial rescale onto the ball
/// boundary, which preserves the hyperplane) seeds a derivative-free polish
/// of the ray-normalized objective in hyperplane coordinates.
pub fn ascent_max_inner_product(w: &[f64], w_star: &[f64], q_att: f64, eps: f64, seed: u64) -> f64 {
    let d = w.len();
    let ws_norm2 = dot(w_star, w_star);
    let project = |v: &mut Vec<f64>| {
        let c = dot(v, w_star) / ws_norm2;
        for (vj, wsj) in v.iter_mut().zip(w_star) {
            *vj -= c * wsj;
        }
    };
    // orthonormal basis of the hyperplane by Gram-Schmidt over the standard
    // basis against w_star
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        project(&mut e);
        for b in &basis {
            let c = dot(&e, b);
            for (ej, bj) in e.iter_mut().zip(b) {
                *ej -= c * bj;
            }
        }
        let n = dot(&e, &e).sqrt();
        if n > 1e-9 {
            for ej in e.iter_mut() {
                *ej /= n;
            }
            basis.push(e);
            if basis.len() == d - 1 {
                break;
            }
        }
    }
    let expand = |c: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; d];
        for (ck, b) in c.iter().zip(&basis) {
            for (vj, bj) in v.iter_mut().zip(b) {
                *vj += ck * bj;
            }
        }
        v
    };
    // ray-normalized objective: value of the boundary point along c
    let value_of = |c: &[f64]| -> f64 {
        let v = expand(c);
        let nrm = lq_norm(&v, q_att);
        if nrm == 0.0 {
            return 0.0;
        }
        dot(w, &v) * eps / nrm
    };

    let mut best_val = 0.0f64;
    let mut best_c = vec![0.0; d - 1];
    for restart in 0..4u64 {
        let mut rng = Stream::new(seed, &[restart]);
        let mut delta: Vec<f64> = if restart == 0 {
            w.to_vec()
        } else {
            rng.normal_vec(d)
        };
        project(&mut delta);
        let nrm = lq_norm(&delta, q_att);
        if nrm == 0.0 {
            continue;
        }
        for v in delta.iter_mut() {
            *v *= eps / nrm;
        }
        let mut step = 0.5 * eps;
        for _ in 0..2000 {
            for (dj, wj) in delta.iter_mut().zip(w) {
                *dj += step * wj;
            }
            project(&mut delta);
            let nrm = lq_norm(&delta, q_att);
            if nrm > 0.0 {
                for v in delta.iter_mut() {
                    *v *= eps / nrm;
                }
            }
            step *= 0.996;
        }
        let c: Vec<f64> = basis.iter().map(|b| dot(b, &delta)).collect();
        let val = value_of(&c);
        if val > best_val {
            best_val = val;
            best_c = c;
        }
    }
    // derivative-free polish of the coarse ascent point
    let scale = best_c.iter().map(|x| x * x).sum::<f64>().sqrt().max(eps);
    let (c_opt, neg, _) =
        advlim::special::nelder_mead(|c| -value_of(c), &best_c, 0.05 * scale, 1e-13, 6000);
    best_val.max(-neg).max(value_of(&c_opt))
}

/// Exact maximizer of <w, delta> over the l-infinity ball intersected with
/// the hyperplane <w_star, delta> = 0, by vertex enumeration: at a basic
/// optimum all but one coordinate sit at +-eps and the remaining one is
/// pinned by the equality. Exponential in d, meant for d <= 10.
pub fn linf_hyperplane_lp_max(w: &[f64], w_star: &[f64], eps: f64) -> f64 {
    let d = w.len();
    assert!(d <= 16);
    let mut best = 0.0f64;
    for free in 0..d {
        if w_star[free].abs() < 1e-300 {
            continue;
        }
        for mask in 0u32..(1 << (d - 1)) {
            let mut delta = vec![0.0; d];
            let mut bit = 0;
            for j in 0..d {
                if j == free {
                    continue;
                }
                let s = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                delta[j] = s * eps;
                bit += 1;
            }
            let resid: f64 = delta
                .iter()
                .zip(w_star)
                .enumerate()
                .filter(|(j, _)| *j != free)
                .map(|(_, (dj, wsj))| dj * wsj)
                .sum();
            let dj = -resid / w_star[free];
            if dj.abs() <= eps * (1.0 + 1e-12) {
                delta[free] = dj;
                let val = dot(w, &delta);
                if val > best {
                    best = val;
                }
            }
        }
    }
    best
}

/// High-accuracy argmin of a scalar convex function: golden localization,
/// then a kink-aware final step. Value comparisons resolve kink minima to
/// machine precision while smooth bottoms take a parabolic vertex, so both
/// regimes reach well below the sqrt(eps) floor of plain golden search.
pub fn refine_convex_argmin<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let coarse = advlim::special::minimize_in(&f, lo, hi, 1e-9, 300).argmin;
    let h = 1e-5;
    let s_plus = (f(coarse + 2.0 * h) - f(coarse + h)) / h;
    let s_minus = (f(coarse - h) - f(coarse - 2.0 * h)) / h;
    if s_plus - s_minus > 1e-3 {
        // kink: the V shape makes value-based search sharp
        advlim::special::minimize_in(&f, coarse - 2.0 * h, coarse + 2.0 * h, 1e-15, 400).argmin
    } else {
        // smooth bottom: three-point parabolic vertex
        let fm = f(coarse - h);
        let fc = f(coarse);
        let fp = f(coarse + h);
        let denom = fp - 2.0 * fc + fm;
        if denom.abs() > 0.0 {
            coarse - 0.5 * h * (fp - fm) / denom
        } else {
            coarse
        }
    }
}
