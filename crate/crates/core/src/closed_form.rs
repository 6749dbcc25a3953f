//! Closed-form conditional entropy bounds and rates for the binary symmetric,
//! Z and multiplicative families.
//!
//! Scalar inversions use bisection. The monotonicity each one relies on:
//!
//! * `p ↦ q·h(β p)/p` is strictly decreasing on `(0, 1]` because `h(x)/x` is.
//! * `p ↦ h(α + (1 − 2α) p)` is strictly increasing on `[0, 1/2]`.
//! * `G(p) = [ln(1 − β2 p) − λ ln(1 − β1 p)] / p` starts negative at
//!   `p = 0⁺` when `λ < β2/β1`; its sign change on `(0, 1]` is the tangency
//!   point.

use serde::Serialize;

use crate::channel::{DbcModel, Family, GroupTable};
use crate::error::{DbcError, Result};
use crate::prob::{h2, ProbVector, SimplexGrid, StochasticMatrix, TransmissionStrategy};

const BISECT_TOL: f64 = 1e-15;
const DOMAIN_TOL: f64 = 1e-9;

fn bisect(mut lo: f64, mut hi: f64, mut below: impl FnMut(f64) -> bool) -> f64 {
    // `below(x)` is true on the left part of the bracket.
    for _ in 0..200 {
        if hi - lo <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(DbcError::domain(name, x, 0.0, 1.0));
    }
    Ok(())
}

fn clamp_domain(s: f64, lo: f64, hi: f64) -> Result<f64> {
    if !s.is_finite() || s < lo - DOMAIN_TOL || s > hi + DOMAIN_TOL {
        return Err(DbcError::domain("s", s, lo, hi));
    }
    Ok(s.clamp(lo, hi))
}

/// Tangency point `p_λ` of the broadcast Z channel: the root in `(0, 1]` of
/// `ln(1 − β2 p) = λ ln(1 − β1 p)`, or `1` when there is none.
pub fn z_p_lambda(beta1: f64, beta2: f64, lambda: f64) -> Result<f64> {
    if !(0.0 < beta2 && beta2 <= beta1 && beta1 < 1.0) {
        return Err(DbcError::invalid(format!(
            "need 0 < β2 ≤ β1 < 1, got β1 = {beta1}, β2 = {beta2}"
        )));
    }
    let limit = beta2 / beta1;
    if !(0.0..limit).contains(&lambda) {
        return Err(DbcError::domain("λ", lambda, 0.0, limit));
    }
    let g = |p: f64| {
        if p <= 0.0 {
            lambda * beta1 - beta2
        } else {
            ((-beta2 * p).ln_1p() - lambda * (-beta1 * p).ln_1p()) / p
        }
    };
    if g(1.0) < 0.0 {
        return Ok(1.0);
    }
    Ok(bisect(0.0, 1.0, |p| g(p) < 0.0))
}

/// `F*(q, s)` of the broadcast Z channel, `q` the probability of the noisy
/// input symbol. Inverts `s = q·h(β1 p)/p` over `p ∈ [q, 1]`.
pub fn z_fstar(q: f64, beta1: f64, beta2: f64, s: f64) -> Result<f64> {
    z_fstar_point(q, beta1, beta2, s).map(|(v, _)| v)
}

/// Like [`z_fstar`] and also returns the parameter `p`.
pub fn z_fstar_point(q: f64, beta1: f64, beta2: f64, s: f64) -> Result<(f64, f64)> {
    check_unit("q", q)?;
    check_unit("β1", beta1)?;
    check_unit("β2", beta2)?;
    let lo = q * h2(beta1);
    let hi = h2(q * beta1);
    let s = clamp_domain(s, lo, hi)?;
    if q == 0.0 {
        return Ok((0.0, 1.0));
    }
    let f = |p: f64| q * h2(beta1 * p) / p;
    let p = if s <= lo {
        1.0
    } else if s >= hi {
        q
    } else {
        bisect(q, 1.0, |p| f(p) > s)
    };
    Ok((q * h2(beta2 * p) / p, p))
}

/// The two-branch Z-channel strategy: `X` is the noiseless symbol with
/// weight `(p − q)/p`, otherwise `X` has noisy-symbol probability `p`.
pub fn z_strategy(q: f64, p: f64) -> TransmissionStrategy {
    if q <= 0.0 {
        return TransmissionStrategy {
            weights: vec![1.0],
            columns: vec![vec![1.0, 0.0]],
        };
    }
    if p <= q {
        return TransmissionStrategy {
            weights: vec![1.0],
            columns: vec![vec![1.0 - q, q]],
        };
    }
    TransmissionStrategy {
        weights: vec![(p - q) / p, q / p],
        columns: vec![vec![1.0, 0.0], vec![1.0 - p, p]],
    }
}

fn bsc_phi_slope(alpha1: f64, alpha2: f64, lambda: f64, p: f64) -> f64 {
    let l = |x: f64| ((1.0 - x) / x).ln();
    (1.0 - 2.0 * alpha2) * l(alpha2 + (1.0 - 2.0 * alpha2) * p)
        - lambda * (1.0 - 2.0 * alpha1) * l(alpha1 + (1.0 - 2.0 * alpha1) * p)
}

/// Minimizer over `[0, 1/2]` of
/// `φ(p, λ) = h(α2 + (1 − 2α2)p) − λ h(α1 + (1 − 2α1)p)`.
///
/// Below the threshold `(1 − 2α2)²/(1 − 2α1)²` the point `1/2` is a local
/// maximum; when `φ` is increasing on the whole half interval the minimizer
/// is the boundary point `0`.
pub fn bsc_p_lambda(alpha1: f64, alpha2: f64, lambda: f64) -> Result<f64> {
    if !(0.0 < alpha1 && alpha1 < alpha2 && alpha2 < 0.5) {
        return Err(DbcError::invalid(format!(
            "need 0 < α1 < α2 < 1/2, got α1 = {alpha1}, α2 = {alpha2}"
        )));
    }
    let thr = ((1.0 - 2.0 * alpha2) / (1.0 - 2.0 * alpha1)).powi(2);
    if !(0.0..thr).contains(&lambda) {
        return Err(DbcError::domain("λ", lambda, 0.0, thr));
    }
    let phi = |p: f64| h2(alpha2 + (1.0 - 2.0 * alpha2) * p) - lambda * h2(alpha1 + (1.0 - 2.0 * alpha1) * p);
    const N: usize = 4000;
    let at = |i: usize| 0.5 * i as f64 / N as f64;
    let best = (0..=N)
        .min_by(|&a, &b| phi(at(a)).total_cmp(&phi(at(b))))
        .unwrap_or(0);
    let slope = |p: f64| bsc_phi_slope(alpha1, alpha2, lambda, p);
    if best == 0 && slope(0.0) >= 0.0 {
        return Ok(0.0);
    }
    if best == N {
        return Ok(0.5);
    }
    let lo = at(best.saturating_sub(1));
    let hi = at(best + 1);
    if slope(lo) >= 0.0 {
        return Ok(lo);
    }
    Ok(bisect(lo, hi, |p| slope(p) < 0.0))
}

/// `F*(q, s)` of the broadcast BSC, `q` the probability of either input
/// symbol (the curve depends only on `min(q, 1 − q)`).
pub fn bsc_fstar(q: f64, alpha1: f64, alpha2: f64, s: f64) -> Result<f64> {
    bsc_fstar_point(q, alpha1, alpha2, s).map(|(v, _)| v)
}

pub fn bsc_fstar_point(q: f64, alpha1: f64, alpha2: f64, s: f64) -> Result<(f64, f64)> {
    check_unit("q", q)?;
    let q = q.min(1.0 - q);
    let a = |p: f64| alpha1 + (1.0 - 2.0 * alpha1) * p;
    let lo = h2(alpha1);
    let hi = h2(a(q));
    let s = clamp_domain(s, lo, hi)?;
    let p = if s <= lo {
        0.0
    } else if s >= hi {
        q
    } else {
        bisect(0.0, q, |p| h2(a(p)) < s)
    };
    Ok((h2(alpha2 + (1.0 - 2.0 * alpha2) * p), p))
}

/// Two branches with flip probability `p`, weighted to induce `Pr(X = 1) = q`.
pub fn bsc_strategy(q: f64, p: f64) -> TransmissionStrategy {
    if (1.0 - 2.0 * p).abs() < 1e-15 {
        return TransmissionStrategy {
            weights: vec![1.0],
            columns: vec![vec![1.0 - q, q]],
        };
    }
    let w = ((1.0 - p - q) / (1.0 - 2.0 * p)).clamp(0.0, 1.0);
    TransmissionStrategy {
        weights: vec![w, 1.0 - w],
        columns: vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
    }
    .pruned(0.0)
}

/// Closed-form `F*(q, s)` with a witness, for models tagged as a binary
/// symmetric or Z family.
pub fn closed_fstar(model: &DbcModel, q: &ProbVector, s: f64) -> Result<(f64, TransmissionStrategy)> {
    model.check_input(q)?;
    match &model.family {
        Some(Family::Z { alpha1, alpha2 }) => {
            let (v, p) = z_fstar_point(q[1], 1.0 - alpha1, 1.0 - alpha2, s)?;
            Ok((v, z_strategy(q[1], p)))
        }
        Some(Family::Bsc { alpha1, alpha2 }) => {
            let (v, p) = bsc_fstar_point(q[1], *alpha1, *alpha2, s)?;
            Ok((v, bsc_strategy(q[1], p)))
        }
        _ => Err(DbcError::Unsupported(
            "closed form available for the binary symmetric and Z families only".into(),
        )),
    }
}

/// Single-user Z-channel capacity `ln(1 + e^{−h(β)/β})` in nats, where `β`
/// is the probability that the noisy symbol is received correctly.
pub fn z_capacity(beta: f64) -> f64 {
    (-h2(beta) / beta).exp().ln_1p()
}

/// Parameters of the `K`-user broadcast Z channel rate formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KUserZParams {
    pub q: f64,
    /// `β_1 ≥ … ≥ β_K`.
    pub betas: Vec<f64>,
    /// `t_0 = 1 ≥ t_1 ≥ … ≥ t_K = q`.
    pub t: Vec<f64>,
}

impl KUserZParams {
    /// `inner` holds `t_1, …, t_{K−1}`.
    pub fn new(q: f64, betas: Vec<f64>, inner: &[f64]) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        let k = betas.len();
        if k == 0 || inner.len() + 1 != k {
            return Err(DbcError::invalid(format!(
                "{k} users need {} inner thresholds, got {}",
                k.saturating_sub(1),
                inner.len()
            )));
        }
        if !(0.0 < q && q <= 1.0) {
            return Err(DbcError::domain("q", q, 0.0, 1.0));
        }
        for (j, b) in betas.iter().enumerate() {
            if !(0.0 < *b && *b < 1.0) {
                return Err(DbcError::domain(format!("β_{}", j + 1), *b, 0.0, 1.0));
            }
            if j > 0 && *b > betas[j - 1] + SLACK {
                return Err(DbcError::invalid(format!("β_{} exceeds β_{}", j + 1, j)));
            }
        }
        let mut t = Vec::with_capacity(k + 1);
        t.push(1.0);
        t.extend_from_slice(inner);
        t.push(q);
        for j in 1..t.len() {
            if t[j] > t[j - 1] + SLACK || t[j] < q - SLACK {
                return Err(DbcError::invalid(format!(
                    "thresholds must satisfy 1 ≥ t_1 ≥ … ≥ t_K = q; t_{j} = {}",
                    t[j]
                )));
            }
            t[j] = t[j].clamp(q, t[j - 1]);
        }
        Ok(KUserZParams { q, betas, t })
    }

    pub fn users(&self) -> usize {
        self.betas.len()
    }
}

/// `R_j = (q/t_j) h(β_j t_j) − (q/t_{j−1}) h(β_j t_{j−1})`.
pub fn kuser_z_rates(p: &KUserZParams) -> Vec<f64> {
    (1..=p.users())
        .map(|j| {
            let b = p.betas[j - 1];
            p.q / p.t[j] * h2(b * p.t[j]) - p.q / p.t[j - 1] * h2(b * p.t[j - 1])
        })
        .collect()
}

/// Pieces of a multiplicative model.
#[derive(Debug, Clone)]
pub struct MultParts {
    pub beta1: f64,
    pub beta2: f64,
    pub alpha_delta: f64,
    pub group: GroupTable,
    pub sub_yx: StochasticMatrix,
    pub sub_zx: StochasticMatrix,
}

impl MultParts {
    pub fn of(model: &DbcModel) -> Result<Self> {
        match &model.family {
            Some(Family::Multiplicative {
                table,
                alpha1,
                alpha_delta,
                sub_noise1,
                sub_noise2,
            }) => {
                let group = table.nonzero_group().clone();
                let sub_yx = group.additive_matrix(&ProbVector::new(sub_noise1.clone())?)?;
                let sub_zy = group.additive_matrix(&ProbVector::new(sub_noise2.clone())?)?;
                let sub_zx = sub_zy.mul(&sub_yx)?;
                let beta1 = 1.0 - alpha1;
                Ok(MultParts {
                    beta1,
                    beta2: beta1 * (1.0 - alpha_delta),
                    alpha_delta: *alpha_delta,
                    group,
                    sub_yx,
                    sub_zx,
                })
            }
            _ => Err(DbcError::Unsupported("model is not multiplicative".into())),
        }
    }

    pub fn n(&self) -> usize {
        self.group.order()
    }

    /// `h_n(T̃_ZX p) − μ h_n(T̃_YX p)` on the nonzero sub-alphabet.
    pub fn sub_phi(&self, p: &[f64], mu: f64) -> f64 {
        self.sub_zx.output_entropy(p) - mu * self.sub_yx.output_entropy(p)
    }

    /// `G_x p`, with `(G_x p)(j ⊕ x) = p(j)`.
    pub fn shift(&self, x: usize, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for (j, v) in p.iter().enumerate() {
            out[self.group.op(j, x)] = *v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiPhi {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Compares `φ((1 − q, q p̃), λ)` with its decomposition
/// `h(qβ2) − λ h(qβ1) + qβ2 [h_n(T̃_ZX p̃) − λ/(1 − α_Δ) h_n(T̃_YX p̃)]`.
pub fn multi_phi_decomposition(model: &DbcModel, q: f64, p_sub: &ProbVector, lambda: f64) -> Result<MultiPhi> {
    let parts = MultParts::of(model)?;
    check_unit("q", q)?;
    if p_sub.dim() != parts.n() {
        return Err(DbcError::mismatch(parts.n(), p_sub.dim(), "sub-alphabet distribution"));
    }
    let mut x = vec![1.0 - q];
    x.extend(p_sub.as_slice().iter().map(|v| q * v));
    let lhs = crate::fstar::phi(model, &x, lambda);
    let rhs = h2(q * parts.beta2) - lambda * h2(q * parts.beta1)
        + q * parts.beta2 * parts.sub_phi(p_sub.as_slice(), lambda / (1.0 - parts.alpha_delta));
    Ok(MultiPhi {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Minimizer of `p̃ ↦ h_n(T̃_ZX p̃) − μ h_n(T̃_YX p̃)` over the simplex: grid
/// search followed by pairwise mass-shifting refinement.
pub fn sub_phi_argmin(parts: &MultParts, mu: f64) -> Vec<f64> {
    let n = parts.n();
    if n == 1 {
        return vec![1.0];
    }
    let grid = match n {
        2 => SimplexGrid { k: 2, m: 2000 },
        3 => SimplexGrid { k: 3, m: 150 },
        _ => SimplexGrid::default_for(n),
    };
    let f = |p: &[f64]| parts.sub_phi(p, mu);
    let mut best = grid
        .points()
        .into_iter()
        .map(|p| p.into_vec())
        .min_by(|a, b| f(a).total_cmp(&f(b)))
        .expect("grid is nonempty");
    let mut fb = f(&best);
    let mut step = 1.0 / grid.m as f64;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = step.min(best[j]);
                if d <= 0.0 {
                    continue;
                }
                let mut c = best.clone();
                c[i] += d;
                c[j] -= d;
                let fc = f(&c);
                if fc < fb - 1e-16 {
                    best = c;
                    fb = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Optimal strategy for input `(1 − q, q·u)` on a multiplicative channel:
/// the Z-channel outer mixture between symbol 0 and nonzero-probability
/// `p_λ`, with the nonzero part split into the `n` group shifts of the
/// sub-channel minimizer.
pub fn multiplicative_strategy(model: &DbcModel, q: f64, lambda: f64) -> Result<TransmissionStrategy> {
    let parts = MultParts::of(model)?;
    check_unit("q", q)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(DbcError::domain("λ", lambda, 0.0, 1.0));
    }
    let n = parts.n();
    let inner = sub_phi_argmin(&parts, lambda / (1.0 - parts.alpha_delta));
    let p_outer = if parts.beta2 < parts.beta1 && lambda < parts.beta2 / parts.beta1 {
        z_p_lambda(parts.beta1, parts.beta2, lambda)?
    } else {
        0.0
    };
    let nonzero_branch = |p: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|x| {
                let mut c = vec![1.0 - p];
                c.extend(parts.shift(x, &inner).into_iter().map(|v| p * v));
                c
            })
            .collect()
    };
    let mut weights = Vec::new();
    let mut columns = Vec::new();
    if q == 0.0 {
        weights.push(1.0);
        let mut e0 = vec![0.0; n + 1];
        e0[0] = 1.0;
        columns.push(e0);
    } else if q >= p_outer {
        for c in nonzero_branch(q) {
            weights.push(1.0 / n as f64);
            columns.push(c);
        }
    } else {
        let mut e0 = vec![0.0; n + 1];
        e0[0] = 1.0;
        weights.push((p_outer - q) / p_outer);
        columns.push(e0);
        for c in nonzero_branch(p_outer) {
            weights.push(q / (p_outer * n as f64));
            columns.push(c);
        }
    }
    Ok(TransmissionStrategy { weights, columns }.merged(1e-15))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_broadcast_z, make_multiplicative, MultTable};
    use approx::assert_abs_diff_eq;

    #[test]
    fn z_p_lambda_cases() {
        assert_eq!(z_p_lambda(0.9, 0.6, 0.0).unwrap(), 1.0);
        let p = z_p_lambda(0.9, 0.6, 0.5).unwrap();
        let g = (1.0 - 0.6 * p).ln() - 0.5 * (1.0 - 0.9 * p).ln();
        assert!(g.abs() < 1e-12, "p = {p}, g = {g}");
        assert!(p > 0.0 && p < 1.0);
        let mut prev = 1.0;
        for l in [0.3, 0.5, 0.6, 0.65, 0.66, 0.666] {
            let p = z_p_lambda(0.9, 0.6, l).unwrap();
            assert!(p <= prev);
            prev = p;
        }
        assert!(prev < 0.02);
        assert!(z_p_lambda(0.9, 0.6, 2.0 / 3.0).is_err());
        assert!(z_p_lambda(0.6, 0.9, 0.1).is_err());
    }

    #[test]
    fn z_fstar_examples() {
        let (b1, b2, q) = (0.9, 0.6, 0.4);
        assert_abs_diff_eq!(z_fstar(q, b1, b2, q * h2(b1)).unwrap(), q * h2(b2), epsilon = 1e-12);
        assert_abs_diff_eq!(z_fstar(q, b1, b2, h2(q * b1)).unwrap(), h2(q * b2), epsilon = 1e-12);
        assert_abs_diff_eq!(z_fstar(q, b1, b2, 0.8 * h2(0.45)).unwrap(), 0.8 * h2(0.3), epsilon = 1e-12);
        assert!(z_fstar(q, b1, b2, h2(q * b1) + 1e-6).is_err());
    }

    #[test]
    fn z_lambda_zero_endpoint() {
        // p_λ = 1 at λ = 0 turns the formula into the U = X endpoint.
        let (b1, b2, q) = (0.9, 0.6, 0.3);
        let p = z_p_lambda(b1, b2, 0.0).unwrap();
        assert_abs_diff_eq!(q * h2(b2 * p) / p, q * h2(b2), epsilon = 1e-15);
    }

    #[test]
    fn bsc_p_lambda_cases() {
        let (a1, a2) = (0.1, 0.2);
        assert_eq!(bsc_p_lambda(a1, a2, 0.0).unwrap(), 0.0);
        assert_eq!(bsc_p_lambda(a1, a2, 0.3).unwrap(), 0.0);
        let p = bsc_p_lambda(a1, a2, 0.5).unwrap();
        assert!(p > 0.0 && p < 0.5);
        assert!(bsc_phi_slope(a1, a2, 0.5, p).abs() < 1e-10);
        assert!((p - 0.05183).abs() < 1e-4, "{p}");
        let thr = (0.6f64 / 0.8).powi(2);
        let near = bsc_p_lambda(a1, a2, thr - 1e-6).unwrap();
        assert!(near > 0.45, "{near}");
        assert!(bsc_p_lambda(a1, a2, thr).is_err());
    }

    #[test]
    fn bsc_fstar_examples() {
        let (a1, a2) = (0.1, 0.2);
        assert_abs_diff_eq!(bsc_fstar(0.5, a1, a2, h2(a1)).unwrap(), h2(a2), epsilon = 1e-12);
        let q = 0.3;
        let top = h2(a1 + (1.0 - 2.0 * a1) * q);
        assert_abs_diff_eq!(bsc_fstar(q, a1, a2, top).unwrap(), h2(a2 + (1.0 - 2.0 * a2) * q), epsilon = 1e-12);
        assert_abs_diff_eq!(bsc_fstar(0.5, a1, a2, h2(0.3)).unwrap(), h2(0.35), epsilon = 1e-12);
        assert_abs_diff_eq!(bsc_fstar(0.7, a1, a2, top).unwrap(), bsc_fstar(q, a1, a2, top).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn strategies_reproduce_closed_form() {
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let q = ProbVector::binary(0.4).unwrap();
        let (v, w) = closed_fstar(&z, &q, 0.8 * h2(0.45)).unwrap();
        let xi = crate::prob::conditional_entropy_given_strategy(&z.t_yx, &w).unwrap();
        let eta = crate::prob::conditional_entropy_given_strategy(&z.t_zx, &w).unwrap();
        assert_abs_diff_eq!(xi, 0.8 * h2(0.45), epsilon = 1e-12);
        assert_abs_diff_eq!(eta, v, epsilon = 1e-12);
        let ind = w.induced_input();
        assert_abs_diff_eq!(ind[1], 0.4, epsilon = 1e-15);

        let b = crate::channel::make_broadcast_bsc(0.1, 0.2).unwrap();
        let q = ProbVector::binary(0.3).unwrap();
        let s = 0.5 * (h2(0.1) + h2(0.1 + 0.8 * 0.3));
        let (v, w) = closed_fstar(&b, &q, s).unwrap();
        let xi = crate::prob::conditional_entropy_given_strategy(&b.t_yx, &w).unwrap();
        let eta = crate::prob::conditional_entropy_given_strategy(&b.t_zx, &w).unwrap();
        assert_abs_diff_eq!(xi, s, epsilon = 1e-12);
        assert_abs_diff_eq!(eta, v, epsilon = 1e-12);
        assert_abs_diff_eq!(w.induced_input()[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn z_capacity_matches_direct_maximization() {
        let beta: f64 = 0.6;
        let best = (1..100_000)
            .map(|i| {
                let q = i as f64 / 100_000.0;
                h2(q * beta) - q * h2(beta)
            })
            .fold(f64::MIN, f64::max);
        assert!((z_capacity(beta) - best).abs() < 1e-8);
    }

    #[test]
    fn kuser_reductions() {
        let q = 0.35;
        let p = KUserZParams::new(q, vec![0.8], &[]).unwrap();
        assert_abs_diff_eq!(kuser_z_rates(&p)[0], h2(0.8 * q) - q * h2(0.8), epsilon = 1e-15);
        let p = KUserZParams::new(q, vec![0.8, 0.5], &[q]).unwrap();
        let r = kuser_z_rates(&p);
        assert_abs_diff_eq!(r[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0], h2(0.8 * q) - q * h2(0.8), epsilon = 1e-15);
        let p = KUserZParams::new(q, vec![0.7, 0.7, 0.7], &[0.9, 0.5]).unwrap();
        let sum: f64 = kuser_z_rates(&p).iter().sum();
        assert_abs_diff_eq!(sum, h2(0.7 * q) - q * h2(0.7), epsilon = 1e-12);
        assert!(KUserZParams::new(q, vec![0.5, 0.8], &[0.5]).is_err());
        assert!(KUserZParams::new(q, vec![0.8, 0.5], &[0.2]).is_err());
    }

    fn gf3() -> DbcModel {
        make_multiplicative(
            &MultTable::gf_prime(3).unwrap(),
            0.1,
            0.2,
            &ProbVector::new(vec![0.8, 0.2]).unwrap(),
            &ProbVector::new(vec![0.7, 0.3]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn multi_phi_identity() {
        let m = gf3();
        let one = multi_phi_decomposition(&m, 0.0, &ProbVector::uniform(2), 0.4).unwrap();
        assert_eq!(one.lhs, 0.0);
        assert!(one.residual <= 1e-12);
        let p = ProbVector::new(vec![0.3, 0.7]).unwrap();
        let r = multi_phi_decomposition(&m, 1.0, &p, 0.0).unwrap();
        assert!(r.residual <= 1e-12);
        let mut rng = crate::prob::deterministic_rng(1);
        for _ in 0..200 {
            let q = rng.uniform();
            let p = ProbVector::new(rng.simplex(2)).unwrap();
            let l = rng.uniform();
            assert!(multi_phi_decomposition(&m, q, &p, l).unwrap().residual <= 1e-12);
        }
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        assert!(multi_phi_decomposition(&z, 0.5, &ProbVector::uniform(1), 0.1).is_err());
    }

    #[test]
    fn multiplicative_strategy_reduces_to_z() {
        let mt = MultTable::gf_prime(2).unwrap();
        let one = ProbVector::new(vec![1.0]).unwrap();
        let m = make_multiplicative(&mt, 0.1, 1.0 / 3.0, &one, &one).unwrap();
        for (q, l) in [(0.2, 0.3), (0.5, 0.6), (0.05, 0.1)] {
            let s = multiplicative_strategy(&m, q, l).unwrap();
            let p = z_p_lambda(0.9, 0.6, l).unwrap();
            let z = if q < p { z_strategy(q, p) } else { z_strategy(q, q) };
            assert_eq!(s, z, "q = {q}, λ = {l}");
        }
    }

    #[test]
    fn multiplicative_strategy_induces_uniform_shape() {
        let m = gf3();
        for (q, l) in [(0.2, 0.3), (0.6, 0.5), (0.9, 0.1)] {
            let s = multiplicative_strategy(&m, q, l).unwrap();
            let x = s.induced_input();
            assert_abs_diff_eq!(x[0], 1.0 - q, epsilon = 1e-15);
            assert_abs_diff_eq!(x[1], q / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(x[2], q / 2.0, epsilon = 1e-15);
        }
    }
}
