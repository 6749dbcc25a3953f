//! Brute-force `F*(q, s)` for small input alphabets, independent of the LP.
//!
//! * `k = 2`: `F*(q, s) = max_{λ ∈ [0,1]} ψ(q, λ) + λ s`, with `ψ` read off a
//!   dense one-dimensional lower hull and the concave dual maximized by
//!   golden-section search.
//! * `k ≤ 3`: multistart local search over strategies with `k + 1`
//!   branches, where the last branch absorbs whatever keeps the induced law
//!   equal to `q`. The constraint `H(Y|U) ≥ s` is an exact penalty of weight
//!   2 (slopes of `F*` never exceed 1).

use serde::Serialize;

use crate::channel::DbcModel;
use crate::error::{DbcError, Result};
use crate::hull::PiecewiseLinear;
use crate::prob::{conditional_entropy_given_strategy, DetRng, ProbVector, TransmissionStrategy};

const DENSE_POINTS: usize = 20_001;
const PENALTY: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub strategy: TransmissionStrategy,
}

fn clamp_s(model: &DbcModel, q: &ProbVector, s: f64) -> Result<f64> {
    let lo = model.h_y_given_x(q.as_slice());
    let hi = model.h_y(q.as_slice());
    if !s.is_finite() || s < lo - 1e-9 || s > hi + 1e-9 {
        return Err(DbcError::domain("s", s, lo, hi));
    }
    Ok(s.clamp(lo, hi))
}

/// Best value found for `F*(q, s)` with its strategy.
pub fn fstar_oracle(model: &DbcModel, q: &ProbVector, s: f64) -> Result<OracleResult> {
    model.check_input(q)?;
    let s = clamp_s(model, q, s)?;
    match model.k() {
        1 => Ok(OracleResult {
            value: model.h_z(q.as_slice()),
            strategy: TransmissionStrategy::constant(q),
        }),
        2 => dense_binary(model, q, s),
        3 => local_search(model, q, s, 24, 3000, 0x5eed),
        k => Err(DbcError::Unsupported(format!(
            "oracle handles k ≤ 3, got k = {k}"
        ))),
    }
}

struct Dense {
    ps: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
}

impl Dense {
    fn new(model: &DbcModel, q1: f64) -> Self {
        let mut ps: Vec<f64> = (0..DENSE_POINTS)
            .map(|i| i as f64 / (DENSE_POINTS - 1) as f64)
            .collect();
        ps.push(q1);
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let xi = ps.iter().map(|&p| model.h_y(&[1.0 - p, p])).collect();
        let eta = ps.iter().map(|&p| model.h_z(&[1.0 - p, p])).collect();
        Dense { ps, xi, eta }
    }

    /// `ψ(q, λ)` with the bracketing points `(a, b, θ)`.
    fn psi(&self, q1: f64, lambda: f64) -> (f64, usize, usize, f64) {
        let pts: Vec<(f64, f64)> = self
            .ps
            .iter()
            .zip(self.xi.iter().zip(&self.eta))
            .map(|(&p, (x, e))| (p, e - lambda * x))
            .collect();
        let env = PiecewiseLinear::lower_envelope(&pts);
        let (v, a, b, t) = env.locate(q1).expect("q1 lies in [0, 1]");
        (v, env.idx[a], env.idx[b], t)
    }

    fn witness(&self, q1: f64, lambda: f64) -> (TransmissionStrategy, f64) {
        let (_, a, b, t) = self.psi(q1, lambda);
        let col = |i: usize| vec![1.0 - self.ps[i], self.ps[i]];
        let s = if a == b {
            TransmissionStrategy {
                weights: vec![1.0],
                columns: vec![col(a)],
            }
        } else {
            TransmissionStrategy {
                weights: vec![t, 1.0 - t],
                columns: vec![col(a), col(b)],
            }
            .pruned(0.0)
        };
        let xi = if a == b { self.xi[a] } else { t * self.xi[a] + (1.0 - t) * self.xi[b] };
        (s, xi)
    }
}

fn dense_binary(model: &DbcModel, q: &ProbVector, s: f64) -> Result<OracleResult> {
    let q1 = q[1];
    let d = Dense::new(model, q1);
    let dual = |l: f64| d.psi(q1, l).0 + l * s;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (dual(x1), dual(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dual(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dual(x1);
        }
    }
    let mut best_l = 0.5 * (lo + hi);
    let mut value = dual(best_l);
    for l in [0.0, 1.0] {
        let v = dual(l);
        if v > value {
            value = v;
            best_l = l;
        }
    }
    // Mix the witnesses on either side of the optimal multiplier so that
    // H(Y|U) hits s.
    let eps = 1e-7;
    let (wa, xa) = d.witness(q1, (best_l - eps).max(0.0));
    let (wb, xb) = d.witness(q1, (best_l + eps).min(1.0));
    let strategy = if (xb - xa).abs() > 1e-15 && (s - xa) * (s - xb) <= 0.0 {
        let t = (xb - s) / (xb - xa);
        let mut weights: Vec<f64> = wa.weights.iter().map(|w| w * t).collect();
        weights.extend(wb.weights.iter().map(|w| w * (1.0 - t)));
        let mut columns = wa.columns.clone();
        columns.extend(wb.columns.iter().cloned());
        TransmissionStrategy { weights, columns }.pruned(0.0).merged(0.0)
    } else if (xa - s).abs() <= (xb - s).abs() {
        wa
    } else {
        wb
    };
    Ok(OracleResult { value, strategy })
}

struct Candidate {
    cols: Vec<Vec<f64>>,
    w: Vec<f64>,
}

fn assemble(q: &[f64], c: &Candidate) -> Option<TransmissionStrategy> {
    let k = q.len();
    let wl = 1.0 - c.w.iter().sum::<f64>();
    if wl < -1e-15 {
        return None;
    }
    let mut last = q.to_vec();
    for (w, col) in c.w.iter().zip(&c.cols) {
        for i in 0..k {
            last[i] -= w * col[i];
        }
    }
    if last.iter().any(|&v| v < -1e-13) {
        return None;
    }
    let mut weights = c.w.clone();
    let mut columns = c.cols.clone();
    if wl > 1e-15 {
        let col: Vec<f64> = last.iter().map(|v| (v / wl).max(0.0)).collect();
        let t: f64 = col.iter().sum();
        weights.push(wl);
        columns.push(col.iter().map(|v| v / t).collect());
    }
    Some(TransmissionStrategy { weights, columns }.pruned(0.0))
}

fn score(model: &DbcModel, st: &TransmissionStrategy, s: f64) -> (f64, f64, f64) {
    let xi = conditional_entropy_given_strategy(&model.t_yx, st).unwrap_or(f64::NAN);
    let eta = conditional_entropy_given_strategy(&model.t_zx, st).unwrap_or(f64::NAN);
    (eta + PENALTY * (s - xi).max(0.0), xi, eta)
}

/// Multistart local search with `k` free branches plus the balancing one.
pub fn local_search(
    model: &DbcModel,
    q: &ProbVector,
    s: f64,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<OracleResult> {
    model.check_input(q)?;
    let s = clamp_s(model, q, s)?;
    let k = model.k();
    let qs = q.as_slice();
    let lo = model.h_y_given_x(qs);
    let hi = model.h_y(qs);
    // Mixing U = X with U constant reaches s exactly and seeds the search.
    let theta = if hi - lo > 1e-15 { ((hi - s) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
    let seed_candidate = Candidate {
        cols: (0..k).map(|i| ProbVector::vertex(k, i).into_vec()).collect(),
        w: qs.iter().map(|v| theta * v).collect(),
    };
    let mut best: Option<(f64, TransmissionStrategy)> = None;
    for start in 0..starts.max(1) {
        let mut rng = DetRng::with_stream(seed, start as u64);
        let mut cand = if start == 0 {
            Candidate {
                cols: seed_candidate.cols.clone(),
                w: seed_candidate.w.clone(),
            }
        } else {
            let cols: Vec<Vec<f64>> = (0..k).map(|_| rng.simplex(k)).collect();
            // Scale weights until the remainder is a nonnegative measure.
            let raw: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
            let mut scale = 1.0 / raw.iter().sum::<f64>();
            for i in 0..k {
                let used: f64 = raw.iter().zip(&cols).map(|(r, c)| r * c[i]).sum();
                if used > 0.0 {
                    scale = scale.min(qs[i] / used);
                }
            }
            scale *= rng.uniform();
            Candidate {
                cols,
                w: raw.iter().map(|r| r * scale).collect(),
            }
        };
        let mut st = match assemble(qs, &cand) {
            Some(st) => st,
            None => continue,
        };
        let mut f = score(model, &st, s).0;
        let mut step = 0.2;
        let mut fails = 0usize;
        for _ in 0..iters {
            let j = rng.below(k);
            let mut trial = Candidate {
                cols: cand.cols.clone(),
                w: cand.w.clone(),
            };
            if rng.uniform() < 0.5 {
                let a = rng.below(k);
                let b = rng.below(k);
                if a == b {
                    continue;
                }
                let d = (step * rng.uniform()).min(trial.cols[j][b]);
                trial.cols[j][a] += d;
                trial.cols[j][b] -= d;
            } else {
                let d = step * (2.0 * rng.uniform() - 1.0) * (qs.iter().cloned().fold(0.0, f64::max));
                trial.w[j] = (trial.w[j] + d).max(0.0);
            }
            if let Some(ts) = assemble(qs, &trial) {
                let tf = score(model, &ts, s).0;
                if tf < f {
                    f = tf;
                    st = ts;
                    cand = trial;
                    fails = 0;
                    continue;
                }
            }
            fails += 1;
            if fails > 40 {
                step *= 0.5;
                fails = 0;
                if step < 1e-9 {
                    break;
                }
            }
        }
        let (_, xi, eta) = score(model, &st, s);
        if xi >= s - 1e-9 && best.as_ref().is_none_or(|(b, _)| eta < *b) {
            best = Some((eta, st));
        }
    }
    let (value, strategy) = best.ok_or_else(|| DbcError::Solver("oracle found no feasible strategy".into()))?;
    Ok(OracleResult { value, strategy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_broadcast_bsc, make_broadcast_z, make_group_additive, GroupTable};
    use crate::closed_form::{bsc_fstar, z_fstar};
    use crate::prob::h2;

    #[test]
    fn dense_matches_z_closed_form() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let q = ProbVector::binary(0.4).unwrap();
        let (lo, hi) = (0.4 * h2(0.9), h2(0.36));
        for i in 0..=10 {
            let s = lo + (hi - lo) * i as f64 / 10.0;
            let o = fstar_oracle(&m, &q, s).unwrap();
            let c = z_fstar(0.4, 0.9, 0.6, s).unwrap();
            assert!((o.value - c).abs() < 1e-6, "s = {s}: {} vs {c}", o.value);
            let xi = conditional_entropy_given_strategy(&m.t_yx, &o.strategy).unwrap();
            assert!((xi - s).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_matches_bsc_closed_form() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let q = ProbVector::binary(0.3).unwrap();
        let (lo, hi) = (h2(0.1), h2(0.1 + 0.8 * 0.3));
        for i in 0..=10 {
            let s = lo + (hi - lo) * i as f64 / 10.0;
            let o = fstar_oracle(&m, &q, s).unwrap();
            let c = bsc_fstar(0.3, 0.1, 0.2, s).unwrap();
            assert!((o.value - c).abs() < 1e-6, "s = {s}: {} vs {c}", o.value);
        }
    }

    #[test]
    fn local_search_close_on_binary() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let q = ProbVector::binary(0.4).unwrap();
        let s = 0.5 * (0.4 * h2(0.9) + h2(0.36));
        let o = local_search(&m, &q, s, 16, 3000, 7).unwrap();
        let c = z_fstar(0.4, 0.9, 0.6, s).unwrap();
        assert!(o.value >= c - 1e-9);
        assert!(o.value - c < 1e-3, "{} vs {c}", o.value);
    }

    #[test]
    fn ternary_endpoints() {
        let m = make_group_additive(
            &GroupTable::cyclic(3),
            &ProbVector::new(vec![0.8, 0.1, 0.1]).unwrap(),
            &ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap(),
        )
        .unwrap();
        let q = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let lo = m.h_y_given_x(q.as_slice());
        let hi = m.h_y(q.as_slice());
        let a = fstar_oracle(&m, &q, lo).unwrap();
        assert!((a.value - m.h_z_given_x(q.as_slice())).abs() < 1e-6);
        let b = fstar_oracle(&m, &q, hi).unwrap();
        assert!((b.value - m.h_z(q.as_slice())).abs() < 1e-6);
    }

    #[test]
    fn large_alphabet_unsupported() {
        let m = make_group_additive(
            &GroupTable::cyclic(4),
            &ProbVector::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap(),
            &ProbVector::new(vec![0.6, 0.2, 0.1, 0.1]).unwrap(),
        )
        .unwrap();
        let q = ProbVector::uniform(4);
        let s = m.h_y(q.as_slice());
        assert!(matches!(fstar_oracle(&m, &q, s), Err(DbcError::Unsupported(_))));
    }
}
