//! Capacity-region boundaries and optimal transmission strategies.
//!
//! For a multiplier `λ ∈ [0, 1]` the boundary point maximizing `R2 + λ R1`
//! at input law `q` is read off the `ψ(q, λ)` witness:
//! `R1 = H(Y|U) − H(Y|X)` and `R2 = H(Z) − H(Z|U)`, so that
//! `R2 + λ R1 = H(Z) − λ H(Y|X) − ψ(q, λ)`.

use std::io::Write;

use serde::Serialize;

use crate::channel::DbcModel;
use crate::error::{DbcError, Result};
use crate::format::{sig12, Units};
use crate::fstar::{phi, psi, psi_min_xi, psi_with_points, EnvelopeTable, SupportPoint};
use crate::hull::{upper_hull, PiecewiseLinear};
use crate::par::Exec;
use crate::prob::{ProbVector, SimplexGrid, TransmissionStrategy};

/// One boundary point with its witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySample {
    pub lambda: f64,
    pub q: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub psi: f64,
    pub strategy: TransmissionStrategy,
}

impl BoundarySample {
    pub fn weighted(&self) -> f64 {
        self.r2 + self.lambda * self.r1
    }
}

/// Maximizes `R2 + λ R1` at a fixed input law.
pub fn max_weighted_rate(model: &DbcModel, q: &ProbVector, lambda: f64, table: &EnvelopeTable) -> Result<BoundarySample> {
    let mut r = psi(model, q, lambda, table)?;
    if lambda <= 1e-12 {
        // Every strategy reaching min H(Z|U) ties; report the smallest R1.
        let t = psi_min_xi(model, q, lambda, table, r.value, 1e-10)?;
        if t.xi < r.xi {
            r = t;
        }
    }
    let qs = q.as_slice();
    Ok(BoundarySample {
        lambda,
        q: qs.to_vec(),
        r1: r.xi - model.h_y_given_x(qs),
        r2: model.h_z(qs) - r.eta,
        psi: r.value,
        strategy: r.strategy,
    })
}

/// Sampled boundary, sorted by `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionBoundary {
    pub samples: Vec<BoundarySample>,
    /// Samples dropped by the convexification pass.
    pub removed: usize,
}

impl RegionBoundary {
    /// `max R2 + λ R1` over the samples.
    pub fn support(&self, lambda: f64) -> f64 {
        self.samples
            .iter()
            .map(|s| s.r2 + lambda * s.r1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean distance from `(r1, r2)` to the sampled polyline.
    pub fn distance(&self, r1: f64, r2: f64) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.samples.iter().map(|s| (s.r1, s.r2)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            let a = pts[i];
            best = best.min(((a.0 - r1).powi(2) + (a.1 - r2).powi(2)).sqrt());
            if i + 1 < pts.len() {
                let b = pts[i + 1];
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                if len2 > 0.0 {
                    let t = (((r1 - a.0) * dx + (r2 - a.1) * dy) / len2).clamp(0.0, 1.0);
                    let (px, py) = (a.0 + t * dx, a.1 + t * dy);
                    best = best.min(((px - r1).powi(2) + (py - r2).powi(2)).sqrt());
                }
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, out: W, units: Units) -> Result<()> {
        let k = self.samples.first().map_or(0, |s| s.q.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "lambda".to_string(),
            format!("R1_{}", units.suffix()),
            format!("R2_{}", units.suffix()),
        ];
        header.extend((1..=k).map(|i| format!("q{i}")));
        header.push("strategy_json".into());
        let csv_err = |e: csv::Error| DbcError::invalid(format!("csv: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        let c = units.scale();
        for s in &self.samples {
            let mut row = vec![sig12(s.lambda), sig12(s.r1 * c), sig12(s.r2 * c)];
            row.extend(s.q.iter().map(|&v| sig12(v)));
            row.push(s.strategy.to_json());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DbcError::invalid(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Input-law grid used when none is given: 201 points for `k = 2`,
/// otherwise a simplex grid of at most a few hundred points.
pub fn default_q_grid(k: usize) -> Vec<ProbVector> {
    match k {
        2 => SimplexGrid { k: 2, m: 200 }.points(),
        3 => SimplexGrid { k: 3, m: 24 }.points(),
        _ => {
            let mut m = 1;
            while (SimplexGrid { k, m: m + 1 }).len() <= 400 {
                m += 1;
            }
            SimplexGrid { k, m }.points()
        }
    }
}

/// `ψ(·, λ)` for `k = 2` as the lower envelope of the table points, keyed
/// by `Pr(X = 1)`.
fn binary_envelope(table: &EnvelopeTable, lambda: f64) -> PiecewiseLinear {
    let pts: Vec<(f64, f64)> = (0..table.len())
        .map(|g| (table.point(g)[1], table.eta(g) - lambda * table.xi(g)))
        .collect();
    PiecewiseLinear::lower_envelope(&pts)
}

fn binary_objective(model: &DbcModel, env: &PiecewiseLinear, lambda: f64, q1: f64) -> f64 {
    let q = [1.0 - q1, q1];
    let psi = env
        .eval(q1)
        .unwrap_or(f64::INFINITY)
        .min(phi(model, &q, lambda));
    model.h_z(&q) - lambda * model.h_y_given_x(&q) - psi
}

fn best_q_binary(model: &DbcModel, table: &EnvelopeTable, lambda: f64, q_grid: &[ProbVector]) -> f64 {
    let env = binary_envelope(table, lambda);
    let mut qs: Vec<f64> = q_grid.iter().map(|q| q[1]).collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    let f = |x: f64| binary_objective(model, &env, lambda, x);
    let vals: Vec<f64> = qs.iter().map(|&x| f(x)).collect();
    let mut i = 0;
    for j in 1..vals.len() {
        if vals[j] > vals[i] + 1e-15 {
            i = j;
        }
    }
    if qs.len() < 3 {
        return qs[i];
    }
    // Golden-section refinement on the neighbouring cells.
    let mut lo = qs[i.saturating_sub(1)];
    let mut hi = qs[(i + 1).min(qs.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    if f(x) > vals[i] { x } else { qs[i] }
}

fn search_table(model: &DbcModel, table: &EnvelopeTable) -> Result<Option<EnvelopeTable>> {
    const MAX_SEARCH_COLUMNS: usize = 4000;
    if table.len() <= MAX_SEARCH_COLUMNS {
        return Ok(None);
    }
    let k = model.k();
    let mut m = 1;
    while (SimplexGrid { k, m: m + 1 }).len() <= MAX_SEARCH_COLUMNS {
        m += 1;
    }
    EnvelopeTable::new_with(model, SimplexGrid { k, m }, Exec::Sequential).map(Some)
}

/// Traces the boundary by maximizing `R2 + λ R1` over `q_grid` for every
/// `λ`, then drops samples strictly inside the convex hull of the rest.
pub fn trace_region(
    model: &DbcModel,
    lambdas: &[f64],
    q_grid: &[ProbVector],
    table: &EnvelopeTable,
    exec: Exec,
) -> Result<RegionBoundary> {
    if lambdas.is_empty() || q_grid.is_empty() {
        return Err(DbcError::invalid("λ and q grids must be nonempty"));
    }
    for q in q_grid {
        model.check_input(q)?;
    }
    let coarse = if model.k() == 2 { None } else { search_table(model, table)? };
    let samples = exec.map(lambdas, |&lambda| -> Result<BoundarySample> {
        let q = if model.k() == 2 {
            let q1 = best_q_binary(model, table, lambda, q_grid);
            ProbVector::binary(q1)?
        } else {
            let t = coarse.as_ref().unwrap_or(table);
            let mut best: Option<(f64, &ProbVector)> = None;
            for q in q_grid {
                let v = max_weighted_rate(model, q, lambda, t)?.weighted();
                if best.is_none_or(|(b, _)| v > b + 1e-15) {
                    best = Some((v, q));
                }
            }
            best.expect("q grid is nonempty").1.clone()
        };
        max_weighted_rate(model, &q, lambda, table)
    });
    let mut samples: Vec<BoundarySample> = samples.into_iter().collect::<Result<_>>()?;
    samples.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let before = samples.len();
    let samples = convexify(samples);
    Ok(RegionBoundary {
        removed: before - samples.len(),
        samples,
    })
}

/// Keeps samples on the upper-right convex hull of the rate pairs.
fn convexify(samples: Vec<BoundarySample>) -> Vec<BoundarySample> {
    if samples.len() < 2 {
        return samples;
    }
    let max_r1 = samples.iter().map(|s| s.r1).fold(0.0, f64::max);
    let max_r2 = samples.iter().map(|s| s.r2).fold(0.0, f64::max);
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.r1, s.r2)).collect();
    pts.push((0.0, max_r2));
    pts.push((max_r1, 0.0));
    let h = upper_hull(&pts);
    let env = PiecewiseLinear {
        xs: h.iter().map(|&i| pts[i].0).collect(),
        ys: h.iter().map(|&i| pts[i].1).collect(),
        idx: h,
    };
    samples
        .into_iter()
        .filter(|s| env.eval(s.r1).is_none_or(|top| s.r2 >= top - 1e-9))
        .collect()
}

/// Check of a claimed optimal support `{(w_j, p_j)}` for `ψ(q, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub lambda: f64,
    /// `Σ w_j φ(p_j, λ)`.
    pub claimed: f64,
    /// `ψ(q, λ)` from the LP with the claimed points added as columns.
    pub psi: f64,
    pub gap: f64,
    /// `max |Σ w_j p_j − q|`.
    pub mass_error: f64,
    /// `φ(p_j, λ) − ℓ(p_j)` for the supporting affine function `ℓ`.
    pub residuals: Vec<f64>,
    /// `max_g ℓ(p_g) − φ(p_g, λ)` over the grid; positive values mean `ℓ`
    /// cuts above `φ`.
    pub max_dual_violation: f64,
}

impl SupportReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.gap <= tol
            && self.mass_error <= 1e-9
            && self.residuals.iter().all(|r| r.abs() <= tol)
    }
}

/// Verifies that `points` with `weights` realize `ψ(q, λ)`.
pub fn strategy_from_support(
    model: &DbcModel,
    q: &ProbVector,
    lambda: f64,
    points: &[ProbVector],
    weights: &[f64],
    table: &EnvelopeTable,
) -> Result<SupportReport> {
    if points.len() != weights.len() || points.is_empty() {
        return Err(DbcError::invalid(format!(
            "{} support points with {} weights",
            points.len(),
            weights.len()
        )));
    }
    for p in points {
        model.check_input(p)?;
    }
    model.check_input(q)?;
    let k = model.k();
    let mut mass = vec![0.0; k];
    for (w, p) in weights.iter().zip(points) {
        for i in 0..k {
            mass[i] += w * p[i];
        }
    }
    let mass_error = mass
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let claimed: f64 = weights
        .iter()
        .zip(points)
        .map(|(w, p)| w * phi(model, p.as_slice(), lambda))
        .sum();
    let extra: Vec<SupportPoint> = points.iter().map(|p| SupportPoint::new(model, p.as_slice())).collect();
    let r = psi_with_points(model, q, lambda, table, &extra)?;
    let ell = |p: &[f64]| -> f64 { p.iter().zip(&r.duals).map(|(a, y)| a * y).sum() };
    let residuals = points
        .iter()
        .map(|p| phi(model, p.as_slice(), lambda) - ell(p.as_slice()))
        .collect();
    let max_dual_violation = (0..table.len())
        .map(|g| ell(table.point(g)) - (table.eta(g) - lambda * table.xi(g)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SupportReport {
        lambda,
        claimed,
        psi: r.value,
        gap: (claimed - r.value).abs(),
        mass_error,
        residuals,
        max_dual_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_broadcast_bsc, make_broadcast_z};
    use crate::closed_form::{bsc_p_lambda, z_capacity, z_p_lambda};
    use crate::fstar::lambda_grid;
    use crate::prob::h2;
    use approx::assert_abs_diff_eq;

    fn table(model: &DbcModel) -> EnvelopeTable {
        EnvelopeTable::new(model, SimplexGrid { k: model.k(), m: 2000 }).unwrap()
    }

    #[test]
    fn lambda_one_gives_constant_strategy() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&m);
        let q = ProbVector::binary(0.3).unwrap();
        let r = max_weighted_rate(&m, &q, 1.0, &t).unwrap();
        assert_eq!(r.strategy.branches(), 1);
        let mi = m.h_y(q.as_slice()) - m.h_y_given_x(q.as_slice());
        assert_abs_diff_eq!(r.r1, mi, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_zero_bsc_single_user_capacity() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let t = table(&m);
        let r = max_weighted_rate(&m, &ProbVector::uniform(2), 0.0, &t).unwrap();
        assert_abs_diff_eq!(r.r2, 2f64.ln() - h2(0.2), epsilon = 1e-12);
        assert_abs_diff_eq!(r.r1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn z_two_branch_witness() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&m);
        let lambda = 0.5;
        let p = z_p_lambda(0.9, 0.6, lambda).unwrap();
        let q = ProbVector::binary(0.5 * p).unwrap();
        let r = max_weighted_rate(&m, &q, lambda, &t).unwrap();
        let s = r.strategy.pruned(1e-12);
        assert_eq!(s.branches(), 2);
        let i0 = s.columns.iter().position(|c| c[1] == 0.0).expect("noiseless branch");
        assert_abs_diff_eq!(s.weights[i0], 0.5, epsilon = 2e-3);
        let other = &s.columns[1 - i0];
        assert!((other[1] - p).abs() <= 1e-3, "{} vs {p}", other[1]);
    }

    #[test]
    fn psi_identity_holds() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let t = table(&m);
        for l in [0.0, 0.3, 0.5, 0.55, 1.0] {
            for q1 in [0.1, 0.3, 0.5] {
                let q = ProbVector::binary(q1).unwrap();
                let r = max_weighted_rate(&m, &q, l, &t).unwrap();
                let rhs = m.h_z(q.as_slice()) - l * m.h_y_given_x(q.as_slice()) - r.psi;
                assert!((r.weighted() - rhs).abs() <= 1e-8, "λ = {l}, q = {q1}");
                assert!(r.r1 >= -1e-9 && r.r2 >= -1e-9);
            }
        }
    }

    #[test]
    fn identical_receivers_time_share() {
        let b = make_broadcast_bsc(0.1, 0.2).unwrap();
        let m = DbcModel::new(b.t_yx.clone(), b.t_yx.clone(), None).unwrap();
        let t = table(&m);
        let region = trace_region(&m, &lambda_grid(21), &default_q_grid(2), &t, Exec::auto()).unwrap();
        let c = 2f64.ln() - h2(0.1);
        for s in &region.samples {
            assert_abs_diff_eq!(s.r1 + s.r2, c, epsilon = 1e-9);
        }
    }

    #[test]
    fn z_region_endpoints() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&m);
        let region = trace_region(&m, &lambda_grid(41), &default_q_grid(2), &t, Exec::auto()).unwrap();
        let first = &region.samples[0];
        let last = region.samples.last().unwrap();
        assert_abs_diff_eq!(first.r2, z_capacity(0.6), epsilon = 1e-6);
        assert_abs_diff_eq!(first.r1, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(last.r1, z_capacity(0.9), epsilon = 1e-6);
        assert_abs_diff_eq!(last.r2, 0.0, epsilon = 1e-9);
        for w in region.samples.windows(2) {
            assert!(w[1].r1 >= w[0].r1 - 1e-9);
            assert!(w[1].r2 <= w[0].r2 + 1e-9);
        }
    }

    #[test]
    fn worse_second_channel_is_dominated() {
        let good = make_broadcast_bsc(0.1, 0.2).unwrap();
        let bad = make_broadcast_bsc(0.1, 0.3).unwrap();
        let ls = lambda_grid(11);
        let a = trace_region(&good, &ls, &default_q_grid(2), &table(&good), Exec::auto()).unwrap();
        let b = trace_region(&bad, &ls, &default_q_grid(2), &table(&bad), Exec::auto()).unwrap();
        for &l in &ls {
            assert!(a.support(l) >= b.support(l) - 1e-9);
        }
    }

    #[test]
    fn support_reports() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let t = table(&m);
        let lambda = 0.5;
        let p = bsc_p_lambda(0.1, 0.2, lambda).unwrap();
        let pts = [ProbVector::binary(p).unwrap(), ProbVector::binary(1.0 - p).unwrap()];
        let r = strategy_from_support(&m, &ProbVector::uniform(2), lambda, &pts, &[0.5, 0.5], &t).unwrap();
        assert!(r.passes(1e-6), "{r:?}");
        assert!(r.max_dual_violation <= 1e-9);

        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z);
        let p = z_p_lambda(0.9, 0.6, lambda).unwrap();
        let q = 0.4 * p;
        let pts = [ProbVector::binary(0.0).unwrap(), ProbVector::binary(p).unwrap()];
        let r = strategy_from_support(&z, &ProbVector::binary(q).unwrap(), lambda, &pts, &[0.6, 0.4], &t).unwrap();
        assert!(r.passes(1e-6), "{r:?}");

        let q = ProbVector::binary(0.9).unwrap();
        let r = strategy_from_support(&z, &q, lambda, std::slice::from_ref(&q), &[1.0], &t).unwrap();
        assert!(r.residuals[0].abs() <= 1e-12);
        assert!(r.gap <= 1e-12);

        // A wrong support is reported, not rejected.
        let pts = [ProbVector::binary(0.0).unwrap(), ProbVector::binary(1.0).unwrap()];
        let r = strategy_from_support(&z, &ProbVector::binary(0.5).unwrap(), lambda, &pts, &[0.5, 0.5], &t).unwrap();
        assert!(!r.passes(1e-6));
    }

    #[test]
    fn csv_layout() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&m);
        let region = trace_region(&m, &lambda_grid(3), &default_q_grid(2), &t, Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        region.write_csv(&mut buf, Units::Nats).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "lambda,R1_nats,R2_nats,q1,q2,strategy_json");
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        for rec in rd.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), 6);
            let s: TransmissionStrategy = serde_json::from_str(&rec[5]).unwrap();
            assert!(s.branches() >= 1);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let t = table(&m);
        let ls = lambda_grid(9);
        let a = trace_region(&m, &ls, &default_q_grid(2), &t, Exec::Parallel).unwrap();
        let b = trace_region(&m, &ls, &default_q_grid(2), &t, Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
