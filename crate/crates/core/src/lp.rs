//! Revised simplex for `min cᵀx  s.t.  A x = b, x ≥ 0` with few rows and
//! many columns.
//!
//! Columns are pulled on demand through [`ColumnSource`], so a grid with
//! millions of points never has to be stored as a matrix. The basis inverse
//! is dense (`rows × rows`), updated by rank-one pivots and refactored
//! periodically. Pricing is Dantzig with smallest-index ties; after a run of
//! degenerate pivots it falls back to Bland's rule until progress resumes,
//! which rules out cycling.

use crate::error::{DbcError, Result};

/// Lazily evaluated constraint columns.
pub trait ColumnSource {
    fn rows(&self) -> usize;
    fn len(&self) -> usize;
    fn column(&self, j: usize, out: &mut [f64]);
    fn cost(&self, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Column-major dense storage.
#[derive(Debug, Clone)]
pub struct DenseColumns {
    rows: usize,
    data: Vec<f64>,
    costs: Vec<f64>,
}

impl DenseColumns {
    pub fn new(rows: usize) -> Self {
        DenseColumns {
            rows,
            data: Vec::new(),
            costs: Vec::new(),
        }
    }

    pub fn push(&mut self, col: &[f64], cost: f64) {
        assert_eq!(col.len(), self.rows);
        self.data.extend_from_slice(col);
        self.costs.push(cost);
    }
}

impl ColumnSource for DenseColumns {
    fn rows(&self) -> usize {
        self.rows
    }
    fn len(&self) -> usize {
        self.costs.len()
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[j * self.rows..(j + 1) * self.rows]);
    }
    fn cost(&self, j: usize) -> f64 {
        self.costs[j]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_iter: usize,
    /// Phase-one objective above this means infeasible.
    pub feas_tol: f64,
    /// Reduced costs above `-opt_tol` count as nonnegative.
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iter: 100_000,
            feas_tol: 1e-9,
            opt_tol: 1e-11,
            pivot_tol: 1e-11,
            refactor_every: 100,
            bland_after: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Basic structural variables with their values, sorted by index.
    pub x: Vec<(usize, f64)>,
    pub objective: f64,
    /// Simplex multipliers `y = c_B B⁻¹` for the original rows.
    pub duals: Vec<f64>,
    /// Sum of artificial variables at the end of phase one.
    pub infeasibility: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, j: usize) -> f64 {
        self.x
            .iter()
            .find(|(i, _)| *i == j)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn into_result(self) -> Result<LpSolution> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(DbcError::Infeasible(format!(
                "phase one ended with infeasibility {:.3e}",
                self.infeasibility
            ))),
            LpStatus::Unbounded => Err(DbcError::Solver("unbounded objective".into())),
            LpStatus::IterationLimit => Err(DbcError::Solver("iteration limit reached".into())),
        }
    }
}

struct Tableau<'a, S: ColumnSource> {
    src: &'a S,
    r: usize,
    n: usize,
    sign: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    opts: LpOptions,
    iterations: usize,
    col: Vec<f64>,
    alpha: Vec<f64>,
    y: Vec<f64>,
}

impl<'a, S: ColumnSource> Tableau<'a, S> {
    fn new(src: &'a S, b: &[f64], opts: LpOptions) -> Self {
        let r = src.rows();
        let n = src.len();
        let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let bb: Vec<f64> = b.iter().zip(&sign).map(|(v, s)| v * s).collect();
        let mut binv = vec![0.0; r * r];
        for i in 0..r {
            binv[i * r + i] = 1.0;
        }
        let mut is_basic = vec![false; n + r];
        for i in 0..r {
            is_basic[n + i] = true;
        }
        Tableau {
            src,
            r,
            n,
            sign,
            xb: bb.clone(),
            b: bb,
            basis: (n..n + r).collect(),
            is_basic,
            binv,
            opts,
            iterations: 0,
            col: vec![0.0; r],
            alpha: vec![0.0; r],
            y: vec![0.0; r],
        }
    }

    fn load_column(&mut self, var: usize) {
        if var < self.n {
            self.src.column(var, &mut self.col);
            for i in 0..self.r {
                self.col[i] *= self.sign[i];
            }
        } else {
            self.col.iter_mut().for_each(|c| *c = 0.0);
            self.col[var - self.n] = 1.0;
        }
    }

    fn column_of(&self, var: usize, out: &mut [f64]) {
        if var < self.n {
            self.src.column(var, out);
            for i in 0..self.r {
                out[i] *= self.sign[i];
            }
        } else {
            out.iter_mut().for_each(|c| *c = 0.0);
            out[var - self.n] = 1.0;
        }
    }

    fn cost(&self, var: usize, phase1: bool) -> f64 {
        match (phase1, var < self.n) {
            (true, true) => 0.0,
            (true, false) => 1.0,
            (false, true) => self.src.cost(var),
            (false, false) => 0.0,
        }
    }

    fn compute_duals(&mut self, phase1: bool) {
        let r = self.r;
        for i in 0..r {
            let mut acc = 0.0;
            for (row, &bv) in self.basis.iter().enumerate() {
                let c = self.cost(bv, phase1);
                if c != 0.0 {
                    acc += c * self.binv[row * r + i];
                }
            }
            self.y[i] = acc;
        }
    }

    fn compute_alpha(&mut self) {
        let r = self.r;
        for i in 0..r {
            let row = &self.binv[i * r..(i + 1) * r];
            self.alpha[i] = row.iter().zip(&self.col).map(|(a, b)| a * b).sum();
        }
    }

    fn pivot(&mut self, leave: usize, enter: usize) {
        let r = self.r;
        let piv = self.alpha[leave];
        let theta = self.xb[leave] / piv;
        for i in 0..r {
            if i != leave {
                self.xb[i] -= theta * self.alpha[i];
                if self.xb[i] < 0.0 && self.xb[i] > -self.opts.feas_tol {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[leave] = theta.max(0.0);
        for j in 0..r {
            self.binv[leave * r + j] /= piv;
        }
        for i in 0..r {
            if i == leave {
                continue;
            }
            let f = self.alpha[i];
            if f != 0.0 {
                for j in 0..r {
                    self.binv[i * r + j] -= f * self.binv[leave * r + j];
                }
            }
        }
        self.is_basic[self.basis[leave]] = false;
        self.is_basic[enter] = true;
        self.basis[leave] = enter;
        self.iterations += 1;
        if self.iterations.is_multiple_of(self.opts.refactor_every) {
            self.refactor();
        }
    }

    /// Recomputes `B⁻¹` and `x_B` from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) {
        let r = self.r;
        let mut a = vec![0.0; r * r];
        let mut buf = vec![0.0; r];
        for (c, &var) in self.basis.iter().enumerate() {
            self.column_of(var, &mut buf);
            for i in 0..r {
                a[i * r + c] = buf[i];
            }
        }
        let mut inv = vec![0.0; r * r];
        for i in 0..r {
            inv[i * r + i] = 1.0;
        }
        for c in 0..r {
            let mut p = c;
            for i in c + 1..r {
                if a[i * r + c].abs() > a[p * r + c].abs() {
                    p = i;
                }
            }
            if a[p * r + c].abs() < 1e-14 {
                // Numerically singular; keep the product-form inverse.
                return;
            }
            if p != c {
                for j in 0..r {
                    a.swap(p * r + j, c * r + j);
                    inv.swap(p * r + j, c * r + j);
                }
            }
            let d = a[c * r + c];
            for j in 0..r {
                a[c * r + j] /= d;
                inv[c * r + j] /= d;
            }
            for i in 0..r {
                if i != c {
                    let f = a[i * r + c];
                    if f != 0.0 {
                        for j in 0..r {
                            a[i * r + j] -= f * a[c * r + j];
                            inv[i * r + j] -= f * inv[c * r + j];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..r {
            let v: f64 = (0..r).map(|j| self.binv[i * r + j] * self.b[j]).sum();
            self.xb[i] = if v < 0.0 && v > -self.opts.feas_tol { 0.0 } else { v };
        }
    }

    /// Runs simplex iterations for one phase.
    fn run(&mut self, phase1: bool) -> LpStatus {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iter {
                return LpStatus::IterationLimit;
            }
            self.compute_duals(phase1);
            let bland = degenerate_run >= self.opts.bland_after;

            let mut enter = None;
            let mut best = -self.opts.opt_tol;
            let mut buf = vec![0.0; self.r];
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                self.column_of(j, &mut buf);
                let d = self.cost(j, phase1) - self.y.iter().zip(&buf).map(|(a, b)| a * b).sum::<f64>();
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(enter) = enter else {
                return LpStatus::Optimal;
            };

            self.load_column(enter);
            self.compute_alpha();
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.r {
                let a = self.alpha[i];
                if a > self.opts.pivot_tol {
                    let ratio = self.xb[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-13 {
                                true
                            } else if ratio <= best_ratio + 1e-13 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    // Prefer removing artificials, then the larger pivot.
                                    let ai = self.basis[i] >= self.n;
                                    let al = self.basis[l] >= self.n;
                                    (ai && !al) || (ai == al && a > self.alpha[l])
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(leave) = leave else {
                return LpStatus::Unbounded;
            };
            if best_ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(leave, enter);
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(v, _)| **v >= self.n)
            .map(|(_, x)| x.abs())
            .sum()
    }

    /// Pivots zero-level artificials out of the basis where possible. Rows
    /// where no structural column has a usable entry are redundant and keep
    /// their artificial at zero.
    fn drive_out_artificials(&mut self) {
        let r = self.r;
        let mut buf = vec![0.0; r];
        for row in 0..r {
            if self.basis[row] < self.n {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                self.column_of(j, &mut buf);
                let v: f64 = (0..r).map(|i| self.binv[row * r + i] * buf[i]).sum();
                if v.abs() > 1e-8 && best.is_none_or(|(_, b)| v.abs() > b.abs() + 1e-12) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.load_column(j);
                self.compute_alpha();
                self.pivot(row, j);
            }
        }
    }

    fn solution(&mut self, status: LpStatus, infeasibility: f64) -> LpSolution {
        self.compute_duals(false);
        let duals = self.y.iter().zip(&self.sign).map(|(y, s)| y * s).collect();
        let mut x: Vec<(usize, f64)> = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(v, _)| **v < self.n)
            .map(|(v, x)| (*v, x.max(0.0)))
            .collect();
        x.sort_by_key(|(i, _)| *i);
        let objective = x.iter().map(|(j, v)| self.src.cost(*j) * v).sum();
        LpSolution {
            status,
            x,
            objective,
            duals,
            infeasibility,
            iterations: self.iterations,
        }
    }
}

/// Solves `min cᵀx  s.t.  A x = b, x ≥ 0` with a two-phase revised simplex.
///
/// An infeasible problem still returns the phase-one point in `x`, which the
/// caller may inspect.
pub fn solve<S: ColumnSource>(src: &S, b: &[f64], opts: &LpOptions) -> LpSolution {
    assert_eq!(b.len(), src.rows(), "right-hand side length");
    let mut t = Tableau::new(src, b, *opts);
    let st = t.run(true);
    if st != LpStatus::Optimal {
        let inf = t.infeasibility();
        return t.solution(st, inf);
    }
    let inf = t.infeasibility();
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    if inf > opts.feas_tol * scale {
        return t.solution(LpStatus::Infeasible, inf);
    }
    t.drive_out_artificials();
    let st = t.run(false);
    t.solution(st, inf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(cols: &[(&[f64], f64)]) -> DenseColumns {
        let mut d = DenseColumns::new(cols[0].0.len());
        for (c, cost) in cols {
            d.push(c, *cost);
        }
        d
    }

    #[test]
    fn small_standard_form() {
        // min -x1 - 2x2 s.t. x1 + x2 + s1 = 4, x1 + 3x2 + s2 = 6
        let src = lp(&[
            (&[1.0, 1.0], -1.0),
            (&[1.0, 3.0], -2.0),
            (&[1.0, 0.0], 0.0),
            (&[0.0, 1.0], 0.0),
        ]);
        let s = solve(&src, &[4.0, 6.0], &LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective, -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.value(0), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.value(1), 1.0, epsilon = 1e-12);
        // Strong duality: yᵀb equals the objective.
        assert_abs_diff_eq!(s.duals[0] * 4.0 + s.duals[1] * 6.0, -5.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x1 + x2 = 1 and x1 + x2 = 2
        let src = lp(&[(&[1.0, 1.0], 0.0), (&[1.0, 1.0], 0.0)]);
        let s = solve(&src, &[1.0, 2.0], &LpOptions::default());
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.infeasibility > 0.5);
    }

    #[test]
    fn detects_unbounded() {
        let src = lp(&[(&[1.0], -1.0), (&[-1.0], 0.0)]);
        let s = solve(&src, &[1.0], &LpOptions::default());
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // x1 + x2 = 1, 2x1 + 2x2 = 2, -x1 = -0.25
        let src = lp(&[(&[1.0, 2.0, -1.0], 1.0), (&[1.0, 2.0, 0.0], 3.0)]);
        let s = solve(&src, &[1.0, 2.0, -0.25], &LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective, 0.25 + 3.0 * 0.75, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example in equality form with slacks.
        let src = lp(&[
            (&[0.25, 0.5, 0.0], -0.75),
            (&[-60.0, -90.0, 0.0], 150.0),
            (&[-0.04, -0.02, 1.0], -0.02),
            (&[9.0, 3.0, 0.0], 6.0),
            (&[1.0, 0.0, 0.0], 0.0),
            (&[0.0, 1.0, 0.0], 0.0),
            (&[0.0, 0.0, 1.0], 0.0),
        ]);
        let s = solve(&src, &[0.0, 0.0, 1.0], &LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective, -0.05, epsilon = 1e-12);
    }

    #[test]
    fn lower_envelope_of_points() {
        // Convex combination of points on a line: min Σ w f(p) with Σ w p = q.
        let ps = [0.0, 0.25, 0.5, 0.75, 1.0];
        let f = |p: f64| -(p - 0.5).powi(2);
        let mut d = DenseColumns::new(2);
        for &p in &ps {
            d.push(&[1.0 - p, p], f(p));
        }
        let s = solve(&d, &[0.6, 0.4], &LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        // Concave f: envelope is the chord between the endpoints.
        assert_abs_diff_eq!(s.objective, -0.25, epsilon = 1e-12);
        assert!(s.x.len() <= 2);
    }
}
