//! Degraded broadcast channel models and the named channel families.
//!
//! Symbols are 0-based internally. For the binary Z channel, input index 1 is
//! the symbol the channel can corrupt and index 0 passes through noiselessly,
//! so an input law `(1 − q, q)` puts mass `q` on the noisy symbol.

use serde::{Deserialize, Serialize};

use crate::error::{DbcError, Result};
use crate::lp::{self, ColumnSource, LpOptions, LpStatus};
use crate::prob::{ProbVector, StochasticMatrix};

/// Residual allowed between `T_ZX` and `T_ZY · T_YX` for a stored factor.
pub const FACTOR_TOL: f64 = 1e-9;
/// Residual at which a computed degrading channel is accepted.
pub const DEGRADED_TOL: f64 = 1e-7;

/// Cayley table of a finite group on `{0, …, n−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct GroupTable {
    n: usize,
    op: Vec<usize>,
    identity: usize,
}

impl GroupTable {
    /// Validates Latin-square structure, associativity, identity and
    /// inverses exhaustively.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(DbcError::invalid("empty group table"));
        }
        let mut op = Vec::with_capacity(n * n);
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(DbcError::mismatch(n, row.len(), format!("group table row {i}")));
            }
            for &v in row {
                if v >= n {
                    return Err(DbcError::invalid(format!("group table entry {v} out of range")));
                }
            }
            op.extend_from_slice(row);
        }
        let at = |i: usize, j: usize| op[i * n + j];
        for i in 0..n {
            let mut seen_r = vec![false; n];
            let mut seen_c = vec![false; n];
            for j in 0..n {
                seen_r[at(i, j)] = true;
                seen_c[at(j, i)] = true;
            }
            if seen_r.iter().chain(&seen_c).any(|s| !s) {
                return Err(DbcError::invalid("group table is not a Latin square"));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if at(at(a, b), c) != at(a, at(b, c)) {
                        return Err(DbcError::invalid(format!(
                            "group table is not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| at(e, x) == x && at(x, e) == x))
            .ok_or_else(|| DbcError::invalid("group table has no identity"))?;
        for x in 0..n {
            if !(0..n).any(|y| at(x, y) == identity && at(y, x) == identity) {
                return Err(DbcError::invalid(format!("element {x} has no inverse")));
            }
        }
        Ok(GroupTable { n, op, identity })
    }

    /// The cyclic group `Z_n`.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
        GroupTable::from_table(table).expect("cyclic group is valid")
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn op(&self, i: usize, j: usize) -> usize {
        self.op[i * self.n + j]
    }

    /// The shift `G_x` as a permutation array: `G_x(i, j) = 1` iff
    /// `j ⊕ x = i`, so `σ(j) = j ⊕ x`.
    pub fn shift(&self, x: usize) -> Vec<usize> {
        (0..self.n).map(|j| self.op(j, x)).collect()
    }

    /// `Σ_x noise[x] · G_x`.
    pub fn additive_matrix(&self, noise: &ProbVector) -> Result<StochasticMatrix> {
        if noise.dim() != self.n {
            return Err(DbcError::mismatch(self.n, noise.dim(), "noise vs group order"));
        }
        let mut rows = vec![vec![0.0; self.n]; self.n];
        for x in 0..self.n {
            for j in 0..self.n {
                rows[self.op(j, x)][j] += noise[x];
            }
        }
        StochasticMatrix::from_rows_tol("group-additive", &rows, 1e-12)
    }
}

impl TryFrom<Vec<Vec<usize>>> for GroupTable {
    type Error = DbcError;
    fn try_from(t: Vec<Vec<usize>>) -> Result<Self> {
        GroupTable::from_table(t)
    }
}

impl From<GroupTable> for Vec<Vec<usize>> {
    fn from(g: GroupTable) -> Self {
        (0..g.n).map(|i| (0..g.n).map(|j| g.op(i, j)).collect()).collect()
    }
}

/// Multiplication on `{0, 1, …, n}`: zero absorbs and the nonzero elements
/// form a group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct MultTable {
    nonzero: GroupTable,
}

impl MultTable {
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let size = table.len();
        if size < 2 {
            return Err(DbcError::invalid("multiplication table needs at least {0, 1}"));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != size {
                return Err(DbcError::mismatch(size, row.len(), format!("mult table row {i}")));
            }
            if row[0] != 0 || table[0][i] != 0 {
                return Err(DbcError::invalid("zero must absorb in a multiplication table"));
            }
        }
        let mut sub = Vec::with_capacity(size - 1);
        for row in table.iter().skip(1) {
            let mut r = Vec::with_capacity(size - 1);
            for &v in row.iter().skip(1) {
                if v == 0 || v >= size {
                    return Err(DbcError::invalid("nonzero product is zero or out of range"));
                }
                r.push(v - 1);
            }
            sub.push(r);
        }
        Ok(MultTable {
            nonzero: GroupTable::from_table(sub)?,
        })
    }

    /// Multiplication modulo a prime `p`, i.e. `GF(p)`.
    pub fn gf_prime(p: usize) -> Result<Self> {
        if p < 2 || (2..p).any(|d| p.is_multiple_of(d)) {
            return Err(DbcError::invalid(format!("{p} is not prime")));
        }
        MultTable::from_table((0..p).map(|i| (0..p).map(|j| (i * j) % p).collect()).collect())
    }

    /// Number of nonzero symbols.
    pub fn n(&self) -> usize {
        self.nonzero.order()
    }

    pub fn nonzero_group(&self) -> &GroupTable {
        &self.nonzero
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        if a == 0 || b == 0 {
            0
        } else {
            self.nonzero.op(a - 1, b - 1) + 1
        }
    }
}

impl TryFrom<Vec<Vec<usize>>> for MultTable {
    type Error = DbcError;
    fn try_from(t: Vec<Vec<usize>>) -> Result<Self> {
        MultTable::from_table(t)
    }
}

impl From<MultTable> for Vec<Vec<usize>> {
    fn from(m: MultTable) -> Self {
        let s = m.n() + 1;
        (0..s).map(|i| (0..s).map(|j| m.mul(i, j)).collect()).collect()
    }
}

/// Parameters of a named family, kept so that closed forms can be used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Bsc {
        alpha1: f64,
        alpha2: f64,
    },
    Z {
        alpha1: f64,
        alpha2: f64,
    },
    Bec {
        a1: f64,
        a2: f64,
    },
    GroupAdditive {
        table: GroupTable,
        noise1: Vec<f64>,
        noise2: Vec<f64>,
    },
    Multiplicative {
        table: MultTable,
        alpha1: f64,
        alpha_delta: f64,
        sub_noise1: Vec<f64>,
        sub_noise2: Vec<f64>,
    },
}

/// A pair `(T_YX, T_ZX)` with an optional degrading factor `T_ZY`.
#[derive(Debug, Clone, PartialEq)]
pub struct DbcModel {
    pub t_yx: StochasticMatrix,
    pub t_zx: StochasticMatrix,
    pub t_zy: Option<StochasticMatrix>,
    pub family: Option<Family>,
}

impl DbcModel {
    pub fn new(
        t_yx: StochasticMatrix,
        t_zx: StochasticMatrix,
        t_zy: Option<StochasticMatrix>,
    ) -> Result<Self> {
        if t_yx.cols() != t_zx.cols() {
            return Err(DbcError::mismatch(t_yx.cols(), t_zx.cols(), "input alphabet of T_ZX"));
        }
        if let Some(f) = &t_zy {
            if f.cols() != t_yx.rows() {
                return Err(DbcError::mismatch(t_yx.rows(), f.cols(), "T_ZY columns vs |Y|"));
            }
            if f.rows() != t_zx.rows() {
                return Err(DbcError::mismatch(t_zx.rows(), f.rows(), "T_ZY rows vs |Z|"));
            }
            let r = f.mul(&t_yx)?.max_abs_diff(&t_zx);
            if r > FACTOR_TOL {
                return Err(DbcError::invalid(format!(
                    "T_ZX differs from T_ZY·T_YX by {r:.3e}"
                )));
            }
        }
        Ok(DbcModel {
            t_yx,
            t_zx,
            t_zy,
            family: None,
        })
    }

    /// Builds the model from a degrading factor, setting `T_ZX = T_ZY·T_YX`.
    pub fn from_factor(t_yx: StochasticMatrix, t_zy: StochasticMatrix) -> Result<Self> {
        let t_zx = t_zy.mul(&t_yx)?;
        DbcModel::new(t_yx, t_zx, Some(t_zy))
    }

    pub fn with_family(mut self, f: Family) -> Self {
        self.family = Some(f);
        self
    }

    /// Input alphabet size.
    pub fn k(&self) -> usize {
        self.t_yx.cols()
    }

    pub fn n(&self) -> usize {
        self.t_yx.rows()
    }

    pub fn m(&self) -> usize {
        self.t_zx.rows()
    }

    pub fn check_input(&self, q: &ProbVector) -> Result<()> {
        if q.dim() != self.k() {
            return Err(DbcError::mismatch(self.k(), q.dim(), "input distribution"));
        }
        Ok(())
    }

    /// `H(Y)` for input law `q`.
    pub fn h_y(&self, q: &[f64]) -> f64 {
        self.t_yx.output_entropy(q)
    }

    pub fn h_z(&self, q: &[f64]) -> f64 {
        self.t_zx.output_entropy(q)
    }

    /// `H(Y|X)` for input law `q`.
    pub fn h_y_given_x(&self, q: &[f64]) -> f64 {
        (0..self.k())
            .map(|i| q[i] * crate::prob::h_slice(&self.t_yx.column(i)))
            .sum()
    }

    pub fn h_z_given_x(&self, q: &[f64]) -> f64 {
        (0..self.k())
            .map(|i| q[i] * crate::prob::h_slice(&self.t_zx.column(i)))
            .sum()
    }

    /// Swaps in `T_ZX = T_YX` style comparisons: true when both receivers see
    /// the same channel.
    pub fn receivers_identical(&self) -> bool {
        self.t_yx.max_abs_diff(&self.t_zx) <= FACTOR_TOL
    }
}

fn bsc_matrix(a: f64) -> Result<StochasticMatrix> {
    StochasticMatrix::from_rows("BSC", &[vec![1.0 - a, a], vec![a, 1.0 - a]])
}

fn z_matrix(a: f64) -> Result<StochasticMatrix> {
    StochasticMatrix::from_rows("Z", &[vec![1.0, a], vec![0.0, 1.0 - a]])
}

fn bec_matrix(a: f64) -> Result<StochasticMatrix> {
    StochasticMatrix::from_rows(
        "BEC",
        &[vec![1.0 - a, 0.0], vec![a, a], vec![0.0, 1.0 - a]],
    )
}

/// Broadcast binary symmetric channel with crossover `α1 ≤ α2 < 1/2`.
pub fn make_broadcast_bsc(alpha1: f64, alpha2: f64) -> Result<DbcModel> {
    if !(alpha1 > 0.0 && alpha1 <= alpha2 && alpha2 < 0.5) {
        return Err(DbcError::invalid(format!(
            "broadcast BSC needs 0 < α1 ≤ α2 < 1/2, got α1 = {alpha1}, α2 = {alpha2}"
        )));
    }
    let ad = (alpha2 - alpha1) / (1.0 - 2.0 * alpha1);
    let t_yx = bsc_matrix(alpha1)?;
    let t_zx = bsc_matrix(alpha2)?;
    let t_zy = bsc_matrix(ad)?;
    Ok(DbcModel::new(t_yx, t_zx, Some(t_zy))?.with_family(Family::Bsc { alpha1, alpha2 }))
}

/// Broadcast Z channel. `α` is the probability that the noisy input is
/// flipped onto the noiseless output; `β = 1 − α`.
pub fn make_broadcast_z(alpha1: f64, alpha2: f64) -> Result<DbcModel> {
    if !(alpha1 > 0.0 && alpha1 <= alpha2 && alpha2 < 1.0) {
        return Err(DbcError::invalid(format!(
            "broadcast Z needs 0 < α1 ≤ α2 < 1, got α1 = {alpha1}, α2 = {alpha2}"
        )));
    }
    let ad = (alpha2 - alpha1) / (1.0 - alpha1);
    let t_yx = z_matrix(alpha1)?;
    let t_zx = z_matrix(alpha2)?;
    let t_zy = z_matrix(ad)?;
    Ok(DbcModel::new(t_yx, t_zx, Some(t_zy))?.with_family(Family::Z { alpha1, alpha2 }))
}

/// Broadcast binary erasure channel with erasure probabilities `a1 ≤ a2`.
/// Outputs are ordered `(0, erasure, 1)`.
pub fn make_broadcast_bec(a1: f64, a2: f64) -> Result<DbcModel> {
    if !(0.0 <= a1 && a1 <= a2 && a2 <= 1.0) {
        return Err(DbcError::invalid(format!(
            "broadcast BEC needs 0 ≤ a1 ≤ a2 ≤ 1, got a1 = {a1}, a2 = {a2}"
        )));
    }
    let t_yx = bec_matrix(a1)?;
    let t_zx = bec_matrix(a2)?;
    // Erase a surviving symbol with probability e, keep erasures.
    let e = if a1 < 1.0 { (a2 - a1) / (1.0 - a1) } else { 0.0 };
    let t_zy = StochasticMatrix::from_rows(
        "T_ZY",
        &[
            vec![1.0 - e, 0.0, 0.0],
            vec![e, 1.0, e],
            vec![0.0, 0.0, 1.0 - e],
        ],
    )?;
    Ok(DbcModel::new(t_yx, t_zx, Some(t_zy))?.with_family(Family::Bec { a1, a2 }))
}

/// `Y = X ⊕ N1`, `Z = Y ⊕ N2`.
pub fn make_group_additive(
    group: &GroupTable,
    noise1: &ProbVector,
    noise2: &ProbVector,
) -> Result<DbcModel> {
    let t_yx = group.additive_matrix(noise1)?;
    let t_zy = group.additive_matrix(noise2)?;
    Ok(DbcModel::from_factor(t_yx, t_zy)?.with_family(Family::GroupAdditive {
        table: group.clone(),
        noise1: noise1.as_slice().to_vec(),
        noise2: noise2.as_slice().to_vec(),
    }))
}

fn multiplicative_block(alpha: f64, sub: &StochasticMatrix) -> Result<StochasticMatrix> {
    let n = sub.cols();
    let mut rows = vec![vec![0.0; n + 1]; n + 1];
    rows[0][0] = 1.0;
    for i in 1..=n {
        rows[0][i] = alpha;
        for j in 1..=n {
            rows[j][i] = (1.0 - alpha) * sub.get(j - 1, i - 1);
        }
    }
    StochasticMatrix::from_rows_tol("multiplicative", &rows, 1e-12)
}

/// `Y = X ⊗ N1`, `Z = Y ⊗ N2` where `N1` is zero with probability `α1` and
/// otherwise distributed as `sub_noise1` over the nonzero group (likewise
/// `N2` with `α_Δ`).
pub fn make_multiplicative(
    mult: &MultTable,
    alpha1: f64,
    alpha_delta: f64,
    sub_noise1: &ProbVector,
    sub_noise2: &ProbVector,
) -> Result<DbcModel> {
    if !(0.0..1.0).contains(&alpha1) || !(0.0..1.0).contains(&alpha_delta) {
        return Err(DbcError::invalid("α1 and α_Δ must lie in [0, 1)"));
    }
    let g = mult.nonzero_group();
    let sub_yx = g.additive_matrix(sub_noise1)?;
    let sub_zy = g.additive_matrix(sub_noise2)?;
    let t_yx = multiplicative_block(alpha1, &sub_yx)?;
    let t_zy = multiplicative_block(alpha_delta, &sub_zy)?;
    Ok(DbcModel::from_factor(t_yx, t_zy)?.with_family(Family::Multiplicative {
        table: mult.clone(),
        alpha1,
        alpha_delta,
        sub_noise1: sub_noise1.as_slice().to_vec(),
        sub_noise2: sub_noise2.as_slice().to_vec(),
    }))
}

/// Outcome of [`validate_dbc`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub stochastic: bool,
    pub dimensions_consistent: bool,
    pub factor_residual: Option<f64>,
    pub degraded: bool,
    pub messages: Vec<String>,
}

/// Checks dimensions, stochasticity and the stored factorization. When no
/// factor is stored, searches for one.
pub fn validate_dbc(model: &DbcModel) -> ValidationReport {
    let mut messages = Vec::new();
    let mut stochastic = true;
    for (name, t) in [("T_YX", &model.t_yx), ("T_ZX", &model.t_zx)]
        .into_iter()
        .chain(model.t_zy.as_ref().map(|t| ("T_ZY", t)))
    {
        for i in 0..t.cols() {
            let s: f64 = t.column(i).iter().sum();
            if (s - 1.0).abs() > crate::prob::SUM_TOL {
                stochastic = false;
                messages.push(format!("{name}: column {i} sums to {s}"));
            }
        }
    }
    let dims = model.t_yx.cols() == model.t_zx.cols()
        && model
            .t_zy
            .as_ref()
            .is_none_or(|f| f.cols() == model.n() && f.rows() == model.m());
    if !dims {
        messages.push("inconsistent alphabet sizes".into());
    }
    let (factor_residual, degraded) = match &model.t_zy {
        Some(f) => {
            let r = f
                .mul(&model.t_yx)
                .map(|p| p.max_abs_diff(&model.t_zx))
                .unwrap_or(f64::INFINITY);
            if r > FACTOR_TOL {
                messages.push(format!("T_ZY·T_YX differs from T_ZX by {r:.3e}"));
            }
            (Some(r), r <= FACTOR_TOL)
        }
        None => {
            let d = find_degrading_channel(&model.t_yx, &model.t_zx);
            if d.factor.is_none() {
                messages.push("no degrading channel found".into());
            }
            (Some(d.residual), d.factor.is_some())
        }
    };
    ValidationReport {
        k: model.k(),
        n: model.n(),
        m: model.m(),
        stochastic,
        dimensions_consistent: dims,
        factor_residual,
        degraded: stochastic && dims && degraded,
        messages,
    }
}

/// Result of searching for `T_ZY` with `T_ZY · T_YX = T_ZX`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradingSearch {
    pub factor: Option<StochasticMatrix>,
    /// Largest entrywise residual of the best candidate found.
    pub residual: f64,
}

struct FactorLp<'a> {
    t_yx: &'a StochasticMatrix,
    m: usize,
    n: usize,
    k: usize,
}

impl ColumnSource for FactorLp<'_> {
    fn rows(&self) -> usize {
        self.n + self.m * self.k
    }
    fn len(&self) -> usize {
        self.m * self.n
    }
    // Variable v = b·m + a is T_ZY(a, b).
    fn column(&self, v: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let (b, a) = (v / self.m, v % self.m);
        out[b] = 1.0;
        for i in 0..self.k {
            out[self.n + a * self.k + i] = self.t_yx.get(b, i);
        }
    }
    fn cost(&self, _: usize) -> f64 {
        0.0
    }
}

/// Solves the linear feasibility problem over column-stochastic `T_ZY`.
/// A factor is returned only when its residual is at most `1e-7`.
pub fn find_degrading_channel(t_yx: &StochasticMatrix, t_zx: &StochasticMatrix) -> DegradingSearch {
    if t_yx.cols() != t_zx.cols() {
        return DegradingSearch {
            factor: None,
            residual: f64::INFINITY,
        };
    }
    let (n, m, k) = (t_yx.rows(), t_zx.rows(), t_yx.cols());
    let src = FactorLp { t_yx, m, n, k };
    let mut b = vec![1.0; n];
    for a in 0..m {
        for i in 0..k {
            b.push(t_zx.get(a, i));
        }
    }
    let sol = lp::solve(&src, &b, &LpOptions::default());
    let mut cols = vec![vec![0.0; m]; n];
    for &(v, x) in &sol.x {
        cols[v / m][v % m] = x;
    }
    // Columns of the phase-one point may not sum to one when infeasible.
    for c in &mut cols {
        let s: f64 = c.iter().sum();
        if s > 0.0 {
            c.iter_mut().for_each(|x| *x /= s);
        } else {
            c.iter_mut().for_each(|x| *x = 1.0 / m as f64);
        }
    }
    let factor = match StochasticMatrix::from_columns("T_ZY", &cols) {
        Ok(f) => f,
        Err(_) => {
            return DegradingSearch {
                factor: None,
                residual: f64::INFINITY,
            }
        }
    };
    let residual = factor
        .mul(t_yx)
        .map(|p| p.max_abs_diff(t_zx))
        .unwrap_or(f64::INFINITY);
    let ok = sol.status == LpStatus::Optimal && residual <= DEGRADED_TOL;
    DegradingSearch {
        factor: ok.then_some(factor),
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bsc_pair_is_valid() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let r = validate_dbc(&m);
        assert!(r.degraded, "{r:?}");
        // α2 = α1(1−α_Δ) + (1−α1)α_Δ with α_Δ = 0.125.
        let ad = 0.1 / 0.8;
        assert_abs_diff_eq!(0.1 * (1.0 - ad) + 0.9 * ad, 0.2, epsilon = 1e-15);
        assert!(r.factor_residual.unwrap() < 1e-15);
    }

    #[test]
    fn z_pair_layout() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        assert_eq!(m.t_yx.to_rows(), vec![vec![1.0, 0.1], vec![0.0, 0.9]]);
        assert_abs_diff_eq!(m.t_zx.get(0, 1), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(m.t_zx.get(1, 1), 0.6, epsilon = 1e-15);
        let f = m.t_zy.as_ref().unwrap();
        assert_abs_diff_eq!(f.get(0, 1), 1.0 / 3.0, epsilon = 1e-15);
        assert!(validate_dbc(&m).degraded);
    }

    #[test]
    fn bad_column_is_named() {
        let e = StochasticMatrix::from_rows("T_YX", &[vec![0.5, 1.0], vec![0.4, 0.0]]).unwrap_err();
        assert!(e.to_string().contains("column 0"));
    }

    #[test]
    fn degrading_channel_recovered_for_z() {
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let d = find_degrading_channel(&m.t_yx, &m.t_zx);
        let f = d.factor.expect("Z pair is degraded");
        assert_abs_diff_eq!(f.get(0, 1), 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.get(0, 0), 1.0, epsilon = 1e-9);
        assert!(d.residual <= DEGRADED_TOL);
    }

    #[test]
    fn identity_factor_for_equal_receivers() {
        let m = make_broadcast_bsc(0.15, 0.15).unwrap();
        assert!(m.receivers_identical());
        let d = find_degrading_channel(&m.t_yx, &m.t_zx);
        let f = d.factor.unwrap();
        assert!(f.max_abs_diff(&StochasticMatrix::identity(2)) < 1e-9);
    }

    #[test]
    fn reversed_pair_is_infeasible() {
        let better = make_broadcast_bsc(0.1, 0.1).unwrap().t_yx;
        let worse = make_broadcast_bsc(0.2, 0.2).unwrap().t_yx;
        let d = find_degrading_channel(&worse, &better);
        assert!(d.factor.is_none());
        assert!(d.residual > DEGRADED_TOL);
    }

    #[test]
    fn constructors_reject_bad_order() {
        assert!(make_broadcast_bsc(0.2, 0.1).is_err());
        assert!(make_broadcast_z(0.5, 0.4).is_err());
        assert!(make_broadcast_bec(0.6, 0.5).is_err());
        let b = make_broadcast_bsc(0.2, 0.2).unwrap();
        assert_eq!(b.t_yx, b.t_zx);
    }

    #[test]
    fn bec_layout_and_factor() {
        let m = make_broadcast_bec(0.3, 0.5).unwrap();
        assert_eq!(m.n(), 3);
        assert_abs_diff_eq!(m.t_zx.get(1, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.t_zx.get(2, 1), 0.5, epsilon = 1e-15);
        assert!(validate_dbc(&m).degraded);
    }

    #[test]
    fn group_additive_circulant() {
        let g = GroupTable::cyclic(3);
        let n1 = ProbVector::new(vec![0.8, 0.1, 0.1]).unwrap();
        let n2 = ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let m = make_group_additive(&g, &n1, &n2).unwrap();
        for t in [&m.t_yx, &m.t_zx] {
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(t.get((j + 1) % 3, (i + 1) % 3), t.get(j, i), epsilon = 1e-15);
                }
            }
        }
        // T G_x = G_x T for every shift.
        for x in 0..3 {
            let s = g.shift(x);
            let tg = m.t_yx.permute_columns(&s);
            for j in 0..3 {
                for i in 0..3 {
                    // (G_x T)(j, i) = T(σ⁻¹(j), i)
                    let sj = (0..3).find(|&r| s[r] == j).unwrap();
                    assert_abs_diff_eq!(tg.get(j, i), m.t_yx.get(sj, i), epsilon = 1e-12);
                }
            }
        }
        let id = make_group_additive(&g, &ProbVector::vertex(3, 0), &n2).unwrap();
        assert_eq!(id.t_yx, StochasticMatrix::identity(3));
    }

    #[test]
    fn z2_group_gives_bsc() {
        let g = GroupTable::cyclic(2);
        let m = make_group_additive(
            &g,
            &ProbVector::new(vec![0.9, 0.1]).unwrap(),
            &ProbVector::new(vec![0.875, 0.125]).unwrap(),
        )
        .unwrap();
        let b = make_broadcast_bsc(0.1, 0.2).unwrap();
        assert!(m.t_yx.max_abs_diff(&b.t_yx) < 1e-15);
        assert!(m.t_zx.max_abs_diff(&b.t_zx) < 1e-15);
    }

    #[test]
    fn group_table_checks() {
        assert!(GroupTable::from_table(vec![vec![0, 1], vec![1, 1]]).is_err());
        assert!(GroupTable::from_table(vec![vec![1, 0], vec![0, 1]]).is_ok());
        // Latin square without associativity.
        let bad = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(GroupTable::from_table(bad).is_err());
        assert!(MultTable::gf_prime(4).is_err());
        assert!(MultTable::from_table(vec![vec![0, 0], vec![1, 1]]).is_err());
    }

    #[test]
    fn multiplicative_binary_is_z() {
        let mt = MultTable::gf_prime(2).unwrap();
        let one = ProbVector::new(vec![1.0]).unwrap();
        let m = make_multiplicative(&mt, 0.1, 1.0 / 3.0, &one, &one).unwrap();
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        assert!(m.t_yx.max_abs_diff(&z.t_yx) < 1e-15);
        assert!(m.t_zx.max_abs_diff(&z.t_zx) < 1e-12);
    }

    #[test]
    fn multiplicative_gf3() {
        let mt = MultTable::gf_prime(3).unwrap();
        let s1 = ProbVector::new(vec![0.8, 0.2]).unwrap();
        let s2 = ProbVector::new(vec![0.7, 0.3]).unwrap();
        let m = make_multiplicative(&mt, 0.1, 0.2, &s1, &s2).unwrap();
        assert_abs_diff_eq!(m.t_zx.get(0, 1), 0.28, epsilon = 1e-15);
        assert_abs_diff_eq!(m.t_zx.get(0, 2), 0.28, epsilon = 1e-15);
        assert_abs_diff_eq!(m.t_zx.get(0, 0), 1.0, epsilon = 1e-15);
        let id = make_multiplicative(&mt, 0.0, 0.2, &ProbVector::vertex(2, 0), &s2).unwrap();
        assert_eq!(id.t_yx, StochasticMatrix::identity(3));
        assert!(validate_dbc(&m).degraded);
    }
}
