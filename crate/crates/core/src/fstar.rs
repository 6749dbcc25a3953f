//! The conditional entropy bound `F*(q, s)`, the function
//! `φ(p, λ) = H(T_ZX p) − λ H(T_YX p)` and its lower convex envelope
//! `ψ(q, λ)`.
//!
//! Both `ψ` and `F*` are evaluated as linear programs whose columns are the
//! points of a [`SimplexGrid`] (plus `q` itself). A basic optimal solution
//! is directly a transmission strategy: weights are the LP values and the
//! conditional input laws are the grid points. Discretization makes the
//! primal value an upper bound that converges as `O(1/m)` away from the
//! simplex boundary; vertices are grid points, so the endpoint values are
//! exact.

use serde::Serialize;

use crate::channel::DbcModel;
use crate::error::{DbcError, Result};
use crate::lp::{self, ColumnSource, LpOptions, LpStatus};
use crate::par::Exec;
use crate::prob::{
    conditional_entropy_given_strategy, DetRng, ProbVector, SimplexGrid, StochasticMatrix,
    TransmissionStrategy,
};

/// Slack allowed when `s` lies just outside `[H(Y|X), H(Y)]`.
pub const S_CLAMP_TOL: f64 = 1e-9;

/// `φ(p, λ) = h_m(T_ZX p) − λ h_n(T_YX p)`.
pub fn phi(model: &DbcModel, p: &[f64], lambda: f64) -> f64 {
    model.h_z(p) - lambda * model.h_y(p)
}

/// A candidate conditional input law with its output entropies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportPoint {
    pub point: Vec<f64>,
    pub xi: f64,
    pub eta: f64,
}

impl SupportPoint {
    pub fn new(model: &DbcModel, p: &[f64]) -> Self {
        SupportPoint {
            point: p.to_vec(),
            xi: model.h_y(p),
            eta: model.h_z(p),
        }
    }
}

/// Grid points with precomputed `ξ = H(T_YX p)` and `η = H(T_ZX p)`.
#[derive(Debug, Clone)]
pub struct EnvelopeTable {
    k: usize,
    grid: Option<SimplexGrid>,
    points: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
}

impl EnvelopeTable {
    pub fn new(model: &DbcModel, grid: SimplexGrid) -> Result<Self> {
        Self::new_with(model, grid, Exec::auto())
    }

    pub fn new_with(model: &DbcModel, grid: SimplexGrid, exec: Exec) -> Result<Self> {
        if grid.k != model.k() {
            return Err(DbcError::mismatch(model.k(), grid.k, "grid dimension"));
        }
        let mut t = Self::from_flat(model, grid.points_flat(), exec);
        t.grid = Some(grid);
        Ok(t)
    }

    /// Table over arbitrary points, flattened with stride `k`.
    pub fn from_flat(model: &DbcModel, points: Vec<f64>, exec: Exec) -> Self {
        let k = model.k();
        let n = points.len() / k;
        let vals = exec.map_range(n, |g| {
            let p = &points[g * k..(g + 1) * k];
            (model.h_y(p), model.h_z(p))
        });
        let (xi, eta) = vals.into_iter().unzip();
        EnvelopeTable {
            k,
            grid: None,
            points,
            xi,
            eta,
        }
    }

    /// Default grid for the model's input size.
    pub fn default_for(model: &DbcModel) -> Result<Self> {
        Self::new(model, SimplexGrid::default_for(model.k()))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> Option<SimplexGrid> {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    #[inline]
    pub fn point(&self, g: usize) -> &[f64] {
        &self.points[g * self.k..(g + 1) * self.k]
    }

    #[inline]
    pub fn xi(&self, g: usize) -> f64 {
        self.xi[g]
    }

    #[inline]
    pub fn eta(&self, g: usize) -> f64 {
        self.eta[g]
    }
}

struct Columns<'a> {
    table: &'a EnvelopeTable,
    extra: &'a [SupportPoint],
}

impl Columns<'_> {
    fn len(&self) -> usize {
        self.table.len() + self.extra.len()
    }

    #[inline]
    fn get(&self, j: usize) -> (&[f64], f64, f64) {
        let n = self.table.len();
        if j < n {
            (self.table.point(j), self.table.xi(j), self.table.eta(j))
        } else {
            let e = &self.extra[j - n];
            (&e.point, e.xi, e.eta)
        }
    }

    fn strategy(&self, x: &[(usize, f64)]) -> Option<TransmissionStrategy> {
        let mut weights = Vec::new();
        let mut columns = Vec::new();
        for &(j, w) in x {
            if j < self.len() && w > 1e-15 {
                weights.push(w);
                columns.push(self.get(j).0.to_vec());
            }
        }
        let s: f64 = weights.iter().sum();
        if weights.is_empty() || s <= 0.0 {
            return None;
        }
        weights.iter_mut().for_each(|w| *w /= s);
        Some(TransmissionStrategy { weights, columns })
    }
}

struct PsiSource<'a> {
    cols: Columns<'a>,
    lambda: f64,
}

impl ColumnSource for PsiSource<'_> {
    fn rows(&self) -> usize {
        self.cols.table.k()
    }
    fn len(&self) -> usize {
        self.cols.len()
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        out.copy_from_slice(self.cols.get(j).0);
    }
    fn cost(&self, j: usize) -> f64 {
        let (_, xi, eta) = self.cols.get(j);
        eta - self.lambda * xi
    }
}

/// Rows: `Σ w p = q` and `Σ w (η − λξ) + t = bound`; cost `ξ`. The last
/// column is the slack `t`.
struct TieSource<'a> {
    cols: Columns<'a>,
    lambda: f64,
}

impl ColumnSource for TieSource<'_> {
    fn rows(&self) -> usize {
        self.cols.table.k() + 1
    }
    fn len(&self) -> usize {
        self.cols.len() + 1
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        let k = self.cols.table.k();
        if j == self.cols.len() {
            out.iter_mut().for_each(|x| *x = 0.0);
            out[k] = 1.0;
        } else {
            let (p, xi, eta) = self.cols.get(j);
            out[..k].copy_from_slice(p);
            out[k] = eta - self.lambda * xi;
        }
    }
    fn cost(&self, j: usize) -> f64 {
        if j == self.cols.len() {
            0.0
        } else {
            self.cols.get(j).1
        }
    }
}

/// Rows: `Σ w p = q` and `Σ w ξ − t = s`. The last column is the surplus `t`.
struct PrimalSource<'a> {
    cols: Columns<'a>,
}

impl ColumnSource for PrimalSource<'_> {
    fn rows(&self) -> usize {
        self.cols.table.k() + 1
    }
    fn len(&self) -> usize {
        self.cols.len() + 1
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        let k = self.cols.table.k();
        if j == self.cols.len() {
            out.iter_mut().for_each(|x| *x = 0.0);
            out[k] = -1.0;
        } else {
            let (p, xi, _) = self.cols.get(j);
            out[..k].copy_from_slice(p);
            out[k] = xi;
        }
    }
    fn cost(&self, j: usize) -> f64 {
        if j == self.cols.len() {
            0.0
        } else {
            self.cols.get(j).2
        }
    }
}

/// `ψ(q, λ)` with a witness strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiResult {
    pub lambda: f64,
    pub value: f64,
    pub strategy: TransmissionStrategy,
    /// Coefficients of the supporting affine function `ℓ(p) = Σ y_i p_i`.
    pub duals: Vec<f64>,
    /// `H(Y|U)` and `H(Z|U)` of the witness.
    pub xi: f64,
    pub eta: f64,
}

fn strategy_entropies(model: &DbcModel, s: &TransmissionStrategy) -> (f64, f64) {
    let xi = conditional_entropy_given_strategy(&model.t_yx, s).unwrap_or(f64::NAN);
    let eta = conditional_entropy_given_strategy(&model.t_zx, s).unwrap_or(f64::NAN);
    (xi, eta)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(-1e-12..=1.0 + 1e-12).contains(&lambda) {
        return Err(DbcError::domain("λ", lambda, 0.0, 1.0));
    }
    Ok(())
}

/// Lower convex envelope of `φ(·, λ)` at `q`, as the LP
/// `min Σ w_g φ(p_g, λ)  s.t.  Σ w_g p_g = q`.
pub fn psi(model: &DbcModel, q: &ProbVector, lambda: f64, table: &EnvelopeTable) -> Result<PsiResult> {
    psi_with_points(model, q, lambda, table, &[])
}

/// [`psi`] with additional candidate columns.
pub fn psi_with_points(
    model: &DbcModel,
    q: &ProbVector,
    lambda: f64,
    table: &EnvelopeTable,
    extra: &[SupportPoint],
) -> Result<PsiResult> {
    model.check_input(q)?;
    check_lambda(lambda)?;
    if table.k() != model.k() {
        return Err(DbcError::mismatch(model.k(), table.k(), "envelope table"));
    }
    let mut all = Vec::with_capacity(extra.len() + 1);
    all.push(SupportPoint::new(model, q.as_slice()));
    all.extend_from_slice(extra);
    let src = PsiSource {
        cols: Columns { table, extra: &all },
        lambda,
    };
    let sol = lp::solve(&src, q.as_slice(), &LpOptions::default());
    if sol.status != LpStatus::Optimal {
        return Err(sol.into_result().unwrap_err());
    }
    let phi_q = phi(model, q.as_slice(), lambda);
    let strategy = if phi_q <= sol.objective + 1e-12 {
        TransmissionStrategy::constant(q)
    } else {
        src.cols
            .strategy(&sol.x)
            .ok_or_else(|| DbcError::Solver("empty ψ witness".into()))?
    };
    let (xi, eta) = strategy_entropies(model, &strategy);
    Ok(PsiResult {
        lambda,
        value: sol.objective.min(phi_q),
        strategy,
        duals: sol.duals,
        xi,
        eta,
    })
}

/// Among strategies within `tol` of `ψ(q, λ)`, one with the smallest
/// `H(Y|U)`. Resolves ties such as `λ = 0`, where many strategies reach
/// `min H(Z|U)`.
pub fn psi_min_xi(
    model: &DbcModel,
    q: &ProbVector,
    lambda: f64,
    table: &EnvelopeTable,
    psi_value: f64,
    tol: f64,
) -> Result<PsiResult> {
    model.check_input(q)?;
    check_lambda(lambda)?;
    let extra = [SupportPoint::new(model, q.as_slice())];
    let src = TieSource {
        cols: Columns {
            table,
            extra: &extra,
        },
        lambda,
    };
    let mut b = q.as_slice().to_vec();
    b.push(psi_value + tol);
    let sol = lp::solve(&src, &b, &LpOptions::default());
    if sol.status != LpStatus::Optimal {
        return Err(sol.into_result().unwrap_err());
    }
    let strategy = src
        .cols
        .strategy(&sol.x)
        .ok_or_else(|| DbcError::Solver("empty ψ witness".into()))?;
    let (xi, eta) = strategy_entropies(model, &strategy);
    Ok(PsiResult {
        lambda,
        value: eta - lambda * xi,
        strategy,
        duals: sol.duals[..model.k()].to_vec(),
        xi,
        eta,
    })
}

/// `ψ(q, λ)` over a list of `λ` values.
pub fn psi_sweep(
    model: &DbcModel,
    q: &ProbVector,
    lambdas: &[f64],
    table: &EnvelopeTable,
    exec: Exec,
) -> Result<Vec<PsiResult>> {
    exec.map(lambdas, |&l| psi(model, q, l, table))
        .into_iter()
        .collect()
}

/// `n` equally spaced values covering `[0, 1]`.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// The admissible range `[H(Y|X), H(Y)]` of `s` for input law `q`.
pub fn s_domain(model: &DbcModel, q: &ProbVector) -> (f64, f64) {
    (model.h_y_given_x(q.as_slice()), model.h_y(q.as_slice()))
}

fn clamp_s(model: &DbcModel, q: &ProbVector, s: f64) -> Result<f64> {
    let (lo, hi) = s_domain(model, q);
    if !s.is_finite() || s < lo - S_CLAMP_TOL || s > hi + S_CLAMP_TOL {
        return Err(DbcError::domain("s", s, lo, hi));
    }
    Ok(s.clamp(lo, hi))
}

/// One evaluation of `F*(q, s)` with its witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FStarPoint {
    pub s: f64,
    pub value: f64,
    pub strategy: TransmissionStrategy,
    /// `H(Y|U)` and `H(Z|U)` of the witness.
    pub xi: f64,
    pub eta: f64,
    /// Multiplier of the entropy constraint, a subgradient of `F*` in `s`.
    pub slope: f64,
}

/// `F*(q, s)` from the LP
/// `min Σ w_g η_g  s.t.  Σ w_g p_g = q,  Σ w_g ξ_g ≥ s`.
pub fn fstar_primal(model: &DbcModel, q: &ProbVector, s: f64, table: &EnvelopeTable) -> Result<FStarPoint> {
    model.check_input(q)?;
    let s = clamp_s(model, q, s)?;
    let extra = [SupportPoint::new(model, q.as_slice())];
    let src = PrimalSource {
        cols: Columns {
            table,
            extra: &extra,
        },
    };
    let mut b = q.as_slice().to_vec();
    b.push(s);
    let sol = lp::solve(&src, &b, &LpOptions::default());
    if sol.status != LpStatus::Optimal {
        return Err(sol.into_result().unwrap_err());
    }
    let strategy = src
        .cols
        .strategy(&sol.x)
        .ok_or_else(|| DbcError::Solver("empty F* witness".into()))?;
    let (xi, eta) = strategy_entropies(model, &strategy);
    Ok(FStarPoint {
        s,
        value: sol.objective,
        strategy,
        xi,
        eta,
        slope: sol.duals[model.k()],
    })
}

/// Dual evaluation `max_λ ψ(q, λ) + λ s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FStarDual {
    pub s: f64,
    pub value: f64,
    pub lambda: f64,
    /// Mixture of the two sweep witnesses whose `H(Y|U)` brackets `s`.
    pub strategy: TransmissionStrategy,
}

/// Dual value from a precomputed sweep.
pub fn fstar_dual_from_sweep(sweep: &[PsiResult], s: f64) -> Option<FStarDual> {
    let (best, value) = sweep
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.value + r.lambda * s))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        })?;
    let below = sweep
        .iter()
        .filter(|r| r.xi <= s)
        .max_by(|a, b| a.xi.total_cmp(&b.xi));
    let above = sweep
        .iter()
        .filter(|r| r.xi >= s)
        .min_by(|a, b| a.xi.total_cmp(&b.xi));
    let strategy = match (below, above) {
        (Some(a), Some(b)) if b.xi > a.xi => {
            let t = (b.xi - s) / (b.xi - a.xi);
            let mut weights: Vec<f64> = a.strategy.weights.iter().map(|w| w * t).collect();
            weights.extend(b.strategy.weights.iter().map(|w| w * (1.0 - t)));
            let mut columns = a.strategy.columns.clone();
            columns.extend(b.strategy.columns.iter().cloned());
            TransmissionStrategy { weights, columns }.pruned(0.0)
        }
        (Some(a), _) => a.strategy.clone(),
        (None, Some(b)) => b.strategy.clone(),
        (None, None) => sweep[best].strategy.clone(),
    };
    Some(FStarDual {
        s,
        value,
        lambda: sweep[best].lambda,
        strategy,
    })
}

pub fn fstar_dual(
    model: &DbcModel,
    q: &ProbVector,
    s: f64,
    lambdas: &[f64],
    table: &EnvelopeTable,
) -> Result<FStarDual> {
    let s = clamp_s(model, q, s)?;
    let sweep = psi_sweep(model, q, lambdas, table, Exec::auto())?;
    fstar_dual_from_sweep(&sweep, s).ok_or_else(|| DbcError::invalid("empty λ grid"))
}

/// How a curve is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Primal,
    Dual,
    Closed,
    Oracle,
}

impl std::str::FromStr for Method {
    type Err = DbcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal" => Ok(Method::Primal),
            "dual" => Ok(Method::Dual),
            "closed" => Ok(Method::Closed),
            "oracle" => Ok(Method::Oracle),
            _ => Err(DbcError::invalid(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FStarSample {
    pub s: f64,
    pub fstar: f64,
    pub witness: TransmissionStrategy,
}

/// Samples of `s ↦ F*(q, s)` for fixed `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FStarCurve {
    pub q: Vec<f64>,
    pub samples: Vec<FStarSample>,
}

#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    pub grid: Option<SimplexGrid>,
    pub lambdas: usize,
    pub exec: Exec,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            grid: None,
            lambdas: 401,
            exec: Exec::auto(),
        }
    }
}

/// `n ≥ 2` equally spaced values of `s` from `H(Y|X)` to `H(Y)`.
pub fn s_samples(model: &DbcModel, q: &ProbVector, n: usize) -> Vec<f64> {
    let (lo, hi) = s_domain(model, q);
    if n <= 1 {
        return vec![hi];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn fstar_curve(
    model: &DbcModel,
    q: &ProbVector,
    n: usize,
    method: Method,
    opts: &CurveOptions,
) -> Result<FStarCurve> {
    model.check_input(q)?;
    let ss = s_samples(model, q, n);
    let table = || -> Result<EnvelopeTable> {
        let grid = opts.grid.unwrap_or_else(|| SimplexGrid::default_for(model.k()));
        EnvelopeTable::new_with(model, grid, opts.exec)
    };
    let samples: Vec<Result<FStarSample>> = match method {
        Method::Primal => {
            let t = table()?;
            opts.exec.map(&ss, |&s| {
                fstar_primal(model, q, s, &t).map(|p| FStarSample {
                    s,
                    fstar: p.value,
                    witness: p.strategy,
                })
            })
        }
        Method::Dual => {
            let t = table()?;
            let sweep = psi_sweep(model, q, &lambda_grid(opts.lambdas), &t, opts.exec)?;
            ss.iter()
                .map(|&s| {
                    let d = fstar_dual_from_sweep(&sweep, s)
                        .ok_or_else(|| DbcError::invalid("empty λ grid"))?;
                    Ok(FStarSample {
                        s,
                        fstar: d.value,
                        witness: d.strategy,
                    })
                })
                .collect()
        }
        Method::Closed => ss
            .iter()
            .map(|&s| {
                crate::closed_form::closed_fstar(model, q, s).map(|(v, w)| FStarSample {
                    s,
                    fstar: v,
                    witness: w,
                })
            })
            .collect(),
        Method::Oracle => opts.exec.map(&ss, |&s| {
            crate::oracle::fstar_oracle(model, q, s).map(|o| FStarSample {
                s,
                fstar: o.value,
                witness: o.strategy,
            })
        }),
    };
    Ok(FStarCurve {
        q: q.as_slice().to_vec(),
        samples: samples.into_iter().collect::<Result<_>>()?,
    })
}

/// Worst violations of the structural properties of an `F*` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeReport {
    /// Largest decrease between consecutive samples.
    pub monotone_violation: f64,
    /// Largest amount by which a sample lies above the chord of its neighbours.
    pub convexity_violation: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Largest amount by which `s + H(Z) − H(Y)` exceeds a sample.
    pub lower_bound_violation: f64,
}

impl ShapeReport {
    pub fn passes(&self) -> bool {
        self.monotone_violation <= 1e-9
            && self.convexity_violation <= 1e-8
            && self.slope_min >= -1e-6
            && self.slope_max <= 1.0 + 1e-6
            && self.lower_bound_violation <= 1e-9
    }
}

pub fn shape_report(model: &DbcModel, curve: &FStarCurve) -> ShapeReport {
    let s: Vec<f64> = curve.samples.iter().map(|x| x.s).collect();
    let f: Vec<f64> = curve.samples.iter().map(|x| x.fstar).collect();
    let offset = model.h_z(&curve.q) - model.h_y(&curve.q);
    let mut r = ShapeReport {
        monotone_violation: 0.0,
        convexity_violation: 0.0,
        slope_min: f64::INFINITY,
        slope_max: f64::NEG_INFINITY,
        lower_bound_violation: 0.0,
    };
    for i in 0..s.len() {
        r.lower_bound_violation = r.lower_bound_violation.max(s[i] + offset - f[i]);
        if i + 1 < s.len() {
            r.monotone_violation = r.monotone_violation.max(f[i] - f[i + 1]);
            let ds = s[i + 1] - s[i];
            if ds > 1e-12 {
                let slope = (f[i + 1] - f[i]) / ds;
                r.slope_min = r.slope_min.min(slope);
                r.slope_max = r.slope_max.max(slope);
            }
        }
        if i >= 1 && i + 1 < s.len() {
            let t = (s[i + 1] - s[i]) / (s[i + 1] - s[i - 1]);
            let chord = t * f[i - 1] + (1.0 - t) * f[i + 1];
            r.convexity_violation = r.convexity_violation.max(f[i] - chord);
        }
    }
    if !r.slope_min.is_finite() {
        r.slope_min = 0.0;
        r.slope_max = 0.0;
    }
    r
}

/// Outcome of the two-letter tensorization check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorReport {
    pub s: f64,
    pub fstar: f64,
    /// `|H(Y²|U) − 2 H(Y|U')|` and `|H(Z²|U) − 2 H(Z|U')|` for the product
    /// of the witness `U'` with itself.
    pub product_xi_error: f64,
    pub product_eta_error: f64,
    /// `|H(Y|U') − s|` of the single-letter witness.
    pub witness_s_error: f64,
    pub trials: usize,
    /// `min (H(Z²|U) − 2 F*(q̄, H(Y²|U)/2))` over random joint strategies,
    /// with `q̄` the average of the two input marginals.
    pub min_slack: f64,
}

impl TensorReport {
    pub fn passes(&self) -> bool {
        self.product_xi_error <= 1e-9
            && self.product_eta_error <= 1e-9
            && self.witness_s_error <= 1e-9
            && self.min_slack >= -5e-3
    }
}

fn product_strategy(s: &TransmissionStrategy) -> TransmissionStrategy {
    let mut weights = Vec::new();
    let mut columns = Vec::new();
    for (w1, c1) in s.weights.iter().zip(&s.columns) {
        for (w2, c2) in s.weights.iter().zip(&s.columns) {
            weights.push(w1 * w2);
            columns.push(c1.iter().flat_map(|a| c2.iter().map(move |b| a * b)).collect());
        }
    }
    TransmissionStrategy { weights, columns }
}

fn random_joint_strategy(rng: &mut DetRng, base: &TransmissionStrategy, kind: usize) -> TransmissionStrategy {
    let k = base.input_dim();
    let l = 2 + rng.below(4);
    let weights = rng.simplex(l);
    let columns = (0..l)
        .map(|_| match kind {
            0 => {
                // Sparse Dirichlet column on the product alphabet.
                let v: Vec<f64> = (0..k * k).map(|_| rng.uniform().powi(4)).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            }
            1 => {
                let a = rng.simplex(k);
                let b = rng.simplex(k);
                a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
            }
            _ => {
                let i = rng.below(base.branches());
                let j = rng.below(base.branches());
                let eps = 0.05 * rng.uniform();
                let noise = rng.simplex(k * k);
                base.columns[i]
                    .iter()
                    .flat_map(|x| base.columns[j].iter().map(move |y| x * y))
                    .zip(noise)
                    .map(|(p, n)| (1.0 - eps) * p + eps * n)
                    .collect()
            }
        })
        .collect();
    TransmissionStrategy { weights, columns }
}

/// Checks `F*` of the two-letter product channel against `2 F*` for `k = 2`.
pub fn tensorization_check(
    model: &DbcModel,
    q: &ProbVector,
    s: f64,
    trials: usize,
    seed: u64,
    table: &EnvelopeTable,
    exec: Exec,
) -> Result<TensorReport> {
    if model.k() != 2 {
        return Err(DbcError::Unsupported(format!(
            "tensorization check needs k = 2, got k = {}",
            model.k()
        )));
    }
    let base = fstar_primal(model, q, s, table)?;
    let y2: StochasticMatrix = model.t_yx.kron(&model.t_yx);
    let z2: StochasticMatrix = model.t_zx.kron(&model.t_zx);
    let prod = product_strategy(&base.strategy);
    let xi2 = conditional_entropy_given_strategy(&y2, &prod)?;
    let eta2 = conditional_entropy_given_strategy(&z2, &prod)?;

    const CHUNKS: usize = 64;
    let per = trials.div_ceil(CHUNKS);
    let slacks = exec.map_range(CHUNKS, |c| -> Result<f64> {
        let mut rng = DetRng::with_stream(seed, c as u64);
        let mut worst = f64::INFINITY;
        for t in 0..per {
            if c * per + t >= trials {
                break;
            }
            let u = random_joint_strategy(&mut rng, &base.strategy, t % 3);
            let xi = conditional_entropy_given_strategy(&y2, &u)?;
            let eta = conditional_entropy_given_strategy(&z2, &u)?;
            let joint = u.induced_input();
            let q1 = joint[0] + joint[1];
            let q2 = joint[0] + joint[2];
            let qbar = ProbVector::normalized(vec![0.5 * (q1 + q2), 1.0 - 0.5 * (q1 + q2)])?;
            let (lo, hi) = s_domain(model, &qbar);
            let sbar = (0.5 * xi).clamp(lo, hi);
            let f = fstar_primal(model, &qbar, sbar, table)?.value;
            worst = worst.min(eta - 2.0 * f);
        }
        Ok(worst)
    });
    let mut min_slack = f64::INFINITY;
    for s in slacks {
        min_slack = min_slack.min(s?);
    }
    Ok(TensorReport {
        s: base.s,
        fstar: base.value,
        product_xi_error: (xi2 - 2.0 * base.xi).abs(),
        product_eta_error: (eta2 - 2.0 * base.eta).abs(),
        witness_s_error: (base.xi - base.s).abs(),
        trials,
        min_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_broadcast_bsc, make_broadcast_z};
    use crate::prob::h2;
    use approx::assert_abs_diff_eq;

    fn table(model: &DbcModel, m: usize) -> EnvelopeTable {
        EnvelopeTable::new(model, SimplexGrid::new(model.k(), m).unwrap()).unwrap()
    }

    #[test]
    fn phi_examples() {
        let bsc = make_broadcast_bsc(0.1, 0.2).unwrap();
        for l in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(phi(&bsc, &[0.5, 0.5], l), (1.0 - l) * 2f64.ln(), epsilon = 1e-15);
        }
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        assert_eq!(phi(&z, &[1.0, 0.0], 0.7), 0.0);
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        assert_abs_diff_eq!(
            phi(&z, &[0.5, 0.5], 0.5),
            h2(0.3) - 0.5 * h2(0.45),
            epsilon = 1e-15
        );
    }

    #[test]
    fn psi_of_concave_phi_is_flat() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let t = table(&m, 200);
        for q in [0.1, 0.37, 0.5] {
            let r = psi(&m, &ProbVector::binary(q).unwrap(), 0.0, &t).unwrap();
            assert_abs_diff_eq!(r.value, h2(0.2), epsilon = 1e-12);
            assert!(r.strategy.branches() <= 2);
        }
    }

    #[test]
    fn psi_equals_phi_above_threshold() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let t = table(&m, 200);
        let thr = (0.6f64 / 0.8).powi(2);
        for q in [0.05, 0.2, 0.5] {
            let qv = ProbVector::binary(q).unwrap();
            let r = psi(&m, &qv, thr + 0.01, &t).unwrap();
            assert_abs_diff_eq!(r.value, phi(&m, qv.as_slice(), thr + 0.01), epsilon = 1e-12);
            assert_eq!(r.strategy.branches(), 1);
        }
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z, 200);
        // λ ≥ β2/β1 = 2/3
        for q in [0.1, 0.6, 0.95] {
            let qv = ProbVector::binary(q).unwrap();
            let r = psi(&z, &qv, 0.7, &t).unwrap();
            assert_abs_diff_eq!(r.value, phi(&z, qv.as_slice(), 0.7), epsilon = 1e-12);
        }
    }

    #[test]
    fn psi_duals_support_phi() {
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z, 400);
        let q = ProbVector::binary(0.3).unwrap();
        let r = psi(&z, &q, 0.4, &t).unwrap();
        let lin = |p: &[f64]| r.duals.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
        assert_abs_diff_eq!(lin(q.as_slice()), r.value, epsilon = 1e-12);
        for g in 0..t.len() {
            assert!(phi(&z, t.point(g), 0.4) >= lin(t.point(g)) - 1e-12);
        }
    }

    #[test]
    fn primal_endpoints() {
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z, 500);
        let q = ProbVector::binary(0.4).unwrap();
        let (lo, hi) = s_domain(&z, &q);
        let a = fstar_primal(&z, &q, lo, &t).unwrap();
        assert_abs_diff_eq!(a.value, z.h_z_given_x(q.as_slice()), epsilon = 1e-12);
        let b = fstar_primal(&z, &q, hi, &t).unwrap();
        assert_abs_diff_eq!(b.value, z.h_z(q.as_slice()), epsilon = 1e-12);
        assert!(fstar_primal(&z, &q, hi + 1e-3, &t).is_err());
        assert!(fstar_primal(&z, &q, hi + 1e-10, &t).is_ok());
        match fstar_primal(&z, &q, lo - 0.1, &t).unwrap_err() {
            DbcError::Domain { lo: l, hi: h, .. } => {
                assert_abs_diff_eq!(l, lo, epsilon = 1e-15);
                assert_abs_diff_eq!(h, hi, epsilon = 1e-15);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn primal_matches_z_substitution() {
        // q = 0.4 on the noisy symbol, β1 = 0.9, β2 = 0.6, p = 0.5.
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z, 2000);
        let q = ProbVector::binary(0.4).unwrap();
        let r = fstar_primal(&z, &q, 0.8 * h2(0.45), &t).unwrap();
        assert!((r.value - 0.8 * h2(0.3)).abs() < 1e-3, "{}", r.value);
        assert!(r.strategy.branches() <= 3);
        assert_abs_diff_eq!(r.eta, r.value, epsilon = 1e-9);
        assert_abs_diff_eq!(r.xi, r.s, epsilon = 1e-9);
    }

    #[test]
    fn dual_below_primal_and_above_bound() {
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z, 1000);
        let q = ProbVector::binary(0.45).unwrap();
        let lambdas = lambda_grid(201);
        for s in s_samples(&z, &q, 9) {
            let p = fstar_primal(&z, &q, s, &t).unwrap();
            let d = fstar_dual(&z, &q, s, &lambdas, &t).unwrap();
            assert!(d.value <= p.value + 1e-9);
            assert!(p.value - d.value <= 2e-3);
            assert!(d.value >= s + z.h_z(q.as_slice()) - z.h_y(q.as_slice()) - 1e-9);
        }
        let (_, hi) = s_domain(&z, &q);
        let d = fstar_dual(&z, &q, hi, &lambdas, &t).unwrap();
        assert_abs_diff_eq!(d.value, z.h_z(q.as_slice()), epsilon = 1e-9);
    }

    #[test]
    fn curve_shape() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let q = ProbVector::binary(0.3).unwrap();
        let opts = CurveOptions {
            grid: Some(SimplexGrid::new(2, 500).unwrap()),
            ..Default::default()
        };
        for method in [Method::Primal, Method::Dual] {
            let c = fstar_curve(&m, &q, 25, method, &opts).unwrap();
            let r = shape_report(&m, &c);
            assert!(r.passes(), "{method:?}: {r:?}");
        }
    }

    #[test]
    fn tensorization_product_exact() {
        let z = make_broadcast_z(0.1, 0.4).unwrap();
        let t = table(&z, 400);
        let q = ProbVector::binary(0.4).unwrap();
        let (lo, hi) = s_domain(&z, &q);
        let r = tensorization_check(&z, &q, 0.5 * (lo + hi), 200, 3, &t, Exec::Parallel).unwrap();
        assert!(r.product_xi_error <= 1e-9);
        assert!(r.product_eta_error <= 1e-9);
        assert!(r.min_slack >= -5e-3, "{r:?}");
        let r2 = tensorization_check(&z, &q, 0.5 * (lo + hi), 200, 3, &t, Exec::Sequential).unwrap();
        assert_eq!(r, r2);
    }
}
