//! Input symmetry: the group of input permutations `G` for which both
//! `T_YX G` and `T_ZX G` are row permutations of `T_YX` and `T_ZX`.
//!
//! Permutations are arrays `σ` with `G(i, j) = 1` iff `σ(j) = i`, so
//! `(T G)` has column `j` equal to column `σ(j)` of `T`.

use std::collections::HashSet;

use serde::Serialize;

use crate::capacity::{max_weighted_rate, BoundarySample, RegionBoundary};
use crate::channel::DbcModel;
use crate::error::{DbcError, Result};
use crate::fstar::EnvelopeTable;
use crate::hull::{lower_hull, PiecewiseLinear};
use crate::par::Exec;
use crate::prob::{ProbVector, SimplexGrid, StochasticMatrix, TransmissionStrategy};

/// Largest alphabet for which all `k!` permutations are enumerated.
pub const MAX_ENUM: usize = 8;
/// Entrywise tolerance for matching rows.
pub const MATCH_TOL: f64 = 1e-12;

pub type Perm = Vec<usize>;

pub fn compose(a: &[usize], b: &[usize]) -> Perm {
    // Matrix product G_a G_b: j ↦ a(b(j)).
    b.iter().map(|&j| a[j]).collect()
}

pub fn inverse(a: &[usize]) -> Perm {
    let mut inv = vec![0; a.len()];
    for (j, &i) in a.iter().enumerate() {
        inv[i] = j;
    }
    inv
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

/// Permutation of rank `r` in lexicographic order.
fn unrank(k: usize, mut r: usize) -> Perm {
    let mut items: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(k);
    for i in (0..k).rev() {
        let f = factorial(i);
        out.push(items.remove(r / f));
        r %= f;
    }
    out
}

/// A set of permutations of `{0, …, k−1}`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermutationSet {
    pub k: usize,
    pub perms: Vec<Perm>,
    pub is_group: bool,
    pub is_transitive: bool,
}

impl PermutationSet {
    pub fn new(k: usize, mut perms: Vec<Perm>) -> Result<Self> {
        for p in &perms {
            let mut seen = vec![false; k];
            if p.len() != k || p.iter().any(|&i| i >= k || std::mem::replace(&mut seen[i], true)) {
                return Err(DbcError::invalid(format!("{p:?} is not a permutation of {k} symbols")));
            }
        }
        perms.sort();
        perms.dedup();
        let is_group = closed_group(k, &perms);
        let is_transitive = transitive(k, &perms);
        Ok(PermutationSet {
            k,
            perms,
            is_group,
            is_transitive,
        })
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    /// `Σ_G G` as a `k × k` count matrix.
    pub fn sum_matrix(&self) -> Vec<Vec<usize>> {
        count_matrix(self.k, self.perms.iter())
    }

    /// A small generating set, picked greedily in sorted order.
    pub fn generators(&self) -> Vec<Perm> {
        let mut gens: Vec<Perm> = Vec::new();
        let mut span: HashSet<Perm> = HashSet::from([(0..self.k).collect()]);
        for p in &self.perms {
            if !span.contains(p) {
                gens.push(p.clone());
                span = closure(&gens, self.k);
            }
        }
        gens
    }
}

fn count_matrix<'a>(k: usize, perms: impl Iterator<Item = &'a Perm>) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0; k]; k];
    for p in perms {
        for (j, &i) in p.iter().enumerate() {
            c[i][j] += 1;
        }
    }
    c
}

fn closure(gens: &[Perm], k: usize) -> HashSet<Perm> {
    let id: Perm = (0..k).collect();
    let mut set = HashSet::from([id.clone()]);
    let mut frontier = vec![id];
    while let Some(p) = frontier.pop() {
        for g in gens {
            let q = compose(g, &p);
            if set.insert(q.clone()) {
                frontier.push(q);
            }
        }
    }
    set
}

fn closed_group(k: usize, perms: &[Perm]) -> bool {
    let set: HashSet<&Perm> = perms.iter().collect();
    let id: Perm = (0..k).collect();
    if !set.contains(&id) {
        return false;
    }
    perms
        .iter()
        .all(|a| set.contains(&inverse(a)) && perms.iter().all(|b| set.contains(&compose(a, b))))
}

fn transitive(k: usize, perms: &[Perm]) -> bool {
    (0..k).all(|i| {
        let mut hit = vec![false; k];
        for p in perms {
            hit[p[i]] = true;
        }
        hit.into_iter().all(|h| h)
    })
}

/// Row permutations witnessing `T_YX G = Π_Y T_YX` and `T_ZX G = Π_Z T_ZX`.
/// `Π(a, b) = 1` iff `pi[b] = a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermutationPair {
    pub g: Perm,
    pub pi_y: Perm,
    pub pi_z: Perm,
}

impl PermutationPair {
    /// Largest entrywise violation of the two identities.
    pub fn residual(&self, model: &DbcModel) -> f64 {
        identity_residual(&model.t_yx, &self.g, &self.pi_y)
            .max(identity_residual(&model.t_zx, &self.g, &self.pi_z))
    }
}

fn identity_residual(t: &StochasticMatrix, g: &[usize], pi: &[usize]) -> f64 {
    let tg = t.permute_columns(g);
    let mut worst: f64 = 0.0;
    for b in 0..t.rows() {
        for i in 0..t.cols() {
            worst = worst.max((tg.get(pi[b], i) - t.get(b, i)).abs());
        }
    }
    worst
}

/// Finds `π` with row `π(b)` of `T G` equal to row `b` of `T`.
fn match_rows(t: &StochasticMatrix, g: &[usize]) -> Option<Perm> {
    let tg = t.permute_columns(g);
    let n = t.rows();
    let mut used = vec![false; n];
    let mut pi = vec![0; n];
    for (b, slot) in pi.iter_mut().enumerate() {
        let row = t.row(b);
        let r = (0..n).find(|&r| {
            !used[r] && tg.row(r).iter().zip(row).all(|(x, y)| (x - y).abs() <= MATCH_TOL)
        })?;
        used[r] = true;
        *slot = r;
    }
    Some(pi)
}

/// The symmetry group with one witness per element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryGroup {
    pub set: PermutationSet,
    pub witnesses: Vec<PermutationPair>,
}

fn enumerate<O: Send>(
    k: usize,
    exec: Exec,
    test: impl Fn(&[usize]) -> Option<O> + Sync + Send,
) -> Result<Vec<(Perm, O)>> {
    if k > MAX_ENUM {
        return Err(DbcError::Unsupported(format!(
            "permutation enumeration is limited to {MAX_ENUM} symbols, got {k}"
        )));
    }
    let found = exec.map_range(factorial(k), |r| {
        let p = unrank(k, r);
        test(&p).map(|w| (p, w))
    });
    Ok(found.into_iter().flatten().collect())
}

/// Enumerates `𝒢_{T_YX} ∩ 𝒢_{T_ZX}` over all `k!` input permutations.
pub fn compute_symmetry_group(model: &DbcModel, exec: Exec) -> Result<SymmetryGroup> {
    let found = enumerate(model.k(), exec, |g: &[usize]| {
        let pi_y = match_rows(&model.t_yx, g)?;
        let pi_z = match_rows(&model.t_zx, g)?;
        Some((pi_y, pi_z))
    })?;
    let witnesses: Vec<PermutationPair> = found
        .into_iter()
        .map(|(g, (pi_y, pi_z))| PermutationPair { g, pi_y, pi_z })
        .collect();
    let set = PermutationSet::new(model.k(), witnesses.iter().map(|w| w.g.clone()).collect())?;
    Ok(SymmetryGroup { set, witnesses })
}

/// `𝒢_T` of a single matrix: permutations `G` of its inputs with
/// `T G = Π T` for some row permutation `Π`.
pub fn matrix_symmetry(t: &StochasticMatrix, exec: Exec) -> Result<PermutationSet> {
    let found = enumerate(t.cols(), exec, |g: &[usize]| match_rows(t, g))?;
    PermutationSet::new(t.cols(), found.into_iter().map(|(g, _)| g).collect())
}

/// `Σ G = (l/k) 1 1ᵀ` check for a group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSum {
    pub l: usize,
    pub ratio: f64,
    pub integer: bool,
    /// `max |Σ G − (l/k)|` over the entries.
    pub residual: f64,
}

pub fn group_sum_check(set: &PermutationSet) -> Result<GroupSum> {
    if !set.is_group {
        return Err(DbcError::invalid("permutation set is not a group"));
    }
    let l = set.len();
    let ratio = l as f64 / set.k as f64;
    let residual = set
        .sum_matrix()
        .iter()
        .flatten()
        .map(|&c| (c as f64 - ratio).abs())
        .fold(0.0, f64::max);
    Ok(GroupSum {
        l,
        ratio,
        integer: l.is_multiple_of(set.k),
        residual,
    })
}

/// Smallest subset whose permutation matrices sum to `(l_s/k) 1 1ᵀ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitiveSubset {
    pub l_s: usize,
    pub perms: Vec<Perm>,
    /// Whether `l_s` equals the input alphabet size.
    pub equals_k: bool,
}

/// Exact backtracking for each multiple `t·k` in turn. Chosen permutations
/// are grouped by their image of symbol 0, which makes the search
/// visit each subset once.
pub fn smallest_transitive_subset(set: &PermutationSet) -> Result<TransitiveSubset> {
    let k = set.k;
    if !set.is_transitive {
        return Err(DbcError::invalid("permutation set is not transitive"));
    }
    let mut by_image: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, p) in set.perms.iter().enumerate() {
        by_image[p[0]].push(idx);
    }
    for t in 1..=set.len() / k {
        let mut counts = vec![vec![0usize; k]; k];
        let mut chosen = Vec::with_capacity(t * k);
        if search(set, &by_image, t, 0, 0, &mut counts, &mut chosen) {
            let perms: Vec<Perm> = chosen.iter().map(|&i| set.perms[i].clone()).collect();
            return Ok(TransitiveSubset {
                l_s: t * k,
                equals_k: t == 1,
                perms,
            });
        }
    }
    Err(DbcError::Infeasible(
        "no subset sums to a multiple of the all-ones matrix".into(),
    ))
}

fn search(
    set: &PermutationSet,
    by_image: &[Vec<usize>],
    t: usize,
    image: usize,
    from: usize,
    counts: &mut [Vec<usize>],
    chosen: &mut Vec<usize>,
) -> bool {
    let k = set.k;
    if image == k {
        return true;
    }
    let have = chosen.iter().filter(|&&i| set.perms[i][0] == image).count();
    if have == t {
        return search(set, by_image, t, image + 1, 0, counts, chosen);
    }
    let cands = &by_image[image];
    for pos in from..cands.len() {
        if cands.len() - pos < t - have {
            break;
        }
        let p = &set.perms[cands[pos]];
        if p.iter().enumerate().any(|(j, &i)| counts[i][j] >= t) {
            continue;
        }
        for (j, &i) in p.iter().enumerate() {
            counts[i][j] += 1;
        }
        chosen.push(cands[pos]);
        if search(set, by_image, t, image, pos + 1, counts, chosen) {
            return true;
        }
        chosen.pop();
        for (j, &i) in p.iter().enumerate() {
            counts[i][j] -= 1;
        }
    }
    false
}

/// Summary in the report layout used by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub group_size: usize,
    pub is_transitive: bool,
    pub l_s: Option<usize>,
    pub conjecture1_holds: Option<bool>,
    pub generators: Vec<Perm>,
}

pub fn symmetry_report(group: &SymmetryGroup) -> SymmetryReport {
    let sub = smallest_transitive_subset(&group.set).ok();
    SymmetryReport {
        group_size: group.set.len(),
        is_transitive: group.set.is_transitive,
        l_s: sub.as_ref().map(|s| s.l_s),
        conjecture1_holds: sub.as_ref().map(|s| s.equals_k),
        generators: group.set.generators(),
    }
}

fn apply_perm(g: &[usize], p: &[f64]) -> Vec<f64> {
    // (G p)(σ(j)) = p(j)
    let mut out = vec![0.0; p.len()];
    for (j, &i) in g.iter().enumerate() {
        out[i] = p[j];
    }
    out
}

/// Rates of the permutation encoding and the lower envelope `F̃` of the
/// points `(h(T_YX p), h(T_ZX p))`.
#[derive(Debug, Clone)]
pub struct PermutationRegion {
    pub subset: TransitiveSubset,
    /// Envelope of `F̃` over `s`; `idx` refers to the grid points.
    pub envelope: PiecewiseLinear,
    pub boundary: RegionBoundary,
    pub grid: SimplexGrid,
}

/// Sweeps the codeword law `p_1` over a grid. User 2's codebook uses the
/// permutations of the smallest transitive subset, uniformly, so the input
/// is uniform and `R1 = h(T_YX p_1) − H(Y|X)`, `R2 = H(Z) − h(T_ZX p_1)`.
pub fn permutation_encoding_region(
    model: &DbcModel,
    set: &PermutationSet,
    grid: SimplexGrid,
    exec: Exec,
) -> Result<PermutationRegion> {
    if !set.is_transitive {
        return Err(DbcError::invalid(
            "model is not input-symmetric: the symmetry group is not transitive",
        ));
    }
    if grid.k != model.k() {
        return Err(DbcError::mismatch(model.k(), grid.k, "grid dimension"));
    }
    let subset = smallest_transitive_subset(set)?;
    // The uniform law is the right end of the envelope; make sure it is a
    // candidate even when the grid misses it.
    let mut flat = grid.points_flat();
    flat.extend(std::iter::repeat_n(1.0 / model.k() as f64, model.k()));
    let table = EnvelopeTable::from_flat(model, flat, exec);
    let pts: Vec<(f64, f64)> = (0..table.len()).map(|g| (table.xi(g), table.eta(g))).collect();
    let h = lower_hull(&pts);
    // The envelope is nondecreasing: keep the part right of its minimum.
    let start = (0..h.len())
        .min_by(|&a, &b| pts[h[a]].1.total_cmp(&pts[h[b]].1).then(b.cmp(&a)))
        .unwrap_or(0);
    let h: Vec<usize> = h[start..].to_vec();
    let envelope = PiecewiseLinear {
        xs: h.iter().map(|&i| pts[i].0).collect(),
        ys: h.iter().map(|&i| pts[i].1).collect(),
        idx: h.clone(),
    };
    let u = ProbVector::uniform(model.k());
    let hz_u = model.h_z(u.as_slice());
    let hy_x = model.h_y_given_x(u.as_slice());
    let w = 1.0 / subset.l_s as f64;
    let mut samples = Vec::with_capacity(h.len());
    for (v, &g) in h.iter().enumerate() {
        let lambda = if v == 0 {
            0.0
        } else {
            let a = envelope.xs[v - 1];
            let b = envelope.xs[v];
            ((envelope.ys[v] - envelope.ys[v - 1]) / (b - a)).clamp(0.0, 1.0)
        };
        let p1 = table.point(g);
        let strategy = TransmissionStrategy {
            weights: vec![w; subset.l_s],
            columns: subset.perms.iter().map(|s| apply_perm(s, p1)).collect(),
        }
        .merged(0.0);
        samples.push(BoundarySample {
            lambda,
            q: u.as_slice().to_vec(),
            r1: table.xi(g) - hy_x,
            r2: hz_u - table.eta(g),
            psi: table.eta(g) - lambda * table.xi(g),
            strategy,
        });
    }
    Ok(PermutationRegion {
        subset,
        envelope,
        boundary: RegionBoundary {
            samples,
            removed: 0,
        },
        grid,
    })
}

/// How the optimal input law is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimalShape {
    /// Uniform, for input-symmetric models.
    Uniform,
    /// `(1 − t, t·u)`: the group fixes symbol 0 and acts transitively on
    /// the rest.
    ZeroPlusUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCheck {
    pub lambda: f64,
    pub grid_best: f64,
    pub grid_best_q: Vec<f64>,
    pub shaped_best: f64,
    pub shaped_best_q: Vec<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformOptimality {
    pub shape: Option<OptimalShape>,
    /// Why the check did not run.
    pub skipped: Option<String>,
    pub checks: Vec<LambdaCheck>,
    pub failures: Vec<f64>,
}

impl UniformOptimality {
    pub fn passes(&self) -> bool {
        self.skipped.is_none() && self.failures.is_empty()
    }
}

/// Shape forced by the symmetry group, if any.
pub fn optimal_shape(set: &PermutationSet) -> Option<OptimalShape> {
    if set.is_transitive {
        return Some(OptimalShape::Uniform);
    }
    let k = set.k;
    if k >= 3 && set.perms.iter().all(|p| p[0] == 0) {
        let rest = (1..k).all(|i| {
            let mut hit = vec![false; k];
            for p in &set.perms {
                hit[p[i]] = true;
            }
            (1..k).all(|j| hit[j])
        });
        if rest {
            return Some(OptimalShape::ZeroPlusUniform);
        }
    }
    None
}

/// For each `λ`, compares the best value of `H(Z) − λ H(Y|X) − ψ(q, λ)`
/// over `q_grid` with the best over laws of the shape the symmetry group
/// forces. Shaped candidates are `u` for [`OptimalShape::Uniform`] and
/// `(1 − t, t·u)` for every first coordinate `1 − t` in `q_grid` otherwise.
pub fn uniform_optimality_check(
    model: &DbcModel,
    set: &PermutationSet,
    lambdas: &[f64],
    q_grid: &[ProbVector],
    table: &EnvelopeTable,
    exec: Exec,
) -> Result<UniformOptimality> {
    let Some(shape) = optimal_shape(set) else {
        return Ok(UniformOptimality {
            shape: None,
            skipped: Some("model is not input-symmetric: the symmetry group is not transitive".into()),
            checks: vec![],
            failures: vec![],
        });
    };
    let k = model.k();
    let shaped: Vec<ProbVector> = match shape {
        OptimalShape::Uniform => vec![ProbVector::uniform(k)],
        OptimalShape::ZeroPlusUniform => {
            let mut firsts: Vec<f64> = q_grid.iter().map(|q| q[0]).collect();
            firsts.sort_by(f64::total_cmp);
            firsts.dedup();
            firsts
                .into_iter()
                .map(|a| {
                    let mut v = vec![(1.0 - a) / (k - 1) as f64; k];
                    v[0] = a;
                    ProbVector::normalized(v)
                })
                .collect::<Result<_>>()?
        }
    };
    let checks = exec.map(lambdas, |&lambda| -> Result<LambdaCheck> {
        let best = |qs: &[ProbVector]| -> Result<(f64, Vec<f64>)> {
            let mut b = (f64::NEG_INFINITY, vec![]);
            for q in qs {
                let v = max_weighted_rate(model, q, lambda, table)?.weighted();
                if v > b.0 {
                    b = (v, q.as_slice().to_vec());
                }
            }
            Ok(b)
        };
        let (gb, gq) = best(q_grid)?;
        let (sb, sq) = best(&shaped)?;
        Ok(LambdaCheck {
            lambda,
            grid_best: gb,
            grid_best_q: gq,
            shaped_best: sb,
            shaped_best_q: sq,
            ok: sb >= gb - 1e-6,
        })
    });
    let checks: Vec<LambdaCheck> = checks.into_iter().collect::<Result<_>>()?;
    let failures = checks.iter().filter(|c| !c.ok).map(|c| c.lambda).collect();
    Ok(UniformOptimality {
        shape: Some(shape),
        skipped: None,
        checks,
        failures,
    })
}

/// Binary-input channel whose symmetry group is transitive while that of
/// its degrading factor is not. `T_YX` has columns `(a, b, c, d)/2` and
/// `(c, d, a, b)/2`; `T_ZY` has columns `(e, g), (f, h), (g, e), (h, f)`.
pub fn swap_symmetric_example() -> Result<DbcModel> {
    let (a, b, c, d) = (0.35, 0.3, 0.15, 0.2);
    let t_yx = StochasticMatrix::from_columns("T_YX", &[vec![a, b, c, d], vec![c, d, a, b]])?;
    let (e, f, g, h) = (2.0 / 3.0, 0.75, 1.0 / 3.0, 0.25);
    let t_zy = StochasticMatrix::from_columns("T_ZY", &[vec![e, g], vec![f, h], vec![g, e], vec![h, f]])?;
    DbcModel::from_factor(t_yx, t_zy)
}
