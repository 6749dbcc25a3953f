//! Independent encoding: two codeword symbols `X1` (user 1) and `X2`
//! (user 2) drawn independently and merged by a single-letter function
//! `X = f(X2, X1)`. Codebooks are abstracted to their symbol laws, so the
//! quantities checked are the information rates `I(X; Y | X2)` and
//! `I(X2; Z)`.

use serde::Serialize;

use crate::channel::{DbcModel, GroupTable, MultTable};
use crate::error::{DbcError, Result};
use crate::par::Exec;
use crate::prob::{cumulative, h_slice, sample_cdf, DetRng, ProbVector, TransmissionStrategy};

/// Number of independent random streams a simulation is split into. Fixed
/// so that results do not depend on the thread count.
pub const SIM_CHUNKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    /// Logical OR in the Z-channel labeling: index 0 is the noiseless
    /// symbol (logical 1) and index 1 the noisy one (logical 0), so `X`
    /// has index 1 iff both inputs do.
    BinaryOr,
    GroupAdd,
    Mult,
    Permutation,
}

/// `table[x2][x1] = x` together with the two symbol laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinerSpec {
    pub kind: CombinerKind,
    pub k: usize,
    pub table: Vec<Vec<usize>>,
    pub p_x1: ProbVector,
    pub p_x2: ProbVector,
}

impl CombinerSpec {
    pub fn new(kind: CombinerKind, k: usize, table: Vec<Vec<usize>>, p_x1: ProbVector, p_x2: ProbVector) -> Result<Self> {
        if table.len() != p_x2.dim() {
            return Err(DbcError::mismatch(table.len(), p_x2.dim(), "combiner rows vs X2 law"));
        }
        for (r, row) in table.iter().enumerate() {
            if row.len() != p_x1.dim() {
                return Err(DbcError::mismatch(p_x1.dim(), row.len(), format!("combiner row {r}")));
            }
            if let Some(&x) = row.iter().find(|&&x| x >= k) {
                return Err(DbcError::invalid(format!("combiner output {x} outside 0..{k}")));
            }
            if kind == CombinerKind::Permutation {
                let mut seen = vec![false; k];
                if row.len() != k || row.iter().any(|&x| std::mem::replace(&mut seen[x], true)) {
                    return Err(DbcError::invalid(format!("combiner row {r} is not a bijection")));
                }
            }
        }
        Ok(CombinerSpec {
            kind,
            k,
            table,
            p_x1,
            p_x2,
        })
    }

    pub fn binary_or(p_x1: ProbVector, p_x2: ProbVector) -> Result<Self> {
        Self::new(CombinerKind::BinaryOr, 2, vec![vec![0, 0], vec![0, 1]], p_x1, p_x2)
    }

    /// `X = X1 ⊕ X2`.
    pub fn group_add(group: &GroupTable, p_x1: ProbVector, p_x2: ProbVector) -> Result<Self> {
        let n = group.order();
        let table = (0..n).map(|x2| (0..n).map(|x1| group.op(x1, x2)).collect()).collect();
        Self::new(CombinerKind::GroupAdd, n, table, p_x1, p_x2)
    }

    /// `X = X2 ⊗ X1`.
    pub fn mult(mult: &MultTable, p_x1: ProbVector, p_x2: ProbVector) -> Result<Self> {
        let k = mult.n() + 1;
        let table = (0..k).map(|x2| (0..k).map(|x1| mult.mul(x2, x1)).collect()).collect();
        Self::new(CombinerKind::Mult, k, table, p_x1, p_x2)
    }

    /// `X = σ_{x2}(X1)` for permutation arrays `σ` (`G(i, j) = 1` iff
    /// `σ(j) = i`).
    pub fn permutation(perms: &[Vec<usize>], p_x1: ProbVector, p_x2: ProbVector) -> Result<Self> {
        let k = p_x1.dim();
        Self::new(CombinerKind::Permutation, k, perms.to_vec(), p_x1, p_x2)
    }

    /// Z-channel combiner for the strategy mixing symbol 0 with weight
    /// `1 − q/p` and the law `(1 − p, p)` with weight `q/p`.
    pub fn z_strategy(q: f64, p: f64) -> Result<Self> {
        if !(0.0 < p && p <= 1.0 && 0.0 <= q && q <= p) {
            return Err(DbcError::invalid(format!("need 0 ≤ q ≤ p ≤ 1, p > 0; got q = {q}, p = {p}")));
        }
        Self::binary_or(ProbVector::binary(p)?, ProbVector::binary(q / p)?)
    }

    pub fn x2_alphabet(&self) -> usize {
        self.p_x2.dim()
    }

    /// Law of `X`.
    pub fn input_law(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.k];
        for (x2, row) in self.table.iter().enumerate() {
            for (x1, &v) in row.iter().enumerate() {
                x[v] += self.p_x2[x2] * self.p_x1[x1];
            }
        }
        x
    }
}

/// Joint law of `(X2, X, Y, Z)`, flattened in that order. `Y` and `Z` are
/// conditionally independent given `X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointLaw {
    pub dims: [usize; 4],
    pub p: Vec<f64>,
}

impl JointLaw {
    fn index(&self, a: usize, x: usize, y: usize, z: usize) -> usize {
        let [_, k, n, m] = self.dims;
        ((a * k + x) * n + y) * m + z
    }

    /// Marginal over the axes listed in `keep`, flattened in axis order.
    pub fn marginal(&self, keep: &[usize]) -> Vec<f64> {
        let dims: Vec<usize> = keep.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; dims.iter().product()];
        let [l, k, n, m] = self.dims;
        for a in 0..l {
            for x in 0..k {
                for y in 0..n {
                    for z in 0..m {
                        let v = self.p[self.index(a, x, y, z)];
                        if v == 0.0 {
                            continue;
                        }
                        let coords = [a, x, y, z];
                        let mut idx = 0;
                        for (d, &ax) in dims.iter().zip(keep) {
                            idx = idx * d + coords[ax];
                        }
                        out[idx] += v;
                    }
                }
            }
        }
        out
    }
}

/// Exact law of `(X2, X, Y, Z)` from the combiner.
pub fn analytic_joint(model: &DbcModel, spec: &CombinerSpec) -> Result<JointLaw> {
    check_model(model, spec)?;
    let (l, k, n, m) = (spec.x2_alphabet(), spec.k, model.n(), model.m());
    let mut law = JointLaw {
        dims: [l, k, n, m],
        p: vec![0.0; l * k * n * m],
    };
    for (a, row) in spec.table.iter().enumerate() {
        for (x1, &x) in row.iter().enumerate() {
            let w = spec.p_x2[a] * spec.p_x1[x1];
            if w == 0.0 {
                continue;
            }
            for y in 0..n {
                for z in 0..m {
                    let i = law.index(a, x, y, z);
                    law.p[i] += w * model.t_yx.get(y, x) * model.t_zx.get(z, x);
                }
            }
        }
    }
    Ok(law)
}

fn check_model(model: &DbcModel, spec: &CombinerSpec) -> Result<()> {
    if spec.k != model.k() {
        return Err(DbcError::mismatch(model.k(), spec.k, "combiner output alphabet"));
    }
    Ok(())
}

/// Sample counts over `(X2, X, Y, Z)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointCounts {
    pub dims: [usize; 4],
    pub counts: Vec<u64>,
    pub samples: u64,
}

impl JointCounts {
    pub fn to_law(&self) -> JointLaw {
        let t = self.samples.max(1) as f64;
        JointLaw {
            dims: self.dims,
            p: self.counts.iter().map(|&c| c as f64 / t).collect(),
        }
    }
}

/// Draws `samples` i.i.d. tuples. The work is split into [`SIM_CHUNKS`]
/// streams seeded by `(seed, chunk)` and merged by addition.
pub fn simulate_joint(model: &DbcModel, spec: &CombinerSpec, samples: u64, seed: u64, exec: Exec) -> Result<JointCounts> {
    check_model(model, spec)?;
    if samples == 0 {
        return Err(DbcError::invalid("samples must be positive"));
    }
    let (l, k, n, m) = (spec.x2_alphabet(), spec.k, model.n(), model.m());
    let c1 = cumulative(spec.p_x1.as_slice());
    let c2 = cumulative(spec.p_x2.as_slice());
    let cy: Vec<Vec<f64>> = (0..k).map(|x| cumulative(&model.t_yx.column(x))).collect();
    let cz: Vec<Vec<f64>> = (0..k).map(|x| cumulative(&model.t_zx.column(x))).collect();
    let base = samples / SIM_CHUNKS as u64;
    let extra = samples % SIM_CHUNKS as u64;
    let size = l * k * n * m;
    let parts = exec.map_range(SIM_CHUNKS, |c| {
        let count = base + u64::from((c as u64) < extra);
        let mut rng = DetRng::with_stream(seed, c as u64);
        let mut local = vec![0u64; size];
        for _ in 0..count {
            let x1 = sample_cdf(&c1, rng.uniform());
            let a = sample_cdf(&c2, rng.uniform());
            let x = spec.table[a][x1];
            let y = sample_cdf(&cy[x], rng.uniform());
            let z = sample_cdf(&cz[x], rng.uniform());
            local[((a * k + x) * n + y) * m + z] += 1;
        }
        local
    });
    let mut counts = vec![0u64; size];
    for part in parts {
        for (c, v) in counts.iter_mut().zip(part) {
            *c += v;
        }
    }
    Ok(JointCounts {
        dims: [l, k, n, m],
        counts,
        samples,
    })
}

fn conditional_entropy(joint: &[f64], outer: usize, inner: usize) -> f64 {
    // H(B | A) for a joint flattened as [a][b].
    let mut h = 0.0;
    for a in 0..outer {
        let row = &joint[a * inner..(a + 1) * inner];
        let pa: f64 = row.iter().sum();
        if pa > 0.0 {
            let cond: Vec<f64> = row.iter().map(|v| v / pa).collect();
            h += pa * h_slice(&cond);
        }
    }
    h
}

/// `(I(X; Y | X2), I(X2; Z))` in nats, plug-in from a joint law.
pub fn empirical_rates(law: &JointLaw) -> (f64, f64) {
    let [l, k, n, m] = law.dims;
    let ay = law.marginal(&[0, 2]);
    let xy = law.marginal(&[1, 2]);
    let az = law.marginal(&[0, 3]);
    let z = law.marginal(&[3]);
    let r1 = conditional_entropy(&ay, l, n) - conditional_entropy(&xy, k, n);
    let r2 = h_slice(&z) - conditional_entropy(&az, l, m);
    (r1.max(0.0), r2.max(0.0))
}

/// Rates of the exact joint law.
pub fn analytic_rates(model: &DbcModel, spec: &CombinerSpec) -> Result<(f64, f64)> {
    Ok(empirical_rates(&analytic_joint(model, spec)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub samples: u64,
    pub seed: u64,
    pub empirical_rates_nats: [f64; 2],
    pub analytic_rates_nats: [f64; 2],
    pub abs_error: [f64; 2],
}

pub fn simulation_report(model: &DbcModel, spec: &CombinerSpec, samples: u64, seed: u64, exec: Exec) -> Result<SimulationReport> {
    let counts = simulate_joint(model, spec, samples, seed, exec)?;
    let (e1, e2) = empirical_rates(&counts.to_law());
    let (a1, a2) = analytic_rates(model, spec)?;
    Ok(SimulationReport {
        samples,
        seed,
        empirical_rates_nats: [e1, e2],
        analytic_rates_nats: [a1, a2],
        abs_error: [(e1 - a1).abs(), (e2 - a2).abs()],
    })
}

/// `X = V_U` with `V = (V_1, …, V_l)` independent of `U`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndepEncoding {
    pub l: usize,
    pub k: usize,
    pub p_u: Vec<f64>,
    /// `Pr(V_j = i) = p_{X|U}(i | j)`.
    pub components: Vec<Vec<f64>>,
    /// Rows of `U` with zero mass, whose component was set to uniform.
    pub filled: Vec<usize>,
}

impl IndepEncoding {
    /// `Pr(V = v)` for `v` in `{0..k}^l`.
    pub fn p_v(&self, v: &[usize]) -> f64 {
        v.iter().zip(&self.components).map(|(&x, c)| c[x]).product()
    }

    pub fn f(&self, v: &[usize], u: usize) -> usize {
        v[u]
    }

    /// `Pr(U = u, X = x)` by summing over every `v`.
    pub fn induced_joint(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.k]; self.l];
        let total = self.k.pow(self.l as u32);
        let mut v = vec![0usize; self.l];
        for r in 0..total {
            let mut t = r;
            for j in (0..self.l).rev() {
                v[j] = t % self.k;
                t /= self.k;
            }
            let pv = self.p_v(&v);
            for u in 0..self.l {
                out[u][self.f(&v, u)] += self.p_u[u] * pv;
            }
        }
        out
    }
}

/// Builds `V` with independent components `V_j ~ p_{X|U=j}` from a joint
/// law given as rows `p_UX[u][x]`.
pub fn build_independent_encoding(p_ux: &[Vec<f64>]) -> Result<IndepEncoding> {
    let l = p_ux.len();
    let k = p_ux.first().map_or(0, |r| r.len());
    if l == 0 || k == 0 {
        return Err(DbcError::invalid("empty joint law"));
    }
    if k.checked_pow(l as u32).is_none_or(|t| t > 1 << 24) {
        return Err(DbcError::Unsupported(format!("{k}^{l} outcomes of V")));
    }
    let mut total = 0.0;
    for (u, row) in p_ux.iter().enumerate() {
        if row.len() != k {
            return Err(DbcError::mismatch(k, row.len(), format!("joint law row {u}")));
        }
        if let Some(&x) = row.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(DbcError::invalid(format!("joint law entry {x} in row {u}")));
        }
        total += row.iter().sum::<f64>();
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(DbcError::invalid(format!("joint law sums to {total}")));
    }
    let mut p_u = Vec::with_capacity(l);
    let mut components = Vec::with_capacity(l);
    let mut filled = Vec::new();
    for (u, row) in p_ux.iter().enumerate() {
        let pu: f64 = row.iter().sum();
        p_u.push(pu);
        if pu > 0.0 {
            components.push(row.iter().map(|x| x / pu).collect());
        } else {
            components.push(vec![1.0 / k as f64; k]);
            filled.push(u);
        }
    }
    Ok(IndepEncoding {
        l,
        k,
        p_u,
        components,
        filled,
    })
}

/// Joint law rows `w_j p_j` of a strategy.
pub fn strategy_joint(s: &TransmissionStrategy) -> Vec<Vec<f64>> {
    s.weights
        .iter()
        .zip(&s.columns)
        .map(|(w, c)| c.iter().map(|x| w * x).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_broadcast_bsc, make_broadcast_z};
    use crate::prob::{h2, StochasticMatrix};

    #[test]
    fn identity_and_constant_encodings() {
        let e = build_independent_encoding(&[vec![0.3, 0.0], vec![0.0, 0.7]]).unwrap();
        let j = e.induced_joint();
        assert_eq!(j, vec![vec![0.3, 0.0], vec![0.0, 0.7]]);
        let e = build_independent_encoding(&[vec![0.25, 0.5, 0.25]]).unwrap();
        assert_eq!(e.induced_joint(), vec![vec![0.25, 0.5, 0.25]]);
        let e = build_independent_encoding(&[vec![0.0, 0.0], vec![0.4, 0.6]]).unwrap();
        assert_eq!(e.filled, vec![0]);
        assert!(build_independent_encoding(&[vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn z_strategy_encoding_exact() {
        let s = crate::closed_form::z_strategy(0.3, 0.6);
        let target = strategy_joint(&s);
        let j = build_independent_encoding(&target).unwrap().induced_joint();
        for (a, b) in j.iter().flatten().zip(target.iter().flatten()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn or_combiner_input_law() {
        let (q, p) = (0.3, 0.6);
        let spec = CombinerSpec::z_strategy(q, p).unwrap();
        let x = spec.input_law();
        assert!((x[1] - q).abs() < 1e-15);
        let m = make_broadcast_z(0.1, 0.4).unwrap();
        let c = simulate_joint(&m, &spec, 200_000, 3, Exec::auto()).unwrap();
        let law = c.to_law();
        let px = law.marginal(&[1]);
        let sigma = (q * (1.0 - q) / 200_000f64).sqrt();
        assert!((px[1] - q).abs() < 3.0 * sigma);
    }

    #[test]
    fn noiseless_channel_copies_input() {
        let t = StochasticMatrix::identity(2);
        let m = DbcModel::new(t.clone(), t, None).unwrap();
        let spec = CombinerSpec::permutation(
            &[vec![0, 1], vec![1, 0]],
            ProbVector::binary(0.3).unwrap(),
            ProbVector::uniform(2),
        )
        .unwrap();
        let law = simulate_joint(&m, &spec, 10_000, 1, Exec::auto()).unwrap().to_law();
        let xy = law.marginal(&[1, 2]);
        assert!((xy[0] + xy[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_x2_carries_nothing() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let spec = CombinerSpec::permutation(
            &[vec![0, 1], vec![1, 0]],
            ProbVector::binary(0.3).unwrap(),
            ProbVector::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let (_, r2) = analytic_rates(&m, &spec).unwrap();
        assert!(r2.abs() < 1e-15);
        let law = simulate_joint(&m, &spec, 10_000, 1, Exec::auto()).unwrap().to_law();
        assert!(empirical_rates(&law).1.abs() < 1e-15);
    }

    #[test]
    fn bsc_permutation_rates_match_formula() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let spec = CombinerSpec::permutation(
            &[vec![0, 1], vec![1, 0]],
            ProbVector::new(vec![0.7, 0.3]).unwrap(),
            ProbVector::uniform(2),
        )
        .unwrap();
        let (r1, r2) = analytic_rates(&m, &spec).unwrap();
        let p1 = [0.7, 0.3];
        assert!((r1 - (m.h_y(&p1) - h2(0.1))).abs() < 1e-12);
        assert!((r2 - (2f64.ln() - m.h_z(&p1))).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_reproducible() {
        let m = make_broadcast_bsc(0.1, 0.2).unwrap();
        let spec = CombinerSpec::permutation(
            &[vec![0, 1], vec![1, 0]],
            ProbVector::new(vec![0.7, 0.3]).unwrap(),
            ProbVector::uniform(2),
        )
        .unwrap();
        let a = simulate_joint(&m, &spec, 50_001, 9, Exec::Parallel).unwrap();
        let b = simulate_joint(&m, &spec, 50_001, 9, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>(), 50_001);
        let c = simulate_joint(&m, &spec, 50_001, 10, Exec::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn permutation_rows_validated() {
        let r = CombinerSpec::permutation(&[vec![0, 0]], ProbVector::uniform(2), ProbVector::uniform(1));
        assert!(r.is_err());
    }
}
