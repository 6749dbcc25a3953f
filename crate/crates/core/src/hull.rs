//! Monotone-chain convex hulls of planar point sets.

/// Indices of the lower convex hull of `pts`, ordered by increasing `x`.
/// Points with equal `x` keep only the lowest `y`.
pub fn lower_hull(pts: &[(f64, f64)]) -> Vec<usize> {
    chain(pts, |cross| cross <= 0.0)
}

/// Indices of the upper convex hull, ordered by increasing `x`.
pub fn upper_hull(pts: &[(f64, f64)]) -> Vec<usize> {
    chain(pts, |cross| cross >= 0.0)
}

fn chain(pts: &[(f64, f64)], pop: impl Fn(f64) -> bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        pts[a]
            .0
            .total_cmp(&pts[b].0)
            .then(pts[a].1.total_cmp(&pts[b].1))
    });
    let upper = pop(1.0) && !pop(-1.0);
    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        if let Some(&last) = hull.last() {
            if pts[last].0 == pts[i].0 {
                // Same abscissa: lower hull keeps the first (lowest), upper the last.
                if upper {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let a = pts[hull[hull.len() - 2]];
            let b = pts[hull[hull.len() - 1]];
            let c = pts[i];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if pop(cross) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Piecewise-linear function through hull vertices.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Original point index of each vertex.
    pub idx: Vec<usize>,
}

impl PiecewiseLinear {
    pub fn lower_envelope(pts: &[(f64, f64)]) -> Self {
        let h = lower_hull(pts);
        PiecewiseLinear {
            xs: h.iter().map(|&i| pts[i].0).collect(),
            ys: h.iter().map(|&i| pts[i].1).collect(),
            idx: h,
        }
    }

    /// Returns the value at `x` and the bracketing vertices `(a, b, θ)` with
    /// `x = θ·xs[a] + (1 − θ)·xs[b]`. `None` outside the domain.
    pub fn locate(&self, x: f64) -> Option<(f64, usize, usize, f64)> {
        let n = self.xs.len();
        if n == 0 || x < self.xs[0] - 1e-15 || x > self.xs[n - 1] + 1e-15 {
            return None;
        }
        if n == 1 {
            return Some((self.ys[0], 0, 0, 1.0));
        }
        let b = self.xs.partition_point(|&v| v < x).clamp(1, n - 1);
        let a = b - 1;
        let w = self.xs[b] - self.xs[a];
        let theta = if w > 0.0 { ((self.xs[b] - x) / w).clamp(0.0, 1.0) } else { 1.0 };
        Some((theta * self.ys[a] + (1.0 - theta) * self.ys[b], a, b, theta))
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        self.locate(x).map(|(v, ..)| v)
    }
}
