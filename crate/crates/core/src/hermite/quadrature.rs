//! One-dimensional rules and their tensor products.
//!
//! Every rule stores *Lebesgue* weights `w̃_i`, so `Σ w̃_i f(x_i) ≈ ∫ f dx`,
//! plus the logarithm of the Gaussian weights `ln w_i = ln w̃_i − x_i²`.
//! The Gaussian weights themselves underflow for a few hundred nodes, so
//! only their logarithms are kept.

use crate::error::{invalid, Error, Result};
use crate::hermite::functions::scaled_recurrence;

/// Default guard on the total number of tensor nodes.
pub const DEFAULT_NODE_CAP: usize = 1 << 22;

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL, ascending.
///
/// `off[i]` couples rows `i` and `i + 1`.
pub(crate) fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1));
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Which construction produced an [`AxisRule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisKind {
    GaussHermite,
    /// Composite Gauss–Legendre on `[-L, L]` with a panel edge at the origin.
    SplitLegendre {
        half_length: f64,
        panels_per_side: usize,
        order: usize,
    },
}

/// A one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRule {
    kind: AxisKind,
    nodes: Vec<f64>,
    lebesgue_weights: Vec<f64>,
    log_weights: Vec<f64>,
    capacity: usize,
}

impl AxisRule {
    /// The `m`-point Gauss–Hermite rule.
    ///
    /// Nodes are the eigenvalues of the Jacobi matrix, polished by Newton
    /// steps on `h_m` and then symmetrized. Lebesgue weights come from
    /// `w̃_i = 1 / (m h_{m-1}(x_i)²)`.
    pub fn gauss_hermite(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("Gauss-Hermite rule needs m >= 1"));
        }
        let diag = vec![0.0; m];
        let off: Vec<f64> = (1..m).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let mut nodes = tridiagonal_eigenvalues(&diag, &off);
        let scale = (2.0 * m as f64).sqrt();
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let s = scaled_recurrence(m, *x);
                let deriv = scale * s.previous - *x * s.current;
                if deriv == 0.0 {
                    break;
                }
                let dx = s.current / deriv;
                *x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        for i in 0..m / 2 {
            let a = 0.5 * (nodes[m - 1 - i] - nodes[i]);
            nodes[i] = -a;
            nodes[m - 1 - i] = a;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        let ln_m = (m as f64).ln();
        let mut lebesgue_weights = Vec::with_capacity(m);
        let mut log_weights = Vec::with_capacity(m);
        for &x in &nodes {
            let s = scaled_recurrence(m - 1, x);
            // ln h_{m-1}(x)² without forming h_{m-1}
            let ln_h2 = 2.0 * s.current.abs().ln() + 2.0 * s.log_scale - x * x;
            let ln_wt = -ln_m - ln_h2;
            lebesgue_weights.push(ln_wt.exp());
            log_weights.push(ln_wt - x * x);
        }
        Ok(Self {
            kind: AxisKind::GaussHermite,
            nodes,
            lebesgue_weights,
            log_weights,
            capacity: m,
        })
    }

    /// Composite Gauss–Legendre rule resolving every Hermite function with
    /// eigenvalue up to `max_eigenvalue`.
    ///
    /// Unlike Gauss–Hermite it has a panel edge at the origin, so integrands
    /// with a kink there (such as `(1+|x|)^{-α}` or `|x|`) converge at the
    /// rule's full order.
    pub fn split_legendre(max_eigenvalue: usize) -> Result<Self> {
        if max_eigenvalue == 0 {
            return Err(invalid("split rule needs a positive eigenvalue cap"));
        }
        const ORDER: usize = 20;
        let root = (max_eigenvalue as f64).sqrt();
        let half_length = root + 8.0;
        let k_max = 2.0 * root + 2.0;
        let target_half_width = (3.5 / k_max).min(0.25);
        let panels_per_side = (half_length / (2.0 * target_half_width)).ceil() as usize;
        let width = half_length / panels_per_side as f64;
        let (gx, gw) = gauss_legendre(ORDER);
        let total = 2 * panels_per_side * ORDER;
        let mut nodes = Vec::with_capacity(total);
        let mut lebesgue_weights = Vec::with_capacity(total);
        for panel in 0..2 * panels_per_side {
            let a = -half_length + panel as f64 * width;
            let mid = a + 0.5 * width;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * width * x);
                lebesgue_weights.push(0.5 * width * w);
            }
        }
        let log_weights = nodes
            .iter()
            .zip(&lebesgue_weights)
            .map(|(x, w)| w.ln() - x * x)
            .collect();
        Ok(Self {
            kind: AxisKind::SplitLegendre {
                half_length,
                panels_per_side,
                order: ORDER,
            },
            nodes,
            lebesgue_weights,
            log_weights,
            capacity: max_eigenvalue,
        })
    }

    pub fn kind(&self) -> AxisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn lebesgue_weights(&self) -> &[f64] {
        &self.lebesgue_weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Largest eigenvalue cap the rule supports for transforms.
    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub(crate) fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    for i in 0..p.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (p as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=p {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if p == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = p as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[p - 1 - i] = x;
        weights[i] = w;
        weights[p - 1 - i] = w;
    }
    if p % 2 == 1 {
        nodes[p / 2] = 0.0;
    }
    (nodes, weights)
}

/// Tensor product of one axis rule over `n` dimensions.
///
/// Flat node `i` has axis indices given by the base-`m` digits of `i`,
/// most significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dimension: usize,
    axis: AxisRule,
    nodes: Vec<f64>,
    lebesgue_weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn tensor(n: usize, axis: AxisRule, node_cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        let m = axis.len();
        let total = u32::try_from(n)
            .ok()
            .and_then(|e| m.checked_pow(e))
            .unwrap_or(usize::MAX);
        if total > node_cap {
            return Err(Error::ResourceLimit {
                what: "tensor grid",
                requested: total,
                cap: node_cap,
            });
        }
        let mut nodes = Vec::with_capacity(total * n);
        let mut lebesgue_weights = Vec::with_capacity(total);
        let mut log_weights = Vec::with_capacity(total);
        let mut digits = vec![0usize; n];
        for _ in 0..total {
            let mut w = 1.0;
            let mut lw = 0.0;
            for &d in &digits {
                nodes.push(axis.nodes[d]);
                w *= axis.lebesgue_weights[d];
                lw += axis.log_weights[d];
            }
            lebesgue_weights.push(w);
            log_weights.push(lw);
            for slot in digits.iter_mut().rev() {
                *slot += 1;
                if *slot < m {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(Self {
            dimension: n,
            axis,
            nodes,
            lebesgue_weights,
            log_weights,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn axis(&self) -> &AxisRule {
        &self.axis
    }

    pub fn points_per_axis(&self) -> usize {
        self.axis.len()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.lebesgue_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lebesgue_weights.is_empty()
    }

    /// Largest eigenvalue cap this grid supports for transforms.
    pub fn capacity(&self) -> usize {
        self.axis.capacity()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dimension)
    }

    /// Weights for integrals against Lebesgue measure.
    pub fn lebesgue_weights(&self) -> &[f64] {
        &self.lebesgue_weights
    }

    /// `ln` of the Gauss–Hermite weights, valid against `e^{-|x|²}`.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Gauss–Hermite weights; zero where they underflow.
    pub fn gaussian_weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// `Σ w̃_i f(x_i)`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.lebesgue_weights).map(|(v, w)| v * w).sum()
    }
}

/// The `m`-point Gauss–Hermite rule in one dimension.
pub fn gauss_hermite_quadrature(m: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::tensor(1, AxisRule::gauss_hermite(m)?, DEFAULT_NODE_CAP)
}

/// `n`-fold tensor Gauss–Hermite grid with `m` points per axis.
pub fn tensor_grid(n: usize, m: usize) -> Result<QuadratureGrid> {
    tensor_grid_with_cap(n, m, DEFAULT_NODE_CAP)
}

pub fn tensor_grid_with_cap(n: usize, m: usize, node_cap: usize) -> Result<QuadratureGrid> {
    if n == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    QuadratureGrid::tensor(n, AxisRule::gauss_hermite(m)?, node_cap)
}

/// Default points per axis for an eigenvalue cap: `2 Λ_max`.
pub fn default_points_per_axis(max_eigenvalue: usize) -> usize {
    (2 * max_eigenvalue).max(1)
}
