//! Commutators `[b, T]f = b·Tf − T(bf)` of multiplication by a BMO function
//! with functions of `√H`, and the maximal and square functions built on them.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hermite::{gauss_legendre, QuadratureGrid};
use crate::spectral::{
    apply_multiplier, riesz_factor, GridField, HermiteBasis, SpectralCoeffs, SpectralSymbol, SymbolKind,
};

/// Relative `L²` mass of `b·f` outside the working band above which a
/// warning is logged.
pub const DEFAULT_ALIASING_TOLERANCE: f64 = 1e-3;

/// Serial or rayon-parallel evaluation. Both give identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    Parallel,
}

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A real function `b` on `ℝⁿ` used as a commutator symbol.
#[derive(Clone)]
pub struct BmoSymbol {
    evaluator: PointFn,
    descriptor: String,
    constant: Option<f64>,
    bmo_estimate: Option<f64>,
}

impl fmt::Debug for BmoSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BmoSymbol")
            .field("descriptor", &self.descriptor)
            .field("bmo_estimate", &self.bmo_estimate)
            .finish_non_exhaustive()
    }
}

impl BmoSymbol {
    pub fn new(descriptor: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(f),
            descriptor: descriptor.into(),
            constant: None,
            bmo_estimate: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            evaluator: Arc::new(move |_| c),
            descriptor: format!("const:{c}"),
            constant: Some(c),
            bmo_estimate: Some(0.0),
        }
    }

    /// `b(x) = sin(x_1)`
    pub fn sin() -> Self {
        Self::new("sin", |x| x[0].sin())
    }

    /// `b(x) = log(1 + |x|)`
    pub fn log1p_abs() -> Self {
        Self::new("log1p_abs", |x| norm(x).ln_1p())
    }

    /// `b(x) = sign(x_1) log(1 + |x|)`, unbounded and odd.
    pub fn sign_times_log() -> Self {
        Self::new("sign_times_log", |x| {
            let s = if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            };
            s * norm(x).ln_1p()
        })
    }

    /// Looks up `const:<c>`, `sin`, `log1p_abs` or `sign_times_log`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        if let Some(c) = name.strip_prefix("const:") {
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad constant in symbol {name:?}")))?;
            if !c.is_finite() {
                return Err(invalid(format!("constant symbol must be finite, got {c}")));
            }
            return Ok(Self::constant(c));
        }
        match name {
            "sin" => Ok(Self::sin()),
            "log1p_abs" => Ok(Self::log1p_abs()),
            "sign_times_log" => Ok(Self::sign_times_log()),
            _ => Err(invalid(format!(
                "unknown symbol {name:?}; expected const:<c>, sin, log1p_abs or sign_times_log"
            ))),
        }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn bmo_estimate(&self) -> Option<f64> {
        self.bmo_estimate
    }

    /// Fills in the dyadic BMO estimate on `[-L, L]ⁿ` with `levels` levels.
    pub fn with_bmo_estimate(mut self, n: usize, half_width: f64, levels: u32) -> Result<Self> {
        let est = bmo_norm_estimate(&self, n, half_width, levels)?;
        self.bmo_estimate = Some(est);
        Ok(self)
    }

    /// `b` at every node, checked finite.
    pub fn sample(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        let values: Vec<f64> = grid.nodes().map(|x| self.eval(x)).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("symbol {} is not finite at node {i}", self.descriptor)));
        }
        Ok(values)
    }

    /// `b + c`
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.clone();
        let mut out = Self::new(format!("{}+{c}", self.descriptor), move |x| inner.eval(x) + c);
        out.constant = self.constant.map(|v| v + c);
        out.bmo_estimate = self.bmo_estimate;
        out
    }

    /// `b₁ + b₂`
    pub fn sum(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let mut out = Self::new(format!("{}+{}", self.descriptor, other.descriptor), move |x| {
            a.eval(x) + b.eval(x)
        });
        out.constant = match (self.constant, other.constant) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        out
    }
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Result of a single commutator evaluation.
#[derive(Debug, Clone)]
pub struct CommutatorOutput {
    pub field: GridField,
    /// `‖b·f − P(b·f)‖ / ‖b·f‖` for the working band `P`.
    pub truncation_residual: f64,
}

/// `[b, T]f` on the nodes of `basis`, with `T = F(√H)` applied through
/// forward and inverse transforms at the basis band.
pub fn commutator_apply(
    b: &BmoSymbol,
    symbol: &SpectralSymbol,
    f: &GridField,
    basis: &HermiteBasis,
) -> Result<CommutatorOutput> {
    let grid = basis.grid().clone();
    if symbol.kind() == SymbolKind::Identity || b.is_constant() {
        return Ok(CommutatorOutput {
            field: GridField::zeros(grid),
            truncation_residual: 0.0,
        });
    }
    let bvals = b.sample(&grid)?;
    let cf = basis.forward(f)?;
    let tf = basis.inverse_values(&apply_multiplier(&cf, symbol)?)?;
    let bf: Vec<f64> = bvals.iter().zip(f.values()).map(|(b, v)| b * v).collect();
    let cbf = basis.forward_values(&bf)?;
    let pbf = basis.inverse_values(&cbf)?;
    let residual = relative_residual(&grid, &bf, &pbf);
    warn_aliasing(b, residual);
    let tbf = basis.inverse_values(&apply_multiplier(&cbf, symbol)?)?;
    let values = bvals.iter().zip(&tf).zip(&tbf).map(|((b, t), s)| b * t - s).collect();
    Ok(CommutatorOutput {
        field: GridField::new(grid, values)?,
        truncation_residual: residual,
    })
}

fn relative_residual(grid: &QuadratureGrid, full: &[f64], projected: &[f64]) -> f64 {
    let w = grid.lebesgue_weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((a, p), w) in full.iter().zip(projected).zip(w) {
        num += w * (a - p) * (a - p);
        den += w * a * a;
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

fn warn_aliasing(b: &BmoSymbol, residual: f64) {
    if residual > DEFAULT_ALIASING_TOLERANCE {
        log::warn!(
            "b*f for symbol {} leaves relative L2 mass {residual:.3e} outside the working band",
            b.descriptor()
        );
    }
}

/// The pieces `D_λ = b·P_λ f − P_λ(b f)` of a commutator, one per
/// eigenvalue of the working band, so that `[b, F(√H)]f = Σ_λ F(√λ) D_λ`.
#[derive(Debug, Clone)]
pub struct CommutatorSpectrum {
    grid: Arc<QuadratureGrid>,
    eigenvalues: Vec<usize>,
    /// Node-major: `pieces[i * ne + e]`.
    pieces: Vec<f64>,
    truncation_residual: f64,
}

impl CommutatorSpectrum {
    /// `f` must lie in a band no larger than `basis`'s band; `b·f` is
    /// projected onto the full basis band.
    pub fn new(b: &BmoSymbol, f: &SpectralCoeffs, basis: &HermiteBasis) -> Result<Self> {
        let grid = basis.grid().clone();
        let band = basis.band();
        let n = band.dimension();
        let ne = band.eigenspace_count();
        let eigenvalues: Vec<usize> = (0..ne).map(|d| 2 * d + n).collect();
        let nodes = grid.len();
        if b.is_constant() {
            return Ok(Self {
                grid,
                eigenvalues,
                pieces: vec![0.0; nodes * ne],
                truncation_residual: 0.0,
            });
        }
        if f.band().max_eigenvalue() > band.max_eigenvalue() {
            return Err(Error::UndersizedGrid {
                band: f.band().max_eigenvalue(),
                required: f.band().max_eigenvalue(),
                actual: band.max_eigenvalue(),
            });
        }
        let bvals = b.sample(&grid)?;
        let parts_f = basis.eigenspace_fields(f)?;
        let mut fvals = vec![0.0; nodes];
        for part in &parts_f {
            for (acc, v) in fvals.iter_mut().zip(part) {
                *acc += v;
            }
        }
        let bf: Vec<f64> = bvals.iter().zip(&fvals).map(|(b, v)| b * v).collect();
        let cbf = basis.forward_values(&bf)?;
        let parts_bf = basis.eigenspace_fields(&cbf)?;
        let mut pbf = vec![0.0; nodes];
        let mut pieces = vec![0.0; nodes * ne];
        for (e, part) in parts_bf.iter().enumerate() {
            for i in 0..nodes {
                pbf[i] += part[i];
                pieces[i * ne + e] = -part[i];
            }
        }
        for (e, part) in parts_f.iter().enumerate() {
            for i in 0..nodes {
                pieces[i * ne + e] += bvals[i] * part[i];
            }
        }
        let truncation_residual = relative_residual(&grid, &bf, &pbf);
        warn_aliasing(b, truncation_residual);
        Ok(Self {
            grid,
            eigenvalues,
            pieces,
            truncation_residual,
        })
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[usize] {
        &self.eigenvalues
    }

    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    /// `D_λ(x_i)` for every eigenvalue, at node `i`.
    pub fn pieces_at(&self, i: usize) -> &[f64] {
        let ne = self.eigenvalues.len();
        &self.pieces[i * ne..(i + 1) * ne]
    }

    /// `Σ_λ c_λ D_λ` at every node.
    pub fn combine(&self, factors: &[f64]) -> Vec<f64> {
        (0..self.grid.len()).map(|i| dot(self.pieces_at(i), factors)).collect()
    }

    /// `[b, F(√H)]f` at every node.
    pub fn apply(&self, symbol: &SpectralSymbol) -> Result<GridField> {
        let factors = self.symbol_factors(symbol)?;
        GridField::new(self.grid.clone(), self.combine(&factors))
    }

    fn symbol_factors(&self, symbol: &SpectralSymbol) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&e| {
                let v = symbol.eval((e as f64).sqrt());
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NumericDomain {
                        index: vec![e as u32],
                        value: v,
                    })
                }
            })
            .collect()
    }

    /// `max_R |[b, S_R^λ(H)]f|` at every node over `radii`.
    pub fn maximal_riesz(&self, lambda: f64, radii: &[f64], exec: Execution) -> Result<GridField> {
        if radii.is_empty() {
            return Err(invalid("radius grid is empty"));
        }
        if !(lambda >= 0.0) {
            return Err(invalid(format!("Bochner-Riesz order must be >= 0, got {lambda}")));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
            return Err(invalid(format!("radii must be positive, got {r}")));
        }
        let factors: Vec<Vec<f64>> = radii
            .iter()
            .map(|&r| {
                self.eigenvalues
                    .iter()
                    .map(|&e| riesz_factor(e as f64, r, lambda))
                    .collect()
            })
            .collect();
        let node = |i: usize| {
            let p = self.pieces_at(i);
            factors.iter().fold(0.0f64, |m, fac| m.max(dot(p, fac).abs()))
        };
        let values: Vec<f64> = match exec {
            Execution::Serial => (0..self.grid.len()).map(node).collect(),
            Execution::Parallel => (0..self.grid.len()).into_par_iter().map(node).collect(),
        };
        GridField::new(self.grid.clone(), values)
    }

    /// `G_{b,δ} f` at every node.
    pub fn square_function(&self, spec: &SquareFunctionSpec, exec: Execution) -> Result<GridField> {
        let lo = *self.eigenvalues.first().unwrap_or(&1) as f64;
        let hi = *self.eigenvalues.last().unwrap_or(&1) as f64;
        let (req_lo, req_hi) = spec.required_range(lo, hi);
        spec.t_grid.check_coverage(req_lo, req_hi)?;
        let gram = spec.gram(&self.eigenvalues);
        let node = |i: usize| {
            let p = self.pieces_at(i);
            let mut s = 0.0;
            for (a, row) in gram.rows.iter().enumerate() {
                if p[a] == 0.0 {
                    continue;
                }
                let inner: f64 = row
                    .values
                    .iter()
                    .zip(&p[row.start..row.start + row.values.len()])
                    .map(|(m, d)| m * d)
                    .sum();
                s += p[a] * inner;
            }
            s.max(0.0).sqrt()
        };
        let values: Vec<f64> = match exec {
            Execution::Serial => (0..self.grid.len()).map(node).collect(),
            Execution::Parallel => (0..self.grid.len()).into_par_iter().map(node).collect(),
        };
        GridField::new(self.grid.clone(), values)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Geometric radius grid with `per_octave` points per doubling, including
/// both endpoints.
pub fn geometric_grid(lo: f64, hi: f64, per_octave: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || per_octave == 0 {
        return Err(invalid(format!(
            "geometric grid needs 0 < lo <= hi and a positive density, got [{lo}, {hi}] at {per_octave}"
        )));
    }
    let octaves = (hi / lo).log2();
    let steps = (octaves * per_octave as f64).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / steps as f64;
    Ok((0..=steps)
        .map(|k| if k == steps { hi } else { lo * (ratio * k as f64).exp() })
        .collect())
}

/// Default radius grid for a band: 8 points per octave on `[1, √(2Λ)]`.
pub fn default_radius_grid(max_eigenvalue: usize) -> Vec<f64> {
    geometric_grid(1.0, (2.0 * max_eigenvalue as f64).sqrt().max(1.0), 8).expect("valid default grid")
}

/// `max_R |[b, S_R^λ(H)]f|` pointwise over `radii`.
pub fn maximal_commutator(
    b: &BmoSymbol,
    lambda: f64,
    f: &SpectralCoeffs,
    radii: &[f64],
    basis: &HermiteBasis,
    exec: Execution,
) -> Result<GridField> {
    CommutatorSpectrum::new(b, f, basis)?.maximal_riesz(lambda, radii, exec)
}

/// Points `t_i` uniform in `log t` with weights `w_i = ln(t_{i+1}/t_i)`
/// discretizing `dt/t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("t-grid needs at least two points"));
        }
        if points[0] <= 0.0 || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("t-grid must be positive and strictly increasing"));
        }
        let mut weights: Vec<f64> = points.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        weights.push(*weights.last().expect("two points"));
        Ok(Self { points, weights })
    }

    /// `[lo, hi]` at `per_octave` points per doubling.
    pub fn geometric(lo: f64, hi: f64, per_octave: usize) -> Result<Self> {
        Self::new(geometric_grid(lo, hi, per_octave)?)
    }

    /// Points per octave giving at least 32 points across each support
    /// window of `φ_δ`, and never fewer than 16.
    pub fn default_density(delta: f64) -> usize {
        // each window spans about 3δ/16 in log t
        let per_window = 32.0 * std::f64::consts::LN_2 * 16.0 / (3.0 * delta);
        (per_window.ceil() as usize).max(16)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn check_coverage(&self, lo: f64, hi: f64) -> Result<()> {
        let a = self.points[0];
        let b = *self.points.last().expect("non-empty");
        if a > lo * (1.0 + 1e-12) || b < hi * (1.0 - 1e-12) {
            return Err(Error::Coverage {
                required_lo: lo,
                required_hi: hi,
                actual_lo: a,
                actual_hi: b,
            });
        }
        Ok(())
    }
}

/// `δ`, the annular bump `φ` and the `t`-grid of the square function
/// `G_{b,δ}f = (∫ |[b, φ(δ^{-1}(1 − H/t²))]f|² dt/t)^{1/2}`.
#[derive(Debug, Clone)]
pub struct SquareFunctionSpec {
    delta: f64,
    phi: SpectralSymbol,
    t_grid: TGrid,
}

struct BandedRow {
    start: usize,
    values: Vec<f64>,
}

struct BandedGram {
    rows: Vec<BandedRow>,
}

impl SquareFunctionSpec {
    pub fn new(delta: f64, phi: SpectralSymbol, t_grid: TGrid) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        match phi.support() {
            Some((a, b)) if a >= -0.5 && b <= 0.5 => {}
            _ => return Err(invalid("phi must declare a support inside [-1/2, 1/2]")),
        }
        if phi.sup_bound().is_none_or(|s| s > 1.0) {
            return Err(invalid("phi must declare sup |phi| <= 1"));
        }
        Ok(Self { delta, phi, t_grid })
    }

    /// A spec whose `t`-grid covers every eigenvalue in `[λ_lo, λ_hi]` at
    /// `per_octave` points per doubling (default density when `None`).
    pub fn covering(
        delta: f64,
        phi: SpectralSymbol,
        lambda_lo: f64,
        lambda_hi: f64,
        per_octave: Option<usize>,
    ) -> Result<Self> {
        let probe = Self::new(delta, phi, TGrid::new(vec![1.0, 2.0])?)?;
        let (lo, hi) = probe.required_range(lambda_lo, lambda_hi);
        let density = per_octave.unwrap_or_else(|| TGrid::default_density(delta));
        Self::new(delta, probe.phi, TGrid::geometric(lo, hi, density)?)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phi(&self) -> &SpectralSymbol {
        &self.phi
    }

    pub fn t_grid(&self) -> &TGrid {
        &self.t_grid
    }

    /// Same spec with the `t`-grid density multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let pts = self.t_grid.points();
        let lo = pts[0];
        let hi = *pts.last().expect("non-empty");
        let per_octave = ((pts.len() - 1) as f64 / (hi / lo).log2()).round() as usize;
        Self::new(
            self.delta,
            self.phi.clone(),
            TGrid::geometric(lo, hi, per_octave.max(1) * factor)?,
        )
    }

    /// Range of `t` where `φ(δ^{-1}(1 − λ/t²))` is non-zero for some
    /// eigenvalue `λ ∈ [lo, hi]`.
    pub fn required_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (a, b) = self.phi.support().expect("validated support");
        (
            (lo / (1.0 - self.delta * a)).sqrt(),
            (hi / (1.0 - self.delta * b)).sqrt(),
        )
    }

    fn multiplier(&self, eigenvalue: f64, t: f64) -> f64 {
        self.phi.eval((1.0 - eigenvalue / (t * t)) / self.delta)
    }

    /// `M_{λλ'} = Σ_t w_t m_λ(t) m_λ'(t)`, stored as banded rows over
    /// eigenvalue indices.
    fn gram(&self, eigenvalues: &[usize]) -> BandedGram {
        let ne = eigenvalues.len();
        let mut dense_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ne];
        let (a, b) = self.phi.support().expect("validated support");
        let first = eigenvalues.first().copied().unwrap_or(0) as f64;
        for (&t, &w) in self.t_grid.points().iter().zip(self.t_grid.weights()) {
            let t2 = t * t;
            let lo = t2 * (1.0 - self.delta * b);
            let hi = t2 * (1.0 - self.delta * a);
            // eigenvalues are first + 2e
            let e_lo = ((lo - first) / 2.0).ceil().max(0.0) as usize;
            let e_hi = ((hi - first) / 2.0).floor();
            if e_hi < 0.0 {
                continue;
            }
            let e_hi = (e_hi as usize).min(ne.saturating_sub(1));
            if e_lo > e_hi {
                continue;
            }
            let vals: Vec<f64> = (e_lo..=e_hi)
                .map(|e| self.multiplier(eigenvalues[e] as f64, t))
                .collect();
            for (i, &vi) in vals.iter().enumerate() {
                if vi == 0.0 {
                    continue;
                }
                for (j, &vj) in vals.iter().enumerate() {
                    if vj != 0.0 {
                        dense_rows[e_lo + i].push((e_lo + j, w * vi * vj));
                    }
                }
            }
        }
        let rows = dense_rows
            .into_iter()
            .map(|entries| {
                if entries.is_empty() {
                    return BandedRow {
                        start: 0,
                        values: Vec::new(),
                    };
                }
                let start = entries.iter().map(|e| e.0).min().expect("non-empty");
                let end = entries.iter().map(|e| e.0).max().expect("non-empty");
                let mut values = vec![0.0; end - start + 1];
                for (j, v) in entries {
                    values[j - start] += v;
                }
                BandedRow { start, values }
            })
            .collect();
        BandedGram { rows }
    }
}

/// `G_{b,δ} f` at every node of `basis`.
pub fn square_function(
    b: &BmoSymbol,
    spec: &SquareFunctionSpec,
    f: &SpectralCoeffs,
    basis: &HermiteBasis,
    exec: Execution,
) -> Result<GridField> {
    CommutatorSpectrum::new(b, f, basis)?.square_function(spec, exec)
}

/// Per-axis cells around the nodes of a tensor grid: cell `j` is bounded
/// by the midpoints to its neighbours, mirrored at the ends.
fn axis_cells(nodes: &[f64]) -> Vec<(f64, f64)> {
    let m = nodes.len();
    (0..m)
        .map(|j| {
            let left = if j > 0 {
                0.5 * (nodes[j - 1] + nodes[j])
            } else if m > 1 {
                nodes[0] - 0.5 * (nodes[1] - nodes[0])
            } else {
                nodes[0] - 0.5
            };
            let right = if j + 1 < m {
                0.5 * (nodes[j] + nodes[j + 1])
            } else if m > 1 {
                nodes[m - 1] + 0.5 * (nodes[m - 1] - nodes[m - 2])
            } else {
                nodes[0] + 0.5
            };
            (left, right)
        })
        .collect()
}

/// `M_b f(x) = sup_r r^{-n} ∫_{|x−y|<r} |b(x) − b(y)| |f(y)| dy`.
///
/// Each node carries the cell between the midpoints to its neighbours and
/// contributes its quadrature weight times the fraction of that cell inside
/// the ball: exactly in one dimension, by sub-sampling the cell otherwise.
pub fn hl_maximal_commutator(b: &BmoSymbol, f: &GridField, radii: &[f64], exec: Execution) -> Result<GridField> {
    if radii.is_empty() {
        return Err(invalid("radius grid is empty"));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(invalid(format!("radii must be positive, got {r}")));
    }
    let grid = f.grid().clone();
    if b.is_constant() {
        return Ok(GridField::zeros(grid));
    }
    let n = grid.dimension();
    let m = grid.points_per_axis();
    let bvals = b.sample(&grid)?;
    let cells = axis_cells(grid.axis().nodes());
    let weights = grid.lebesgue_weights();
    let absf: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    const SUB: usize = 4;
    let node = |i: usize| -> f64 {
        let x = grid.node(i);
        let bx = bvals[i];
        let mut best = 0.0f64;
        for &r in radii {
            let mut acc = 0.0;
            for j in 0..grid.len() {
                if absf[j] == 0.0 {
                    continue;
                }
                let frac = if n == 1 {
                    let (lo, hi) = cells[j];
                    let a = lo.max(x[0] - r);
                    let c = hi.min(x[0] + r);
                    if c <= a {
                        0.0
                    } else {
                        (c - a) / (hi - lo)
                    }
                } else {
                    cell_fraction_in_ball(&grid, &cells, m, j, x, r, SUB)
                };
                if frac > 0.0 {
                    acc += frac * weights[j] * (bx - bvals[j]).abs() * absf[j];
                }
            }
            best = best.max(acc / r.powi(n as i32));
        }
        best
    };
    let values: Vec<f64> = match exec {
        Execution::Serial => (0..grid.len()).map(node).collect(),
        Execution::Parallel => (0..grid.len()).into_par_iter().map(node).collect(),
    };
    GridField::new(grid, values)
}

fn cell_fraction_in_ball(
    grid: &QuadratureGrid,
    cells: &[(f64, f64)],
    m: usize,
    j: usize,
    x: &[f64],
    r: f64,
    sub: usize,
) -> f64 {
    let n = grid.dimension();
    let mut digits = vec![0usize; n];
    let mut rem = j;
    for d in (0..n).rev() {
        digits[d] = rem % m;
        rem /= m;
    }
    // quick rejection and acceptance from the cell's nearest and farthest corners
    let mut near = 0.0;
    let mut far = 0.0;
    for d in 0..n {
        let (lo, hi) = cells[digits[d]];
        let dn = if x[d] < lo {
            lo - x[d]
        } else if x[d] > hi {
            x[d] - hi
        } else {
            0.0
        };
        let df = (x[d] - lo).abs().max((x[d] - hi).abs());
        near += dn * dn;
        far += df * df;
    }
    if near >= r * r {
        return 0.0;
    }
    if far < r * r {
        return 1.0;
    }
    let total = sub.pow(n as u32);
    let mut inside = 0usize;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let mut d2 = 0.0;
        for d in 0..n {
            let (lo, hi) = cells[digits[d]];
            let y = lo + (hi - lo) * (idx[d] as f64 + 0.5) / sub as f64;
            d2 += (y - x[d]) * (y - x[d]);
        }
        if d2 < r * r {
            inside += 1;
        }
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < sub {
                break;
            }
            *slot = 0;
        }
    }
    inside as f64 / total as f64
}

/// Largest mean oscillation `|Q|^{-1} ∫_Q |b − b_Q|` over the dyadic
/// subcubes of `[-L, L]ⁿ` down to `levels` halvings.
///
/// This is a lower bound for `‖b‖_BMO`: only dyadic cubes of one box are
/// examined. Integrals use a Gauss–Legendre rule on every finest cube.
pub fn bmo_norm_estimate(b: &BmoSymbol, n: usize, half_width: f64, levels: u32) -> Result<f64> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(invalid(format!("half width must be positive, got {half_width}")));
    }
    if levels == 0 {
        return Err(invalid("need at least one dyadic level"));
    }
    if n == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    if b.is_constant() {
        return Ok(0.0);
    }
    const CAP: usize = 1 << 24;
    let order = if n == 1 { 8 } else { 3 };
    let cells_per_axis = 1usize.checked_shl(levels).ok_or_else(|| invalid("too many levels"))?;
    let total_points = (cells_per_axis * order).checked_pow(n as u32).unwrap_or(usize::MAX);
    if total_points > CAP {
        return Err(Error::ResourceLimit {
            what: "dyadic BMO estimate",
            requested: total_points,
            cap: CAP,
        });
    }
    let (gx, gw) = gauss_legendre(order);
    let h = 2.0 * half_width / cells_per_axis as f64;
    let axis_points = cells_per_axis * order;
    let axis_x: Vec<f64> = (0..axis_points)
        .map(|p| -half_width + h * ((p / order) as f64 + 0.5 + 0.5 * gx[p % order]))
        .collect();
    let axis_w: Vec<f64> = (0..axis_points).map(|p| gw[p % order]).collect();
    let mut values = Vec::with_capacity(total_points);
    let mut weights = Vec::with_capacity(total_points);
    let mut cell_of = Vec::with_capacity(total_points * n);
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    for _ in 0..total_points {
        let mut w = 1.0;
        for d in 0..n {
            x[d] = axis_x[idx[d]];
            w *= axis_w[idx[d]];
            cell_of.push(idx[d] / order);
        }
        let v = b.eval(&x);
        if !v.is_finite() {
            return Err(invalid(format!("symbol {} not finite at {x:?}", b.descriptor())));
        }
        values.push(v);
        weights.push(w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < axis_points {
                break;
            }
            *slot = 0;
        }
    }
    let mut best = 0.0f64;
    for level in 0..=levels {
        let side = 1usize << level;
        let shift = levels - level;
        let cubes = side.pow(n as u32);
        let cube_id = |p: usize| {
            cell_of[p * n..(p + 1) * n]
                .iter()
                .fold(0usize, |acc, &c| acc * side + (c >> shift))
        };
        let mut mass = vec![0.0; cubes];
        let mut sum = vec![0.0; cubes];
        for p in 0..total_points {
            let q = cube_id(p);
            mass[q] += weights[p];
            sum[q] += weights[p] * values[p];
        }
        let mut dev = vec![0.0; cubes];
        for p in 0..total_points {
            let q = cube_id(p);
            dev[q] += weights[p] * (values[p] - sum[q] / mass[q]).abs();
        }
        for q in 0..cubes {
            best = best.max(dev[q] / mass[q]);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_eval, tensor_grid, Band, MultiIndex};
    use crate::spectral::bochner_riesz;

    fn basis(n: usize, m: usize, cap: usize) -> HermiteBasis {
        HermiteBasis::new(Arc::new(tensor_grid(n, m).unwrap()), cap).unwrap()
    }

    fn coeffs(band: Arc<Band>, seed: u64) -> SpectralCoeffs {
        let values = (0..band.len())
            .map(|i| ((i as u64 * 7919 + seed * 104729) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        SpectralCoeffs::from_values(band, values).unwrap()
    }

    #[test]
    fn registry() {
        assert!(BmoSymbol::from_name("const:2.5").unwrap().is_constant());
        assert_eq!(BmoSymbol::from_name("sin").unwrap().eval(&[1.0, 5.0]), 1f64.sin());
        assert!((BmoSymbol::from_name("log1p_abs").unwrap().eval(&[3.0, 4.0]) - 6f64.ln()).abs() < 1e-15);
        let s = BmoSymbol::from_name("sign_times_log").unwrap();
        assert!((s.eval(&[-2.0]) + 3f64.ln()).abs() < 1e-15);
        assert_eq!(s.eval(&[0.0]), 0.0);
        assert!(BmoSymbol::from_name("cos").is_err());
        assert!(BmoSymbol::from_name("const:abc").is_err());
    }

    #[test]
    fn constant_symbol_commutes() {
        let bs = basis(1, 64, 63);
        let f = GridField::from_fn(bs.grid().clone(), |x| hermite_eval(3, x[0])).unwrap();
        let t = SpectralSymbol::bochner_riesz(4.0, 1.0).unwrap();
        // a constant wrapped as a general symbol exercises the full path
        let c = BmoSymbol::new("three", |_| 3.0);
        let out = commutator_apply(&c, &t, &f, &bs).unwrap();
        assert!(out.field.sup_norm() < 1e-10);
        let short = commutator_apply(&BmoSymbol::constant(3.0), &t, &f, &bs).unwrap();
        assert_eq!(short.field.sup_norm(), 0.0);
    }

    #[test]
    fn identity_operator_gives_exact_zero() {
        let bs = basis(1, 32, 31);
        let f = GridField::from_fn(bs.grid().clone(), |x| hermite_eval(1, x[0])).unwrap();
        let out = commutator_apply(&BmoSymbol::sin(), &SpectralSymbol::identity(), &f, &bs).unwrap();
        assert!(out.field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riesz_commutator_matches_direct_sum() {
        // direct path: explicit Hermite sums and quadrature inner products
        let m = 120;
        let bs = basis(1, m, 120);
        let grid = bs.grid().clone();
        let xs: Vec<f64> = grid.nodes().map(|x| x[0]).collect();
        let w = grid.lebesgue_weights();
        let f = GridField::from_fn(grid.clone(), |x| hermite_eval(0, x[0])).unwrap();
        let t = SpectralSymbol::bochner_riesz(3.0, 1.0).unwrap();
        let out = commutator_apply(&BmoSymbol::sin(), &t, &f, &bs).unwrap();
        let factor = |k: usize| (1.0 - (2 * k + 1) as f64 / 9.0).max(0.0);
        let kmax = 59;
        let coef_bf: Vec<f64> = (0..=kmax)
            .map(|k| {
                (0..m)
                    .map(|i| w[i] * xs[i].sin() * hermite_eval(0, xs[i]) * hermite_eval(k, xs[i]))
                    .sum()
            })
            .collect();
        for (i, &x) in xs.iter().enumerate() {
            let tf = factor(0) * hermite_eval(0, x);
            let tbf: f64 = (0..=kmax).map(|k| factor(k) * coef_bf[k] * hermite_eval(k, x)).sum();
            let direct = x.sin() * tf - tbf;
            assert!((out.field.values()[i] - direct).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn spectrum_matches_direct_commutator() {
        let bs = basis(2, 24, 24);
        let f_band = Arc::new(Band::new(2, 10));
        let cf = coeffs(f_band, 3);
        let spec = CommutatorSpectrum::new(&BmoSymbol::sin(), &cf, &bs).unwrap();
        let t = SpectralSymbol::bochner_riesz(3.5, 1.5).unwrap();
        let via_spec = spec.apply(&t).unwrap();
        let f = bs.inverse(&cf.rebanded(bs.band().clone()).unwrap()).unwrap();
        let direct = commutator_apply(&BmoSymbol::sin(), &t, &f, &bs).unwrap();
        assert!(via_spec.sub(&direct.field).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn bilinearity_and_shift() {
        let bs = basis(1, 80, 80);
        let band = Arc::new(Band::new(1, 39));
        let f1 = coeffs(band.clone(), 1);
        let f2 = coeffs(band, 2);
        let t = SpectralSymbol::bochner_riesz(5.0, 1.0).unwrap();
        let b1 = BmoSymbol::sin();
        let b2 = BmoSymbol::log1p_abs();
        let apply = |b: &BmoSymbol, f: &SpectralCoeffs| CommutatorSpectrum::new(b, f, &bs).unwrap().apply(&t).unwrap();
        let sum_f = apply(&b1, &f1.scaled(2.0).added(&f2).unwrap());
        let parts = apply(&b1, &f1);
        let parts2 = apply(&b1, &f2);
        for i in 0..sum_f.values().len() {
            let expect = 2.0 * parts.values()[i] + parts2.values()[i];
            assert!((sum_f.values()[i] - expect).abs() < 1e-10);
        }
        let sum_b = apply(&b1.sum(&b2), &f1);
        let other = apply(&b2, &f1);
        for i in 0..sum_b.values().len() {
            assert!((sum_b.values()[i] - parts.values()[i] - other.values()[i]).abs() < 1e-10);
        }
        let shifted = apply(&b1.shifted(7.0), &f1);
        assert!(shifted.sub(&parts).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn maximal_commutator_properties() {
        let bs = basis(1, 80, 80);
        let band = Arc::new(Band::new(1, 39));
        let f = coeffs(band, 5);
        let radii = default_radius_grid(39);
        let zero = maximal_commutator(&BmoSymbol::constant(1.0), 1.0, &f, &radii, &bs, Execution::Serial).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let spec = CommutatorSpectrum::new(&BmoSymbol::sin(), &f, &bs).unwrap();
        let single = spec.maximal_riesz(1.0, &[4.0], Execution::Serial).unwrap();
        let direct = spec.apply(&SpectralSymbol::bochner_riesz(4.0, 1.0).unwrap()).unwrap();
        for (a, b) in single.values().iter().zip(direct.values()) {
            assert!((a - b.abs()).abs() < 1e-14);
        }
        let coarse = spec
            .maximal_riesz(1.0, &radii[..radii.len() / 2], Execution::Serial)
            .unwrap();
        let fine = spec.maximal_riesz(1.0, &radii, Execution::Serial).unwrap();
        assert!(coarse.values().iter().zip(fine.values()).all(|(a, b)| a <= b));
        let par = spec.maximal_riesz(1.0, &radii, Execution::Parallel).unwrap();
        assert!(par.sub(&fine).unwrap().sup_norm() <= 1e-12);
        assert!(spec.maximal_riesz(1.0, &[], Execution::Serial).is_err());
    }

    #[test]
    fn riesz_spectrum_agrees_with_coefficient_path() {
        let bs = basis(1, 60, 60);
        let band = Arc::new(Band::new(1, 29));
        let f = coeffs(band, 9);
        let spec = CommutatorSpectrum::new(&BmoSymbol::constant(0.0).sum(&BmoSymbol::sin()), &f, &bs).unwrap();
        let via = spec.apply(&SpectralSymbol::bochner_riesz(6.0, 2.0).unwrap()).unwrap();
        // T f through coefficient Riesz means
        let fb = f.rebanded(bs.band().clone()).unwrap();
        let tf = bs.inverse(&bochner_riesz(&fb, 6.0, 2.0).unwrap()).unwrap();
        let fv = bs.inverse(&fb).unwrap();
        let bf = fv.mul_fn(|x| x[0].sin()).unwrap();
        let tbf = bs
            .inverse(&bochner_riesz(&bs.forward(&bf).unwrap(), 6.0, 2.0).unwrap())
            .unwrap();
        let expect = tf.mul_fn(|x| x[0].sin()).unwrap().sub(&tbf).unwrap();
        assert!(via.sub(&expect).unwrap().sup_norm() < 1e-12);
    }

    fn test_phi() -> SpectralSymbol {
        SpectralSymbol::new(|u: f64| {
            let a = (u.abs() - 5.0 / 16.0) / (3.0 / 16.0);
            if a.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - a * a)).exp()
            }
        })
        .with_support(-0.5, 0.5)
        .with_sup_bound(1.0)
    }

    #[test]
    fn square_function_basics() {
        let bs = basis(1, 80, 80);
        let band = Arc::new(Band::new(1, 39));
        let spec = SquareFunctionSpec::covering(0.125, test_phi(), 1.0, 79.0, None).unwrap();
        let f = SpectralCoeffs::unit(band.clone(), &MultiIndex::new(vec![0])).unwrap();
        let z = square_function(&BmoSymbol::constant(2.0), &spec, &f, &bs, Execution::Serial).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let z = square_function(
            &BmoSymbol::sin(),
            &spec,
            &SpectralCoeffs::zeros(band),
            &bs,
            Execution::Serial,
        )
        .unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn square_function_grid_refinement() {
        let bs = basis(1, 128, 128);
        let band = Arc::new(Band::new(1, 63));
        let f = SpectralCoeffs::unit(band, &MultiIndex::new(vec![0])).unwrap();
        let spec = SquareFunctionSpec::covering(0.125, test_phi(), 1.0, 127.0, None).unwrap();
        let cs = CommutatorSpectrum::new(&BmoSymbol::sin(), &f, &bs).unwrap();
        let g1 = cs.square_function(&spec, Execution::Serial).unwrap();
        let g2 = cs
            .square_function(&spec.refined(2).unwrap(), Execution::Serial)
            .unwrap();
        let (n1, n2) = (g1.l2_norm(), g2.l2_norm());
        assert!(n1 > 0.0);
        assert!(((n1 - n2) / n2).abs() < 0.01, "{n1} vs {n2}");
        let gp = cs.square_function(&spec, Execution::Parallel).unwrap();
        assert!(gp.sub(&g1).unwrap().sup_norm() <= 1e-12);
    }

    #[test]
    fn square_function_matches_explicit_t_sum() {
        let bs = basis(1, 60, 60);
        let band = Arc::new(Band::new(1, 29));
        let f = coeffs(band, 4);
        let spec = SquareFunctionSpec::covering(0.25, test_phi(), 1.0, 59.0, Some(64)).unwrap();
        let cs = CommutatorSpectrum::new(&BmoSymbol::sin(), &f, &bs).unwrap();
        let g = cs.square_function(&spec, Execution::Serial).unwrap();
        let mut acc = vec![0.0; bs.grid().len()];
        for (&t, &w) in spec.t_grid().points().iter().zip(spec.t_grid().weights()) {
            let phi = spec.phi().clone();
            let delta = spec.delta();
            let sym = SpectralSymbol::new(move |s| phi.eval((1.0 - s * s / (t * t)) / delta));
            let c = cs.apply(&sym).unwrap();
            for (a, v) in acc.iter_mut().zip(c.values()) {
                *a += w * v * v;
            }
        }
        for (a, v) in acc.iter().zip(g.values()) {
            assert!((a.sqrt() - v).abs() < 1e-10);
        }
    }

    #[test]
    fn coverage_error() {
        let bs = basis(1, 60, 60);
        let band = Arc::new(Band::new(1, 29));
        let f = coeffs(band, 4);
        let spec = SquareFunctionSpec::new(0.25, test_phi(), TGrid::geometric(1.0, 3.0, 16).unwrap()).unwrap();
        let err = square_function(&BmoSymbol::sin(), &spec, &f, &bs, Execution::Serial).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
        assert!(SquareFunctionSpec::new(0.5, test_phi(), TGrid::geometric(1.0, 3.0, 16).unwrap()).is_err());
    }

    #[test]
    fn hl_maximal_basics_and_oracle() {
        let grid = Arc::new(tensor_grid(1, 200).unwrap());
        let f = GridField::from_fn(grid.clone(), |x| (-x[0] * x[0]).exp()).unwrap();
        let radii = geometric_grid(0.25, 8.0, 4).unwrap();
        let z = hl_maximal_commutator(&BmoSymbol::constant(1.0), &f, &radii, Execution::Serial).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let z = hl_maximal_commutator(
            &BmoSymbol::sin(),
            &GridField::zeros(grid.clone()),
            &radii,
            Execution::Serial,
        )
        .unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let mb = hl_maximal_commutator(&BmoSymbol::sin(), &f, &radii, Execution::Serial).unwrap();
        // dense midpoint oracle at x = 0 (node closest to the origin)
        let i0 = (0..grid.len())
            .min_by(|&a, &b| grid.node(a)[0].abs().total_cmp(&grid.node(b)[0].abs()))
            .unwrap();
        let x0 = grid.node(i0)[0];
        let oracle = radii
            .iter()
            .map(|&r| {
                let k = 200_000;
                let h = 2.0 * r / k as f64;
                (0..k)
                    .map(|j| {
                        let y = x0 - r + h * (j as f64 + 0.5);
                        h * (x0.sin() - y.sin()).abs() * (-y * y).exp()
                    })
                    .sum::<f64>()
                    / r
            })
            .fold(0.0f64, f64::max);
        assert!(
            (mb.values()[i0] - oracle).abs() / oracle < 0.02,
            "{} vs {oracle}",
            mb.values()[i0]
        );
        let par = hl_maximal_commutator(&BmoSymbol::sin(), &f, &radii, Execution::Parallel).unwrap();
        assert_eq!(par, mb);
    }

    #[test]
    fn hl_maximal_two_dimensions() {
        let grid = Arc::new(tensor_grid(2, 16).unwrap());
        let f = GridField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let radii = [0.5, 1.0, 2.0];
        let mb = hl_maximal_commutator(&BmoSymbol::sin(), &f, &radii, Execution::Serial).unwrap();
        assert!(mb.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(mb.sup_norm() > 0.0);
    }

    #[test]
    fn bmo_estimates() {
        assert_eq!(bmo_norm_estimate(&BmoSymbol::constant(4.0), 1, 8.0, 4).unwrap(), 0.0);
        let s = bmo_norm_estimate(&BmoSymbol::sin(), 1, 16.0, 8).unwrap();
        assert!(s > 0.3 && s <= 2.0, "{s}");
        let s2 = bmo_norm_estimate(&BmoSymbol::sin(), 2, 8.0, 5).unwrap();
        assert!(s2 > 0.3 && s2 <= 2.0);
        let e10 = bmo_norm_estimate(&BmoSymbol::log1p_abs(), 1, 64.0, 10).unwrap();
        let e12 = bmo_norm_estimate(&BmoSymbol::log1p_abs(), 1, 64.0, 12).unwrap();
        assert!(((e12 - e10) / e12).abs() < 0.05);
        assert!(bmo_norm_estimate(&BmoSymbol::sin(), 1, 0.0, 3).is_err());
        assert!(bmo_norm_estimate(&BmoSymbol::sin(), 1, 1.0, 0).is_err());
        assert!(matches!(
            bmo_norm_estimate(&BmoSymbol::sin(), 3, 1.0, 10),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1.0, 8.0, 8).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[24], 8.0);
        assert!((g[8] - 2.0).abs() < 1e-12);
        assert!(geometric_grid(0.0, 1.0, 2).is_err());
    }
}
