//! Truncated Hermite expansions and functions of `√H` acting on them.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::hermite::{Band, HermiteTable, MultiIndex, QuadratureGrid};

/// Hermite coefficients `c_μ = ⟨f, Φ_μ⟩` of a band-limited function, stored
/// densely in the graded order of the band.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    band: Arc<Band>,
    values: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn zeros(band: Arc<Band>) -> Self {
        let values = vec![0.0; band.len()];
        Self { band, values }
    }

    pub fn from_values(band: Arc<Band>, values: Vec<f64>) -> Result<Self> {
        if values.len() != band.len() {
            return Err(Error::DimensionMismatch {
                expected: band.len(),
                found: values.len(),
            });
        }
        Ok(Self { band, values })
    }

    /// The coefficient vector of a single `Φ_μ`.
    pub fn unit(band: Arc<Band>, mu: &MultiIndex) -> Result<Self> {
        let pos = band
            .position(mu)
            .ok_or_else(|| invalid(format!("multi-index {mu} lies outside the band")))?;
        let mut c = Self::zeros(band);
        c.values[pos] = 1.0;
        Ok(c)
    }

    pub fn band(&self) -> &Arc<Band> {
        &self.band
    }

    pub fn dimension(&self) -> usize {
        self.band.dimension()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, mu: &MultiIndex) -> Option<f64> {
        self.band.position(mu).map(|p| self.values[p])
    }

    /// `Σ |c_μ|²`
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            band: self.band.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn added(&self, other: &Self) -> Result<Self> {
        if self.band != other.band {
            return Err(invalid("coefficient vectors live on different bands"));
        }
        Ok(Self {
            band: self.band.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// The same function viewed in a larger (or smaller) band; coefficients
    /// outside the target band are dropped.
    pub fn rebanded(&self, band: Arc<Band>) -> Result<Self> {
        if band.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: band.dimension(),
            });
        }
        let mut out = Self::zeros(band);
        for (mu, v) in self.band.indices().iter().zip(&self.values) {
            if let Some(p) = out.band.position(mu) {
                out.values[p] = *v;
            }
        }
        Ok(out)
    }

    /// Writes `mu_1,…,mu_n,value` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.dimension();
        let mut header: Vec<String> = (1..=n).map(|d| format!("mu_{d}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for (mu, v) in self.band.indices().iter().zip(&self.values) {
            let mut rec: Vec<String> = mu.components().iter().map(u32::to_string).collect();
            rec.push(format!("{v:e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads coefficients written by [`write_csv`](Self::write_csv).
    ///
    /// Missing multi-indices are zero. Without an explicit cap the band is
    /// the smallest one containing every listed index.
    pub fn read_csv<R: Read>(reader: R, max_eigenvalue: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let n = header
            .len()
            .checked_sub(1)
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config("coefficient CSV needs columns mu_1..mu_n,value".into()))?;
        for (d, name) in header.iter().enumerate() {
            let expected = if d < n { format!("mu_{}", d + 1) } else { "value".into() };
            if name.trim() != expected {
                return Err(Error::Config(format!(
                    "coefficient CSV column {} is {name:?}, expected {expected:?}",
                    d + 1
                )));
            }
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let comps = (0..n)
                .map(|d| {
                    rec[d]
                        .trim()
                        .parse::<u32>()
                        .map_err(|e| Error::Config(format!("bad index {:?}: {e}", &rec[d])))
                })
                .collect::<Result<Vec<_>>>()?;
            let value: f64 = rec[n]
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad value {:?}: {e}", &rec[n])))?;
            entries.push((MultiIndex::new(comps), value));
        }
        let cap = match max_eigenvalue {
            Some(c) => c,
            None => entries.iter().map(|(mu, _)| mu.eigenvalue()).max().unwrap_or(n),
        };
        let band = Arc::new(Band::new(n, cap));
        let mut out = Self::zeros(band);
        let mut seen = vec![false; out.values.len()];
        for (mu, v) in entries {
            let p = out
                .band
                .position(&mu)
                .ok_or_else(|| Error::Config(format!("index {mu} exceeds eigenvalue cap {cap}")))?;
            if seen[p] {
                return Err(Error::Config(format!("index {mu} listed twice")));
            }
            seen[p] = true;
            out.values[p] = v;
        }
        Ok(out)
    }
}

/// Real samples of a function at the nodes of a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<QuadratureGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<QuadratureGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Unweighted `L²` norm by quadrature.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.lebesgue_weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `∫ f g` by quadrature.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.lebesgue_weights())
            .map(|((a, b), w)| w * a * b)
            .sum())
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Pointwise product with another sampled function.
    pub fn mul_fn(&self, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = self.grid.nodes().zip(&self.values).map(|(x, v)| f(x) * v).collect();
        Self::new(self.grid.clone(), values)
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            })
        }
    }
}

/// How a symbol should be treated by code that can shortcut special cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Identity,
    General,
}

/// A function `F` of `√H`, evaluated at `s = √(2|μ| + n)`.
#[derive(Clone)]
pub struct SpectralSymbol {
    evaluator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: Option<(f64, f64)>,
    sup_bound: Option<f64>,
    kind: SymbolKind,
}

impl fmt::Debug for SpectralSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSymbol")
            .field("support", &self.support)
            .field("sup_bound", &self.sup_bound)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl SpectralSymbol {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(f),
            support: None,
            sup_bound: None,
            kind: SymbolKind::General,
        }
    }

    /// `F ≡ 1`.
    pub fn identity() -> Self {
        Self {
            evaluator: Arc::new(|_| 1.0),
            support: None,
            sup_bound: Some(1.0),
            kind: SymbolKind::Identity,
        }
    }

    /// Declares `F ≡ 0` outside `[a, b]`; evaluation enforces it.
    pub fn with_support(mut self, a: f64, b: f64) -> Self {
        self.support = Some((a, b));
        self
    }

    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        self.sup_bound = Some(bound);
        self
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self.support {
            Some((a, b)) if s < a || s > b => 0.0,
            _ => (self.evaluator)(s),
        }
    }

    /// Product symbol `F · G`.
    pub fn product(&self, other: &Self) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let support = match (self.support, other.support) {
            (Some((a, b)), Some((c, d))) => Some((a.max(c), b.min(d))),
            (s, None) | (None, s) => s,
        };
        let sup_bound = match (self.sup_bound, other.sup_bound) {
            (Some(a), Some(b)) => Some(a * b),
            _ => None,
        };
        Self {
            evaluator: Arc::new(move |s| f.eval(s) * g.eval(s)),
            support,
            sup_bound,
            kind: if self.kind == SymbolKind::Identity && other.kind == SymbolKind::Identity {
                SymbolKind::Identity
            } else {
                SymbolKind::General
            },
        }
    }

    /// Bochner–Riesz symbol `s ↦ (1 − s²/R²)_+^λ`.
    pub fn bochner_riesz(radius: f64, lambda: f64) -> Result<Self> {
        check_riesz(radius, lambda)?;
        Ok(Self::new(move |s| riesz_factor(s * s, radius, lambda))
            .with_support(0.0, radius)
            .with_sup_bound(1.0))
    }
}

/// `x_+^λ` with `x_+^λ = 0` for `x <= 0`, including at `λ = 0`.
#[inline]
pub fn positive_part_pow(x: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if lambda == 0.0 {
        1.0
    } else if lambda == 1.0 {
        x
    } else {
        x.powf(lambda)
    }
}

/// `(1 − e/R²)_+^λ` for an eigenvalue `e`, evaluated as `((R² − e)/R²)_+^λ`
/// so that integer data give correctly rounded factors.
#[inline]
pub fn riesz_factor(eigenvalue: f64, radius: f64, lambda: f64) -> f64 {
    let r2 = radius * radius;
    positive_part_pow((r2 - eigenvalue) / r2, lambda)
}

fn check_riesz(radius: f64, lambda: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("Bochner-Riesz radius must be positive, got {radius}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "Bochner-Riesz order must be >= 0, got {lambda}; negative orders are undefined on the spectrum"
        )));
    }
    Ok(())
}

/// Keeps the coefficients in the eigenspace of eigenvalue `k`.
pub fn project_eigenspace(c: &SpectralCoeffs, k: usize) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(c.band.clone());
    let n = c.dimension();
    if k >= n && (k - n).is_multiple_of(2) {
        if let Some(range) = c.band.eigenspace_range((k - n) / 2) {
            out.values[range.clone()].copy_from_slice(&c.values[range]);
        }
    }
    out
}

/// `c'_μ = F(√(2|μ|+n)) c_μ`.
pub fn apply_multiplier(c: &SpectralCoeffs, symbol: &SpectralSymbol) -> Result<SpectralCoeffs> {
    if symbol.kind() == SymbolKind::Identity {
        return Ok(c.clone());
    }
    let band = c.band.clone();
    let mut values = c.values.clone();
    for d in 0..band.eigenspace_count() {
        let range = band.eigenspace_range(d).expect("degree within band");
        let mu = &band.indices()[range.start];
        let factor = symbol.eval((mu.eigenvalue() as f64).sqrt());
        if !factor.is_finite() {
            return Err(Error::NumericDomain {
                index: mu.components().to_vec(),
                value: factor,
            });
        }
        values[range].iter_mut().for_each(|v| *v *= factor);
    }
    Ok(SpectralCoeffs { band, values })
}

/// Bochner–Riesz mean `S_R^λ(H)` in coefficient form.
pub fn bochner_riesz(c: &SpectralCoeffs, radius: f64, lambda: f64) -> Result<SpectralCoeffs> {
    check_riesz(radius, lambda)?;
    let band = c.band.clone();
    let mut values = c.values.clone();
    for d in 0..band.eigenspace_count() {
        let range = band.eigenspace_range(d).expect("degree within band");
        let e = band.indices()[range.start].eigenvalue() as f64;
        let factor = riesz_factor(e, radius, lambda);
        values[range].iter_mut().for_each(|v| *v *= factor);
    }
    Ok(SpectralCoeffs { band, values })
}

/// Forward and inverse transforms between a grid and a band.
///
/// Both directions factor into one small matrix product per axis.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    grid: Arc<QuadratureGrid>,
    band: Arc<Band>,
    max_degree: usize,
    /// `(K+1) × m`, row-major: `h_k(x_i)`.
    table: HermiteTable,
    /// `m × (K+1)`, row-major: the transpose of `table`.
    transposed: Vec<f64>,
}

impl HermiteBasis {
    pub fn new(grid: Arc<QuadratureGrid>, max_eigenvalue: usize) -> Result<Self> {
        let n = grid.dimension();
        if max_eigenvalue > grid.capacity() {
            return Err(Error::UndersizedGrid {
                band: max_eigenvalue,
                required: max_eigenvalue,
                actual: grid.capacity(),
            });
        }
        let band = Arc::new(Band::new(n, max_eigenvalue));
        let max_degree = band.max_degree().unwrap_or(0);
        let table = HermiteTable::new(grid.axis().nodes(), max_degree);
        let m = grid.points_per_axis();
        let k1 = max_degree + 1;
        let mut transposed = vec![0.0; m * k1];
        for k in 0..k1 {
            for i in 0..m {
                transposed[i * k1 + k] = table.value(k, i);
            }
        }
        Ok(Self {
            grid,
            band,
            max_degree,
            table,
            transposed,
        })
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn band(&self) -> &Arc<Band> {
        &self.band
    }

    pub fn table(&self) -> &HermiteTable {
        &self.table
    }

    fn check_field(&self, f: &GridField) -> Result<()> {
        if Arc::ptr_eq(&f.grid, &self.grid) || *f.grid == *self.grid {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: f.grid.len(),
            })
        }
    }

    /// `c_μ ≈ ∫ f Φ_μ dx` for every `μ` in the band.
    pub fn forward(&self, f: &GridField) -> Result<SpectralCoeffs> {
        self.check_field(f)?;
        self.forward_values(f.values())
    }

    pub(crate) fn forward_values(&self, values: &[f64]) -> Result<SpectralCoeffs> {
        let n = self.grid.dimension();
        let m = self.grid.points_per_axis();
        let k1 = self.max_degree + 1;
        if self.band.is_empty() {
            return Ok(SpectralCoeffs::zeros(self.band.clone()));
        }
        let mut data: Vec<f64> = values
            .iter()
            .zip(self.grid.lebesgue_weights())
            .map(|(v, w)| v * w)
            .collect();
        let mut shape = vec![m; n];
        for axis in 0..n {
            data = mode_product(&data, &shape, axis, self.table.as_slice(), m, k1);
            shape[axis] = k1;
        }
        let coeffs = self
            .band
            .indices()
            .iter()
            .map(|mu| data[dense_offset(mu, k1)])
            .collect();
        Ok(SpectralCoeffs {
            band: self.band.clone(),
            values: coeffs,
        })
    }

    /// `Σ_μ c_μ Φ_μ` at every node. The coefficient band may be smaller than
    /// the basis band.
    pub fn inverse(&self, c: &SpectralCoeffs) -> Result<GridField> {
        let values = self.inverse_values(c)?;
        GridField::new(self.grid.clone(), values)
    }

    pub(crate) fn inverse_values(&self, c: &SpectralCoeffs) -> Result<Vec<f64>> {
        let n = self.grid.dimension();
        if c.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.dimension(),
            });
        }
        let Some(kc) = c.band.max_degree() else {
            return Ok(vec![0.0; self.grid.len()]);
        };
        if kc > self.max_degree {
            return Err(Error::UndersizedGrid {
                band: c.band.max_eigenvalue(),
                required: c.band.max_eigenvalue(),
                actual: self.band.max_eigenvalue(),
            });
        }
        let m = self.grid.points_per_axis();
        let kc1 = kc + 1;
        let mut data = vec![0.0; kc1.pow(n as u32)];
        for (mu, v) in c.band.indices().iter().zip(&c.values) {
            data[dense_offset(mu, kc1)] = *v;
        }
        let mut shape = vec![kc1; n];
        for axis in 0..n {
            data = mode_product(&data, &shape, axis, &self.transposed, self.max_degree + 1, m);
            shape[axis] = m;
        }
        Ok(data)
    }

    /// `P_λ g` on the grid for every eigenvalue of `c`'s band, in increasing order.
    pub fn eigenspace_fields(&self, c: &SpectralCoeffs) -> Result<Vec<Vec<f64>>> {
        let n = self.grid.dimension();
        let band = c.band();
        if band.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: band.dimension(),
            });
        }
        if band.max_degree().is_some_and(|k| k > self.max_degree) {
            return Err(Error::UndersizedGrid {
                band: band.max_eigenvalue(),
                required: band.max_eigenvalue(),
                actual: self.band.max_eigenvalue(),
            });
        }
        let m = self.grid.points_per_axis();
        let nodes = self.grid.len();
        let mut fields = Vec::with_capacity(band.eigenspace_count());
        let mut digits = vec![0usize; n];
        for d in 0..band.eigenspace_count() {
            let range = band.eigenspace_range(d).expect("degree within band");
            let terms: Vec<(&[u32], f64)> = band.indices()[range.clone()]
                .iter()
                .zip(&c.values()[range])
                .filter(|(_, v)| **v != 0.0)
                .map(|(mu, v)| (mu.components(), *v))
                .collect();
            let mut out = vec![0.0; nodes];
            if !terms.is_empty() {
                digits.iter_mut().for_each(|x| *x = 0);
                for slot in out.iter_mut() {
                    *slot = terms
                        .iter()
                        .map(|(mu, v)| {
                            mu.iter()
                                .zip(&digits)
                                .fold(*v, |acc, (&k, &i)| acc * self.table.value(k as usize, i))
                        })
                        .sum();
                    for x in digits.iter_mut().rev() {
                        *x += 1;
                        if *x < m {
                            break;
                        }
                        *x = 0;
                    }
                }
            }
            fields.push(out);
        }
        Ok(fields)
    }
}

fn dense_offset(mu: &MultiIndex, side: usize) -> usize {
    mu.components().iter().fold(0usize, |acc, &c| acc * side + c as usize)
}

/// Contracts `axis` of a row-major tensor with the matrix whose first
/// `shape[axis]` columns (row stride `stride`) give `out_len` rows.
fn mode_product(data: &[f64], shape: &[usize], axis: usize, mat: &[f64], stride: usize, out_len: usize) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let in_len = shape[axis];
    let mut res = vec![0.0; outer * out_len * inner];
    if inner == 1 {
        for o in 0..outer {
            let src = &data[o * in_len..(o + 1) * in_len];
            for r in 0..out_len {
                let row = &mat[r * stride..r * stride + in_len];
                res[o * out_len + r] = row.iter().zip(src).map(|(a, b)| a * b).sum();
            }
        }
        return res;
    }
    for o in 0..outer {
        for r in 0..out_len {
            let dst = &mut res[(o * out_len + r) * inner..(o * out_len + r + 1) * inner];
            for k in 0..in_len {
                let a = mat[r * stride + k];
                if a == 0.0 {
                    continue;
                }
                let src = &data[(o * in_len + k) * inner..(o * in_len + k + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }
    res
}

/// Transforms `f` into the band of eigenvalue cap `max_eigenvalue`.
pub fn forward_transform(f: &GridField, max_eigenvalue: usize) -> Result<SpectralCoeffs> {
    HermiteBasis::new(f.grid().clone(), max_eigenvalue)?.forward(f)
}

pub fn inverse_transform(c: &SpectralCoeffs, grid: Arc<QuadratureGrid>) -> Result<GridField> {
    if grid.dimension() != c.dimension() {
        return Err(Error::DimensionMismatch {
            expected: c.dimension(),
            found: grid.dimension(),
        });
    }
    HermiteBasis::new(grid, c.band().max_eigenvalue())?.inverse(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_eval, tensor_grid};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize, m: usize) -> Arc<QuadratureGrid> {
        Arc::new(tensor_grid(n, m).unwrap())
    }

    fn mi(c: &[u32]) -> MultiIndex {
        MultiIndex::new(c.to_vec())
    }

    #[test]
    fn forward_of_single_hermite_function() {
        let g = grid(1, 40);
        let f = GridField::from_fn(g, |x| hermite_eval(2, x[0])).unwrap();
        let c = forward_transform(&f, 21).unwrap();
        for (mu, v) in c.band().indices().iter().zip(c.values()) {
            let expect = if mu.components() == [2] { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_of_zero_is_exactly_zero() {
        let g = grid(2, 16);
        let c = forward_transform(&GridField::zeros(g), 12).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_of_gaussian() {
        let g = grid(1, 64);
        let f = GridField::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        let c = forward_transform(&f, 31).unwrap();
        assert_relative_eq!(c.values()[0], PI.powf(0.25), max_relative = 1e-12);
    }

    #[test]
    fn undersized_grid_names_required_m() {
        let g = grid(1, 20);
        let f = GridField::zeros(g);
        match forward_transform(&f, 41) {
            Err(Error::UndersizedGrid { required, actual, .. }) => {
                assert_eq!((required, actual), (41, 20));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_single_coefficient() {
        let g = grid(1, 30);
        let band = Arc::new(Band::new(1, 9));
        let c = SpectralCoeffs::unit(band, &mi(&[0])).unwrap();
        let f = inverse_transform(&c, g.clone()).unwrap();
        for (x, v) in g.nodes().zip(f.values()) {
            assert_relative_eq!(*v, hermite_eval(0, x[0]), max_relative = 1e-14);
        }
    }

    #[test]
    fn round_trip_two_dimensions() {
        let g = grid(2, 24);
        let basis = HermiteBasis::new(g, 20).unwrap();
        let n = basis.band().len();
        let values: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let c = SpectralCoeffs::from_values(basis.band().clone(), values).unwrap();
        let f = basis.inverse(&c).unwrap();
        let back = basis.forward(&f).unwrap();
        for (a, b) in back.values().iter().zip(c.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let f2 = basis.inverse(&back).unwrap();
        assert!(f2.sub(&f).unwrap().sup_norm() < 1e-9);
    }

    #[test]
    fn inverse_is_linear() {
        let g = grid(1, 30);
        let basis = HermiteBasis::new(g, 29).unwrap();
        let band = basis.band().clone();
        let c = SpectralCoeffs::from_values(band.clone(), (0..15).map(|i| i as f64).collect()).unwrap();
        let d = SpectralCoeffs::from_values(band, (0..15).map(|i| 1.0 / (1.0 + i as f64)).collect()).unwrap();
        let lhs = basis.inverse(&c.scaled(2.5).added(&d).unwrap()).unwrap();
        let fc = basis.inverse(&c).unwrap();
        let fd = basis.inverse(&d).unwrap();
        for i in 0..lhs.values().len() {
            let rhs = 2.5 * fc.values()[i] + fd.values()[i];
            assert!((lhs.values()[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn inverse_dimension_mismatch() {
        let c = SpectralCoeffs::zeros(Arc::new(Band::new(2, 6)));
        assert!(matches!(
            inverse_transform(&c, grid(1, 10)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parseval() {
        let g = grid(2, 30);
        let basis = HermiteBasis::new(g, 24).unwrap();
        let values: Vec<f64> = (0..basis.band().len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let c = SpectralCoeffs::from_values(basis.band().clone(), values).unwrap();
        let f = basis.inverse(&c).unwrap();
        assert!((f.l2_norm().powi(2) - c.norm_squared()).abs() < 1e-8);
    }

    #[test]
    fn projection_keeps_eigenspace() {
        let band = Arc::new(Band::new(2, 4));
        let c = SpectralCoeffs::from_values(band, vec![1.0, 2.0, 3.0]).unwrap();
        let p = project_eigenspace(&c, 4);
        assert_eq!(p.values(), &[0.0, 2.0, 3.0]);
        assert_eq!(project_eigenspace(&p, 4), p);
        assert!(project_eigenspace(&c, 3).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projections_sum_to_identity() {
        let band = Arc::new(Band::new(2, 14));
        let c = SpectralCoeffs::from_values(band.clone(), (0..band.len()).map(|i| i as f64 + 0.5).collect()).unwrap();
        let mut total = SpectralCoeffs::zeros(band);
        for k in 0..=14 {
            total = total.added(&project_eigenspace(&c, k)).unwrap();
        }
        assert_eq!(total, c);
    }

    #[test]
    fn multiplier_basics() {
        let band = Arc::new(Band::new(1, 11));
        let c = SpectralCoeffs::unit(band.clone(), &mi(&[3])).unwrap();
        assert_eq!(apply_multiplier(&c, &SpectralSymbol::identity()).unwrap(), c);
        let sq = apply_multiplier(&c, &SpectralSymbol::new(|s| s * s)).unwrap();
        assert_relative_eq!(sq.get(&mi(&[3])).unwrap(), 7.0, max_relative = 1e-15);
    }

    #[test]
    fn indicator_symbol_matches_projection() {
        let band = Arc::new(Band::new(2, 12));
        let c = SpectralCoeffs::from_values(band.clone(), (0..band.len()).map(|i| 1.0 + i as f64).collect()).unwrap();
        for k in 0..13usize {
            let (lo, hi) = ((k as f64).sqrt(), ((k + 1) as f64).sqrt());
            let ind = SpectralSymbol::new(move |s| if s >= lo && s < hi { 1.0 } else { 0.0 });
            assert_eq!(apply_multiplier(&c, &ind).unwrap(), project_eigenspace(&c, k));
        }
    }

    #[test]
    fn multiplier_rejects_non_finite() {
        let band = Arc::new(Band::new(1, 5));
        let c = SpectralCoeffs::zeros(band);
        let bad = SpectralSymbol::new(|s| if s > 2.0 { f64::NAN } else { 1.0 });
        match apply_multiplier(&c, &bad) {
            Err(Error::NumericDomain { index, .. }) => assert_eq!(index, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn riesz_anchor() {
        let band = Arc::new(Band::new(1, 5));
        let c = SpectralCoeffs::unit(band, &mi(&[0])).unwrap();
        let r = bochner_riesz(&c, 3.0, 1.0).unwrap();
        assert_eq!(r.values()[0], 8.0 / 9.0);
    }

    #[test]
    fn riesz_edge_and_identity() {
        let band = Arc::new(Band::new(1, 9));
        let c = SpectralCoeffs::from_values(band, vec![1.0; 5]).unwrap();
        // R² = 9 hits eigenvalue 9 (μ=4)
        let r = bochner_riesz(&c, 3.0, 1.0).unwrap();
        assert_eq!(r.values()[4], 0.0);
        assert!(r.values()[3] > 0.0);
        assert_eq!(bochner_riesz(&c, 4.0, 0.0).unwrap(), c);
        assert!(matches!(bochner_riesz(&c, 2.0, -0.5), Err(Error::InvalidArgument(_))));
        assert!(matches!(bochner_riesz(&c, 0.0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn positive_part_convention() {
        assert_eq!(positive_part_pow(0.0, 0.0), 0.0);
        assert_eq!(positive_part_pow(-1.0, 2.0), 0.0);
        assert_eq!(positive_part_pow(0.25, 0.5), 0.5);
    }

    #[test]
    fn symbol_support_enforced() {
        let s = SpectralSymbol::new(|_| 3.0).with_support(1.0, 2.0);
        assert_eq!(s.eval(0.5), 0.0);
        assert_eq!(s.eval(1.5), 3.0);
        assert_eq!(s.eval(2.5), 0.0);
        let br = SpectralSymbol::bochner_riesz(2.0, 1.0).unwrap();
        assert_eq!(br.eval(1.0), 0.75);
        assert_eq!(br.eval(3.0), 0.0);
    }

    #[test]
    fn eigenspace_fields_sum_to_inverse() {
        let g = grid(2, 20);
        let basis = HermiteBasis::new(g, 16).unwrap();
        let c = SpectralCoeffs::from_values(
            basis.band().clone(),
            (0..basis.band().len()).map(|i| (i as f64).cos()).collect(),
        )
        .unwrap();
        let parts = basis.eigenspace_fields(&c).unwrap();
        assert_eq!(parts.len(), 8);
        let full = basis.inverse(&c).unwrap();
        for i in 0..full.values().len() {
            let s: f64 = parts.iter().map(|p| p[i]).sum();
            assert!((s - full.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let band = Arc::new(Band::new(2, 8));
        let c = SpectralCoeffs::from_values(band.clone(), (0..band.len()).map(|i| i as f64 / 3.0).collect()).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mu_1,mu_2,value\n"));
        let back = SpectralCoeffs::read_csv(buf.as_slice(), Some(8)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(SpectralCoeffs::read_csv("0,1.0\n".as_bytes(), None).is_err());
        assert!(SpectralCoeffs::read_csv("mu_1,value\n0,1\n0,2\n".as_bytes(), None).is_err());
        assert!(SpectralCoeffs::read_csv("mu_1,value\n9,1\n".as_bytes(), Some(5)).is_err());
        let c = SpectralCoeffs::read_csv("mu_1,value\n2,1.5\n".as_bytes(), None).unwrap();
        assert_eq!(c.band().max_eigenvalue(), 5);
        assert_eq!(c.values(), &[0.0, 0.0, 1.5]);
    }
}
