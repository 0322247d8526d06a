//! Norms in `L²((1+|x|)^{-α} dx)`, exact operator norms of finite band
//! sections, and numerical checks of the weighted estimates for `H`.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::commutator::{hl_maximal_commutator, BmoSymbol, CommutatorSpectrum, Execution};
use crate::error::{invalid, Error, Result};
use crate::hermite::{AxisRule, Band, HermiteTable, MultiIndex, QuadratureGrid, DEFAULT_NODE_CAP};
use crate::multiplier::DyadicBump;
use crate::spectral::{GridField, HermiteBasis, SpectralCoeffs, SpectralSymbol};
use crate::trials::random_unit_coeffs;

/// `ε` used in the `0 < α <= 1` branch of the weighted Plancherel bound.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// The power weight `w(x) = (1+|x|)^{-α}`.
///
/// Any finite `α` is accepted here; each operation checks the range it
/// needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    alpha: f64,
}

impl WeightSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid(format!("weight exponent must be finite, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn unweighted() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.alpha == 0.0 {
            return 1.0;
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (1.0 + r).powf(-self.alpha)
    }

    /// `α > 1`, the range of the trace lemma.
    pub fn require_trace_regime(&self) -> Result<()> {
        if self.alpha > 1.0 {
            Ok(())
        } else {
            Err(invalid(format!("the trace bound needs alpha > 1, got {}", self.alpha)))
        }
    }

    /// `|α| < n`, where the weight is in `A₂`.
    pub fn require_a2(&self, n: usize) -> Result<()> {
        if self.alpha.abs() < n as f64 {
            Ok(())
        } else {
            Err(invalid(format!("weight needs |alpha| < n = {n}, got {}", self.alpha)))
        }
    }

    /// Weight values at every node of `grid`.
    pub fn sample(&self, grid: &QuadratureGrid) -> Vec<f64> {
        grid.nodes().map(|x| self.eval(x)).collect()
    }
}

/// `(Σ_i w̃_i |f(x_i)|² (1+|x_i|)^{-α})^{1/2}`
pub fn weighted_l2_norm(f: &GridField, w: &WeightSpec) -> f64 {
    weighted_norm_squared(f.grid(), f.values(), w).sqrt()
}

pub(crate) fn weighted_norm_squared(grid: &QuadratureGrid, values: &[f64], w: &WeightSpec) -> f64 {
    grid.nodes()
        .zip(values)
        .zip(grid.lebesgue_weights())
        .map(|((x, v), q)| q * w.eval(x) * v * v)
        .sum()
}

/// Grid used for weighted Gram integrals of the band `Λ`: the split
/// Gauss–Legendre rule in one dimension, whose panel edge sits on the kink
/// of `(1+|x|)^{-α}`, and the tensor Gauss–Hermite rule with
/// `max(2Λ, 128)` points per axis otherwise. The kink limits the latter to
/// about `1e-3` relative accuracy for small bands.
pub fn gram_grid(n: usize, max_eigenvalue: usize) -> Result<QuadratureGrid> {
    let axis = if n == 1 {
        AxisRule::split_legendre(max_eigenvalue.max(1))?
    } else {
        AxisRule::gauss_hermite((2 * max_eigenvalue).max(128))?
    };
    QuadratureGrid::tensor(n, axis, DEFAULT_NODE_CAP)
}

/// `G_{μν} = ∫ Φ_μ Φ_ν (1+|x|)^{-α} dx` over `indices`, by quadrature on
/// `grid`.
pub fn weighted_gram(grid: &QuadratureGrid, indices: &[MultiIndex], w: &WeightSpec) -> Result<DMatrix<f64>> {
    let n = grid.dimension();
    if let Some(mu) = indices.iter().find(|mu| mu.dimension() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.dimension(),
        });
    }
    let max_degree = indices
        .iter()
        .flat_map(|mu| mu.components().iter().copied())
        .max()
        .unwrap_or(0) as usize;
    let top = indices.iter().map(MultiIndex::eigenvalue).max().unwrap_or(0);
    if top > grid.capacity() {
        return Err(Error::UndersizedGrid {
            band: top,
            required: top,
            actual: grid.capacity(),
        });
    }
    let table = HermiteTable::new(grid.axis().nodes(), max_degree);
    let m = grid.points_per_axis();
    let nodes = grid.len();
    let scale: Vec<f64> = grid
        .nodes()
        .zip(grid.lebesgue_weights())
        .map(|(x, q)| (q * w.eval(x)).sqrt())
        .collect();
    // rows of B are Φ_μ(x_i) √(w̃_i w(x_i)), so G = B Bᵀ
    let rows: Vec<Vec<f64>> = indices
        .par_iter()
        .map(|mu| {
            let comps = mu.components();
            let mut digits = vec![0usize; n];
            (0..nodes)
                .map(|i| {
                    let mut rest = i;
                    for slot in digits.iter_mut().rev() {
                        *slot = rest % m;
                        rest /= m;
                    }
                    let phi: f64 = comps
                        .iter()
                        .zip(&digits)
                        .map(|(&k, &d)| table.value(k as usize, d))
                        .product();
                    phi * scale[i]
                })
                .collect()
        })
        .collect();
    let b = DMatrix::from_fn(indices.len(), nodes, |r, c| rows[r][c]);
    Ok(&b * b.transpose())
}

/// A weighted inner product on the coefficient space of a band section.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGram {
    pub weight: WeightSpec,
    pub gram: DMatrix<f64>,
}

/// Dense matrix of an operator restricted to a band section, rows and
/// columns in graded multi-index order, with optional weighted inner
/// products on source and target (Euclidean when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct BandOperatorMatrix {
    indices: Vec<MultiIndex>,
    matrix: DMatrix<f64>,
    source: Option<WeightedGram>,
    target: Option<WeightedGram>,
}

impl BandOperatorMatrix {
    pub fn new(indices: Vec<MultiIndex>, matrix: DMatrix<f64>) -> Result<Self> {
        let d = indices.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if matrix.nrows() != d {
                    matrix.nrows()
                } else {
                    matrix.ncols()
                },
            });
        }
        Ok(Self {
            indices,
            matrix,
            source: None,
            target: None,
        })
    }

    /// Identity on a band section, so that its norm is that of the
    /// inclusion between the declared inner products.
    pub fn identity(indices: Vec<MultiIndex>) -> Self {
        let d = indices.len();
        Self {
            indices,
            matrix: DMatrix::identity(d, d),
            source: None,
            target: None,
        }
    }

    pub fn with_source(mut self, gram: WeightedGram) -> Result<Self> {
        self.check_gram(&gram.gram)?;
        self.source = Some(gram);
        Ok(self)
    }

    pub fn with_target(mut self, gram: WeightedGram) -> Result<Self> {
        self.check_gram(&gram.gram)?;
        self.target = Some(gram);
        Ok(self)
    }

    fn check_gram(&self, g: &DMatrix<f64>) -> Result<()> {
        let d = self.indices.len();
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: g.nrows(),
            });
        }
        Ok(())
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source(&self) -> Option<&WeightedGram> {
        self.source.as_ref()
    }

    pub fn target(&self) -> Option<&WeightedGram> {
        self.target.as_ref()
    }
}

/// Largest singular value of `M` between the declared inner products:
/// `σ² = λ_max(L⁻¹ Mᵀ T M L⁻ᵀ)` with `S = L Lᵀ` the source Gram matrix
/// and `T` the target one.
pub fn band_operator_norm(op: &BandOperatorMatrix) -> Result<f64> {
    let all = [
        Some(&op.matrix),
        op.source.as_ref().map(|g| &g.gram),
        op.target.as_ref().map(|g| &g.gram),
    ];
    for m in all.into_iter().flatten() {
        if let Some(v) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericDomain {
                index: Vec::new(),
                value: *v,
            });
        }
    }
    if op.indices.is_empty() {
        return Ok(0.0);
    }
    let a = &op.matrix;
    let mut normal = match &op.target {
        Some(t) => a.transpose() * &t.gram * a,
        None => a.transpose() * a,
    };
    if let Some(s) = &op.source {
        let chol = s
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("source Gram matrix is not positive definite"))?;
        let l = chol.l();
        // L⁻¹ N L⁻ᵀ by two triangular solves
        let left = l
            .solve_lower_triangular(&normal)
            .ok_or_else(|| invalid("singular source Gram factor"))?;
        normal = l
            .solve_lower_triangular(&left.transpose())
            .ok_or_else(|| invalid("singular source Gram factor"))?;
    }
    let sym = 0.5 * (&normal + normal.transpose());
    let top = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    Ok(top.max(0.0).sqrt())
}

/// Positions of the eigenvalues in `[k, k+1)` within `band`: the single
/// eigenspace `2d + n = k` when the parity matches.
fn trace_slice(band: &Band, k: usize) -> Option<Range<usize>> {
    let n = band.dimension();
    if k < n || !(k - n).is_multiple_of(2) {
        return None;
    }
    band.eigenspace_range((k - n) / 2)
}

/// `‖χ_{[k,k+1)}(H)‖_{L² → L²((1+|x|)^{-α})}`, exact on the eigenspace, on
/// the default Gram grid.
pub fn trace_projection_norm(k: usize, n: usize, w: &WeightSpec) -> Result<f64> {
    if n == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    w.require_trace_regime()?;
    let band = Band::new(n, k);
    if trace_slice(&band, k).is_none() {
        return Ok(0.0);
    }
    let grid = gram_grid(n, k)?;
    trace_projection_norm_on(k, w, &grid)
}

/// [`trace_projection_norm`] with the Gram integrals taken on `grid`.
pub fn trace_projection_norm_on(k: usize, w: &WeightSpec, grid: &QuadratureGrid) -> Result<f64> {
    w.require_trace_regime()?;
    let band = Band::new(grid.dimension(), k);
    let Some(range) = trace_slice(&band, k) else {
        return Ok(0.0);
    };
    let indices = band.indices()[range].to_vec();
    let gram = weighted_gram(grid, &indices, w)?;
    let op = BandOperatorMatrix::identity(indices).with_target(WeightedGram { weight: *w, gram })?;
    band_operator_norm(&op)
}

/// `‖G‖_{M,p} = ((1/M) Σ_{i=-M+1}^{M} sup_{[(i-1)/M, i/M)} |G|^p)^{1/p}` for
/// `G = F(N·)` and `M = N²`. Cell suprema are taken over 9 equispaced
/// samples including both cell ends.
pub fn discretized_norm(symbol: &SpectralSymbol, scale: u32, p: f64) -> Result<f64> {
    if scale == 0 {
        return Err(invalid("N must be a positive integer"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent must be finite and >= 1, got {p}")));
    }
    const SAMPLES: usize = 8;
    let big_n = scale as f64;
    let cells = (scale as i64) * (scale as i64);
    let width = 1.0 / cells as f64;
    let mut total = 0.0;
    for i in (-cells + 1)..=cells {
        let left = (i - 1) as f64 * width;
        let sup = (0..=SAMPLES)
            .map(|j| symbol.eval(big_n * (left + width * j as f64 / SAMPLES as f64)).abs())
            .fold(0.0f64, f64::max);
        total += sup.powf(p);
    }
    Ok((total / cells as f64).powf(1.0 / p))
}

/// Right side of the weighted Plancherel bound without its constant:
/// `N ‖F(N·)‖²_{N²,2}` for `α > 1` and
/// `N^{α/(1+ε)} ‖F(N·)‖²_{N²,2(1+ε)/α}` for `0 < α <= 1`.
pub fn plancherel_bound(symbol: &SpectralSymbol, scale: u32, alpha: f64, epsilon: f64) -> Result<f64> {
    let big_n = scale as f64;
    if alpha > 1.0 {
        Ok(big_n * discretized_norm(symbol, scale, 2.0)?.powi(2))
    } else if alpha > 0.0 {
        if !(epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let p = 2.0 * (1.0 + epsilon) / alpha;
        Ok(big_n.powf(alpha / (1.0 + epsilon)) * discretized_norm(symbol, scale, p)?.powi(2))
    } else {
        Err(invalid(format!(
            "the weighted Plancherel bound needs alpha > 0, got {alpha}"
        )))
    }
}

/// Trial count and seed for random band-limited probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSpec {
    pub count: usize,
    pub seed: u64,
}

/// Power-iteration steps applied to each trial in [`weighted_plancherel_ratio`].
pub const POWER_STEPS: usize = 12;

/// Max over random unit `f` in the basis band of
/// `‖F(√H)f‖²_{L²,w} / (bound ‖f‖²)`, with `bound` from
/// [`plancherel_bound`] at [`DEFAULT_EPSILON`].
///
/// Each trial is refined by [`POWER_STEPS`] steps of power iteration on
/// `F(√H)* w F(√H)`, which raises its Rayleigh quotient monotonically
/// toward the norm on the band; raw random quotients alone scatter too
/// widely for their maximum to settle.
pub fn weighted_plancherel_ratio(
    symbol: &SpectralSymbol,
    scale: u32,
    w: &WeightSpec,
    basis: &HermiteBasis,
    trials: TrialSpec,
) -> Result<f64> {
    let big_n = scale as f64;
    match symbol.support() {
        Some((a, b)) if a >= big_n / 4.0 && b <= big_n => {}
        _ => {
            return Err(invalid(format!(
                "symbol must declare a support inside [N/4, N] = [{}, {big_n}]",
                big_n / 4.0
            )))
        }
    }
    let bound = plancherel_bound(symbol, scale, w.alpha(), DEFAULT_EPSILON)?;
    let band = basis.band().clone();
    let factors: Vec<f64> = band
        .indices()
        .iter()
        .map(|mu| symbol.eval((mu.eigenvalue() as f64).sqrt()))
        .collect();
    if factors.iter().all(|f| *f == 0.0) {
        return Ok(0.0);
    }
    let grid = basis.grid();
    let weights = w.sample(grid);
    let mut best = 0.0f64;
    for c in random_unit_coeffs(band.clone(), trials.count, trials.seed)? {
        let mut v = c.values().to_vec();
        for step in 0..=POWER_STEPS {
            let norm_sq: f64 = v.iter().map(|x| x * x).sum();
            if norm_sq == 0.0 {
                break;
            }
            let fv = v.iter().zip(&factors).map(|(a, f)| a * f).collect();
            let g = basis.inverse_values(&SpectralCoeffs::from_values(band.clone(), fv)?)?;
            let num = weighted_norm_squared(grid, &g, w);
            best = best.max(num / norm_sq);
            if step == POWER_STEPS {
                break;
            }
            let wg: Vec<f64> = g.iter().zip(&weights).map(|(a, b)| a * b).collect();
            let back = basis.forward_values(&wg)?;
            let scale = 1.0 / num.sqrt().max(f64::MIN_POSITIVE);
            v = back.values().iter().zip(&factors).map(|(a, f)| a * f * scale).collect();
        }
    }
    if bound == 0.0 {
        return if best == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::UndefinedRatio("discretized symbol norm vanishes"))
        };
    }
    Ok(best / bound)
}

fn combine_parts(parts: &[Vec<f64>], factors: &[f64], nodes: usize) -> Vec<f64> {
    let mut out = vec![0.0; nodes];
    for (part, &fac) in parts.iter().zip(factors) {
        if fac == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(part) {
            *o += fac * v;
        }
    }
    out
}

/// `‖(1+|x|)^{α/2} f‖_{L²} / ‖(I+H)^{α/4} f‖_{L²}`, the numerator by
/// quadrature on `basis`'s grid and the denominator from the coefficients.
pub fn sobolev_weight_ratio(f: &SpectralCoeffs, alpha: f64, basis: &HermiteBasis) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let den: f64 = f
        .band()
        .indices()
        .iter()
        .zip(f.values())
        .map(|(mu, c)| (1.0 + mu.eigenvalue() as f64).powf(0.5 * alpha) * c * c)
        .sum();
    if den == 0.0 {
        return Err(Error::UndefinedRatio("f has no spectral mass"));
    }
    let field = basis.inverse(f)?;
    let growth = WeightSpec::new(-alpha)?;
    Ok((weighted_l2_norm(&field, &growth).powi(2) / den).sqrt())
}

/// The bump with support `[1, 3]` used in the dyadic square-function bounds.
pub fn square_function_bump() -> DyadicBump {
    DyadicBump::new(2.0, 3.0).expect("valid bump")
}

/// Levels `k` with `φ(2^{-k}√λ) ≠ 0` for some eigenvalue `λ ∈ [n, Λ]`.
pub fn dyadic_levels(n: usize, max_eigenvalue: usize) -> Range<i32> {
    let lo = ((n as f64).sqrt() / 3.0).log2().floor() as i32;
    let hi = (max_eigenvalue.max(n) as f64).sqrt().log2().ceil() as i32 + 1;
    lo..hi
}

fn level_factors(bump: &DyadicBump, eigenvalues: &[usize], k: i32) -> Vec<f64> {
    let s = 2f64.powi(-k);
    eigenvalues.iter().map(|&e| bump.eval(s * (e as f64).sqrt())).collect()
}

/// `Σ_k ‖φ(2^{-k}√H) f‖²_{L²,w} / ‖f‖²_{L²,w}` for the bump of
/// [`square_function_bump`].
pub fn littlewood_paley_ratio(f: &SpectralCoeffs, w: &WeightSpec, basis: &HermiteBasis) -> Result<f64> {
    let grid = basis.grid();
    let parts = basis.eigenspace_fields(f)?;
    let n = f.dimension();
    let eigenvalues: Vec<usize> = (0..parts.len()).map(|d| 2 * d + n).collect();
    let total = combine_parts(&parts, &vec![1.0; parts.len()], grid.len());
    let den = weighted_norm_squared(grid, &total, w);
    if den == 0.0 {
        return Err(Error::UndefinedRatio("f vanishes on the grid"));
    }
    let bump = square_function_bump();
    let num: f64 = dyadic_levels(n, f.band().max_eigenvalue())
        .map(|k| {
            let factors = level_factors(&bump, &eigenvalues, k);
            weighted_norm_squared(grid, &combine_parts(&parts, &factors, grid.len()), w)
        })
        .sum();
    Ok(num / den)
}

/// `Σ_k ‖[b, φ(2^{-k}√H)] f‖²_{L²,w} / (‖b‖²_BMO ‖f‖²_{L²,w})`, using the
/// BMO estimate carried by `b`.
pub fn commutator_littlewood_paley_ratio(
    b: &BmoSymbol,
    f: &SpectralCoeffs,
    w: &WeightSpec,
    basis: &HermiteBasis,
) -> Result<f64> {
    let grid = basis.grid();
    let f_field = basis.inverse(f)?;
    let den = weighted_norm_squared(grid, f_field.values(), w);
    if den == 0.0 {
        return Err(Error::UndefinedRatio("f vanishes on the grid"));
    }
    if b.is_constant() {
        return Ok(0.0);
    }
    let bmo = b
        .bmo_estimate()
        .ok_or_else(|| invalid(format!("symbol {} carries no BMO estimate", b.descriptor())))?;
    if bmo == 0.0 {
        return Err(Error::UndefinedRatio("BMO estimate is zero for a non-constant symbol"));
    }
    let spectrum = CommutatorSpectrum::new(b, f, basis)?;
    let bump = square_function_bump();
    let num: f64 = dyadic_levels(f.dimension(), basis.band().max_eigenvalue())
        .map(|k| {
            let factors = level_factors(&bump, spectrum.eigenvalues(), k);
            weighted_norm_squared(grid, &spectrum.combine(&factors), w)
        })
        .sum();
    Ok(num / (bmo * bmo * den))
}

/// Guard added to `M_b f` in [`maximal_domination_ratio`].
pub const DOMINATION_GUARD: f64 = 1e-12;

/// `max_x sup_t |[b, φ(t^{-2}H)]f(x)| / (M_b f(x) + τ)` over the nodes of
/// `basis`, with `φ` the bump of [`square_function_bump`] and `M_b` over
/// `radii`.
pub fn maximal_domination_ratio(
    b: &BmoSymbol,
    f: &SpectralCoeffs,
    t_grid: &[f64],
    radii: &[f64],
    basis: &HermiteBasis,
    exec: Execution,
) -> Result<f64> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("t grid must be non-empty and positive"));
    }
    let spectrum = CommutatorSpectrum::new(b, f, basis)?;
    let bump = square_function_bump();
    let mut sup = vec![0.0f64; basis.grid().len()];
    for &t in t_grid {
        let factors: Vec<f64> = spectrum
            .eigenvalues()
            .iter()
            .map(|&e| bump.eval(e as f64 / (t * t)))
            .collect();
        for (s, v) in sup.iter_mut().zip(spectrum.combine(&factors)) {
            *s = s.max(v.abs());
        }
    }
    let f_field = basis.inverse(f)?;
    let mb = hl_maximal_commutator(b, &f_field, radii, exec)?;
    Ok(sup
        .iter()
        .zip(mb.values())
        .map(|(s, m)| s / (m + DOMINATION_GUARD))
        .fold(0.0, f64::max))
}

/// Shared setup for studies with trials in a base band and a working
/// basis at twice that band, as used for commutators.
#[derive(Debug, Clone)]
pub struct TrialBasis {
    pub trial_band: Arc<Band>,
    pub basis: HermiteBasis,
}

impl TrialBasis {
    /// Trials in the band `Λ`, working band `work_eigenvalue`, on a tensor
    /// Gauss–Hermite grid with `m` points per axis.
    pub fn gauss_hermite(n: usize, max_eigenvalue: usize, work_eigenvalue: usize, m: usize) -> Result<Self> {
        if work_eigenvalue < max_eigenvalue {
            return Err(invalid(format!(
                "working band {work_eigenvalue} is smaller than the trial band {max_eigenvalue}"
            )));
        }
        let grid = Arc::new(QuadratureGrid::tensor(
            n,
            AxisRule::gauss_hermite(m)?,
            DEFAULT_NODE_CAP,
        )?);
        Ok(Self {
            trial_band: Arc::new(Band::new(n, max_eigenvalue)),
            basis: HermiteBasis::new(grid, work_eigenvalue)?,
        })
    }

    pub fn trials(&self, spec: TrialSpec) -> Result<Vec<SpectralCoeffs>> {
        random_unit_coeffs(self.trial_band.clone(), spec.count, spec.seed)
    }
}
