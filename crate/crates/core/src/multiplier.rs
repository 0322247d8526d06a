//! Auxiliary symbols: the annular bump `φ`, smooth dyadic partitions, the
//! Fourier-localized pieces `φ_{δ,j}`, and checks of the subordination and
//! dyadic Riesz identities.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::quad::tanh_sinh;
use crate::spectral::SpectralSymbol;
use crate::stats::{linear_fit, LinearFit};

/// `S(t) = g(t) / (g(t) + g(1 − t))` with `g(t) = e^{-1/t}` for `t > 0`:
/// smooth, `0` for `t <= 0`, `1` for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g0 = (-1.0 / t).exp();
        let g1 = (-1.0 / (1.0 - t)).exp();
        g0 / (g0 + g1)
    }
}

/// Dyadic bump `ν(r) = χ(r) − χ(2r)` built from the cutoff
/// `χ(r) = 1 − S(log(r/a) / log(b/a))`, which is `1` below `a` and `0`
/// above `b`. Then `ν` is supported in `(a/2, b)` and
/// `Σ_{j∈ℤ} ν(2^{-j} r) = 1` for every `r > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicBump {
    a: f64,
    b: f64,
}

impl DyadicBump {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(invalid(format!("dyadic bump needs 0 < a < b, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// The Littlewood–Paley bump supported in `[1/2, 2]`.
    pub fn littlewood_paley() -> Self {
        Self { a: 1.0, b: 2.0 }
    }

    /// Support of `ν` on the positive axis.
    pub fn support(&self) -> (f64, f64) {
        (0.5 * self.a, self.b)
    }

    pub fn cutoff(&self, r: f64) -> f64 {
        if r <= self.a {
            1.0
        } else if r >= self.b {
            0.0
        } else {
            1.0 - smooth_step((r / self.a).ln() / (self.b / self.a).ln())
        }
    }

    pub fn nu(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.cutoff(r) - self.cutoff(2.0 * r)
    }

    /// The even extension `u ↦ ν(|u|)`.
    pub fn eval(&self, u: f64) -> f64 {
        self.nu(u.abs())
    }
}

/// `η_j(u) = η(2^{-j}u)` for `j > j₀` and the lumped low-frequency piece
/// `η_{j₀} = 1 − Σ_{j>j₀} η_j`, with `j₀ = ⌊−log₂ δ⌋ − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartition {
    delta: f64,
    j0: i32,
    eta: DyadicBump,
}

impl DyadicPartition {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            delta,
            j0: start_index(delta),
            eta: DyadicBump::littlewood_paley(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn j0(&self) -> i32 {
        self.j0
    }

    pub fn eta(&self) -> DyadicBump {
        self.eta
    }

    /// `η_j(u)`; zero for `j < j₀`.
    pub fn piece(&self, j: i32, u: f64) -> f64 {
        let r = u.abs();
        match j.cmp(&self.j0) {
            std::cmp::Ordering::Less => 0.0,
            // the tail telescopes to the cutoff at scale 2^{j₀}
            std::cmp::Ordering::Equal => self.eta.cutoff(r * 2f64.powi(-self.j0)),
            std::cmp::Ordering::Greater => self.eta.nu(r * 2f64.powi(-j)),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    Ok(())
}

/// `j₀ = ⌊−log₂ δ⌋ − 1`
pub fn start_index(delta: f64) -> i32 {
    (-delta.log2()).floor() as i32 - 1
}

/// `φ(u) = exp(1 − 1/(1 − ((|u| − 5/16)/(3/16))²))` on `1/8 < |u| < 1/2`,
/// zero elsewhere; even, smooth, with `φ(±5/16) = 1`.
pub fn bump_phi(u: f64) -> f64 {
    let a = (u.abs() - 5.0 / 16.0) / (3.0 / 16.0);
    if a.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - a * a)).exp()
    }
}

/// [`bump_phi`] as a symbol with its support and sup bound declared.
pub fn build_bump_phi() -> SpectralSymbol {
    SpectralSymbol::new(bump_phi)
        .with_support(-0.5, 0.5)
        .with_sup_bound(1.0)
}

/// `φ_δ(s) = φ(δ^{-1}(1 − s²))`
pub fn phi_delta(delta: f64, s: f64) -> f64 {
    bump_phi((1.0 - s * s) / delta)
}

/// Samples of a symbol on a uniform grid of `s >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSymbol {
    start: f64,
    step: f64,
    values: Vec<f64>,
    delta: f64,
    j: i32,
}

impl SampledSymbol {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn j(&self) -> i32 {
        self.j
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn s(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| (self.s(i), *v))
    }

    /// Value at a grid point `s`, if `s` lies on the grid.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        let k = (s - self.start) / self.step;
        let i = k.round();
        if (k - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.values.len() {
            return None;
        }
        Some(self.values[i as usize])
    }

    /// `sup |value|` over grid points with `|s − 1| <= radius`.
    pub fn sup_near_one(&self, radius: f64) -> f64 {
        self.points()
            .filter(|(s, _)| (s - 1.0).abs() <= radius)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    /// Pointwise sum of samples on the same grid.
    pub fn sum<'a>(pieces: impl IntoIterator<Item = &'a SampledSymbol>) -> Option<Vec<f64>> {
        let mut iter = pieces.into_iter();
        let first = iter.next()?;
        let mut acc = first.values.clone();
        for p in iter {
            for (a, v) in acc.iter_mut().zip(&p.values) {
                *a += v;
            }
        }
        Some(acc)
    }

    /// Two-column `s,value` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["s", "value"])?;
        for (s, v) in self.points() {
            w.write_record([format!("{s}"), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Periodic sampling window used for the synthesis of `φ_{δ,j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisGrid {
    pub period: f64,
    pub samples: usize,
}

impl Default for SynthesisGrid {
    fn default() -> Self {
        Self {
            period: 8.0,
            samples: 1 << 16,
        }
    }
}

impl SynthesisGrid {
    pub fn step(&self) -> f64 {
        self.period / self.samples as f64
    }

    /// Largest step that still puts 8 samples across the support width
    /// `3δ/16` of each bump of `φ_δ`.
    pub fn required_step(delta: f64) -> f64 {
        3.0 * delta / 128.0
    }
}

/// Spectrum of `φ_δ` on a periodic grid, from which every `φ_{δ,j}` is
/// obtained by windowing with `η_j` and inverting.
pub struct PhiDeltaSynthesis {
    partition: DyadicPartition,
    grid: SynthesisGrid,
    spectrum: Vec<Complex<f64>>,
    frequencies: Vec<f64>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for PhiDeltaSynthesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiDeltaSynthesis")
            .field("partition", &self.partition)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl PhiDeltaSynthesis {
    pub fn new(delta: f64, grid: SynthesisGrid) -> Result<Self> {
        let partition = DyadicPartition::new(delta)?;
        if grid.samples < 16 || !(grid.period > 4.0) {
            return Err(invalid("synthesis window must exceed [-2, 2] with at least 16 samples"));
        }
        let step = grid.step();
        let required = SynthesisGrid::required_step(delta);
        if step > required {
            return Err(Error::Unresolved { step, required });
        }
        let n = grid.samples;
        let half = 0.5 * grid.period;
        // sample index k sits at s = −period/2 + k·step; rotate so s = 0 is index 0
        let mut data: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let s = -half + step * k as f64;
                Complex::new(phi_delta(delta, s), 0.0)
            })
            .collect();
        data.rotate_left(n / 2);
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut data);
        let frequencies = (0..n)
            .map(|k| {
                let kk = if k < n.div_ceil(2) {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                2.0 * std::f64::consts::PI * kk / grid.period
            })
            .collect();
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            partition,
            grid,
            spectrum: data,
            frequencies,
            inverse,
        })
    }

    pub fn partition(&self) -> &DyadicPartition {
        &self.partition
    }

    pub fn j0(&self) -> i32 {
        self.partition.j0()
    }

    /// `φ_δ` itself on the returned `s >= 0` grid.
    pub fn target(&self) -> SampledSymbol {
        let step = self.grid.step();
        let count = self.grid.samples / 2;
        SampledSymbol {
            start: 0.0,
            step,
            values: (0..count)
                .map(|i| phi_delta(self.partition.delta(), step * i as f64))
                .collect(),
            delta: self.partition.delta(),
            j: self.j0(),
        }
    }

    /// Samples of `φ_{δ,j}` on `s ∈ [0, period/2)`. Frequencies beyond the
    /// grid's Nyquist limit are absent, so pieces whose window lies entirely
    /// above it come out as zeros.
    pub fn piece(&self, j: i32) -> Result<SampledSymbol> {
        if j < self.j0() {
            return Err(invalid(format!("piece index {j} is below j0 = {}", self.j0())));
        }
        let n = self.grid.samples;
        let mut data: Vec<Complex<f64>> = self
            .spectrum
            .iter()
            .zip(&self.frequencies)
            .map(|(c, &u)| c * self.partition.piece(j, u))
            .collect();
        self.inverse.process(&mut data);
        let scale = 1.0 / n as f64;
        Ok(SampledSymbol {
            start: 0.0,
            step: self.grid.step(),
            values: data[..n / 2].iter().map(|c| c.re * scale).collect(),
            delta: self.partition.delta(),
            j,
        })
    }
}

/// `φ_{δ,j}` on the default synthesis grid.
pub fn build_phi_delta_j(delta: f64, j: i32, grid: SynthesisGrid) -> Result<SampledSymbol> {
    PhiDeltaSynthesis::new(delta, grid)?.piece(j)
}

/// Log-log decay fit of a piece away from the annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub fit: LinearFit,
    /// Claimed decay order `N`.
    pub order: u32,
    /// `slope <= −N + 1/2`
    pub consistent: bool,
}

/// Fits `ln |φ_{δ,j}(s)|` against `ln(1 + 2^j |s − 1|)` over `s >= 0` with
/// `|s − 1| >= 4δ`.
///
/// Samples are reduced to a max envelope over equal-width bins in the
/// abscissa, which removes oscillation zeros; bins whose envelope falls
/// below `1e-12` of the largest are round-off and are dropped.
pub fn decay_check(piece: &SampledSymbol, order: u32) -> Result<DecayFit> {
    const BINS: usize = 48;
    let scale = 2f64.powi(piece.j);
    let window: Vec<(f64, f64)> = piece
        .points()
        .filter(|(s, _)| *s >= 0.0 && (s - 1.0).abs() >= 4.0 * piece.delta)
        .map(|(s, v)| ((1.0 + scale * (s - 1.0).abs()).ln(), v.abs()))
        .collect();
    if window.len() < BINS {
        return Err(Error::InsufficientData(format!(
            "decay window has {} samples, need at least {BINS}",
            window.len()
        )));
    }
    let lo = window.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = window.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / BINS as f64;
    let mut env = vec![(0.0f64, 0.0f64); BINS];
    for &(x, v) in &window {
        let b = (((x - lo) / width) as usize).min(BINS - 1);
        if v > env[b].1 {
            env[b] = (x, v);
        }
    }
    let peak = env.iter().map(|e| e.1).fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = env
        .iter()
        .filter(|e| e.1 > 1e-12 * peak && e.1 > 0.0)
        .map(|e| (e.0, e.1.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} envelope bins above the noise floor",
            xs.len()
        )));
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        fit,
        order,
        consistent: fit.slope <= -(order as f64) + 0.5,
    })
}

/// Both sides of the subordination identity
/// `(1 − m²/R²)_+^λ = C̃ R^{-2λ} ∫_0^R (R² − t²)^{λ−ρ−1} t^{2ρ+1} (1 − m²/t²)_+^ρ dt`
/// with `C̃ = 2 / B(λ − ρ, ρ + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinationResult {
    pub lhs: f64,
    pub rhs: f64,
}

impl SubordinationResult {
    /// `|lhs − rhs| / max(lhs, 1e-12)`
    pub fn relative_error(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.max(1e-12)
    }
}

/// The constant `C̃_{λ,ρ} = 2 / B(λ − ρ, ρ + 1)`.
pub fn subordination_constant(lambda: f64, rho: f64) -> f64 {
    2.0 / statrs::function::beta::beta(lambda - rho, rho + 1.0)
}

/// Both sides of `(1 − m²/R²)_+^λ = C̃ R^{-2λ} ∫_m^R (R² − t²)^{λ−ρ−1} t^{2ρ+1} (1 − m²/t²)^ρ dt`.
///
/// The quadrature cannot reach below the smallest representable distance to
/// `R`, so the relative error grows like `ε^{λ−ρ}` with `ε ≈ 1e-300`; keep
/// `λ − ρ >= 0.1` for 1e-8 agreement.
pub fn subordination_check(lambda: f64, rho: f64, m: f64, radius: f64) -> Result<SubordinationResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(rho > -0.5 && rho < lambda) {
        return Err(invalid(format!("rho must satisfy -1/2 < rho < lambda, got {rho}")));
    }
    if !(m > 0.0 && radius > 0.0 && m.is_finite() && radius.is_finite()) {
        return Err(invalid(format!("need m > 0 and R > 0, got m = {m}, R = {radius}")));
    }
    if m >= radius {
        return Ok(SubordinationResult { lhs: 0.0, rhs: 0.0 });
    }
    let lhs = ((radius - m) * (radius + m) / (radius * radius)).powf(lambda);
    let integrand = |t: f64, dm: f64, dr: f64| {
        // R² − t² and 1 − m²/t² from the exact endpoint distances
        let outer = (dr * (radius + t)).powf(lambda - rho - 1.0);
        let inner = (dm * (t + m) / (t * t)).powf(rho);
        outer * t.powf(2.0 * rho + 1.0) * inner
    };
    let integral = tanh_sinh(integrand, m, radius, 1e-13);
    let rhs = subordination_constant(lambda, rho) * radius.powf(-2.0 * lambda) * integral;
    Ok(SubordinationResult { lhs, rhs })
}

/// Outcome of the dyadic decomposition check of `x_+^ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszDyadicResult {
    pub residual: f64,
    /// Symmetric cut-off `K_c` of the sum over `k`.
    pub k_cut: i32,
}

/// `θ`, supported in `[1/8, 1/2]`, with `Σ_k θ(2^k x) = 1` for `x > 0`.
fn riesz_theta() -> DyadicBump {
    DyadicBump { a: 0.25, b: 0.5 }
}

/// `φ_*(x) = x^ρ θ(x)`, so that `Σ_k 2^{-kρ} φ_*(2^k x) = x^ρ` by telescoping.
pub fn riesz_piece(rho: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(rho) * riesz_theta().nu(x)
    }
}

/// Indices `k` with `φ_*(2^k x) ≠ 0` possible: `2^k x ∈ (1/8, 1/2)`.
pub fn riesz_active_window(x: f64) -> Option<(i32, i32)> {
    if x <= 0.0 {
        return None;
    }
    let lo = (-(8.0 * x).log2()).floor() as i32;
    let hi = (-(2.0 * x).log2()).ceil() as i32;
    Some((lo, hi))
}

/// `sup_x |x^ρ − Σ_{|k|<=K_c} 2^{-kρ} φ_*(2^k x)|` over `x_grid ⊂ [0, 1]`.
/// `K_c` covers every active window, so the omitted tail is exactly zero.
pub fn riesz_dyadic_check(rho: f64, x_grid: &[f64]) -> Result<RieszDyadicResult> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    if let Some(x) = x_grid.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
        return Err(invalid(format!("x grid must lie in [0, 1], found {x}")));
    }
    let k_cut = x_grid
        .iter()
        .filter_map(|&x| riesz_active_window(x))
        .map(|(lo, hi)| lo.abs().max(hi.abs()))
        .max()
        .unwrap_or(0)
        + 1;
    let mut residual = 0.0f64;
    for &x in x_grid {
        let target = if x > 0.0 { x.powf(rho) } else { 0.0 };
        let sum: f64 = (-k_cut..=k_cut)
            .map(|k| 2f64.powf(-(k as f64) * rho) * riesz_piece(rho, 2f64.powi(k) * x))
            .sum();
        residual = residual.max((target - sum).abs());
    }
    Ok(RieszDyadicResult { residual, k_cut })
}
