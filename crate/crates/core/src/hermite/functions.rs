//! Normalized Hermite functions `h_k(x) = (2^k k! √π)^{-1/2} H_k(x) e^{-x²/2}`.
//!
//! The three-term recurrence is run on `p_k = h_k e^{x²/2}` with the Gaussian
//! factor carried as a logarithmic offset. Whenever `|p_k|` grows past
//! `2^500` both recurrence terms are rescaled by an exact power of two, so
//! neither the raw polynomial nor the seed `e^{-x²/2}` ever overflows or
//! underflows along the way.

const RESCALE_EXP: i32 = 500;
const RESCALE_THRESHOLD: f64 = 3.273_390_607_896_142e150; // 2^500
const PI_POW_NEG_QUARTER: f64 = 0.751_125_544_464_942_5;

/// State of the scaled recurrence after reaching degree `k`:
/// `h_k(x) = current · exp(log_scale − x²/2)` and likewise for `previous`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledPair {
    pub current: f64,
    pub previous: f64,
    pub log_scale: f64,
}

impl ScaledPair {
    #[inline]
    fn start() -> Self {
        Self {
            current: PI_POW_NEG_QUARTER,
            previous: 0.0,
            log_scale: 0.0,
        }
    }

    /// Advance from degree `k` to `k + 1`.
    #[inline]
    fn step(&mut self, k: usize, x: f64) {
        let kf = k as f64;
        let next = x * (2.0 / (kf + 1.0)).sqrt() * self.current - (kf / (kf + 1.0)).sqrt() * self.previous;
        self.previous = self.current;
        self.current = next;
        if self.current.abs() > RESCALE_THRESHOLD {
            let down = 2f64.powi(-RESCALE_EXP);
            self.current *= down;
            self.previous *= down;
            self.log_scale += f64::from(RESCALE_EXP) * std::f64::consts::LN_2;
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        finish(self.current, self.log_scale, x)
    }
}

#[inline]
fn finish(p: f64, log_scale: f64, x: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let shift = log_scale - 0.5 * x * x;
    if shift > -700.0 {
        p * shift.exp()
    } else {
        // the factor alone would underflow while the product need not
        p.signum() * (p.abs().ln() + shift).exp()
    }
}

/// Runs the recurrence up to degree `k` and returns the scaled pair `(p_k, p_{k-1})`.
pub(crate) fn scaled_recurrence(k: usize, x: f64) -> ScaledPair {
    let mut state = ScaledPair::start();
    for j in 0..k {
        state.step(j, x);
    }
    state
}

/// The normalized Hermite function `h_k(x)`.
///
/// Stable for large degrees: `k <= 2048` and `|x| <= √(4k+2) + 10` return
/// finite values without intermediate overflow.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    scaled_recurrence(k, x).value(x)
}

/// `ln h_k(x)²`, finite even where `h_k(x)²` itself underflows. Returns
/// `-inf` at an exact zero.
pub fn hermite_log_square(k: usize, x: f64) -> f64 {
    let s = scaled_recurrence(k, x);
    2.0 * s.current.abs().ln() + 2.0 * s.log_scale - x * x
}

/// Values `h_k(x_i)` for `0 <= k <= max_degree` over a set of 1-d nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTable {
    max_degree: usize,
    nodes: usize,
    /// Row-major by degree: `values[k * nodes + i] = h_k(x_i)`.
    values: Vec<f64>,
}

impl HermiteTable {
    pub fn new(nodes: &[f64], max_degree: usize) -> Self {
        let m = nodes.len();
        let mut values = vec![0.0; (max_degree + 1) * m];
        for (i, &x) in nodes.iter().enumerate() {
            let mut state = ScaledPair::start();
            values[i] = state.value(x);
            for k in 0..max_degree {
                state.step(k, x);
                values[(k + 1) * m + i] = state.value(x);
            }
        }
        Self {
            max_degree,
            nodes: m,
            values,
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.nodes + i]
    }

    /// All values, row-major by degree.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// `h_k` at every node.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.nodes..(k + 1) * self.nodes]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn ground_state_at_origin() {
        assert_relative_eq!(hermite_eval(0, 0.0), PI.powf(-0.25), max_relative = 1e-15);
        assert_relative_eq!(hermite_eval(0, 0.0), 0.751_125_54, epsilon = 1e-8);
    }

    #[test]
    fn first_excited_state_closed_form() {
        let closed = |x: f64| 2f64.sqrt() * x * PI.powf(-0.25) * (-x * x / 2.0).exp();
        assert_relative_eq!(hermite_eval(1, 1.0), closed(1.0), max_relative = 1e-14);
        assert_relative_eq!(hermite_eval(1, 1.0), 0.644_288_37, epsilon = 1e-8);
    }

    #[test]
    fn matches_explicit_polynomials() {
        // H_2 = 4x²-2, H_3 = 8x³-12x, H_4 = 16x⁴-48x²+12
        let norm = |k: i32, fact: f64| (2f64.powi(k) * fact * PI.sqrt()).powf(-0.5);
        for &x in &[-2.3f64, -0.4, 0.0, 0.7, 3.1] {
            let g = (-x * x / 2.0).exp();
            assert_relative_eq!(
                hermite_eval(2, x),
                norm(2, 2.0) * (4.0 * x * x - 2.0) * g,
                epsilon = 1e-14
            );
            assert_relative_eq!(
                hermite_eval(3, x),
                norm(3, 6.0) * (8.0 * x.powi(3) - 12.0 * x) * g,
                epsilon = 1e-14
            );
            assert_relative_eq!(
                hermite_eval(4, x),
                norm(4, 24.0) * (16.0 * x.powi(4) - 48.0 * x * x + 12.0) * g,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn parity() {
        for k in 0..60 {
            for &x in &[0.3, 1.7, 5.0, 9.5] {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(hermite_eval(k, -x), sign * hermite_eval(k, x));
            }
        }
    }

    #[test]
    fn large_degree_is_finite_beyond_turning_point() {
        for &k in &[512usize, 1024, 2048] {
            let edge = (4.0 * k as f64 + 2.0).sqrt() + 10.0;
            for step in 0..=200 {
                let x = edge * step as f64 / 200.0;
                let v = hermite_eval(k, x);
                assert!(v.is_finite() && v.abs() < 1.0, "k={k} x={x} v={v}");
            }
            // at the turning point the seed e^{-x²/2} alone underflows for
            // k >= 745, while |h_k| is of order k^{-1/12}
            let turning = (2.0 * k as f64 + 1.0).sqrt();
            assert!(hermite_eval(k, turning).abs() > 0.05);
        }
    }

    #[test]
    fn log_square_agrees_with_value() {
        let x = 3.3;
        let k = 17;
        assert_relative_eq!(
            hermite_log_square(k, x),
            hermite_eval(k, x).powi(2).ln(),
            max_relative = 1e-12
        );
        // deep in the forbidden region the log stays finite
        assert!(hermite_log_square(3, 60.0).is_finite());
        assert_eq!(hermite_eval(3, 60.0), 0.0);
    }

    #[test]
    fn table_matches_pointwise() {
        let nodes = [-4.0, -0.5, 0.0, 1.25, 6.0];
        let table = HermiteTable::new(&nodes, 40);
        for k in 0..=40 {
            for (i, &x) in nodes.iter().enumerate() {
                assert_eq!(table.value(k, i), hermite_eval(k, x));
            }
        }
        assert_eq!(table.row(3).len(), 5);
    }
}
