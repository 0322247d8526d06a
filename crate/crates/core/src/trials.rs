//! Seeded random band-limited test functions.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::hermite::Band;
use crate::spectral::SpectralCoeffs;

/// `count` coefficient vectors with i.i.d. standard normal entries, each
/// normalized to unit `L²` norm. The sequence depends only on the band
/// size, `count` and `seed`.
pub fn random_unit_coeffs(band: Arc<Band>, count: usize, seed: u64) -> Result<Vec<SpectralCoeffs>> {
    if band.is_empty() {
        return Err(invalid("cannot draw trials from an empty band"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..band.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            SpectralCoeffs::from_values(band.clone(), v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_and_reproducible() {
        let band = Arc::new(Band::new(2, 12));
        let a = random_unit_coeffs(band.clone(), 5, 42).unwrap();
        let b = random_unit_coeffs(band.clone(), 5, 42).unwrap();
        let c = random_unit_coeffs(band, 5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for t in &a {
            assert!((t.norm_squared() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn prefix_is_stable_in_count() {
        let band = Arc::new(Band::new(1, 33));
        let short = random_unit_coeffs(band.clone(), 3, 9).unwrap();
        let long = random_unit_coeffs(band, 10, 9).unwrap();
        assert_eq!(short[..], long[..3]);
    }
}
