use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use hermite_spectral::commutator::{commutator_apply, BmoSymbol};
use hermite_spectral::hermite::{hermite_eval, tensor_grid, Band};
use hermite_spectral::multiplier::{subordination_check, DyadicBump, DyadicPartition};
use hermite_spectral::spectral::{
    apply_multiplier, bochner_riesz, project_eigenspace, GridField, HermiteBasis, SpectralCoeffs, SpectralSymbol,
};
use hermite_spectral::trials::random_unit_coeffs;
use hermite_spectral::weighted::{trace_projection_norm, WeightSpec};

fn basis_1d() -> &'static HermiteBasis {
    static B: OnceLock<HermiteBasis> = OnceLock::new();
    B.get_or_init(|| HermiteBasis::new(Arc::new(tensor_grid(1, 96).unwrap()), 48).unwrap())
}

fn basis_2d() -> &'static HermiteBasis {
    static B: OnceLock<HermiteBasis> = OnceLock::new();
    B.get_or_init(|| HermiteBasis::new(Arc::new(tensor_grid(2, 32).unwrap()), 16).unwrap())
}

fn trial(basis: &HermiteBasis, seed: u64) -> SpectralCoeffs {
    random_unit_coeffs(basis.band().clone(), 1, seed).unwrap().remove(0)
}

/// A trial supported on the lower half of the band, so `b·f` stays resolvable.
fn low_trial(basis: &HermiteBasis, seed: u64) -> GridField {
    let b = basis.band();
    let low = Arc::new(Band::new(b.dimension(), b.max_eigenvalue() / 2));
    let c = random_unit_coeffs(low, 1, seed).unwrap().remove(0);
    basis.inverse(&c.rebanded(b.clone()).unwrap()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hermite_parity(k in 0usize..400, x in 0.0f64..30.0) {
        let (a, b) = (hermite_eval(k, x), hermite_eval(k, -x));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(b, sign * a);
    }

    #[test]
    fn parseval(seed in any::<u64>(), two_d in any::<bool>()) {
        let basis = if two_d { basis_2d() } else { basis_1d() };
        let c = trial(basis, seed);
        let f = basis.inverse(&c).unwrap();
        prop_assert!((f.l2_norm() - c.norm_squared().sqrt()).abs() < 1e-10);
    }

    #[test]
    fn eigenspace_projection_self_adjoint(s1 in any::<u64>(), s2 in any::<u64>(), d in 0usize..24) {
        let basis = basis_1d();
        let k = 2 * d + 1;
        let (c, e) = (trial(basis, s1), trial(basis, s2));
        let f = basis.inverse(&c).unwrap();
        let g = basis.inverse(&e).unwrap();
        let pf = basis.inverse(&project_eigenspace(&c, k)).unwrap();
        let pg = basis.inverse(&project_eigenspace(&e, k)).unwrap();
        prop_assert!((pf.inner(&g).unwrap() - f.inner(&pg).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn multiplier_composition(seed in any::<u64>(), a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let c = trial(basis_1d(), seed);
        let f = SpectralSymbol::new(move |s| (-a * s).exp());
        let g = SpectralSymbol::new(move |s| (b * s).sin());
        let two = apply_multiplier(&apply_multiplier(&c, &f).unwrap(), &g).unwrap();
        let one = apply_multiplier(&c, &f.product(&g)).unwrap();
        prop_assert!(max_diff(two.values(), one.values()) < 1e-15);
    }

    #[test]
    fn riesz_contracts(seed in any::<u64>(), r in 0.5f64..12.0, lambda in 0.0f64..4.0) {
        let c = trial(basis_1d(), seed);
        let s = bochner_riesz(&c, r, lambda).unwrap();
        prop_assert!(s.norm_squared() <= c.norm_squared() * (1.0 + 1e-14));
    }

    #[test]
    fn commutator_linear_in_f(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, r in 1.0f64..8.0) {
        let basis = basis_1d();
        let (f, g) = (low_trial(basis, s1), low_trial(basis, s2));
        let t = SpectralSymbol::bochner_riesz(r, 1.0).unwrap();
        let b = BmoSymbol::sin();
        let mix = GridField::new(
            f.grid().clone(),
            f.values().iter().zip(g.values()).map(|(x, y)| a * x + y).collect(),
        ).unwrap();
        let lhs = commutator_apply(&b, &t, &mix, basis).unwrap().field;
        let cf = commutator_apply(&b, &t, &f, basis).unwrap().field;
        let cg = commutator_apply(&b, &t, &g, basis).unwrap().field;
        let rhs: Vec<f64> = cf.values().iter().zip(cg.values()).map(|(x, y)| a * x + y).collect();
        prop_assert!(max_diff(lhs.values(), &rhs) < 1e-10);
    }

    #[test]
    fn commutator_additive_in_b(seed in any::<u64>(), r in 1.0f64..8.0, w in 0.2f64..2.0) {
        let basis = basis_1d();
        let f = low_trial(basis, seed);
        let t = SpectralSymbol::bochner_riesz(r, 1.0).unwrap();
        let b1 = BmoSymbol::sin();
        let b2 = BmoSymbol::new("bump", move |x| (-w * x[0] * x[0]).exp());
        let lhs = commutator_apply(&b1.sum(&b2), &t, &f, basis).unwrap().field;
        let r1 = commutator_apply(&b1, &t, &f, basis).unwrap().field;
        let r2 = commutator_apply(&b2, &t, &f, basis).unwrap().field;
        let rhs: Vec<f64> = r1.values().iter().zip(r2.values()).map(|(x, y)| x + y).collect();
        prop_assert!(max_diff(lhs.values(), &rhs) < 1e-10);
    }

    #[test]
    fn commutator_shift_invariant(seed in any::<u64>(), c in -10.0f64..10.0, r in 1.0f64..8.0) {
        let basis = basis_1d();
        let f = low_trial(basis, seed);
        let t = SpectralSymbol::bochner_riesz(r, 1.0).unwrap();
        let b = BmoSymbol::sin();
        let base = commutator_apply(&b, &t, &f, basis).unwrap().field;
        let moved = commutator_apply(&b.shifted(c), &t, &f, basis).unwrap().field;
        let scale = 1.0 + c.abs();
        prop_assert!(max_diff(base.values(), moved.values()) < 1e-13 * scale);
    }

    #[test]
    fn dyadic_partition_of_unity(e in -20.0f64..20.0) {
        let u = 2f64.powf(e);
        let eta = DyadicBump::littlewood_paley();
        let sum: f64 = (-24..=24).map(|j| eta.eval(u * 2f64.powi(-j))).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lumped_partition_of_unity(k in 2i32..12, e in -20.0f64..20.0) {
        let p = DyadicPartition::new(2f64.powi(-k)).unwrap();
        let u = 2f64.powf(e);
        let sum: f64 = (p.j0()..=p.j0() + 48).map(|j| p.piece(j, u)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subordination_identity(
        lambda in 0.3f64..4.0,
        frac in 0.0f64..1.0,
        m in 0.1f64..4.0,
        gap in 0.05f64..4.0,
    ) {
        let rho = -0.45 + frac * (lambda - 0.1 + 0.45);
        let res = subordination_check(lambda, rho, m, m + gap).unwrap();
        prop_assert!(res.relative_error() <= 1e-8, "{:?}", res);
    }

    #[test]
    fn weight_positive_and_bounded(alpha in 0.0f64..4.0, x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let w = WeightSpec::new(alpha).unwrap().eval(&[x, y]);
        prop_assert!(w > 0.0 && w <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trace_norm_at_most_one(k in 1usize..200, alpha in 1.05f64..4.0) {
        let v = trace_projection_norm(k, 1, &WeightSpec::new(alpha).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn trials_reproducible(seed in any::<u64>(), count in 1usize..6) {
        let band = Arc::new(Band::new(2, 10));
        let a = random_unit_coeffs(band.clone(), count, seed).unwrap();
        let b = random_unit_coeffs(band, count, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
