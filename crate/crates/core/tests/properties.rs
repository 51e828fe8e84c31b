use std::f64::consts::SQRT_2;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcorr::classical::{biseparable_bound, bipartition_bound, local_bound};
use qcorr::correlations::InequalityFunctional;
use qcorr::optimizer::{optimize, Mode, ScenarioTemplate};
use qcorr::process::{ProcessMatrix, Structure};
use qcorr::random;
use qcorr::tensor::{CMatrix, Operator, SpaceLabel, C64};

fn labeled(rng: &mut ChaCha8Rng, party: &str, d: usize) -> Operator {
    Operator::new(vec![SpaceLabel::plain(party, d)], random::ginibre(rng, d, d)).unwrap()
}

fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_multiplicative(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = labeled(&mut rng, "A", da);
        let b = labeled(&mut rng, "B", db);
        let ab = a.tensor(&b).unwrap();
        prop_assert!((ab.trace() - a.trace() * b.trace()).norm() <= 1e-10 * (1.0 + ab.matrix().norm()));
    }

    #[test]
    fn partial_trace_of_product(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = labeled(&mut rng, "A", da);
        let b = labeled(&mut rng, "B", db);
        let ab = a.tensor(&b).unwrap();
        let reduced = ab.partial_trace(b.layout()).unwrap();
        prop_assert!(close(reduced.matrix(), &(a.matrix() * b.trace()), 1e-10));
        let other = ab.partial_trace(a.layout()).unwrap();
        prop_assert!(close(other.matrix(), &(b.matrix() * a.trace()), 1e-10));
    }

    #[test]
    fn partial_transposes_commute_and_compose(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = vec![SpaceLabel::plain("A", da), SpaceLabel::plain("B", db)];
        let m = Operator::new(layout.clone(), random::ginibre(&mut rng, da * db, da * db)).unwrap();
        let ab = m.transpose_subsystem(&layout[..1]).unwrap().transpose_subsystem(&layout[1..]).unwrap();
        let ba = m.transpose_subsystem(&layout[1..]).unwrap().transpose_subsystem(&layout[..1]).unwrap();
        prop_assert_eq!(ab.matrix(), ba.matrix());
        prop_assert_eq!(ab.matrix(), &m.matrix().transpose());
    }

    #[test]
    fn reorder_preserves_spectrum(seed in any::<u64>(), da in 1usize..4, db in 1usize..4, dc in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = vec![SpaceLabel::plain("A", da), SpaceLabel::plain("B", db), SpaceLabel::plain("C", dc)];
        let d = da * db * dc;
        let rho = Operator::new(layout.clone(), random::density_matrix(&mut rng, d)).unwrap();
        let permuted = rho.reorder(&[layout[2].clone(), layout[0].clone(), layout[1].clone()]).unwrap();
        let (x, y) = (rho.hermitian_eigenvalues(), permuted.hermitian_eigenvalues());
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() <= 1e-10);
        }
        let back = permuted.reorder(&layout).unwrap();
        prop_assert_eq!(back.matrix(), rho.matrix());
    }
}

#[test]
fn bounds_invariant_under_outcome_relabeling() {
    // every term is a full correlator, so flipping one party's +-1 labels
    // negates all of them; negated coefficients restore the functional
    for name in ["chsh", "mermin", "svetlichny"] {
        let f = InequalityFunctional::preset(name).unwrap();
        let g = InequalityFunctional::new(
            "relabeled",
            f.n_parties,
            f.terms.iter().map(|(k, &c)| (k.clone(), -c)),
            f.bound,
            f.absolute,
        )
        .unwrap();
        let n = f.n_parties;
        assert_eq!(local_bound(&f, n, 2).unwrap(), local_bound(&g, n, 2).unwrap(), "{name}");
        if n == 3 {
            assert_eq!(biseparable_bound(&f).unwrap(), biseparable_bound(&g).unwrap(), "{name}");
        }
    }
}

#[test]
fn embedded_chsh_bipartitions() {
    // C has a single setting and is ignored by the correlator
    let f = InequalityFunctional::new(
        "chsh-embedded",
        3,
        InequalityFunctional::chsh().terms.iter().map(|(k, &c)| (vec![k[0], k[1], 0], c)),
        2.0,
        false,
    )
    .unwrap();
    assert_eq!(bipartition_bound(&f, 0).unwrap(), 2.0);
    assert_eq!(bipartition_bound(&f, 1).unwrap(), 2.0);
    // A and B grouped may signal freely, reaching the algebraic maximum
    assert_eq!(bipartition_bound(&f, 2).unwrap(), 4.0);
    assert_eq!(biseparable_bound(&f).unwrap(), 4.0);
}

#[test]
fn mermin_biseparable_value() {
    assert_eq!(biseparable_bound(&InequalityFunctional::mermin()).unwrap(), 4.0);
}

#[test]
fn svetlichny_local_bound() {
    assert_eq!(local_bound(&InequalityFunctional::svetlichny(), 3, 2).unwrap(), 4.0);
}

fn random_state(seed: u64, parties: &[&str]) -> ProcessMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 1 << parties.len();
    let layout = parties.iter().map(|p| SpaceLabel::input(*p, 2)).collect();
    let rho = random::density_matrix(&mut rng, d);
    ProcessMatrix::new(Operator::new(layout, rho).unwrap(), Structure::SpatialState, 1e-9).unwrap()
}

#[test]
fn optimizer_respects_ceilings_and_mode_order() {
    let f = InequalityFunctional::chsh();
    for seed in 0..4 {
        let t = ScenarioTemplate::new(random_state(seed, &["A", "B"]), 2).unwrap();
        let xy = optimize(&t, &f, Mode::Xy, 4, seed).unwrap();
        let bloch = optimize(&t, &f, Mode::Bloch, 8, seed).unwrap();
        assert!(xy.best_value <= 2.0 * SQRT_2 + 1e-6);
        assert!(bloch.best_value <= 2.0 * SQRT_2 + 1e-6);
        assert!(xy.best_value <= bloch.best_value + 1e-6, "{} > {}", xy.best_value, bloch.best_value);
    }
    let s = InequalityFunctional::svetlichny();
    let t = ScenarioTemplate::new(random_state(9, &["A", "B", "C"]), 2).unwrap();
    let r = optimize(&t, &s, Mode::Bloch, 4, 1).unwrap();
    assert!(r.best_value <= 4.0 * SQRT_2 + 1e-6);
}

#[test]
fn random_pure_state_is_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi = random::pure_state(&mut rng, 6);
    let n: f64 = psi.iter().map(C64::norm_sqr).sum();
    assert!((n - 1.0).abs() < 1e-12);
}
