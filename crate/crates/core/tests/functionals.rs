use std::sync::Arc;

use gpe2::functionals::{el_gradient, energy_hat, energy_tilde};
use gpe2::grid::{
    l2_inner, l2_norm_sq, sigma_norm_sq, spectral_mass, ComplexField, Field, FieldPair, Grid,
};
use gpe2::model::{Beta, ModelParams};
use gpe2::rearrangement::{rearrangement_check, schwarz_symmetrize};
use gpe2::{sampling, ComplexPair};

fn grid() -> Arc<Grid> {
    Grid::new(2, 8.0, 32).unwrap()
}

fn full_params(lambda: f64) -> ModelParams {
    ModelParams::new(1.3, 0.2, lambda, Beta::new(0.8, -0.4, 1.1), 2).unwrap()
}

fn random_pair(g: &Arc<Grid>, seed: u64) -> ComplexPair {
    let mut rng = sampling::rng(seed);
    FieldPair::new(
        sampling::random_complex_field(g, &mut rng),
        sampling::random_complex_field(g, &mut rng),
    )
    .unwrap()
}

fn shifted(a: &ComplexField, b: &ComplexField, eps: f64) -> ComplexField {
    let v = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x + eps * y)
        .collect();
    ComplexField::from_values(a.grid(), v).unwrap()
}

#[test]
fn parseval_and_sigma_dominates_l2() {
    let g = grid();
    let mut rng = sampling::rng(5);
    for _ in 0..20 {
        let f = sampling::random_complex_field(&g, &mut rng);
        let direct = l2_norm_sq(&f);
        assert!((spectral_mass(&f) - direct).abs() <= 1e-12 * direct);
        assert!(sigma_norm_sq(&f).unwrap() >= direct);
    }
}

#[test]
fn el_gradient_is_the_frechet_derivative() {
    let g = grid();
    for (seed, lambda) in [(1, -0.7), (2, 0.4), (3, 0.0)] {
        let p = full_params(lambda);
        let psi = random_pair(&g, seed);
        let eta = random_pair(&g, seed + 100);
        let grad = el_gradient(&psi, &p).unwrap();
        let exact: f64 = (0..2)
            .map(|i| 2.0 * l2_inner(grad.component(i), eta.component(i)).unwrap().re)
            .sum();
        let central = |h: f64| {
            let e = |s: f64| {
                let moved = FieldPair::new(
                    shifted(psi.first(), eta.first(), s),
                    shifted(psi.second(), eta.second(), s),
                )
                .unwrap();
                energy_hat(&moved, &p).unwrap().total
            };
            (e(h) - e(-h)) / (2.0 * h)
        };
        let coarse = (central(1e-2) - exact).abs();
        let fine = (central(5e-3) - exact).abs();
        assert!(coarse < 1e-2 * exact.abs().max(1.0), "{coarse} vs {exact}");
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn gauge_identity() {
    let g = grid();
    let mut rng = sampling::rng(9);
    let w1 = sampling::random_positive_field(&g, &mut rng);
    let w2 = sampling::random_positive_field(&g, &mut rng);
    let p = full_params(-0.6);
    let base = energy_hat(
        &FieldPair::new(w1.to_complex(), w2.to_complex()).unwrap(),
        &p,
    )
    .unwrap();
    for (t1, t2) in [
        (0.0, 0.0),
        (0.4, 1.9),
        (2.5, -0.3),
        (1.0, 1.0 + std::f64::consts::PI),
    ] {
        let z = FieldPair::new(w1.to_complex().rotated(t1), w2.to_complex().rotated(t2)).unwrap();
        let e = energy_hat(&z, &p).unwrap();
        assert!((e.coupling - base.coupling * (t1 - t2).cos()).abs() < 1e-12);
        assert!(((e.total - e.coupling) - (base.total - base.coupling)).abs() < 1e-12);
    }
    let real = FieldPair::new(w1.clone(), w2.clone()).unwrap();
    let tilde = energy_tilde(&real, &p).unwrap().total;
    let aligned =
        FieldPair::new(w1.to_complex().rotated(0.8), w2.to_complex().rotated(0.8)).unwrap();
    assert!((energy_hat(&aligned, &p).unwrap().total - tilde).abs() < 1e-12);
}

#[test]
fn tilde_of_moduli_below_hat() {
    let g = grid();
    let mut rng = sampling::rng(17);
    for k in 0..200 {
        let lambda = if k % 2 == 0 { -0.8 } else { 0.8 };
        let p = full_params(lambda);
        let z: ComplexPair = FieldPair::new(
            sampling::random_phased_field(&g, &mut rng),
            sampling::random_complex_field(&g, &mut rng),
        )
        .unwrap();
        let hat = energy_hat(&z, &p).unwrap().total;
        let tilde = energy_tilde(&z.modulus(), &p).unwrap().total;
        assert!(tilde <= hat + 1e-10, "{tilde} > {hat}");
    }
}

#[test]
fn rearrangement_on_random_fields() {
    let g = Grid::new(2, 8.0, 256).unwrap();
    let mut rng = sampling::rng(31);
    for _ in 0..100 {
        let f = sampling::random_positive_field(&g, &mut rng);
        let h = sampling::random_positive_field(&g, &mut rng);
        let star = schwarz_symmetrize(&f).unwrap();
        let mut a = f.values().to_vec();
        let mut b = star.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);

        let gaps = rearrangement_check(&f, &h).unwrap();
        for v in [
            gaps.mass,
            gaps.quartic,
            gaps.moment,
            gaps.riesz,
            gaps.riesz_sq,
        ] {
            assert!(v >= -1e-10, "{gaps:?}");
        }
        assert!(
            gaps.mass.abs() < 1e-10 && gaps.quartic.abs() < 1e-10,
            "{gaps:?}"
        );
        assert!(gaps.polya >= -0.05 * gaps.grad_sq, "{gaps:?}");
    }
}

/// Worst relative Polya-Szego gap over a fixed batch of random fields.
fn worst_polya(points: usize) -> f64 {
    let g = Grid::new(2, 8.0, points).unwrap();
    let mut rng = sampling::rng(77);
    (0..100)
        .map(|_| {
            let f = sampling::random_positive_field(&g, &mut rng);
            let gaps = rearrangement_check(&f, &f).unwrap();
            gaps.polya / gaps.grad_sq
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn polya_gap_tolerance_shrinks_under_refinement() {
    let worst: Vec<f64> = [32, 64, 128, 256].iter().map(|&m| worst_polya(m)).collect();
    for w in worst.windows(2) {
        assert!(w[1] > w[0], "{worst:?}");
    }
    assert!(worst[3] >= -0.05, "{worst:?}");
}

#[test]
fn coupling_sign_follows_lambda() {
    let g = grid();
    let mut rng = sampling::rng(3);
    let u = sampling::random_positive_field(&g, &mut rng).to_complex();
    let pair = FieldPair::new(u.clone(), u.rotated(0.0)).unwrap();
    let overlap = l2_inner(&u, &u).unwrap().re;
    for lambda in [-0.5, 0.5] {
        let e = energy_hat(&pair, &full_params(lambda)).unwrap();
        assert!((e.coupling - 2.0 * lambda * overlap).abs() < 1e-12 * overlap);
    }
    let flipped = FieldPair::new(u.clone(), u.rotated(std::f64::consts::PI)).unwrap();
    let e = energy_hat(&flipped, &full_params(0.5)).unwrap();
    assert!((e.coupling + overlap).abs() < 1e-12 * overlap);
}
