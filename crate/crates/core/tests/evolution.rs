use std::sync::Arc;

use num_complex::Complex64;

use gpe2::dynamics::{conserved_check, evolve, EvolutionState, EvolveOptions};
use gpe2::functionals::inequality_gaps;
use gpe2::gn_constant::{gn_constant_quotient, gn_constant_shooting, run_quotient_ascent};
use gpe2::grid::{ComplexField, Field, FieldPair, Grid, RealField};
use gpe2::ground_state::{minimize_real, SolverOptions};
use gpe2::model::{Beta, MassConstraint, ModelParams};
use gpe2::stability::{stability_runs, PerturbationMode, StabilityOptions};
use gpe2::{ComplexPair, RealPair};

fn grid(points: usize) -> Arc<Grid> {
    Grid::new(2, 8.0, points).unwrap()
}

fn moving_pair(g: &Arc<Grid>) -> ComplexPair {
    let a = RealField::from_fn(g, |x| (-0.5 * ((x[0] - 1.0).powi(2) + x[1] * x[1])).exp());
    let b = ComplexField::from_fn(g, |x| {
        Complex64::from_polar(
            0.8 * (-0.6 * (x[0] * x[0] + (x[1] + 0.5).powi(2))).exp(),
            0.4 * x[0],
        )
    });
    FieldPair::new(a.to_complex(), b).unwrap()
}

fn final_state(p: &ModelParams, pair: &ComplexPair, dt: f64) -> ComplexPair {
    let traj = evolve(
        EvolutionState::new(pair.clone()).unwrap(),
        p,
        &EvolveOptions::new(1.0, dt, 1000),
    )
    .unwrap();
    traj.final_state.pair
}

fn l2_distance(a: &ComplexPair, b: &ComplexPair) -> f64 {
    let g = a.grid();
    (0..2)
        .map(|i| {
            let diff: f64 = a
                .component(i)
                .values()
                .iter()
                .zip(b.component(i).values())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum();
            diff * g.cell_volume()
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn strang_splitting_is_second_order() {
    let g = grid(64);
    let p = ModelParams::new(1.0, 0.1, -0.5, Beta::new(1.0, 0.5, 1.0), 2).unwrap();
    let start = moving_pair(&g);
    let dt = 0.02;
    let reference = final_state(&p, &start, dt / 8.0);
    let coarse = l2_distance(&final_state(&p, &start, dt), &reference);
    let fine = l2_distance(&final_state(&p, &start, dt / 2.0), &reference);
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "{coarse} / {fine} = {ratio}");
}

#[test]
fn coupling_moves_mass_between_components_only() {
    let g = grid(64);
    let p = ModelParams::new(1.0, 0.3, 0.8, Beta::new(1.0, 0.5, 1.0), 2).unwrap();
    let traj = evolve(
        EvolutionState::new(moving_pair(&g)).unwrap(),
        &p,
        &EvolveOptions::new(2.0, 1e-3, 50),
    )
    .unwrap();
    let first: Vec<f64> = traj.observations.iter().map(|o| o.masses[0]).collect();
    let swing = first.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - first.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(swing > 1e-2, "{swing}");
    assert!(conserved_check(&traj).unwrap().mass < 1e-12);
}

fn symmetric_ground() -> (ModelParams, RealPair) {
    let g = grid(32);
    let p = ModelParams::new(1.0, 0.0, -0.5, Beta::new(1.0, 0.5, 1.0), 2).unwrap();
    let m = MassConstraint::new(1.0, 1.0).unwrap();
    let r = minimize_real(&p, &m, &g, &SolverOptions::for_gamma(1.0)).unwrap();
    assert!(r.converged);
    (p, r.pair)
}

fn options(sizes: Vec<f64>, mode: PerturbationMode, seed: u64, epsilon: f64) -> StabilityOptions {
    StabilityOptions {
        sizes,
        mode,
        seed,
        t_final: 2.0,
        dt: 5e-3,
        record_every: 20,
        epsilon,
    }
}

#[test]
fn initial_distance_is_the_perturbation_size() {
    let (p, w) = symmetric_ground();
    for mode in [
        PerturbationMode::RandomSmooth,
        PerturbationMode::PhaseGradient,
        PerturbationMode::MassShift,
    ] {
        for r in stability_runs(&p, &w, &options(vec![1e-3, 1e-2], mode, 5, 0.1)).unwrap() {
            assert!(
                r.distances[0] <= r.size + 1e-10,
                "{mode:?} {} {}",
                r.size,
                r.distances[0]
            );
            assert!(r.distances.iter().all(|d| *d >= 0.0));
        }
    }
}

#[test]
fn unperturbed_standing_wave_passes_tight_targets() {
    let (p, w) = symmetric_ground();
    for epsilon in [1e-5, 1e-3, 1.0] {
        let opts = StabilityOptions {
            dt: 1e-3,
            record_every: 100,
            ..options(vec![0.0], PerturbationMode::RandomSmooth, 0, epsilon)
        };
        let reports = stability_runs(&p, &w, &opts).unwrap();
        assert!(
            reports[0].verdict,
            "epsilon {epsilon}: sup d = {}",
            reports[0].sup_distance
        );
    }
}

#[test]
fn sup_distance_grows_with_the_perturbation() {
    let (p, w) = symmetric_ground();
    let sizes = vec![1e-3, 3e-3, 1e-2, 3e-2];
    let mut mean = vec![0.0; sizes.len()];
    for seed in 0..3 {
        let reports = stability_runs(
            &p,
            &w,
            &options(sizes.clone(), PerturbationMode::RandomSmooth, seed, 0.1),
        )
        .unwrap();
        for (m, r) in mean.iter_mut().zip(&reports) {
            *m += r.sup_distance / 3.0;
        }
    }
    for pair in mean.windows(2) {
        assert!(pair[1] >= pair[0], "{mean:?}");
    }
}

#[test]
fn quotient_ascent_reproduces_the_shooting_constant() {
    let shooting = gn_constant_shooting(1e-10).unwrap().value;
    let g = Grid::new(2, 12.0, 256).unwrap();
    let quotient = gn_constant_quotient(&g, 2000).unwrap().value;
    assert!(
        (quotient - shooting).abs() < 1e-3 * shooting,
        "{quotient} vs {shooting}"
    );

    let (ascent, converged) = run_quotient_ascent(&Grid::new(2, 12.0, 128).unwrap(), 2000).unwrap();
    assert!(converged);
    let u = ascent.field().clone();
    let pair = FieldPair::new(u.clone(), u).unwrap();
    let p = ModelParams::new(1.0, 0.0, 0.0, Beta::zero(), 2).unwrap();
    let gaps =
        inequality_gaps(&pair, &p, &MassConstraint::new(1.0, 1.0).unwrap(), shooting).unwrap();
    let quartic: f64 =
        pair.first().values().iter().map(|v| v.powi(4)).sum::<f64>() * pair.grid().cell_volume();
    assert!(gaps.gn1.abs() < 1e-5 * quartic, "{} vs {quartic}", gaps.gn1);
}
