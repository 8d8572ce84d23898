//! Strang splitting for the coupled Schrödinger system.
//!
//! A step of length `dt` is `A(dt/2) B(dt/2) C(dt) B(dt/2) A(dt/2)`:
//!
//! * `A`: kinetic flow, the Fourier multiplier `exp(-i |k|^2 t / 2)`;
//! * `B`: trap, detuning and quartic terms as a pointwise phase with the
//!   moduli frozen (they are invariant under this substep);
//! * `C`: the Rabi coupling, `cos(lambda t) I - i sin(lambda t) sigma_x`.
//!
//! Each substep is an isometry for the total mass. [`evolve`] merges the
//! trailing kinetic half-step of one step with the leading half-step of the
//! next, so the trajectory matches repeated [`strang_step`] calls.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::energy_hat;
use crate::grid::{ComplexField, ComplexPair, FieldPair, Grid};
use crate::model::ModelParams;

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub time: f64,
    pub pair: ComplexPair,
    pub steps: u64,
}

impl EvolutionState {
    pub fn new(pair: ComplexPair) -> Result<Self> {
        if !pair.is_finite() {
            return Err(Error::NonFinite("initial data"));
        }
        Ok(EvolutionState {
            time: 0.0,
            pair,
            steps: 0,
        })
    }
}

/// `e^{i theta} - 1`, accurate for small `theta`. Applying a phase as
/// `z + z * phase_minus_one(theta)` keeps the modulus error proportional to
/// `theta^2` instead of to the unit roundoff.
fn phase_minus_one(theta: f64) -> Complex64 {
    let h = (0.5 * theta).sin();
    Complex64::new(-2.0 * h * h, theta.sin())
}

struct Splitting<'a> {
    grid: Arc<Grid>,
    params: &'a ModelParams,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
    trap: Vec<f64>,
}

impl<'a> Splitting<'a> {
    fn new(grid: Arc<Grid>, params: &'a ModelParams, dt: f64) -> Self {
        let multiplier = |t: f64| -> Vec<Complex64> {
            grid.wavenumber_sq()
                .iter()
                .map(|k2| phase_minus_one(-0.5 * k2 * t))
                .collect()
        };
        let half_kinetic = multiplier(0.5 * dt);
        let full_kinetic = multiplier(dt);
        let half_g2 = 0.5 * params.gamma * params.gamma;
        let trap = grid.radius_sq().iter().map(|r2| half_g2 * r2).collect();
        Splitting {
            grid,
            params,
            dt,
            half_kinetic,
            full_kinetic,
            trap,
        }
    }

    fn kinetic(&self, psi: &mut [Vec<Complex64>; 2], multiplier: &[Complex64]) {
        for comp in psi.iter_mut() {
            self.grid.fft_forward(comp);
            for (v, m) in comp.iter_mut().zip(multiplier) {
                *v += *v * m;
            }
            self.grid.fft_inverse(comp);
        }
    }

    fn potential(&self, psi: &mut [Vec<Complex64>; 2], t: f64) {
        let p = self.params;
        let (b11, b12) = p.beta.row(0);
        let (b22, b21) = p.beta.row(1);
        let (d1, d2) = (p.detuning(0), p.detuning(1));
        let [a, b] = psi;
        for ((u, v), trap) in a.iter_mut().zip(b.iter_mut()).zip(&self.trap) {
            let (r1, r2) = (u.norm_sqr(), v.norm_sqr());
            *u += *u * phase_minus_one(-t * (trap + d1 + b11 * r1 + b12 * r2));
            *v += *v * phase_minus_one(-t * (trap + d2 + b22 * r2 + b21 * r1));
        }
    }

    fn coupling(&self, psi: &mut [Vec<Complex64>; 2], t: f64) {
        let lambda = self.params.lambda;
        if lambda == 0.0 {
            return;
        }
        let z = phase_minus_one(lambda * t);
        let (cm1, mis) = (z.re, Complex64::new(0.0, -z.im));
        let [a, b] = psi;
        for (u, v) in a.iter_mut().zip(b.iter_mut()) {
            let (x, y) = (*u, *v);
            *u = x + (cm1 * x + mis * y);
            *v = y + (mis * x + cm1 * y);
        }
    }

    /// `B C B`, the part of a step between the kinetic half-steps.
    fn interior(&self, psi: &mut [Vec<Complex64>; 2]) {
        self.potential(psi, 0.5 * self.dt);
        self.coupling(psi, self.dt);
        self.potential(psi, 0.5 * self.dt);
    }
}

fn check_step(params: &ModelParams, pair: &ComplexPair, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    params.validate()?;
    if pair.grid().dim() != params.dim {
        return Err(Error::DimensionMismatch {
            condition: "model dimension".into(),
            expected: params.dim.to_string(),
            actual: pair.grid().dim(),
        });
    }
    Ok(())
}

fn unpack(pair: &ComplexPair) -> [Vec<Complex64>; 2] {
    [
        pair.first().values().to_vec(),
        pair.second().values().to_vec(),
    ]
}

fn pack(grid: &Arc<Grid>, psi: [Vec<Complex64>; 2]) -> ComplexPair {
    let [a, b] = psi;
    FieldPair::new(
        ComplexField::from_raw(grid, a),
        ComplexField::from_raw(grid, b),
    )
    .expect("same grid")
}

fn all_finite(psi: &[Vec<Complex64>; 2]) -> bool {
    psi.iter()
        .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
}

/// One symmetric splitting step.
pub fn strang_step(
    state: &EvolutionState,
    params: &ModelParams,
    dt: f64,
) -> Result<EvolutionState> {
    check_step(params, &state.pair, dt)?;
    let grid = state.pair.grid().clone();
    let split = Splitting::new(grid.clone(), params, dt);
    let mut psi = unpack(&state.pair);
    split.kinetic(&mut psi, &split.half_kinetic);
    split.interior(&mut psi);
    split.kinetic(&mut psi, &split.half_kinetic);
    let time = state.time + dt;
    if !all_finite(&psi) {
        return Err(Error::Diverged {
            time,
            last_good: Box::new(state.clone()),
        });
    }
    Ok(EvolutionState {
        time,
        pair: pack(&grid, psi),
        steps: state.steps + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Record observables every this many steps; the final step is always recorded.
    pub record_every: usize,
    /// Keep a copy of the state every this many records.
    pub snapshot_every: Option<usize>,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64, record_every: usize) -> Self {
        EvolveOptions {
            t_final,
            dt,
            record_every,
            snapshot_every: None,
        }
    }

    /// Number of steps; `dt` is shrunk so that the steps land exactly on `t_final`.
    pub fn steps(&self) -> Result<(u64, f64)> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::param(
                "t_final",
                format!("must be > 0, got {}", self.t_final),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be positive"));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::param("snapshot_every", "must be positive"));
        }
        let n = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as u64;
        Ok((n, self.t_final / n as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub time: f64,
    pub masses: [f64; 2],
    pub mass_total: f64,
    pub energy: f64,
    /// Values of the caller-supplied functional, if any.
    pub extra: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub observations: Vec<Observation>,
    pub snapshots: Vec<EvolutionState>,
    pub final_state: EvolutionState,
}

fn observe(
    state: &EvolutionState,
    params: &ModelParams,
    extra: &mut dyn FnMut(&EvolutionState) -> Result<f64>,
) -> Result<Observation> {
    let masses = state.pair.masses();
    Ok(Observation {
        time: state.time,
        masses,
        mass_total: masses[0] + masses[1],
        energy: energy_hat(&state.pair, params)?.total,
        extra: Some(extra(state)?),
    })
}

/// Integrates to `opts.t_final`, recording mass and energy.
pub fn evolve(
    state: EvolutionState,
    params: &ModelParams,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let mut t = evolve_observed(state, params, opts, &mut |_| Ok(0.0))?;
    t.observations.iter_mut().for_each(|o| o.extra = None);
    Ok(t)
}

/// As [`evolve`], additionally recording `extra(state)` at each record.
pub fn evolve_observed(
    state: EvolutionState,
    params: &ModelParams,
    opts: &EvolveOptions,
    extra: &mut dyn FnMut(&EvolutionState) -> Result<f64>,
) -> Result<Trajectory> {
    let (n, dt) = opts.steps()?;
    check_step(params, &state.pair, dt)?;
    let grid = state.pair.grid().clone();
    let split = Splitting::new(grid.clone(), params, dt);
    let t0 = state.time;
    let s0 = state.steps;

    let mut observations = vec![observe(&state, params, extra)?];
    let mut snapshots = Vec::new();
    let mut records = 0usize;
    if opts.snapshot_every.is_some() {
        snapshots.push(state.clone());
    }
    let mut last_good = state;
    let mut psi = unpack(&last_good.pair);
    let mut pending_half = true;
    for k in 1..=n {
        let multiplier = if pending_half {
            &split.half_kinetic
        } else {
            &split.full_kinetic
        };
        split.kinetic(&mut psi, multiplier);
        split.interior(&mut psi);
        let record = k % opts.record_every as u64 == 0 || k == n;
        if record {
            split.kinetic(&mut psi, &split.half_kinetic);
            pending_half = true;
        } else {
            pending_half = false;
        }
        let time = t0 + k as f64 * dt;
        if !all_finite(&psi) {
            return Err(Error::Diverged {
                time,
                last_good: Box::new(last_good),
            });
        }
        if record {
            last_good = EvolutionState {
                time,
                pair: pack(&grid, psi.clone()),
                steps: s0 + k,
            };
            observations.push(observe(&last_good, params, extra)?);
            records += 1;
            if let Some(every) = opts.snapshot_every {
                if records.is_multiple_of(every) {
                    snapshots.push(last_good.clone());
                }
            }
        }
    }
    Ok(Trajectory {
        dt,
        observations,
        snapshots,
        final_state: last_good,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationDrifts {
    pub mass: f64,
    pub energy: f64,
}

/// Largest deviations of the total mass and the energy from their initial values.
pub fn conserved_check(trajectory: &Trajectory) -> Result<ConservationDrifts> {
    drifts(&trajectory.observations)
}

pub fn drifts(observations: &[Observation]) -> Result<ConservationDrifts> {
    let first = observations
        .first()
        .ok_or_else(|| Error::param("trajectory", "empty"))?;
    let mut out = ConservationDrifts {
        mass: 0.0,
        energy: 0.0,
    };
    for o in observations {
        out.mass = out.mass.max((o.mass_total - first.mass_total).abs());
        out.energy = out.energy.max((o.energy - first.energy).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{oscillator_ground_state, Field, RealField};
    use crate::model::Beta;

    fn params(gamma: f64, delta: f64, lambda: f64, beta: Beta) -> ModelParams {
        ModelParams::new(gamma, delta, lambda, beta, 2).unwrap()
    }

    fn constant_pair(g: &Arc<Grid>) -> ComplexPair {
        FieldPair::new(
            RealField::constant(g, 1.0).to_complex(),
            ComplexField::zeros(g),
        )
        .unwrap()
    }

    #[test]
    fn full_rabi_transfer() {
        let g = Grid::new(2, 4.0, 16).unwrap();
        let lambda = 0.5;
        let p = params(1e-12, 0.0, lambda, Beta::zero());
        let t = std::f64::consts::PI / (2.0 * lambda);
        let state = EvolutionState::new(constant_pair(&g)).unwrap();
        let out = evolve(state, &p, &EvolveOptions::new(t, t / 100.0, 100)).unwrap();
        for (u, v) in out
            .final_state
            .pair
            .first()
            .values()
            .iter()
            .zip(out.final_state.pair.second().values())
        {
            assert!(u.norm() < 1e-10);
            assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn oscillator_eigenstate_is_stationary() {
        let g = Grid::new(2, 8.0, 64).unwrap();
        let p = params(1.0, 0.0, 0.0, Beta::zero());
        let w = oscillator_ground_state(&g, 1.0, 1.0);
        let pair = FieldPair::new(w.to_complex(), ComplexField::zeros(&g)).unwrap();
        let state = EvolutionState::new(pair).unwrap();
        let t = 2.0;
        let out = evolve(state, &p, &EvolveOptions::new(t, 1e-4, 5000)).unwrap();
        let phase = Complex64::from_polar(1.0, -t);
        let mut worst = 0.0f64;
        let mut worst_mod = 0.0f64;
        for (z, w0) in out.final_state.pair.first().values().iter().zip(w.values()) {
            worst = worst.max((z - phase * w0).norm());
            worst_mod = worst_mod.max((z.norm() - w0).abs());
        }
        assert!(worst_mod < 1e-8, "{worst_mod}");
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(2, 4.0, 16).unwrap();
        let p = params(1.0, 0.3, 0.5, Beta::uniform(1.0));
        let pair = FieldPair::new(ComplexField::zeros(&g), ComplexField::zeros(&g)).unwrap();
        let out = evolve(
            EvolutionState::new(pair).unwrap(),
            &p,
            &EvolveOptions::new(1.0, 0.1, 1),
        )
        .unwrap();
        assert_eq!(out.final_state.pair.first().max_abs(), 0.0);
        assert_eq!(out.final_state.pair.second().max_abs(), 0.0);
        assert!(out.observations.iter().all(|o| o.mass_total == 0.0));
    }

    #[test]
    fn fused_evolution_matches_single_steps() {
        let g = Grid::new(2, 6.0, 32).unwrap();
        let p = params(1.0, 0.2, -0.4, Beta::new(1.0, 0.3, 0.8));
        let a = RealField::from_fn(&g, |x| (-(x[0] - 0.5).powi(2) - x[1].powi(2)).exp());
        let b = RealField::from_fn(&g, |x| 0.5 * (-(x[0]).powi(2) - (x[1] + 0.3).powi(2)).exp());
        let pair = FieldPair::new(a.to_complex(), b.to_complex()).unwrap();
        let mut s = EvolutionState::new(pair.clone()).unwrap();
        for _ in 0..10 {
            s = strang_step(&s, &p, 0.01).unwrap();
        }
        let out = evolve(
            EvolutionState::new(pair).unwrap(),
            &p,
            &EvolveOptions::new(0.1, 0.01, 3),
        )
        .unwrap();
        assert_eq!(out.final_state.steps, 10);
        assert_eq!(out.observations.len(), 5);
        for i in 0..2 {
            for (x, y) in s
                .pair
                .component(i)
                .values()
                .iter()
                .zip(out.final_state.pair.component(i).values())
            {
                assert!((x - y).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn time_reversal() {
        let g = Grid::new(2, 6.0, 32).unwrap();
        let p = params(1.0, 0.2, -0.4, Beta::new(1.0, 0.3, 0.8));
        let a = RealField::from_fn(&g, |x| (-(x[0] - 0.5).powi(2) - x[1].powi(2)).exp());
        let pair = FieldPair::new(a.to_complex(), a.to_complex().rotated(1.0)).unwrap();
        let s0 = EvolutionState::new(pair.clone()).unwrap();
        let s1 = strang_step(&s0, &p, 0.05).unwrap();
        let conj = FieldPair::new(s1.pair.first().conj(), s1.pair.second().conj()).unwrap();
        let s2 = strang_step(&EvolutionState::new(conj).unwrap(), &p, 0.05).unwrap();
        for i in 0..2 {
            for (x, y) in s2
                .pair
                .component(i)
                .values()
                .iter()
                .zip(pair.component(i).values())
            {
                assert!((x.conj() - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn per_step_mass_conservation_and_single_record_drifts() {
        let g = Grid::new(2, 6.0, 32).unwrap();
        let p = params(1.0, 0.2, 0.7, Beta::new(2.0, -0.5, 1.0));
        let a = RealField::from_fn(&g, |x| (-(x[0] - 0.5).powi(2) - x[1].powi(2)).exp());
        let pair = FieldPair::new(a.to_complex(), ComplexField::zeros(&g)).unwrap();
        let out = evolve(
            EvolutionState::new(pair.clone()).unwrap(),
            &p,
            &EvolveOptions::new(2.0, 0.01, 1),
        )
        .unwrap();
        for w in out.observations.windows(2) {
            assert!((w[1].mass_total - w[0].mass_total).abs() < 1e-12);
        }
        let m1: Vec<f64> = out.observations.iter().map(|o| o.masses[0]).collect();
        let spread = m1.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - m1.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.1);

        let single = Trajectory {
            dt: 0.01,
            observations: out.observations[..1].to_vec(),
            snapshots: vec![],
            final_state: EvolutionState::new(pair).unwrap(),
        };
        let d = conserved_check(&single).unwrap();
        assert!(d.mass < 1e-13 && d.energy < 1e-13);
    }

    #[test]
    fn divergence_reports_last_good_state() {
        let g = Grid::new(2, 4.0, 16).unwrap();
        let p = params(1.0, 0.0, 0.0, Beta::uniform(1.0));
        let mut v = vec![Complex64::new(1.0, 0.0); g.len()];
        v[3] = Complex64::new(1e200, 0.0);
        let pair = FieldPair::new(ComplexField::from_raw(&g, v), ComplexField::zeros(&g)).unwrap();
        match strang_step(&EvolutionState::new(pair).unwrap(), &p, 0.1) {
            Err(Error::Diverged { last_good, time }) => {
                assert_eq!(last_good.steps, 0);
                assert!((time - 0.1).abs() < 1e-15);
            }
            other => panic!("expected divergence, got {:?}", other.map(|s| s.time)),
        }
    }

    #[test]
    fn snapshots_follow_the_record_cadence() {
        let g = Grid::new(2, 4.0, 16).unwrap();
        let p = params(1.0, 0.0, 0.0, Beta::zero());
        let pair = constant_pair(&g);
        let mut opts = EvolveOptions::new(1.0, 0.1, 2);
        opts.snapshot_every = Some(2);
        let out = evolve(EvolutionState::new(pair).unwrap(), &p, &opts).unwrap();
        let times: Vec<f64> = out.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 3);
        assert!((times[2] - 0.8).abs() < 1e-12);
    }
}
