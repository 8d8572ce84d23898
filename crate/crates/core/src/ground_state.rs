//! Constrained minimizers by normalized gradient flow.
//!
//! One flow step, per component with positive mass `c_j^2`:
//!
//! ```text
//! mu_j   = <(-Delta/2) u_j + G_j(u), u_j> / c_j^2
//! u*_j   = (I - tau Delta/2)^{-1} ((1 + tau mu_j) u_j - tau G_j(u))
//! u_j'   = c_j u*_j / |u*_j|_2
//! ```
//!
//! where `G_j` holds everything but the Laplacian (trap, detuning,
//! quartic terms and the coupling to the other component). The `tau mu_j`
//! shift makes every fixed point an exact solution of the Euler–Lagrange
//! system. In the real problem the iterate is replaced by its modulus after
//! each step and the coupling is `-|lambda|`; in the complex problem the
//! coupling is `lambda` and no modulus is taken. A step that raises the
//! energy by more than `1e-12` is retried with half the time step.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    chemical_potentials_for, coupling_coefficient, el_residual, energy, EnergyBreakdown, EnergyKind,
};
use crate::grid::{
    oscillator_ground_state, sigma_inner, sigma_norm_sq, ComplexField, ComplexPair, Field,
    FieldPair, Grid, RealField, RealPair,
};
use crate::model::{
    check_admissibility, ensure_well_posed, Condition, MassConstraint, ModelParams,
    SHARP_GN_CONSTANT,
};
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Gaussian,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tau: f64,
    pub max_iter: usize,
    /// Sup-norm increment per unit time step at which the flow stops.
    pub tol: f64,
    pub residual_tol: f64,
    pub seed: u64,
    pub init: InitialGuess,
    /// Gagliardo–Nirenberg constant used in the admissibility gate.
    pub cb: f64,
}

impl SolverOptions {
    pub fn for_gamma(gamma: f64) -> Self {
        SolverOptions {
            tau: 0.01 / gamma,
            max_iter: 200_000,
            tol: 1e-10,
            residual_tol: 1e-6,
            seed: 0,
            init: InitialGuess::Gaussian,
            cb: SHARP_GN_CONSTANT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.tau),
            ("tol", self.tol),
            ("residual_tol", self.residual_tol),
            ("cb", self.cb),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult<F> {
    pub pair: FieldPair<F>,
    /// Estimate of the infimum (the final energy).
    pub energy: f64,
    pub breakdown: EnergyBreakdown,
    pub mu: [Option<f64>; 2],
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted step, starting with the initial guess.
    pub energy_trace: Vec<f64>,
}

impl GroundStateResult<RealField> {
    pub fn sigma_norm(&self) -> f64 {
        self.pair.sigma_norm_sq().map(f64::sqrt).unwrap_or(f64::NAN)
    }
}

struct Flow<'a> {
    grid: Arc<Grid>,
    params: &'a ModelParams,
    masses: [f64; 2],
    kind: EnergyKind,
    real: bool,
    psi: [Vec<Complex64>; 2],
    spec: [Vec<Complex64>; 2],
    energy: f64,
}

struct Trial {
    psi: [Vec<Complex64>; 2],
    spec: [Vec<Complex64>; 2],
    energy: f64,
    increment: f64,
}

impl<'a> Flow<'a> {
    fn new(
        grid: Arc<Grid>,
        params: &'a ModelParams,
        masses: &MassConstraint,
        kind: EnergyKind,
        real: bool,
        init: [Vec<Complex64>; 2],
    ) -> Result<Self> {
        let masses = [masses.mass(0), masses.mass(1)];
        let mut psi = init;
        for j in 0..2 {
            if real {
                for v in psi[j].iter_mut() {
                    *v = Complex64::new(v.norm(), 0.0);
                }
            }
            normalize(&grid, &mut psi[j], masses[j]).map_err(|_| {
                Error::param(
                    "initial guess",
                    format!("component {} has zero mass", j + 1),
                )
            })?;
        }
        let spec = [spectrum(&grid, &psi[0]), spectrum(&grid, &psi[1])];
        let mut flow = Flow {
            grid,
            params,
            masses,
            kind,
            real,
            psi,
            spec,
            energy: 0.0,
        };
        flow.energy = flow.energy_of(&flow.psi, &flow.spec);
        Ok(flow)
    }

    fn energy_of(&self, psi: &[Vec<Complex64>; 2], spec: &[Vec<Complex64>; 2]) -> f64 {
        let g = &self.grid;
        let p = self.params;
        let half_g2 = 0.5 * p.gamma * p.gamma;
        let rho: [Vec<f64>; 2] = [
            psi[0].iter().map(|v| v.norm_sqr()).collect(),
            psi[1].iter().map(|v| v.norm_sqr()).collect(),
        ];
        let mut e = 0.0;
        for j in 0..2 {
            let (bjj, _) = p.beta.row(j);
            e += 0.5 * g.spectral_weighted_norm(&spec[j], g.wavenumber_sq());
            e += g.sum(
                rho[j]
                    .iter()
                    .zip(g.radius_sq())
                    .map(|(r, x2)| r * (half_g2 * x2 + p.detuning(j) + 0.5 * bjj * r)),
            );
        }
        e += p.beta.b12 * g.sum(rho[0].iter().zip(&rho[1]).map(|(a, b)| a * b));
        e += match self.kind {
            EnergyKind::E0 => 0.0,
            EnergyKind::Hat => {
                2.0 * p.lambda * g.sum(psi[0].iter().zip(&psi[1]).map(|(a, b)| (a * b.conj()).re))
            }
            EnergyKind::Tilde => {
                -2.0 * p.lambda.abs()
                    * g.sum(psi[0].iter().zip(&psi[1]).map(|(a, b)| a.norm() * b.norm()))
            }
        };
        e
    }

    fn trial(&self, tau: f64) -> Trial {
        let g = &self.grid;
        let p = self.params;
        let half_g2 = 0.5 * p.gamma * p.gamma;
        let kappa = coupling_coefficient(self.kind, p);
        let rho: [Vec<f64>; 2] = [
            self.psi[0].iter().map(|v| v.norm_sqr()).collect(),
            self.psi[1].iter().map(|v| v.norm_sqr()).collect(),
        ];
        let mut new_psi = [Vec::new(), Vec::new()];
        let mut new_spec = [Vec::new(), Vec::new()];
        let mut increment = 0.0f64;
        for j in 0..2 {
            let i = 1 - j;
            if self.masses[j] == 0.0 {
                new_psi[j] = vec![Complex64::new(0.0, 0.0); g.len()];
                new_spec[j] = new_psi[j].clone();
                continue;
            }
            let (bjj, bji) = p.beta.row(j);
            let detune = p.detuning(j);
            let (uj, ui) = (&self.psi[j], &self.psi[i]);
            let nonlocal: Vec<Complex64> = (0..g.len())
                .map(|c| {
                    let v = half_g2 * g.radius_sq()[c] + detune + bjj * rho[j][c] + bji * rho[i][c];
                    v * uj[c] + kappa * ui[c]
                })
                .collect();
            let kinetic = 0.5 * g.spectral_weighted_norm(&self.spec[j], g.wavenumber_sq());
            let potential = g.sum(nonlocal.iter().zip(uj).map(|(a, b)| (a * b.conj()).re));
            let mu = (kinetic + potential) / self.masses[j];
            let mut next: Vec<Complex64> = uj
                .iter()
                .zip(&nonlocal)
                .map(|(u, n)| (1.0 + tau * mu) * u - tau * n)
                .collect();
            g.fft_forward(&mut next);
            for (c, k2) in next.iter_mut().zip(g.wavenumber_sq()) {
                *c /= 1.0 + 0.5 * tau * k2;
            }
            g.fft_inverse(&mut next);
            if self.real {
                for v in next.iter_mut() {
                    *v = Complex64::new(v.norm(), 0.0);
                }
            }
            // A zero iterate cannot be renormalized; keep the old one.
            if normalize(g, &mut next, self.masses[j]).is_err() {
                next = uj.clone();
            }
            increment = increment.max(
                next.iter()
                    .zip(uj)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).norm())),
            );
            new_spec[j] = spectrum(g, &next);
            new_psi[j] = next;
        }
        let energy = self.energy_of(&new_psi, &new_spec);
        Trial {
            psi: new_psi,
            spec: new_spec,
            energy,
            increment,
        }
    }
}

fn spectrum(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let mut s = values.to_vec();
    grid.fft_forward(&mut s);
    s
}

fn normalize(grid: &Grid, values: &mut [Complex64], mass: f64) -> std::result::Result<(), ()> {
    if mass == 0.0 {
        values
            .iter_mut()
            .for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok(());
    }
    let current = grid.sum(values.iter().map(|v| v.norm_sqr()));
    if !(current > 0.0 && current.is_finite()) {
        return Err(());
    }
    let scale = (mass / current).sqrt();
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(())
}

struct FlowOutcome {
    psi: [Vec<Complex64>; 2],
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

const ENERGY_SLACK: f64 = 1e-12;

fn run_flow(mut flow: Flow<'_>, opts: &SolverOptions) -> FlowOutcome {
    let mut tau = opts.tau;
    let mut trace = vec![flow.energy];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let trial = flow.trial(tau);
        if !trial.energy.is_finite() || trial.energy > flow.energy + ENERGY_SLACK {
            tau *= 0.5;
            if tau < 1e-6 * opts.tau {
                break;
            }
            continue;
        }
        iterations += 1;
        let rate = trial.increment / tau;
        flow.psi = trial.psi;
        flow.spec = trial.spec;
        flow.energy = trial.energy;
        trace.push(flow.energy);
        if rate < opts.tol {
            converged = true;
            break;
        }
        tau = (tau * 2.0).min(opts.tau);
    }
    FlowOutcome {
        psi: flow.psi,
        iterations,
        converged,
        trace,
    }
}

fn check_grid(params: &ModelParams, grid: &Grid) -> Result<()> {
    if grid.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            condition: "grid dimension".into(),
            expected: params.dim.to_string(),
            actual: grid.dim(),
        });
    }
    Ok(())
}

fn real_guess(
    grid: &Arc<Grid>,
    params: &ModelParams,
    masses: &MassConstraint,
    opts: &SolverOptions,
) -> RealPair {
    let mut rng = sampling::rng(opts.seed);
    let mut make = |j: usize| match opts.init {
        InitialGuess::Gaussian => oscillator_ground_state(grid, params.gamma, masses.mass(j)),
        InitialGuess::Random => sampling::random_positive_field(grid, &mut rng),
    };
    let a = make(0);
    let b = make(1);
    FieldPair::new(a, b).expect("same grid")
}

fn complex_guess(
    grid: &Arc<Grid>,
    params: &ModelParams,
    masses: &MassConstraint,
    opts: &SolverOptions,
) -> ComplexPair {
    match opts.init {
        InitialGuess::Gaussian => real_guess(grid, params, masses, opts).to_complex(),
        InitialGuess::Random => {
            let mut rng = sampling::rng(opts.seed);
            let a = sampling::random_phased_field(grid, &mut rng);
            let b = sampling::random_phased_field(grid, &mut rng);
            FieldPair::new(a, b).expect("same grid")
        }
    }
}

/// Minimizes the modulus energy over real pairs with the prescribed masses.
pub fn minimize_real(
    params: &ModelParams,
    masses: &MassConstraint,
    grid: &Arc<Grid>,
    opts: &SolverOptions,
) -> Result<GroundStateResult<RealField>> {
    let guess = real_guess(grid, params, masses, opts);
    minimize_real_from(params, masses, &guess, opts)
}

pub fn minimize_real_from(
    params: &ModelParams,
    masses: &MassConstraint,
    guess: &RealPair,
    opts: &SolverOptions,
) -> Result<GroundStateResult<RealField>> {
    opts.validate()?;
    ensure_well_posed(params, masses, opts.cb)?;
    let grid = guess.grid().clone();
    check_grid(params, &grid)?;
    let init = [
        guess.first().to_complex().into_values(),
        guess.second().to_complex().into_values(),
    ];
    let flow = Flow::new(grid.clone(), params, masses, EnergyKind::Tilde, true, init)?;
    let out = run_flow(flow, opts);
    let pair = FieldPair::new(
        RealField::from_raw(&grid, out.psi[0].iter().map(|v| v.re).collect()),
        RealField::from_raw(&grid, out.psi[1].iter().map(|v| v.re).collect()),
    )?;
    finish(pair, EnergyKind::Tilde, params, masses, out)
}

/// Minimizes the full energy over complex pairs with the prescribed masses.
pub fn minimize_complex(
    params: &ModelParams,
    masses: &MassConstraint,
    grid: &Arc<Grid>,
    opts: &SolverOptions,
) -> Result<GroundStateResult<ComplexField>> {
    let guess = complex_guess(grid, params, masses, opts);
    minimize_complex_from(params, masses, &guess, opts)
}

pub fn minimize_complex_from(
    params: &ModelParams,
    masses: &MassConstraint,
    guess: &ComplexPair,
    opts: &SolverOptions,
) -> Result<GroundStateResult<ComplexField>> {
    opts.validate()?;
    ensure_well_posed(params, masses, opts.cb)?;
    let grid = guess.grid().clone();
    check_grid(params, &grid)?;
    let init = [
        guess.first().values().to_vec(),
        guess.second().values().to_vec(),
    ];
    let flow = Flow::new(grid.clone(), params, masses, EnergyKind::Hat, false, init)?;
    let out = run_flow(flow, opts);
    let [a, b] = out.psi.clone();
    let pair = FieldPair::new(
        ComplexField::from_raw(&grid, a),
        ComplexField::from_raw(&grid, b),
    )?;
    finish(pair, EnergyKind::Hat, params, masses, out)
}

fn finish<F: Field>(
    pair: FieldPair<F>,
    kind: EnergyKind,
    params: &ModelParams,
    masses: &MassConstraint,
    out: FlowOutcome,
) -> Result<GroundStateResult<F>> {
    let breakdown = energy(kind, &pair, params)?;
    let mu = chemical_potentials_for(kind, &pair, params, masses)?;
    let el_residual = el_residual(kind, &pair, params, mu)?;
    Ok(GroundStateResult {
        energy: breakdown.total,
        breakdown,
        mu,
        el_residual,
        iterations: out.iterations,
        converged: out.converged,
        energy_trace: out.trace,
        pair,
    })
}

/// Phase factorization of a complex pair through a real pair.
#[derive(Debug, Clone)]
pub struct OrbitFactorization {
    /// Phases in `[0, 2 pi)`; `None` for massless components.
    pub theta: [Option<f64>; 2],
    pub modulus_pair: RealPair,
    /// Sigma-norm of `z - (e^{i theta1} w1, e^{i theta2} w2)`.
    pub factor_residual: f64,
    pub max_phase_deviation: [Option<f64>; 2],
}

pub const PHASE_CELL_THRESHOLD: f64 = 1e-8;

pub fn orbit_factorize(z: &ComplexPair, w: &RealPair) -> Result<OrbitFactorization> {
    orbit_factorize_with_threshold(z, w, PHASE_CELL_THRESHOLD)
}

/// As [`orbit_factorize`], measuring phase deviations over cells with
/// `|z_i| > threshold * max |z_i|`.
pub fn orbit_factorize_with_threshold(
    z: &ComplexPair,
    w: &RealPair,
    threshold: f64,
) -> Result<OrbitFactorization> {
    if !z.grid().same_as(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let (mz, mw) = (z.masses(), w.masses());
    for i in 0..2 {
        if (mz[i] - mw[i]).abs() > 1e-6 * mw[i].max(1.0) {
            return Err(Error::MassViolation {
                component: i + 1,
                actual: mz[i],
                expected: mw[i],
            });
        }
    }
    let mut theta = [None, None];
    let mut deviation = [None, None];
    let mut residual_sq = 0.0;
    for i in 0..2 {
        let (zi, wi) = (z.component(i), w.component(i));
        if mw[i] == 0.0 && mz[i] == 0.0 {
            continue;
        }
        let ip = sigma_inner(zi, wi)?;
        let scale = (sigma_norm_sq(zi)? * sigma_norm_sq(wi)?).sqrt();
        if ip.norm() <= 1e-14 * scale {
            return Err(Error::PhaseUndefined(i + 1));
        }
        let th = ip.arg().rem_euclid(std::f64::consts::TAU);
        let aligned = wi.to_complex().rotated(th);
        let diff = ComplexField::from_raw(
            zi.grid(),
            zi.values()
                .iter()
                .zip(aligned.values())
                .map(|(a, b)| a - b)
                .collect(),
        );
        residual_sq += sigma_norm_sq(&diff)?;
        let cutoff = threshold * zi.max_abs();
        let back = Complex64::from_polar(1.0, -th);
        let dev = zi
            .values()
            .iter()
            .filter(|v| v.norm() > cutoff)
            .map(|v| (v * back).arg().abs())
            .fold(0.0f64, f64::max);
        theta[i] = Some(th);
        deviation[i] = Some(dev);
    }
    Ok(OrbitFactorization {
        theta,
        modulus_pair: z.modulus(),
        factor_residual: residual_sq.sqrt(),
        max_phase_deviation: deviation,
    })
}

/// Sigma-distance between two real pairs.
pub fn pair_distance(a: &RealPair, b: &RealPair) -> Result<f64> {
    let d = FieldPair::new(
        RealField::from_raw(
            a.grid(),
            a.first()
                .values()
                .iter()
                .zip(b.first().values())
                .map(|(x, y)| x - y)
                .collect(),
        ),
        RealField::from_raw(
            a.grid(),
            a.second()
                .values()
                .iter()
                .zip(b.second().values())
                .map(|(x, y)| x - y)
                .collect(),
        ),
    )?;
    Ok(d.sigma_norm_sq()?.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub max_distance: f64,
    /// Sigma-norm of the first converged minimizer.
    pub reference_norm: f64,
    pub converged_seeds: Vec<u64>,
    pub excluded_seeds: Vec<u64>,
    pub energies: BTreeMap<u64, f64>,
    /// Whether (A2) holds; otherwise the probe is exploratory.
    pub uniqueness_guaranteed: bool,
}

/// Runs the real solver from `seeds` random positive starts (seeds
/// `base_seed .. base_seed + n_seeds`) and measures how far apart the
/// converged minimizers are.
pub fn uniqueness_probe(
    params: &ModelParams,
    masses: &MassConstraint,
    grid: &Arc<Grid>,
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    if n_seeds == 0 {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let a2 = check_admissibility(params, masses, opts.cb, Condition::A2)?;
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| opts.seed + k).collect();
    let runs: Vec<(u64, Result<GroundStateResult<RealField>>)> = seeds
        .par_iter()
        .map(|&seed| {
            let o = SolverOptions {
                seed,
                init: InitialGuess::Random,
                ..*opts
            };
            (seed, minimize_real(params, masses, grid, &o))
        })
        .collect();
    let mut converged = Vec::new();
    let mut excluded = Vec::new();
    let mut energies = BTreeMap::new();
    for (seed, run) in runs {
        let run = run?;
        if run.converged {
            energies.insert(seed, run.energy);
            converged.push((seed, run));
        } else {
            excluded.push(seed);
        }
    }
    let mut max_distance = 0.0f64;
    for a in 0..converged.len() {
        for b in a + 1..converged.len() {
            max_distance =
                max_distance.max(pair_distance(&converged[a].1.pair, &converged[b].1.pair)?);
        }
    }
    let reference_norm = converged
        .first()
        .map(|(_, r)| r.sigma_norm())
        .unwrap_or(f64::NAN);
    Ok(UniquenessReport {
        max_distance,
        reference_norm,
        converged_seeds: converged.iter().map(|(s, _)| *s).collect(),
        excluded_seeds: excluded,
        energies,
        uniqueness_guaranteed: a2.admissible,
    })
}

#[derive(Debug, Clone)]
pub struct EquivalenceOutcome {
    pub i_tilde: f64,
    pub i_hat: f64,
    pub difference: f64,
    pub passed: bool,
    pub real: GroundStateResult<RealField>,
    pub complex: GroundStateResult<ComplexField>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceSummary {
    pub i_tilde: f64,
    pub i_hat: f64,
    pub difference: f64,
    pub passed: bool,
}

impl EquivalenceOutcome {
    pub fn summary(&self) -> EquivalenceSummary {
        EquivalenceSummary {
            i_tilde: self.i_tilde,
            i_hat: self.i_hat,
            difference: self.difference,
            passed: self.passed,
        }
    }
}

pub const EQUIVALENCE_TOL: f64 = 1e-6;

/// Solves the real and complex problems and compares their infima.
pub fn equivalence_check(
    params: &ModelParams,
    masses: &MassConstraint,
    grid: &Arc<Grid>,
    opts: &SolverOptions,
) -> Result<EquivalenceOutcome> {
    let (real, complex) = rayon::join(
        || minimize_real(params, masses, grid, opts),
        || minimize_complex(params, masses, grid, opts),
    );
    let (real, complex) = (real?, complex?);
    for run in [
        (real.converged, real.iterations, real.energy),
        (complex.converged, complex.iterations, complex.energy),
    ] {
        if !run.0 {
            return Err(Error::NotConverged {
                iterations: run.1,
                best: run.2,
            });
        }
    }
    let difference = (real.energy - complex.energy).abs();
    Ok(EquivalenceOutcome {
        i_tilde: real.energy,
        i_hat: complex.energy,
        difference,
        passed: difference <= EQUIVALENCE_TOL * (1.0 + real.energy.abs()),
        real,
        complex,
    })
}

/// Radial-symmetry diagnostics of a field about the origin, using lattice
/// shells of equal `|n|^2` inside `0.9 L`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymmetryReport {
    pub min_value: f64,
    /// Largest within-shell variance divided by `max|w|^2`.
    pub angular_variance: f64,
    /// Largest within-shell spread divided by `max|w|`.
    pub angular_spread: f64,
    /// Largest increase of the shell mean from one shell to the next, over `max|w|`.
    pub radial_increase: f64,
}

pub fn symmetry_report(w: &RealField) -> SymmetryReport {
    let grid = w.grid();
    let m = grid.points() as i64;
    let half = m / 2;
    let limit = (0.9 * half as f64).powi(2) as i64;
    let mut shells: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (idx, &v) in w.values().iter().enumerate() {
        let mi = grid.multi_index(idx);
        let n2: i64 = (0..grid.dim()).map(|a| (mi[a] as i64 - half).pow(2)).sum();
        if n2 <= limit {
            shells.entry(n2).or_default().push(v);
        }
    }
    let scale = w.max_abs().max(f64::MIN_POSITIVE);
    let mut variance = 0.0f64;
    let mut spread = 0.0f64;
    let mut increase = 0.0f64;
    let mut prev_mean: Option<f64> = None;
    for values in shells.values() {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        variance = variance.max(var / (scale * scale));
        spread = spread.max((hi - lo) / scale);
        if let Some(p) = prev_mean {
            increase = increase.max((mean - p) / scale);
        }
        prev_mean = Some(mean);
    }
    SymmetryReport {
        min_value: w.values().iter().cloned().fold(f64::INFINITY, f64::min),
        angular_variance: variance,
        angular_spread: spread,
        radial_increase: increase,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gaussian;
    use crate::model::Beta;

    fn grid(m: usize) -> Arc<Grid> {
        Grid::new(2, 8.0, m).unwrap()
    }

    fn oscillator() -> ModelParams {
        ModelParams::new(1.0, 0.0, 0.0, Beta::zero(), 2).unwrap()
    }

    #[test]
    fn oscillator_ground_state_is_exact() {
        let g = grid(64);
        let m = MassConstraint::new(1.0, 0.0).unwrap();
        let mut opts = SolverOptions::for_gamma(1.0);
        opts.init = InitialGuess::Random;
        let r = minimize_real(&oscillator(), &m, &g, &opts).unwrap();
        assert!(r.converged);
        assert!((r.energy - 1.0).abs() < 1e-6, "{}", r.energy);
        assert!((r.mu[0].unwrap() - 1.0).abs() < 1e-6);
        assert!(r.mu[1].is_none());
        let exact = gaussian(&g, 1.0);
        let err = r
            .pair
            .first()
            .values()
            .iter()
            .zip(exact.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "{err}");
        assert_eq!(r.pair.second().max_abs(), 0.0);
    }

    #[test]
    fn two_decoupled_oscillators() {
        let g = grid(64);
        let m = MassConstraint::new(1.0, 1.0).unwrap();
        let r = minimize_real(&oscillator(), &m, &g, &SolverOptions::for_gamma(1.0)).unwrap();
        assert!((r.energy - 2.0).abs() < 1e-6);
    }

    #[test]
    fn energy_decreases_along_the_flow() {
        let g = grid(64);
        let p = ModelParams::new(1.0, 0.1, -0.5, Beta::uniform(-1.0), 2).unwrap();
        let m = MassConstraint::new(1.0, 1.0).unwrap();
        let mut opts = SolverOptions::for_gamma(1.0);
        opts.init = InitialGuess::Random;
        opts.seed = 3;
        let r = minimize_real(&p, &m, &g, &opts).unwrap();
        assert!(r.converged);
        for w in r.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let masses = r.pair.masses();
        assert!((masses[0] - 1.0).abs() < 1e-12 && (masses[1] - 1.0).abs() < 1e-12);
        assert!(r.el_residual < opts.residual_tol);
        // beta = 0 trial pair has energy 2 + delta - 2|lambda| = 1.1
        assert!(r.energy < 2.1 - 1.0);
    }

    #[test]
    fn inadmissible_parameters_refused() {
        let g = grid(32);
        let p = ModelParams::new(1.0, 0.0, 0.0, Beta::new(-10.0, -1.0, -1.0), 2).unwrap();
        let m = MassConstraint::new(1.0, 1.0).unwrap();
        assert!(matches!(
            minimize_real(&p, &m, &g, &SolverOptions::for_gamma(1.0)),
            Err(Error::Inadmissible(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let g = grid(32);
        let m = MassConstraint::new(1.0, 1.0).unwrap();
        let p = ModelParams::new(1.0, 0.0, -0.5, Beta::uniform(1.0), 2).unwrap();
        let mut opts = SolverOptions::for_gamma(1.0);
        opts.max_iter = 5;
        opts.init = InitialGuess::Random;
        let r = minimize_real(&p, &m, &g, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn factorization_of_exact_orbit_points() {
        let g = grid(64);
        let w = FieldPair::new(gaussian(&g, 1.0), gaussian(&g, 0.5)).unwrap();
        let z = FieldPair::new(
            w.first().to_complex().rotated(0.3),
            w.second().to_complex().rotated(5.1),
        )
        .unwrap();
        let f = orbit_factorize(&z, &w).unwrap();
        assert!((f.theta[0].unwrap() - 0.3).abs() < 1e-12);
        assert!((f.theta[1].unwrap() - 5.1).abs() < 1e-12);
        assert!(f.factor_residual < 1e-12);

        let f = orbit_factorize(&w.to_complex(), &w).unwrap();
        assert_eq!(f.theta, [Some(0.0), Some(0.0)]);
        assert!(f.factor_residual < 1e-12);
    }

    #[test]
    fn factorization_rejects_orthogonal_input() {
        let g = grid(64);
        let w = FieldPair::new(gaussian(&g, 1.0), RealField::zeros(&g)).unwrap();
        let odd = RealField::from_fn(&g, |x| x[0] * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp());
        let odd = odd.scaled(1.0 / crate::grid::l2_norm_sq(&odd).sqrt());
        let z = FieldPair::new(odd.to_complex(), ComplexField::zeros(&g)).unwrap();
        assert!(matches!(
            orbit_factorize(&z, &w),
            Err(Error::PhaseUndefined(1))
        ));
    }

    #[test]
    fn symmetry_of_a_gaussian() {
        let g = grid(64);
        let r = symmetry_report(&gaussian(&g, 1.0));
        assert!(r.min_value > 0.0);
        assert!(r.angular_variance < 1e-20);
        assert!(r.radial_increase <= 0.0);
        let shifted = RealField::from_fn(&g, |x| (-((x[0] - 1.0).powi(2) + x[1] * x[1])).exp());
        let r = symmetry_report(&shifted);
        assert!(r.angular_variance > 1e-3);
    }
}
