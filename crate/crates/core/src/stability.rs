//! Orbital-stability experiments and the three-dimensional scaling probe.
//!
//! Stability is measured as a bounded-amplification surrogate: perturb the
//! real ground state by a given Sigma-size, integrate, and track the
//! distance to the phase orbit `{(e^{i t1} w1, e^{i t2} w2)}`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{drifts, evolve_observed, EvolutionState, EvolveOptions};
use crate::error::{Error, Result};
use crate::functionals::energy_tilde;
use crate::grid::{
    sigma_inner, sigma_norm_sq, ComplexField, ComplexPair, Field, FieldPair, Grid, RealField,
    RealPair,
};
use crate::ground_state::{minimize_real, SolverOptions};
use crate::model::{ensure_well_posed, MassConstraint, ModelParams};
use crate::sampling;

/// Distance from `psi` to the phase orbit of `w`, with the phases chosen in
/// closed form as `arg <psi_i, w_i>_Sigma`.
pub fn orbit_distance(psi: &ComplexPair, w: &RealPair) -> Result<f64> {
    Ok(orbit_alignment(psi, w)?.0)
}

/// Orbit distance together with the minimizing phases (`None` where the
/// inner product vanishes).
pub fn orbit_alignment(psi: &ComplexPair, w: &RealPair) -> Result<(f64, [Option<f64>; 2])> {
    if !psi.grid().same_as(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    let mut phases = [None, None];
    for (i, phase) in phases.iter_mut().enumerate() {
        let (p, wi) = (psi.component(i), w.component(i));
        let ip = sigma_inner(p, wi)?;
        if ip.norm() == 0.0 {
            total += sigma_norm_sq(p)? + sigma_norm_sq(wi)?;
            continue;
        }
        let theta = ip.arg();
        let diff = ComplexField::from_raw(
            p.grid(),
            p.values()
                .iter()
                .zip(wi.values())
                .map(|(a, b)| a - Complex64::from_polar(*b, theta))
                .collect(),
        );
        total += sigma_norm_sq(&diff)?;
        *phase = Some(theta);
    }
    Ok((total.sqrt(), phases))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    RandomSmooth,
    PhaseGradient,
    MassShift,
}

impl PerturbationMode {
    pub fn tag(&self) -> &'static str {
        match self {
            PerturbationMode::RandomSmooth => "random_smooth",
            PerturbationMode::PhaseGradient => "phase_gradient",
            PerturbationMode::MassShift => "mass_shift",
        }
    }
}

/// `w + size * g / |g|_Sigma` for a direction `g` chosen by `mode`. The
/// result is not renormalized to the constraint masses.
pub fn perturb(w: &RealPair, mode: PerturbationMode, size: f64, seed: u64) -> Result<ComplexPair> {
    if !(size.is_finite() && size >= 0.0) {
        return Err(Error::param("size", format!("must be >= 0, got {size}")));
    }
    let base = w.to_complex();
    if size == 0.0 {
        return Ok(base);
    }
    let grid = w.grid();
    let mut rng = sampling::rng(seed);
    let direction = match mode {
        PerturbationMode::RandomSmooth => FieldPair::new(
            sampling::random_complex_field(grid, &mut rng),
            sampling::random_complex_field(grid, &mut rng),
        )?,
        PerturbationMode::PhaseGradient => {
            use rand::Rng;
            let mut k = [0.0; 3];
            for ki in k.iter_mut().take(grid.dim()) {
                *ki = rng.gen_range(-1.0..1.0);
            }
            let twist = |f: &RealField| {
                ComplexField::from_raw(
                    grid,
                    f.values()
                        .iter()
                        .enumerate()
                        .map(|(c, v)| {
                            let x = grid.position(c);
                            let phase: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
                            Complex64::from_polar(*v, phase) - v
                        })
                        .collect(),
                )
            };
            FieldPair::new(twist(w.first()), twist(w.second()))?
        }
        PerturbationMode::MassShift => base.clone(),
    };
    let norm = direction.sigma_norm_sq()?.sqrt();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::param("perturbation", "direction has zero norm"));
    }
    let scale = size / norm;
    let add = |a: &ComplexField, d: &ComplexField| {
        ComplexField::from_raw(
            grid,
            a.values()
                .iter()
                .zip(d.values())
                .map(|(x, y)| x + scale * y)
                .collect(),
        )
    };
    FieldPair::new(
        add(base.first(), direction.first()),
        add(base.second(), direction.second()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub sizes: Vec<f64>,
    pub mode: PerturbationMode,
    pub seed: u64,
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub mode: PerturbationMode,
    pub size: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub masses: Vec<[f64; 2]>,
    pub energies: Vec<f64>,
    pub sup_distance: f64,
    /// `sup_distance / size`; `None` for the unperturbed run.
    pub amplification: Option<f64>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// Range of each component mass over the run.
    pub component_mass_range: [[f64; 2]; 2],
    pub verdict: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityOutcome {
    pub reports: Vec<StabilityReport>,
    pub max_amplification: Option<f64>,
    /// Least-squares slope of `log sup d` against `log size` over the positive sizes.
    pub log_slope: Option<f64>,
    pub ground_energy: f64,
    pub mu: [Option<f64>; 2],
}

/// Runs one perturb-and-evolve experiment per size around a given ground state.
pub fn stability_runs(
    params: &ModelParams,
    ground: &RealPair,
    opts: &StabilityOptions,
) -> Result<Vec<StabilityReport>> {
    if !(opts.epsilon.is_finite() && opts.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    if opts.sizes.is_empty() {
        return Err(Error::param("sizes", "need at least one size"));
    }
    let evolve_opts = EvolveOptions::new(opts.t_final, opts.dt, opts.record_every);
    evolve_opts.steps()?;
    opts.sizes
        .par_iter()
        .map(|&size| {
            let psi0 = perturb(ground, opts.mode, size, opts.seed)?;
            let state = EvolutionState::new(psi0)?;
            let traj = evolve_observed(state, params, &evolve_opts, &mut |s| {
                orbit_distance(&s.pair, ground)
            })?;
            let obs = &traj.observations;
            let distances: Vec<f64> = obs.iter().map(|o| o.extra.unwrap_or(f64::NAN)).collect();
            let sup_distance = distances.iter().cloned().fold(0.0, f64::max);
            let d = drifts(obs)?;
            let mut range = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
            for o in obs {
                for (r, m) in range.iter_mut().zip(o.masses) {
                    r[0] = r[0].min(m);
                    r[1] = r[1].max(m);
                }
            }
            Ok(StabilityReport {
                mode: opts.mode,
                size,
                epsilon: opts.epsilon,
                times: obs.iter().map(|o| o.time).collect(),
                masses: obs.iter().map(|o| o.masses).collect(),
                energies: obs.iter().map(|o| o.energy).collect(),
                distances,
                sup_distance,
                amplification: (size > 0.0).then(|| sup_distance / size),
                mass_drift: d.mass,
                energy_drift: d.energy,
                component_mass_range: range,
                verdict: sup_distance <= opts.epsilon,
            })
        })
        .collect()
}

/// Checks admissibility, computes the real ground state and runs the sweep.
pub fn stability_experiment(
    params: &ModelParams,
    masses: &MassConstraint,
    grid: &Arc<Grid>,
    solver: &SolverOptions,
    opts: &StabilityOptions,
) -> Result<StabilityOutcome> {
    ensure_well_posed(params, masses, solver.cb)?;
    let ground = minimize_real(params, masses, grid, solver)?;
    if !ground.converged {
        return Err(Error::NotConverged {
            iterations: ground.iterations,
            best: ground.energy,
        });
    }
    let reports = stability_runs(params, &ground.pair, opts)?;
    let amps: Vec<f64> = reports.iter().filter_map(|r| r.amplification).collect();
    let max_amplification = amps.iter().cloned().reduce(f64::max);
    let points: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.size > 0.0 && r.sup_distance > 0.0)
        .map(|r| (r.size.ln(), r.sup_distance.ln()))
        .collect();
    Ok(StabilityOutcome {
        reports,
        max_amplification,
        log_slope: least_squares_slope(&points),
        ground_energy: ground.energy,
        mu: ground.mu,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingProbe {
    pub sigmas: Vec<f64>,
    pub energies: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub quartic: Vec<f64>,
    /// Strictly decreasing with growing decrements.
    pub decreasing_accelerating: bool,
    /// Some later value exceeds its predecessor.
    pub eventually_increasing: bool,
}

pub const PROBE_POINTS: usize = 32;
pub const PROBE_HALF_EXTENT: f64 = 6.0;

/// Modulus energy of the mass-preserving dilations `sigma^{N/2} phi(sigma x)`
/// of a Gaussian pair, each evaluated on a box of half-width
/// `PROBE_HALF_EXTENT / sigma` so the resolution is the same for every sigma.
pub fn scaling_energies(
    params: &ModelParams,
    masses: &MassConstraint,
    sigmas: &[f64],
) -> Result<ScalingProbe> {
    params.validate()?;
    masses.validate()?;
    if sigmas.is_empty() || sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::param("sigmas", "need positive scales"));
    }
    let mut energies = Vec::new();
    let mut kinetic = Vec::new();
    let mut quartic = Vec::new();
    for &sigma in sigmas {
        let grid = Grid::new(params.dim, PROBE_HALF_EXTENT / sigma, PROBE_POINTS)?;
        let n = params.dim as f64;
        let dilate = |mass: f64| {
            let amp = mass.sqrt() * (sigma * sigma / std::f64::consts::PI).powf(n / 4.0);
            RealField::from_fn(&grid, |x| {
                let r2: f64 = x.iter().map(|v| (sigma * v).powi(2)).sum();
                amp * (-0.5 * r2).exp()
            })
        };
        let pair = FieldPair::new(dilate(masses.mass(0)), dilate(masses.mass(1)))?;
        let e = energy_tilde(&pair, params)?;
        energies.push(e.total);
        kinetic.push(e.kinetic);
        quartic.push(e.self1 + e.self2 + e.cross);
    }
    let diffs: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let decreasing_accelerating =
        diffs.iter().all(|d| *d < 0.0) && diffs.windows(2).all(|w| w[1].abs() > w[0].abs());
    let eventually_increasing = diffs.iter().any(|d| *d > 0.0);
    Ok(ScalingProbe {
        sigmas: sigmas.to_vec(),
        energies,
        kinetic,
        quartic,
        decreasing_accelerating,
        eventually_increasing,
    })
}

/// [`scaling_energies`] restricted to the three-dimensional, fully attractive case.
pub fn illposedness_probe(
    params: &ModelParams,
    masses: &MassConstraint,
    sigmas: &[f64],
) -> Result<ScalingProbe> {
    if params.dim != 3 {
        return Err(Error::DimensionMismatch {
            condition: "ill-posedness probe".into(),
            expected: "3".into(),
            actual: params.dim,
        });
    }
    let b = params.beta;
    if !(b.b11 < 0.0 && b.b12 < 0.0 && b.b22 < 0.0) {
        return Err(Error::param("beta", "all entries must be negative"));
    }
    scaling_energies(params, masses, sigmas)
}
