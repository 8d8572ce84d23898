//! Energy functionals, the Euler–Lagrange operator and the inequality chain
//! that bounds the real energy from below.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{grad_norm_sq, l2_norm_sq, moment_sq, ComplexPair, Field, FieldPair, RealPair};
use crate::model::{MassConstraint, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnergyKind {
    /// Coupling-free part.
    E0,
    /// Full energy with the `2 lambda Re(psi1 conj psi2)` coupling.
    Hat,
    /// Modulus energy with the `-2|lambda| |psi1||psi2|` coupling.
    Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub trap: f64,
    pub detuning: f64,
    pub self1: f64,
    pub self2: f64,
    pub cross: f64,
    pub coupling: f64,
    pub total: f64,
    pub which: EnergyKind,
}

impl EnergyBreakdown {
    fn with_coupling(mut self, coupling: f64, which: EnergyKind) -> Self {
        self.coupling = coupling;
        self.total = self.kinetic
            + self.trap
            + self.detuning
            + self.self1
            + self.self2
            + self.cross
            + self.coupling;
        self.which = which;
        self
    }
}

fn check_dim<F: Field>(pair: &FieldPair<F>, params: &ModelParams) -> Result<()> {
    if pair.grid().dim() != params.dim {
        return Err(Error::DimensionMismatch {
            condition: "model dimension".into(),
            expected: params.dim.to_string(),
            actual: pair.grid().dim(),
        });
    }
    Ok(())
}

pub fn energy_e0<F: Field>(pair: &FieldPair<F>, params: &ModelParams) -> Result<EnergyBreakdown> {
    check_dim(pair, params)?;
    let grid = pair.grid();
    let [a, b] = pair.components();
    let (rho1, rho2) = (a.density(), b.density());
    let kinetic = 0.5 * (grad_norm_sq(a)? + grad_norm_sq(b)?);
    let trap = 0.5 * params.gamma.powi(2) * (moment_sq(a) + moment_sq(b));
    let detuning = params.delta * grid.sum(rho1.iter().copied());
    let beta = params.beta;
    let self1 = 0.5 * beta.b11 * grid.sum(rho1.iter().map(|r| r * r));
    let self2 = 0.5 * beta.b22 * grid.sum(rho2.iter().map(|r| r * r));
    let cross = beta.b12 * grid.sum(rho1.iter().zip(&rho2).map(|(p, q)| p * q));
    Ok(EnergyBreakdown {
        kinetic,
        trap,
        detuning,
        self1,
        self2,
        cross,
        coupling: 0.0,
        total: 0.0,
        which: EnergyKind::E0,
    }
    .with_coupling(0.0, EnergyKind::E0))
}

/// Coupling `2 lambda int Re(psi1 conj psi2)`.
pub fn energy_hat<F: Field>(pair: &FieldPair<F>, params: &ModelParams) -> Result<EnergyBreakdown> {
    let e0 = energy_e0(pair, params)?;
    let (a, b) = (pair.first().to_complex(), pair.second().to_complex());
    let overlap: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(p, q)| (p * q.conj()).re)
        .sum();
    let coupling = 2.0 * params.lambda * overlap * pair.grid().cell_volume();
    Ok(e0.with_coupling(coupling, EnergyKind::Hat))
}

/// Evaluated on the moduli of the components.
pub fn energy_tilde<F: Field>(
    pair: &FieldPair<F>,
    params: &ModelParams,
) -> Result<EnergyBreakdown> {
    let moduli = pair.modulus();
    let e0 = energy_e0(&moduli, params)?;
    let overlap = moduli.grid().sum(
        moduli
            .first()
            .values()
            .iter()
            .zip(moduli.second().values())
            .map(|(p, q)| p * q),
    );
    let coupling = -2.0 * params.lambda.abs() * overlap;
    Ok(e0.with_coupling(coupling, EnergyKind::Tilde))
}

pub fn energy<F: Field>(
    kind: EnergyKind,
    pair: &FieldPair<F>,
    params: &ModelParams,
) -> Result<EnergyBreakdown> {
    match kind {
        EnergyKind::E0 => energy_e0(pair, params),
        EnergyKind::Hat => energy_hat(pair, params),
        EnergyKind::Tilde => energy_tilde(pair, params),
    }
}

/// Coefficient multiplying the other component in the first variation.
pub(crate) fn coupling_coefficient(kind: EnergyKind, params: &ModelParams) -> f64 {
    match kind {
        EnergyKind::E0 => 0.0,
        EnergyKind::Hat => params.lambda,
        EnergyKind::Tilde => -params.lambda.abs(),
    }
}

/// `(L1 psi1 + lambda psi2, L2 psi2 + lambda psi1)`, half the unconstrained
/// first variation of the full energy. At a critical point it equals
/// `(mu1 psi1, mu2 psi2)`.
pub fn el_gradient<F: Field>(pair: &FieldPair<F>, params: &ModelParams) -> Result<FieldPair<F>> {
    el_gradient_for(EnergyKind::Hat, pair, params)
}

/// Same operator with the coupling coefficient of the chosen energy. For the
/// modulus energy on a nonnegative pair the coupling is `-|lambda|`.
pub fn el_gradient_for<F: Field>(
    kind: EnergyKind,
    pair: &FieldPair<F>,
    params: &ModelParams,
) -> Result<FieldPair<F>> {
    check_dim(pair, params)?;
    let grid = pair.grid().clone();
    let z = [pair.first().to_complex(), pair.second().to_complex()];
    let rho = [z[0].density(), z[1].density()];
    let kappa = coupling_coefficient(kind, params);
    let half_gamma_sq = 0.5 * params.gamma.powi(2);
    let mut out = Vec::with_capacity(2);
    for j in 0..2 {
        let i = 1 - j;
        let (bjj, bji) = params.beta.row(j);
        let detune = params.detuning(j);
        let kinetic = grid.neg_laplacian(z[j].values());
        let values: Vec<Complex64> = (0..grid.len())
            .map(|c| {
                let potential = half_gamma_sq * grid.radius_sq()[c]
                    + detune
                    + bjj * rho[j][c]
                    + bji * rho[i][c];
                0.5 * kinetic[c] + potential * z[j].values()[c] + kappa * z[i].values()[c]
            })
            .collect();
        out.push(pair.component(j).with_values(values));
    }
    let second = out.pop().unwrap();
    let first = out.pop().unwrap();
    FieldPair::new(first, second)
}

/// `mu_i = <g_i, psi_i> / c_i^2`, `None` for a massless component.
pub fn chemical_potentials<F: Field>(
    pair: &FieldPair<F>,
    params: &ModelParams,
    masses: &MassConstraint,
) -> Result<[Option<f64>; 2]> {
    chemical_potentials_for(EnergyKind::Hat, pair, params, masses)
}

pub fn chemical_potentials_for<F: Field>(
    kind: EnergyKind,
    pair: &FieldPair<F>,
    params: &ModelParams,
    masses: &MassConstraint,
) -> Result<[Option<f64>; 2]> {
    let g = el_gradient_for(kind, pair, params)?;
    let mut mu = [None, None];
    for (i, slot) in mu.iter_mut().enumerate() {
        let m = masses.mass(i);
        if m > 0.0 {
            let ip = crate::grid::l2_inner(g.component(i), pair.component(i))?;
            *slot = Some(ip.re / m);
        }
    }
    Ok(mu)
}

/// `|g - (mu1 psi1, mu2 psi2)|_2` for the pair.
pub fn el_residual<F: Field>(
    kind: EnergyKind,
    pair: &FieldPair<F>,
    params: &ModelParams,
    mu: [Option<f64>; 2],
) -> Result<f64> {
    let g = el_gradient_for(kind, pair, params)?;
    let grid = pair.grid();
    let mut total = 0.0;
    for (i, m) in mu.iter().enumerate() {
        let mu_i = m.unwrap_or(0.0);
        let gi = g.component(i).to_complex();
        let pi = pair.component(i).to_complex();
        total += grid.sum(
            gi.values()
                .iter()
                .zip(pi.values())
                .map(|(a, b)| (a - mu_i * b).norm_sqr()),
        );
    }
    Ok(total.sqrt())
}

/// Slacks of the Gagliardo–Nirenberg, Cauchy–Schwarz, Young and coupling
/// bounds; each is nonnegative whenever `cb` does not exceed the sharp constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityGaps {
    pub gn1: f64,
    pub gn2: f64,
    pub cauchy_schwarz: f64,
    pub young: f64,
    pub coupling: f64,
}

pub const MASS_TOLERANCE: f64 = 1e-8;

pub fn inequality_gaps(
    pair: &RealPair,
    params: &ModelParams,
    masses: &MassConstraint,
    cb: f64,
) -> Result<InequalityGaps> {
    if !(cb.is_finite() && cb > 0.0) {
        return Err(Error::param("cb", format!("must be > 0, got {cb}")));
    }
    for (i, actual) in pair.masses().into_iter().enumerate() {
        let expected = masses.mass(i);
        if (actual - expected).abs() > MASS_TOLERANCE * expected.max(1.0) {
            return Err(Error::MassViolation {
                component: i + 1,
                actual,
                expected,
            });
        }
    }
    let grid = pair.grid();
    let (u1, u2) = (pair.first().values(), pair.second().values());
    let (c1, c2) = (masses.c1, masses.c2);
    let grad1 = grad_norm_sq(pair.first())?;
    let grad2 = grad_norm_sq(pair.second())?;
    let quartic1 = grid.sum(u1.iter().map(|u| u.powi(4)));
    let quartic2 = grid.sum(u2.iter().map(|u| u.powi(4)));
    let mixed = grid.sum(u1.iter().zip(u2).map(|(a, b)| a * a * b * b));
    let overlap = grid.sum(u1.iter().zip(u2).map(|(a, b)| (a * b).abs()));
    let lam = params.lambda.abs();
    Ok(InequalityGaps {
        gn1: grad1 * c1 * c1 / cb - quartic1,
        gn2: grad2 * c2 * c2 / cb - quartic2,
        cauchy_schwarz: quartic1.sqrt() * quartic2.sqrt() - mixed,
        young: c1 * c2 / (2.0 * cb) * (grad1 + grad2) - mixed,
        coupling: 2.0 * lam * c1 * c2 - 2.0 * lam * overlap,
    })
}

/// Cells with modulus below this fraction of the maximum are the zero set.
pub const ZERO_SET_THRESHOLD: f64 = 1e-14;

/// `1/2 (|grad z|^2 - |grad |z||^2)` summed over both components, with
/// `grad |z| = Re(conj z grad z)/|z|` off the zero set and 0 on it.
pub fn diamagnetic_gap(pair: &ComplexPair) -> Result<f64> {
    let grid = pair.grid();
    let mut gap = 0.0;
    for z in pair.components() {
        if !z.is_finite() {
            return Err(Error::NonFinite("diamagnetic gap input"));
        }
        let grads = grid.gradient(z.values());
        let cutoff = ZERO_SET_THRESHOLD * z.max_abs();
        let local = (0..grid.len()).map(|c| {
            let v = z.values()[c];
            let modulus = v.norm();
            grads
                .iter()
                .map(|g| {
                    if modulus > cutoff && modulus > 0.0 {
                        // |grad z|^2 - (Re(conj z grad z)/|z|)^2 = (Im(conj z grad z)/|z|)^2
                        (v.conj() * g[c]).im.powi(2) / (modulus * modulus)
                    } else {
                        g[c].norm_sqr()
                    }
                })
                .sum::<f64>()
        });
        gap += 0.5 * grid.sum(local);
    }
    Ok(gap)
}

/// Masses of a pair as integrals of squared moduli.
pub fn pair_masses<F: Field>(pair: &FieldPair<F>) -> [f64; 2] {
    [l2_norm_sq(pair.first()), l2_norm_sq(pair.second())]
}
