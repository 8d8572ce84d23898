//! Physical parameters and the well-posedness / uniqueness conditions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sharp 2D Gagliardo–Nirenberg constant `c_b = |Q|_2^2 / 2`, pinned from
/// the Townes shooting run in [`crate::gn_constant`].
pub const SHARP_GN_CONSTANT: f64 = 5.850_448_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta {
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
}

impl Beta {
    pub fn new(b11: f64, b12: f64, b22: f64) -> Self {
        Beta { b11, b12, b22 }
    }

    pub fn uniform(b: f64) -> Self {
        Beta::new(b, b, b)
    }

    pub fn zero() -> Self {
        Beta::uniform(0.0)
    }

    pub fn determinant(&self) -> f64 {
        self.b11 * self.b22 - self.b12 * self.b12
    }

    /// Intra-component coefficient of component `j` and its cross coefficient.
    pub fn row(&self, j: usize) -> (f64, f64) {
        match j {
            0 => (self.b11, self.b12),
            _ => (self.b22, self.b12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub beta: Beta,
    pub dim: usize,
}

impl ModelParams {
    pub fn new(gamma: f64, delta: f64, lambda: f64, beta: Beta, dim: usize) -> Result<Self> {
        let p = ModelParams {
            gamma,
            delta,
            lambda,
            beta,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::param(
                "gamma",
                format!("must be > 0, got {}", self.gamma),
            ));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("beta11", self.beta.b11),
            ("beta12", self.beta.b12),
            ("beta22", self.beta.b22),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::param(
                "dim",
                format!("must be 1, 2 or 3, got {}", self.dim),
            ));
        }
        Ok(())
    }

    /// Detuning seen by component `j`; only the first component is detuned.
    pub fn detuning(&self, j: usize) -> f64 {
        if j == 0 {
            self.delta
        } else {
            0.0
        }
    }
}

/// Square roots of the component masses: `int |psi_i|^2 = c_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassConstraint {
    pub c1: f64,
    pub c2: f64,
}

impl MassConstraint {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let m = MassConstraint { c1, c2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if self.c1 == 0.0 && self.c2 == 0.0 {
            return Err(Error::param("c1", "at least one mass must be positive"));
        }
        Ok(())
    }

    pub fn c(&self, i: usize) -> f64 {
        if i == 0 {
            self.c1
        } else {
            self.c2
        }
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.c(i).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A1,
    A1Relaxed,
    A1Prime,
    A1N3,
    A1PrimeN3,
    A2,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::A1,
        Condition::A1Relaxed,
        Condition::A1Prime,
        Condition::A1N3,
        Condition::A1PrimeN3,
        Condition::A2,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Condition::A1 => "A1",
            Condition::A1Relaxed => "A1_relaxed",
            Condition::A1Prime => "A1_prime",
            Condition::A1N3 => "A1_N3",
            Condition::A1PrimeN3 => "A1_prime_N3",
            Condition::A2 => "A2",
        }
    }

    fn required_dim(&self) -> Option<usize> {
        match self {
            Condition::A1 | Condition::A1Relaxed | Condition::A1Prime => Some(2),
            Condition::A1N3 | Condition::A1PrimeN3 => Some(3),
            Condition::A2 => None,
        }
    }

    fn uses_cb(&self) -> bool {
        matches!(
            self,
            Condition::A1 | Condition::A1Relaxed | Condition::A1Prime
        )
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
enum Slack {
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub name: &'static str,
    pub value: f64,
    strict: bool,
}

impl Margin {
    fn new(name: &'static str, value: f64, slack: Slack) -> Self {
        Margin {
            name,
            value,
            strict: slack == Slack::Strict,
        }
    }

    pub fn satisfied(&self) -> bool {
        if self.strict {
            self.value > 0.0
        } else {
            self.value >= 0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub condition: Condition,
    pub admissible: bool,
    pub margins: Vec<Margin>,
}

impl AdmissibilityReport {
    fn from_margins(condition: Condition, margins: Vec<Margin>) -> Self {
        let admissible = margins.iter().all(Margin::satisfied);
        AdmissibilityReport {
            condition,
            admissible,
            margins,
        }
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.value)
    }
}

pub fn check_admissibility(
    params: &ModelParams,
    masses: &MassConstraint,
    cb: f64,
    condition: Condition,
) -> Result<AdmissibilityReport> {
    if let Some(d) = condition.required_dim() {
        if params.dim != d {
            return Err(Error::DimensionMismatch {
                condition: condition.tag().to_string(),
                expected: d.to_string(),
                actual: params.dim,
            });
        }
    }
    if condition.uses_cb() && !(cb.is_finite() && cb > 0.0) {
        return Err(Error::param("cb", format!("must be > 0, got {cb}")));
    }
    let b = params.beta;
    let (c1, c2) = (masses.c1, masses.c2);
    use Slack::*;
    let margins = match condition {
        Condition::A1 => vec![
            Margin::new("neg_beta11", -b.b11, Strict),
            Margin::new("neg_beta12", -b.b12, Strict),
            Margin::new("neg_beta22", -b.b22, Strict),
            Margin::new("row1", b.b11 * c1 * c1 + b.b12 * c1 * c2 + cb, Strict),
            Margin::new("row2", b.b22 * c2 * c2 + b.b12 * c1 * c2 + cb, Strict),
        ],
        Condition::A1Relaxed => {
            let (b11, b12, b22) = (b.b11.min(0.0), b.b12.min(0.0), b.b22.min(0.0));
            vec![
                Margin::new("row1", b11 * c1 * c1 + b12 * c1 * c2 + cb, Strict),
                Margin::new("row2", b22 * c2 * c2 + b12 * c1 * c2 + cb, Strict),
            ]
        }
        Condition::A1Prime => {
            let (s11, s22) = (b.b11 + cb, b.b22 + cb);
            let bound = if s11 >= 0.0 && s22 >= 0.0 {
                b.b12 + cb + s11.sqrt() * s22.sqrt()
            } else {
                f64::NEG_INFINITY
            };
            vec![
                Margin::new("beta11_plus_cb", s11, Strict),
                Margin::new("beta22_plus_cb", s22, Strict),
                Margin::new("beta12_bound", bound, NonStrict),
                Margin::new("unit_mass", 1.0 - c1 * c1 - c2 * c2, Strict),
            ]
        }
        Condition::A1N3 => vec![
            Margin::new("beta11", b.b11, Strict),
            Margin::new("beta22", b.b22, Strict),
            Margin::new("determinant", b.determinant(), Strict),
            Margin::new("unit_mass", 1.0 - c1 * c1 - c2 * c2, Strict),
        ],
        Condition::A1PrimeN3 => vec![
            Margin::new("beta11", b.b11, Strict),
            Margin::new("beta12", b.b12, Strict),
            Margin::new("beta22", b.b22, Strict),
        ],
        Condition::A2 => {
            let clauses = [
                (b.b11 - b.b22).abs(),
                (b.b11 - b.b12).abs(),
                params.delta.abs(),
                params.lambda.abs(),
            ];
            vec![
                Margin::new("psd_beta11", b.b11, NonStrict),
                Margin::new("psd_beta22", b.b22, NonStrict),
                Margin::new("psd_determinant", b.determinant(), NonStrict),
                Margin::new(
                    "nondegeneracy",
                    clauses.iter().copied().fold(0.0, f64::max),
                    Strict,
                ),
            ]
        }
    };
    Ok(AdmissibilityReport::from_margins(condition, margins))
}

/// The conditions under which the real minimization problem is bounded below
/// for the given dimension. One-dimensional problems are always well-posed.
pub fn well_posedness_conditions(dim: usize) -> &'static [Condition] {
    match dim {
        2 => &[Condition::A1, Condition::A1Relaxed, Condition::A1Prime],
        3 => &[Condition::A1N3, Condition::A1PrimeN3],
        _ => &[],
    }
}

/// First satisfied well-posedness condition, or an `Inadmissible` error
/// listing every failed check.
pub fn ensure_well_posed(
    params: &ModelParams,
    masses: &MassConstraint,
    cb: f64,
) -> Result<Option<AdmissibilityReport>> {
    params.validate()?;
    masses.validate()?;
    let conditions = well_posedness_conditions(params.dim);
    if conditions.is_empty() {
        return Ok(None);
    }
    let mut failed = Vec::new();
    for &c in conditions {
        let report = check_admissibility(params, masses, cb, c)?;
        if report.admissible {
            return Ok(Some(report));
        }
        failed.push(c.tag());
    }
    Err(Error::Inadmissible(format!(
        "none of {} holds in dimension {}",
        failed.join(", "),
        params.dim
    )))
}

/// Lower bound `-|delta| c1^2 - 2|lambda| c1 c2` on the real energy over the
/// constraint set, valid whenever the relaxed (A1) condition holds.
pub fn energy_lower_bound(params: &ModelParams, masses: &MassConstraint, cb: f64) -> Result<f64> {
    let report = check_admissibility(params, masses, cb, Condition::A1Relaxed)?;
    if !report.admissible {
        return Err(Error::Inadmissible(
            "relaxed A1 fails; the energy bound does not apply".into(),
        ));
    }
    Ok(-params.delta.abs() * masses.c1 * masses.c1
        - 2.0 * params.lambda.abs() * masses.c1 * masses.c2)
}
