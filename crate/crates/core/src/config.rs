//! Run configuration: a TOML file with `[section]` tables, validated into
//! domain types. Every optional value is filled in during parsing, so the
//! printed form of a parsed config is complete and parses back to itself.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::EvolveOptions;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ground_state::{InitialGuess, SolverOptions};
use crate::model::{Beta, MassConstraint, ModelParams, SHARP_GN_CONSTANT};
use crate::stability::{PerturbationMode, StabilityOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub model: ModelSection,
    pub masses: MassSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub uniqueness: UniquenessSection,
    #[serde(default)]
    pub gnconst: GnSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub beta11: f64,
    #[serde(default)]
    pub beta12: f64,
    #[serde(default)]
    pub beta22: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSection {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub half_extent: f64,
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            half_extent: 8.0,
            points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Defaults to `0.01 / gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub residual_tol: f64,
    pub init: InitialGuess,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cb: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tau: None,
            max_iter: 200_000,
            tol: 1e-10,
            residual_tol: 1e-6,
            init: InitialGuess::Gaussian,
            cb: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    GroundState,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    /// Defaults to ten trap periods, `20 pi / gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Defaults to `1e-3 / gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub record_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    pub initial: InitialState,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            t_final: None,
            dt: None,
            record_every: 100,
            snapshot_every: None,
            initial: InitialState::GroundState,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub sizes: Vec<f64>,
    pub mode: PerturbationMode,
    pub epsilon: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection {
            sizes: vec![0.0, 1e-3, 1e-2],
            mode: PerturbationMode::RandomSmooth,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniquenessSection {
    pub seeds: usize,
}

impl Default for UniquenessSection {
    fn default() -> Self {
        UniquenessSection { seeds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnSection {
    pub shooting_tol: f64,
    pub quotient_half_extent: f64,
    pub quotient_points: usize,
    pub quotient_iters: usize,
}

impl Default for GnSection {
    fn default() -> Self {
        GnSection {
            shooting_tol: 1e-10,
            quotient_half_extent: 12.0,
            quotient_points: 128,
            quotient_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub sigmas: Vec<f64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            sigmas: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "output_dir",
    "model",
    "masses",
    "grid",
    "solver",
    "dynamics",
    "stability",
    "uniqueness",
    "gnconst",
    "probe",
];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    Some(match section {
        "model" => &[
            "gamma", "delta", "lambda", "beta11", "beta12", "beta22", "dim",
        ],
        "masses" => &["c1", "c2"],
        "grid" => &["half_extent", "points"],
        "solver" => &["tau", "max_iter", "tol", "residual_tol", "init", "cb"],
        "dynamics" => &["t_final", "dt", "record_every", "snapshot_every", "initial"],
        "stability" => &["sizes", "mode", "epsilon"],
        "uniqueness" => &["seeds"],
        "gnconst" => &[
            "shooting_tol",
            "quotient_half_extent",
            "quotient_points",
            "quotient_iters",
        ],
        "probe" => &["sigmas"],
        _ => return None,
    })
}

fn suggest(key: &str, known: &[&str]) -> String {
    let best = known
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), *k))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((score, k)) if score > 0.7 => format!("unknown key; did you mean `{k}`?"),
        _ => format!("unknown key; expected one of {}", known.join(", ")),
    }
}

fn check_keys(table: &toml::Table) -> Result<()> {
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Err(Error::ConfigField {
                field: key.clone(),
                message: suggest(key, TOP_KEYS),
            });
        }
        if let (Some(known), toml::Value::Table(inner)) = (section_keys(key), value) {
            for sub in inner.keys() {
                if !known.contains(&sub.as_str()) {
                    return Err(Error::ConfigField {
                        field: format!("{key}.{sub}"),
                        message: suggest(sub, known),
                    });
                }
            }
        }
    }
    Ok(())
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, column)
}

fn parse_table(text: &str) -> Result<toml::Table> {
    toml::from_str::<toml::Table>(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        Error::ConfigSyntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_with_overrides(text, &[])
}

/// As [`parse_config`], with `section.key=value` overrides applied first.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table = parse_table(text)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    check_keys(&table)?;
    let mut config =
        RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| Error::ConfigField {
            field: "config".into(),
            message: e.message().trim().to_string(),
        })?;
    config.resolve()?;
    Ok(config)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| Error::ConfigField {
        field: spec.to_string(),
        message: "override must have the form section.key=value".into(),
    })?;
    let path = path.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut cursor = table;
    for s in sections {
        let entry = cursor
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(Error::ConfigField {
                    field: path.to_string(),
                    message: format!("`{s}` is not a section"),
                })
            }
        };
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

fn field_error(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::ConfigField {
            field: format!("{section}.{field}"),
            message: reason,
        },
        Error::InvalidGrid(reason) => Error::ConfigField {
            field: section.to_string(),
            message: reason,
        },
        other => other,
    }
}

impl RunConfig {
    fn resolve(&mut self) -> Result<()> {
        let params = self.model_params()?;
        self.masses()?;
        self.grid()?;
        let gamma = params.gamma;
        self.solver.tau.get_or_insert(0.01 / gamma);
        self.solver.cb.get_or_insert(SHARP_GN_CONSTANT);
        self.dynamics
            .t_final
            .get_or_insert(20.0 * std::f64::consts::PI / gamma);
        self.dynamics.dt.get_or_insert(1e-3 / gamma);
        self.solver_options()
            .validate()
            .map_err(|e| field_error("solver", e))?;
        self.evolve_options()
            .steps()
            .map_err(|e| field_error("dynamics", e))?;
        let s = &self.stability;
        if s.sizes.is_empty() || s.sizes.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::ConfigField {
                field: "stability.sizes".into(),
                message: "need a nonempty list of sizes >= 0".into(),
            });
        }
        if !(s.epsilon.is_finite() && s.epsilon > 0.0) {
            return Err(Error::ConfigField {
                field: "stability.epsilon".into(),
                message: "must be > 0".into(),
            });
        }
        if self.uniqueness.seeds == 0 {
            return Err(Error::ConfigField {
                field: "uniqueness.seeds".into(),
                message: "must be positive".into(),
            });
        }
        let g = &self.gnconst;
        if !(g.shooting_tol > 0.0 && g.shooting_tol <= 1e-3) {
            return Err(Error::ConfigField {
                field: "gnconst.shooting_tol".into(),
                message: "must lie in (0, 1e-3]".into(),
            });
        }
        Grid::new(2, g.quotient_half_extent, g.quotient_points)
            .map_err(|e| field_error("gnconst", e))?;
        if self.probe.sigmas.is_empty()
            || self
                .probe
                .sigmas
                .iter()
                .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::ConfigField {
                field: "probe.sigmas".into(),
                message: "need a nonempty list of positive scales".into(),
            });
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(
            m.gamma,
            m.delta,
            m.lambda,
            Beta::new(m.beta11, m.beta12, m.beta22),
            m.dim,
        )
        .map_err(|e| field_error("model", e))
    }

    pub fn masses(&self) -> Result<MassConstraint> {
        MassConstraint::new(self.masses.c1, self.masses.c2).map_err(|e| field_error("masses", e))
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.model.dim, self.grid.half_extent, self.grid.points)
            .map_err(|e| field_error("grid", e))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            tau: s.tau.unwrap_or(0.01 / self.model.gamma),
            max_iter: s.max_iter,
            tol: s.tol,
            residual_tol: s.residual_tol,
            seed: self.seed,
            init: s.init,
            cb: s.cb.unwrap_or(SHARP_GN_CONSTANT),
        }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let d = &self.dynamics;
        EvolveOptions {
            t_final: d
                .t_final
                .unwrap_or(20.0 * std::f64::consts::PI / self.model.gamma),
            dt: d.dt.unwrap_or(1e-3 / self.model.gamma),
            record_every: d.record_every,
            snapshot_every: d.snapshot_every,
        }
    }

    pub fn stability_options(&self) -> StabilityOptions {
        let e = self.evolve_options();
        StabilityOptions {
            sizes: self.stability.sizes.clone(),
            mode: self.stability.mode,
            seed: self.seed,
            t_final: e.t_final,
            dt: e.dt,
            record_every: e.record_every,
            epsilon: self.stability.epsilon,
        }
    }

    /// The complete config as TOML.
    pub fn print(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\ngamma = 1.0\n\n[masses]\nc1 = 1.0\nc2 = 0.5\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.model.dim, 2);
        assert_eq!(c.grid.points, 64);
        assert_eq!(c.solver.tau, Some(0.01));
        assert_eq!(c.solver.cb, Some(SHARP_GN_CONSTANT));
        assert_eq!(c.dynamics.dt, Some(1e-3));
        assert_eq!(c.stability.sizes, vec![0.0, 1e-3, 1e-2]);
        assert_eq!(c.masses().unwrap().c(1), 0.5);
    }

    #[test]
    fn negative_gamma_names_the_field() {
        let text = MINIMAL.replace("gamma = 1.0", "gamma = -1.0");
        match parse_config(&text) {
            Err(Error::ConfigField { field, .. }) => assert!(field.contains("gamma"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_gets_a_suggestion() {
        let text = MINIMAL.replace("gamma = 1.0", "gamma = 1.0\ngama = 2.0");
        match parse_config(&text) {
            Err(Error::ConfigField { field, message }) => {
                assert_eq!(field, "model.gama");
                assert!(message.contains("`gamma`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse_config(&format!("{MINIMAL}\n[sover]\ntau = 1.0\n")) {
            Err(Error::ConfigField { field, message }) => {
                assert_eq!(field, "sover");
                assert!(message.contains("`solver`"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_a_location() {
        match parse_config("[model]\ngamma = 1.0\nc1 = = 2\n") {
            Err(Error::ConfigSyntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_required_section() {
        assert!(matches!(
            parse_config("[model]\ngamma = 1.0\n"),
            Err(Error::ConfigField { .. })
        ));
    }

    #[test]
    fn print_parse_round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        let again = parse_config(&c.print()).unwrap();
        assert_eq!(c, again);

        let text = format!("seed = 9\noutput_dir = \"runs\"\n{MINIMAL}\n[model.extra]\n");
        assert!(parse_config(&text).is_err());
        let full = parse_config(&format!("seed = 9\noutput_dir = \"runs\"\n{MINIMAL}")).unwrap();
        assert_eq!(parse_config(&full.print()).unwrap(), full);
    }

    #[test]
    fn overrides_take_precedence() {
        let c = parse_with_overrides(
            MINIMAL,
            &[
                "model.gamma=2".into(),
                "stability.mode=phase_gradient".into(),
                "seed=4".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.model.gamma, 2.0);
        assert_eq!(c.solver.tau, Some(0.005));
        assert_eq!(c.stability.mode, PerturbationMode::PhaseGradient);
        assert_eq!(c.seed, 4);
        assert!(parse_with_overrides(MINIMAL, &["model.gama=2".into()]).is_err());
        assert!(parse_with_overrides(MINIMAL, &["nonsense".into()]).is_err());
    }
}
