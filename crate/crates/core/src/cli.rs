//! Subcommand orchestration and result files.
//!
//! Every run writes `manifest.json` (resolved config, version, seed) and
//! `result.json` into the output directory; time-dependent runs also write
//! `series.csv`. Floating-point values in CSV files use 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{InitialState, RunConfig};
use crate::dynamics::{conserved_check, evolve, EvolutionState, Observation};
use crate::error::{Error, Result};
use crate::gn_constant::{gn_constant_shooting, gn_quotient, run_quotient_ascent, townes_soliton};
use crate::grid::{gaussian, oscillator_ground_state, FieldPair, Grid, RealPair};
use crate::ground_state::{
    equivalence_check, minimize_real, orbit_factorize, symmetry_report, uniqueness_probe,
};
use crate::model::{check_admissibility, energy_lower_bound, ensure_well_posed, Condition};
use crate::stability::{illposedness_probe, scaling_energies, stability_experiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Groundstate,
    Evolve,
    Stability,
    Gnconst,
    Equivalence,
    Uniqueness,
    Check,
    Probe,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Groundstate => "groundstate",
            Subcommand::Evolve => "evolve",
            Subcommand::Stability => "stability",
            Subcommand::Gnconst => "gnconst",
            Subcommand::Equivalence => "equivalence",
            Subcommand::Uniqueness => "uniqueness",
            Subcommand::Check => "check",
            Subcommand::Probe => "probe",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Exit status for an error: 1 for bad input, 2 for numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_)
        | Error::PhaseUndefined(_)
        | Error::Bracket { .. }
        | Error::NotConverged { .. }
        | Error::Diverged { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Outcome of a completed run: the artifacts are written and `status` is the
/// exit code (nonzero when a check failed or a solver did not converge).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: i32,
    pub result: serde_json::Value,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn manifest(cmd: Subcommand, config: &RunConfig) -> serde_json::Value {
    json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "seed": config.seed,
        "threads": rayon::current_num_threads(),
        "config": config,
        "config_toml": config.print(),
    })
}

/// Writes a CSV with the given header; refuses to create a file for empty data.
pub fn emit_series(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::param("series", "no rows to write"));
    }
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::param(
                "series",
                "row width does not match the header",
            ));
        }
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                text.push(',');
            }
            write!(text, "{v:.16e}").expect("write to string");
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub const TRAJECTORY_COLUMNS: &[&str] = &["t", "mass1", "mass2", "mass_total", "energy"];
pub const STABILITY_COLUMNS: &[&str] =
    &["size", "t", "d", "mass1", "mass2", "mass_total", "energy"];

fn trajectory_rows(obs: &[Observation]) -> Vec<Vec<f64>> {
    obs.iter()
        .map(|o| vec![o.time, o.masses[0], o.masses[1], o.mass_total, o.energy])
        .collect()
}

fn field_rows(pair: &RealPair) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let grid = pair.grid();
    let names: &[&'static str] = &["x1", "x2", "x3"];
    let mut header: Vec<&'static str> = names[..grid.dim()].to_vec();
    header.extend(["w1", "w2"]);
    let rows = (0..grid.len())
        .map(|c| {
            let x = grid.position(c);
            let mut row: Vec<f64> = x[..grid.dim()].to_vec();
            row.push(pair.first().values()[c]);
            row.push(pair.second().values()[c]);
            row
        })
        .collect();
    (header, rows)
}

/// Runs a subcommand, writing all artifacts into `out`.
pub fn run(cmd: Subcommand, config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out)?;
    write_json(&out.join("manifest.json"), &manifest(cmd, config))?;
    let params = config.model_params()?;
    let masses = config.masses()?;
    let solver = config.solver_options();
    let outcome = match cmd {
        Subcommand::Check => {
            let reports: Vec<_> = Condition::ALL
                .iter()
                .filter_map(|&c| check_admissibility(&params, &masses, solver.cb, c).ok())
                .collect();
            let well_posed = ensure_well_posed(&params, &masses, solver.cb);
            let admissible = well_posed.is_ok();
            let result = json!({
                "admissible": admissible,
                "satisfied_condition": well_posed.ok().flatten().map(|r| r.condition.tag()),
                "reports": reports,
                "energy_lower_bound": energy_lower_bound(&params, &masses, solver.cb).ok(),
            });
            RunOutcome {
                status: if admissible { EXIT_OK } else { EXIT_VALIDATION },
                result,
            }
        }
        Subcommand::Groundstate => {
            let grid = config.grid()?;
            let r = minimize_real(&params, &masses, &grid, &solver)?;
            let (header, rows) = field_rows(&r.pair);
            emit_series(&out.join("fields.csv"), &header, &rows)?;
            let result = json!({
                "energy": r.energy,
                "breakdown": r.breakdown,
                "mu": r.mu,
                "el_residual": r.el_residual,
                "iterations": r.iterations,
                "converged": r.converged,
                "masses": r.pair.masses(),
                "sigma_norm": r.sigma_norm(),
                "symmetry": [symmetry_report(r.pair.first()), symmetry_report(r.pair.second())],
            });
            RunOutcome {
                status: if r.converged { EXIT_OK } else { EXIT_NUMERICAL },
                result,
            }
        }
        Subcommand::Equivalence => {
            let grid = config.grid()?;
            let eq = equivalence_check(&params, &masses, &grid, &solver)?;
            let f = orbit_factorize(&eq.complex.pair, &eq.real.pair)?;
            let result = json!({
                "equivalence": eq.summary(),
                "theta": f.theta,
                "factor_residual": f.factor_residual,
                "relative_factor_residual": f.factor_residual / eq.real.sigma_norm(),
                "max_phase_deviation": f.max_phase_deviation,
                "mu_real": eq.real.mu,
                "mu_complex": eq.complex.mu,
            });
            RunOutcome {
                status: if eq.passed { EXIT_OK } else { EXIT_NUMERICAL },
                result,
            }
        }
        Subcommand::Uniqueness => {
            let grid = config.grid()?;
            let report =
                uniqueness_probe(&params, &masses, &grid, config.uniqueness.seeds, &solver)?;
            let relative = report.max_distance / report.reference_norm;
            let result = json!({
                "report": report,
                "relative_max_distance": relative,
                "note": if report.uniqueness_guaranteed { "" } else { "uniqueness not guaranteed" },
            });
            RunOutcome {
                status: if report.converged_seeds.is_empty() {
                    EXIT_NUMERICAL
                } else {
                    EXIT_OK
                },
                result,
            }
        }
        Subcommand::Gnconst => {
            let g = &config.gnconst;
            let townes = townes_soliton(g.shooting_tol)?;
            let shooting = gn_constant_shooting(g.shooting_tol)?;
            let qgrid = Grid::new(2, g.quotient_half_extent, g.quotient_points)?;
            let (ascent, converged) = run_quotient_ascent(&qgrid, g.quotient_iters)?;
            let quotient = 1.0 / ascent.quotient();
            let gaussian_quotient = gn_quotient(&gaussian(&qgrid, 1.0))?;
            let result = json!({
                "shooting": shooting,
                "townes_center": townes.center,
                "quotient": quotient,
                "quotient_converged": converged,
                "quotient_stationarity": ascent.stationarity(),
                "relative_difference": (quotient - shooting.value).abs() / shooting.value,
                "gaussian_quotient": gaussian_quotient,
                "gaussian_below_sharp": gaussian_quotient < 1.0 / shooting.value,
            });
            RunOutcome {
                status: if converged { EXIT_OK } else { EXIT_NUMERICAL },
                result,
            }
        }
        Subcommand::Evolve => {
            let grid = config.grid()?;
            let initial = match config.dynamics.initial {
                InitialState::GroundState => {
                    let r = minimize_real(&params, &masses, &grid, &solver)?;
                    if !r.converged {
                        return Err(Error::NotConverged {
                            iterations: r.iterations,
                            best: r.energy,
                        });
                    }
                    r.pair
                }
                InitialState::Gaussian => FieldPair::new(
                    oscillator_ground_state(&grid, params.gamma, masses.mass(0)),
                    oscillator_ground_state(&grid, params.gamma, masses.mass(1)),
                )?,
            };
            let state = EvolutionState::new(initial.to_complex())?;
            let traj = evolve(state, &params, &config.evolve_options())?;
            emit_series(
                &out.join("series.csv"),
                TRAJECTORY_COLUMNS,
                &trajectory_rows(&traj.observations),
            )?;
            if !traj.snapshots.is_empty() {
                let dir = out.join("snapshots");
                fs::create_dir_all(&dir)?;
                for (k, s) in traj.snapshots.iter().enumerate() {
                    let rows: Vec<Vec<f64>> = (0..grid.len())
                        .map(|c| {
                            let (a, b) = (s.pair.first().values()[c], s.pair.second().values()[c]);
                            vec![a.re, a.im, b.re, b.im]
                        })
                        .collect();
                    emit_series(
                        &dir.join(format!("snapshot_{k:04}.csv")),
                        &["re1", "im1", "re2", "im2"],
                        &rows,
                    )?;
                }
            }
            let drifts = conserved_check(&traj)?;
            let result = json!({
                "dt": traj.dt,
                "steps": traj.final_state.steps,
                "final_time": traj.final_state.time,
                "records": traj.observations.len(),
                "snapshots": traj.snapshots.len(),
                "drifts": drifts,
            });
            RunOutcome {
                status: EXIT_OK,
                result,
            }
        }
        Subcommand::Stability => {
            let grid = config.grid()?;
            let outcome = stability_experiment(
                &params,
                &masses,
                &grid,
                &solver,
                &config.stability_options(),
            )?;
            let mut rows = Vec::new();
            for (k, r) in outcome.reports.iter().enumerate() {
                write_json(&out.join(format!("report_{k:02}.json")), r)?;
                for j in 0..r.times.len() {
                    rows.push(vec![
                        r.size,
                        r.times[j],
                        r.distances[j],
                        r.masses[j][0],
                        r.masses[j][1],
                        r.masses[j][0] + r.masses[j][1],
                        r.energies[j],
                    ]);
                }
            }
            emit_series(&out.join("series.csv"), STABILITY_COLUMNS, &rows)?;
            let summaries: Vec<_> = outcome
                .reports
                .iter()
                .map(|r| {
                    json!({
                        "mode": r.mode,
                        "size": r.size,
                        "sup_distance": r.sup_distance,
                        "amplification": r.amplification,
                        "mass_drift": r.mass_drift,
                        "energy_drift": r.energy_drift,
                        "component_mass_range": r.component_mass_range,
                        "verdict": r.verdict,
                    })
                })
                .collect();
            let all_pass = outcome.reports.iter().all(|r| r.verdict);
            let result = json!({
                "runs": summaries,
                "max_amplification": outcome.max_amplification,
                "log_slope": outcome.log_slope,
                "ground_energy": outcome.ground_energy,
                "mu": outcome.mu,
                "all_within_epsilon": all_pass,
            });
            RunOutcome {
                status: EXIT_OK,
                result,
            }
        }
        Subcommand::Probe => {
            let sigmas = &config.probe.sigmas;
            let probe = if params.dim == 3
                && [params.beta.b11, params.beta.b12, params.beta.b22]
                    .iter()
                    .all(|b| *b < 0.0)
            {
                illposedness_probe(&params, &masses, sigmas)?
            } else {
                scaling_energies(&params, &masses, sigmas)?
            };
            RunOutcome {
                status: EXIT_OK,
                result: serde_json::to_value(&probe)?,
            }
        }
    };
    write_json(&out.join("result.json"), &outcome.result)?;
    Ok(outcome)
}

/// Output directory: the command-line value, else the config's, else `out`.
pub fn output_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_series() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        emit_series(&path, &["t", "d"], &[vec![0.0, 0.1]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,d\n0.0000000000000000e0,1.0000000000000001e-1\n");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn empty_series_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        assert!(emit_series(&path, &["t"], &[]).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Inadmissible("x".into())), EXIT_VALIDATION);
        assert_eq!(
            exit_code(&Error::NotConverged {
                iterations: 1,
                best: 0.0
            }),
            EXIT_NUMERICAL
        );
    }
}
