//! One runner per subcommand. Each returns the tables to write; nothing
//! touches the filesystem here.

use rayon::prelude::*;
use serde_json::json;
use topowave_core::boundstates::{
    bound_amplitudes_closed_form_zero_detuning, bound_amplitudes_numeric, bound_state_from_real_space,
    solve_bound_energies, spectrum_at, BoundState,
};
use topowave_core::couplings::{band_couplings, bandgap_couplings, markov_gamma, validity_margin, EffectiveCouplings};
use topowave_core::dynamics::{
    atom_populations, evolve_effective, evolve_full, evolve_lindblad, fidelity, fit_exponential_rate, photon_number_map,
    recurrence_time, transfer_metrics, Trajectory,
};
use topowave_core::lattice::{band_edges, build_real_space_hamiltonian, Gap};
use topowave_core::{Error as CoreError, GiantAtomSpec, Sublattice, WaveguideParams, C64};

use crate::config::{common_detuning, BoundstateMethod, ExperimentConfig, ExperimentKind, Model, Resolved};
use crate::error::CliError;
use crate::output::{num, Table};

/// Validity margins at or above this mark a Markov/SW estimate as unreliable.
pub const MARGIN_WARNING: f64 = 0.25;

#[derive(Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
    pub calibration: Option<serde_json::Value>,
}

pub fn run(config: &ExperimentConfig, resolved: &Resolved) -> Result<RunOutput, CliError> {
    match resolved.kind {
        ExperimentKind::Spectrum => spectrum(config, resolved),
        ExperimentKind::Boundstate => boundstate(config, resolved),
        ExperimentKind::SwCouplings => couplings_scan(config, resolved, Regime::Gap),
        ExperimentKind::MarkovScan => couplings_scan(config, resolved, Regime::Band),
        ExperimentKind::Evolve | ExperimentKind::PhotonMap | ExperimentKind::Transfer => dynamics(config, resolved),
    }
}

fn spectrum(config: &ExperimentConfig, r: &Resolved) -> Result<RunOutput, CliError> {
    let grid = config.detuning_grid.as_ref().expect("validated").values();
    let slices = grid
        .par_iter()
        .map(|&d| spectrum_at(&r.params, &r.atoms, d, r.disorder.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new("spectrum", &["delta_detuning", "index", "value", "region"]);
    for s in &slices {
        for (i, (e, region)) in s.levels.iter().enumerate() {
            table.push(vec![num(s.detuning), i.to_string(), num(*e), region.name().to_string()]);
        }
    }
    Ok(RunOutput {
        tables: vec![table],
        ..Default::default()
    })
}

fn gap_list(config: &ExperimentConfig) -> Vec<Gap> {
    match config.boundstate.as_ref().and_then(|b| b.gaps.clone()) {
        Some(list) => list.into_iter().map(Gap::from).collect(),
        None => Gap::ALL.to_vec(),
    }
}

fn boundstate(config: &ExperimentConfig, r: &Resolved) -> Result<RunOutput, CliError> {
    let method = config.boundstate.as_ref().map(|b| b.method).unwrap_or_default();
    let atom = &r.atoms[0];
    let gaps = gap_list(config);
    let mut warnings = Vec::new();
    let mut states: Vec<BoundState> = Vec::new();
    match method {
        BoundstateMethod::Bloch => {
            if r.disorder.is_some() {
                return Err(CliError::Config {
                    field: "boundstate.method".into(),
                    reason: "disorder needs the real-space method".into(),
                });
            }
            for root in solve_bound_energies(atom, &r.params)? {
                if !gaps.contains(&root.gap) {
                    continue;
                }
                match root.energy {
                    Ok(e) => states.push(bound_amplitudes_numeric(e, atom, &r.params)?),
                    Err(CoreError::NotBracketed { gap }) => warnings.push(format!("no bound state in the {gap} gap")),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        BoundstateMethod::RealSpace => {
            let h = build_real_space_hamiltonian(&r.params, &r.atoms, r.disorder.as_ref())?;
            for gap in gaps {
                match bound_state_from_real_space(&h, &r.params, 0, gap) {
                    Ok(s) => states.push(s),
                    Err(CoreError::NotBracketed { gap }) => warnings.push(format!("no eigenvalue in the {gap} gap")),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        BoundstateMethod::ClosedForm => {
            if r.disorder.is_some() {
                return Err(CliError::Config {
                    field: "boundstate.method".into(),
                    reason: "disorder needs the real-space method".into(),
                });
            }
            states.push(bound_amplitudes_closed_form_zero_detuning(atom, &r.params)?);
        }
    }
    let detuning = num(atom.detuning());
    let mut energies = Table::new("boundstate_energies", &["delta_detuning", "gap", "value", "atom_amplitude"]);
    let mut amps = Table::new(
        "boundstate_amplitudes",
        &["delta_detuning", "gap", "cell", "sublattice", "re", "im", "value"],
    );
    for s in &states {
        energies.push(vec![detuning.clone(), s.gap.name().into(), num(s.energy), num(s.atom_amplitude)]);
        for cell in 0..r.params.cells() {
            for sub in [Sublattice::A, Sublattice::B] {
                let c = s.amplitude(cell, sub);
                amps.push(vec![
                    detuning.clone(),
                    s.gap.name().into(),
                    cell.to_string(),
                    sub.label().into(),
                    num(c.re),
                    num(c.im),
                    num(c.norm_sqr()),
                ]);
            }
        }
    }
    Ok(RunOutput {
        tables: vec![energies, amps],
        warnings,
        calibration: None,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Regime {
    Gap,
    Band,
}

fn couplings_at(atoms: &[GiantAtomSpec], d: f64, params: &WaveguideParams, regime: Regime) -> Result<EffectiveCouplings, CoreError> {
    match regime {
        Regime::Gap => bandgap_couplings(atoms, d, params),
        Regime::Band => band_couplings(atoms, d, params),
    }
}

fn worst_margin(atoms: &[GiantAtomSpec], d: f64, params: &WaveguideParams) -> Result<f64, CoreError> {
    atoms
        .iter()
        .map(|a| validity_margin(a, d, params))
        .try_fold(0.0f64, |acc, m| Ok(acc.max(m?)))
}

fn couplings_scan(config: &ExperimentConfig, r: &Resolved, regime: Regime) -> Result<RunOutput, CliError> {
    let (grid, sweep) = match &config.detuning_grid {
        Some(g) => (g.values(), true),
        None => (vec![common_detuning(&r.atoms)?], false),
    };
    let results: Vec<Result<(EffectiveCouplings, f64), CoreError>> = grid
        .par_iter()
        .map(|&d| Ok((couplings_at(&r.atoms, d, &r.params, regime)?, worst_margin(&r.atoms, d, &r.params)?)))
        .collect();
    let name = match regime {
        Regime::Gap => "sw_couplings",
        Regime::Band => "markov_scan",
    };
    let mut table = Table::new(name, &["delta_detuning", "atom_n", "atom_m", "quantity", "re", "im", "validity_margin"]);
    let mut skipped = 0usize;
    let mut flagged = Vec::new();
    for result in results {
        let (c, margin) = match result {
            Ok(v) => v,
            Err(CoreError::Regime { .. } | CoreError::BandEdge { .. }) if sweep => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if margin >= MARGIN_WARNING {
            flagged.push(c.detuning);
        }
        let quantities: &[(&str, &nalgebra::DMatrix<C64>)] = match regime {
            Regime::Gap => &[("coherent", &c.coherent)],
            Regime::Band => &[("coherent", &c.coherent), ("dissipative", &c.dissipative)],
        };
        for n in 0..c.atoms() {
            for m in 0..c.atoms() {
                for (q, mat) in quantities {
                    let v = mat[(n, m)];
                    table.push(vec![
                        num(c.detuning),
                        n.to_string(),
                        m.to_string(),
                        (*q).into(),
                        num(v.re),
                        num(v.im),
                        num(margin),
                    ]);
                }
            }
        }
    }
    if table.is_empty() {
        return Err(CoreError::Regime {
            detuning: grid[0],
            expected: match regime {
                Regime::Gap => "a bandgap",
                Regime::Band => "a band",
            },
        }
        .into());
    }
    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(format!("{skipped} detuning points outside the valid regime were skipped"));
    }
    if !flagged.is_empty() {
        warnings.push(format!(
            "validity margin >= {MARGIN_WARNING} at {} detuning points (first at {})",
            flagged.len(),
            num(flagged[0])
        ));
    }
    let calibration = match (&config.calibration, regime) {
        (Some(c), Regime::Band) => Some(calibrate(c, r.params.delta(), &mut warnings)?),
        _ => None,
    };
    Ok(RunOutput {
        tables: vec![table],
        warnings,
        calibration,
    })
}

/// Exact single-atom decay compared with the Markov rate, expressed as a
/// factor relative to an optional reference rate.
fn calibrate(c: &crate::config::CalibrationConfig, delta: f64, warnings: &mut Vec<String>) -> Result<serde_json::Value, CliError> {
    let params = WaveguideParams::new(delta, c.cells)?;
    let atom = GiantAtomSpec::small(c.detuning, c.cells / 2, Sublattice::A, c.strength)?;
    let margin = validity_margin(&atom, c.detuning, &params)?;
    if margin >= MARGIN_WARNING {
        warnings.push(format!("calibration validity margin {} >= {MARGIN_WARNING}", num(margin)));
    }
    let gamma = markov_gamma(&atom, &atom, c.detuning, &params)?.dissipative.re;
    let horizon = (5.0 / (2.0 * gamma)).min(0.5 * recurrence_time(&params));
    let h = build_real_space_hamiltonian(&params, std::slice::from_ref(&atom), None)?;
    let psi0 = topowave_core::dynamics::InitialState::AtomExcited(0).full_vector(&h)?;
    let times = topowave_core::dynamics::time_grid(0.0, horizon, 301);
    let traj = evolve_full(&h, &psi0, &times)?;
    let population = atom_populations(&traj).remove(0);
    let fitted = fit_exponential_rate(&times, &population)?;
    let fitted_gamma = 0.5 * fitted;
    let mut block = json!({
        "detuning": c.detuning,
        "cells": c.cells,
        "strength": c.strength,
        "validity_margin": margin,
        "horizon": horizon,
        "gamma": gamma,
        "population_decay_rate_fit": fitted,
        "population_decay_rate_predicted": 2.0 * gamma,
        "fit_over_prediction": fitted / (2.0 * gamma),
        "population_convention": "|C_e(t)|^2 ~ exp(-2 gamma t)",
    });
    if let Some(reference) = c.reference_gamma {
        block["reference_gamma"] = json!(reference);
        block["convention_factor"] = json!(reference / fitted_gamma);
    }
    Ok(block)
}

fn dynamics(config: &ExperimentConfig, r: &Resolved) -> Result<RunOutput, CliError> {
    let dyn_cfg = config.dynamics.clone().unwrap_or_default();
    let times = config.time_grid.as_ref().expect("validated").values();
    let mut warnings = Vec::new();
    let edges = band_edges(&r.params)?;
    let in_band = r.atoms.iter().any(|a| !edges.classify(a.detuning(), 0.0).is_gap());
    let initial = dyn_cfg.initial.to_state();
    let target = dyn_cfg.target.as_ref().map(|t| t.to_state());
    let mut tables = Vec::new();

    let traj: Trajectory = match dyn_cfg.model {
        Model::Full => {
            let t_rec = recurrence_time(&r.params);
            if in_band && times.last().copied().unwrap_or(0.0) > 0.5 * t_rec {
                warnings.push(format!(
                    "time horizon exceeds half the recurrence time {} of the ring",
                    num(t_rec)
                ));
            }
            let h = build_real_space_hamiltonian(&r.params, &r.atoms, r.disorder.as_ref())?;
            let traj = evolve_full(&h, &initial.full_vector(&h)?, &times)?;
            if let Some(t) = &target {
                tables.push(fidelity_table(&traj, &t.full_vector(&h)?)?);
            }
            traj
        }
        Model::Effective | Model::Lindblad => {
            let d = common_detuning(&r.atoms)?;
            let couplings = if in_band {
                if dyn_cfg.model == Model::Effective {
                    return Err(CoreError::Regime {
                        detuning: d,
                        expected: "a bandgap",
                    }
                    .into());
                }
                band_couplings(&r.atoms, d, &r.params)?
            } else {
                bandgap_couplings(&r.atoms, d, &r.params)?
            };
            let margin = worst_margin(&r.atoms, d, &r.params)?;
            if margin >= MARGIN_WARNING {
                warnings.push(format!("validity margin {} >= {MARGIN_WARNING}", num(margin)));
            }
            let m = r.atoms.len();
            if dyn_cfg.model == Model::Effective {
                let traj = evolve_effective(&couplings.coherent, &initial.atom_vector(m)?, &times)?;
                if let Some(t) = &target {
                    tables.push(fidelity_table(&traj, &t.atom_vector(m)?)?);
                }
                traj
            } else {
                if target.is_some() {
                    warnings.push("fidelity is not reported for master-equation runs".into());
                }
                evolve_lindblad(&couplings.coherent, &couplings.dissipative, &initial.density_matrix(m)?, &times)?
            }
        }
    };

    let mut pops = Table::new("populations", &["time", "atom", "value"]);
    for (n, series) in atom_populations(&traj).iter().enumerate() {
        for (t, v) in times.iter().zip(series) {
            pops.push(vec![num(*t), n.to_string(), num(*v)]);
        }
    }
    tables.insert(0, pops);

    match r.kind {
        ExperimentKind::PhotonMap => {
            let map = photon_number_map(&traj)?;
            let mut table = Table::new("photon_map", &["time", "cell", "sublattice", "value"]);
            for (t, row) in times.iter().zip(&map) {
                for (site, v) in row.iter().enumerate() {
                    let sub = if site % 2 == 0 { Sublattice::A } else { Sublattice::B };
                    table.push(vec![num(*t), (site / 2).to_string(), sub.label().into(), num(*v)]);
                }
            }
            tables.push(table);
        }
        ExperimentKind::Transfer => {
            let m = transfer_metrics(&traj, dyn_cfg.source, dyn_cfg.destination)?;
            let mut table = Table::new("transfer", &["quantity", "value"]);
            table.push(vec!["peak".into(), num(m.peak)]);
            table.push(vec!["peak_time".into(), num(m.peak_time)]);
            table.push(vec!["period".into(), num(m.period)]);
            tables.push(table);
        }
        _ => {}
    }
    Ok(RunOutput {
        tables,
        warnings,
        calibration: None,
    })
}

fn fidelity_table(traj: &Trajectory, target: &nalgebra::DVector<C64>) -> Result<Table, CliError> {
    let mut table = Table::new("fidelity", &["time", "value"]);
    for (t, f) in traj.times.iter().zip(fidelity(traj, target)?) {
        table.push(vec![num(*t), num(f)]);
    }
    Ok(table)
}
