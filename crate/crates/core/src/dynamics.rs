//! Single-excitation dynamics: exact propagation of the full Hamiltonian,
//! the effective spin model, and the correlated-dissipation master equation.
//!
//! The master equation acts on the ground state (index 0) and the `M`
//! single-atom excitations (indices `1..=M`), in the frame rotating at the
//! common atomic frequency:
//!
//! ```text
//! ρ' = -i(Kρ - ρK†) + 2 tr(γ ρ_ee) |g⟩⟨g|,    K = J - iγ on the excited block.
//! ```

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::lattice::max_group_velocity;
use crate::linalg::{hermitian_eigen, hermiticity_defect, symmetric_eigen, to_complex};
use crate::{Error, RealSpaceHamiltonian, Result, Sublattice, WaveguideParams, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Couplings more non-Hermitian than this are rejected.
const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Dissipator eigenvalues below this are unphysical.
pub const DISSIPATOR_FLOOR: f64 = -1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum States {
    Pure(Vec<DVector<C64>>),
    /// Density matrices over ground + atoms.
    Mixed(Vec<DMatrix<C64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Leading photon entries of each pure state (zero for atom-only models).
    pub photon_sites: usize,
    pub atoms: usize,
    pub states: States,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Norm (pure) or trace (mixed) at each time.
    pub fn norms(&self) -> Vec<f64> {
        match &self.states {
            States::Pure(v) => v.iter().map(|s| s.norm_squared()).collect(),
            States::Mixed(v) => v.iter().map(|r| r.trace().re).collect(),
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("times", "time grid is empty"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("times", "time grid must be finite and non-decreasing"));
    }
    Ok(())
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `ψ(t) = V e^{-iEt} Vᵀ ψ₀` from the spectral decomposition of `H`.
pub fn evolve_full(hamiltonian: &RealSpaceHamiltonian, psi0: &DVector<C64>, times: &[f64]) -> Result<Trajectory> {
    check_dim(hamiltonian.dimension(), psi0.len())?;
    check_times(times)?;
    let (values, vectors) = symmetric_eigen(hamiltonian.matrix());
    let basis = to_complex(&vectors);
    let coeffs = basis.transpose() * psi0;
    let states = times
        .iter()
        .map(|&t| {
            let rotated = DVector::from_fn(values.len(), |i, _| coeffs[i] * C64::from_polar(1.0, -values[i] * t));
            &basis * rotated
        })
        .collect();
    Ok(Trajectory {
        times: times.to_vec(),
        photon_sites: hamiltonian.photon_sites(),
        atoms: hamiltonian.atom_count(),
        states: States::Pure(states),
    })
}

/// Unitary evolution under the `M × M` coherent coupling matrix.
pub fn evolve_effective(coherent: &DMatrix<C64>, psi0: &DVector<C64>, times: &[f64]) -> Result<Trajectory> {
    check_dim(coherent.nrows(), psi0.len())?;
    check_times(times)?;
    let deviation = hermiticity_defect(coherent);
    if deviation > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, basis) = hermitian_eigen(coherent);
    let coeffs = basis.adjoint() * psi0;
    let states = times
        .iter()
        .map(|&t| {
            let rotated = DVector::from_fn(values.len(), |i, _| coeffs[i] * C64::from_polar(1.0, -values[i] * t));
            &basis * rotated
        })
        .collect();
    Ok(Trajectory {
        times: times.to_vec(),
        photon_sites: 0,
        atoms: coherent.nrows(),
        states: States::Pure(states),
    })
}

/// Classic fourth-order Runge–Kutta with step doubling: a step of `h` is
/// accepted when it and two steps of `h/2` differ by less than
/// `tolerance · h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveRk4 {
    pub tolerance: f64,
    pub step: f64,
    pub min_step: f64,
}

impl Default for AdaptiveRk4 {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            step: 0.1,
            min_step: 1e-12,
        }
    }
}

fn rk4_step<F>(f: &F, y: &DMatrix<C64>, h: f64) -> DMatrix<C64>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    let k1 = f(y);
    let k2 = f(&(y + &k1 * C64::new(h / 2.0, 0.0)));
    let k3 = f(&(y + &k2 * C64::new(h / 2.0, 0.0)));
    let k4 = f(&(y + &k3 * C64::new(h, 0.0)));
    y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

impl AdaptiveRk4 {
    /// Advances the autonomous system `y' = f(y)` from `t0` to `t1`.
    pub fn advance<F>(&mut self, f: &F, y: &mut DMatrix<C64>, t0: f64, t1: f64) -> Result<()>
    where
        F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
    {
        let mut t = t0;
        while t < t1 {
            let remaining = t1 - t;
            let h = self.step.min(remaining);
            let full = rk4_step(f, y, h);
            let half = rk4_step(f, y, h / 2.0);
            let fine = rk4_step(f, &half, h / 2.0);
            let err = crate::linalg::max_abs(&(&fine - &full)) / 15.0;
            if err <= self.tolerance * h {
                // Richardson-corrected fine solution
                *y = &fine + (&fine - &full) * C64::new(1.0 / 15.0, 0.0);
                t = if h == remaining { t1 } else { t + h };
                let grow = if err == 0.0 { 2.0 } else { (0.9 * (self.tolerance * h / err).powf(0.25)).min(2.0) };
                if h == self.step {
                    self.step *= grow.max(1.0);
                }
            } else {
                let shrink = (0.9 * (self.tolerance * h / err).powf(0.25)).clamp(0.1, 0.5);
                self.step = h * shrink;
                if self.step < self.min_step {
                    return Err(Error::StepUnderflow { time: t });
                }
            }
        }
        Ok(())
    }
}

/// Schrödinger evolution by the adaptive step integrator; an independent
/// check on the spectral propagators.
pub fn evolve_stepped(hamiltonian: &DMatrix<C64>, psi0: &DVector<C64>, times: &[f64], photon_sites: usize) -> Result<Trajectory> {
    check_dim(hamiltonian.nrows(), psi0.len())?;
    check_times(times)?;
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |y: &DMatrix<C64>| hamiltonian * y * minus_i;
    let mut y = DMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
    let mut integrator = AdaptiveRk4::default();
    let mut states = Vec::with_capacity(times.len());
    let mut t = times[0];
    for &target in times {
        integrator.advance(&rhs, &mut y, t, target)?;
        t = target;
        states.push(DVector::from_column_slice(y.as_slice()));
    }
    Ok(Trajectory {
        times: times.to_vec(),
        photon_sites,
        atoms: hamiltonian.nrows() - photon_sites,
        states: States::Pure(states),
    })
}

/// Master-equation evolution with coherent couplings `J` and dissipative
/// couplings `γ`; `ρ₀` lives on ground + atoms.
pub fn evolve_lindblad(
    coherent: &DMatrix<C64>,
    dissipative: &DMatrix<C64>,
    rho0: &DMatrix<C64>,
    times: &[f64],
) -> Result<Trajectory> {
    let atoms = coherent.nrows();
    check_dim(atoms, dissipative.nrows())?;
    check_dim(atoms + 1, rho0.nrows())?;
    check_times(times)?;
    for m in [coherent, dissipative] {
        let deviation = hermiticity_defect(m);
        if deviation > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { deviation });
        }
    }
    if atoms > 0 {
        let lowest = hermitian_eigen(dissipative).0[0];
        if lowest < DISSIPATOR_FLOOR {
            return Err(Error::UnphysicalDissipator { eigenvalue: lowest });
        }
    }
    let dim = atoms + 1;
    let mut k = DMatrix::from_element(dim, dim, ZERO);
    for i in 0..atoms {
        for j in 0..atoms {
            k[(i + 1, j + 1)] = coherent[(i, j)] - C64::new(0.0, 1.0) * dissipative[(i, j)];
        }
    }
    let k_adj = k.adjoint();
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |rho: &DMatrix<C64>| {
        let mut out = (&k * rho - rho * &k_adj) * minus_i;
        let mut feed = ZERO;
        for i in 0..atoms {
            for j in 0..atoms {
                feed += dissipative[(i, j)] * rho[(j + 1, i + 1)];
            }
        }
        out[(0, 0)] += feed * 2.0;
        out
    };
    let mut rho = rho0.clone();
    let mut integrator = AdaptiveRk4::default();
    let mut states = Vec::with_capacity(times.len());
    let mut t = times[0];
    for &target in times {
        integrator.advance(&rhs, &mut rho, t, target)?;
        t = target;
        states.push(rho.clone());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        photon_sites: 0,
        atoms,
        states: States::Mixed(states),
    })
}

/// Named initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    AtomExcited(usize),
    PhotonSite { cell: usize, sublattice: Sublattice },
    /// Normalized superposition of atom excitations.
    Superposition(Vec<(usize, C64)>),
}

impl InitialState {
    fn atom_weights(&self, atoms: usize) -> Result<Vec<(usize, C64)>> {
        let list = match self {
            InitialState::AtomExcited(n) => alloc::vec![(*n, ONE)],
            InitialState::Superposition(list) => list.clone(),
            InitialState::PhotonSite { .. } => return Err(Error::Contract("photon initial state needs the full model")),
        };
        if let Some(&(n, _)) = list.iter().find(|(n, _)| *n >= atoms) {
            return Err(Error::DimensionMismatch { expected: atoms, found: n });
        }
        let norm = list.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::invalid("initial state", "superposition has zero norm"));
        }
        Ok(list.into_iter().map(|(n, c)| (n, c / norm)).collect())
    }

    /// State vector in the full real-space basis.
    pub fn full_vector(&self, hamiltonian: &RealSpaceHamiltonian) -> Result<DVector<C64>> {
        let mut v = DVector::from_element(hamiltonian.dimension(), ZERO);
        match self {
            InitialState::PhotonSite { cell, sublattice } => {
                if *cell >= hamiltonian.cells() {
                    return Err(Error::invalid("cell", "photon site outside lattice"));
                }
                v[hamiltonian.site_index(*cell, *sublattice)] = ONE;
            }
            _ => {
                for (n, c) in self.atom_weights(hamiltonian.atom_count())? {
                    v[hamiltonian.atom_index(n)] += c;
                }
            }
        }
        Ok(v)
    }

    /// State vector on the atoms only.
    pub fn atom_vector(&self, atoms: usize) -> Result<DVector<C64>> {
        let mut v = DVector::from_element(atoms, ZERO);
        for (n, c) in self.atom_weights(atoms)? {
            v[n] += c;
        }
        Ok(v)
    }

    /// Pure-state density matrix on ground + atoms.
    pub fn density_matrix(&self, atoms: usize) -> Result<DMatrix<C64>> {
        let v = self.atom_vector(atoms)?;
        let mut padded = DVector::from_element(atoms + 1, ZERO);
        padded.rows_mut(1, atoms).copy_from(&v);
        Ok(&padded * padded.adjoint())
    }
}

/// `[atom][time]` excited-state populations.
pub fn atom_populations(trajectory: &Trajectory) -> Vec<Vec<f64>> {
    (0..trajectory.atoms)
        .map(|n| match &trajectory.states {
            States::Pure(v) => v.iter().map(|s| s[trajectory.photon_sites + n].norm_sqr()).collect(),
            States::Mixed(v) => v.iter().map(|r| r[(n + 1, n + 1)].re).collect(),
        })
        .collect()
}

/// `[time][site]` photon occupations, site order as in the real-space basis.
pub fn photon_number_map(trajectory: &Trajectory) -> Result<Vec<Vec<f64>>> {
    match &trajectory.states {
        States::Pure(v) => Ok(v
            .iter()
            .map(|s| (0..trajectory.photon_sites).map(|i| s[i].norm_sqr()).collect())
            .collect()),
        States::Mixed(_) => Err(Error::Contract("photon occupations need a full-model trajectory")),
    }
}

/// `|⟨ψ(t)|target⟩|` at each time.
pub fn fidelity(trajectory: &Trajectory, target: &DVector<C64>) -> Result<Vec<f64>> {
    match &trajectory.states {
        States::Pure(v) => {
            if let Some(s) = v.first() {
                check_dim(s.len(), target.len())?;
            }
            Ok(v.iter().map(|s| s.dotc(target).norm()).collect())
        }
        States::Mixed(_) => Err(Error::Contract("fidelity is defined for pure trajectories")),
    }
}

/// Summary of an excitation-transfer run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMetrics {
    /// Destination population at its first major maximum.
    pub peak: f64,
    /// Time of that maximum.
    pub peak_time: f64,
    /// Mean spacing between successive major maxima.
    pub period: f64,
}

/// Major maxima of a series: the maximum of each excursion above 60% of the
/// global maximum, an excursion ending when the series drops below 40%.
pub fn major_maxima(times: &[f64], series: &[f64]) -> Vec<(f64, f64)> {
    let top = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Vec::new();
    }
    let (enter, leave) = (0.6 * top, 0.4 * top);
    let mut peaks = Vec::new();
    let mut current: Option<(f64, f64)> = None;
    for (&t, &v) in times.iter().zip(series) {
        match current {
            None if v > enter => current = Some((t, v)),
            Some((_, best)) if v < leave => {
                peaks.push((current.unwrap().0, best));
                current = None;
            }
            Some((_, best)) if v > best => current = Some((t, v)),
            _ => {}
        }
    }
    if let Some(p) = current {
        peaks.push(p);
    }
    peaks
}

pub fn transfer_metrics_from_series(times: &[f64], destination: &[f64]) -> Result<TransferMetrics> {
    let peaks = major_maxima(times, destination);
    if peaks.len() < 2 {
        return Err(Error::NoOscillation);
    }
    let span = peaks[peaks.len() - 1].0 - peaks[0].0;
    Ok(TransferMetrics {
        peak: peaks[0].1,
        peak_time: peaks[0].0,
        period: span / (peaks.len() - 1) as f64,
    })
}

/// Transfer metrics for an excitation starting on `source` and arriving on
/// `destination`.
pub fn transfer_metrics(trajectory: &Trajectory, source: usize, destination: usize) -> Result<TransferMetrics> {
    if source >= trajectory.atoms || destination >= trajectory.atoms || source == destination {
        return Err(Error::Contract("source and destination must be distinct atoms"));
    }
    let pops = atom_populations(trajectory);
    transfer_metrics_from_series(&trajectory.times, &pops[destination])
}

/// Time for a wavepacket at the fastest group velocity to circle the ring.
pub fn recurrence_time(params: &WaveguideParams) -> f64 {
    params.cells() as f64 / max_group_velocity(params)
}

/// Least-squares rate `r` of `values ≈ A e^{-r t}`; non-positive samples are
/// skipped.
pub fn fit_exponential_rate(times: &[f64], values: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("values", "need at least two positive samples"));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("times", "need distinct sample times"));
    }
    Ok(-sxy / sxx)
}

/// Uniform grid `start, start + step, ..., ≤ stop`.
pub fn time_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => (0..points)
            .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
