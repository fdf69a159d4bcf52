//! Atom–photon bound states in the gaps.
//!
//! A bound state at energy `E` solves `E = Δ + Σ(E)` with the self-energy
//! `Σ(E) = ∫ dk/2π [|p|²/(E - ω) + |q|²/(E + ω)]`. Its photon amplitudes are
//! `C_e (E - H_ph)⁻¹ V`, evaluated on the infinite lattice and reported on the
//! cells `0..N`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::couplings::{coupling_functions, gap_quadrature, resolvent_numerator, resolvent_numerator_slope, EDGE_TOLERANCE};
use crate::lattice::{band_edges, bloch_factor, dispersion_and_phase, Gap, Phase, SpectralRegion};
use crate::linalg::symmetric_eigen;
use crate::quadrature::bisect;
use crate::{Error, GiantAtomSpec, RealSpaceHamiltonian, Result, Sublattice, WaveguideParams, C64};

/// Root tolerance for the bound-state energy.
pub const ENERGY_TOLERANCE: f64 = 1e-10;
/// Initial offset of a bisection bracket from a band edge.
const BRACKET_OFFSET: f64 = 1e-6;
/// Smallest offset tried when the sign change hides closer to an edge.
const MIN_BRACKET_OFFSET: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    /// `C_e`, real and non-negative.
    pub atom_amplitude: f64,
    /// `C_j^a` for `j = 0..N`.
    pub a: Vec<C64>,
    /// `C_j^b` for `j = 0..N`.
    pub b: Vec<C64>,
    pub gap: Gap,
}

impl BoundState {
    pub fn photon_weight(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|c| c.norm_sqr()).sum()
    }

    /// `|C_e|² + Σ_j |C_j^a|² + |C_j^b|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.atom_amplitude * self.atom_amplitude + self.photon_weight()
    }

    pub fn amplitude(&self, cell: usize, sublattice: Sublattice) -> C64 {
        match sublattice {
            Sublattice::A => self.a[cell],
            Sublattice::B => self.b[cell],
        }
    }
}

fn require_in_gap(energy: f64, params: &WaveguideParams) -> Result<Gap> {
    let edges = band_edges(params)?;
    let distance = edges.distance(energy);
    match edges.classify(energy, EDGE_TOLERANCE).gap() {
        Some(gap) if distance > EDGE_TOLERANCE => Ok(gap),
        _ => Err(Error::OutOfGap { energy, distance }),
    }
}

/// `Σ(E)` for `E` strictly inside a gap.
pub fn self_energy(energy: f64, atom: &GiantAtomSpec, params: &WaveguideParams) -> Result<f64> {
    require_in_gap(energy, params)?;
    let f = coupling_functions(atom);
    let quad = gap_quadrature(energy, params)?;
    let z = C64::new(energy, 0.0);
    quad.integrate_real(|k| {
        let (w, _) = dispersion_and_phase(k, params);
        resolvent_numerator(&f, &f, z, k, params).re / (energy * energy - w * w)
    })
}

/// `dΣ/dE`, always `≤ 0`.
pub fn self_energy_derivative(energy: f64, atom: &GiantAtomSpec, params: &WaveguideParams) -> Result<f64> {
    require_in_gap(energy, params)?;
    let f = coupling_functions(atom);
    let quad = gap_quadrature(energy, params)?;
    let z = C64::new(energy, 0.0);
    quad.integrate_real(|k| {
        let (w, _) = dispersion_and_phase(k, params);
        let d = energy * energy - w * w;
        let num = resolvent_numerator(&f, &f, z, k, params).re;
        let slope = resolvent_numerator_slope(&f, &f, k).re;
        slope / d - 2.0 * energy * num / (d * d)
    })
}

/// Outcome of the root search in one gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRoot {
    pub gap: Gap,
    pub energy: Result<f64>,
}

/// Solves `E = Δ + Σ(E)` in each of the three gaps. `E - Δ - Σ(E)` is strictly
/// increasing, so each gap holds at most one root; gaps without a sign change
/// are reported as not bracketed.
pub fn solve_bound_energies(atom: &GiantAtomSpec, params: &WaveguideParams) -> Result<Vec<GapRoot>> {
    let edges = band_edges(params)?;
    let delta = atom.detuning();
    let residual = |e: f64| -> Result<f64> { Ok(e - delta - self_energy(e, atom, params)?) };
    let mut out = Vec::with_capacity(3);
    for gap in Gap::ALL {
        let (low_edge, high_edge) = edges.gap_interval(gap);
        let energy = (|| {
            let lo = if low_edge.is_finite() {
                edge_bracket(&residual, low_edge, 1.0, |v| v < 0.0)?
            } else {
                far_bracket(&residual, high_edge, -1.0, |v| v < 0.0)?
            };
            let hi = if high_edge.is_finite() {
                edge_bracket(&residual, high_edge, -1.0, |v| v > 0.0)?
            } else {
                far_bracket(&residual, low_edge, 1.0, |v| v > 0.0)?
            };
            match (lo, hi) {
                (Some(lo), Some(hi)) if lo < hi => bisect(residual, lo, hi, ENERGY_TOLERANCE),
                _ => Err(Error::NotBracketed { gap: gap.name() }),
            }
        })();
        out.push(GapRoot { gap, energy });
    }
    Ok(out)
}

/// Moves from `edge + direction·1e-6` toward the edge until `accept` holds.
fn edge_bracket<F, A>(residual: &F, edge: f64, direction: f64, accept: A) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
    A: Fn(f64) -> bool,
{
    let mut offset = BRACKET_OFFSET;
    while offset >= MIN_BRACKET_OFFSET {
        let e = edge + direction * offset;
        if accept(residual(e)?) {
            return Ok(Some(e));
        }
        offset /= 10.0;
    }
    Ok(None)
}

/// Moves away from `edge` by doubling distances until `accept` holds.
fn far_bracket<F, A>(residual: &F, edge: f64, direction: f64, accept: A) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
    A: Fn(f64) -> bool,
{
    let mut distance = 1.0;
    for _ in 0..64 {
        let e = edge + direction * distance;
        if accept(residual(e)?) {
            return Ok(Some(e));
        }
        distance *= 2.0;
    }
    Ok(None)
}

/// Photon amplitudes by quadrature of `C_e (E - H_ph)⁻¹ V`, with `C_e` fixed by
/// normalization over the infinite lattice.
pub fn bound_amplitudes_numeric(energy: f64, atom: &GiantAtomSpec, params: &WaveguideParams) -> Result<BoundState> {
    let gap = require_in_gap(energy, params)?;
    atom.check_within(params)?;
    let f = coupling_functions(atom);
    let quad = gap_quadrature(energy, params)?;
    let cells = params.cells();
    let reference = f.reference_cell() as f64;
    let e2 = energy * energy;

    // components: [C^a_0..N, C^b_0..N, norm]
    let raw = quad.integrate_many(2 * cells + 1, |k, out| {
        let (w, _) = dispersion_and_phase(k, params);
        let d = e2 - w * w;
        let (a, b) = f.node_sums(k);
        let fk = bloch_factor(k, params);
        let ua = (a * energy + fk * b) / d;
        let ub = (fk.conj() * a + b * energy) / d;
        let step = C64::from_polar(1.0, k);
        let mut phase = C64::from_polar(1.0, -k * reference);
        for j in 0..cells {
            out[j] = ua * phase;
            out[cells + j] = ub * phase;
            phase *= step;
        }
        out[2 * cells] = C64::new(ua.norm_sqr() + ub.norm_sqr(), 0.0);
    })?;
    let atom_amplitude = 1.0 / (1.0 + raw[2 * cells].re).sqrt();
    Ok(BoundState {
        energy,
        atom_amplitude,
        a: raw[..cells].iter().map(|c| c * atom_amplitude).collect(),
        b: raw[cells..2 * cells].iter().map(|c| c * atom_amplitude).collect(),
        gap,
    })
}

/// Exact amplitudes at `Δ = 0`, `E = 0` for an atom coupled to the A and B
/// site of one cell. Requires exactly that node pattern.
pub fn bound_amplitudes_closed_form_zero_detuning(atom: &GiantAtomSpec, params: &WaveguideParams) -> Result<BoundState> {
    let nodes = atom.nodes();
    let same_cell_pair = nodes.len() == 2
        && nodes[0].cell == nodes[1].cell
        && nodes[0].sublattice != nodes[1].sublattice;
    if !same_cell_pair || atom.detuning() != 0.0 {
        return Err(Error::Contract(
            "closed form needs zero detuning and one A and one B node in the same cell",
        ));
    }
    atom.check_within(params)?;
    let strength = |s: Sublattice| nodes.iter().find(|n| n.sublattice == s).map_or(0.0, |n| n.strength);
    let (g_a, g_b) = (strength(Sublattice::A), strength(Sublattice::B));
    let (j1, j2) = (params.j1(), params.j2());
    let m = nodes[0].cell as i64;
    let cells = params.cells();
    let atom_amplitude = 1.0 / (1.0 + (g_a * g_a + g_b * g_b) / (j2 * j2 - j1 * j1).abs()).sqrt();
    let mut a = alloc::vec![C64::new(0.0, 0.0); cells];
    let mut b = a.clone();
    match params.phase() {
        Phase::Gapless => return Err(Error::Gapless),
        Phase::Topological => {
            let ratio = -j1 / j2;
            for j in 0..cells {
                let d = j as i64 - m;
                if d >= 1 {
                    a[j] = C64::new(atom_amplitude * g_b / j1 * ratio.powi(d as i32), 0.0);
                } else if d <= -1 {
                    b[j] = C64::new(atom_amplitude * g_a / j1 * ratio.powi((-d) as i32), 0.0);
                }
            }
        }
        Phase::Trivial => {
            let ratio = -j2 / j1;
            for j in 0..cells {
                let d = j as i64 - m;
                if d <= 0 {
                    a[j] = C64::new(-atom_amplitude * g_b / j1 * ratio.powi((-d) as i32), 0.0);
                }
                if d >= 0 {
                    b[j] = C64::new(-atom_amplitude * g_a / j1 * ratio.powi(d as i32), 0.0);
                }
            }
        }
    }
    Ok(BoundState {
        energy: 0.0,
        atom_amplitude,
        a,
        b,
        gap: Gap::Middle,
    })
}

/// Picks, among real-space eigenstates inside `gap`, the one with the largest
/// weight on atom `atom`, gauged so the atom amplitude is non-negative.
pub fn bound_state_from_real_space(
    hamiltonian: &RealSpaceHamiltonian,
    params: &WaveguideParams,
    atom: usize,
    gap: Gap,
) -> Result<BoundState> {
    if atom >= hamiltonian.atom_count() {
        return Err(Error::DimensionMismatch {
            expected: hamiltonian.atom_count(),
            found: atom,
        });
    }
    let edges = band_edges(params)?;
    let (values, vectors) = symmetric_eigen(hamiltonian.matrix());
    let row = hamiltonian.atom_index(atom);
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, &e)| edges.classify(e, EDGE_TOLERANCE) == gap.region())
        .max_by(|(i, _), (j, _)| vectors[(row, *i)].abs().total_cmp(&vectors[(row, *j)].abs()))
        .map(|(i, _)| i)
        .ok_or(Error::NotBracketed { gap: gap.name() })?;
    let sign = if vectors[(row, best)] < 0.0 { -1.0 } else { 1.0 };
    let column = |idx: usize| C64::new(sign * vectors[(idx, best)], 0.0);
    let cells = hamiltonian.cells();
    Ok(BoundState {
        energy: values[best],
        atom_amplitude: sign * vectors[(row, best)],
        a: (0..cells).map(|j| column(hamiltonian.site_index(j, Sublattice::A))).collect(),
        b: (0..cells).map(|j| column(hamiltonian.site_index(j, Sublattice::B))).collect(),
        gap,
    })
}

/// Full spectrum at one detuning, each eigenvalue tagged with its region.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSlice {
    pub detuning: f64,
    pub levels: Vec<(f64, SpectralRegion)>,
}

impl SpectrumSlice {
    pub fn count_in(&self, region: SpectralRegion) -> usize {
        self.levels.iter().filter(|(_, r)| *r == region).count()
    }
}

/// Tolerance used to decide whether a finite-lattice eigenvalue sits in a gap.
pub const SPECTRUM_EDGE_TOLERANCE: f64 = 1e-9;

/// Diagonalizes the real-space Hamiltonian for each detuning; every atom is
/// given that detuning.
pub fn spectrum_vs_detuning(
    params: &WaveguideParams,
    atoms: &[GiantAtomSpec],
    detunings: &[f64],
    disorder: Option<&crate::DisorderSpec>,
) -> Result<Vec<SpectrumSlice>> {
    detunings
        .iter()
        .map(|&d| spectrum_at(params, atoms, d, disorder))
        .collect()
}

pub fn spectrum_at(
    params: &WaveguideParams,
    atoms: &[GiantAtomSpec],
    detuning: f64,
    disorder: Option<&crate::DisorderSpec>,
) -> Result<SpectrumSlice> {
    let edges = band_edges(params)?;
    let tuned: Vec<GiantAtomSpec> = atoms.iter().map(|a| a.with_detuning(detuning)).collect();
    let h = crate::lattice::build_real_space_hamiltonian(params, &tuned, disorder)?;
    let values = crate::linalg::symmetric_eigenvalues(h.matrix());
    Ok(SpectrumSlice {
        detuning,
        levels: values
            .into_iter()
            .map(|e| (e, edges.classify(e, SPECTRUM_EDGE_TOLERANCE)))
            .collect(),
    })
}

/// Amplitude vector of a bound state laid out like the real-space basis
/// (photon sites then a single atom).
pub fn as_state_vector(state: &BoundState) -> nalgebra::DVector<C64> {
    let cells = state.a.len();
    nalgebra::DVector::from_fn(2 * cells + 1, |i, _| {
        if i == 2 * cells {
            C64::new(state.atom_amplitude, 0.0)
        } else if i % 2 == 0 {
            state.a[i / 2]
        } else {
            state.b[i / 2]
        }
    })
}

/// Checks `H ψ = E ψ` for a bound state against a real-space Hamiltonian with
/// one atom; returns `max |(H - E) ψ|`.
pub fn eigen_residual(state: &BoundState, hamiltonian: &RealSpaceHamiltonian) -> f64 {
    let psi = as_state_vector(state);
    let h: DMatrix<C64> = crate::linalg::to_complex(hamiltonian.matrix());
    crate::linalg::max_abs(&(h * &psi - psi * C64::new(state.energy, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_real_space_hamiltonian;
    use crate::CouplingNode;
    use alloc::vec;

    fn params(delta: f64, cells: usize) -> WaveguideParams {
        WaveguideParams::new(delta, cells).unwrap()
    }

    fn pair(cell: usize, g_a: f64, g_b: f64, detuning: f64) -> GiantAtomSpec {
        GiantAtomSpec::new(
            detuning,
            vec![CouplingNode::new(cell, Sublattice::A, g_a), CouplingNode::new(cell, Sublattice::B, g_b)],
        )
        .unwrap()
    }

    fn root(roots: &[GapRoot], gap: Gap) -> Result<f64> {
        roots.iter().find(|r| r.gap == gap).unwrap().energy.clone()
    }

    #[test]
    fn self_energy_examples() {
        let topo = params(0.3, 40);
        let small = GiantAtomSpec::small(0.0, 0, Sublattice::A, 0.1).unwrap();
        assert!(self_energy(0.0, &small, &topo).unwrap().abs() < 1e-14);
        assert!(self_energy(0.0, &pair(0, 0.1, 0.1, 0.0), &topo).unwrap().abs() < 1e-12);
        let triv = params(-0.3, 40);
        let s = self_energy(0.0, &pair(0, 0.1, 0.1, 0.0), &triv).unwrap();
        assert!((s + 0.02 / 1.3).abs() < 1e-12, "{s}");
        assert!(matches!(self_energy(1.0, &small, &topo), Err(Error::OutOfGap { .. })));
        assert!(matches!(self_energy(0.6, &small, &topo), Err(Error::OutOfGap { .. })));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = params(0.3, 40);
        let atom = vec![CouplingNode::new(0, Sublattice::A, 0.1), CouplingNode::new(2, Sublattice::B, 0.07)];
        let atom = GiantAtomSpec::new(0.0, atom).unwrap();
        for &e in &[0.2, -0.5, 2.3, -2.05] {
            let h = 1e-5;
            let fd = (self_energy(e + h, &atom, &p).unwrap() - self_energy(e - h, &atom, &p).unwrap()) / (2.0 * h);
            let d = self_energy_derivative(e, &atom, &p).unwrap();
            assert!(d <= 0.0);
            assert!((fd - d).abs() < 1e-6 * d.abs().max(1.0), "E={e}: {fd} vs {d}");
        }
    }

    #[test]
    fn middle_root_at_zero_detuning() {
        let p = params(0.3, 40);
        let roots = solve_bound_energies(&pair(20, 0.1, 0.1, 0.0), &p).unwrap();
        assert!(root(&roots, Gap::Middle).unwrap().abs() < 1e-10);
    }

    #[test]
    fn decoupled_atom_root_is_detuning() {
        let p = params(0.3, 40);
        let roots = solve_bound_energies(&pair(20, 0.0, 0.0, 2.5), &p).unwrap();
        assert!((root(&roots, Gap::Upper).unwrap() - 2.5).abs() < 1e-10);
        assert!(matches!(root(&roots, Gap::Middle), Err(Error::NotBracketed { .. })));
        assert!(matches!(root(&roots, Gap::Lower), Err(Error::NotBracketed { .. })));
    }

    #[test]
    fn upper_root_matches_real_space() {
        let p = params(0.3, 20);
        let atom = GiantAtomSpec::small(2.2, 10, Sublattice::A, 0.1).unwrap();
        let roots = solve_bound_energies(&atom, &p).unwrap();
        let e = root(&roots, Gap::Upper).unwrap();
        assert!(e > 2.2);
        let residual = e - 2.2 - self_energy(e, &atom, &p).unwrap();
        assert!(residual.abs() < 1e-10);
        let h = build_real_space_hamiltonian(&p, &[atom], None).unwrap();
        let rs = bound_state_from_real_space(&h, &p, 0, Gap::Upper).unwrap();
        assert!((rs.energy - e).abs() < 1e-3);
    }

    #[test]
    fn numeric_normalization_matches_self_energy_slope() {
        let p = params(0.3, 100);
        let atom = pair(50, 0.1, 0.05, 0.3);
        let e = root(&solve_bound_energies(&atom, &p).unwrap(), Gap::Middle).unwrap();
        let state = bound_amplitudes_numeric(e, &atom, &p).unwrap();
        let slope = self_energy_derivative(e, &atom, &p).unwrap();
        assert!((state.atom_amplitude.powi(-2) - (1.0 - slope)).abs() < 1e-9);
        assert!((state.norm_sqr() - 1.0).abs() < 1e-9);
        let h = build_real_space_hamiltonian(&p, &[atom], None).unwrap();
        let r = eigen_residual(&state, &h);
        assert!(r < 1e-8, "{r} {e}");
    }

    #[test]
    fn closed_form_matches_numeric() {
        for &delta in &[0.2, -0.2, 0.3, -0.3, 0.5, -0.5] {
            let p = params(delta, 40);
            let atom = pair(20, 0.1, 0.1, 0.0);
            let closed = bound_amplitudes_closed_form_zero_detuning(&atom, &p).unwrap();
            let numeric = bound_amplitudes_numeric(0.0, &atom, &p).unwrap();
            assert!((closed.atom_amplitude - numeric.atom_amplitude).abs() < 1e-12);
            for (c, n) in closed.a.iter().chain(&closed.b).zip(numeric.a.iter().chain(&numeric.b)) {
                if *c == C64::new(0.0, 0.0) {
                    assert!(n.norm() < 1e-10);
                } else {
                    assert!((c - n).norm() / c.norm() < 1e-6, "δ={delta}: {c} vs {n}");
                }
            }
        }
    }

    #[test]
    fn closed_form_entries() {
        let p = params(0.3, 40);
        let s = bound_amplitudes_closed_form_zero_detuning(&pair(20, 0.1, 0.1, 0.0), &p).unwrap();
        assert!((s.a[21].re + 0.1 / 1.3 * s.atom_amplitude).abs() < 1e-15);
        assert_eq!(s.a[20], C64::new(0.0, 0.0));
        assert_eq!(s.b[20], C64::new(0.0, 0.0));
        assert_eq!(s.a[5], C64::new(0.0, 0.0));
        let t = bound_amplitudes_closed_form_zero_detuning(&pair(20, 0.1, 0.1, 0.0), &params(-0.3, 40)).unwrap();
        assert!((t.a[20].re + 0.1 / 1.3 * t.atom_amplitude).abs() < 1e-15);
        assert!((t.b[20].re + 0.1 / 1.3 * t.atom_amplitude).abs() < 1e-15);
        assert!(bound_amplitudes_closed_form_zero_detuning(&pair(20, 0.1, 0.1, 0.1), &p).is_err());
    }

    #[test]
    fn spectrum_counts() {
        let p = params(0.3, 20);
        let atom = pair(10, 0.1, 0.1, 0.0);
        let slice = spectrum_at(&p, &[atom], 0.0, None).unwrap();
        assert_eq!(slice.levels.len(), 41);
        assert_eq!(slice.count_in(SpectralRegion::MiddleGap), 1);
        let mid = slice.levels.iter().find(|l| l.1 == SpectralRegion::MiddleGap).unwrap();
        assert!(mid.0.abs() < 1e-6);
    }
}
