//! Atom–waveguide coupling functions and the effective atom–atom couplings
//! they induce.
//!
//! For an atom with node sums `A(k) = Σ_A g e^{-ik·cell}` and `B(k)` likewise
//! (cells relative to the atom's first node), the upper- and lower-band
//! couplings are
//!
//! ```text
//! p(k) = (A + B e^{iφ}) / √2,    q(k) = (-A + B e^{iφ}) / √2.
//! ```
//!
//! Every coupling is a matrix element of the photonic resolvent,
//! `V_nᵀ (z - H_ph)⁻¹ V_m = ∫ dk/2π [p_n* p_m / (z - ω) + q_n* q_m / (z + ω)] e^{ik x_nm}`,
//! with `x_nm` the separation of the two reference cells. In a gap this is the
//! virtual-photon exchange `J_nm`; just above the real axis inside a band it
//! is `J_nm - iγ_nm`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::lattice::{band_edges, bloch_factor, dispersion_and_phase, Phase, SpectralRegion};
use crate::quadrature::{extrapolate_to_zero, PeriodicQuadrature};
use crate::{Error, GiantAtomSpec, Result, Sublattice, WaveguideParams, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Energies closer than this to a band edge count as on the edge.
pub const EDGE_TOLERANCE: f64 = 1e-10;

/// Node pattern of one atom, with cells measured from its first node.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFunctions {
    reference_cell: usize,
    nodes: Vec<(i64, Sublattice, f64)>,
}

pub fn coupling_functions(atom: &GiantAtomSpec) -> CouplingFunctions {
    let reference_cell = atom.reference_cell();
    let nodes = atom
        .nodes()
        .iter()
        .map(|n| (n.cell as i64 - reference_cell as i64, n.sublattice, n.strength))
        .collect();
    CouplingFunctions { reference_cell, nodes }
}

impl CouplingFunctions {
    pub fn reference_cell(&self) -> usize {
        self.reference_cell
    }

    /// `(A(k), B(k))`.
    pub fn node_sums(&self, k: f64) -> (C64, C64) {
        let mut a = ZERO;
        let mut b = ZERO;
        for &(offset, sub, g) in &self.nodes {
            let term = C64::from_polar(g, -k * offset as f64);
            match sub {
                Sublattice::A => a += term,
                Sublattice::B => b += term,
            }
        }
        (a, b)
    }

    /// `(p(k), q(k))`.
    pub fn evaluate(&self, k: f64, params: &WaveguideParams) -> (C64, C64) {
        let (a, b) = self.node_sums(k);
        let (_, phi) = dispersion_and_phase(k, params);
        let rb = b * C64::from_polar(1.0, phi);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        ((a + rb) * s, (rb - a) * s)
    }

    pub fn p(&self, k: f64, params: &WaveguideParams) -> C64 {
        self.evaluate(k, params).0
    }

    pub fn q(&self, k: f64, params: &WaveguideParams) -> C64 {
        self.evaluate(k, params).1
    }

    pub fn max_strength(&self) -> f64 {
        self.nodes.iter().map(|n| n.2).fold(0.0, f64::max)
    }
}

/// Reference-cell separation `x_nm = cell_n - cell_m`.
pub fn separation(n: &CouplingFunctions, m: &CouplingFunctions) -> i64 {
    n.reference_cell as i64 - m.reference_cell as i64
}

/// Resolvent numerator `z(A_n*A_m + B_n*B_m) + A_n* f B_m + B_n* f* A_m`
/// times `e^{ik x_nm}`; the kernel is this over `z² - ω²`.
pub(crate) fn resolvent_numerator(
    n: &CouplingFunctions,
    m: &CouplingFunctions,
    z: C64,
    k: f64,
    params: &WaveguideParams,
) -> C64 {
    let (an, bn) = n.node_sums(k);
    let (am, bm) = m.node_sums(k);
    let f = bloch_factor(k, params);
    let x = separation(n, m) as f64;
    let core = z * (an.conj() * am + bn.conj() * bm) + an.conj() * f * bm + bn.conj() * f.conj() * am;
    core * C64::from_polar(1.0, k * x)
}

/// `(A_n*A_m + B_n*B_m) e^{ik x_nm}`, the `z`-derivative of the numerator.
pub(crate) fn resolvent_numerator_slope(n: &CouplingFunctions, m: &CouplingFunctions, k: f64) -> C64 {
    let (an, bn) = n.node_sums(k);
    let (am, bm) = m.node_sums(k);
    (an.conj() * am + bn.conj() * bm) * C64::from_polar(1.0, k * separation(n, m) as f64)
}

/// Quadrature tuned to a real energy in a gap: clustered at `k = 0` for the
/// outer gaps and `k = π` for the middle gap.
pub(crate) fn gap_quadrature(energy: f64, params: &WaveguideParams) -> Result<PeriodicQuadrature> {
    let edges = band_edges(params)?;
    let region = edges.classify(energy, EDGE_TOLERANCE);
    let distance = edges.distance(energy);
    let center = match region {
        SpectralRegion::MiddleGap => PI,
        SpectralRegion::BelowLowerBand | SpectralRegion::AboveUpperBand => 0.0,
        _ => {
            return Err(if distance <= EDGE_TOLERANCE {
                Error::BandEdge { detuning: energy }
            } else {
                Error::OutOfGap { energy, distance }
            })
        }
    };
    Ok(PeriodicQuadrature::new().near_feature(center, distance))
}

/// Resolvent element between two atoms at a real energy inside a gap.
pub fn gap_resolvent(
    n: &CouplingFunctions,
    m: &CouplingFunctions,
    energy: f64,
    params: &WaveguideParams,
) -> Result<C64> {
    let quad = gap_quadrature(energy, params)?;
    let z = C64::new(energy, 0.0);
    quad.integrate(|k| {
        let (w, _) = dispersion_and_phase(k, params);
        resolvent_numerator(n, m, z, k, params) / (energy * energy - w * w)
    })
}

/// Bandgap-regime dipole coupling `J_nm` by Brillouin-zone quadrature.
/// Rejects detunings inside a band (regime error) or on an edge.
pub fn sw_coupling_integral(
    atom_n: &GiantAtomSpec,
    atom_m: &GiantAtomSpec,
    detuning: f64,
    params: &WaveguideParams,
) -> Result<C64> {
    let edges = band_edges(params)?;
    if edges.distance(detuning) <= EDGE_TOLERANCE {
        return Err(Error::BandEdge { detuning });
    }
    if !edges.classify(detuning, EDGE_TOLERANCE).is_gap() {
        return Err(Error::Regime {
            detuning,
            expected: "a bandgap (use the Markov couplings inside a band)",
        });
    }
    gap_resolvent(&coupling_functions(atom_n), &coupling_functions(atom_m), detuning, params)
}

/// Closed form of `J_nm` at zero detuning for two atoms that each couple to
/// the A and B site of a single cell (`g_a` on A, `g_b` on B), `x` cells apart.
pub fn sw_coupling_closed_form(x: i64, params: &WaveguideParams, g_a: f64, g_b: f64) -> Result<f64> {
    let (j1, j2) = (params.j1(), params.j2());
    let d = x.unsigned_abs() as i32;
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    match params.phase() {
        Phase::Gapless => Err(Error::Gapless),
        Phase::Topological if d == 0 => Ok(0.0),
        Phase::Topological => Ok(g_a * g_b * sign / j1 * (j1 / j2).powi(d)),
        Phase::Trivial if d == 0 => Ok(-2.0 * g_a * g_b / j1),
        Phase::Trivial => Ok(-g_a * g_b * sign / j1 * (j2 / j1).powi(d)),
    }
}

/// Coherent and dissipative parts of a band-regime coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovCoupling {
    pub coherent: C64,
    pub dissipative: C64,
}

impl MarkovCoupling {
    /// `Γ_nm = γ_nm + i J_nm`.
    pub fn rate(&self) -> C64 {
        self.dissipative + C64::new(0.0, 1.0) * self.coherent
    }
}

/// Resonant momentum `k₀ ∈ (0, π)` with `ω(k₀) = |Δ|`, and `|v_g(k₀)|`.
pub fn resonant_momentum(detuning: f64, params: &WaveguideParams) -> Result<(f64, f64)> {
    let edges = band_edges(params)?;
    if edges.distance(detuning) <= EDGE_TOLERANCE {
        return Err(Error::BandEdge { detuning });
    }
    match edges.classify(detuning, EDGE_TOLERANCE) {
        SpectralRegion::LowerBand | SpectralRegion::UpperBand => {}
        _ => {
            return Err(Error::Regime {
                detuning,
                expected: "inside a band (use the bandgap couplings in a gap)",
            })
        }
    }
    let (j1, j2) = (params.j1(), params.j2());
    let c0 = (detuning * detuning - j1 * j1 - j2 * j2) / (2.0 * j1 * j2);
    let k0 = c0.clamp(-1.0, 1.0).acos();
    let speed = j1 * j2 * k0.sin() / detuning.abs();
    Ok((k0, speed))
}

/// Band-regime coupling: `γ` from the two resonant momenta, `J` as a
/// principal-value integral with the pole subtracted analytically.
pub fn markov_gamma(
    atom_n: &GiantAtomSpec,
    atom_m: &GiantAtomSpec,
    detuning: f64,
    params: &WaveguideParams,
) -> Result<MarkovCoupling> {
    let n = coupling_functions(atom_n);
    let m = coupling_functions(atom_m);
    markov_from_functions(&n, &m, detuning, params)
}

pub(crate) fn markov_from_functions(
    n: &CouplingFunctions,
    m: &CouplingFunctions,
    detuning: f64,
    params: &WaveguideParams,
) -> Result<MarkovCoupling> {
    let (k0, speed) = resonant_momentum(detuning, params)?;
    let x = separation(n, m) as f64;
    let upper = detuning > 0.0;
    let mut dissipative = ZERO;
    for k in [k0, -k0] {
        let (pn, qn) = n.evaluate(k, params);
        let (pm, qm) = m.evaluate(k, params);
        let prod = if upper { pn.conj() * pm } else { qn.conj() * qm };
        dissipative += prod * C64::from_polar(1.0, k * x) / (2.0 * speed);
    }

    // Δ² - ω² = 2 J1 J2 (c0 - cos k); subtract the numerator's interpolant
    // α + β sin k through ±k₀, whose principal value over the zone vanishes.
    let (j1, j2) = (params.j1(), params.j2());
    let z = C64::new(detuning, 0.0);
    let scale = 2.0 * j1 * j2;
    let c0 = k0.cos();
    let at = |k: f64| resolvent_numerator(n, m, z, k, params);
    let (fp, fm) = (at(k0), at(-k0));
    let alpha = (fp + fm) * 0.5;
    let beta = (fp - fm) / (2.0 * k0.sin());
    let regular = |k: f64| (at(k) - alpha - beta * k.sin()) / (scale * (c0 - k.cos()));
    let coherent = PeriodicQuadrature::new().integrate(|k| {
        if (c0 - k.cos()).abs() < 1e-8 {
            let h = 1e-4;
            (regular(k + h) + regular(k - h)) * 0.5
        } else {
            regular(k)
        }
    })?;
    Ok(MarkovCoupling {
        coherent,
        dissipative,
    })
}

/// Default regularization ladder for [`markov_gamma_eta_sweep`], scaled so the
/// largest `η` stays a quarter of the distance to the nearest edge.
pub fn default_etas(detuning: f64, params: &WaveguideParams) -> Result<Vec<f64>> {
    let distance = band_edges(params)?.distance(detuning);
    let top = (distance / 4.0).min(0.04);
    Ok((0..4).map(|i| top / (1u32 << i) as f64).collect())
}

/// `Γ_nm` from direct quadrature of the `η`-broadened integrand
/// `i ∫ [p_n* p_m / (Δ + iη - ω) + q_n* q_m / (Δ + iη + ω)] e^{ik x_nm}`,
/// extrapolated to `η = 0`. Independent of [`markov_gamma`].
pub fn markov_gamma_eta_sweep(
    atom_n: &GiantAtomSpec,
    atom_m: &GiantAtomSpec,
    detuning: f64,
    params: &WaveguideParams,
    etas: &[f64],
) -> Result<C64> {
    if etas.is_empty() || etas.iter().any(|&e| !(e > 0.0)) || etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("etas", "regularizations must be positive and strictly decreasing"));
    }
    params.require_gap()?;
    let n = coupling_functions(atom_n);
    let m = coupling_functions(atom_m);
    let x = separation(&n, &m) as f64;
    let vmax = crate::lattice::max_group_velocity(params);
    let mut values = Vec::with_capacity(etas.len());
    for &eta in etas {
        let z = C64::new(detuning, eta);
        let mut quad = PeriodicQuadrature::new().with_tolerance(1e-11);
        // the Lorentzians have width η/|v_g|; start resolved
        let needed = (40.0 * 2.0 * PI * vmax / eta) as usize;
        while quad.initial_points < needed {
            quad.initial_points *= 2;
        }
        let gamma = quad.integrate(|k| {
            let (w, _) = dispersion_and_phase(k, params);
            let (pn, qn) = n.evaluate(k, params);
            let (pm, qm) = m.evaluate(k, params);
            let phase = C64::from_polar(1.0, k * x);
            C64::new(0.0, 1.0) * (pn.conj() * pm / (z - w) + qn.conj() * qm / (z + w)) * phase
        })?;
        values.push(gamma);
    }
    let (value, spread) = extrapolate_to_zero(etas, &values);
    if spread > 1e-4 {
        return Err(Error::Extrapolation { spread });
    }
    Ok(value)
}

/// Largest node strength over the distance from `Δ` to the closest band edge.
/// Values below about 0.25 are where the perturbative couplings are reliable.
pub fn validity_margin(atom: &GiantAtomSpec, detuning: f64, params: &WaveguideParams) -> Result<f64> {
    let distance = band_edges(params)?.distance(detuning);
    let g = atom.max_strength();
    if g == 0.0 {
        return Ok(0.0);
    }
    if distance <= EDGE_TOLERANCE {
        return Ok(f64::INFINITY);
    }
    Ok(g / distance)
}

/// Which approximation produced a set of couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Bandgap,
    Band,
}

/// `M × M` coherent and dissipative couplings at a common detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCouplings {
    pub regime: Regime,
    pub detuning: f64,
    pub coherent: DMatrix<C64>,
    pub dissipative: DMatrix<C64>,
}

impl EffectiveCouplings {
    pub fn atoms(&self) -> usize {
        self.coherent.nrows()
    }

    /// `Γ = γ + iJ`.
    pub fn rates(&self) -> DMatrix<C64> {
        &self.dissipative + self.coherent.map(|j| C64::new(0.0, 1.0) * j)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::hermiticity_defect(&self.coherent).max(crate::linalg::hermiticity_defect(&self.dissipative))
    }
}

fn pairwise<F>(atoms: &[GiantAtomSpec], mut entry: F) -> Result<(DMatrix<C64>, DMatrix<C64>)>
where
    F: FnMut(&CouplingFunctions, &CouplingFunctions) -> Result<(C64, C64)>,
{
    let funcs: Vec<CouplingFunctions> = atoms.iter().map(coupling_functions).collect();
    let size = atoms.len();
    let mut coherent = DMatrix::from_element(size, size, ZERO);
    let mut dissipative = DMatrix::from_element(size, size, ZERO);
    for i in 0..size {
        for j in i..size {
            let (c, d) = entry(&funcs[i], &funcs[j])?;
            if i == j {
                coherent[(i, i)] = C64::new(c.re, 0.0);
                dissipative[(i, i)] = C64::new(d.re, 0.0);
            } else {
                coherent[(i, j)] = c;
                coherent[(j, i)] = c.conj();
                dissipative[(i, j)] = d;
                dissipative[(j, i)] = d.conj();
            }
        }
    }
    Ok((coherent, dissipative))
}

/// Virtual-photon couplings for atoms sharing detuning `Δ` inside a gap.
pub fn bandgap_couplings(
    atoms: &[GiantAtomSpec],
    detuning: f64,
    params: &WaveguideParams,
) -> Result<EffectiveCouplings> {
    let edges = band_edges(params)?;
    if !edges.classify(detuning, EDGE_TOLERANCE).is_gap() {
        return Err(Error::Regime {
            detuning,
            expected: "a bandgap",
        });
    }
    let (coherent, dissipative) = pairwise(atoms, |n, m| Ok((gap_resolvent(n, m, detuning, params)?, ZERO)))?;
    Ok(EffectiveCouplings {
        regime: Regime::Bandgap,
        detuning,
        coherent,
        dissipative,
    })
}

/// Markovian couplings for atoms sharing detuning `Δ` inside a band.
pub fn band_couplings(atoms: &[GiantAtomSpec], detuning: f64, params: &WaveguideParams) -> Result<EffectiveCouplings> {
    let (coherent, dissipative) = pairwise(atoms, |n, m| {
        let c = markov_from_functions(n, m, detuning, params)?;
        Ok((c.coherent, c.dissipative))
    })?;
    Ok(EffectiveCouplings {
        regime: Regime::Band,
        detuning,
        coherent,
        dissipative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_real_space_hamiltonian, group_velocity};
    use crate::CouplingNode;
    use alloc::vec;
    use nalgebra::DVector;

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

    fn nodes(detuning: f64, list: &[(usize, Sublattice, f64)]) -> GiantAtomSpec {
        GiantAtomSpec::new(detuning, list.iter().map(|&(c, s, g)| CouplingNode::new(c, s, g)).collect()).unwrap()
    }

    #[test]
    fn small_atom_couples_equally_to_both_bands() {
        let p = params(0.3, 10);
        let f = coupling_functions(&GiantAtomSpec::small(0.0, 3, Sublattice::A, 0.1).unwrap());
        for i in 0..50 {
            let k = -PI + 0.13 * i as f64;
            let (pk, qk) = f.evaluate(k, &p);
            assert!((pk.norm_sqr() - 0.005).abs() < 1e-15);
            assert!((qk.norm_sqr() - 0.005).abs() < 1e-15);
        }
    }

    #[test]
    fn same_cell_pair_band_imbalance() {
        let p = params(0.3, 10);
        let g = 0.1;
        let f = coupling_functions(&pair(0, g, g, 0.0));
        for i in 0..100 {
            let k = -PI + 2.0 * PI * (i as f64 + 0.5) / 100.0;
            let (pk, qk) = f.evaluate(k, &p);
            let (_, phi) = dispersion_and_phase(k, &p);
            assert!((pk.norm_sqr() - qk.norm_sqr() - 2.0 * g * g * phi.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_a_nodes_at_zone_center() {
        let p = params(0.3, 10);
        let f = coupling_functions(&nodes(0.0, &[(0, Sublattice::A, 0.1), (2, Sublattice::A, 0.05)]));
        assert!((f.p(0.0, &p).norm_sqr() - 0.15f64.powi(2) / 2.0).abs() < 1e-15);
    }

    /// Real-space oracle: `V_nᵀ (Δ - H_ph)⁻¹ V_m` on a ring long enough that
    /// wraparound is negligible.
    fn real_space_resolvent(n: &GiantAtomSpec, m: &GiantAtomSpec, detuning: f64, p: &WaveguideParams) -> f64 {
        let h = build_real_space_hamiltonian(p, &[n.clone(), m.clone()], None).unwrap();
        let dim = h.photon_sites();
        let lhs = DMatrix::<f64>::identity(dim, dim) * detuning - h.photon_block();
        let v = h.coupling_block();
        let solved = lhs.lu().solve(&DVector::from_column_slice(v.column(1).as_slice())).unwrap();
        v.column(0).dot(&solved)
    }

    #[test]
    fn closed_form_matches_quadrature_and_real_space() {
        let g = 0.1;
        for &delta in &[0.2, -0.2, 0.3, -0.3, 0.5, -0.5] {
            let p = params(delta, 80);
            for x in -4i64..=4 {
                let n = pair((40 + x) as usize, g, g, 0.0);
                let m = pair(40, g, g, 0.0);
                let integral = sw_coupling_integral(&n, &m, 0.0, &p).unwrap();
                let closed = sw_coupling_closed_form(x, &p, g, g).unwrap();
                assert!((integral.re - closed).abs() < 1e-8, "δ={delta} x={x}");
                assert!(integral.im.abs() < 1e-12);
                if x != 0 {
                    let oracle = real_space_resolvent(&n, &m, 0.0, &p);
                    assert!((oracle - closed).abs() < 1e-10, "δ={delta} x={x}: {oracle} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let topo = params(0.3, 10);
        assert!((sw_coupling_closed_form(1, &topo, 0.1, 0.1).unwrap() + 0.01 / 1.3).abs() < 1e-15);
        assert_eq!(sw_coupling_closed_form(0, &topo, 0.1, 0.1).unwrap(), 0.0);
        let triv = params(-0.3, 10);
        let expected = 0.01 / 1.3 * (0.7 / 1.3);
        assert!((sw_coupling_closed_form(1, &triv, 0.1, 0.1).unwrap() - expected).abs() < 1e-15);
        let x2 = sw_coupling_closed_form(2, &params(0.2, 10), 0.1, 0.1).unwrap();
        assert!((x2 - 0.01 / 0.8 * (0.8f64 / 1.2).powi(2)).abs() < 1e-15);
        assert_eq!(sw_coupling_closed_form(1, &params(0.0, 10), 0.1, 0.1), Err(Error::Gapless));
    }

    #[test]
    fn gap_couplings_for_general_node_sets_match_real_space() {
        let p = params(0.3, 80);
        let n = nodes(0.0, &[(38, Sublattice::B, 0.1), (41, Sublattice::A, 0.07)]);
        let m = nodes(0.0, &[(40, Sublattice::A, 0.05), (42, Sublattice::B, 0.1)]);
        for &det in &[0.1, -0.35, 2.3, -2.6] {
            let integral = sw_coupling_integral(&n, &m, det, &p).unwrap();
            let oracle = real_space_resolvent(&n, &m, det, &p);
            assert!((integral.re - oracle).abs() < 1e-10, "Δ={det}");
            assert!(integral.im.abs() < 1e-12);
        }
    }

    #[test]
    fn regime_errors() {
        let p = params(0.3, 20);
        let a = pair(5, 0.1, 0.1, 0.0);
        assert!(matches!(sw_coupling_integral(&a, &a, 1.0, &p), Err(Error::Regime { .. })));
        assert!(matches!(sw_coupling_integral(&a, &a, 0.6, &p), Err(Error::BandEdge { .. })));
        assert!(matches!(markov_gamma(&a, &a, 0.0, &p), Err(Error::Regime { .. })));
        assert!(matches!(markov_gamma(&a, &a, 2.0, &p), Err(Error::BandEdge { .. })));
    }

    #[test]
    fn small_atom_residue_matches_group_velocity() {
        let p = params(0.3, 20);
        let atom = GiantAtomSpec::small(1.5, 0, Sublattice::A, 0.1).unwrap();
        let c = markov_gamma(&atom, &atom, 1.5, &p).unwrap();
        let (k0, speed) = resonant_momentum(1.5, &p).unwrap();
        assert!((dispersion_and_phase(k0, &p).0 - 1.5).abs() < 1e-12);
        assert!((group_velocity(k0, &p).unwrap().abs() - speed).abs() < 1e-12);
        assert!((c.dissipative.re - 0.01 / (2.0 * speed)).abs() < 1e-14);
    }

    #[test]
    fn residue_matches_eta_sweep_small_atom() {
        let p = params(0.3, 20);
        let atom = GiantAtomSpec::small(1.5, 0, Sublattice::A, 0.1).unwrap();
        let residue = markov_gamma(&atom, &atom, 1.5, &p).unwrap().rate();
        let etas = default_etas(1.5, &p).unwrap();
        let sweep = markov_gamma_eta_sweep(&atom, &atom, 1.5, &p, &etas).unwrap();
        assert!((residue - sweep).norm() < 1e-4, "{residue} vs {sweep}");
    }

    #[test]
    fn residue_matches_eta_sweep_cross_terms() {
        let p = params(0.2, 20);
        let n = nodes(0.0, &[(2, Sublattice::B, 0.1), (4, Sublattice::A, 0.1)]);
        let m = nodes(0.0, &[(5, Sublattice::B, 0.1), (8, Sublattice::A, 0.1)]);
        for &det in &[1.3, 1.7, -1.5] {
            let residue = markov_gamma(&n, &m, det, &p).unwrap().rate();
            let sweep = markov_gamma_eta_sweep(&n, &m, det, &p, &default_etas(det, &p).unwrap()).unwrap();
            assert!((residue - sweep).norm() < 1e-4, "Δ={det}: {residue} vs {sweep}");
            let back = markov_gamma(&m, &n, det, &p).unwrap();
            let fwd = markov_gamma(&n, &m, det, &p).unwrap();
            assert!((back.coherent - fwd.coherent.conj()).norm() < 1e-12);
            assert!((back.dissipative - fwd.dissipative.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn eta_sweep_in_gap_has_no_dissipation() {
        let p = params(0.3, 20);
        let atom = pair(0, 0.1, 0.1, 0.0);
        let g = markov_gamma_eta_sweep(&atom, &atom, 0.0, &p, &default_etas(0.0, &p).unwrap()).unwrap();
        assert!(g.re.abs() < 1e-6);
    }

    #[test]
    fn interference_zero_one_cell_apart() {
        let p = params(0.2, 20);
        let atom = nodes(1.2, &[(0, Sublattice::A, 0.1), (1, Sublattice::B, 0.1)]);
        let c = markov_gamma(&atom, &atom, 1.2, &p).unwrap();
        assert!(c.dissipative.re.abs() < 1e-12);
        let (k0, _) = resonant_momentum(1.2, &p).unwrap();
        assert!(coupling_functions(&atom).p(k0, &p).norm() < 1e-6);
    }

    #[test]
    fn validity_margin_examples() {
        let p = params(0.3, 20);
        let atom = pair(0, 0.1, 0.1, 0.0);
        assert!((validity_margin(&atom, 0.0, &p).unwrap() - 0.1 / 0.6).abs() < 1e-15);
        assert_eq!(validity_margin(&pair(0, 0.0, 0.0, 0.0), 0.0, &p).unwrap(), 0.0);
        assert_eq!(validity_margin(&atom, 0.6, &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn effective_matrices_are_hermitian() {
        let p = params(0.2, 30);
        let atoms = [
            nodes(0.0, &[(2, Sublattice::B, 0.1), (4, Sublattice::A, 0.1)]),
            nodes(0.0, &[(5, Sublattice::A, 0.08), (8, Sublattice::A, 0.1)]),
            GiantAtomSpec::small(0.0, 12, Sublattice::B, 0.1).unwrap(),
        ];
        let gap = bandgap_couplings(&atoms, 0.05, &p).unwrap();
        assert!(gap.hermiticity_defect() < 1e-12);
        let band = band_couplings(&atoms, 1.5, &p).unwrap();
        assert!(band.hermiticity_defect() < 1e-12);
        let eig = crate::linalg::hermitian_eigen(&band.dissipative).0;
        assert!(eig[0] > -1e-12);
    }
}
