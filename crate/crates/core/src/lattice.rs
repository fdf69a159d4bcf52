//! The SSH waveguide: Bloch bands, band edges, hopping disorder, and the
//! real-space single-excitation Hamiltonian with giant atoms attached.
//!
//! Cell `j` holds sites `A_j` and `B_j`. The intra-cell bond `A_j–B_j` has
//! hopping `J1 = 1 - δ` and the inter-cell bond `B_j–A_{j+1}` has `J2 = 1 + δ`,
//! with the ring closed by `B_{N-1}–A_0`. In momentum space the photonic block
//! is `[[0, f], [f*, 0]]` with `f(k) = J1 + J2 e^{-ik} = ω(k) e^{iφ(k)}`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, C64};

/// Gap-dependent operations treat |δ| below this as gapless.
const GAPLESS_DELTA: f64 = 1e-12;

/// Dimerized waveguide on a ring of `cells` unit cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideParams {
    delta: f64,
    cells: usize,
}

/// Topological character of the dimerization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `J1 < J2`.
    Topological,
    /// `J1 > J2`.
    Trivial,
    Gapless,
}

impl WaveguideParams {
    pub fn new(delta: f64, cells: usize) -> Result<Self> {
        if !delta.is_finite() || delta.abs() >= 1.0 {
            return Err(Error::invalid(
                "delta",
                format!("|delta| must be < 1 so both hoppings stay positive, got {delta}"),
            ));
        }
        if cells == 0 {
            return Err(Error::invalid("cells", "at least one unit cell is required"));
        }
        Ok(Self { delta, cells })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Intra-cell hopping `J1 = 1 - δ`.
    pub fn j1(&self) -> f64 {
        1.0 - self.delta
    }

    /// Inter-cell hopping `J2 = 1 + δ`.
    pub fn j2(&self) -> f64 {
        1.0 + self.delta
    }

    pub fn phase(&self) -> Phase {
        if self.delta.abs() < GAPLESS_DELTA {
            Phase::Gapless
        } else if self.delta > 0.0 {
            Phase::Topological
        } else {
            Phase::Trivial
        }
    }

    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        Self::new(self.delta, cells)
    }

    pub(crate) fn require_gap(&self) -> Result<()> {
        match self.phase() {
            Phase::Gapless => Err(Error::Gapless),
            _ => Ok(()),
        }
    }
}

/// `f(k) = J1 + J2 e^{-ik}`.
pub fn bloch_factor(k: f64, params: &WaveguideParams) -> C64 {
    C64::new(params.j1(), 0.0) + C64::from_polar(params.j2(), -k)
}

/// `ω(k) = |f(k)|` and the phase `φ` with `ω e^{iφ} = f(k)` exactly.
pub fn dispersion_and_phase(k: f64, params: &WaveguideParams) -> (f64, f64) {
    let (j1, j2) = (params.j1(), params.j2());
    let omega = (j1 * j1 + j2 * j2 + 2.0 * j1 * j2 * k.cos()).max(0.0).sqrt();
    let phi = -(j2 * k.sin()).atan2(j1 + j2 * k.cos());
    (omega, phi)
}

pub fn dispersion(k: f64, params: &WaveguideParams) -> f64 {
    dispersion_and_phase(k, params).0
}

/// `v_g = ∂ω/∂k = -J1 J2 sin k / ω(k)`.
pub fn group_velocity(k: f64, params: &WaveguideParams) -> Result<f64> {
    let omega = dispersion(k, params);
    if omega < 1e-300 {
        return Err(Error::SingularPoint { k });
    }
    Ok(-params.j1() * params.j2() * k.sin() / omega)
}

/// Largest |v_g| over the zone, `min(J1, J2)`.
pub fn max_group_velocity(params: &WaveguideParams) -> f64 {
    params.j1().min(params.j2())
}

/// The four band edges `{-(J1+J2), -|J1-J2|, |J1-J2|, J1+J2}` in ascending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEdges {
    edges: [f64; 4],
}

/// Location of an energy relative to the two bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectralRegion {
    BelowLowerBand,
    LowerBand,
    MiddleGap,
    UpperBand,
    AboveUpperBand,
}

/// One of the three spectral gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gap {
    Lower,
    Middle,
    Upper,
}

impl Gap {
    pub const ALL: [Gap; 3] = [Gap::Lower, Gap::Middle, Gap::Upper];

    pub fn name(&self) -> &'static str {
        match self {
            Gap::Lower => "lower",
            Gap::Middle => "middle",
            Gap::Upper => "upper",
        }
    }

    pub fn region(&self) -> SpectralRegion {
        match self {
            Gap::Lower => SpectralRegion::BelowLowerBand,
            Gap::Middle => SpectralRegion::MiddleGap,
            Gap::Upper => SpectralRegion::AboveUpperBand,
        }
    }
}

impl SpectralRegion {
    pub fn gap(&self) -> Option<Gap> {
        match self {
            SpectralRegion::BelowLowerBand => Some(Gap::Lower),
            SpectralRegion::MiddleGap => Some(Gap::Middle),
            SpectralRegion::AboveUpperBand => Some(Gap::Upper),
            _ => None,
        }
    }

    pub fn is_gap(&self) -> bool {
        self.gap().is_some()
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectralRegion::BelowLowerBand => "below-lower-band",
            SpectralRegion::LowerBand => "lower-band",
            SpectralRegion::MiddleGap => "middle-gap",
            SpectralRegion::UpperBand => "upper-band",
            SpectralRegion::AboveUpperBand => "above-upper-band",
        }
    }
}

impl BandEdges {
    pub fn as_array(&self) -> [f64; 4] {
        self.edges
    }

    /// Outer edge `J1 + J2`.
    pub fn outer(&self) -> f64 {
        self.edges[3]
    }

    /// Inner edge `|J1 - J2|`.
    pub fn inner(&self) -> f64 {
        self.edges[2]
    }

    /// Distance from `e` to the closest of the four edges.
    pub fn distance(&self, e: f64) -> f64 {
        self.edges
            .iter()
            .map(|edge| (e - edge).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Classifies `e`; energies within `tol` of an edge count as in-band.
    pub fn classify(&self, e: f64, tol: f64) -> SpectralRegion {
        let [e0, e1, e2, e3] = self.edges;
        if e < e0 - tol {
            SpectralRegion::BelowLowerBand
        } else if e <= e1 + tol {
            SpectralRegion::LowerBand
        } else if e < e2 - tol {
            SpectralRegion::MiddleGap
        } else if e <= e3 + tol {
            SpectralRegion::UpperBand
        } else {
            SpectralRegion::AboveUpperBand
        }
    }

    /// Open interval of a gap; the outer gaps are unbounded on one side.
    pub fn gap_interval(&self, gap: Gap) -> (f64, f64) {
        let [e0, e1, e2, e3] = self.edges;
        match gap {
            Gap::Lower => (f64::NEG_INFINITY, e0),
            Gap::Middle => (e1, e2),
            Gap::Upper => (e3, f64::INFINITY),
        }
    }
}

pub fn band_edges(params: &WaveguideParams) -> Result<BandEdges> {
    params.require_gap()?;
    let outer = params.j1() + params.j2();
    let inner = (params.j1() - params.j2()).abs();
    Ok(BandEdges {
        edges: [-outer, -inner, inner, outer],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn offset(&self) -> usize {
        match self {
            Sublattice::A => 0,
            Sublattice::B => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Sublattice::A => "A",
            Sublattice::B => "B",
        }
    }
}

/// One point where an emitter touches the waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingNode {
    pub cell: usize,
    pub sublattice: Sublattice,
    pub strength: f64,
}

impl CouplingNode {
    pub fn new(cell: usize, sublattice: Sublattice, strength: f64) -> Self {
        Self {
            cell,
            sublattice,
            strength,
        }
    }
}

/// An emitter with detuning `Δ` and one or more coupling nodes.
/// A single node is an ordinary (small) atom.
#[derive(Debug, Clone, PartialEq)]
pub struct GiantAtomSpec {
    detuning: f64,
    nodes: Vec<CouplingNode>,
}

impl GiantAtomSpec {
    pub fn new(detuning: f64, nodes: Vec<CouplingNode>) -> Result<Self> {
        if !detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if nodes.is_empty() {
            return Err(Error::invalid("nodes", "an atom needs at least one coupling node"));
        }
        if nodes.windows(2).any(|w| w[1].cell < w[0].cell) {
            return Err(Error::invalid("nodes", "node cells must be sorted ascending"));
        }
        for node in &nodes {
            if !(node.strength >= 0.0) || !node.strength.is_finite() {
                return Err(Error::invalid(
                    "strength",
                    format!("node strengths must be finite and >= 0, got {}", node.strength),
                ));
            }
        }
        for (i, a) in nodes.iter().enumerate() {
            if nodes[i + 1..]
                .iter()
                .any(|b| b.cell == a.cell && b.sublattice == a.sublattice)
            {
                return Err(Error::invalid(
                    "nodes",
                    format!("duplicate node at cell {} sublattice {}", a.cell, a.sublattice.label()),
                ));
            }
        }
        Ok(Self { detuning, nodes })
    }

    /// Single-node atom.
    pub fn small(detuning: f64, cell: usize, sublattice: Sublattice, strength: f64) -> Result<Self> {
        Self::new(detuning, alloc::vec![CouplingNode::new(cell, sublattice, strength)])
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn nodes(&self) -> &[CouplingNode] {
        &self.nodes
    }

    /// Cell of the first node; phases of the coupling functions are measured from here.
    pub fn reference_cell(&self) -> usize {
        self.nodes[0].cell
    }

    pub fn max_strength(&self) -> f64 {
        self.nodes.iter().map(|n| n.strength).fold(0.0, f64::max)
    }

    pub fn with_detuning(&self, detuning: f64) -> Self {
        Self {
            detuning,
            nodes: self.nodes.clone(),
        }
    }

    /// The same node pattern moved by `shift` cells.
    pub fn translated(&self, shift: usize) -> Self {
        Self {
            detuning: self.detuning,
            nodes: self
                .nodes
                .iter()
                .map(|n| CouplingNode::new(n.cell + shift, n.sublattice, n.strength))
                .collect(),
        }
    }

    pub(crate) fn check_within(&self, params: &WaveguideParams) -> Result<()> {
        match self.nodes.iter().find(|n| n.cell >= params.cells()) {
            Some(n) => Err(Error::invalid(
                "cell",
                format!("node cell {} outside lattice of {} cells", n.cell, params.cells()),
            )),
            None => Ok(()),
        }
    }
}

/// Off-diagonal disorder: each hopping is multiplied by `1 + ξ`, `ξ ~ U[-ε, ε]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderSpec {
    pub strength: f64,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(strength: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&strength) {
            return Err(Error::invalid(
                "disorder strength",
                format!("must lie in [0, 1), got {strength}"),
            ));
        }
        Ok(Self { strength, seed })
    }
}

/// Per-bond hoppings. `intra[j]` joins `A_j–B_j`, `inter[j]` joins `B_j–A_{j+1 mod N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hoppings {
    pub intra: Vec<f64>,
    pub inter: Vec<f64>,
}

impl Hoppings {
    pub fn clean(params: &WaveguideParams) -> Self {
        Self {
            intra: alloc::vec![params.j1(); params.cells()],
            inter: alloc::vec![params.j2(); params.cells()],
        }
    }
}

/// Draws one disorder realization. The stream is ChaCha8 seeded by `spec.seed`;
/// draws alternate intra, inter for each cell in order.
pub fn sample_disorder(params: &WaveguideParams, spec: &DisorderSpec) -> Hoppings {
    let mut hoppings = Hoppings::clean(params);
    if spec.strength == 0.0 {
        return hoppings;
    }
    let eps = spec.strength;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for j in 0..params.cells() {
        hoppings.intra[j] *= 1.0 + rng.random_range(-eps..=eps);
        hoppings.inter[j] *= 1.0 + rng.random_range(-eps..=eps);
    }
    hoppings
}

/// Dense single-excitation Hamiltonian: `2N` photon sites (`A_j` at `2j`,
/// `B_j` at `2j+1`) followed by `M` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSpaceHamiltonian {
    cells: usize,
    atoms: usize,
    matrix: DMatrix<f64>,
}

impl RealSpaceHamiltonian {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn atom_count(&self) -> usize {
        self.atoms
    }

    pub fn photon_sites(&self) -> usize {
        2 * self.cells
    }

    pub fn dimension(&self) -> usize {
        2 * self.cells + self.atoms
    }

    pub fn site_index(&self, cell: usize, sublattice: Sublattice) -> usize {
        2 * cell + sublattice.offset()
    }

    /// Inverse of [`Self::site_index`].
    pub fn site_of(&self, index: usize) -> Option<(usize, Sublattice)> {
        if index >= self.photon_sites() {
            return None;
        }
        let sub = if index % 2 == 0 { Sublattice::A } else { Sublattice::B };
        Some((index / 2, sub))
    }

    pub fn atom_index(&self, atom: usize) -> usize {
        2 * self.cells + atom
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The `2N × 2N` photonic block.
    pub fn photon_block(&self) -> DMatrix<f64> {
        let n = self.photon_sites();
        self.matrix.view((0, 0), (n, n)).into_owned()
    }

    /// Atom–photon couplings, one column per atom.
    pub fn coupling_block(&self) -> DMatrix<f64> {
        let n = self.photon_sites();
        self.matrix.view((0, n), (n, self.atoms)).into_owned()
    }

    /// `max |H - Hᵀ|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dimension();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }
}

pub fn build_real_space_hamiltonian(
    params: &WaveguideParams,
    atoms: &[GiantAtomSpec],
    disorder: Option<&DisorderSpec>,
) -> Result<RealSpaceHamiltonian> {
    let hoppings = match disorder {
        Some(spec) => sample_disorder(params, spec),
        None => Hoppings::clean(params),
    };
    build_with_hoppings(params, &hoppings, atoms)
}

/// Same as [`build_real_space_hamiltonian`] with explicit bond hoppings.
pub fn build_with_hoppings(
    params: &WaveguideParams,
    hoppings: &Hoppings,
    atoms: &[GiantAtomSpec],
) -> Result<RealSpaceHamiltonian> {
    let n = params.cells();
    if hoppings.intra.len() != n || hoppings.inter.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: hoppings.intra.len().min(hoppings.inter.len()),
        });
    }
    for atom in atoms {
        atom.check_within(params)?;
    }
    let dim = 2 * n + atoms.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..n {
        let (a, b) = (2 * j, 2 * j + 1);
        let a_next = 2 * ((j + 1) % n);
        h[(a, b)] += hoppings.intra[j];
        h[(b, a)] += hoppings.intra[j];
        h[(a_next, b)] += hoppings.inter[j];
        h[(b, a_next)] += hoppings.inter[j];
    }
    for (idx, atom) in atoms.iter().enumerate() {
        let row = 2 * n + idx;
        h[(row, row)] = atom.detuning();
        for node in atom.nodes() {
            let site = 2 * node.cell + node.sublattice.offset();
            h[(row, site)] += node.strength;
            h[(site, row)] += node.strength;
        }
    }
    Ok(RealSpaceHamiltonian {
        cells: n,
        atoms: atoms.len(),
        matrix: h,
    })
}

/// Allowed momenta of an `N`-cell ring, `k_q = 2πq/N` folded into `(-π, π]`.
pub fn ring_momenta(cells: usize) -> impl Iterator<Item = f64> {
    (0..cells).map(move |q| {
        let k = 2.0 * PI * q as f64 / cells as f64;
        if k > PI {
            k - 2.0 * PI
        } else {
            k
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, symmetric_eigenvalues};
    use alloc::vec;
    use proptest::prelude::*;

    fn params(delta: f64, cells: usize) -> WaveguideParams {
        WaveguideParams::new(delta, cells).unwrap()
    }

    #[test]
    fn dispersion_at_zone_center_and_edge() {
        let p = params(0.3, 10);
        let (w, phi) = dispersion_and_phase(0.0, &p);
        assert!((w - 2.0).abs() < 1e-15);
        assert!(phi.abs() < 1e-15);
        let (w, _) = dispersion_and_phase(PI, &p);
        assert!((w - 0.6).abs() < 1e-14);
    }

    #[test]
    fn dispersion_matches_bloch_matrix_eigenvalues() {
        let p = params(0.3, 10);
        let k = PI / 2.0;
        let f = bloch_factor(k, &p);
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), f, f.conj(), C64::new(0.0, 0.0)]);
        let (vals, _) = hermitian_eigen(&m);
        let (w, _) = dispersion_and_phase(k, &p);
        assert!((w - 2.18f64.sqrt()).abs() < 1e-14);
        assert!((vals[1] - w).abs() < 1e-12);
        assert!((vals[0] + w).abs() < 1e-12);
    }

    #[test]
    fn phase_convention_reproduces_bloch_factor() {
        for &delta in &[0.3, -0.3, 0.7, -0.9] {
            let p = params(delta, 4);
            let mut worst: f64 = 0.0;
            for i in 0..10_000 {
                let k = -PI + 2.0 * PI * (i as f64 + 0.5) / 10_000.0;
                let (w, phi) = dispersion_and_phase(k, &p);
                let err = (C64::from_polar(w, phi) - bloch_factor(k, &p)).norm();
                worst = worst.max(err);
            }
            assert!(worst < 1e-12, "delta {delta}: {worst}");
        }
    }

    #[test]
    fn group_velocity_values() {
        let p = params(0.3, 10);
        assert_eq!(group_velocity(0.0, &p).unwrap(), 0.0);
        assert!(group_velocity(PI, &p).unwrap().abs() < 1e-15);
        let expected = -(0.7 * 1.3) / 2.18f64.sqrt();
        let k = PI / 2.0;
        let h = 1e-6;
        let fd = (dispersion(k + h, &p) - dispersion(k - h, &p)) / (2.0 * h);
        assert!((fd - expected).abs() < 1e-8);
        assert!((group_velocity(k, &p).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn group_velocity_singular_when_gapless() {
        let p = params(0.0, 10);
        assert!(matches!(group_velocity(PI, &p), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn band_edges_examples() {
        let e = band_edges(&params(0.3, 4)).unwrap().as_array();
        for (a, b) in e.iter().zip([-2.0, -0.6, 0.6, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let e = band_edges(&params(-0.2, 4)).unwrap().as_array();
        for (a, b) in e.iter().zip([-2.0, -0.4, 0.4, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(band_edges(&params(0.0, 4)), Err(Error::Gapless));
        assert!(WaveguideParams::new(1.0, 4).is_err());
    }

    #[test]
    fn classify_regions() {
        let e = band_edges(&params(0.3, 4)).unwrap();
        assert_eq!(e.classify(0.0, 1e-9), SpectralRegion::MiddleGap);
        assert_eq!(e.classify(1.0, 1e-9), SpectralRegion::UpperBand);
        assert_eq!(e.classify(2.2, 1e-9), SpectralRegion::AboveUpperBand);
        assert_eq!(e.classify(-2.2, 1e-9), SpectralRegion::BelowLowerBand);
        assert_eq!(e.classify(-1.0, 1e-9), SpectralRegion::LowerBand);
        assert_eq!(e.classify(0.6, 1e-9), SpectralRegion::UpperBand);
    }

    #[test]
    fn zero_disorder_is_bit_exact() {
        let p = params(0.3, 12);
        let d = sample_disorder(&p, &DisorderSpec::new(0.0, 99).unwrap());
        assert_eq!(d, Hoppings::clean(&p));
    }

    #[test]
    fn disorder_is_deterministic_and_bounded() {
        let p = params(0.3, 50);
        let spec = DisorderSpec::new(0.2, 7).unwrap();
        let a = sample_disorder(&p, &spec);
        assert_eq!(a, sample_disorder(&p, &spec));
        assert_ne!(a, sample_disorder(&p, &DisorderSpec::new(0.2, 8).unwrap()));
        for (&h, clean) in a.intra.iter().zip(Hoppings::clean(&p).intra) {
            assert!((h / clean - 1.0).abs() <= 0.2 + 1e-15);
        }
    }

    #[test]
    fn dimension_and_index_map() {
        let p = params(0.3, 20);
        let atom = GiantAtomSpec::new(
            0.0,
            vec![CouplingNode::new(10, Sublattice::A, 0.1), CouplingNode::new(10, Sublattice::B, 0.1)],
        )
        .unwrap();
        let h = build_real_space_hamiltonian(&p, &[atom], None).unwrap();
        assert_eq!(h.dimension(), 41);
        assert_eq!(h.site_index(10, Sublattice::B), 21);
        assert_eq!(h.site_of(21), Some((10, Sublattice::B)));
        assert_eq!(h.matrix()[(h.atom_index(0), 20)], 0.1);
        assert_eq!(h.matrix()[(h.atom_index(0), 21)], 0.1);
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_and_duplicate_nodes() {
        let p = params(0.3, 5);
        let far = GiantAtomSpec::small(0.0, 5, Sublattice::A, 0.1).unwrap();
        assert!(build_real_space_hamiltonian(&p, &[far], None).is_err());
        let dup = GiantAtomSpec::new(
            0.0,
            vec![CouplingNode::new(1, Sublattice::A, 0.1), CouplingNode::new(1, Sublattice::A, 0.2)],
        );
        assert!(dup.is_err());
        let unsorted = GiantAtomSpec::new(
            0.0,
            vec![CouplingNode::new(2, Sublattice::A, 0.1), CouplingNode::new(1, Sublattice::B, 0.1)],
        );
        assert!(unsorted.is_err());
        assert!(GiantAtomSpec::small(0.0, 0, Sublattice::A, -0.1).is_err());
    }

    #[test]
    fn uniform_chain_spectrum() {
        // δ = 0: a uniform 6-site ring, eigenvalues 2 cos(2πq/6).
        let p = params(0.0, 3);
        let h = build_real_space_hamiltonian(&p, &[], None).unwrap();
        let mut vals = symmetric_eigenvalues(h.matrix());
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected: Vec<f64> = (0..6).map(|q| 2.0 * (2.0 * PI * q as f64 / 6.0).cos()).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in vals.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn bloch_spectrum(p: &WaveguideParams) -> Vec<f64> {
        let mut expected: Vec<f64> = ring_momenta(p.cells())
            .flat_map(|k| {
                let w = dispersion(k, p);
                [w, -w]
            })
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        expected
    }

    #[test]
    fn bloch_consistency_n20() {
        let p = params(0.3, 20);
        let h = build_real_space_hamiltonian(&p, &[], None).unwrap();
        let mut vals = symmetric_eigenvalues(h.matrix());
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = bloch_spectrum(&p);
        for (a, b) in vals.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
        let edges = band_edges(&p).unwrap();
        for v in &vals {
            assert!(v.abs() >= 0.6 - 1e-10);
            assert!(!edges.classify(*v, 1e-9).is_gap());
        }
    }

    fn assert_chiral(vals: &mut Vec<f64>) {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vals.len();
        for i in 0..n {
            assert!((vals[i] + vals[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn chiral_symmetry_under_disorder() {
        let p = params(0.3, 20);
        for seed in 0..10 {
            let spec = DisorderSpec::new(0.2, seed).unwrap();
            let h = build_real_space_hamiltonian(&p, &[], Some(&spec)).unwrap();
            assert_chiral(&mut symmetric_eigenvalues(h.matrix()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hermitian_and_chiral_for_any_realization(
            delta in -0.9f64..0.9,
            cells in 2usize..16,
            eps in 0.0f64..0.5,
            seed in any::<u64>(),
        ) {
            let p = params(delta, cells);
            let spec = DisorderSpec::new(eps, seed).unwrap();
            let atom = GiantAtomSpec::new(0.3, vec![
                CouplingNode::new(0, Sublattice::A, 0.1),
                CouplingNode::new(cells - 1, Sublattice::B, 0.05),
            ]).unwrap();
            let h = build_real_space_hamiltonian(&p, &[atom], Some(&spec)).unwrap();
            prop_assert!(h.hermiticity_defect() < 1e-14);
            let mut vals = symmetric_eigenvalues(&h.photon_block());
            assert_chiral(&mut vals);
        }

        #[test]
        fn bloch_consistency_random(delta in -0.9f64..0.9, cells in 1usize..24) {
            let p = params(delta, cells);
            let h = build_real_space_hamiltonian(&p, &[], None).unwrap();
            let mut vals = symmetric_eigenvalues(h.matrix());
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in vals.iter().zip(&bloch_spectrum(&p)) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
