//! Built-in experiment recipes. Dimerization is left open where the source
//! figures do not state it, so those presets only validate once
//! `waveguide.delta` is supplied.

use crate::config::{
    AtomConfig, BoundstateConfig, BoundstateMethod, CalibrationConfig, DynamicsConfig, ExperimentConfig, ExperimentKind,
    GridConfig, InitialConfig, Model, NodeConfig, SublatticeToken, WaveguideConfig,
};

pub struct Preset {
    pub name: &'static str,
    pub kind: ExperimentKind,
    pub description: &'static str,
    /// Fields that must be set before the preset validates.
    pub required: &'static [&'static str],
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2b",
        kind: ExperimentKind::Spectrum,
        description: "spectrum vs detuning, one A/B atom, delta=0.3, N=20, g=0.1",
        required: &[],
        build: fig2b,
    },
    Preset {
        name: "fig3",
        kind: ExperimentKind::Boundstate,
        description: "bound-state profiles at zero detuning, delta=0.3 (flip sign for the trivial phase), N=20",
        required: &[],
        build: fig3,
    },
    Preset {
        name: "fig4",
        kind: ExperimentKind::MarkovScan,
        description: "decay rates across the upper band for a small atom and two giant atoms, with rate calibration",
        required: &["waveguide.delta"],
        build: fig4,
    },
    Preset {
        name: "fig5",
        kind: ExperimentKind::PhotonMap,
        description: "photon map of a giant atom {a0, b1} at detuning 1.2",
        required: &["waveguide.delta"],
        build: fig5,
    },
    Preset {
        name: "fig6",
        kind: ExperimentKind::MarkovScan,
        description: "coherent and dissipative couplings of two bridged giant atoms {b0, a3} at spacing 2",
        required: &["waveguide.delta"],
        build: fig6,
    },
    Preset {
        name: "fig7",
        kind: ExperimentKind::Transfer,
        description: "state transfer between bridged giant atoms {b0, a3} at spacing 2, detuning 1.745, N=40",
        required: &["waveguide.delta"],
        build: fig7,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn node(cell: usize, sublattice: SublatticeToken, strength: f64) -> NodeConfig {
    NodeConfig {
        cell,
        sublattice,
        strength,
    }
}

fn atom(detuning: f64, nodes: Vec<NodeConfig>) -> AtomConfig {
    AtomConfig { detuning, nodes }
}

fn grid(start: f64, stop: f64, points: usize) -> Option<GridConfig> {
    Some(GridConfig { start, stop, points })
}

fn base(kind: ExperimentKind, delta: Option<f64>, cells: usize) -> ExperimentConfig {
    ExperimentConfig {
        kind: Some(kind),
        output: None,
        seed: None,
        waveguide: WaveguideConfig { delta, cells },
        atoms: Vec::new(),
        disorder: None,
        detuning_grid: None,
        time_grid: None,
        boundstate: None,
        dynamics: None,
        calibration: None,
    }
}

/// Atom `n` of a bridged pair: B node at `first`, A node `span` cells later.
fn bridged(detuning: f64, first: usize, span: usize, strength: f64) -> AtomConfig {
    atom(
        detuning,
        vec![node(first, SublatticeToken::B, strength), node(first + span, SublatticeToken::A, strength)],
    )
}

fn fig2b() -> ExperimentConfig {
    let mut c = base(ExperimentKind::Spectrum, Some(0.3), 20);
    c.atoms = vec![atom(0.0, vec![node(10, SublatticeToken::A, 0.1), node(10, SublatticeToken::B, 0.1)])];
    c.detuning_grid = grid(-3.0, 3.0, 61);
    c
}

fn fig3() -> ExperimentConfig {
    let mut c = base(ExperimentKind::Boundstate, Some(0.3), 20);
    c.atoms = vec![atom(0.0, vec![node(10, SublatticeToken::A, 0.1), node(10, SublatticeToken::B, 0.1)])];
    c.boundstate = Some(BoundstateConfig {
        method: BoundstateMethod::Bloch,
        gaps: None,
    });
    c
}

fn fig4() -> ExperimentConfig {
    let mut c = base(ExperimentKind::MarkovScan, None, 200);
    c.atoms = vec![
        atom(0.0, vec![node(40, SublatticeToken::A, 0.1)]),
        atom(0.0, vec![node(100, SublatticeToken::A, 0.1), node(101, SublatticeToken::B, 0.1)]),
        atom(0.0, vec![node(160, SublatticeToken::A, 0.1), node(162, SublatticeToken::A, 0.1)]),
    ];
    c.detuning_grid = grid(0.0, 2.2, 221);
    c.calibration = Some(CalibrationConfig {
        detuning: 1.5,
        cells: 400,
        strength: 0.1,
        reference_gamma: Some(0.004),
    });
    c
}

fn fig5() -> ExperimentConfig {
    let mut c = base(ExperimentKind::PhotonMap, None, 100);
    c.atoms = vec![atom(1.2, vec![node(50, SublatticeToken::A, 0.1), node(51, SublatticeToken::B, 0.1)])];
    c.time_grid = grid(0.0, 200.0, 201);
    c.dynamics = Some(DynamicsConfig::default());
    c
}

fn fig6() -> ExperimentConfig {
    let mut c = base(ExperimentKind::MarkovScan, None, 100);
    c.atoms = vec![bridged(0.0, 40, 3, 0.1), bridged(0.0, 42, 3, 0.1)];
    c.detuning_grid = grid(0.0, 2.2, 221);
    c
}

fn fig7() -> ExperimentConfig {
    let mut c = base(ExperimentKind::Transfer, None, 40);
    c.atoms = vec![bridged(1.745, 18, 3, 0.1), bridged(1.745, 20, 3, 0.1)];
    c.time_grid = grid(0.0, 600.0, 1201);
    c.dynamics = Some(DynamicsConfig {
        model: Model::Full,
        initial: InitialConfig::Atom { atom: 0 },
        target: Some(InitialConfig::Atom { atom: 1 }),
        source: 0,
        destination: 1,
    });
    c
}
