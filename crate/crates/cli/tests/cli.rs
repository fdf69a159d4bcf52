use std::path::Path;
use std::process::{Command, Output};

fn topowave(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topowave"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn single_atom(detuning: f64, sublattice: &str) -> String {
    format!(
        "[waveguide]\ndelta = 0.3\ncells = 20\n\n[[atoms]]\ndetuning = {detuning:?}\n\n\
         [[atoms.nodes]]\ncell = 10\nsublattice = \"{sublattice}\"\nstrength = 0.1\n"
    )
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn bad_sublattice_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), single_atom(0.0, "C")).unwrap();
    let out = topowave(&["sw-couplings", "--config", "c.toml", "--out", "run_"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("sublattice"));
    assert_eq!(files_in(dir.path()), ["c.toml"]);
}

#[test]
fn band_edge_detuning_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), single_atom(0.6, "A")).unwrap();
    let out = topowave(&["sw-couplings", "--config", "c.toml", "--out", "run_"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert_eq!(files_in(dir.path()), ["c.toml"]);
}

#[test]
fn missing_dimerization_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = topowave(&["transfer", "--preset", "fig7"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("waveguide.delta"), "{}", stderr(&out));
    assert!(files_in(dir.path()).is_empty());
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for jobs in ["1", "4"] {
        let prefix = format!("j{jobs}_");
        let out = topowave(&["spectrum", "--preset", "fig2b", "--jobs", jobs, "--out", &prefix], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let one = std::fs::read(dir.path().join("j1_spectrum.csv")).unwrap();
    let four = std::fs::read(dir.path().join("j4_spectrum.csv")).unwrap();
    assert!(!one.is_empty());
    assert_eq!(one, four);
}

#[test]
fn manifest_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = topowave(
        &["boundstate", "--preset", "fig3", "--set", "waveguide.delta=-0.2", "--out", "first_"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("first_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "boundstate");
    assert_eq!(manifest["config"]["waveguide"]["delta"], -0.2);
    std::fs::write(dir.path().join("echo.json"), serde_json::to_vec(&manifest["config"]).unwrap()).unwrap();

    let out = topowave(&["boundstate", "--config", "echo.json", "--out", "second_"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for entry in outputs {
        let first = entry["path"].as_str().unwrap();
        let second = first.replacen("first_", "second_", 1);
        let a = std::fs::read(dir.path().join(first)).unwrap();
        let b = std::fs::read(dir.path().join(&second)).unwrap();
        assert_eq!(a, b, "{first} vs {second}");
    }
}

#[test]
fn preset_catalog_lists_every_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let out = topowave(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig2b", "fig3", "fig4", "fig5", "fig6", "fig7"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
}

#[test]
fn transfer_preset_shows_its_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let out = topowave(&["presets", "--show", "fig7"], dir.path());
    assert!(out.status.success());
    let cfg: toml::Value = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let atoms = cfg["atoms"].as_array().unwrap();
    let cell = |a: usize, n: usize| atoms[a]["nodes"][n]["cell"].as_integer().unwrap();
    assert_eq!(atoms.len(), 2);
    assert!(atoms.iter().all(|a| a["detuning"].as_float() == Some(1.745)));
    assert_eq!(cell(0, 1) - cell(0, 0), 3);
    assert_eq!(cell(1, 0) - cell(0, 0), 2);
    assert_eq!(atoms[0]["nodes"][0]["sublattice"].as_str(), Some("B"));
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = topowave(&["presets", "--show", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
