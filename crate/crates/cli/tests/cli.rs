use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BASE: &str = r#"config_version = 1

[lattice]
nx = 4
ny = 4
a_nm = 0.5

[molecular]
omega_mol_meV = 100.0
omega0_meV = 1.0

[cavity]
omega_cav_meV = "resonant_W1"
sigma_L_over_a = 2.5
g_tot_meV = 2.0

[losses]
gamma_meV = 1.0

[spectrum]
points = 401
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polarlattice"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Data rows of a CSV written by the tool, header comment and column names removed.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn modes_outputs_and_manifest_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}\n[modes]\nmaps = [1, 16]\n"));
    let out = dir.path().join("out");
    let o = run(&["modes"], Some(&cfg), Some(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let modes = rows(&out.join("modes.csv"));
    assert_eq!(modes.len(), 16);
    let w: Vec<f64> = modes.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
    assert_eq!(rows(&out.join("mode_map_0016.csv")).len(), 16);
    assert_eq!(rows(&out.join("dispersion.csv")).len(), 16);

    let m = manifest(&out);
    let files = m["files"].as_array().unwrap();
    let on_disk = std::fs::read_dir(&out).unwrap().count() - 1;
    assert_eq!(files.len(), on_disk);
    for f in files {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        use sha2::Digest;
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(sha2::Sha256::digest(&bytes)));
    }
    assert_eq!(m["command"], "modes");
    assert!(m["stages"].as_array().unwrap().len() >= 2);
}

#[test]
fn single_site_has_bare_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("nx = 4", "nx = 1").replace("ny = 4", "ny = 1"));
    let out = dir.path().join("out");
    let o = run(&["modes"], Some(&cfg), Some(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let modes = rows(&out.join("modes.csv"));
    assert_eq!(modes.len(), 1);
    assert_eq!(modes[0][1].parse::<f64>().unwrap(), 100.0);
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (text, needle) in [
        (format!("{BASE}\n[modes]\nmaps = [17]\n"), "modes.maps[0]: mode index 17 outside 1..=16"),
        (BASE.replace("a_nm = 0.5", "a_nm = -0.5"), "lattice.a_nm"),
        (BASE.replace("g_tot_meV", "gtot_meV"), "cavity"),
        (BASE.replace("omega0_meV = 1.0", "omega0_meV = 1.0\nmaterial = \"SiC\""), "exactly one"),
        (BASE.replace("config_version = 1", "config_version = 7"), "config_version"),
    ] {
        let cfg = write_config(dir.path(), &text);
        let o = run(&["modes"], Some(&cfg), Some(&out));
        assert_eq!(code(&o), 2, "{needle}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "want {needle:?} in {}", stderr(&o));
    }
    let o = run(&["spectrum"], None, Some(&out));
    assert_eq!(code(&o), 2);
}

#[test]
fn unstable_layer_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("omega0_meV = 1.0", "omega0_meV = 60.0"));
    let o = run(&["modes"], Some(&cfg), Some(&dir.path().join("out")));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn spectrum_is_deterministic_and_resolves_w1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["spectrum", "--seed-check"], Some(&cfg), Some(out));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("seed check"));
    }
    for f in ["spectrum.csv", "spectrum.json", "polaritons.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let side: Value = serde_json::from_str(&std::fs::read_to_string(a.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(side["cavity"]["omega_cav_meV"], side["W1_meV"]);
    assert_eq!(side["cavity"]["omega_cav_requested"], "resonant_W1");
    let text = std::fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert_eq!(rows(&a.join("spectrum.csv")).len(), 401);
}

#[test]
fn zero_coupling_gives_single_line_at_cavity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &BASE.replace("g_tot_meV = 2.0", "g_tot_meV = 0.0").replace("\"resonant_W1\"", "104.0"),
    );
    let out = dir.path().join("out");
    let o = run(&["spectrum"], Some(&cfg), Some(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let side: Value = serde_json::from_str(&std::fs::read_to_string(out.join("spectrum.json")).unwrap()).unwrap();
    let peaks = side["peaks"].as_array().unwrap();
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0]["omega_meV"].as_f64().unwrap() - 104.0).abs() < 1e-3);
}

#[test]
fn complex_hamiltonian_method_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("gamma_meV = 1.0", "gamma_meV = 1.0\nmethod = \"complex_hamiltonian\"\nroute = \"full\"");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run(&["spectrum"], Some(&cfg), Some(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let side: Value = serde_json::from_str(&std::fs::read_to_string(out.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(side["losses"]["method"], "complex_hamiltonian");
    assert_eq!(side["losses"]["kappa_meV"], 1.0);
}

#[test]
fn sweep_over_cavity_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[[sweep]]\nfield = \"cavity.omega_cav_meV\"\nfrom = 90.0\nto = 110.0\nsteps = 5\n",
        BASE.replace("sigma_L_over_a = 2.5", "sigma_L_over_a = \"homogeneous\"")
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run(&["sweep", "--threads", "2"], Some(&cfg), Some(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let points = rows(&out.join("sweep_points.csv"));
    assert_eq!(points.len(), 5);
    for i in 0..5 {
        assert!(out.join(format!("points/p{i:04}/spectrum.csv")).exists());
    }
    let m = manifest(&out);
    assert_eq!(m["details"]["points"].as_array().unwrap().len(), 5);
    assert_eq!(m["files"].as_array().unwrap().len(), 5 * 2 + 3);

    // Upper minus lower polariton peak is smallest at the point nearest W1.
    let peaks = rows(&out.join("peaks.csv"));
    let w1: f64 = points[0][3].parse().unwrap();
    let mut gaps = Vec::new();
    for p in 0..5 {
        let omegas: Vec<f64> =
            peaks.iter().filter(|r| r[0] == p.to_string()).map(|r| r[3].parse().unwrap()).collect();
        let (lo, hi) = omegas.iter().fold((f64::MAX, f64::MIN), |(a, b), &w| (a.min(w), b.max(w)));
        gaps.push(hi - lo);
    }
    let cav: Vec<f64> = points.iter().map(|r| r[1].parse().unwrap()).collect();
    let narrowest = (0..5).min_by(|&a, &b| gaps[a].total_cmp(&gaps[b])).unwrap();
    let bracket = (0..4).find(|&i| cav[i] <= w1 && w1 <= cav[i + 1]).unwrap();
    assert!(narrowest == bracket || narrowest == bracket + 1, "W1 {w1}, gaps {gaps:?}");
    assert!(gaps[narrowest] > 2.0, "crossing is avoided: {gaps:?}");
}

#[test]
fn single_point_sweep_matches_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}\n[[sweep]]\nfield = \"losses.gamma_meV\"\nvalues = [1.0]\n"));
    let (s, w) = (dir.path().join("s"), dir.path().join("w"));
    assert_eq!(code(&run(&["spectrum"], Some(&cfg), Some(&s))), 0);
    assert_eq!(code(&run(&["sweep"], Some(&cfg), Some(&w))), 0);
    assert_eq!(
        std::fs::read(s.join("spectrum.csv")).unwrap(),
        std::fs::read(w.join("points/p0000/spectrum.csv")).unwrap()
    );
}

#[test]
fn sweep_axis_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (axis, needle) in [
        ("field = \"losses.gamma_meV\"\nvalues = []", "empty"),
        ("field = \"losses.width\"\nvalues = [1.0]", "sweep[0].field"),
    ] {
        let cfg = write_config(dir.path(), &format!("{BASE}\n[[sweep]]\n{axis}\n"));
        let o = run(&["sweep"], Some(&cfg), Some(&out));
        assert_eq!(code(&o), 2);
        assert!(stderr(&o).contains(needle), "{}", stderr(&o));
    }
    let cfg = write_config(dir.path(), BASE);
    assert_eq!(code(&run(&["sweep"], Some(&cfg), Some(&out))), 2);
}

#[test]
fn criterion_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let o = run(&["criterion"], Some(&cfg), None);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("threshold gamma = 2 pi Omega0 a / sigma_L = 2.513274 meV"), "{text}");
    assert!(text.contains("spectral width"));
    assert!(text.contains("critical sigma_L / a at this gamma = 6.283185"));
    assert!(text.contains("spectrally resolved"));
}

#[test]
fn material_table() {
    let o = run(&["material"], None, None);
    assert_eq!(code(&o), 0);
    for name in ["SiC", "hBN-in-plane", "hBN-out-of-plane", "CBP"] {
        assert!(stdout(&o).contains(name));
    }
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}\n[[materials]]\nname = \"Custom\"\nmodel = \"lorentz\"\nS = 100.0\nomega_mol = 1000.0\neps_inf = 2.0\nunit = \"meV\"\n"
    );
    let cfg = write_config(dir.path(), &text);
    let o = run(&["material", "custom"], Some(&cfg), None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("Custom"));
    assert!(!stdout(&o).contains("SiC"));
    assert_eq!(code(&run(&["material", "unobtainium"], None, None)), 2);
}

#[test]
fn validate_passes_and_detects_injected_asymmetry() {
    let o = run(&["validate"], None, None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let o = run(&["validate", "--inject-asymmetry", "2,7"], None, None);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("FAIL coupling_symmetry"), "{}", stdout(&o));
    assert!(stderr(&o).contains("Omega[2][7]"), "{}", stderr(&o));
}
