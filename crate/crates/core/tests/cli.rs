use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pareto_diffusion::cli::SweepRow;
use pareto_diffusion::strategies::LearningCurve;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pareto-diffusion"))
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    bin().args(args).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SHORT: &str = r#"
[simulation]
strategies = ["atc", "cta", "consensus", "centralized"]
horizon = 1
runs = 3
seed = 0
noise = true
steady_state_fraction = 0.2
fixed_point_tol = 1e-15
fixed_point_max_iters = 5000000
"#;

#[test]
fn default_configuration_validates() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "", &["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn oversized_step_names_the_contraction_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[step_sizes]\nmu = 5.0\n", &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL step sizes, contraction"));
    assert!(stdout(&o).contains("0 < μ_k < 2/σ_{k,max}"));
}

#[test]
fn disconnected_topology_fails_connectivity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[topology]
builder = "edges"
n_nodes = 10
radius = 0.6
seed = 1
edges = [[0, 1], [1, 2]]
"#;
    let o = run(dir.path(), cfg, &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL connectivity"));
}

#[test]
fn bad_config_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[costs.finance]\nsubset_sizes = [1, 1, 2, 1]\n", &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergence_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("[step_sizes]\nmu = 5.0\n{}", SHORT.replace("horizon = 1", "horizon = 200"));
    let o = run(dir.path(), &cfg, &["simulate", "--quiet"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_single_row_curves_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SHORT, &["simulate", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    let out = dir.path().join("out");
    let first: Vec<Vec<u8>> = ["atc", "cta", "consensus", "centralized"]
        .iter()
        .map(|s| fs::read(out.join(format!("learning_{s}.csv"))).unwrap())
        .collect();
    for (bytes, name) in first.iter().zip(["atc", "cta", "consensus", "centralized"]) {
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# pareto-diffusion simulate\n# config_sha256: "));
        let curve = LearningCurve::read_csv(bytes.as_slice(), name, 0.2).unwrap();
        assert_eq!(curve.horizon(), 1);
        assert_eq!(curve.n_nodes(), 10);
    }
    let comparison = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(comparison.contains("iteration,atc_mse_db,cta_mse_db,consensus_mse_db,centralized_mse_db"));

    let o = run(dir.path(), SHORT, &["simulate", "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    for (bytes, name) in first.iter().zip(["atc", "cta", "consensus", "centralized"]) {
        assert_eq!(&fs::read(out.join(format!("learning_{name}.csv"))).unwrap(), bytes);
    }
}

#[test]
fn seed_override_changes_hash_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SHORT.replace("horizon = 1", "horizon = 5").replace(r#"["atc", "cta", "consensus", "centralized"]"#, r#"["atc"]"#);
    run(dir.path(), &cfg, &["simulate", "--quiet"]);
    let a = fs::read_to_string(dir.path().join("out/learning_atc.csv")).unwrap();
    run(dir.path(), &cfg, &["simulate", "--quiet", "--seed", "9", "--runs", "2"]);
    let b = fs::read_to_string(dir.path().join("out/learning_atc.csv")).unwrap();
    assert_ne!(a.lines().nth(1), b.lines().nth(1));
    assert!(b.contains("# runs: 2"));
    assert_ne!(a.lines().nth(6), b.lines().nth(6));
}

#[test]
fn noise_free_sweep_equals_bias_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[step_sizes]
sweep = [0.03, 0.1]

[simulation]
strategies = ["atc", "cta", "consensus"]
horizon = 4000
runs = 1
seed = 0
noise = false
steady_state_fraction = 0.1
fixed_point_tol = 1e-15
fixed_point_max_iters = 5000000
"#;
    let o = run(dir.path(), cfg, &["sweep", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = SweepRow::read_csv(fs::File::open(dir.path().join("out/sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        let sim = r.simulated_mse.unwrap();
        let fp = r.fixed_point_power.unwrap();
        assert!((10.0 * (sim / fp).log10()).abs() < 0.1, "{r:?}");
        if r.strategy != "consensus" {
            let bias = r.bias_power.unwrap();
            assert!((10.0 * (sim / bias).log10()).abs() < 0.1, "{r:?}");
            assert!(r.predicted_mse.is_some());
        }
    }
}

#[test]
fn common_minimizer_has_no_fixed_point_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[costs]
family = "quadratic"
dim = 3

[costs.quadratic]
curvature = [1.0, 2.0, 0.5, 1.5, 1.0, 3.0, 0.7, 1.2, 2.2, 0.9]
center = 0.4
spread = 0.0
center_seed = 1
noise_std = 0.1
relative_std = 0.0

[step_sizes]
mu = 0.05
"#;
    let o = run(dir.path(), cfg, &["fixed-point", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/fixed_point_summary.csv")).unwrap();
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    for rec in rd.records() {
        let rec = rec.unwrap();
        let power: f64 = rec[2].parse().unwrap();
        assert!(power < 1e-20, "{}: {power:e}", &rec[0]);
    }
}

#[test]
fn diffusion_has_smaller_bias_than_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SHORT, &["fixed-point", "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/fixed_point_summary.csv")).unwrap();
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut power = std::collections::HashMap::new();
    for rec in rd.records() {
        let rec = rec.unwrap();
        power.insert(rec[0].to_string(), rec[2].parse::<f64>().unwrap());
        if rec[0] == *"atc" || rec[0] == *"cta" {
            assert!(rec[5].parse::<f64>().unwrap() < 1e-8);
        }
    }
    assert!(power["atc"] < power["consensus"]);
    assert!(power["cta"] < power["consensus"]);
}
