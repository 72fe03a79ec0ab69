//! End-to-end tests of the `platoon` binary: dispatch, exit codes,
//! deterministic outputs, and lossless CSV round-trips.

use std::path::Path;
use std::process::{Command, Output};

fn platoon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_into(config: &Path, out: &Path, seed: Option<u64>) -> Output {
    let mut cmd = platoon();
    cmd.arg("run").arg(config).arg("--out").arg(out);
    if let Some(seed) = seed {
        cmd.arg("--seed").arg(seed.to_string());
    }
    cmd.output().unwrap()
}

const MICRO_SIM: &str = r#"
[experiment]
kind = "micro-sim"
seed = 3

[model]
mu = 0.5
v_star = 30.0
v_max = 35.0
cap_l = 5.0
lambda = 20.0
epsilon = 0.2
n = 4

[initial]
kind = "seeded-intervals"
spacing_range = [16.0, 24.0]
speed_range = [27.0, 34.0]

[integrator]
dt = 0.001
horizon = 2.0
record_stride = 10
"#;

#[test]
fn micro_sim_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MICRO_SIM);
    let out = dir.path().join("run");
    let output = run_into(&config, &out, None);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("status: pass"), "{stdout}");
    assert!(out.join("trajectory.csv").exists());
    assert!(out.join("summary.txt").exists());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("config_hash:"));
    assert!(!summary.contains("wall_clock"), "summary must stay deterministic");
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MICRO_SIM);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run_into(&config, &out_a, Some(7)).status.success());
    assert!(run_into(&config, &out_b, Some(7)).status.success());
    for name in ["trajectory.csv", "summary.txt"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MICRO_SIM);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run_into(&config, &out_a, Some(1)).status.success());
    assert!(run_into(&config, &out_b, Some(2)).status.success());
    let a = std::fs::read(out_a.join("trajectory.csv")).unwrap();
    let b = std::fs::read(out_b.join("trajectory.csv")).unwrap();
    assert_ne!(a, b, "different seeds must draw different initial states");
}

#[test]
fn emitted_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MICRO_SIM);
    let out = dir.path().join("run");
    assert!(run_into(&config, &out, None).status.success());
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let (times, states) = platoon_core::micro::Trajectory::<f64>::parse_csv(&text).unwrap();
    // Re-serialize through the same formatter: bitwise identical means the
    // decimal encoding loses nothing.
    let mut rebuilt = String::from("t,s2,s3,s4,v1,v2,v3,v4\n");
    for (t, state) in times.iter().zip(&states) {
        let mut row = vec![*t];
        row.extend_from_slice(&state.spacings);
        row.extend_from_slice(&state.speeds);
        platoon_core::csvio::push_row(&mut rebuilt, &row);
    }
    assert_eq!(text, rebuilt);
}

#[test]
fn unknown_keys_fail_with_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &MICRO_SIM.replace("mu = 0.5", "mu = 0.5\nmu_typo = 1.0"),
    );
    let output = run_into(&config, &dir.path().join("run"), None);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("mu_typo"), "{stderr}");
}

#[test]
fn invariant_violations_name_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &MICRO_SIM.replace("lambda = 20.0", "lambda = 4.0"),
    );
    let output = run_into(&config, &dir.path().join("run"), None);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("lambda > cap_l"), "{stderr}");
}

#[test]
fn closed_form_check_passes_on_compliant_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[experiment]
kind = "closed-form-check"
seed = 3

[model]
mu = 0.5
v_star = 30.0
v_max = 35.0
cap_l = 5.0
lambda = 20.0
epsilon = 0.2
n = 3

[initial]
kind = "seeded-compliant"
speed_range = [27.0, 34.0]

[integrator]
dt = 0.001
horizon = 5.0
"#,
    );
    let output = run_into(&config, &dir.path().join("run"), None);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("closed-form: pass"), "{stdout}");
}

#[test]
fn certificate_audit_reports_margins() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "{}\n[lyapunov]\nbeta = 1.0\n",
            MICRO_SIM
                .replace("kind = \"micro-sim\"", "kind = \"lyapunov-audit\"")
                .replace("record_stride = 10", "record_stride = 1")
        ),
    );
    let out = dir.path().join("run");
    let output = run_into(&config, &out, None);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("sandwich: pass") && stdout.contains("decay: pass"), "{stdout}");
    let audit = std::fs::read_to_string(out.join("audit.csv")).unwrap();
    assert!(audit.starts_with("t,H,W,kappaH,dWdt,rhs_bound,margin\n"));
}

#[test]
fn sweep_experiment_emits_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[experiment]
kind = "amplification-sweep"

[model]
mu = 2.0
v_star = 30.0
v_max = 35.0
cap_l = 5.1
lambda = 61.0
epsilon = 2.0
n = 3

[disturbance]
alpha = -2.5
omega_bars = [0.5]
sizes = [3, 4]
models = ["inviscid", "ftl"]
horizon_floor = 20.0
periods = 1.0

[ftl]
a = 5.1
k = 1.2
beta = 34.4
zeta = 64.43
g_max = 1.15
"#,
    );
    let out = dir.path().join("run");
    let output = run_into(&config, &out, None);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let summary = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert!(summary.starts_with("model,n,omega_bar,alpha,gamma_nn,delta_nn\n"));
    assert_eq!(summary.lines().count(), 5, "one summary row per cell");
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(table.starts_with("model,n,omega_bar,alpha,i,gamma,delta\n"));
}

#[test]
fn bridge_experiment_emits_the_gap_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[experiment]
kind = "micro-macro-bridge"

[macro]
omega = 1.2
v_star = 1.0
v_max = 2.0
rho_bar = 0.7
rho_max = 1.0
phi_scale = 1.0
m_total = 1.1666666666666667
epsilon = 0.1

[profiles]
rho0 = { kind = "bump", base = 0.1, amp = 5.0, power = 2 }
v0 = { kind = "bump", base = 1.0, amp = 8.0, power = 3 }

[bridge]
n_values = [30, 60]
window = [-2.0, 8.0]
compare_window = [0.5, 4.0]
times = [0.5]
grid_points = 101
dt = 0.01
"#,
    );
    let out = dir.path().join("run");
    let output = run_into(&config, &out, None);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let table = std::fs::read_to_string(out.join("bridge.csv")).unwrap();
    assert!(table.starts_with("n,time,linf_rho,l1_rho,linf_v,l1_v\n"));
    assert_eq!(table.lines().count(), 3);
}
