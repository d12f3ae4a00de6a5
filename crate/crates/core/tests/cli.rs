use std::fs;
use std::path::Path;
use std::process::Command;

fn pwilm(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pwilm")).args(args).current_dir(cwd).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const TWO_STEP: &str = r#"
seed = 11

[model]
kernel = "piecewise-constant"
change_points = [2.0]

[params]
alpha_1 = 0.10
alpha_2 = 0.0004

[population]
n = 400
side = 10.0

[simulation]
horizon = 20
min_final_size = 20

[data]
population = "sim/population.csv"
events = "sim/events.csv"
horizon = 20

[mcmc]
iterations = 6000
burn_in = 2000
thin = 4
pilot_iterations = 2000
pilot_burn_in = 1000

[output]
dir = "sim"

[predict]
replicates = 100
"#;

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn simulate_writes_population_events_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.toml", TWO_STEP);
    let (code, stdout, _) = pwilm(&["simulate", "run.toml"], tmp.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("400 individuals"));
    let events = fs::read_to_string(tmp.path().join("sim/events.csv")).unwrap();
    assert_eq!(events.lines().count(), 401);
    let curve = fs::read_to_string(tmp.path().join("sim/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 21);
}

#[test]
fn zero_kernel_gives_flat_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = TWO_STEP.replace("alpha_1 = 0.10", "alpha_1 = 0.0").replace("alpha_2 = 0.0004", "alpha_2 = 0.0").replace("min_final_size = 20", "");
    write(tmp.path(), "run.toml", &cfg);
    assert_eq!(pwilm(&["simulate", "run.toml"], tmp.path()).0, 0);
    let curve = fs::read_to_string(tmp.path().join("sim/curve.csv")).unwrap();
    assert!(curve.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn missing_population_file_is_a_data_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = TWO_STEP.replace("[output]\ndir = \"sim\"", "[output]\ndir = \"fitted\"");
    write(tmp.path(), "run.toml", &cfg);
    let (code, _, stderr) = pwilm(&["fit", "run.toml"], tmp.path());
    assert_eq!(code, 3, "{stderr}");
    assert!(!tmp.path().join("fitted").exists());

    let sim = "[model]\nkernel = \"power-law\"\n[params]\nalpha = 0.3\nbeta = 2.0\n[population]\nfile = \"nowhere.csv\"\n[simulation]\nhorizon = 5\n";
    write(tmp.path(), "sim.toml", sim);
    assert_eq!(pwilm(&["simulate", "sim.toml"], tmp.path()).0, 3);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "[model]\nkernel = \"cubic\"\n");
    assert_eq!(pwilm(&["simulate", "bad.toml"], tmp.path()).0, 2);
    assert_eq!(pwilm(&["simulate", "absent.toml"], tmp.path()).0, 2);
    write(tmp.path(), "run.toml", &TWO_STEP.replace("iterations = 6000", "iterations = 0"));
    assert_eq!(pwilm(&["simulate", "run.toml"], tmp.path()).0, 0);
    let (code, _, stderr) = pwilm(&["fit", "run.toml"], tmp.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("nothing to summarize"));
}

#[test]
fn fit_diagnose_predict_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.toml", TWO_STEP);
    assert_eq!(pwilm(&["simulate", "run.toml"], tmp.path()).0, 0);
    let (code, stdout, stderr) = pwilm(&["fit", "run.toml"], tmp.path());
    assert!(code == 0 || code == 5, "{stderr}");
    assert!(stdout.contains("alpha_1"));
    for f in ["draws_chain0.csv", "draws_chain1.csv", "draws_chain2.csv", "diagnostics.csv", "manifest.toml", "config.toml"] {
        assert!(tmp.path().join("sim").join(f).exists(), "{f}");
    }
    let draws = fs::read_to_string(tmp.path().join("sim/draws_chain0.csv")).unwrap();
    assert!(draws.starts_with("iter,log_post,alpha_1,alpha_2\n"));
    assert_eq!(draws.lines().count(), 1 + 1000);
    let diag = fs::read_to_string(tmp.path().join("sim/diagnostics.csv")).unwrap();
    assert_eq!(pwilm(&["diagnose", "run.toml"], tmp.path()).0, code);
    assert_eq!(fs::read_to_string(tmp.path().join("sim/diagnostics.csv")).unwrap(), diag);

    let (code, stdout, _) = pwilm(&["predict", "run.toml"], tmp.path());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("coverage "));
    let env = fs::read_to_string(tmp.path().join("sim/envelope.csv")).unwrap();
    assert!(env.starts_with("t,median,q025,q975\n"));
    assert_eq!(env.lines().count(), 21);
}

#[test]
fn single_chain_is_a_convergence_warning() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.toml", &TWO_STEP.replace("thin = 4", "thin = 4\nchains = 1"));
    pwilm(&["simulate", "run.toml"], tmp.path());
    let (code, stdout, _) = pwilm(&["fit", "run.toml"], tmp.path());
    assert_eq!(code, 5);
    assert!(stdout.contains("warning"));
}

#[test]
fn estimated_change_points_stay_inside_their_priors() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "sim.toml", TWO_STEP);
    pwilm(&["simulate", "sim.toml"], tmp.path());
    let three = r#"
[model]
kernel = "piecewise-constant"
change_points = [1.0, 3.0]
estimate_change_points = true

[priors]
delta_1 = { dist = "uniform", lower = 0.0, upper = 2.0 }
delta_2 = { dist = "uniform", lower = 2.0, upper = 4.0 }

[data]
population = "sim/population.csv"
events = "sim/events.csv"
horizon = 20

[mcmc]
iterations = 4000
burn_in = 1000
thin = 2
pilot_iterations = 2000
pilot_burn_in = 1000

[output]
dir = "three"
"#;
    write(tmp.path(), "three.toml", three);
    let (code, _, stderr) = pwilm(&["fit", "three.toml"], tmp.path());
    assert!(code == 0 || code == 5, "{stderr}");
    for k in 0..3 {
        let text = fs::read_to_string(tmp.path().join(format!("three/draws_chain{k}.csv"))).unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            let (d1, d2) = (f[5], f[6]);
            assert!((0.0..=2.0).contains(&d1) && (2.0..=4.0).contains(&d2), "{line}");
        }
    }

    write(tmp.path(), "dic.toml", "[model]\nkernel = \"power-law\"\n[dic]\nruns = [\"three\", \"sim\"]\n[output]\ndir = \"cmp\"\n");
    assert_eq!(pwilm(&["fit", "sim.toml"], tmp.path()).0 % 5, 0);
    let (code, stdout, stderr) = pwilm(&["dic", "dic.toml"], tmp.path());
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 2);
    let table = fs::read_to_string(tmp.path().join("cmp/dic.csv")).unwrap();
    let dics: Vec<f64> = table.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(dics.len(), 2);
    assert!(dics[0] <= dics[1]);

    write(tmp.path(), "one.toml", "[model]\nkernel = \"power-law\"\n[dic]\nruns = [\"sim\"]\n[output]\ndir = \"cmp1\"\n");
    assert_eq!(pwilm(&["dic", "one.toml"], tmp.path()).0, 0);
    assert_eq!(fs::read_to_string(tmp.path().join("cmp1/dic.csv")).unwrap().lines().count(), 2);
}

#[test]
fn seed_and_out_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.toml", TWO_STEP);
    assert_eq!(pwilm(&["simulate", "run.toml", "--seed", "5", "--out", "a"], tmp.path()).0, 0);
    assert_eq!(pwilm(&["simulate", "run.toml", "--seed", "6", "--out", "b"], tmp.path()).0, 0);
    let a = fs::read(tmp.path().join("a/population.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/population.csv")).unwrap();
    assert_ne!(a, b);
}
