use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sclab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sclab"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn linear_cat_fixed_point_is_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fp");
    let o = sclab(&["fixed-point", "--config", &config("linear_cat.toml"), "--resolution", "64"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fixed_point.json")).unwrap()).unwrap();
    assert!(summary["converged"].as_bool().unwrap());
    assert!(summary["distance_to_uniform"].as_f64().unwrap() < 1e-6);
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["fixed_point.csv", "density.txt", "fixed_point.json", "manifest.json"]);
}

#[test]
fn inadmissible_eps_exits_2_naming_the_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[coupling]\nkind = \"separable\"\neps = 0.3\n");
    let out = tmp.path().join("bad");
    let o = sclab(&["fixed-point", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("CouplingSpec invariant"), "{err}");
    assert!(err.contains("line 1"), "{err}");
    assert_eq!(manifest(&out)["status"], "config_error");

    let o = sclab(&["fixed-point", "--eps", "0.2"], &tmp.path().join("flag"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--eps"));
}

#[test]
fn unknown_field_and_missing_file_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[solver]\nresolutoin = 64\n");
    let o = sclab(&["sweep", "--config", &cfg], &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolutoin"));
    let o = sclab(&["sweep", "--config", "/nonexistent/x.toml"], &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn iteration_cap_exits_3_and_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cap");
    let o = sclab(&["fixed-point", "--resolution", "32", "--max-iterations", "3"], &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fixed point not reached after 3 iterations"));
    let csv = fs::read_to_string(out.join("fixed_point.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let m = manifest(&out);
    assert_eq!(m["status"], "experiment_failure");
    assert_eq!(m["exit_code"], 3);
}

#[test]
fn csv_schemas_are_fixed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[solver]\nresolution = 32\n[experiment]\neps_grid = [0.0, 0.01, 0.02]\ncold_start_points = 2\n\
         particle_counts = [10, 20, 40]\nsteps = 2\ntrials = 2\ndriving_length = 5\ndriving_sequences = 1\n\
         cone_maps = 2\ncone_samples = 4\ncone_depth = 3\nassumption_pairs = 2\n",
    );
    let expect = [
        ("fixed-point", "fixed_point.csv", "iter,residual_l1,proxy_bv"),
        ("uniqueness", "uniqueness.csv", "init_a,init_b,l1_distance"),
        ("sweep", "sweep.csv", "eps_lo,eps_hi,l1_diff,ratio"),
        ("memory-loss", "memory_loss_0.csv", "step,l1_diff"),
        ("particles-gap", "particles_gap.csv", "N,observable_id,gap_mean,gap_std"),
        ("cones", "cones.csv", "sample,depth,min_stable_expansion,min_unstable_expansion"),
        ("certify-coupling", "certify_coupling.json", "{"),
    ];
    for (cmd, file, head) in expect {
        let out = tmp.path().join(cmd);
        let o = sclab(&[cmd, "--config", &cfg, "--eps", "0.02"], &out);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(header(&out.join(file)), head, "{cmd}");
        assert_eq!(manifest(&out)["subcommand"], cmd);
    }
    let sweep = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    let cones = fs::read_to_string(tmp.path().join("cones/cones.csv")).unwrap();
    assert_eq!(cones.lines().count(), 1 + 4 * 3);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 5\n[solver]\nresolution = 32\n[coupling]\nkind = \"convolution\"\neps = 0.03\n\
         [experiment]\nparticle_counts = [50, 100, 200]\nsteps = 3\ntrials = 2\ndump_ensemble = true\n",
    );
    for cmd in ["particles-gap", "memory-loss", "fixed-point"] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        assert_eq!(sclab(&[cmd, "--config", &cfg], &a).status.code(), Some(0));
        assert_eq!(sclab(&[cmd, "--config", &cfg, "--threads", "1"], &b).status.code(), Some(0));
        let files = manifest(&a)["outputs"].as_array().unwrap().clone();
        for f in files.iter().map(|v| v.as_str().unwrap()).filter(|f| *f != "manifest.json") {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{cmd}/{f}");
        }
        assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
    }
    let ens = fs::read_to_string(tmp.path().join("particles-gap-a/ensemble_200.csv")).unwrap();
    assert_eq!(ens.lines().next(), Some("u,v"));
    assert_eq!(ens.lines().count(), 201);
}

/// The default ε grid at n = 32. Regenerate with `SCLAB_BLESS=1`.
#[test]
fn sweep_matches_golden_file() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sweep_n32.csv");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = sclab(&["sweep", "--config", &config("sweep.toml"), "--resolution", "32"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let got = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(got.lines().count(), 11);
    if std::env::var_os("SCLAB_BLESS").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(&golden).expect("golden file present"));
}
