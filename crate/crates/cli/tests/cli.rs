use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dseno_cli::ablate::cmd_ablate;
use dseno_cli::export::{write_fields, FieldFormat};
use dseno_cli::{cmd_evaluate, cmd_export, cmd_train, Overrides};
use dseno_core::data::SplitKind;
use dseno_core::Tensor;

fn dseno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dseno")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Narrow Darcy-C on a 17x17 grid: trains in well under a second per epoch.
fn tiny_config(dir: &Path, out: &str, epochs: usize) -> PathBuf {
    write(
        dir,
        &format!("{out}.cfg"),
        &format!(
            "model = Darcy-C\nwidth = 6\nsynthetic = darcy\nresolution = 17\nn_train = 8\nn_test = 4\n\
             epochs = {epochs}\nbatch_size = 4\nthreads = 1\nout = {}\n",
            dir.join(out).display()
        ),
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn missing_manifest_exits_with_data_status_and_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.cfg", "manifest = nowhere/darcy.manifest\n");
    let out = dseno(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("nowhere/darcy.manifest"), "{}", text(&out.stderr));
}

#[test]
fn configuration_errors_exit_with_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.cfg", "model = Darcy-C\nlearning_rate = 3\n");
    let out = dseno(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("learning_rate"));

    assert_eq!(dseno(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(dseno(&["--help"]).status.code(), Some(0));
}

#[test]
fn zero_epochs_reports_the_default_model() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let cfg = write(
        tmp.path(),
        "run.cfg",
        &format!("resolution = 32\nn_train = 2\nn_test = 2\nout = {}\n", run.display()),
    );
    let out = dseno(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "0", "--quiet"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    assert!(report.contains("model: Darcy-F"), "{report}");
    assert!(report.contains("params: 505121 (0.505M)"), "{report}");
    assert!(report.contains("epochs: 0"), "{report}");
    assert_eq!(fs::read_to_string(run.join("report.txt")).unwrap(), report);
}

#[test]
fn echoed_configuration_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "first", 2);
    cmd_train(&cfg, &Overrides::default(), false, &mut |_| {}).unwrap();
    let echoed = tmp.path().join("first/config.cfg");
    let again = Overrides {
        out: Some(tmp.path().join("second")),
        ..Overrides::default()
    };
    cmd_train(&echoed, &again, false, &mut |_| {}).unwrap();
    let (a, b) = (files(&tmp.path().join("first/checkpoints/last")), files(&tmp.path().join("second/checkpoints/last")));
    let same = |k: &String| k.starts_with("params") || k.starts_with("moments") || k == "history.csv";
    assert!(a.keys().filter(|k| same(k)).count() > 2);
    for (k, v) in a.iter().filter(|(k, _)| same(k)) {
        assert_eq!(Some(v), b.get(k), "{k}");
    }
}

#[test]
fn evaluate_and_export_from_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "run", 1);
    let summary = cmd_train(&cfg, &Overrides::default(), false, &mut |_| {}).unwrap();
    let ckpt = tmp.path().join("run/checkpoints/last");
    let err = cmd_evaluate(&ckpt, None, SplitKind::Test).unwrap();
    assert!((err - summary.report.final_test).abs() <= 1e-6 * err.max(1.0));

    let out = dseno(&["evaluate", "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(text(&out.stdout).starts_with("rel_l2: "));

    let dir = tmp.path().join("export");
    let written = cmd_export(&ckpt, None, SplitKind::Test, 1, FieldFormat::Csv, &dir).unwrap();
    assert_eq!(written.len(), 3);
    let truth = fs::read_to_string(dir.join("test_1_truth_c0.csv")).unwrap();
    assert_eq!(truth.lines().count(), 17);
    assert!(truth.lines().all(|l| l.split(',').count() == 17));

    let far = cmd_export(&ckpt, None, SplitKind::Test, 4, FieldFormat::Csv, &dir).unwrap_err();
    assert_eq!(far.kind(), dseno_core::ErrorKind::Config);
}

#[test]
fn perfect_prediction_exports_a_zero_error_field() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = Tensor::<f64>::from_fn(&[1, 85, 85], |i| ((i % 85) as f64 * 0.1).sin());
    write_fields(tmp.path(), "oracle", &truth, &truth, FieldFormat::Csv).unwrap();
    let err = fs::read_to_string(tmp.path().join("oracle_error_c0.csv")).unwrap();
    let values: Vec<f64> = err.lines().flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap())).collect();
    assert_eq!(values.len(), 85 * 85);
    assert!(values.iter().all(|&v| v == 0.0));
}

fn dry_run(matrix: &str) -> Vec<(String, usize)> {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "m.matrix", matrix);
    let out = dseno(&["ablate", "--matrix", path.to_str().unwrap(), "--dry-run"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = text(&out.stdout);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("model,blocks,params,params_m,rel_l2"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn ablate_dry_run_counts_the_airfoil_depth_sweep() {
    let rows = dry_run("benchmark = Airfoil\ndepth = A, B, C, D, E, F, G\n");
    let want = [156_289, 303_937, 451_585, 599_233, 746_881, 894_529, 1_042_177];
    assert_eq!(rows.len(), want.len());
    for ((name, count), (letter, w)) in rows.iter().zip("ABCDEFG".chars().zip(want)) {
        assert_eq!(name, &format!("Airfoil-{letter}"));
        assert_eq!(*count, w, "{name}");
    }
}

#[test]
fn ablate_dry_run_counts_darcy_resolution_rows() {
    let rows = dry_run("benchmark = Darcy\nresolution = 32, 64, 128, 256\n");
    let counts: Vec<usize> = rows.iter().map(|(_, c)| *c).collect();
    assert_eq!(counts, [255_857, 588_209, 505_121, 588_209]);
}

#[test]
fn empty_matrix_gives_an_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write(tmp.path(), "empty.matrix", "# nothing to run\n");
    for dry in [true, false] {
        let csv = cmd_ablate(&path, dry, &mut |_| {}).unwrap();
        assert_eq!(csv, "model,blocks,params,params_m,rel_l2\n");
    }
}

#[test]
fn inspect_prints_the_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "m.cfg", "model = NS-A\n");
    let out = dseno(&["inspect", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let s = text(&out.stdout);
    assert!(s.contains("params: 666561 (0.667M)"), "{s}");
    assert!(s.contains("dilations: [15,25,17,13,7,5,3,1]"), "{s}");
}

/// Autoregressive sanity run on generated vorticity; slow on one core.
#[test]
#[ignore]
fn navier_stokes_rollout_beats_the_zero_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "ns.cfg",
        &format!(
            "model = NS-A\nsynthetic = ns\nn_train = 12\nn_test = 4\nepochs = 30\nbatch_size = 4\nseed = 0\nout = {}\n",
            tmp.path().join("ns").display()
        ),
    );
    let summary = cmd_train(&cfg, &Overrides::default(), false, &mut |r| {
        eprintln!("epoch {} train {:.4} test {:.4}", r.epoch, r.train_rel_l2, r.test_rel_l2)
    })
    .unwrap();
    assert!(summary.report.final_test < 1.0, "{}", summary.render());
}
