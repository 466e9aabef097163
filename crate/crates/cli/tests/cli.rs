/*
Copyright 2026 The palm-dl Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use palm_dl::tensor::{write_tensor, DenseTensor};
use serde_json::Value;

fn dl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dl"))
        .args(args)
        .env_remove("DL_DATA_DIR")
        .output()
        .expect("run dl")
}

fn ok(args: &[&str]) -> String {
    let out = dl(args);
    assert!(
        out.status.success(),
        "dl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    dl(args).status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trace rows with the wall-clock column removed.
fn trace_without_time(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "time_s").unwrap();
    text.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(t);
            f.join(",")
        })
        .collect()
}

#[test]
fn synthetic_spalm_trace_has_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--preset", "synthetic", "--variant", "spalm", "--max-iter", "50", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 52);
    assert!(lines[0].starts_with("iter,H,residual,time_s,alpha_1,alpha_2"));
    assert!(lines[1].starts_with("0,"));
    assert!(lines[51].starts_with("50,"));
    assert!(out.join("model.bin").exists());
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["iterations"], 50);
    assert_eq!(summary["seed"], 0);
    let solver = &summary["config"]["solver"];
    assert_eq!(solver["rho"], 0.5);
    assert_eq!(solver["delta"], 1e-4);
    assert_eq!(solver["alpha_max"], 1e10);
    assert_eq!(summary["config"]["data"]["k"], 12);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for variant in ["spalm", "palm", "ipalm-bt"] {
        let a = dir.path().join(format!("{variant}-a"));
        let b = dir.path().join(format!("{variant}-b"));
        for o in [&a, &b] {
            ok(&["train", "--variant", variant, "--seed", "7", "--out", s(o)]);
        }
        assert_eq!(trace_without_time(&a.join("trace.csv")), trace_without_time(&b.join("trace.csv")));
        assert_eq!(fs::read(a.join("model.bin")).unwrap(), fs::read(b.join("model.bin")).unwrap());
    }
    let c = dir.path().join("other-seed");
    ok(&["train", "--seed", "8", "--out", s(&c)]);
    assert_ne!(
        trace_without_time(&c.join("trace.csv")),
        trace_without_time(&dir.path().join("spalm-a/trace.csv"))
    );
}

#[test]
fn tt3_rank_sweep_reports_memory() {
    let dir = tempfile::tempdir().unwrap();
    // synthetic preset: 2x4 images, k = 12, tau = 3, 20 samples
    let (n1, n2, r1, k, tau, samples) = (2, 4, 2, 12, 3, 20);
    let mut models = Vec::new();
    for r2 in [2usize, 4, 8] {
        let out = dir.path().join(format!("r{r2}"));
        ok(&["train", "--formulation", "tt3", "--ranks", &format!("{r2}"), "--out", s(&out)]);
        let summary = json(&out.join("summary.json"));
        let want = n1 * r1 + r1 * n2 * r2 + r2 * k + tau * samples;
        assert_eq!(summary["memory"]["tt"], want, "r2 = {r2}");
        assert_eq!(summary["memory"]["plain"], n1 * n2 * k + tau * samples);
        assert_eq!(summary["config"]["data"]["ranks"], serde_json::json!([r1, r2]));
        models.push(fs::read(out.join("model.bin")).unwrap());
    }
    assert_eq!(models.len(), 3);
    assert_ne!(models[0], models[1]);
}

#[test]
fn tt4_trains_on_factored_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tt4");
    ok(&["train", "--formulation", "tt4", "--image-dims", "2,2,2", "--ranks", "2,2", "--out", s(&out)]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["config"]["data"]["ranks"], serde_json::json!([2, 2, 2]));
    ok(&["classify", "--image-dims", "2,2,2", "--model", s(&out.join("model.bin")), "--eval", "train", "--out", s(&out)]);
    assert_eq!(json(&out.join("classification.json"))["formulation"], "tt4");
}

#[test]
fn planted_model_classifies_its_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    ok(&["synth", "--n-test", "3", "--seed", "4", "--out", s(&data)]);
    let train = data.join("train.bin");
    let test = data.join("test.bin");
    let truth = data.join("truth.bin");
    let model = run.join("model.bin");
    let src = ["--source", "tensor", "--input", s(&train), "--test-input", s(&test)];
    let mut args = vec!["train", "--init-model", s(&truth), "--tau", "1", "--out", s(&run)];
    args.extend(src);
    ok(&args);
    let h = json(&run.join("summary.json"))["final_h"].as_f64().unwrap();
    assert!(h < 1e-20, "H = {h}");
    let mut args = vec!["classify", "--model", s(&model), "--eval", "train", "--out", s(&run)];
    args.extend(src);
    let stdout = ok(&args);
    assert!(stdout.contains("classification rate 1.0000 (20/20)"), "{stdout}");
    let report = json(&run.join("classification.json"));
    assert_eq!(report["rate"], 1.0);
    let csv = fs::read_to_string(run.join("predictions.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "sample_id,true_label,predicted_label");
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn thread_count_does_not_change_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--out", s(&run), "--n-test", "4"]);
    let model = run.join("model.bin");
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    ok(&["classify", "--model", s(&model), "--n-test", "4", "--threads", "1", "--out", s(&one)]);
    ok(&["classify", "--model", s(&model), "--n-test", "4", "--threads", "4", "--out", s(&four)]);
    assert_eq!(
        fs::read(one.join("predictions.csv")).unwrap(),
        fs::read(four.join("predictions.csv")).unwrap()
    );
}

#[test]
fn mismatched_model_and_data_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--out", s(&run)]);
    let model = run.join("model.bin");
    assert_eq!(code(&["classify", "--model", s(&model), "--image-dims", "3,3", "--eval", "train", "--out", s(&run)]), 2);
    assert_eq!(code(&["classify", "--model", s(&model), "--n-train", "6", "--eval", "train", "--out", s(&run)]), 2);
    assert_eq!(code(&["train", "--formulation", "tt3", "--init-model", s(&model), "--out", s(&run)]), 2);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = s(&out);
    assert_eq!(code(&["train", "--variant", "newton", "--out", o]), 2);
    assert_eq!(code(&["train", "--formulation", "tt5", "--out", o]), 2);
    assert_eq!(code(&["train", "--rho", "1.5", "--out", o]), 2);
    assert_eq!(code(&["train", "--k", "30", "--out", o]), 2);
    assert_eq!(code(&["train", "--formulation", "tt3", "--ranks", "5,8", "--out", o]), 2);
    assert_eq!(code(&["train", "--formulation", "tt4", "--out", o]), 2);
    assert_eq!(code(&["train", "--source", "mnist", "--out", o]), 2);
    assert_eq!(code(&["train", "--no-such-flag"]), 2);
    assert_eq!(code(&["classify", "--out", o]), 2);
}

#[test]
fn config_file_is_merged_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep settings\nmax_iter = 7\nvariant = palm\nseed = 3\n").unwrap();
    ok(&["train", "--config", s(&cfg), "--variant", "spalm", "--out", s(&out)]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["iterations"], 7);
    assert_eq!(summary["variant"], "spalm");
    assert_eq!(summary["seed"], 3);
    fs::write(&cfg, "max_iter = 7\nlearning_rate = 2\n").unwrap();
    assert_eq!(code(&["train", "--config", s(&cfg), "--out", s(&out)]), 2);
    assert_eq!(code(&["train", "--config", s(&dir.path().join("missing.cfg")), "--out", s(&out)]), 2);
}

#[test]
fn stop_tolerance_ends_runs_early() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    ok(&["train", "--max-iter", "5000", "--stop-tol", "default", "--out", s(&out)]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["stop_reason"], "iterate_variation");
    assert!(summary["iterations"].as_u64().unwrap() < 5000);
    assert_eq!(code(&["train", "--stop-tol", "1,2,3", "--out", s(&out)]), 2);
}

#[test]
fn overflowing_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("big.bin");
    let t = DenseTensor::from_fn(vec![2, 4, 5, 4], |i| if i == [0, 0, 0, 0] { 1e300 } else { 0.1 });
    write_tensor(&input, &t).unwrap();
    let out = dir.path().join("o");
    let c = code(&["train", "--source", "tensor", "--input", s(&input), "--test-input", s(&input), "--out", s(&out)]);
    assert_eq!(c, 3);
}

fn sample_tensor(shape: Vec<usize>) -> DenseTensor {
    let mut n: f64 = 0.0;
    DenseTensor::from_fn(shape, |_| {
        n += 1.0;
        (n * 0.7).sin() + 0.3 * (n * 1.3).cos()
    })
}

#[test]
fn ttsvd_full_rank_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.bin");
    write_tensor(&input, &sample_tensor(vec![3, 4, 5, 2])).unwrap();
    let out = dir.path().join("o");
    ok(&["ttsvd", "--input", s(&input), "--out", s(&out)]);
    let summary = json(&out.join("summary.json"));
    assert!(summary["relative_error"].as_f64().unwrap() <= 1e-10);
    assert_eq!(summary["ranks"], serde_json::json!([3, 10, 2]));
    assert!(out.join("cores.bin").exists());
    let clipped = dir.path().join("c");
    ok(&["ttsvd", "--input", s(&input), "--ranks", "9,9,9", "--out", s(&clipped)]);
    let summary = json(&clipped.join("summary.json"));
    assert_eq!(summary["ranks"], serde_json::json!([3, 9, 2]));
    assert_eq!(summary["clipped"], serde_json::json!([true, false, true]));
}

#[test]
fn ttsvd_detects_rank_one_with_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r1.bin");
    let t = DenseTensor::from_fn(vec![3, 4, 2, 5], |i| {
        (i[0] as f64 + 1.0) * (0.5 - i[1] as f64) * (i[2] as f64 + 2.0) * (1.0 + 0.1 * i[3] as f64)
    });
    write_tensor(&input, &t).unwrap();
    let out = dir.path().join("o");
    let stdout = ok(&["ttsvd", "--input", s(&input), "--tol", "1e-10", "--out", s(&out)]);
    assert!(stdout.contains("ranks 1,1,1"), "{stdout}");
    assert!(json(&out.join("summary.json"))["relative_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn ttsvd_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.bin");
    write_tensor(&input, &sample_tensor(vec![3, 4, 5])).unwrap();
    let o = dir.path().join("o");
    assert_eq!(code(&["ttsvd", "--input", s(&dir.path().join("missing.bin")), "--out", s(&o)]), 2);
    assert_eq!(code(&["ttsvd", "--input", s(&input), "--ranks", "2", "--out", s(&o)]), 2);
    assert_eq!(code(&["ttsvd", "--input", s(&input), "--ranks", "0,2", "--out", s(&o)]), 2);
    fs::write(dir.path().join("junk.bin"), b"not a tensor").unwrap();
    assert_eq!(code(&["ttsvd", "--input", s(&dir.path().join("junk.bin")), "--out", s(&o)]), 2);
}

#[test]
fn mnist_subset_runs_end_to_end() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/mnist");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let d = s(&data);
    ok(&["train", "--preset", "mnist-desk", "--data", d, "--max-iter", "10", "--out", s(&out)]);
    let stdout = ok(&["classify", "--preset", "mnist-desk", "--data", d, "--model", s(&out.join("model.bin")), "--out", s(&out)]);
    let report = json(&out.join("classification.json"));
    assert_eq!(report["total"], 200);
    assert_eq!(report["test_tau"], 20);
    let rate = report["rate"].as_f64().unwrap();
    assert!(stdout.contains(&format!("{rate:.4} ({}/200)", report["correct"])), "{stdout}");
    assert!(rate > 0.3, "rate {rate}");
}
