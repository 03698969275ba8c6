//! End-to-end runs of the `hiner` binary on a small synthetic scene.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// 12x12x6 scene, three classes, a decoder that upsamples 3x3 by 2 then 2.
const SMALL: &[&str] = &[
    "--set",
    "synth.height=12",
    "--set",
    "synth.width=12",
    "--set",
    "synth.bands=6",
    "--set",
    "synth.classes=3",
    "--set",
    "model.strides=[2,2]",
    "--set",
    "model.embed=[3,3,4]",
    "--set",
    "model.width_floor=4",
    "--set",
    "train.lr=0.01",
];

fn hiner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiner")).args(args).output().expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stdout {} stderr {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn failure(out: &Output) -> (i32, Value) {
    assert!(!out.status.success());
    let code = out.status.code().unwrap();
    let record: Value = serde_json::from_slice(&out.stdout).expect("error record is JSON");
    assert_eq!(record["error"]["exit_code"], code);
    (code, record)
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

struct Scene {
    dir: TempDir,
}

impl Scene {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let s = Scene { dir };
        let mut args = vec!["synth", "--cube-out", s.cube_str(), "--labels-out", s.labels_str()];
        args.extend_from_slice(SMALL);
        let report = ok_json(&hiner(&args));
        assert_eq!(report["dims"], serde_json::json!([12, 12, 6]));
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cube_str(&self) -> &str {
        leak(self.path("cube.json"))
    }

    fn labels_str(&self) -> &str {
        leak(self.path("labels"))
    }

    fn encode(&self, stream: &str, extra: &[&str]) -> Output {
        self.encode_at(stream, "2500", extra)
    }

    fn encode_at(&self, stream: &str, budget: &str, extra: &[&str]) -> Output {
        let mut args = vec!["encode", "--input", self.cube_str(), "--stream-out", stream, "--epochs", "20", "--budget", budget];
        args.extend_from_slice(SMALL);
        args.extend_from_slice(extra);
        hiner(&args)
    }
}

fn leak(p: PathBuf) -> &'static str {
    Box::leak(p.to_string_lossy().into_owned().into_boxed_str())
}

fn s(p: &Path) -> &'static str {
    leak(p.to_path_buf())
}

#[test]
fn synth_report_schema() {
    let scene = Scene::new();
    let mut args = vec!["synth", "--cube-out", scene.cube_str(), "--labels-out", scene.labels_str()];
    args.extend_from_slice(SMALL);
    let r = ok_json(&hiner(&args));
    assert_eq!(keys(&r), set(&["command", "config", "cube", "labels", "dims", "train_pixels", "test_pixels"]));
    assert_eq!(r["train_pixels"].as_u64().unwrap() + r["test_pixels"].as_u64().unwrap(), 144);
}

#[test]
fn encode_report_schema_and_rate_identity() {
    let scene = Scene::new();
    let stream = s(&scene.path("a.hinr"));
    let r = ok_json(&scene.encode(stream, &[]));
    assert_eq!(
        keys(&r),
        set(&[
            "command",
            "config",
            "stream",
            "dims",
            "widths",
            "bitwidth",
            "payload_bytes",
            "file_bytes",
            "sizes",
            "bpppb",
            "file_bpppb",
            "compression_ratio",
            "psnr_float",
            "psnr_quantized",
            "psnr_float_per_band",
            "psnr_quantized_per_band",
            "wall_time_secs",
            "rd_point",
        ])
    );
    assert_eq!(keys(&r["rd_point"]), set(&["label", "bpppb", "mean_psnr", "compression_ratio"]));
    let payload = r["payload_bytes"].as_f64().unwrap();
    assert_eq!(r["bpppb"].as_f64().unwrap(), 8.0 * payload / (12.0 * 12.0 * 6.0));
    assert_eq!(r["compression_ratio"].as_f64().unwrap(), 16.0 / r["bpppb"].as_f64().unwrap());
    assert_eq!(r["file_bytes"].as_u64().unwrap(), std::fs::metadata(stream).unwrap().len());
    assert_eq!(r["config"]["train"]["epochs"], 20);
    assert_eq!(r["psnr_quantized_per_band"].as_array().unwrap().len(), 6);
}

#[test]
fn encode_is_byte_deterministic() {
    let scene = Scene::new();
    let (a, b) = (s(&scene.path("a.hinr")), s(&scene.path("b.hinr")));
    ok_json(&scene.encode(a, &[]));
    ok_json(&scene.encode(b, &[]));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let c = s(&scene.path("c.hinr"));
    ok_json(&scene.encode(c, &["--seed", "5"]));
    assert_ne!(std::fs::read(a).unwrap(), std::fs::read(c).unwrap());
}

#[test]
fn unreachable_budget_is_a_config_error() {
    let scene = Scene::new();
    let (code, rec) = failure(&scene.encode_at(s(&scene.path("x.hinr")), "10", &[]));
    assert_eq!(code, 2);
    assert_eq!(rec["error"]["kind"], "config");
}

#[test]
fn decode_psnr_matches_encode_and_is_omitted_without_reference() {
    let scene = Scene::new();
    let stream = s(&scene.path("a.hinr"));
    let enc = ok_json(&scene.encode(stream, &[]));
    let out = s(&scene.path("decoded.json"));
    let dec = ok_json(&hiner(&["decode", "--stream", stream, "--cube-out", out, "--reference", scene.cube_str()]));
    assert_eq!(dec["psnr"], enc["psnr_quantized"]);
    assert_eq!(dec["psnr_per_band"], enc["psnr_quantized_per_band"]);
    let bare = ok_json(&hiner(&["decode", "--stream", stream, "--cube-out", out]));
    assert_eq!(keys(&bare), set(&["command", "config", "stream", "output", "dims"]));

    // the written cube scores the same through eval
    let ev = ok_json(&hiner(&["eval", "--input", out, "--reference", scene.cube_str()]));
    assert_eq!(ev["mean_psnr"], enc["psnr_quantized"]);
    let ev = ok_json(&hiner(&["eval", "--stream", stream, "--reference", scene.cube_str()]));
    assert_eq!(ev["bpppb"], enc["bpppb"]);
    assert_eq!(ev["mean_psnr"], enc["psnr_quantized"]);
}

#[test]
fn decode_failures_are_distinct() {
    let scene = Scene::new();
    let out = s(&scene.path("d.json"));
    let (code, rec) = failure(&hiner(&["decode", "--stream", s(&scene.path("missing.hinr")), "--cube-out", out]));
    assert_eq!((code, rec["error"]["kind"].as_str().unwrap()), (3, "io"));

    let stream = s(&scene.path("a.hinr"));
    ok_json(&scene.encode(stream, &[]));
    let mut bytes = std::fs::read(stream).unwrap();
    bytes[0] = b'X';
    let bad = s(&scene.path("bad.hinr"));
    std::fs::write(bad, &bytes).unwrap();
    let (code, rec) = failure(&hiner(&["decode", "--stream", bad, "--cube-out", out]));
    assert_eq!((code, rec["error"]["kind"].as_str().unwrap()), (3, "data"));
    assert!(rec["error"]["message"].as_str().unwrap().contains("magic"), "{rec}");
}

#[test]
fn ablate_csv_format() {
    let mut args = vec![
        "ablate",
        "--epochs",
        "3",
        "--budget",
        "2500",
        "--set",
        "ablate.variants=[\"default\",\"l1_only\"]",
        "--set",
        "ablate.embed_sizes=[[3,3,2],[3,3,4],[9,9,9]]",
    ];
    args.extend_from_slice(SMALL);
    let out = hiner(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variant,bpppb,psnr_float,psnr_q8");
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["default", "l1_only", "embed_3x3x2", "embed_3x3x4", "embed_9x9x9"]);
    for l in &lines[1..4] {
        assert!(l.split(',').skip(1).all(|v| v.parse::<f64>().unwrap().is_finite()), "{l}");
    }
    // the oversized embedding cannot meet the budget; its row is recorded as NaN
    assert!(lines[5].ends_with("NaN,NaN,NaN"), "{}", lines[5]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("embed_9x9x9"));
}

#[test]
fn classify_report_has_every_variant() {
    let scene = Scene::new();
    let stream = s(&scene.path("a.hinr"));
    ok_json(&scene.encode(stream, &[]));
    let ckpt = s(&scene.path("clf.json"));
    let r = ok_json(&hiner(&[
        "classify",
        "--stream",
        stream,
        "--labels",
        scene.labels_str(),
        "--checkpoint-out",
        ckpt,
        "--set",
        "classify.epochs=3",
        "--set",
        "classify.patch_size=3",
        "--set",
        "classify.dim=4",
    ]));
    assert_eq!(keys(&r), set(&["command", "config", "stream", "labels", "bpppb", "compression_ratio", "variants"]));
    let variants = r["variants"].as_array().unwrap();
    let names: Vec<&str> = variants.iter().map(|v| v["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["plain", "asw", "asw_isi"]);
    for v in variants {
        assert_eq!(
            keys(v),
            set(&[
                "variant",
                "beta",
                "eta",
                "enable_prob",
                "overall_accuracy",
                "average_accuracy",
                "kappa",
                "per_class_accuracy",
                "confusion",
                "wall_time_secs",
            ])
        );
        assert!(v["kappa"].is_number());
    }
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(ckpt).unwrap()).unwrap();
    assert_eq!(keys(&saved), set(&["asw", "asw_isi", "plain"]));
}

#[test]
fn classify_config_errors() {
    let scene = Scene::new();
    let stream = s(&scene.path("a.hinr"));
    ok_json(&scene.encode(stream, &[]));
    let (code, _) = failure(&hiner(&["classify", "--stream", stream, "--labels", s(&scene.path("nolabels"))]));
    assert_eq!(code, 2);
    let (code, _) = failure(&hiner(&["classify", "--stream", stream]));
    assert_eq!(code, 2);

    // spectral interpolation needs the encoder side channel
    let bare = s(&scene.path("bare.hinr"));
    ok_json(&scene.encode(bare, &["--set", "model.include_encoder=false"]));
    let (code, rec) = failure(&hiner(&[
        "classify",
        "--stream",
        bare,
        "--labels",
        scene.labels_str(),
        "--set",
        "classify.epochs=1",
        "--set",
        "classify.patch_size=3",
    ]));
    assert_eq!(code, 2);
    assert!(rec["error"]["message"].as_str().unwrap().contains("encoder"));
}

#[test]
fn unknown_config_key_is_rejected_before_work() {
    let (code, rec) = failure(&hiner(&["synth", "--set", "synth.colour=3"]));
    assert_eq!(code, 2);
    assert!(rec["error"]["message"].as_str().unwrap().contains("colour"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\n[synth]\nheight = 8\nwidth = 8\nbands = 4\nclasses = 2\n").unwrap();
    let cube = s(&dir.path().join("c.json"));
    let labels = s(&dir.path().join("l"));
    let r = ok_json(&hiner(&["synth", "--config", s(&cfg), "--cube-out", cube, "--labels-out", labels, "--seed", "9"]));
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["dims"], serde_json::json!([8, 8, 4]));
}

#[test]
fn convert_round_trips_between_formats() {
    let scene = Scene::new();
    let envi = s(&scene.path("cube.hdr"));
    ok_json(&hiner(&["convert", "--input", scene.cube_str(), "--cube-out", envi]));
    let back = s(&scene.path("back.json"));
    let r = ok_json(&hiner(&["convert", "--input", envi, "--cube-out", back]));
    assert_eq!(r["dims"], serde_json::json!([12, 12, 6]));
    // 16-bit counts come back normalized by their global maximum
    let (orig, _) = hiner::hsi_io::read_container(Path::new(scene.cube_str())).unwrap();
    let (back, _) = hiner::hsi_io::read_container(Path::new(back)).unwrap();
    let max = orig.global_max();
    for (a, b) in orig.data().iter().zip(back.data()) {
        assert!((a / max - b).abs() < 1e-4, "{a} {b}");
    }
}

#[test]
fn usage_errors_are_config_errors() {
    let (code, rec) = failure(&hiner(&["encode", "--budget", "1", "--budget", "2"]));
    assert_eq!((code, rec["error"]["kind"].as_str().unwrap()), (2, "config"));
    let (code, _) = failure(&hiner(&["nosuchcommand"]));
    assert_eq!(code, 2);
}

#[test]
fn report_goes_to_out_file() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let out = hiner(&[
        "synth",
        "--cube-out",
        s(&dir.path().join("c.json")),
        "--labels-out",
        s(&dir.path().join("l")),
        "--out",
        s(&report),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["command"], "synth");
}
