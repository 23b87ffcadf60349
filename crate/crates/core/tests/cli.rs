use std::process::{Command, Output};

use procinv::render::{default_camera, rasterize, RenderMode};

fn procinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_procinv")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn schema_prints_json() {
    let o = procinv(&["schema", "vase", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["generator_id"], "vase");
    assert_eq!(v["params"].as_array().unwrap().len(), 8);

    let o = procinv(&["schema", "chair"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("seat_width"));
}

#[test]
fn gen_writes_obj() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chair.obj");
    let o = procinv(&["gen", "chair", "--out", out.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["triangles"], 72);
    let obj = std::fs::read_to_string(&out).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 72);

    let params = dir.path().join("p.json");
    std::fs::write(&params, r#"{"has_arms": "yes"}"#).unwrap();
    let o = procinv(&["gen", "chair", "--params", params.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = procinv(&["gen", "chair", "--params", r#"{"seat_width": 2.0}"#, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seat_width"));
}

#[test]
fn dataset_train_invert_eval_flow() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let o = procinv(&["dataset", "table", "--n", "12", "--seed", "4", "--image-size", "32", "--out", &p("train.dipd")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = procinv(&["dataset", "table", "--n", "10", "--seed", "5", "--image-size", "32", "--out", &p("test.dipd")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let config = serde_json::json!({
        "batch_size": 4, "steps": 3, "n_layers": 1, "n_heads": 2, "d_model": 16,
        "cond_width": 16, "proj_hidden": 16, "cond": {"mode": "patch", "patch": 8, "image_size": 32}
    });
    std::fs::write(p("cfg.json"), config.to_string()).unwrap();
    let o = procinv(&["train", "--config", &p("cfg.json"), "--dataset", &p("train.dipd"), "--out", &p("run"), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["steps"], 3);
    let log = std::fs::read_to_string(dir.path().join("run/loss.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("step,loss,lr"));
    assert_eq!(log.lines().count(), 4);
    let ckpt = p("run/checkpoint.dipc");

    let s = procinv::generators::schema("table").unwrap();
    let mesh = procinv::generators::generate(&s, &s.default_params()).unwrap();
    let img = rasterize(&mesh, &default_camera().with_size(32), RenderMode::Shaded).unwrap();
    std::fs::write(p("in.pgm"), img.to_pgm_bytes()).unwrap();
    let o = procinv(&["invert", "--image", &p("in.pgm"), "--ckpt", &ckpt, "--k", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(v[0]["params"]["height"].is_number());

    let big = rasterize(&mesh, &default_camera().with_size(40), RenderMode::Shaded).unwrap();
    std::fs::write(p("big.pgm"), big.to_pgm_bytes()).unwrap();
    let o = procinv(&["invert", "--image", &p("big.pgm"), "--ckpt", &ckpt]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("32x32"), "{}", stderr(&o));

    let o = procinv(&["eval", "--ckpt", &ckpt, "--testset", &p("test.dipd"), "--out", &p("report.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("F-Score"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(p("report.json")).unwrap()).unwrap();
    assert_eq!(report["count"], 10);

    let o = procinv(&["mcmc", "table", "--image", &p("in.pgm"), "--iters", "20", "--trace", &p("trace.csv"), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["forward_count"], 21);
    let trace = std::fs::read_to_string(p("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iter,score,accepted"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(procinv(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(procinv(&["gen", "chair"]).status.code(), Some(2));
    assert_eq!(procinv(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one() {
    let o = procinv(&["schema", "sofa", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["error"].as_str().unwrap().contains("sofa"));
    let o = procinv(&["invert", "--image", "/nonexistent.pgm", "--ckpt", "/nonexistent.dipc"]);
    assert_eq!(o.status.code(), Some(1));
}
