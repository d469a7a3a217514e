use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quatfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quatfield"))
        .args(args)
        .env_remove("QUATFIELD_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn empty_config_exits_2_listing_missing_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "empty.toml", "");
    let out_dir = tmp.path().join("out");
    let o = quatfield(&["run", "solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["domain", "metric", "resolution", "seed"] {
        assert!(err.contains(key), "stderr does not mention {key}: {err}");
    }
}

#[test]
fn schema_violations_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let bad = [
        "seed = 1\nresolution = [9]\ndomain = { kind = \"box\" }\nmetric = { preset = \"flat\" }\ncolour = 3\n",
        "seed = 1\nresolution = [3]\ndomain = { kind = \"box\" }\nmetric = { preset = \"flat\" }\n",
        "seed = 1\nresolution = [9]\ndomain = { kind = \"sphere\" }\nmetric = { preset = \"flat\" }\n",
    ];
    for (i, text) in bad.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.toml"), text);
        let o = quatfield(&["run", "solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "config {i}");
    }
    let o = quatfield(&["run", "solve", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cavity.toml",
        "seed = 1\nresolution = [13]\nmetric = { preset = \"flat\" }\n\
         domain = { kind = \"box-minus-box\", inner_lo = [0.4, 0.4, 0.4], inner_hi = [0.6, 0.6, 0.6] }\n",
    );
    let out_dir = tmp.path().join("out");
    let o = quatfield(&["run", "separate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let d = read_json(&out_dir.join("diagnostics.json"));
    assert_eq!(d["experiment"], "separate");
    assert_eq!(d["kind"], "topology");
}

#[test]
fn control_with_two_points_has_rank_eight() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "control.toml",
        "seed = 7\nresolution = [17]\ndomain = { kind = \"box\" }\nmetric = { preset = \"flat\" }\n",
    );
    let out_dir = tmp.path().join("out");
    let o = quatfield(&["run", "control", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(&out_dir.join("control.json"));
    assert_eq!(c[0]["rank"], 8);
    assert_eq!(c[0]["singular_values"].as_array().unwrap().len(), 8);
    assert!(c[0]["closed_loop_defect"].as_f64().unwrap() < 1e-2);
    assert!(out_dir.join("control_n17.bin").exists());
    let m = read_json(&out_dir.join("manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["quatfield"].is_string());
}

#[test]
fn manufactured_convergence_ratio_at_least_3_5() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "conv.toml",
        "seed = 7\nresolution = [17, 33, 65]\ndomain = { kind = \"box\" }\n\
         metric = { preset = \"flat\" }\n[convergence]\nstudy = \"manufactured\"\n",
    );
    let out_dir = tmp.path().join("out");
    let o = quatfield(&["run", "convergence", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["n", "h", "error", "ratio"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][3], "");
    for row in &rows[1..] {
        let ratio: f64 = row[3].parse().unwrap();
        assert!(ratio >= 3.5, "ratio {ratio}");
    }
}

fn run_to(dir: &Path, sub: &str, cfg: &str, extra: &[&str]) {
    let mut args = vec!["run", sub, "--config", cfg, "--out", dir.to_str().unwrap(), "--jobs", "1"];
    args.extend_from_slice(extra);
    let o = quatfield(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

fn without_wall_time(p: &Path) -> Value {
    let mut v = read_json(p);
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "det.toml",
        "seed = 11\nresolution = [11]\ndomain = { kind = \"box\" }\n\
         metric = { preset = \"conformal-sine\", amplitude = 0.3 }\n[dictionary]\nsize = 24\n",
    );
    for sub in ["solve", "control", "density", "jets"] {
        let (a, b) = (tmp.path().join(format!("{sub}_a")), tmp.path().join(format!("{sub}_b")));
        run_to(&a, sub, &cfg, &[]);
        run_to(&b, sub, &cfg, &[]);
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() > 1);
        for name in names {
            let (pa, pb) = (a.join(&name), b.join(&name));
            if name == "manifest.json" {
                assert_eq!(without_wall_time(&pa), without_wall_time(&pb));
            } else {
                assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap(), "{sub}: {name:?} differs");
            }
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed.toml",
        "seed = 3\nresolution = [11]\ndomain = { kind = \"box\" }\nmetric = { preset = \"flat\" }\n[solve]\ncontrol_index = 20\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_to(&a, "solve", &cfg, &[]);
    run_to(&b, "solve", &cfg, &["--seed", "4"]);
    assert_eq!(read_json(&b.join("manifest.json"))["seed"], 4);
    assert_ne!(fs::read(a.join("solve.csv")).unwrap(), fs::read(b.join("solve.csv")).unwrap());
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "env.toml",
        "seed = 3\nresolution = [9]\ndomain = { kind = \"box\" }\nmetric = { preset = \"flat\" }\n",
    );
    let dir = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_quatfield"))
        .args(["run", "solve", "--config", &cfg])
        .env("QUATFIELD_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.join("manifest.json").exists());
    assert!(dir.join("solve.csv").exists());
}
