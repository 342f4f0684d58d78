mod common;

use std::fs;
use std::thread;

use common::{path_str, run_ok, Server};

fn trained_model(dir: &std::path::Path) -> std::path::PathBuf {
    let p = |n: &str| dir.join(n);
    run_ok(&[
        "synth",
        "--per-class",
        "2",
        "--seed",
        "3",
        "--out",
        path_str(&p("data")),
        "--recording",
        "16",
    ]);
    run_ok(&[
        "featurize",
        "--manifest",
        path_str(&p("data/manifest.csv")),
        "--out",
        path_str(&p("f.csv")),
    ]);
    run_ok(&[
        "train",
        "--features",
        path_str(&p("f.csv")),
        "--out",
        path_str(&p("m.json")),
        "--epochs",
        "2",
    ]);
    p("m.json")
}

#[test]
fn endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let server = Server::start(&model);

    let (status, body) = server.request("GET", "/healthz", b"");
    assert_eq!(status, 200);
    let health: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert!(health["model_id"].as_str().unwrap().starts_with("mlp-"));
    assert_eq!(health["version"], env!("CARGO_PKG_VERSION"));

    let (status, body) = server.request("POST", "/classify", b"\x13\x37random bytes, not a wav");
    assert_eq!(status, 400);
    let err: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["error"], "malformed-audio");

    let wav = fs::read(dir.path().join("data/recording.wav")).unwrap();
    let (status, body) = server.request("POST", "/classify", &wav);
    assert_eq!(status, 200);
    let report: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(report["source"], "upload");
    assert_eq!(report["model_id"], health["model_id"]);

    let (status, _) = server.request("GET", "/nowhere", b"");
    assert_eq!(status, 404);
}

#[test]
fn concurrent_requests_get_identical_responses() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model(dir.path());
    let server = Server::start(&model);
    let wav = fs::read(dir.path().join("data/recording.wav")).unwrap();
    let bodies: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = (0..6)
            .map(|_| s.spawn(|| server.request("POST", "/classify?source=field-7", &wav)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(bodies.iter().all(|(status, _)| *status == 200));
    assert!(bodies.windows(2).all(|w| w[0].1 == w[1].1));
}

#[test]
fn unloadable_model_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("m.json");
    fs::write(&bad, "{}").unwrap();
    let out = common::birdcall()
        .args(["serve", "--model", path_str(&bad), "--addr", "127.0.0.1:0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
