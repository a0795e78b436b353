use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bvd_cli::io::{DiagramJson, SCHEMA_VERSION};

const THREE_SITES: &str = "# x,y\n0.2,0.3\n0.7,0.4\n0.4,0.8\n";

fn bvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvd")).args(args).output().expect("bvd runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn three_site_diagram_renders_three_cells() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.csv", THREE_SITES);
    let svg = dir.path().join("out.svg");
    let json = dir.path().join("out.json");
    let out = bvd(&["diagram", "--gen", "shannon", "--type", "first", "--in", s(&pts), "--clip", "0.05,0.05,0.95,0.95", "--svg", s(&svg), "--out", s(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 3);
    assert_eq!(svg.matches("class=\"site\"").count(), 3);
    assert!(svg.contains("viewBox=\"0 0 1000.000000 1000.000000\""));
    let doc: DiagramJson = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(doc.version, SCHEMA_VERSION);
    assert_eq!(doc.diagram.cells.len(), 3);
    assert_eq!(doc.diagram.generator, "shannon");
}

#[test]
fn json_round_trips_through_the_schema_types() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.csv", THREE_SITES);
    let out = bvd(&["diagram", "--gen", "norm_like:3", "--type", "k-order", "--k", "2", "--in", s(&pts), "--clip", "0.1,0.1,0.9,0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let doc: DiagramJson = serde_json::from_str(&text).unwrap();
    assert_eq!(bvd_cli::io::to_json(&doc).unwrap(), text);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = || bvd(&["lloyd", "--gen", "burg", "--clip", "0.1,0.1,0.9,0.9", "--k", "5", "--seed", "7", "--grid", "64"]).stdout;
    let (a, b) = (run(), run());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let pts = write(dir.path(), "pts.csv", THREE_SITES);
    let tri = || bvd(&["triangulate", "--gen", "exponential", "--kind", "geodesic", "--in", s(&pts)]).stdout;
    assert_eq!(tri(), tri());
}

#[test]
fn ppm_first_pixel_is_the_top_left_corner() {
    let dir = tempfile::tempdir().unwrap();
    // Site 1 sits near the top-left corner, site 0 near the bottom-right.
    let pts = write(dir.path(), "pts.csv", "0.8,0.2\n0.2,0.8\n");
    let ppm = dir.path().join("out.ppm");
    let out = bvd(&["raster", "--gen", "squared_half_norm", "--in", s(&pts), "--clip", "0,0,1,1", "--resolution", "8", "--ppm", s(&ppm)]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = std::fs::read(ppm).unwrap();
    let header = b"P6\n8 8\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 8 * 8 * 3);
    // PALETTE[1] = #f28e2b
    assert_eq!(&bytes[header.len()..header.len() + 3], &[0xf2, 0x8e, 0x2b]);
}

#[test]
fn kl_matches_the_poisson_closed_form() {
    let out = bvd(&["kl", "--family", "poisson", "--p", "2", "--q", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let kl = v["kl_natural_bregman"].as_f64().unwrap();
    assert!((kl - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-12);
}

#[test]
fn kl_accepts_negative_normal_means() {
    let out = bvd(&["kl", "--family", "normal", "--p", "-1,2", "--q", "0.5,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-12);
}

#[test]
fn empty_point_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "empty.csv", "# only a header\n\n");
    let out = bvd(&["diagram", "--gen", "shannon", "--in", s(&pts), "--clip", "0.1,0.1,0.9,0.9"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 0") && err.contains("no points"), "{err}");
}

#[test]
fn bad_row_reports_its_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "bad.csv", "0.1,0.2\n# comment\n0.3,x\n");
    let out = bvd(&["diagram", "--gen", "shannon", "--in", s(&pts), "--clip", "0.1,0.1,0.9,0.9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.csv", THREE_SITES);
    // Clip leaves the Shannon domain.
    assert_eq!(bvd(&["diagram", "--gen", "shannon", "--in", s(&pts), "--clip", "0,0,1,1"]).status.code(), Some(2));
    // Unknown generator.
    assert_eq!(bvd(&["diagram", "--gen", "nope", "--in", s(&pts), "--clip", "0.1,0.1,0.9,0.9"]).status.code(), Some(2));
    // Missing required flag.
    assert_eq!(bvd(&["diagram", "--gen", "shannon"]).status.code(), Some(2));
    // Weight count mismatch.
    assert_eq!(
        bvd(&["diagram", "--gen", "shannon", "--type", "weighted", "--weights", "0.1", "--in", s(&pts), "--clip", "0.1,0.1,0.9,0.9"]).status.code(),
        Some(2)
    );
}

#[test]
fn numerical_failures_exit_with_three() {
    let out = bvd(&["epsnet", "--gen", "squared_half_norm", "--clip", "0,0,1,1", "--epsilon", "1e-6", "--max-points", "20"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn triangulate_compare_reports_edge_differences() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.csv", "0.1,0.1\n0.9,0.15\n0.5,0.9\n0.45,0.4\n0.2,0.7\n");
    let svg = dir.path().join("t.svg");
    let out = bvd(&["triangulate", "--gen", "shannon", "--in", s(&pts), "--compare", "--overlay", "--clip", "0.05,0.05,0.95,0.95", "--svg", s(&svg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["comparison"]["other_kind"], "geodesic");
    assert!(v["comparison"]["only_in_this"].is_array());
    let svg = std::fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 5);
    assert!(svg.matches("class=\"edge\"").count() >= 7);
}

#[test]
fn raster_check_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.csv", THREE_SITES);
    let out = bvd(&["raster", "--gen", "burg", "--type", "second", "--in", s(&pts), "--clip", "0.1,0.1,0.9,0.9", "--resolution", "96", "--check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["agreement"]["fraction"].as_f64().unwrap() > 0.99);
    assert_eq!(v["labels"].as_array().unwrap().len(), 96 * 96);
}

#[test]
fn kmeans_and_divergence_run() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "d.csv", "1,1,1\n1.1,0.9,1\n5,5,5\n5.2,4.9,5\n");
    let out = bvd(&["kmeans", "--gen", "burg", "--in", s(&pts), "--k", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let a = v["assignments"].as_array().unwrap();
    assert_eq!(a[0], a[1]);
    assert_eq!(a[2], a[3]);
    assert_ne!(a[0], a[2]);
    assert_eq!(v["provenance"]["seed"], 3);

    let out = bvd(&["divergence", "--gen", "shannon", "--p", "0.3,0.6", "--q", "0.7,0.2"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let (d, dual) = (v["divergence"].as_f64().unwrap(), v["dual_divergence"].as_f64().unwrap());
    assert!((d - dual).abs() < 1e-10);
}

#[test]
fn selftest_passes() {
    let out = bvd(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn epsnet_writes_points_and_figure() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("net.svg");
    let out = bvd(&["epsnet", "--gen", "shannon", "--clip", "0.1,0.1,0.9,0.9", "--epsilon", "0.05", "--svg", s(&svg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = v["points"].as_array().unwrap().len();
    assert!(v["error"].as_f64().unwrap() <= 0.05);
    assert_eq!(std::fs::read_to_string(svg).unwrap().matches("class=\"site\"").count(), n);
}
