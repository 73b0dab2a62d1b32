use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use eqpart::io::{parse_partition_json, write_samples_csv};
use eqpart::{planar_variance, Rotation, SampleSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde_json::Value;
use tempfile::TempDir;

fn eqpart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqpart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

/// `Y = X + N(0, 0.5)` or `Y = X^2 + N(0, 0.5)` with `X ~ N(0, 1)`.
fn sample(seed: u64, n: usize, square: bool) -> SampleSet {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let rows: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let x: f64 = r.sample(StandardNormal);
            let y = if square { x * x } else { x };
            [x, y + r.sample(noise)]
        })
        .collect();
    SampleSet::from_rows(&rows).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn corners(dir: &TempDir) -> PathBuf {
    write(dir, "corners.csv", "x,y\n0,0\n1,0\n0,1\n1,1\n")
}

#[test]
fn corners_have_zero_entropy() {
    let dir = TempDir::new().unwrap();
    let input = corners(&dir);
    let p = input.to_str().unwrap();

    let doc = stdout_json(&eqpart(&["estimate", "-i", p, "--has-header", "--method", "equiprobable", "--depth", "1"]));
    assert_eq!(doc["entropy_bits"], 0.0);
    assert_eq!(doc["bin_count"], 4);
    assert_eq!(doc["n"], 4);
    assert_valid("estimate.schema.json", &doc);

    let doc = stdout_json(&eqpart(&["estimate", "-i", p, "--has-header", "--method", "naive", "--bins-per-dim", "1"]));
    assert_eq!(doc["entropy_bits"], 0.0);
    assert_valid("estimate.schema.json", &doc);
}

#[test]
fn every_method_emits_a_valid_document() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "lin.csv", &write_samples_csv(&sample(3, 256, false)));
    let p = input.to_str().unwrap();
    for extra in [
        vec!["--method", "naive"],
        vec!["--method", "marginal"],
        vec!["--method", "equiprobable"],
        vec!["--method", "equiprobable", "--ensemble"],
        vec!["--method", "equiprobable", "--cycle-order", "1,0"],
        vec!["--method", "rotated"],
        vec!["--method", "rotated", "--ensemble"],
        vec!["--method", "rotated", "--winsorise", "3"],
    ] {
        let mut args = vec!["estimate", "-i", p, "--depth", "2"];
        args.extend(extra.iter().copied());
        let doc = stdout_json(&eqpart(&args));
        assert_valid("estimate.schema.json", &doc);
        assert!(doc["entropy_bits"].as_f64().unwrap().is_finite(), "{extra:?}");
        assert_eq!(doc["bin_count"], 16, "{extra:?}");
    }
}

#[test]
fn stdin_input_matches_file_input() {
    let dir = TempDir::new().unwrap();
    let text = write_samples_csv(&sample(4, 100, true));
    let input = write(&dir, "p.csv", &text);
    let from_file = eqpart(&["estimate", "-i", input.to_str().unwrap(), "-m", "equiprobable"]);

    let mut child = Command::new(env!("CARGO_BIN_EXE_eqpart"))
        .args(["estimate", "-i", "-", "-m", "equiprobable"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    let from_stdin = child.wait_with_output().unwrap();
    assert_eq!(from_file.stdout, from_stdin.stdout);
}

fn diagonal_distance(theta: f64) -> f64 {
    let r = (theta - FRAC_PI_4).rem_euclid(FRAC_PI_2);
    r.min(FRAC_PI_2 - r)
}

#[test]
fn linear_sample_rotates_to_the_diagonal() {
    let dir = TempDir::new().unwrap();
    let s = sample(0, 64, false);
    let input = write(&dir, "linear.csv", &write_samples_csv(&s));
    let doc = stdout_json(&eqpart(&["estimate", "-i", input.to_str().unwrap(), "-m", "rotated", "-d", "1"]));
    let theta = doc["rotation_angle_rad"].as_f64().unwrap();
    let value = planar_variance(&s, theta, 1, &[0, 1]).unwrap();
    let equivalent = (0..1024).map(|j| TAU * j as f64 / 1024.0).any(|t| {
        diagonal_distance(t) <= 0.15 && (planar_variance(&s, t, 1, &[0, 1]).unwrap() - value).abs() <= 1e-9
    });
    assert!(diagonal_distance(theta) <= 0.15 || equivalent, "theta = {theta}");
}

#[test]
fn estimates_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "p.csv", &write_samples_csv(&sample(5, 200, true)));
    let args = ["estimate", "-i", input.to_str().unwrap(), "-m", "rotated"];
    assert_eq!(eqpart(&args).stdout, eqpart(&args).stdout);
}

#[test]
fn benchmark_csv_has_one_row_of_seven_columns() {
    let out = eqpart(&["benchmark", "--n", "32", "--bins", "4", "--trials", "50", "--seed", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "N,B,mse_naive,mse_marginal,mse_equiprobable,mse_rotated,ci_lower_99");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells.len(), 7);
    assert_eq!(&cells[..2], &["32", "4"]);
    for c in &cells[2..] {
        // 17 significant digits in scientific notation
        let mantissa = c.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{c}");
        assert!(c.parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn benchmark_is_byte_identical_across_runs() {
    let args = ["benchmark", "--n", "64", "--bins", "16", "--trials", "20", "--seed", "3"];
    let a = eqpart(&args);
    let b = eqpart(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("study.json");
    let p = path.to_str().unwrap();
    let json = ["benchmark", "--n", "64", "--bins", "16", "--trials", "20", "--seed", "3", "--format", "json", "-o", p];
    assert!(eqpart(&json).status.success());
    let first = std::fs::read(&path).unwrap();
    assert!(eqpart(&json).status.success());
    assert_eq!(first, std::fs::read(&path).unwrap());

    let doc: Value = serde_json::from_slice(&first).unwrap();
    assert_valid("study.schema.json", &doc);
    assert_eq!(doc["records"].as_array().unwrap().len(), 20);
}

#[test]
fn desk_scale_table_row_has_a_positive_bound() {
    let out = eqpart(&["benchmark", "--n", "1024", "--bins", "16", "--trials", "200", "--seed", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let ci: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(ci > 0.0, "{row}");
}

/// Counts the points that fall in each dumped bin, testing every point
/// against every box. Upper faces are open except on the support boundary.
fn recount(doc: &Value, points: &[Vec<f64>]) -> Vec<u64> {
    let support_upper: Vec<f64> = doc["support"]["upper"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let bins = doc["bins"].as_array().unwrap();
    let mut counts = vec![0u64; bins.len()];
    for p in points {
        let mut hits = 0;
        for (j, bin) in bins.iter().enumerate() {
            let lo = bin["lower"].as_array().unwrap();
            let hi = bin["upper"].as_array().unwrap();
            let inside = (0..p.len()).all(|k| {
                let (l, h) = (lo[k].as_f64().unwrap(), hi[k].as_f64().unwrap());
                p[k] >= l && (p[k] < h || (h == support_upper[k] && p[k] <= h))
            });
            if inside {
                counts[j] += 1;
                hits += 1;
            }
        }
        assert_eq!(hits, 1, "point {p:?}");
    }
    counts
}

#[test]
fn dumped_partition_round_trips() {
    let dir = TempDir::new().unwrap();
    let s = sample(1, 256, true);
    let input = write(&dir, "parabola.csv", &write_samples_csv(&s));
    let out = eqpart(&["dump-partition", "-i", input.to_str().unwrap(), "--depth", "2"]);
    let doc = stdout_json(&out);
    assert_valid("partition.schema.json", &doc);

    let bins = doc["bins"].as_array().unwrap();
    assert_eq!(bins.len(), 16);
    let total: f64 = bins.iter().map(|b| b["volume"].as_f64().unwrap()).sum();
    let support = s.bounding_box().volume();
    assert!((total - support).abs() <= 1e-9 * support);

    let points: Vec<Vec<f64>> = s.points().map(|p| p.to_vec()).collect();
    let recorded: Vec<u64> = bins.iter().map(|b| b["count"].as_u64().unwrap()).collect();
    assert_eq!(recount(&doc, &points), recorded);

    let parsed = parse_partition_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    for p in &points {
        let j = parsed.locate(p);
        assert!(parsed.bins[j].lower.iter().zip(p).all(|(l, x)| x >= l));
    }
}

#[test]
fn rotated_dump_agrees_with_the_estimate() {
    let dir = TempDir::new().unwrap();
    let s = sample(2, 64, false);
    let input = write(&dir, "lin.csv", &write_samples_csv(&s));
    let p = input.to_str().unwrap();
    let est = stdout_json(&eqpart(&["estimate", "-i", p, "-m", "rotated", "-d", "1"]));
    let dump = stdout_json(&eqpart(&["dump-partition", "-i", p, "-d", "1", "--rotate"]));
    assert_valid("partition.schema.json", &dump);
    assert_eq!(dump["rotation"]["angle_rad"], est["rotation_angle_rad"]);

    // counts again, in the rotated frame
    let mrp: Vec<f64> = dump["rotation"]["mrp"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let m = Rotation::from_mrp([mrp[0], mrp[1], mrp[2]]).unwrap().matrix(2).unwrap();
    let c = s.barycentre();
    let points: Vec<Vec<f64>> = s
        .points()
        .map(|x| {
            let (u, v) = (x[0] - c[0], x[1] - c[1]);
            vec![m[(0, 0)] * u + m[(0, 1)] * v, m[(1, 0)] * u + m[(1, 1)] * v]
        })
        .collect();
    let recorded: Vec<u64> = dump["bins"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).collect();
    assert_eq!(recount(&dump, &points), recorded);
}

fn assert_error(out: &Output, code: i32, prefix: &str) {
    assert_eq!(out.status.code(), Some(code));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(prefix), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn parse_errors_exit_with_2_and_name_the_line() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.csv", "1,2\n3,4\n5,oops\n");
    let out = eqpart(&["estimate", "-i", bad.to_str().unwrap()]);
    assert_error(&out, 2, "parse-error: line 3");

    let ragged = write(&dir, "ragged.csv", "1,2\n3\n");
    assert_error(&eqpart(&["estimate", "-i", ragged.to_str().unwrap()]), 2, "parse-error: line 2");

    let missing = dir.path().join("missing.csv");
    assert_error(&eqpart(&["estimate", "-i", missing.to_str().unwrap()]), 2, "io-error:");
    assert_error(&eqpart(&["estimate", "--no-such-flag"]), 2, "usage-error:");
    assert_error(&eqpart(&["benchmark", "--n", "32", "--bins", "4", "--seed", "1", "--format", "xml"]), 2, "usage-error:");
}

#[test]
fn precondition_errors_exit_with_3() {
    let dir = TempDir::new().unwrap();
    let input = corners(&dir);
    let p = input.to_str().unwrap();
    let out = eqpart(&["estimate", "-i", p, "--has-header", "-m", "equiprobable", "-d", "2"]);
    assert_error(&out, 3, "precondition-error:");
    assert!(String::from_utf8_lossy(&out.stderr).contains("N = 4 < 2^(s*d) = 16"));

    let out = eqpart(&["benchmark", "--n", "32", "--bins", "8", "--trials", "5", "--seed", "1"]);
    assert_error(&out, 3, "precondition-error:");
    assert!(String::from_utf8_lossy(&out.stderr).contains("2^(s*d)"));

    let out = eqpart(&["benchmark", "--n", "32", "--bins", "4", "--trials", "1", "--seed", "1"]);
    assert_error(&out, 3, "precondition-error:");

    let line = write(&dir, "line.csv", "1\n2\n3\n4\n");
    let out = eqpart(&["estimate", "-i", line.to_str().unwrap(), "-m", "rotated", "-d", "1"]);
    assert_error(&out, 3, "precondition-error:");
}
