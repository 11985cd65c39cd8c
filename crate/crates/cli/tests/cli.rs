use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use raremeta::formats::parse_summary;

fn raremeta(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raremeta"))
        .args(args)
        .current_dir(dir)
        .env_remove("RAREMETA_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn summarize_toy_dataset_matches_double_loop() {
    let dir = tempfile::tempdir().unwrap();
    let x = [[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [2.0, 1.0]];
    let y = [1.0, -1.0, 0.5, -0.5];
    fs::write(
        path(dir.path(), "toy.geno.tsv"),
        "CHROM\tPOS\tREF\tALT\tA\tB\tC\tD\n1\t100\tA\tG\t0\t1\t0\t2\n1\t200\tC\tT\t1\t0\t0\t1\n",
    )
    .unwrap();
    fs::write(path(dir.path(), "toy.pheno.tsv"), "SAMPLE\tY\nB\t-1\nA\t1\nD\t-0.5\nC\t0.5\n").unwrap();
    let out = raremeta(
        &["summarize", "--genotypes", "toy.geno.tsv", "--phenotypes", "toy.pheno.tsv", "--out", "toy"],
        dir.path(),
    );
    ok(&out);
    let block = parse_summary(
        &fs::read_to_string(path(dir.path(), "toy.score.tsv")).unwrap(),
        Some(&fs::read_to_string(path(dir.path(), "toy.cov.tsv")).unwrap()),
    )
    .unwrap();
    assert_eq!(block.study_id, "toy");

    let n = 4.0;
    let ybar = y.iter().sum::<f64>() / n;
    let sigma2 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / n;
    assert!((sigma2 - 0.625).abs() < 1e-15);
    let mean = |j: usize| x.iter().map(|r| r[j]).sum::<f64>() / n;
    for j in 0..2 {
        let mut u = 0.0;
        for i in 0..4 {
            u += (x[i][j] - mean(j)) * y[i];
        }
        assert!((block.variants[j].u - u).abs() <= 1e-12, "U_{j}");
        for k in 0..2 {
            let mut v = 0.0;
            for i in 0..4 {
                v += (x[i][j] - mean(j)) * (x[i][k] - mean(k));
            }
            v *= sigma2;
            assert!((block.cov.get(j, k).unwrap() - v).abs() <= 1e-12, "V_{j}{k}");
        }
    }
    assert!((block.variants[0].u + 2.0).abs() < 1e-12);
    assert!((block.variants[1].u - 0.5).abs() < 1e-12);
}

#[test]
fn meta_without_studies_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = raremeta(&["meta", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--scores"));
}

#[test]
fn bad_flags_are_usage_errors_and_help_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(raremeta(&["meta", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(raremeta(&["cond", "--scores", "a", "--out", "o"], dir.path()).status.code(), Some(1));
    assert_eq!(raremeta(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn malformed_input_is_a_data_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(path(dir.path(), "bad.score.tsv"), "not a score file\n").unwrap();
    let out = raremeta(&["meta", "--scores", "bad.score.tsv", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.score.tsv") && err.contains("line 1"), "{err}");
    let log = fs::read_to_string(path(dir.path(), "m.log")).unwrap();
    assert!(log.contains("error:"));
}

fn simulate(dir: &Path, prefix: &str, seed: &str) {
    ok(&raremeta(
        &["simulate", "--genes", "4", "--variants", "6", "--samples", "150,200,250", "--seed", seed, "--out", prefix],
        dir,
    ));
}

fn outputs(dir: &Path, prefix: &str) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(&format!("{prefix}.")))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|n| {
            let bytes = fs::read(dir.join(&n)).unwrap();
            (n.trim_start_matches(prefix).to_string(), bytes)
        })
        .collect()
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a", "11");
    simulate(dir.path(), "b", "11");
    simulate(dir.path(), "c", "12");
    let (a, b, c) = (outputs(dir.path(), "a"), outputs(dir.path(), "b"), outputs(dir.path(), "c"));
    assert_eq!(a.len(), 8);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

/// simulate → summarize → meta and cond, at one and three threads.
#[test]
fn pipeline_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "sim", "3");
    for k in 1..=3 {
        let (g, p, o) = (format!("sim.study{k}.geno.tsv"), format!("sim.study{k}.pheno.tsv"), format!("s{k}"));
        ok(&raremeta(&["summarize", "--genotypes", &g, "--phenotypes", &p, "--out", &o], d));
    }
    let inputs = [
        "--scores", "s1.score.tsv", "s2.score.tsv", "s3.score.tsv", "--covs", "s1.cov.tsv", "s2.cov.tsv",
        "s3.cov.tsv", "--groups", "sim.groups.tsv", "--tests", "burden,vt,skat,fisher,minp", "--empirical",
        "--max-draws", "20000", "--seed", "9",
    ];
    for (threads, prefix) in [("1", "t1"), ("3", "t3")] {
        let mut args = vec!["--threads", threads, "meta"];
        args.extend(inputs);
        args.extend(["--out", prefix]);
        ok(&raremeta(&args, d));
        let mut args = vec!["--threads", threads, "cond", "--condition", "1:1000000:A:G"];
        args.extend(inputs);
        let cprefix = format!("c{prefix}");
        args.extend(["--out", &cprefix]);
        ok(&raremeta(&args, d));
    }
    for suffix in [".single.tsv", ".genes.tsv"] {
        for p in ["t", "ct"] {
            let one = fs::read(d.join(format!("{p}1{suffix}"))).unwrap();
            let three = fs::read(d.join(format!("{p}3{suffix}"))).unwrap();
            assert_eq!(one, three, "{p}{suffix}");
        }
    }
    let genes = fs::read_to_string(d.join("t1.genes.tsv")).unwrap();
    let rows: Vec<&str> = genes.lines().skip(1).collect();
    assert_eq!(rows.len(), 4 * 2 * 5);
    assert!(rows[0].starts_with("GENE1\tburden\t"));
    assert!(rows[39].starts_with("GENE4\tminp\t"));
}
