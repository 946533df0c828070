use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wyckdiff::io::read_crystal;
use wyckdiff::spacegroup::SpaceGroupTable;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wyckdiff")).args(args).output().expect("spawn wyckdiff")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn k_line(report: &str) -> Vec<f64> {
    let line = report.lines().find(|l| l.starts_with("k ")).expect("k line");
    let inner = line.split_once('[').unwrap().1.trim_end_matches(']');
    inner.split(',').map(|x| x.trim().parse().unwrap()).collect()
}

fn tiny_config(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    fs::write(
        &p,
        "seed = 5\n[model]\nlayers = 1\nhidden = 16\nfourier = 4\n\
         [train]\nepochs = 30\ndraws = 2\nbatch_size = 8\nlr = 1e-2\noptimizer = \"adam\"\nschedule = \"cosine\"\n",
    )
    .unwrap();
    p
}

#[test]
fn encode_identity_is_zero() {
    let out = ok(&["encode", s(&data("fixtures/identity.lattice.json"))]);
    assert!(k_line(&out).iter().all(|&x| x == 0.0), "{out}");
    assert!(out.contains("cubic        satisfied"));
}

#[test]
fn encode_cubic_cell_has_log_scale() {
    let out = ok(&["encode", s(&data("fixtures/cubic_4.2.lattice.json"))]);
    let k = k_line(&out);
    assert!(k[..5].iter().all(|&x| x.abs() < 1e-12));
    assert!((k[5] - 4.2f64.ln()).abs() < 1e-12, "{}", k[5]);
}

#[test]
fn encode_monoclinic_report() {
    let out = ok(&["encode", s(&data("fixtures/monoclinic.lattice.json"))]);
    assert!(out.contains("compatible families: triclinic, monoclinic\n"), "{out}");
    assert!(out.contains("monoclinic   satisfied      k1=0 ok, k3=0 ok"), "{out}");
    assert!(out.contains("orthorhombic not satisfied"));
    assert!(out.contains("a=5.100000 b=6.300000 c=7.200000 alpha=90.000000 beta=104.500000"));
}

#[test]
fn oracle_rock_salt_sampling_matches() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("s");
    let out = ok(&["--seed", "11", "sample", "--oracle", s(&data("toy/train/NaCl.json")), "--count", "20", "--out", s(&out_dir), "--cif"]);
    let line = out.lines().find(|l| l.starts_with("match rate vs target")).unwrap();
    let rate: f64 = line.split_whitespace().nth(4).unwrap().parse().unwrap();
    assert!(rate >= 0.9, "{line}");
    assert!(out_dir.join("sample_019.json").exists());
    assert!(out_dir.join("sample_000.cif").exists());
    let csv = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn cubic_samples_have_exactly_cubic_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let ckpt = dir.path().join("m.json");
    ok(&["--config", s(&cfg), "train", "--data", s(&data("toy/train")), "--out", s(&ckpt)]);
    let out_dir = dir.path().join("s");
    ok(&["--config", s(&cfg), "sample", "--checkpoint", s(&ckpt), "--group", "225", "--sites", "a:Na,b:Cl", "--count", "8", "--out", s(&out_dir)]);
    let groups = SpaceGroupTable::builtin();
    for i in 0..8 {
        let f = out_dir.join(format!("sample_{i:03}.json"));
        let c = read_crystal(&f, groups).unwrap();
        let m = c.lattice.matrix();
        for r in 0..3 {
            for col in 0..3 {
                if r != col {
                    assert_eq!(m[(r, col)], 0.0);
                }
            }
        }
        assert_eq!(m[(0, 0)], m[(1, 1)]);
        assert_eq!(m[(0, 0)], m[(2, 2)]);
        assert_eq!(c.num_atoms(), 8);
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn fixed_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let ckpt = dir.path().join("m.json");
    ok(&["--config", s(&cfg), "train", "--data", s(&data("toy/train")), "--out", s(&ckpt)]);
    let again = dir.path().join("m2.json");
    ok(&["--config", s(&cfg), "train", "--data", s(&data("toy/train")), "--out", s(&again)]);
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&again).unwrap());

    let mut outs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let o = dir.path().join(name);
        ok(&[
            "--config", s(&cfg), "--seed", "9", "--jobs", jobs, "sample", "--checkpoint", s(&ckpt), "--group", "221",
            "--sites", "a:W,e:O", "--count", "5", "--out", s(&o),
        ]);
        outs.push(read_all(&o));
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);

    let o = dir.path().join("d");
    ok(&["--config", s(&cfg), "--seed", "10", "sample", "--checkpoint", s(&ckpt), "--group", "221", "--sites", "a:W,e:O", "--count", "5", "--out", s(&o)]);
    assert_ne!(outs[0], read_all(&o));
}

#[test]
fn match_self_is_exact() {
    let f = data("toy/train/WO6.json");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let out = ok(&["match", s(&f), s(&f), "--csv", s(&csv)]);
    assert!(out.contains("matched rmsd=0.000000"), "{out}");
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn match_directories_pair_by_name() {
    let out = ok(&["match", s(&data("toy/train")), s(&data("toy/templates"))]);
    assert!(out.contains("match rate: 1.000 (5/5)"), "{out}");
}

#[test]
fn validate_flags_close_pair() {
    let out = ok(&["validate", s(&data("fixtures/close_pair.json")), s(&data("toy/train/NaCl.json"))]);
    assert!(out.contains("close_pair.json: invalid (min distance 0.4000 A)"), "{out}");
    assert!(out.contains("NaCl.json: valid"));
    assert!(out.contains("valid: 1/2"));
}

#[test]
fn csp_oracle_on_toy_set() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("csp.csv");
    let out = ok(&[
        "csp", "--templates", s(&data("toy/templates")), "--test", s(&data("toy/test")), "--oracle", "--formula", "MgO",
        "--out", s(&dir.path().join("pred")), "--csv", s(&csv),
    ]);
    for (q, t) in [("KCl", "NaCl"), ("CsBr", "CsCl"), ("BaTiO3", "SrTiO3"), ("GaN", "ZnO"), ("Ni", "Cu"), ("MgO", "NaCl")] {
        let line = out.lines().find(|l| l.starts_with(q)).unwrap_or_else(|| panic!("{q}: {out}"));
        assert_eq!(line.split_whitespace().nth(1), Some(t), "{line}");
    }
    assert!(out.contains("match rate: 1.000 (5/5)"), "{out}");
    assert!(dir.path().join("pred/MgO.json").exists());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 7);
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(run(&["sample", "--group", "225", "--sites", "a:Na,b:Cl"]).status.code(), Some(2));
    assert_eq!(run(&["--jobs", "0", "validate", s(&data("toy/train/Cu.json"))]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    // library errors
    let missing = run(&["validate", "/nonexistent/x.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"schema\": 1,\n  \"lattice\": oops\n}\n").unwrap();
    let out = run(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3"), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 1\n[train]\nepochz = 3\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "validate", s(&data("toy/train/Cu.json"))]).status.code(), Some(1));
}
