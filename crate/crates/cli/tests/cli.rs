use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn gsrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsrc")).args(args).output().expect("spawn gsrc")
}

fn code(args: &[&str]) -> i32 {
    gsrc(args).status.code().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gsrc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Constructs a code and encodes `data` with it; returns the shard dir.
fn setup(dir: &TempDir, n: &str, k: &str, alpha: &str, w: &str, data: &[u8]) -> std::path::PathBuf {
    let meta = dir.path().join("code.json");
    let input = dir.path().join("input.bin");
    let shards = dir.path().join("shards");
    fs::write(&input, data).unwrap();
    ok(&["construct", "--n", n, "--k", k, "--alpha", alpha, "--w", w, "--seed", "5", "--out", p(&meta)]);
    ok(&["encode", "--meta", p(&meta), "--input", p(&input), "--out-dir", p(&shards)]);
    shards
}

fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut v = vec![0; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

#[test]
fn construct_worked_example() {
    let dir = TempDir::new().unwrap();
    let meta = dir.path().join("c.json");
    let out = ok(&["construct", "--n", "5", "--k", "3", "--alpha", "4", "--w", "4", "--out", p(&meta)]);
    assert!(out.contains("average repair bandwidth 2"), "{out}");
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&meta).unwrap()).unwrap();
    assert_eq!(doc["field"]["poly_hex"], "0x19");
    assert_eq!(doc["partitions"][2]["designated"], serde_json::json!([1, 3]));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let meta = dir.path().join("c.json");
    let m = p(&meta);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["construct", "--n", "5"]), 1);
    assert_eq!(code(&["construct", "--n", "3", "--k", "5", "--alpha", "4", "--out", m]), 1);
    assert_eq!(code(&["construct", "--n", "5", "--k", "3", "--alpha", "4", "--w", "7", "--out", m]), 1);
    assert_eq!(code(&["construct", "--n", "14", "--k", "10", "--alpha", "3", "--out", m]), 2);
    assert_eq!(code(&["encode", "--meta", m, "--input", m, "--out-dir", m]), 4);
    fs::write(&meta, "{").unwrap();
    assert_eq!(code(&["encode", "--meta", m, "--input", m, "--out-dir", m]), 3);
}

#[test]
fn round_trip_with_any_k_shards() {
    let dir = TempDir::new().unwrap();
    let data = random_bytes(10_001, 1);
    let shards = setup(&dir, "6", "4", "4", "8", &data);
    let restored = dir.path().join("restored.bin");
    ok(&["reconstruct", "--shards", p(&shards), "--nodes", "p2,d3,p1,2", "--output", p(&restored)]);
    assert_eq!(fs::read(&restored).unwrap(), data);

    fs::remove_file(shards.join("d1.shard")).unwrap();
    fs::remove_file(shards.join("d4.shard")).unwrap();
    ok(&["reconstruct", "--shards", p(&shards), "--output", p(&restored)]);
    assert_eq!(fs::read(&restored).unwrap(), data);

    fs::remove_file(shards.join("p2.shard")).unwrap();
    assert_eq!(code(&["reconstruct", "--shards", p(&shards), "--output", p(&restored)]), 4);
    assert_eq!(code(&["reconstruct", "--shards", p(&shards), "--nodes", "d2,d3,p1", "--output", p(&restored)]), 4);
}

#[test]
fn systematic_shards_hold_the_input() {
    let dir = TempDir::new().unwrap();
    let data = random_bytes(4 * 4 * 3, 2);
    let shards = setup(&dir, "6", "4", "4", "8", &data);
    let d2 = fs::read(shards.join("d2.shard")).unwrap();
    assert_eq!(&d2[40..44], &data[4..8]);
    assert_eq!(&d2[44..48], &data[20..24]);
}

#[test]
fn empty_input() {
    let dir = TempDir::new().unwrap();
    let shards = setup(&dir, "5", "3", "4", "4", &[]);
    let restored = dir.path().join("restored.bin");
    ok(&["reconstruct", "--shards", p(&shards), "--output", p(&restored)]);
    assert!(fs::read(&restored).unwrap().is_empty());
}

#[test]
fn repair_restores_bytes() {
    for (n, k, alpha, w) in [("5", "3", "4", "4"), ("7", "4", "8", "8"), ("7", "4", "8", "16")] {
        let dir = TempDir::new().unwrap();
        let shards = setup(&dir, n, k, alpha, w, &random_bytes(3333, 3));
        for node in ["d1", "d3"] {
            let path = shards.join(format!("{node}.shard"));
            let before = fs::read(&path).unwrap();
            fs::remove_file(&path).unwrap();
            let out = ok(&["repair", "--shards", p(&shards), "--node", node]);
            assert!(out.contains("accessed and transferred"), "{out}");
            assert_eq!(fs::read(&path).unwrap(), before, "w={w} {node}");
        }
    }
}

#[test]
fn repair_refusals() {
    let dir = TempDir::new().unwrap();
    let shards = setup(&dir, "5", "3", "4", "4", &random_bytes(100, 4));
    assert_eq!(code(&["repair", "--shards", p(&shards), "--node", "p1"]), 1);
    assert_eq!(code(&["repair", "--shards", p(&shards), "--node", "d9"]), 1);
    fs::remove_file(shards.join("d1.shard")).unwrap();
    fs::remove_file(shards.join("d2.shard")).unwrap();
    assert_eq!(code(&["repair", "--shards", p(&shards), "--node", "d1"]), 4);
}

#[test]
fn corrupted_header_is_rejected() {
    let dir = TempDir::new().unwrap();
    let shards = setup(&dir, "5", "3", "4", "4", &random_bytes(100, 5));
    let path = shards.join("p1.shard");
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, bytes).unwrap();
    let restored = dir.path().join("r.bin");
    assert_eq!(code(&["reconstruct", "--shards", p(&shards), "--nodes", "d1,d2,p1", "--output", p(&restored)]), 3);
}

#[test]
fn bench_csv() {
    let out = ok(&["bench", "--n", "6", "--k", "4", "--alphas", "4,1,2"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "alpha,avg_gamma,lower_bound,upper_bound,reduction_vs_rs_pct,avg_gamma_rat");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,4,"));
    assert!(lines[3].starts_with("4,2.5,2.5,"), "{}", lines[3]);

    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = gsrc(&["bench", "--n", "14", "--k", "10", "--alphas", "2,3", "--csv", p(&csv)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha=3"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);
}
