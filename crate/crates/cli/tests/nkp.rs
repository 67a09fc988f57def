mod common;

use common::{kps, stdout};
use kps_cli::report::NkpReport;

fn run(matrix: &str, p: usize, k: usize) -> NkpReport {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, matrix).unwrap();
    let out = kps(&[
        "nkp", "--input", &path.display().to_string(), "--p", &p.to_string(), "--k", &k.to_string(), "--format", "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn identity_is_exact() {
    let r = run("a,b,c,d\n1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n", 2, 2);
    assert!(r.ds.abs() < 1e-12);
    for (g, want) in [(&r.g1, 1.0), (&r.g2, 1.0)] {
        assert!((g[0][0] - want).abs() < 1e-12 && (g[1][1] - want).abs() < 1e-12);
        assert!(g[0][1].abs() < 1e-12);
    }
}

#[test]
fn diagonal_distance_one() {
    let r = run("1.5,0,0,0\n0,0.5,0,0\n0,0,0.5,0\n0,0,0,1.5\n", 2, 2);
    assert!((r.ds - 1.0).abs() < 1e-12, "{}", r.ds);
    assert!(r.relative_ds > 0.0 && r.relative_ds < 1.0);
}

#[test]
fn text_output_lists_factors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n").unwrap();
    let out = kps(&["nkp", "--input", &path.display().to_string(), "--p", "2", "--k", "2"]);
    let text = stdout(&out);
    assert!(text.contains("G1") && text.contains("G2") && text.contains("relative DS"), "{text}");
}

#[test]
fn wrong_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "1,0,0\n0,1,0\n0,0,1\n").unwrap();
    let out = kps(&["nkp", "--input", &path.display().to_string(), "--p", "2", "--k", "2"]);
    assert!(!out.status.success());
}
