mod common;

use common::{kps, stdout};

#[test]
fn size_rejects_scalar_dimension() {
    let out = kps(&["simulate", "size", "--p", "1", "--k", "3", "--reps", "10"]);
    assert_eq!(out.status.code(), Some(9));
    assert!(String::from_utf8_lossy(&out.stderr).contains("min(p, k)"));
}

#[test]
fn small_size_run() {
    let out = kps(&["simulate", "size", "--p", "2", "--k", "2", "--n", "200", "--reps", "50", "--dgp", "both", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,k,n,df,m,level,nrp_pct,mc_se_pct,dgp");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("2,2,200,4,9,0.1,"));
    assert!(lines[6].ends_with("scalar_hetero"));

    // Same seed through the environment gives the same table.
    let again = std::process::Command::new(env!("CARGO_BIN_EXE_kps"))
        .args(["simulate", "size", "--p", "2", "--k", "2", "--n", "200", "--reps", "50", "--dgp", "both"])
        .env("KPS_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&again), text);
}

#[test]
fn preset_table_layout() {
    // The preset grids reach n in the hundreds of thousands, so only the
    // sample-size rule and flag validation are exercised here.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = kps(&[
        "simulate", "size", "--p", "2", "--k", "2", "--rule", "pow16-over3", "--reps", "2", "--levels", "0.05",
        "--output", &path.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("2,2,1626,4,9,0.05,"), "{text}");

    let out = kps(&["simulate", "size", "--paper-table", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kps(&["simulate", "size", "--paper-table", "2", "--p", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_power_run() {
    let out = kps(&["simulate", "power", "--n", "200", "--reps", "40", "--sigma-grid", "0,4,8", "--star", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sigma,level,power_kpst,power_kpst_star,power_asymptotic,mc_se");
    assert_eq!(lines.len(), 4);
    let power: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(power[2] > power[0], "{power:?}");
}

#[test]
fn power_sigma_out_of_range() {
    let out = kps(&["simulate", "power", "--n", "16", "--sigma-grid", "5", "--reps", "5"]);
    assert_eq!(out.status.code(), Some(2));
}
