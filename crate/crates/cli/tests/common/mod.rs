#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kps_core::dist::RngStream;
use kps_core::mc::{dgp_local, dgp_null, DgpVariant};
use kps_core::KpsSample;

pub const NULL_FIXTURE: &str = "null_p2_k3.csv";
pub const POWER_FIXTURE: &str = "local_sigma30.csv";

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn kps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kps"))
        .args(args)
        .env_remove("KPS_SEED")
        .output()
        .expect("spawn kps")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Wraps simulated errors and instruments in a structural model with a
/// control and a cluster column:
/// `y = 1 + Z Π + 0.5 w + V`, `z = Z + 0.3 w`.
fn structural_csv(sample: &KpsSample, rng: &mut RngStream) -> String {
    let v = sample.vhat().as_matrix();
    let z = sample.z().as_matrix();
    let (n, p, k) = (v.nrows(), v.ncols(), z.ncols());
    let mut s = String::new();
    let names: Vec<String> = (1..=p)
        .map(|j| format!("y{j}"))
        .chain((1..=k).map(|j| format!("z{j}")))
        .chain(["w".into(), "firm".into()])
        .collect();
    let _ = writeln!(s, "{}", names.join(","));
    for i in 0..n {
        let w = rng.next_normal();
        let mut cells = Vec::with_capacity(p + k + 2);
        for a in 0..p {
            let fitted: f64 = (0..k).map(|b| z[(i, b)] * (1.0 + (a + b) as f64 * 0.25)).sum();
            cells.push(format!("{}", 1.0 + fitted + 0.5 * w + v[(i, a)]));
        }
        for b in 0..k {
            cells.push(format!("{}", z[(i, b)] + 0.3 * w));
        }
        cells.push(format!("{w}"));
        cells.push(format!("F{:03}", i / 5));
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn null_fixture() -> String {
    let mut rng = RngStream::new(2024, 0);
    let sample = dgp_null(2, 3, 500, DgpVariant::Homoskedastic, &mut rng).unwrap();
    structural_csv(&sample, &mut RngStream::new(2024, 1))
}

pub fn power_fixture() -> String {
    let mut rng = RngStream::new(2025, 0);
    let sample = dgp_local(2000, 30.0, &mut rng).unwrap();
    structural_csv(&sample, &mut RngStream::new(2025, 1))
}
