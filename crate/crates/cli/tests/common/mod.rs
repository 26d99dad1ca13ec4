#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rkhskit"))
}

pub fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("RKHSKIT_THREADS", t.to_string()),
        None => cmd.env_remove("RKHSKIT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

/// Input files for every subcommand, generated from a fixed seed.
pub struct Fixtures {
    pub dir: tempfile::TempDir,
}

impl Fixtures {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2024);
        let p = dir.path();
        write(
            &p.join("sine.csv"),
            "x,y",
            (0..30).map(|i| {
                let x = (i as f64 + 0.5) / 30.0;
                format!("{x},{}", (6.0 * x).sin() + 0.2 * (r.random::<f64>() - 0.5))
            }),
        );
        write(
            &p.join("binary.csv"),
            "x1,x2,label",
            (0..30).map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                format!("{},{},{s}", s + 0.4 * r.random::<f64>(), s + 0.4 * r.random::<f64>())
            }),
        );
        write(
            &p.join("multi.csv"),
            "x1,x2,class",
            (0..30).map(|i| {
                let c = i % 3;
                let angle = c as f64 * 2.0 * std::f64::consts::PI / 3.0;
                format!(
                    "{},{},{}",
                    2.0 * angle.cos() + 0.3 * r.random::<f64>(),
                    2.0 * angle.sin() + 0.3 * r.random::<f64>(),
                    c + 1
                )
            }),
        );
        write(
            &p.join("anova.csv"),
            "age,dose,y",
            (0..40).map(|_| {
                let a: f64 = r.random();
                let b: f64 = r.random();
                format!("{a},{b},{}", (3.0 * a).sin() + b * b + 0.1 * r.random::<f64>())
            }),
        );
        write(
            &p.join("lasso.csv"),
            "b1,b2,b3,b4,b5,y",
            (0..25).map(|_| {
                let b: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
                let y = 3.0 * b[0] - 2.0 * b[3] + 0.1 * r.random::<f64>();
                format!("{},{},{},{},{},{y}", b[0], b[1], b[2], b[3], b[4])
            }),
        );
        let pts: Vec<(f64, f64)> = (0..8).map(|_| (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        let mut dis = Vec::new();
        for i in 0..8 {
            for j in i + 1..8 {
                if (i + j) % 4 != 0 {
                    let d = (pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2);
                    dis.push(format!("{i},{j},{}", d * (1.0 + 0.1 * r.random::<f64>())));
                }
            }
        }
        write(&p.join("dis.csv"), "i,j,d", dis);
        let xs: Vec<(f64, f64)> = (0..40).map(|_| (r.random(), r.random())).collect();
        write(&p.join("x.csv"), "u,v", xs.iter().map(|(u, v)| format!("{u},{v}")));
        write(
            &p.join("y.csv"),
            "w",
            xs.iter().map(|(u, v)| format!("{}", u * v + 0.05 * r.random::<f64>())),
        );
        Fixtures { dir }
    }

    pub fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Arguments (without `--out`) for one invocation of every subcommand.
    pub fn commands(&self) -> Vec<(&'static str, Vec<String>)> {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        vec![
            ("fit-spline", s(&["fit-spline", "--input", &self.path("sine.csv")])),
            (
                "tune",
                s(&["tune", "--input", &self.path("sine.csv"), "--loo", "--replicates", "50", "--seed", "3"]),
            ),
            ("fit-logit", s(&["fit-logit", "--input", &self.path("binary.csv")])),
            ("fit-svm", s(&["fit-svm", "--input", &self.path("binary.csv"), "--seed", "5"])),
            ("fit-msvm", s(&["fit-msvm", "--input", &self.path("multi.csv")])),
            ("ssanova", s(&["ssanova", "--input", &self.path("anova.csv"), "--grid", "15"])),
            ("lasso", s(&["lasso", "--input", &self.path("lasso.csv"), "--lambda", "0.5"])),
            ("rke", s(&["rke", "--input", &self.path("dis.csv"), "--lambda", "0.01", "--center"])),
            (
                "dcor",
                s(&["dcor", "--x", &self.path("x.csv"), "--y", &self.path("y.csv"), "--perms", "199", "--seed", "9"]),
            ),
        ]
    }
}

/// Sorted `(file name, bytes)` of a directory.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Runs a command into `out` and returns the directory snapshot.
pub fn run_into(args: &[String], out: &Path, threads: Option<usize>) -> Vec<(String, Vec<u8>)> {
    let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
    let out_s = out.display().to_string();
    full.extend(["--out", &out_s]);
    let o = run(&full, threads);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    snapshot(out)
}
