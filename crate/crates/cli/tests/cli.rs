mod common;

use nalgebra::DMatrix;
use serde_json::Value;
use std::fs;
use std::path::Path;

use common::{run, run_into, snapshot, Fixtures};
use rkhskit::dcor::permutation_test;
use rkhskit::io::{read_dissimilarities, read_table};
use rkhskit::kernel::{gram, KernelSpec, NullSpace};
use rkhskit::rke::{fit_rke, RkeOptions};
use rkhskit::solvers::{fit_lasso, fit_msvm, fit_penalized_ls, fit_svm, LassoOptions, SvmOptions};
use rkhskit::ss_anova::{anova_components, fit_ssanova, AveragingMeasure};
use rkhskit::tuning::{log_grid, minimize_gcv};

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn split(path: &str) -> (Vec<Vec<f64>>, Vec<f64>) {
    let t = read_table(Path::new(path)).unwrap();
    let p = t.ncols();
    let cols: Vec<usize> = (0..p - 1).collect();
    (t.select(&cols), t.column(p - 1))
}

fn out_args(args: &[&str], out: &Path) -> Vec<String> {
    let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    v.extend(["--out".into(), out.display().to_string()]);
    v
}

fn ok(args: &[String]) {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = run(&refs, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn every_command_is_deterministic() {
    let fx = Fixtures::new();
    for (name, args) in fx.commands() {
        let a = run_into(&args, &fx.out(&format!("{name}-a")), None);
        let b = run_into(&args, &fx.out(&format!("{name}-b")), None);
        assert!(a.len() >= 2, "{name} wrote {a:?}");
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let fx = Fixtures::new();
    for (name, args) in fx.commands() {
        let one = run_into(&args, &fx.out(&format!("{name}-1")), Some(1));
        let four = run_into(&args, &fx.out(&format!("{name}-4")), Some(4));
        assert_eq!(one, four, "{name}");
    }
}

#[test]
fn spline_fit_matches_library() {
    let fx = Fixtures::new();
    let out = fx.out("spline");
    ok(&out_args(&["fit-spline", "--input", &fx.path("sine.csv"), "--lambda", "1e-4"], &out));
    let (pts, y) = split(&fx.path("sine.csv"));
    let k = gram(&KernelSpec::Spline { order: 2 }, &pts).unwrap();
    let t = NullSpace::Polynomial { order: 2 }.basis(&pts).unwrap();
    let fit = fit_penalized_ls(&k, &t, &y, 1e-4).unwrap();
    let v = json(&out.join("fit.json"));
    assert_eq!(floats(&v["fit"]["c"]), fit.c);
    assert_eq!(floats(&v["fit"]["d"]), fit.d);
    assert_eq!(v["selected_by"], "fixed");

    let fitted = read_table(&out.join("fitted.csv")).unwrap();
    assert_eq!(fitted.header.as_deref().unwrap(), ["x", "y", "fitted", "residual"]);
    assert_eq!(fitted.column(2), fit.fitted(&k, &t).as_slice());
    assert_eq!(read_table(&out.join("curve.csv")).unwrap().nrows(), 201);
}

#[test]
fn tuning_curve_matches_library() {
    let fx = Fixtures::new();
    let out = fx.out("tune");
    ok(&out_args(&["tune", "--input", &fx.path("sine.csv"), "--grid", "12"], &out));
    let (pts, y) = split(&fx.path("sine.csv"));
    let k = gram(&KernelSpec::Spline { order: 2 }, &pts).unwrap();
    let t = NullSpace::Polynomial { order: 2 }.basis(&pts).unwrap();
    let report = minimize_gcv(&y, &k, &t, &log_grid(1e-8, 1e2, 12).unwrap(), false).unwrap();
    let v = json(&out.join("tuning_report.json"));
    assert_eq!(floats(&v["report"]["gcv_values"]), report.gcv_values);
    assert_eq!(v["report"]["selected_lambda"].as_f64().unwrap(), report.selected_lambda);
    let curve = read_table(&out.join("tuning_curve.csv")).unwrap();
    assert_eq!(curve.column(1), report.gcv_values);
}

#[test]
fn classifier_outputs_match_library() {
    let fx = Fixtures::new();
    let out = fx.out("svm");
    ok(&out_args(
        &["fit-svm", "--input", &fx.path("binary.csv"), "--lambda", "0.01", "--seed", "4"],
        &out,
    ));
    let (pts, y) = split(&fx.path("binary.csv"));
    let k = gram(&KernelSpec::Gaussian { sigma: 1.0 }, &pts).unwrap();
    let opts = SvmOptions {
        seed: 4,
        ..SvmOptions::default()
    };
    let fit = fit_svm(&k, &y, 0.01, opts).unwrap();
    let v = json(&out.join("fit.json"));
    assert_eq!(floats(&v["fit"]["c"]), fit.c);
    assert_eq!(v["training_accuracy"].as_f64(), Some(1.0));

    let out = fx.out("msvm");
    ok(&out_args(&["fit-msvm", "--input", &fx.path("multi.csv")], &out));
    let (pts, labels) = split(&fx.path("multi.csv"));
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let g = gram(&KernelSpec::Gaussian { sigma: 1.0 }, &pts).unwrap();
    let fit = fit_msvm(&g, &labels, 1e-3, 3).unwrap();
    let v = json(&out.join("msvm.json"));
    assert_eq!(floats(&v["fit"]["intercepts"]), fit.intercepts);
    assert_eq!(v["training_accuracy"].as_f64(), Some(1.0));
    let pred = read_table(&out.join("predictions.csv")).unwrap();
    assert_eq!(pred.column(pred.ncols() - 1), pred.column(2));
}

#[test]
fn anova_lasso_rke_dcor_match_library() {
    let fx = Fixtures::new();

    let out = fx.out("anova");
    ok(&out_args(&["ssanova", "--input", &fx.path("anova.csv"), "--lambda", "1e-4"], &out));
    let (pts, y) = split(&fx.path("anova.csv"));
    let kernels = vec![KernelSpec::Spline { order: 2 }; 2];
    let mu = vec![AveragingMeasure::uniform(pts.len()).unwrap(); 2];
    let comps = anova_components(&kernels, &pts, &mu, 2).unwrap();
    let dec = fit_ssanova(&comps, &[1.0; 3], &y, 1e-4).unwrap();
    let v = json(&out.join("anova.json"));
    assert_eq!(v["decomposition"]["mu"].as_f64().unwrap(), dec.mu);
    assert_eq!(floats(&v["decomposition"]["fitted"]), dec.fitted);
    assert_eq!(v["component_names"], serde_json::json!(["age", "dose", "age:dose"]));
    let comp = read_table(&out.join("components.csv")).unwrap();
    assert_eq!(comp.column(7), dec.terms[2].values);

    let out = fx.out("lasso");
    ok(&out_args(&["lasso", "--input", &fx.path("lasso.csv"), "--lambda", "0.5"], &out));
    let (pts, y) = split(&fx.path("lasso.csv"));
    let b = DMatrix::from_fn(pts.len(), 5, |i, j| pts[i][j]);
    let fit = fit_lasso(&b, &y, 0.5, LassoOptions::default()).unwrap();
    assert_eq!(floats(&json(&out.join("lasso.json"))["fit"]["beta"]), fit.beta);

    let out = fx.out("rke");
    ok(&out_args(&["rke", "--input", &fx.path("dis.csv"), "--lambda", "0.01"], &out));
    let dis = read_dissimilarities(Path::new(&fx.path("dis.csv"))).unwrap();
    let fit = fit_rke(&dis, 0.01, RkeOptions::default()).unwrap();
    let v = json(&out.join("embedding.json"));
    assert_eq!(v["objective"].as_f64().unwrap(), fit.objective);
    let k = read_table(&out.join("kernel.csv")).unwrap();
    assert!(k.header.is_none());
    assert_eq!(k.rows, fit.k);

    let out = fx.out("dcor");
    ok(&out_args(
        &["dcor", "--x", &fx.path("x.csv"), "--y", &fx.path("y.csv"), "--perms", "99", "--seed", "1"],
        &out,
    ));
    let x = read_table(Path::new(&fx.path("x.csv"))).unwrap().rows;
    let y = read_table(Path::new(&fx.path("y.csv"))).unwrap().rows;
    let r = permutation_test(&x, &y, 99, 1).unwrap();
    let v = json(&out.join("dcor.json"));
    assert_eq!(v["dcor"].as_f64().unwrap(), r.dcor);
    assert_eq!(v["p_value"].as_f64(), r.p_value);
}

#[test]
fn dcor_of_a_sample_with_itself() {
    let fx = Fixtures::new();
    let out = fx.out("self");
    ok(&out_args(
        &["dcor", "--x", &fx.path("x.csv"), "--y", &fx.path("x.csv"), "--perms", "99"],
        &out,
    ));
    let v = json(&out.join("dcor.json"));
    assert_eq!(v["p_value"].as_f64(), Some(0.01));
    assert!((v["dcor"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn manifest_records_configuration() {
    let fx = Fixtures::new();
    let out = fx.out("manifest");
    ok(&out_args(&["lasso", "--input", &fx.path("lasso.csv"), "--lambda", "0.5", "--seed", "11"], &out));
    let v = json(&out.join("manifest.json"));
    assert_eq!(v["seed"], 11);
    assert_eq!(v["config"]["command"], "lasso");
    assert_eq!(v["config"]["lambda"].as_f64(), Some(0.5));
    assert_eq!(v["version"], rkhskit::VERSION);
    assert!(v["config"].get("out").is_none());
}

#[test]
fn data_errors_exit_with_code_two() {
    let fx = Fixtures::new();
    let missing = fx.path("nope.csv");
    let o = run(&["fit-spline", "--input", &missing, "--out", &fx.path("o")], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));

    let bad = fx.path("bad.csv");
    fs::write(&bad, "x,y\n0.1,1\n0.2,oops\n").unwrap();
    let o = run(&["fit-spline", "--input", &bad, "--out", &fx.path("o")], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["fit-spline", "--bogus"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["transmogrify"], None);
    assert_eq!(o.status.code(), Some(2));

    let o = run(
        &["fit-spline", "--input", &fx.path("sine.csv"), "--lambda", "1", "--grid", "5"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["fit-svm", "--input", &fx.path("multi.csv"), "--out", &fx.path("o")], None);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["tune", "--input", &fx.path("sine.csv"), "--out", &fx.path("o")], Some(0));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_code_three() {
    let fx = Fixtures::new();
    // A single repeated abscissa cannot support a linear null space.
    let flat = fx.path("flat.csv");
    fs::write(&flat, "x,y\n0.5,1\n0.5,2\n0.5,3\n").unwrap();
    let o = run(&["fit-spline", "--input", &flat, "--lambda", "0.1", "--out", &fx.path("o")], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_runs_leave_no_partial_files() {
    let fx = Fixtures::new();
    let out = fx.out("empty");
    let o = run(
        &["fit-spline", "--input", &fx.path("missing.csv"), "--out", &out.display().to_string()],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(snapshot(&out).is_empty());
}
