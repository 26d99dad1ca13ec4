use nalgebra::DMatrix;
use serde::Serialize;
use std::path::Path;

use rkhskit::dcor::{dcor, permutation_test, DcorReport};
use rkhskit::io::{read_dissimilarities, read_gram, read_table, Cell, Table};
use rkhskit::kernel::{gram, GramMatrix, KernelSpec, NullSpace, NullSpaceBasis};
use rkhskit::rke::{default_rank, embed, fit_rke, Embedding, RkeFit, RkeOptions};
use rkhskit::solvers::{
    evaluate_fit, fit_lasso, lasso_lambda_max, fit_msvm, fit_penalized_logistic, fit_penalized_ls, fit_svm, LassoOptions, MultiFit,
    NewtonOptions, PenalizedFit, SparseFit, SvmOptions,
};
use rkhskit::ss_anova::{anova_components, fit_ssanova, predict_ssanova, AnovaDecomposition, AveragingMeasure};
use rkhskit::tuning::{
    default_delta_scale, df_signal, influence_matrix, log_grid, minimize_gcv, randomized_trace, RandomizedTraceEstimate,
    TuningReport,
};
use rkhskit::{Error, Result};

use crate::args::{AnovaArgs, ClassArgs, Command, DcorArgs, FitArgs, LassoArgs, MsvmArgs, RkeArgs, TuneArgs};
use crate::output::{header, OutputDir};

const GRID_LO: f64 = 1e-8;
const GRID_HI: f64 = 1e2;
const DEFAULT_GRID: usize = 40;
const CURVE_POINTS: usize = 201;

pub fn run(command: &Command) -> Result<()> {
    let out = OutputDir::create(&command.common().out)?;
    match command {
        Command::FitSpline(a) => fit_spline(a, &out),
        Command::Tune(a) => tune(a, &out),
        Command::FitLogit(a) => fit_binary(a, &out, false),
        Command::FitSvm(a) => fit_binary(a, &out, true),
        Command::FitMsvm(a) => fit_multi(a, &out),
        Command::Ssanova(a) => ssanova(a, &out),
        Command::Lasso(a) => lasso(a, &out),
        Command::Rke(a) => rke(a, &out),
        Command::Dcor(a) => dcor_cmd(a, &out),
    }?;
    out.manifest(command)
}

/// `--kernel` value: a kernel string or `precomputed:PATH`.
pub fn parse_kernel(spec: &str, order: Option<usize>) -> Result<KernelSpec> {
    let kernel = match spec.strip_prefix("precomputed:") {
        Some(path) => KernelSpec::precomputed(read_gram(Path::new(path))?.into_matrix())?,
        None => spec.parse()?,
    };
    match (kernel, order) {
        (KernelSpec::Spline { .. }, Some(m)) => KernelSpec::spline(m),
        (_, Some(_)) => Err(Error::InvalidParameter("--order applies to spline kernels only".into())),
        (k, None) => Ok(k),
    }
}

/// Points and response of a data table whose last column is the response.
/// A precomputed kernel indexes rows by position instead of coordinates.
pub struct Data {
    pub table: Table,
    pub points: Vec<Vec<f64>>,
    pub response: Vec<f64>,
    pub coordinate_names: Vec<String>,
    pub response_name: String,
}

pub fn load_data(path: &Path, kernel: &KernelSpec) -> Result<Data> {
    let table = read_table(path)?;
    let p = table.ncols();
    let names = table.column_names();
    let response = table.column(p - 1);
    let (points, coordinate_names) = match kernel {
        KernelSpec::Precomputed(g) => {
            if g.nrows() != table.nrows() {
                return Err(Error::DimensionMismatch {
                    what: "precomputed Gram size vs data rows",
                    expected: table.nrows(),
                    got: g.nrows(),
                });
            }
            ((0..table.nrows()).map(|i| vec![i as f64]).collect(), vec!["index".to_string()])
        }
        _ => {
            if p < 2 {
                return Err(Error::InvalidParameter(format!(
                    "{}: need coordinate columns before the response",
                    path.display()
                )));
            }
            let cols: Vec<usize> = (0..p - 1).collect();
            (table.select(&cols), names[..p - 1].to_vec())
        }
    };
    Ok(Data {
        points,
        response,
        coordinate_names,
        response_name: names[p - 1].clone(),
        table,
    })
}

fn lambda_grid(count: Option<usize>) -> Result<Vec<f64>> {
    log_grid(GRID_LO, GRID_HI, count.unwrap_or(DEFAULT_GRID))
}

fn null_space_for(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<(NullSpace, NullSpaceBasis)> {
    let ns = kernel.default_null_space();
    let basis = ns.basis(points)?;
    Ok((ns, basis))
}

#[derive(Serialize)]
struct SplineOutput<'a> {
    kernel: String,
    lambda: f64,
    selected_by: &'static str,
    gcv: Option<f64>,
    df: f64,
    fit: &'a PenalizedFit,
}

fn fit_spline(a: &FitArgs, out: &OutputDir) -> Result<()> {
    let kernel = parse_kernel(&a.kernel, a.order)?;
    let data = load_data(&a.input, &kernel)?;
    let k = gram(&kernel, &data.points)?;
    let (_, t) = null_space_for(&kernel, &data.points)?;
    let (lambda, selected_by, gcv) = match a.lambda {
        Some(l) => (l, "fixed", None),
        None => {
            let report = minimize_gcv(&data.response, &k, &t, &lambda_grid(a.grid)?, false)?;
            let v = report.gcv_values[report.selected_index];
            (report.selected_lambda, "gcv", Some(v))
        }
    };
    let fit = fit_penalized_ls(&k, &t, &data.response, lambda)?;
    let df = df_signal(&influence_matrix(&k, &t, lambda)?)?;
    out.json(
        "fit.json",
        &SplineOutput {
            kernel: kernel.to_string(),
            lambda,
            selected_by,
            gcv,
            df,
            fit: &fit,
        },
    )?;

    let fitted = fit.fitted(&k, &t);
    let mut head = data.coordinate_names.clone();
    head.extend([data.response_name.clone(), "fitted".into(), "residual".into()]);
    let rows: Vec<Vec<Cell>> = (0..data.points.len())
        .map(|i| {
            let mut r: Vec<Cell> = data.points[i].iter().map(|&v| v.into()).collect();
            r.extend([
                data.response[i].into(),
                fitted[i].into(),
                (data.response[i] - fitted[i]).into(),
            ]);
            r
        })
        .collect();
    out.csv("fitted.csv", &head, &rows)?;

    if data.points[0].len() == 1 && !matches!(kernel, KernelSpec::Precomputed(_)) {
        let xs: Vec<f64> = data.points.iter().map(|p| p[0]).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grid: Vec<Vec<f64>> = (0..CURVE_POINTS)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64])
            .collect();
        let values = evaluate_fit(&fit, &kernel, &data.points, &grid)?;
        let rows: Vec<Vec<Cell>> = grid.iter().zip(&values).map(|(g, &v)| vec![g[0].into(), v.into()]).collect();
        out.csv("curve.csv", &[data.coordinate_names[0].clone(), "fitted".into()], &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TuneOutput<'a> {
    kernel: String,
    report: &'a TuningReport,
    df_selected: f64,
    randomized_df: Option<RandomizedTraceEstimate>,
}

fn tune(a: &TuneArgs, out: &OutputDir) -> Result<()> {
    let kernel = parse_kernel(&a.kernel, a.order)?;
    let data = load_data(&a.input, &kernel)?;
    let k = gram(&kernel, &data.points)?;
    let (_, t) = null_space_for(&kernel, &data.points)?;
    let report = minimize_gcv(&data.response, &k, &t, &lambda_grid(Some(a.grid))?, a.loo)?;
    let lambda = report.selected_lambda;
    let randomized_df = if a.replicates > 0 {
        let fitter = |y: &[f64]| -> Result<Vec<f64>> {
            let f = fit_penalized_ls(&k, &t, y, lambda)?;
            Ok(f.fitted(&k, &t).as_slice().to_vec())
        };
        Some(randomized_trace(
            fitter,
            &data.response,
            default_delta_scale(&data.response),
            a.replicates,
            a.common.seed,
        )?)
    } else {
        None
    };
    out.json(
        "tuning_report.json",
        &TuneOutput {
            kernel: kernel.to_string(),
            df_selected: report.df_values[report.selected_index],
            report: &report,
            randomized_df,
        },
    )?;
    let mut head = header(&["lambda", "gcv", "df"]);
    if report.loo_values.is_some() {
        head.push("loo".into());
    }
    let rows: Vec<Vec<Cell>> = (0..report.lambda_grid.len())
        .map(|i| {
            let mut r: Vec<Cell> = vec![
                report.lambda_grid[i].into(),
                report.gcv_values[i].into(),
                report.df_values[i].into(),
            ];
            if let Some(loo) = &report.loo_values {
                r.push(loo[i].into());
            }
            r
        })
        .collect();
    out.csv("tuning_curve.csv", &head, &rows)
}

#[derive(Serialize)]
struct BinaryOutput<'a> {
    kernel: String,
    training_accuracy: f64,
    fit: &'a PenalizedFit,
}

fn fit_binary(a: &ClassArgs, out: &OutputDir, hinge: bool) -> Result<()> {
    let kernel = parse_kernel(&a.kernel, None)?;
    let data = load_data(&a.input, &kernel)?;
    let k = gram(&kernel, &data.points)?;
    let n = data.points.len();
    let t = NullSpaceBasis::constant(n);
    let fit = if hinge {
        fit_svm(
            &k,
            &data.response,
            a.lambda,
            SvmOptions {
                seed: a.common.seed,
                ..SvmOptions::default()
            },
        )?
    } else {
        fit_penalized_logistic(&k, &t, &data.response, a.lambda, NewtonOptions::default())?
    };
    let f = fit.fitted(&k, &t);
    let predicted: Vec<f64> = f.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
    let correct = predicted.iter().zip(&data.response).filter(|(p, y)| p == y).count();
    out.json(
        "fit.json",
        &BinaryOutput {
            kernel: kernel.to_string(),
            training_accuracy: correct as f64 / n as f64,
            fit: &fit,
        },
    )?;
    let mut head = data.coordinate_names.clone();
    head.extend([data.response_name.clone(), "decision".into()]);
    if !hinge {
        head.push("probability".into());
    }
    head.push("predicted".into());
    let rows: Vec<Vec<Cell>> = (0..n)
        .map(|i| {
            let mut r: Vec<Cell> = data.points[i].iter().map(|&v| v.into()).collect();
            r.extend([data.response[i].into(), f[i].into()]);
            if !hinge {
                r.push((1.0 / (1.0 + (-f[i]).exp())).into());
            }
            r.push(predicted[i].into());
            r
        })
        .collect();
    out.csv("fitted.csv", &head, &rows)
}

#[derive(Serialize)]
struct MultiOutput<'a> {
    kernel: String,
    training_accuracy: f64,
    fit: &'a MultiFit,
}

fn class_labels(values: &[f64]) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidLabel(format!("{v} (expected a class number 1..k)")))
            }
        })
        .collect()
}

fn fit_multi(a: &MsvmArgs, out: &OutputDir) -> Result<()> {
    let kernel = parse_kernel(&a.kernel, None)?;
    let data = load_data(&a.input, &kernel)?;
    let labels = class_labels(&data.response)?;
    let k_classes = a.k.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
    let g = gram(&kernel, &data.points)?;
    let fit = fit_msvm(&g, &labels, a.lambda, k_classes)?;
    let values = fit.decision_values(&g);
    let predicted: Vec<usize> = values.iter().map(|v| MultiFit::classify(v)).collect();
    let n = labels.len();
    let correct = predicted.iter().zip(&labels).filter(|(p, y)| p == y).count();
    out.json(
        "msvm.json",
        &MultiOutput {
            kernel: kernel.to_string(),
            training_accuracy: correct as f64 / n as f64,
            fit: &fit,
        },
    )?;
    let mut head = data.coordinate_names.clone();
    head.push(data.response_name.clone());
    head.extend((1..=k_classes).map(|j| format!("f{j}")));
    head.push("predicted".into());
    let rows: Vec<Vec<Cell>> = (0..n)
        .map(|i| {
            let mut r: Vec<Cell> = data.points[i].iter().map(|&v| v.into()).collect();
            r.push(labels[i].into());
            r.extend(values[i].iter().map(|&v| Cell::from(v)));
            r.push(predicted[i].into());
            r
        })
        .collect();
    out.csv("predictions.csv", &head, &rows)
}

#[derive(Serialize)]
struct AnovaOutput<'a> {
    kernel: String,
    covariates: &'a [String],
    max_order: usize,
    lambda: f64,
    selected_by: &'static str,
    component_names: Vec<String>,
    decomposition: &'a AnovaDecomposition,
}

fn ssanova(a: &AnovaArgs, out: &OutputDir) -> Result<()> {
    let kernel = parse_kernel(&a.kernel, None)?;
    if matches!(kernel, KernelSpec::Precomputed(_)) {
        return Err(Error::InvalidParameter("ssanova needs a kernel on each covariate".into()));
    }
    let data = load_data(&a.input, &kernel)?;
    let n = data.points.len();
    let d = data.coordinate_names.len();
    let kernels = vec![kernel.clone(); d];
    let measures = vec![AveragingMeasure::uniform(n)?; d];
    let components = anova_components(&kernels, &data.points, &measures, a.order)?;
    let theta = vec![1.0; components.len()];
    let (lambda, selected_by) = match a.lambda {
        Some(l) => (l, "fixed"),
        None => {
            let mut combined = DMatrix::zeros(n, n);
            for c in &components {
                combined += c.gram.matrix();
            }
            let k = GramMatrix::from_matrix(combined)?;
            let report = minimize_gcv(
                &data.response,
                &k,
                &NullSpaceBasis::constant(n),
                &lambda_grid(a.grid)?,
                false,
            )?;
            (report.selected_lambda, "gcv")
        }
    };
    let dec = fit_ssanova(&components, &theta, &data.response, lambda)?;
    let names: Vec<String> = dec
        .terms
        .iter()
        .map(|t| t.label.display_with(&data.coordinate_names))
        .collect();
    out.json(
        "anova.json",
        &AnovaOutput {
            kernel: kernel.to_string(),
            covariates: &data.coordinate_names,
            max_order: a.order,
            lambda,
            selected_by,
            component_names: names.clone(),
            decomposition: &dec,
        },
    )?;

    let mut head = data.coordinate_names.clone();
    head.extend([data.response_name.clone(), "fitted".into(), "mean".into()]);
    head.extend(names.iter().cloned());
    let rows: Vec<Vec<Cell>> = (0..n)
        .map(|i| {
            let mut r: Vec<Cell> = data.points[i].iter().map(|&v| v.into()).collect();
            r.extend([data.response[i].into(), dec.fitted[i].into(), dec.mu.into()]);
            r.extend(dec.terms.iter().map(|t| Cell::from(t.values[i])));
            r
        })
        .collect();
    out.csv("components.csv", &head, &rows)?;

    // Main-effect curves over each covariate's observed range; a main effect
    // does not depend on the other coordinates.
    let mut curve_rows = Vec::new();
    for (ti, term) in dec.terms.iter().enumerate() {
        if term.label.order() != 1 {
            continue;
        }
        let alpha = term.label.coordinates()[0];
        let xs = data.table.column(alpha);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grid: Vec<Vec<f64>> = (0..CURVE_POINTS)
            .map(|s| {
                let mut p = data.points[0].clone();
                p[alpha] = lo + (hi - lo) * s as f64 / (CURVE_POINTS - 1) as f64;
                p
            })
            .collect();
        let preds = predict_ssanova(&dec, &kernels, &data.points, &measures, &grid)?;
        for (p, pred) in grid.iter().zip(&preds) {
            curve_rows.push(vec![
                Cell::Text(names[ti].clone()),
                p[alpha].into(),
                pred.components[ti].into(),
            ]);
        }
    }
    out.csv("component_curves.csv", &header(&["component", "x", "value"]), &curve_rows)
}

#[derive(Serialize)]
struct LassoOutput<'a> {
    columns: &'a [String],
    lambda_max: f64,
    fit: &'a SparseFit,
}

fn lasso(a: &LassoArgs, out: &OutputDir) -> Result<()> {
    let data = load_data(&a.input, &KernelSpec::Linear)?;
    let n = data.points.len();
    let p = data.coordinate_names.len();
    let b = DMatrix::from_fn(n, p, |i, j| data.points[i][j]);
    let fit = fit_lasso(&b, &data.response, a.lambda, LassoOptions::default())?;
    let lambda_max = lasso_lambda_max(&b, &data.response);
    out.json(
        "lasso.json",
        &LassoOutput {
            columns: &data.coordinate_names,
            lambda_max,
            fit: &fit,
        },
    )?;
    let rows: Vec<Vec<Cell>> = (0..p)
        .map(|j| vec![Cell::Text(data.coordinate_names[j].clone()), fit.beta[j].into()])
        .collect();
    out.csv("coefficients.csv", &header(&["column", "beta"]), &rows)
}

#[derive(Serialize)]
struct RkeOutput {
    lambda: f64,
    objective: f64,
    iterations: usize,
    best_iteration: usize,
    rank: usize,
    trace_fraction: f64,
    centered: bool,
    eigenvalues: Vec<f64>,
}

pub fn rke_outputs(fit: &RkeFit, rank: Option<usize>, center: bool) -> Result<Embedding> {
    let k = fit.matrix();
    let d = match rank {
        Some(d) => d,
        None => default_rank(&k, center)?,
    };
    embed(&k, d, center)
}

fn rke(a: &RkeArgs, out: &OutputDir) -> Result<()> {
    let dis = read_dissimilarities(&a.input)?;
    let opts = RkeOptions {
        max_iters: a.max_iters,
        ..RkeOptions::default()
    };
    let fit = fit_rke(&dis, a.lambda, opts)?;
    let emb = rke_outputs(&fit, a.rank, a.center)?;
    out.json(
        "embedding.json",
        &RkeOutput {
            lambda: fit.lambda,
            objective: fit.objective,
            iterations: fit.iterations,
            best_iteration: fit.best_iteration,
            rank: emb.rank,
            trace_fraction: emb.trace_fraction,
            centered: emb.centered,
            eigenvalues: emb.eigenvalues.clone(),
        },
    )?;
    let mut head = vec!["index".to_string()];
    head.extend((1..=emb.rank).map(|j| format!("dim{j}")));
    let rows: Vec<Vec<Cell>> = emb
        .coordinates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = vec![Cell::from(i)];
            r.extend(c.iter().map(|&v| Cell::from(v)));
            r
        })
        .collect();
    out.csv("coordinates.csv", &head, &rows)?;
    let k_rows: Vec<Vec<Cell>> = fit.k.iter().map(|r| r.iter().map(|&v| Cell::from(v)).collect()).collect();
    out.csv("kernel.csv", &[], &k_rows)
}

fn dcor_cmd(a: &DcorArgs, out: &OutputDir) -> Result<()> {
    let x = read_table(&a.x)?.rows;
    let y = read_table(&a.y)?.rows;
    let report: DcorReport = if a.perms > 0 {
        permutation_test(&x, &y, a.perms, a.common.seed)?
    } else {
        dcor(&x, &y)?
    };
    out.json("dcor.json", &report)
}
