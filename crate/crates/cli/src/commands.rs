use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use uslice::barycenter::{barycenter_with, raster_points, BarycenterProblem, GridMeasure};
use uslice::docclass::{accuracy, distance_matrix, knn_predict, DistanceMode};
use uslice::io::{self, Raster, Split};
use uslice::ot1d::sliced_ot_loss;
use uslice::suot::{mean_marginals, suot, suot_marginals};
use uslice::usot::{usot, usot_marginals, usot_stochastic};
use uslice::{sample_directions, DiscreteMeasure, DivergenceSpec, FwState, UnbalancedParams};

use crate::{BarycenterArgs, CompareArgs, DocclassArgs, Mode, SolverArgs};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<uslice::Error> for Failure {
    fn from(e: uslice::Error) -> Self {
        Self { code: if e.is_input_error() { 2 } else { 3 }, message: e.to_string() }
    }
}

type Outcome = Result<String, Failure>;

fn params(args: &SolverArgs, default_fw_iters: usize) -> Result<UnbalancedParams, Failure> {
    let p = UnbalancedParams {
        div1: DivergenceSpec::kl(args.rho1)?,
        div2: DivergenceSpec::kl(args.rho2)?,
        p: args.p,
        n_projections: args.projections,
        fw_iters: args.fw_iters.unwrap_or(default_fw_iters),
        fw_tol: args.fw_tol,
        seed: args.seed,
    };
    if p.n_projections == 0 {
        return Err(Failure::input("--projections must be >= 1"));
    }
    p.fw_rhos()?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report serialises")
}

#[derive(Serialize)]
struct CompareReport {
    mode: &'static str,
    value: f64,
    mass_alpha: f64,
    mass_beta: f64,
    iterations: usize,
    seed: u64,
}

pub fn compare(args: &CompareArgs) -> Outcome {
    let params = params(&args.solver, 20)?;
    let alpha = io::read_point_cloud_file(&args.alpha)?;
    let beta = io::read_point_cloud_file(&args.beta)?;
    if alpha.dim() != beta.dim() {
        return Err(uslice::Error::DimensionMismatch { expected: alpha.dim(), found: beta.dim() }.into());
    }
    let wants_fw_output = args.marginals.is_some() || args.marginals_beta.is_some() || args.trace.is_some();
    if args.mode == Mode::Sot && wants_fw_output {
        return Err(Failure::input("--marginals, --marginals-beta and --trace need an unbalanced mode"));
    }
    let dirs = || sample_directions(alpha.dim(), params.n_projections, params.seed);
    let (value, state): (f64, Option<FwState>) = match args.mode {
        Mode::Sot => (sliced_ot_loss(&alpha, &beta, &dirs()?, params.p)?, None),
        Mode::Suot => {
            let d = dirs()?;
            let (v, s) = suot(&alpha, &beta, &d, &params)?;
            if args.marginals.is_some() || args.marginals_beta.is_some() {
                let (pa, pb) = mean_marginals(&suot_marginals(&s, &alpha, &beta, &d, &params)?)?;
                write_marginals(args, &pa, &pb)?;
            }
            (v, Some(s))
        }
        Mode::Usot | Mode::UsotStochastic => {
            let (v, s) = if args.mode == Mode::Usot {
                usot(&alpha, &beta, &dirs()?, &params)?
            } else {
                usot_stochastic(&alpha, &beta, &params)?
            };
            if args.marginals.is_some() || args.marginals_beta.is_some() {
                let (pa, pb) = usot_marginals(&s, &alpha, &beta, &params)?;
                write_marginals(args, &pa, &pb)?;
            }
            (v, Some(s))
        }
    };
    if let (Some(path), Some(s)) = (&args.trace, &state) {
        io::write_trace_file(path, &s.trace)?;
    }
    Ok(to_json(&CompareReport {
        mode: args.mode.as_str(),
        value,
        mass_alpha: alpha.mass(),
        mass_beta: beta.mass(),
        iterations: state.map_or(0, |s| s.iteration),
        seed: params.seed,
    }))
}

fn write_marginals(args: &CompareArgs, pa: &DiscreteMeasure, pb: &DiscreteMeasure) -> Result<(), Failure> {
    if let Some(path) = &args.marginals {
        io::write_point_cloud_file(path, pa)?;
    }
    if let Some(path) = &args.marginals_beta {
        io::write_point_cloud_file(path, pb)?;
    }
    Ok(())
}

fn is_raster(path: &Path) -> Result<bool, Failure> {
    let mut head = [0u8; 8];
    let n = File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(&head[..n] == b"USOTGRID")
}

fn raster_measure(r: &Raster) -> Result<DiscreteMeasure, Failure> {
    Ok(DiscreteMeasure::new(raster_points(r.rows, r.cols)?, r.values.clone())?)
}

fn read_any(path: &Path) -> Result<DiscreteMeasure, Failure> {
    let m = if is_raster(path)? {
        raster_measure(&io::read_raster_file(path)?)
    } else {
        Ok(io::read_point_cloud_file(path)?)
    };
    m.map_err(|f| Failure { message: format!("{}: {}", path.display(), f.message), ..f })
}

fn parse_grid(spec: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::input(format!("--grid must look like 20x20, got {spec:?}"));
    let (r, c) = spec.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

pub fn barycenter(args: &BarycenterArgs) -> Outcome {
    let params = params(&args.solver, 20)?;
    let inputs = args.inputs.iter().map(|p| read_any(p)).collect::<Result<Vec<_>, _>>()?;
    let omegas = match &args.weights {
        Some(w) => w.clone(),
        None => vec![1.0 / inputs.len() as f64; inputs.len()],
    };
    // (grid, raster shape if the support is a raster)
    let (grid, shape) = match (&args.grid, &args.template) {
        (Some(spec), None) => {
            let (r, c) = parse_grid(spec)?;
            (GridMeasure::raster(r, c)?, Some((r, c)))
        }
        (None, Some(path)) if is_raster(path)? => {
            let r = io::read_raster_file(path)?;
            (GridMeasure::raster(r.rows, r.cols)?, Some((r.rows, r.cols)))
        }
        (None, Some(path)) => {
            let m = io::read_point_cloud_file(path)?.normalize_to_probability()?;
            (GridMeasure::from_measure(&m)?, None)
        }
        _ => return Err(Failure::input("exactly one of --grid or --template is required")),
    };
    let as_csv = args.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if !as_csv && shape.is_none() {
        return Err(Failure::input("raster output needs a raster support; use a .csv --out"));
    }
    let seed = params.seed;
    let mut problem = BarycenterProblem::new(inputs, omegas, grid, params);
    problem.lr = args.lr;
    problem.iters = args.iters;
    let result = barycenter_with(&problem, |_| {})?;
    let bary = &result.barycenter;
    match shape.filter(|_| !as_csv) {
        Some((rows, cols)) => {
            io::write_raster_file(&args.out, &Raster { rows, cols, values: bary.weights().to_vec() })?
        }
        None => io::write_point_cloud_file(&args.out, bary.as_measure())?,
    }
    if let Some(path) = &args.trace {
        write_objective_trace(path, &result.trace).map_err(uslice::Error::from)?;
    }
    Ok(to_json(&BarycenterReport {
        out: args.out.display().to_string(),
        objective: result.trace.last().copied().unwrap_or(f64::NAN),
        iterations: result.trace.len(),
        grid_size: bary.len(),
        seed,
    }))
}

#[derive(Serialize)]
struct BarycenterReport {
    out: String,
    objective: f64,
    iterations: usize,
    grid_size: usize,
    seed: u64,
}

fn write_objective_trace(path: &Path, trace: &[f64]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,objective")?;
    for (k, v) in trace.iter().enumerate() {
        writeln!(w, "{},{}", k + 1, v)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct DocclassReport {
    accuracy: f64,
    k: usize,
    mode: &'static str,
    n_docs: usize,
}

pub fn docclass(args: &DocclassArgs) -> Outcome {
    let params = params(&args.solver, 10)?;
    let rows = io::read_labels_file(&args.labels)
        .map_err(|e| Failure::input(format!("labels {}: {e}", args.labels.display())))?;
    if rows.is_empty() {
        return Err(Failure::input("labels file lists no documents"));
    }
    let docs = rows
        .iter()
        .map(|r| {
            let path = args.docs.join(format!("{}.csv", r.doc_id));
            io::read_point_cloud_file(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mode: DistanceMode = args.mode.as_str().parse()?;
    let matrix = distance_matrix(&docs, mode, &params)?;
    let ids: Vec<String> = rows.iter().map(|r| r.doc_id.clone()).collect();
    let labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
    let train: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].split == Split::Train).collect();
    let test: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].split == Split::Test).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Failure::input("labels need at least one train and one test document"));
    }
    let predicted = knn_predict(&matrix, &labels, &train, &test, args.knn)?;
    let truth: Vec<String> = test.iter().map(|&i| labels[i].clone()).collect();
    if let Some(path) = &args.matrix {
        io::write_matrix_file(path, &ids, &matrix)?;
    }
    Ok(to_json(&DocclassReport {
        accuracy: accuracy(&predicted, &truth),
        k: args.knn,
        mode: args.mode.as_str(),
        n_docs: rows.len(),
    }))
}
