//! Experiment drivers behind the `hhf` binary.
//!
//! Every sweep runs realization `i` with seed `base_seed + i` on the rayon
//! pool and merges per-task rows in index order, so output is byte-identical
//! for a fixed spec. Floats are printed with 17 significant digits.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use householder::ensemble::{
    random_indefinite, random_orthonormal, random_reflector_product, random_wishart, seeded_rng,
};
use householder::format::{read_factor, write_factor, Factor};
use householder::metric::{self, BlobSpec, Dataset, MetricModel, TrainConfig};
use householder::ortho::{constrained_approx, expected_bound_ortho, partial_qr_approx, signed_approx, unconstrained_approx};
use householder::reflector::dense_matvec_flops;
use householder::sym::{partial_eig_baseline, shf, InitMode, ShfConfig};
use householder::{ApproxReport, FactoredSymmetric, FlopCounter, ReflectorProduct};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthoMethod {
    Constrained,
    Unconstrained,
    /// Unconstrained construction with sign handling and a fitted diagonal,
    /// or partial QR when that is better.
    UnconstrainedD,
    QrBaseline,
}

impl OrthoMethod {
    pub const ALL: [OrthoMethod; 4] = [Self::Constrained, Self::Unconstrained, Self::UnconstrainedD, Self::QrBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Self::Constrained => "constrained",
            Self::Unconstrained => "unconstrained",
            Self::UnconstrainedD => "unconstrained-d",
            Self::QrBaseline => "qr-baseline",
        }
    }

    pub fn run(self, u: &DMatrix<f64>, h: usize) -> Result<(ReflectorProduct<f64>, ApproxReport<f64>)> {
        Ok(match self {
            Self::Constrained => constrained_approx(u, h)?,
            Self::Unconstrained => unconstrained_approx(u, h)?,
            Self::UnconstrainedD => signed_approx(u, h)?,
            Self::QrBaseline => partial_qr_approx(u, h)?,
        })
    }
}

impl FromStr for OrthoMethod {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| anyhow!("unknown ortho method {s:?} (expected constrained, unconstrained, unconstrained-d, qr-baseline)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymMethod {
    Shf,
    ShfSu,
    EigBaseline,
}

impl SymMethod {
    pub const ALL: [SymMethod; 3] = [Self::Shf, Self::ShfSu, Self::EigBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Self::Shf => "shf",
            Self::ShfSu => "shf-su",
            Self::EigBaseline => "eig-baseline",
        }
    }

    /// SHF variants start from the partial eigendecomposition so that they
    /// dominate the baseline.
    pub fn run(self, s: &DMatrix<f64>, h: usize, max_outer: usize) -> Result<(FactoredSymmetric<f64>, ApproxReport<f64>)> {
        let cfg = ShfConfig::new(h).with_init(InitMode::Baseline).with_max_outer(max_outer);
        Ok(match self {
            Self::Shf => shf(s, &cfg)?,
            Self::ShfSu => shf(s, &cfg.with_spectrum_update(true))?,
            Self::EigBaseline => partial_eig_baseline(s, h)?,
        })
    }
}

impl FromStr for SymMethod {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| anyhow!("unknown sym method {s:?} (expected shf, shf-su, eig-baseline)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    /// Haar orthonormal.
    Haar,
    /// `(X + X^T) / 2` with Gaussian `X`.
    Indefinite,
    /// Wishart `X X^T`.
    Posdef,
}

impl Ensemble {
    pub fn name(self) -> &'static str {
        match self {
            Self::Haar => "haar",
            Self::Indefinite => "indefinite",
            Self::Posdef => "posdef",
        }
    }

    pub fn sample(self, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed);
        match self {
            Self::Haar => random_orthonormal(n, &mut rng),
            Self::Indefinite => random_indefinite(n, &mut rng),
            Self::Posdef => random_wishart(n, &mut rng),
        }
    }
}

impl FromStr for Ensemble {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Self::Haar),
            "indefinite" => Ok(Self::Indefinite),
            "posdef" | "pd" | "wishart" => Ok(Self::Posdef),
            _ => bail!("unknown ensemble {s:?} (expected haar, indefinite, posdef)"),
        }
    }
}

/// Where the matrices of a sweep come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Ensemble(Ensemble),
    /// A single matrix read from a headerless CSV file.
    Matrix(DMatrix<f64>),
}

/// A validated sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n: usize,
    pub h_min: usize,
    pub h_max: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub source: Source,
}

impl SweepSpec {
    pub fn new(n: usize, h_min: usize, h_max: usize, seeds: usize, base_seed: u64, source: Source) -> Result<Self> {
        ensure!(n >= 1, "n must be at least 1");
        ensure!(h_min <= h_max, "empty h range {h_min}..={h_max}");
        ensure!(seeds >= 1, "seeds must be at least 1");
        if let Source::Matrix(m) = &source {
            ensure!(m.is_square() && m.nrows() == n, "input matrix is {}x{}, expected {n}x{n}", m.nrows(), m.ncols());
        }
        Ok(Self {
            n,
            h_min,
            h_max,
            seeds,
            base_seed,
            source,
        })
    }

    pub fn hs(&self) -> std::ops::RangeInclusive<usize> {
        self.h_min..=self.h_max
    }

    fn realizations(&self) -> usize {
        match self.source {
            Source::Ensemble(_) => self.seeds,
            Source::Matrix(_) => 1,
        }
    }

    fn seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }

    fn matrix(&self, i: usize) -> DMatrix<f64> {
        match &self.source {
            Source::Ensemble(e) => e.sample(self.n, self.seed(i)),
            Source::Matrix(m) => m.clone(),
        }
    }
}

/// Reads a headerless CSV of rows of floats.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("row {i}: bad number {f:?}")))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            ensure!(row.len() == first.len(), "row {i} has {} entries, expected {}", row.len(), first.len());
        }
        rows.push(row);
    }
    ensure!(!rows.is_empty(), "empty matrix file");
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_matrix_csv(BufReader::new(f))
}

/// A vector given as one CSV row or one CSV column.
pub fn read_vector_file(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_file(path)?;
    ensure!(m.nrows() == 1 || m.ncols() == 1, "vector file must be a single row or column, got {}x{}", m.nrows(), m.ncols());
    Ok(DVector::from_iterator(m.len(), m.iter().copied()))
}

pub fn save_factor(path: &Path, factor: &Factor<f64>) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_factor(factor, &mut f)?;
    Ok(())
}

pub fn load_factor(path: &Path) -> Result<Factor<f64>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_factor(&mut BufReader::new(f))?)
}

/// Realization results in index order.
fn par_realizations<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

fn only_one<'a, M>(spec: &SweepSpec, methods: &'a [M], what: &str) -> Result<&'a M> {
    ensure!(
        spec.h_min == spec.h_max && methods.len() == 1 && spec.realizations() == 1,
        "{what} needs a single h, method and realization"
    );
    Ok(&methods[0])
}

/// CSV with columns `n,h,seed,method,normalized_error,predicted_error`;
/// one row per realization, then mean rows with `seed` set to `mean`.
/// `predicted_error` is the closed-form prediction, normalized like the error.
pub fn run_ortho_sweep(spec: &SweepSpec, methods: &[OrthoMethod], factor_out: Option<&Path>) -> Result<String> {
    ensure!(!methods.is_empty(), "no methods given");
    if matches!(spec.source, Source::Ensemble(e) if e != Ensemble::Haar) {
        bail!("ortho sweeps need the haar ensemble or an input matrix");
    }
    if methods.contains(&OrthoMethod::QrBaseline) {
        ensure!(spec.h_max < spec.n, "qr-baseline needs h <= n - 1");
    }
    let n = spec.n;
    let scale = 4.0 * n as f64;
    let per_seed = par_realizations(spec.realizations(), |i| {
        let u = spec.matrix(i);
        let mut rows = Vec::new();
        for h in spec.hs() {
            for &m in methods {
                let (p, rep) = m.run(&u, h)?;
                rows.push((h, m, rep.normalized_error, rep.predicted_error.map(|e| e / scale), p));
            }
        }
        Ok(rows)
    })?;

    let mut out = String::from("n,h,seed,method,normalized_error,predicted_error\n");
    for (i, rows) in per_seed.iter().enumerate() {
        for (h, m, err, pred, _) in rows {
            writeln!(out, "{n},{h},{},{},{},{}", spec.seed(i), m.name(), fmt_f64(*err), fmt_opt(*pred))?;
        }
    }
    for (k, (h, m, ..)) in per_seed[0].iter().enumerate() {
        let errs: Vec<f64> = per_seed.iter().map(|r| r[k].2).collect();
        let preds: Option<Vec<f64>> = per_seed.iter().map(|r| r[k].3).collect();
        let pred_mean = preds.map(|p| mean_stderr(&p).0);
        writeln!(out, "{n},{h},mean,{},{},{}", m.name(), fmt_f64(mean_stderr(&errs).0), fmt_opt(pred_mean))?;
    }
    if let Some(path) = factor_out {
        only_one(spec, methods, "--factor-out")?;
        save_factor(path, &Factor::Orthonormal(per_seed[0][0].4.clone()))?;
    }
    Ok(out)
}

/// Result of [`run_sym_sweep`]: the error table and, optionally, traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOutput {
    /// Columns `n,h,seed,method,ensemble,normalized_error,predicted_error,iterations`.
    pub table: String,
    /// Columns `n,h,seed,method,iteration,normalized_error`.
    pub traces: String,
}

pub fn run_sym_sweep(spec: &SweepSpec, methods: &[SymMethod], max_outer: usize, factor_out: Option<&Path>) -> Result<SymOutput> {
    ensure!(!methods.is_empty(), "no methods given");
    let ensemble = match &spec.source {
        Source::Ensemble(Ensemble::Haar) => bail!("sym sweeps need the indefinite or posdef ensemble"),
        Source::Ensemble(e) => e.name(),
        Source::Matrix(m) => {
            ensure!((m - m.transpose()).norm() <= 1e-10 * m.norm().max(1.0), "input matrix is not symmetric");
            "input"
        }
    };
    ensure!(spec.h_max <= spec.n, "h must not exceed n");
    let n = spec.n;
    let per_seed = par_realizations(spec.realizations(), |i| {
        let s = spec.matrix(i);
        let scale = 4.0 * s.norm_squared();
        let mut rows = Vec::new();
        for h in spec.hs() {
            for &m in methods {
                let (f, rep) = m.run(&s, h, max_outer)?;
                rows.push((h, m, rep.normalized_error, rep.predicted_error.map(|e| e / scale), rep.trace, f));
            }
        }
        Ok(rows)
    })?;

    let mut table = String::from("n,h,seed,method,ensemble,normalized_error,predicted_error,iterations\n");
    let mut traces = String::from("n,h,seed,method,iteration,normalized_error\n");
    for (i, rows) in per_seed.iter().enumerate() {
        let seed = spec.seed(i);
        for (h, m, err, pred, trace, _) in rows {
            let iters = trace.len().saturating_sub(1);
            writeln!(table, "{n},{h},{seed},{},{ensemble},{},{},{iters}", m.name(), fmt_f64(*err), fmt_opt(*pred))?;
            for (it, e) in trace.iter().enumerate() {
                writeln!(traces, "{n},{h},{seed},{},{it},{}", m.name(), fmt_f64(*e))?;
            }
        }
    }
    for (k, (h, m, ..)) in per_seed[0].iter().enumerate() {
        let errs: Vec<f64> = per_seed.iter().map(|r| r[k].2).collect();
        let preds: Option<Vec<f64>> = per_seed.iter().map(|r| r[k].3).collect();
        writeln!(
            table,
            "{n},{h},mean,{},{ensemble},{},{},",
            m.name(),
            fmt_f64(mean_stderr(&errs).0),
            fmt_opt(preds.map(|p| mean_stderr(&p).0))
        )?;
    }
    if let Some(path) = factor_out {
        only_one(spec, methods, "--factor-out")?;
        save_factor(path, &Factor::Symmetric(per_seed[0][0].5.clone()))?;
    }
    Ok(SymOutput { table, traces })
}

/// Closed-form expectation versus Monte-Carlo mean. Orthonormal rows use
/// the best signed construction on Haar matrices; symmetric rows compare
/// the partial-eigendecomposition error with its trailing-block identity.
///
/// Columns `kind,n,h,bound,mean,stderr,max_identity_gap,within`.
pub fn run_bounds(spec: &SweepSpec, symmetric: Option<Ensemble>) -> Result<String> {
    let n = spec.n;
    let mut out = String::from("kind,n,h,bound,mean,stderr,max_identity_gap,within\n");
    for h in spec.hs() {
        match symmetric {
            None => {
                ensure!(h <= n, "h must not exceed n");
                let bound = expected_bound_ortho(n, h)?;
                let errs = par_realizations(spec.seeds, |i| {
                    let u = Ensemble::Haar.sample(n, spec.seed(i));
                    // Past n - 1 reflectors partial QR is already exact.
                    let (_, rep) = signed_approx(&u, h.min(n - 1))?;
                    Ok(rep.measured_error)
                })?;
                let (mean, se) = mean_stderr(&errs);
                let within = mean <= bound + 2.0 * se;
                writeln!(out, "ortho,{n},{h},{},{},{},,{within}", fmt_f64(bound), fmt_f64(mean), fmt_f64(se))?;
            }
            Some(e) => {
                ensure!(e != Ensemble::Haar, "symmetric bounds need indefinite or posdef");
                let pairs = par_realizations(spec.seeds, |i| {
                    let s = e.sample(n, spec.seed(i));
                    let (_, rep) = partial_eig_baseline(&s, h)?;
                    let pred = rep.predicted_error.ok_or_else(|| anyhow!("baseline has no prediction"))?;
                    Ok((rep.measured_error, (rep.measured_error - pred).abs()))
                })?;
                let errs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let gap = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
                let (mean, se) = mean_stderr(&errs);
                writeln!(out, "sym,{n},{h},,{},{},{},{}", fmt_f64(mean), fmt_f64(se), fmt_f64(gap), gap <= 1e-6)?;
            }
        }
    }
    Ok(out)
}

/// Dense versus factored apply for each `h`. Columns
/// `kind,n,h,dense_flops,factored_flops,ratio,expected_ratio,dense_ns,factored_ns,ok`.
///
/// For the orthonormal kind `ok` checks the flop ratio against `2n^2/(4nh)`
/// within 20%; for the symmetric kind it checks `flops <= 1.2 (8h+1) n`.
/// Fails if any row is not ok.
pub fn run_bench(spec: &SweepSpec, reps: usize) -> Result<String> {
    let n = spec.n;
    let reps = reps.max(1);
    let mut out = String::from("kind,n,h,dense_flops,factored_flops,ratio,expected_ratio,dense_ns,factored_ns,ok\n");
    let mut failed = Vec::new();
    for h in spec.hs() {
        ensure!(h <= n, "h must not exceed n");
        let mut rng = seeded_rng(spec.base_seed);
        let p: ReflectorProduct<f64> = random_reflector_product(n, h, &mut rng);
        let spectrum = DVector::from_fn(n, |i, _| 1.0 + i as f64);
        let sym = FactoredSymmetric::new(p.clone(), spectrum)?;
        let x = DVector::from_fn(n, |i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
        let dense_flops = dense_matvec_flops(n);

        for (kind, dense) in [("ortho", p.to_dense()), ("sym", sym.to_dense())] {
            let mut counter = FlopCounter::new();
            let y = if kind == "ortho" { p.apply_counted(&x, &mut counter)? } else { sym.apply_counted(&x, &mut counter)? };
            let yd = &dense * &x;
            ensure!((&y - &yd).norm() <= 1e-9 * yd.norm().max(1.0), "{kind} apply disagrees with dense product");

            let t = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(&dense * std::hint::black_box(&x));
            }
            let dense_ns = t.elapsed().as_nanos() / reps as u128;
            let t = Instant::now();
            for _ in 0..reps {
                if kind == "ortho" {
                    std::hint::black_box(p.apply(std::hint::black_box(&x))?);
                } else {
                    std::hint::black_box(sym.apply(std::hint::black_box(&x))?);
                }
            }
            let fact_ns = t.elapsed().as_nanos() / reps as u128;

            let ratio = dense_flops as f64 / counter.flops as f64;
            let (expected, ok) = if kind == "ortho" {
                if h == 0 {
                    (f64::INFINITY, counter.flops <= n as u64)
                } else {
                    let e = (2 * n * n) as f64 / (4 * n * h) as f64;
                    (e, (ratio / e - 1.0).abs() <= 0.2)
                }
            } else {
                let limit = 1.2 * ((8 * h + 1) * n) as f64;
                (dense_flops as f64 / ((8 * h + 1) * n) as f64, counter.flops as f64 <= limit)
            };
            if !ok {
                failed.push(format!("{kind} h={h}"));
            }
            writeln!(
                out,
                "{kind},{n},{h},{dense_flops},{},{},{},{dense_ns},{fact_ns},{ok}",
                counter.flops,
                fmt_f64(ratio),
                fmt_f64(expected)
            )?;
        }
    }
    ensure!(failed.is_empty(), "flop check failed for {}\n{out}", failed.join(", "));
    Ok(out)
}

/// Settings of the metric-learning demo.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDemo {
    pub h: usize,
    pub iters: usize,
    pub k: usize,
    /// Data file (coordinates then integer label); blobs when absent.
    pub input: Option<PathBuf>,
    pub header: bool,
    pub blobs: BlobSpec,
}

/// Seed, dimension, identity / dense / projected accuracy, projected model.
type DemoRow = (u64, usize, f64, f64, f64, MetricModel);

/// Trains dense and projected metrics per seed. Columns
/// `seed,n,h,identity_accuracy,dense_accuracy,projected_accuracy,projection_error`,
/// then a mean row. The last projected model is returned for saving.
pub fn run_metric_demo(spec: &SweepSpec, demo: &MetricDemo) -> Result<(String, MetricModel)> {
    let file_data = match &demo.input {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(Dataset::from_csv(BufReader::new(f), demo.header)?)
        }
        None => None,
    };
    let results = par_realizations(spec.seeds, |i| {
        let seed = spec.seed(i);
        let data = match &file_data {
            Some(d) => d.clone(),
            None => metric::gaussian_blobs(&BlobSpec { dim: spec.n, ..demo.blobs.clone() }, seed)?,
        };
        ensure!(demo.h <= data.dim(), "h must not exceed the data dimension {}", data.dim());
        let (train, test) = data.split(0.7, seed)?;
        let cfg = TrainConfig::new(demo.h);
        let dense = metric::train_dense(&train, demo.iters, &cfg.lmnn)?;
        let projected = metric::train_projected(&train, demo.h, demo.iters, &cfg)?;
        let (_, acc_id) = metric::knn_classify(&MetricModel::identity(data.dim()), &train, &test, demo.k)?;
        let (_, acc_dense) = metric::knn_classify(&dense, &train, &test, demo.k)?;
        let (_, acc_proj) = metric::knn_classify(&projected, &train, &test, demo.k)?;
        Ok((seed, data.dim(), acc_id, acc_dense, acc_proj, projected))
    })?;
    let mut out = String::from("seed,n,h,identity_accuracy,dense_accuracy,projected_accuracy,projection_error\n");
    for (seed, dim, a, b, c, m) in &results {
        writeln!(
            out,
            "{seed},{dim},{},{},{},{},{}",
            demo.h,
            fmt_f64(*a),
            fmt_f64(*b),
            fmt_f64(*c),
            fmt_opt(m.projection_error())
        )?;
    }
    let col = |f: fn(&DemoRow) -> f64| mean_stderr(&results.iter().map(f).collect::<Vec<_>>()).0;
    writeln!(
        out,
        "mean,{},{},{},{},{},{}",
        results[0].1,
        demo.h,
        fmt_f64(col(|r| r.2)),
        fmt_f64(col(|r| r.3)),
        fmt_f64(col(|r| r.4)),
        fmt_f64(col(|r| r.5.projection_error().unwrap_or(0.0)))
    )?;
    let last = results.into_iter().last().expect("seeds >= 1").5;
    Ok((out, last))
}

/// Applies a stored factor to a vector; one CSV row out.
pub fn run_apply(factor: &Path, vector: &Path) -> Result<String> {
    let f = load_factor(factor)?;
    let x = read_vector_file(vector)?;
    ensure!(x.len() == f.n(), "vector has length {}, factor has n = {}", x.len(), f.n());
    let y = f.apply(&x)?;
    let row: Vec<String> = y.iter().map(|v| fmt_f64(*v)).collect();
    Ok(format!("{}\n", row.join(",")))
}

/// The factored part of a projected metric, for `--factor-out`.
pub fn metric_factor(model: &MetricModel) -> Result<Factor<f64>> {
    match model {
        MetricModel::Factored { factor, .. } => Ok(Factor::Symmetric(factor.clone())),
        MetricModel::Dense { .. } => bail!("model is not factored"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haar(n: usize, h_min: usize, h_max: usize, seeds: usize) -> SweepSpec {
        SweepSpec::new(n, h_min, h_max, seeds, 11, Source::Ensemble(Ensemble::Haar)).unwrap()
    }

    fn rows(csv: &str) -> Vec<Vec<String>> {
        csv.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(4, 3, 2, 1, 0, Source::Ensemble(Ensemble::Haar)).is_err());
        assert!(SweepSpec::new(4, 0, 2, 0, 0, Source::Ensemble(Ensemble::Haar)).is_err());
        assert!(SweepSpec::new(4, 0, 2, 1, 0, Source::Matrix(DMatrix::identity(3, 3))).is_err());
        assert!("foo".parse::<OrthoMethod>().is_err());
        assert_eq!("unconstrained-d".parse::<OrthoMethod>().unwrap(), OrthoMethod::UnconstrainedD);
        assert_eq!("shf-su".parse::<SymMethod>().unwrap(), SymMethod::ShfSu);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25e12] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn ortho_h0_is_the_identity_formula() {
        let spec = haar(8, 0, 0, 1);
        let csv = run_ortho_sweep(&spec, &[OrthoMethod::Constrained], None).unwrap();
        let u = Ensemble::Haar.sample(8, 11);
        let expected = (16.0 - 2.0 * u.trace()) / 32.0;
        let got: f64 = rows(&csv)[0][4].parse().unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn ortho_sweep_shape_and_means() {
        let spec = haar(6, 1, 3, 4);
        let csv = run_ortho_sweep(&spec, &OrthoMethod::ALL, None).unwrap();
        let r = rows(&csv);
        assert_eq!(r.len(), 4 * 3 * 4 + 3 * 4);
        let mean_row = r.iter().find(|x| x[2] == "mean" && x[1] == "2" && x[3] == "constrained").unwrap();
        let vals: Vec<f64> = r
            .iter()
            .filter(|x| x[2] != "mean" && x[1] == "2" && x[3] == "constrained")
            .map(|x| x[4].parse().unwrap())
            .collect();
        let m: f64 = mean_row[4].parse().unwrap();
        assert!((m - vals.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn bench_break_even_and_rejects_small_ratio_drift() {
        let spec = SweepSpec::new(64, 32, 32, 1, 0, Source::Ensemble(Ensemble::Haar)).unwrap();
        let csv = run_bench(&spec, 1).unwrap();
        let ratio: f64 = rows(&csv)[0][5].parse().unwrap();
        assert!((ratio - 1.0).abs() < 0.2);
        // At n = 8, h = 1 the `+ n` term dominates and the ratio is off by 25%.
        let spec = SweepSpec::new(8, 1, 1, 1, 0, Source::Ensemble(Ensemble::Haar)).unwrap();
        assert!(run_bench(&spec, 1).is_err());
    }

    #[test]
    fn bounds_at_h0() {
        let spec = haar(16, 0, 0, 50);
        let csv = run_bounds(&spec, None).unwrap();
        let r = &rows(&csv)[0];
        let bound: f64 = r[3].parse().unwrap();
        let expected = 32.0 - (8.0 / std::f64::consts::PI).sqrt() * 4.0;
        assert!((bound - expected).abs() < 1e-12);
        assert_eq!(r[7], "true");
    }

    #[test]
    fn sym_bounds_identity() {
        let spec = SweepSpec::new(12, 3, 3, 5, 2, Source::Ensemble(Ensemble::Indefinite)).unwrap();
        let csv = run_bounds(&spec, Some(Ensemble::Indefinite)).unwrap();
        assert_eq!(rows(&csv)[0][7], "true");
    }
}
