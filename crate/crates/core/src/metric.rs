//! Mahalanobis metric learning with the learned metric projected onto the
//! few-reflector symmetric form, so test-time transforms cost O(nh).
//!
//! The learner is a small large-margin nearest-neighbor variant: each point
//! is pulled towards its `k_target` nearest same-class points (Euclidean,
//! fixed up front), and differently-labeled points that come within a unit
//! margin of a target are pushed out with weight `mu`.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ensemble::seeded_rng;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_ascending;
use crate::reflector::{relative_error, FactoredSymmetric, FlopCounter, ReflectorProduct};
use crate::sym::{shf, InitMode, ShfConfig};

/// Labeled points, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
    labels: Vec<i64>,
}

impl Dataset {
    pub fn new(points: DMatrix<f64>, labels: Vec<i64>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset("non-finite coordinate".into()));
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::InvalidDataset("need at least two classes".into()));
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    /// Rows `idx` as a new dataset; fails if fewer than two classes remain.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let points = self.points.select_rows(idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(points, labels)
    }

    /// Shuffled split; the first part holds `round(frac * N)` points.
    pub fn split(&self, frac: f64, seed: u64) -> Result<(Self, Self)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeded_rng(seed));
        let cut = ((self.len() as f64) * frac).round() as usize;
        let cut = cut.clamp(1, self.len().saturating_sub(1));
        Ok((self.subset(&idx[..cut])?, self.subset(&idx[cut..])?))
    }

    /// Parses CSV rows of coordinates followed by an integer label.
    pub fn from_csv<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut coords = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidDataset(e.to_string()))?;
            if record.len() < 2 {
                return Err(Error::InvalidDataset(format!("row {line}: need coordinates and a label")));
            }
            let n = record.len() - 1;
            if *width.get_or_insert(n) != n {
                return Err(Error::InvalidDataset(format!("row {line}: expected {} columns", width.unwrap() + 1)));
            }
            for field in record.iter().take(n) {
                let x: f64 = field
                    .parse()
                    .map_err(|_| Error::InvalidDataset(format!("row {line}: bad number {field:?}")))?;
                coords.push(x);
            }
            let label = &record[n];
            labels.push(
                label
                    .parse()
                    .map_err(|_| Error::InvalidDataset(format!("row {line}: bad label {label:?}")))?,
            );
        }
        let n = width.ok_or_else(|| Error::InvalidDataset("no rows".into()))?;
        let points = DMatrix::from_row_slice(labels.len(), n, &coords);
        Self::new(points, labels)
    }
}

/// Parameters of [`gaussian_blobs`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub points: usize,
    /// Scale of the class centers.
    pub separation: f64,
    /// Per-dimension noise scales are drawn log-uniformly from this range.
    pub noise: (f64, f64),
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            dim: 10,
            points: 600,
            separation: 2.0,
            noise: (0.5, 4.0),
        }
    }
}

/// Gaussian classes with random centers and a shared anisotropic noise,
/// so that a learned metric has something to reweight.
pub fn gaussian_blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset> {
    if spec.classes < 2 || spec.dim == 0 || spec.points < spec.classes {
        return Err(Error::InvalidArgument("blobs need >= 2 classes, dim >= 1 and a point per class".into()));
    }
    let mut rng = seeded_rng(seed);
    let centers = DMatrix::from_fn(spec.classes, spec.dim, |_, _| {
        spec.separation * rng.sample::<f64, _>(StandardNormal)
    });
    let (lo, hi) = (spec.noise.0.ln(), spec.noise.1.ln());
    let scales: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(lo..=hi).exp()).collect();
    let labels: Vec<i64> = (0..spec.points).map(|i| (i % spec.classes) as i64).collect();
    let points = DMatrix::from_fn(spec.points, spec.dim, |i, j| {
        let c = labels[i] as usize;
        centers[(c, j)] + scales[j] * rng.sample::<f64, _>(StandardNormal)
    });
    Dataset::new(points, labels)
}

/// Centers the data and projects it onto the top `dims` principal
/// directions.
pub fn pca_reduce(data: &Dataset, dims: usize) -> Result<Dataset> {
    let n = data.dim();
    if dims == 0 || dims > n {
        return Err(Error::OutOfRange {
            name: "dims",
            value: dims,
            range: format!("1..={n}"),
        });
    }
    let mean = data.points.row_mean();
    let mut centered = data.points.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (data.len().max(2) - 1) as f64;
    let (_, vecs) = sym_eigen_ascending(&cov);
    let top = DMatrix::from_fn(n, dims, |i, j| vecs[(i, n - 1 - j)]);
    Dataset::new(centered * top, data.labels.clone())
}

/// Learned metric `d(x, y) = |L (x - y)|^2`, dense or factored.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricModel {
    Dense {
        s: DMatrix<f64>,
        /// `sqrt(Lambda) V^T`, rows by descending eigenvalue.
        l: DMatrix<f64>,
    },
    Factored {
        factor: FactoredSymmetric<f64>,
        /// `relative_error(S, Sbar)` of the projection.
        projection_error: f64,
        /// Output coordinate `i` is coordinate `order[i]` of
        /// `sqrt(sbar) * Ubar^T x`, sorted by descending `sbar`.
        order: Vec<usize>,
    },
}

/// Flips `v` so its largest-magnitude entry is positive.
fn orient_by_peak(v: &mut [f64]) {
    let peak = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if peak < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl MetricModel {
    pub fn identity(n: usize) -> Self {
        Self::dense(DMatrix::identity(n, n))
    }

    /// Dense model; `s` is symmetrized and its negative eigenvalues clamped.
    pub fn dense(s: DMatrix<f64>) -> Self {
        let n = s.nrows();
        let (vals, vecs) = sym_eigen_ascending(&s);
        let mut l = DMatrix::zeros(n, n);
        for r in 0..n {
            let k = n - 1 - r;
            let mut v: Vec<f64> = vecs.column(k).iter().copied().collect();
            orient_by_peak(&mut v);
            let scale = vals[k].max(0.0).sqrt();
            for (c, x) in v.iter().enumerate() {
                l[(r, c)] = scale * x;
            }
        }
        let s = l.tr_mul(&l);
        Self::Dense { s, l }
    }

    /// Factored model with the spectrum clamped at zero. Columns of `Ubar`
    /// are oriented like the dense transform's rows.
    pub fn factored(factor: FactoredSymmetric<f64>, projection_error: f64) -> Result<Self> {
        let (basis, spectrum) = factor.into_parts();
        let n = basis.n();
        let dense = basis.to_dense();
        let flips = DVector::from_fn(n, |j, _| {
            let mut col: Vec<f64> = dense.column(j).iter().copied().collect();
            let before = col.clone();
            orient_by_peak(&mut col);
            if col == before {
                1.0
            } else {
                -1.0
            }
        });
        let basis = basis.right_sign_scaled(&flips)?;
        let spectrum = spectrum.map(|x| x.max(0.0));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| spectrum[b].partial_cmp(&spectrum[a]).unwrap_or(std::cmp::Ordering::Equal));
        Ok(Self::Factored {
            factor: FactoredSymmetric::new(basis, spectrum)?,
            projection_error,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense { s, .. } => s.nrows(),
            Self::Factored { factor, .. } => factor.n(),
        }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self, Self::Factored { .. })
    }

    /// The metric matrix `L^T L`.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Self::Dense { s, .. } => s.clone(),
            Self::Factored { factor, .. } => factor.to_dense(),
        }
    }

    pub fn projection_error(&self) -> Option<f64> {
        match self {
            Self::Dense { .. } => None,
            Self::Factored { projection_error, .. } => Some(*projection_error),
        }
    }

    pub fn transform(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.transform_counted(x, &mut FlopCounter::new())
    }

    /// [`Self::transform`] while counting flops: `2n^2 - n` dense,
    /// `4nh + 2n` factored.
    pub fn transform_counted(&self, x: &DVector<f64>, counter: &mut FlopCounter) -> Result<DVector<f64>> {
        match self {
            Self::Dense { l, .. } => {
                if x.len() != l.ncols() {
                    return Err(Error::DimensionMismatch {
                        expected: l.ncols(),
                        got: x.len(),
                    });
                }
                counter.flops += crate::reflector::dense_matvec_flops(l.nrows());
                Ok(l * x)
            }
            Self::Factored { factor, order, .. } => {
                let y = factor.basis().apply_transpose_counted(x, counter)?;
                counter.flops += y.len() as u64;
                let spec = factor.spectrum();
                Ok(DVector::from_iterator(
                    y.len(),
                    order.iter().map(|&i| spec[i].sqrt() * y[i]),
                ))
            }
        }
    }

    /// Squared distance under the metric.
    pub fn distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(self.transform(&(x - y))?.norm_squared())
    }

    /// All rows of `points` mapped by the transform.
    pub fn transform_rows(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(points.nrows(), points.ncols());
        for i in 0..points.nrows() {
            let z = self.transform(&points.row(i).transpose())?;
            out.set_row(i, &z.transpose());
        }
        Ok(out)
    }
}

/// Objective and controls of the large-margin learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LmnnConfig {
    pub k_target: usize,
    pub margin: f64,
    pub mu: f64,
    /// First trial step, relative to `|S|_F / |grad|_F`.
    pub step_size: f64,
    pub max_halvings: usize,
}

impl Default for LmnnConfig {
    fn default() -> Self {
        Self {
            k_target: 3,
            margin: 1.0,
            mu: 0.5,
            step_size: 0.1,
            max_halvings: 20,
        }
    }
}

/// Training data with its target neighbors precomputed.
#[derive(Debug, Clone)]
pub struct Lmnn<'a> {
    data: &'a Dataset,
    cfg: LmnnConfig,
    targets: Vec<(usize, usize)>,
}

impl<'a> Lmnn<'a> {
    pub fn new(data: &'a Dataset, cfg: LmnnConfig) -> Self {
        let n_pts = data.len();
        let mut targets = Vec::new();
        for i in 0..n_pts {
            let xi = data.points.row(i);
            let mut same: Vec<(f64, usize)> = (0..n_pts)
                .filter(|&j| j != i && data.labels[j] == data.labels[i])
                .map(|j| ((data.points.row(j) - xi).norm_squared(), j))
                .collect();
            same.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            targets.extend(same.iter().take(cfg.k_target).map(|&(_, j)| (i, j)));
        }
        Self { data, cfg, targets }
    }

    pub fn targets(&self) -> &[(usize, usize)] {
        &self.targets
    }

    /// Squared distances between all rows of `z`.
    fn pairwise(z: &DMatrix<f64>) -> DMatrix<f64> {
        let norms: Vec<f64> = z.row_iter().map(|r| r.norm_squared()).collect();
        let gram = z * z.transpose();
        DMatrix::from_fn(z.nrows(), z.nrows(), |i, j| (norms[i] + norms[j] - 2.0 * gram[(i, j)]).max(0.0))
    }

    fn embed(s: &DMatrix<f64>, points: &DMatrix<f64>) -> DMatrix<f64> {
        let model = MetricModel::dense(s.clone());
        let MetricModel::Dense { l, .. } = model else { unreachable!() };
        points * l.transpose()
    }

    /// Loss and, if requested, the pair weights `w_ab` such that the
    /// gradient is `sum_ab w_ab (x_a - x_b)(x_a - x_b)^T`.
    fn evaluate(&self, s: &DMatrix<f64>, want_weights: bool) -> (f64, Option<DMatrix<f64>>) {
        let x = &self.data.points;
        let d = Self::pairwise(&Self::embed(s, x));
        let n_pts = self.data.len();
        let mut w = want_weights.then(|| DMatrix::zeros(n_pts, n_pts));
        let mut loss = 0.0;
        for &(i, j) in &self.targets {
            loss += d[(i, j)];
            if let Some(w) = w.as_mut() {
                w[(i, j)] += 1.0;
            }
            for l in 0..n_pts {
                if self.data.labels[l] == self.data.labels[i] {
                    continue;
                }
                let hinge = self.cfg.margin + d[(i, j)] - d[(i, l)];
                if hinge > 0.0 {
                    loss += self.cfg.mu * hinge;
                    if let Some(w) = w.as_mut() {
                        w[(i, j)] += self.cfg.mu;
                        w[(i, l)] -= self.cfg.mu;
                    }
                }
            }
        }
        (loss, w)
    }

    pub fn loss(&self, s: &DMatrix<f64>) -> f64 {
        self.evaluate(s, false).0
    }

    /// Gradient of the loss with respect to `S` (a subgradient at hinge kinks).
    pub fn gradient(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let (_, w) = self.evaluate(s, true);
        let w = w.expect("weights requested");
        let ws = &w + w.transpose();
        let degree = DVector::from_iterator(ws.nrows(), ws.row_iter().map(|r| r.sum()));
        let lap = DMatrix::from_diagonal(&degree) - ws;
        let x = &self.data.points;
        x.tr_mul(&(lap * x))
    }

    /// One projected-gradient step with backtracking; the dense model is
    /// returned unchanged if no trial step lowers the loss.
    pub fn step(&self, model: &MetricModel) -> Result<MetricModel> {
        let MetricModel::Dense { s, .. } = model else {
            return Err(Error::InvalidArgument("gradient steps need a dense model".into()));
        };
        let (loss, _) = self.evaluate(s, false);
        let g = self.gradient(s);
        let gnorm = g.norm();
        if gnorm == 0.0 || !gnorm.is_finite() {
            return Ok(model.clone());
        }
        let mut eta = self.cfg.step_size * s.norm().max(1e-12) / gnorm;
        for _ in 0..=self.cfg.max_halvings {
            let trial = MetricModel::dense(s - &g * eta);
            let MetricModel::Dense { s: st, .. } = &trial else { unreachable!() };
            if self.loss(st) < loss {
                return Ok(trial);
            }
            eta *= 0.5;
        }
        Ok(model.clone())
    }
}

/// [`Lmnn::step`] with freshly computed targets and the given step size and
/// margin.
pub fn lmnn_step(model: &MetricModel, data: &Dataset, step_size: f64, margin: f64) -> Result<MetricModel> {
    let cfg = LmnnConfig {
        step_size,
        margin,
        ..LmnnConfig::default()
    };
    Lmnn::new(data, cfg).step(model)
}

/// SHF-SU settings used for projection: baseline start, spectrum update on.
pub fn projection_config(h: usize) -> ShfConfig {
    ShfConfig::new(h).with_spectrum_update(true).with_init(InitMode::Baseline)
}

/// Projects a dense metric onto `h` reflectors with the given SHF settings
/// (`cfg.h` is overridden).
pub fn project_metric(model: &MetricModel, h: usize, cfg: &ShfConfig) -> Result<MetricModel> {
    let s = model.matrix();
    let mut cfg = cfg.clone();
    cfg.h = h;
    let (factor, _) = shf(&s, &cfg)?;
    let (basis, spectrum) = factor.into_parts();
    let clamped = FactoredSymmetric::new(basis, spectrum.map(|x| x.max(0.0)))?;
    let err = relative_error(&s, &clamped.to_dense())?;
    MetricModel::factored(clamped, err)
}

/// Settings for [`train_projected`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lmnn: LmnnConfig,
    pub shf: ShfConfig,
    /// Continue each gradient step from the projected metric (default)
    /// rather than from the metric before projection.
    pub continue_from_projected: bool,
}

impl TrainConfig {
    pub fn new(h: usize) -> Self {
        Self {
            lmnn: LmnnConfig::default(),
            shf: projection_config(h),
            continue_from_projected: true,
        }
    }
}

/// Dense training for `iters` steps from the identity metric.
pub fn train_dense(data: &Dataset, iters: usize, cfg: &LmnnConfig) -> Result<MetricModel> {
    let learner = Lmnn::new(data, cfg.clone());
    let mut model = MetricModel::identity(data.dim());
    for _ in 0..iters {
        model = learner.step(&model)?;
    }
    Ok(model)
}

/// First half of the iterations unconstrained, then every step is followed
/// by a projection onto `h` reflectors. Returns the final factored model.
pub fn train_projected(data: &Dataset, h: usize, total_iters: usize, cfg: &TrainConfig) -> Result<MetricModel> {
    if total_iters < 2 {
        return Err(Error::OutOfRange {
            name: "total_iters",
            value: total_iters,
            range: ">= 2".into(),
        });
    }
    if h > data.dim() {
        return Err(Error::OutOfRange {
            name: "h",
            value: h,
            range: format!("0..={}", data.dim()),
        });
    }
    let learner = Lmnn::new(data, cfg.lmnn.clone());
    let mut dense = MetricModel::identity(data.dim());
    let first = total_iters / 2;
    for _ in 0..first {
        dense = learner.step(&dense)?;
    }
    let mut projected = None;
    for _ in first..total_iters {
        let stepped = learner.step(&dense)?;
        let p = project_metric(&stepped, h, &cfg.shf)?;
        dense = if cfg.continue_from_projected {
            MetricModel::dense(p.matrix())
        } else {
            stepped
        };
        projected = Some(p);
    }
    Ok(projected.expect("at least one projected iteration"))
}

/// k-nearest-neighbor classification in the transformed space. Votes are
/// by majority; ties go to the tied label seen first (nearest).
pub fn knn_classify(model: &MetricModel, train: &Dataset, test: &Dataset, k: usize) -> Result<(Vec<i64>, f64)> {
    if k == 0 || k > train.len() {
        return Err(Error::OutOfRange {
            name: "k",
            value: k,
            range: format!("1..={}", train.len()),
        });
    }
    if train.dim() != model.dim() || test.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: if train.dim() != model.dim() { train.dim() } else { test.dim() },
        });
    }
    let zt = model.transform_rows(&train.points)?;
    let zq = model.transform_rows(&test.points)?;
    let mut predictions = Vec::with_capacity(test.len());
    let mut correct = 0usize;
    for q in 0..test.len() {
        let row = zq.row(q);
        let mut dist: Vec<(f64, usize)> = (0..train.len()).map(|i| ((zt.row(i) - row).norm_squared(), i)).collect();
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let nearest = &mut dist[..k];
        nearest.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let mut votes: Vec<(i64, usize)> = Vec::new();
        for &(_, i) in nearest.iter() {
            let label = train.labels[i];
            match votes.iter_mut().find(|v| v.0 == label) {
                Some(v) => v.1 += 1,
                None => votes.push((label, 1)),
            }
        }
        // `votes` is in order of first (nearest) appearance; max_by_key keeps the last max.
        let best = votes.iter().rev().max_by_key(|v| v.1).expect("k >= 1").0;
        if best == test.labels[q] {
            correct += 1;
        }
        predictions.push(best);
    }
    let acc = if test.is_empty() { 0.0 } else { correct as f64 / test.len() as f64 };
    Ok((predictions, acc))
}

/// Convenience check used by tests and the demo: `Ubar` columns as a
/// reflector product of the factored model.
pub fn factored_basis(model: &MetricModel) -> Option<&ReflectorProduct<f64>> {
    match model {
        MetricModel::Factored { factor, .. } => Some(factor.basis()),
        MetricModel::Dense { .. } => None,
    }
}
