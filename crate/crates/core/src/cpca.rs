//! Contrastive PCA over a pair of feature matrices.
//!
//! The contrastive components are the leading eigenvectors of
//! `C_T − α·C_B`, where `C_T` and `C_B` are the covariance matrices of the
//! target and background features. With `α = 0` they are the ordinary
//! principal components of the target.
//!
//! Both matrices are centered by their own means to form covariances, but
//! [`project`] centers every input by the *target* means so that the two
//! point clouds share one coordinate system.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of contrastive components kept. The interactive views are 2-D.
pub const COMPONENTS: usize = 2;

/// Regularizer in the denominator of the automatic α score.
pub const SCORE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpcaError {
    #[error("covariance needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("target has {target} features but background has {background}")]
    FeatureCountMismatch { target: usize, background: usize },
    #[error("{d} features cannot give {d_prime} components")]
    TooFewFeatures { d: usize, d_prime: usize },
    #[error("only {COMPONENTS} components are supported, got {0}")]
    UnsupportedComponents(usize),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("contrast parameter {0} must be finite and non-negative")]
    InvalidAlpha(f64),
    #[error("matrix has {got} columns, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("empty α grid")]
    EmptyGrid,
    #[error("every α on the grid produced a non-finite score")]
    NoFiniteScore,
    #[error("previous embedding has {prev_target}+{prev_background} rows, new data {target}+{background}")]
    NodeCountMismatch {
        prev_target: usize,
        prev_background: usize,
        target: usize,
        background: usize,
    },
}

/// Population covariance (divisor `n`) of the columns of `x`.
pub fn covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>, CpcaError> {
    let n = x.nrows();
    if n < 2 {
        return Err(CpcaError::TooFewRows(n));
    }
    let centered = center(x, &column_means(x));
    let mut c = centered.tr_mul(&centered) / n as f64;
    // Exact symmetry, so the eigensolver sees a symmetric matrix.
    for i in 0..c.nrows() {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

fn center(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// Options that change how the inputs are prepared.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CpcaOptions {
    /// Divide every feature by its target standard deviation before fitting.
    pub standardize: bool,
}

/// A fitted contrastive PCA model.
#[derive(Debug, Clone, PartialEq)]
pub struct CpcaModel {
    pub alpha: f64,
    /// `d × 2` projection matrix; its columns are the component loadings.
    pub components: DMatrix<f64>,
    /// Eigenvalues of `C_T − αC_B` for the kept components, descending. After
    /// a rotation, the projected target variance along each axis instead.
    pub eigenvalues: Vec<f64>,
    pub target_means: DVector<f64>,
    pub background_means: DVector<f64>,
    /// Per-feature divisors applied before projection when standardizing.
    pub scales: Option<DVector<f64>>,
    pub scaled_loadings: DMatrix<f64>,
    pub rotated: bool,
    /// Total rotation applied since the fit, in radians.
    pub rotation: f64,
    /// `C_T − αC_B` vanished; the components are the first canonical axes.
    pub degenerate: bool,
    target_cov: DMatrix<f64>,
    background_cov: DMatrix<f64>,
}

impl CpcaModel {
    pub fn feature_count(&self) -> usize {
        self.components.nrows()
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn target_covariance(&self) -> &DMatrix<f64> {
        &self.target_cov
    }

    pub fn background_covariance(&self) -> &DMatrix<f64> {
        &self.background_cov
    }

    /// The matrix whose eigenvectors the model holds.
    pub fn contrast_matrix(&self) -> DMatrix<f64> {
        &self.target_cov - &self.background_cov * self.alpha
    }

    fn with_components(mut self, components: DMatrix<f64>) -> Self {
        let (scaled, degenerate) = scaled_loadings(&components);
        self.scaled_loadings = scaled;
        self.degenerate |= degenerate;
        self.components = components;
        self
    }

    /// Negates component `j` in place.
    pub fn flip(&mut self, j: usize) {
        let mut col = self.components.column_mut(j);
        col.neg_mut();
        let mut col = self.scaled_loadings.column_mut(j);
        col.neg_mut();
    }

    pub fn export(&self) -> ModelExport {
        ModelExport {
            alpha: self.alpha,
            components: rows_of(&self.components),
            eigenvalues: self.eigenvalues.clone(),
            scaled_loadings: rows_of(&self.scaled_loadings),
            rotated: self.rotated,
            rotation: self.rotation,
            degenerate: self.degenerate,
        }
    }

    /// Rebuilds a model from its export and the feature matrices it was fitted
    /// on.
    pub fn from_export(
        export: &ModelExport,
        xt: &DMatrix<f64>,
        xb: &DMatrix<f64>,
        options: &CpcaOptions,
    ) -> Result<CpcaModel, CpcaError> {
        let prepared = Prepared::new(xt, xb, options)?;
        let d = prepared.d();
        let components = matrix_from_rows(&export.components, d, COMPONENTS)
            .ok_or(CpcaError::DimensionMismatch {
                got: export.components.first().map_or(0, Vec::len),
                expected: COMPONENTS,
            })?;
        let scaled = matrix_from_rows(&export.scaled_loadings, d, COMPONENTS).ok_or(
            CpcaError::DimensionMismatch {
                got: export.scaled_loadings.len(),
                expected: d,
            },
        )?;
        Ok(CpcaModel {
            alpha: export.alpha,
            components,
            eigenvalues: export.eigenvalues.clone(),
            target_means: prepared.target_means,
            background_means: prepared.background_means,
            scales: prepared.scales,
            scaled_loadings: scaled,
            rotated: export.rotated,
            rotation: export.rotation,
            degenerate: export.degenerate,
            target_cov: prepared.target_cov,
            background_cov: prepared.background_cov,
        })
    }
}

/// JSON form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub alpha: f64,
    /// One row per feature, one column per component.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub scaled_loadings: Vec<Vec<f64>>,
    pub rotated: bool,
    #[serde(default)]
    pub rotation: f64,
    pub degenerate: bool,
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Option<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Covariances and centering data shared by every α.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub target_means: DVector<f64>,
    pub background_means: DVector<f64>,
    pub scales: Option<DVector<f64>>,
    pub target_cov: DMatrix<f64>,
    pub background_cov: DMatrix<f64>,
}

impl Prepared {
    pub fn new(xt: &DMatrix<f64>, xb: &DMatrix<f64>, options: &CpcaOptions) -> Result<Self, CpcaError> {
        if xt.ncols() != xb.ncols() {
            return Err(CpcaError::FeatureCountMismatch {
                target: xt.ncols(),
                background: xb.ncols(),
            });
        }
        if xt.iter().chain(xb.iter()).any(|v| !v.is_finite()) {
            return Err(CpcaError::NonFinite);
        }
        let scales = options.standardize.then(|| target_scales(xt));
        let (xt, xb) = match &scales {
            Some(s) => (divide_columns(xt, s), divide_columns(xb, s)),
            None => (xt.clone(), xb.clone()),
        };
        Ok(Prepared {
            target_means: column_means(&xt),
            background_means: column_means(&xb),
            target_cov: covariance(&xt)?,
            background_cov: covariance(&xb)?,
            scales,
        })
    }

    pub fn d(&self) -> usize {
        self.target_cov.nrows()
    }

    pub fn fit(&self, alpha: f64, d_prime: usize) -> Result<CpcaModel, CpcaError> {
        if d_prime != COMPONENTS {
            return Err(CpcaError::UnsupportedComponents(d_prime));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(CpcaError::InvalidAlpha(alpha));
        }
        let d = self.d();
        if d < d_prime {
            return Err(CpcaError::TooFewFeatures { d, d_prime });
        }
        let contrast = &self.target_cov - &self.background_cov * alpha;
        let scale = self
            .target_cov
            .amax()
            .max(alpha * self.background_cov.amax())
            .max(f64::MIN_POSITIVE);
        let degenerate = contrast.amax() <= 1e-12 * scale;

        let (components, eigenvalues) = if degenerate {
            (DMatrix::identity(d, d_prime), vec![0.0; d_prime])
        } else {
            leading_eigenpairs(contrast, d_prime)
        };
        let (scaled, zero_column) = scaled_loadings(&components);
        Ok(CpcaModel {
            alpha,
            components,
            eigenvalues,
            target_means: self.target_means.clone(),
            background_means: self.background_means.clone(),
            scales: self.scales.clone(),
            scaled_loadings: scaled,
            rotated: false,
            rotation: 0.0,
            degenerate: degenerate || zero_column,
            target_cov: self.target_cov.clone(),
            background_cov: self.background_cov.clone(),
        })
    }
}

fn target_scales(xt: &DMatrix<f64>) -> DVector<f64> {
    let n = xt.nrows().max(1) as f64;
    let means = column_means(xt);
    DVector::from_iterator(
        xt.ncols(),
        xt.column_iter().enumerate().map(|(j, c)| {
            let var = c.iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        }),
    )
}

fn divide_columns(x: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= s[j];
    }
    out
}

/// Top `k` eigenpairs of a symmetric matrix, descending, with each vector's
/// largest-magnitude entry made positive.
fn leading_eigenpairs(m: DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let d = eig.eigenvectors.nrows();
    let mut w = DMatrix::zeros(d, k);
    let mut values = Vec::with_capacity(k);
    for (j, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).normalize();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        w.set_column(j, &v);
        values.push(eig.eigenvalues[idx]);
    }
    (w, values)
}

/// Fits contrastive PCA with `d_prime` components (only 2 is supported).
pub fn fit_cpca(
    xt: &DMatrix<f64>,
    xb: &DMatrix<f64>,
    alpha: f64,
    d_prime: usize,
) -> Result<CpcaModel, CpcaError> {
    fit_cpca_with(xt, xb, alpha, d_prime, &CpcaOptions::default())
}

pub fn fit_cpca_with(
    xt: &DMatrix<f64>,
    xb: &DMatrix<f64>,
    alpha: f64,
    d_prime: usize,
    options: &CpcaOptions,
) -> Result<CpcaModel, CpcaError> {
    Prepared::new(xt, xb, options)?.fit(alpha, d_prime)
}

/// `(X − target means)·W`, after standardization if the model uses it.
pub fn project(x: &DMatrix<f64>, model: &CpcaModel) -> Result<DMatrix<f64>, CpcaError> {
    if x.ncols() != model.feature_count() {
        return Err(CpcaError::DimensionMismatch {
            got: x.ncols(),
            expected: model.feature_count(),
        });
    }
    let mut centered = match &model.scales {
        Some(s) => divide_columns(x, s),
        None => x.clone(),
    };
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-model.target_means[j]);
    }
    Ok(centered * &model.components)
}

/// Projected coordinates of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub target: DMatrix<f64>,
    pub background: DMatrix<f64>,
}

impl Embedding {
    pub fn compute(model: &CpcaModel, xt: &DMatrix<f64>, xb: &DMatrix<f64>) -> Result<Self, CpcaError> {
        Ok(Embedding {
            target: project(xt, model)?,
            background: project(xb, model)?,
        })
    }

    pub fn axis_labels(model: &CpcaModel) -> [&'static str; 2] {
        if model.alpha == 0.0 {
            ["PC1", "PC2"]
        } else {
            ["cPC1", "cPC2"]
        }
    }

    /// Column `j` of the target rows followed by the background rows.
    pub fn axis(&self, j: usize) -> Vec<f64> {
        self.target
            .column(j)
            .iter()
            .chain(self.background.column(j).iter())
            .copied()
            .collect()
    }
}

/// Sum of per-column population variances.
pub fn trace_variance(y: &DMatrix<f64>) -> f64 {
    let n = y.nrows();
    if n == 0 {
        return 0.0;
    }
    y.column_iter()
        .map(|c| {
            let mean = c.sum() / n as f64;
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
        })
        .sum()
}

/// The default α grid: 0 followed by 40 log-spaced values in `[0.1, 1000]`.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let (lo, hi) = (0.1f64.log10(), 1000f64.log10());
    grid.extend((0..40).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / 39.0)));
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    pub alpha: f64,
    pub target_variance: f64,
    pub background_variance: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSelection {
    pub alpha: f64,
    pub scores: Vec<AlphaScore>,
}

/// Picks the α that maximizes projected target variance over projected
/// background variance; ties go to the smaller α.
pub fn auto_alpha(xt: &DMatrix<f64>, xb: &DMatrix<f64>, grid: &[f64]) -> Result<AlphaSelection, CpcaError> {
    auto_alpha_with(xt, xb, grid, &CpcaOptions::default())
}

pub fn auto_alpha_with(
    xt: &DMatrix<f64>,
    xb: &DMatrix<f64>,
    grid: &[f64],
    options: &CpcaOptions,
) -> Result<AlphaSelection, CpcaError> {
    if grid.is_empty() {
        return Err(CpcaError::EmptyGrid);
    }
    let prepared = Prepared::new(xt, xb, options)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for &alpha in &sorted {
        let model = prepared.fit(alpha, COMPONENTS)?;
        let target_variance = trace_variance(&project(xt, &model)?);
        let background_variance = trace_variance(&project(xb, &model)?);
        let score = target_variance / (SCORE_EPSILON + background_variance);
        if score.is_finite() && best.is_none_or(|(_, s)| score > s) {
            best = Some((alpha, score));
        }
        scores.push(AlphaScore {
            alpha,
            target_variance,
            background_variance,
            score,
        });
    }
    let (alpha, _) = best.ok_or(CpcaError::NoFiniteScore)?;
    Ok(AlphaSelection { alpha, scores })
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// Flips components whose projections anti-correlate with `prev`.
///
/// For each axis the coordinates of all target and background nodes are
/// concatenated before and after the update; a negative cosine similarity
/// negates that component.
pub fn stabilize_signs(
    prev: &Embedding,
    model: CpcaModel,
    xt: &DMatrix<f64>,
    xb: &DMatrix<f64>,
) -> Result<CpcaModel, CpcaError> {
    if prev.target.nrows() != xt.nrows() || prev.background.nrows() != xb.nrows() {
        return Err(CpcaError::NodeCountMismatch {
            prev_target: prev.target.nrows(),
            prev_background: prev.background.nrows(),
            target: xt.nrows(),
            background: xb.nrows(),
        });
    }
    let next = Embedding::compute(&model, xt, xb)?;
    let mut model = model;
    for j in 0..COMPONENTS {
        if cosine(&prev.axis(j), &next.axis(j)) < 0.0 {
            model.flip(j);
        }
    }
    Ok(model)
}

/// Standard 2-D rotation matrix `[[cos, −sin], [sin, cos]]`.
pub fn rotation_matrix(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rotates the components by `theta`: `W' = W·R(θ)`, so projections become
/// `Y·R(θ)` and the first axis points along `(cos θ, sin θ)` of the old
/// plane.
pub fn rotate(model: &CpcaModel, theta: f64) -> CpcaModel {
    if theta == 0.0 {
        return model.clone();
    }
    let w = &model.components * rotation_matrix(theta);
    let eigenvalues = w
        .column_iter()
        .map(|c| (c.transpose() * &model.target_cov * c)[(0, 0)])
        .collect();
    let mut out = model.clone().with_components(w);
    out.eigenvalues = eigenvalues;
    out.rotated = true;
    out.rotation = model.rotation + theta;
    out
}

/// Each column divided by its largest magnitude. The flag reports a zero
/// column, which is left as zeros.
pub fn scaled_loadings(w: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let mut out = w.clone();
    let mut degenerate = false;
    for mut col in out.column_iter_mut() {
        let m = col.amax();
        if m > 0.0 {
            col /= m;
        } else {
            degenerate = true;
        }
    }
    (out, degenerate)
}
