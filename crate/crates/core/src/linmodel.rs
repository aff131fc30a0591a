//! Least squares on a [`Dataset`]: OLS, Frisch–Waugh–Lovell partialling and
//! two-stage least squares.
//!
//! The regressor of interest `D` is always the first coefficient; controls `W`
//! follow in their column order with the intercept first. Fits go through a
//! Householder QR of the design; `(XᵀX)⁻¹` is rebuilt from the triangular
//! factor rather than by inverting the cross-product matrix.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance: a squared QR pivot below
/// `RANK_TOL * trace(XᵀX)` is treated as exact collinearity.
pub const RANK_TOL: f64 = 1e-12;

/// A realized sample: outcome, regressor of interest, controls and the
/// optional assignment groups and instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    d: DVector<f64>,
    w: DMatrix<f64>,
    group_ids: Option<Vec<usize>>,
    v: Option<DVector<f64>>,
}

impl Dataset {
    /// Builds a dataset and checks the shape and intercept invariants.
    pub fn new(y: DVector<f64>, d: DVector<f64>, w: DMatrix<f64>) -> Result<Self> {
        let data = Self::new_unchecked(y, d, w)?;
        if !data.has_constant() {
            return Err(Error::InvalidData(
                "first column of W must be a nonzero constant".into(),
            ));
        }
        Ok(data)
    }

    /// Shape checks only; the intercept requirement is skipped.
    ///
    /// Meant for inspecting raw designs with [`crate::diagnostics`]; estimators
    /// still run on such data but their guarantees assume an intercept.
    pub fn new_unchecked(y: DVector<f64>, d: DVector<f64>, w: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if d.len() != n || w.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, d has {}, W has {}",
                d.len(),
                w.nrows()
            )));
        }
        if w.ncols() == 0 {
            return Err(Error::InvalidData("W needs at least one column".into()));
        }
        if n < w.ncols() + 2 {
            return Err(Error::InvalidData(format!(
                "need n >= d_w + 2, got n = {n}, d_w = {}",
                w.ncols()
            )));
        }
        let finite = y.iter().chain(d.iter()).chain(w.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidData("non-finite value in y, d or W".into()));
        }
        Ok(Self {
            y,
            d,
            w,
            group_ids: None,
            v: None,
        })
    }

    /// Attaches assignment groups. Labels must be `0..n_g` with every label
    /// used, and `D` must be constant inside each group.
    pub fn with_groups(mut self, group_ids: Vec<usize>) -> Result<Self> {
        if group_ids.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "group_ids has {} entries, expected {}",
                group_ids.len(),
                self.n()
            )));
        }
        check_contiguous_labels(&group_ids)?;
        let mut first: HashMap<usize, f64> = HashMap::new();
        for (i, &g) in group_ids.iter().enumerate() {
            let di = self.d[i];
            match first.get(&g) {
                Some(&d0) if d0 != di => {
                    return Err(Error::InvalidData(format!(
                        "d varies within group {g} (row {i})"
                    )))
                }
                Some(_) => {}
                None => {
                    first.insert(g, di);
                }
            }
        }
        self.group_ids = Some(group_ids);
        Ok(self)
    }

    pub fn with_instrument(mut self, v: DVector<f64>) -> Result<Self> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "instrument has {} entries, expected {}",
                v.len(),
                self.n()
            )));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidData("non-finite value in v".into()));
        }
        self.v = Some(v);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of control columns, intercept included.
    pub fn d_w(&self) -> usize {
        self.w.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn group_ids(&self) -> Option<&[usize]> {
        self.group_ids.as_deref()
    }

    pub fn v(&self) -> Option<&DVector<f64>> {
        self.v.as_ref()
    }

    /// True when the first column of `W` is a nonzero constant.
    pub fn has_constant(&self) -> bool {
        let c = self.w.column(0);
        c[0] != 0.0 && c.iter().all(|&x| x == c[0])
    }

    /// Full design `X = (D, W)`.
    pub fn design(&self) -> DMatrix<f64> {
        let n = self.n();
        let k = 1 + self.d_w();
        DMatrix::from_fn(n, k, |i, j| if j == 0 { self.d[i] } else { self.w[(i, j - 1)] })
    }

    /// Reads a CSV with a header row. Required columns are `y` and `d`;
    /// controls are `w1..wk`; `group` and `v` are optional. When `w1` is not
    /// a nonzero constant an intercept column is prepended.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let iy = find("y").ok_or_else(|| Error::InvalidData("missing column `y`".into()))?;
        let id = find("d").ok_or_else(|| Error::InvalidData("missing column `d`".into()))?;
        let igroup = find("group");
        let iv = find("v");
        let mut wcols = Vec::new();
        for k in 1.. {
            match find(&format!("w{k}")) {
                Some(i) => wcols.push(i),
                None => break,
            }
        }
        for (i, h) in headers.iter().enumerate() {
            let known = i == iy || i == id || Some(i) == igroup || Some(i) == iv || wcols.contains(&i);
            if !known {
                return Err(Error::InvalidData(format!("unknown column `{h}`")));
            }
        }

        let mut y = Vec::new();
        let mut d = Vec::new();
        let mut w: Vec<Vec<f64>> = vec![Vec::new(); wcols.len()];
        let mut raw_groups = Vec::new();
        let mut v = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                let field = rec.get(i).unwrap_or("").trim();
                field.parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!(
                        "row {}: column `{}` is not a number: {field:?}",
                        row + 1,
                        headers[i]
                    ))
                })
            };
            y.push(num(iy)?);
            d.push(num(id)?);
            for (k, &c) in wcols.iter().enumerate() {
                w[k].push(num(c)?);
            }
            if let Some(g) = igroup {
                raw_groups.push(rec.get(g).unwrap_or("").trim().to_string());
            }
            if let Some(c) = iv {
                v.push(num(c)?);
            }
        }
        let n = y.len();
        let intercept_present = w
            .first()
            .map(|c| !c.is_empty() && c[0] != 0.0 && c.iter().all(|&x| x == c[0]))
            .unwrap_or(false);
        if !intercept_present {
            log::info!("no constant control column found; prepending an intercept");
            w.insert(0, vec![1.0; n]);
        }
        let wmat = DMatrix::from_fn(n, w.len(), |i, j| w[j][i]);
        let mut data = Dataset::new(DVector::from_vec(y), DVector::from_vec(d), wmat)?;
        if igroup.is_some() {
            data = data.with_groups(relabel(&raw_groups))?;
        }
        if iv.is_some() {
            data = data.with_instrument(DVector::from_vec(v))?;
        }
        Ok(data)
    }
}

/// Maps arbitrary labels to `0..G` in order of first appearance.
pub fn relabel<T: std::hash::Hash + Eq + Clone>(labels: &[T]) -> Vec<usize> {
    let mut map: HashMap<T, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l.clone()).or_insert(next)
        })
        .collect()
}

pub(crate) fn check_contiguous_labels(ids: &[usize]) -> Result<usize> {
    let g = ids.iter().copied().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; g];
    for &id in ids {
        seen[id] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidData(format!(
            "group labels must be contiguous; label {missing} is unused"
        )));
    }
    Ok(g)
}

/// OLS of `Y` on `X = (D, W)`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// `(β̂, γ̂)`.
    pub theta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(XᵀX)⁻¹` in `(D, W)` order.
    pub xtx_inv: DMatrix<f64>,
    /// Residual sum of squares over `n`.
    pub s2: f64,
    /// `D̆ᵀD̆` with `D̆ = M_W D`.
    pub dbreve_ss: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn beta_hat(&self) -> f64 {
        self.theta_hat[0]
    }

    pub fn gamma_hat(&self) -> DVector<f64> {
        self.theta_hat.rows(1, self.theta_hat.len() - 1).into_owned()
    }

    /// Number of estimated coefficients, `1 + d_w`.
    pub fn k(&self) -> usize {
        self.theta_hat.len()
    }

    /// Residual mean square with the `n − 1 − d_w` divisor.
    pub fn s2_dof(&self) -> f64 {
        self.s2 * self.n as f64 / (self.n - self.k()) as f64
    }
}

/// Least-squares solution of a generic design, used by all fits here.
pub(crate) struct LeastSquares {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Upper-triangular QR factor.
    pub r: DMatrix<f64>,
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let k = x.ncols();
    let trace: f64 = x.iter().map(|v| v * v).sum();
    let tolerance = RANK_TOL * trace;
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let pivot = r[(j, j)] * r[(j, j)];
        if !(pivot > tolerance) {
            return Err(Error::RankDeficient {
                column: j,
                pivot,
                tolerance,
            });
        }
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient {
            column: k - 1,
            pivot: 0.0,
            tolerance,
        })?;
    let residuals = y - x * &coef;
    Ok(LeastSquares { coef, residuals, r })
}

/// `R⁻¹R⁻ᵀ` for an upper-triangular `R`.
fn inverse_gram(r: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.nrows();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("pivots were checked nonzero");
    &r_inv * r_inv.transpose()
}

/// Fits `Y = Dβ + Wγ + ε` by least squares.
pub fn fit_ols(data: &Dataset) -> Result<OlsFit> {
    let n = data.n();
    let dw = data.d_w();
    let k = 1 + dw;
    // Internal order is (W, D): the last QR pivot squared is then D̆ᵀD̆.
    let mut xp = DMatrix::zeros(n, k);
    xp.columns_mut(0, dw).copy_from(data.w());
    xp.set_column(dw, data.d());
    let ls = least_squares(&xp, data.y()).map_err(|e| match e {
        // report the offending column in (D, W) order
        Error::RankDeficient {
            column,
            pivot,
            tolerance,
        } => Error::RankDeficient {
            column: if column == dw { 0 } else { column + 1 },
            pivot,
            tolerance,
        },
        other => other,
    })?;
    let inv_p = inverse_gram(&ls.r);
    let perm = |j: usize| if j == 0 { dw } else { j - 1 };
    let xtx_inv = DMatrix::from_fn(k, k, |a, b| inv_p[(perm(a), perm(b))]);
    let theta_hat = DVector::from_fn(k, |j, _| ls.coef[perm(j)]);
    let rss = ls.residuals.norm_squared();
    let pivot = ls.r[(dw, dw)];
    Ok(OlsFit {
        theta_hat,
        residuals: ls.residuals,
        xtx_inv,
        s2: rss / n as f64,
        dbreve_ss: pivot * pivot,
        n,
    })
}

/// `D̆ = M_W D`, the part of `D` orthogonal to the controls.
pub fn residualize_fwl(data: &Dataset) -> Result<DVector<f64>> {
    Ok(least_squares(data.w(), data.d())?.residuals)
}

/// First stage `D = Vρ + Wα + η`.
#[derive(Debug, Clone)]
pub struct FirstStage {
    pub rho_hat: f64,
    pub alpha_hat: DVector<f64>,
    pub eta_residuals: DVector<f64>,
}

pub fn fit_first_stage(data: &Dataset) -> Result<FirstStage> {
    let v = data.v().ok_or(Error::MissingInstrument)?;
    let n = data.n();
    let dw = data.d_w();
    let mut x = DMatrix::zeros(n, 1 + dw);
    x.set_column(0, v);
    x.columns_mut(1, dw).copy_from(data.w());
    let ls = least_squares(&x, data.d())?;
    Ok(FirstStage {
        rho_hat: ls.coef[0],
        alpha_hat: ls.coef.rows(1, dw).into_owned(),
        eta_residuals: ls.residuals,
    })
}

/// Just-identified 2SLS with one instrument.
#[derive(Debug, Clone)]
pub struct TslsFit {
    pub beta_2sls: f64,
    pub gamma_2sls: DVector<f64>,
    /// First-stage coefficient on `V`.
    pub rho_hat: f64,
    /// `n⁻¹ṼᵀṼ` with `Ṽ` the demeaned instrument.
    pub sigma2_v_hat: f64,
    /// Second-stage residual mean square, divisor `n`.
    pub s2: f64,
    pub residuals: DVector<f64>,
    pub n: usize,
}

/// `β̂ = Dᵀ(M_W − M_{V,W})Y / Dᵀ(M_W − M_{V,W})D`.
///
/// `M_W − M_{V,W}` is the projection onto `M_W V`, so the ratio is evaluated
/// as `(M_W V)ᵀY / (M_W V)ᵀD`.
pub fn fit_2sls(data: &Dataset) -> Result<TslsFit> {
    let v = data.v().ok_or(Error::MissingInstrument)?;
    let n = data.n();
    let nf = n as f64;
    let v_tilde = least_squares(data.w(), v)?.residuals;
    let vv = v_tilde.norm_squared();
    let vd = v_tilde.dot(data.d());
    let rho_hat = if vv > 0.0 { vd / vv } else { 0.0 };

    let sd = |x: &DVector<f64>| {
        let m = x.mean();
        (x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / nf).sqrt()
    };
    let sigma2_v_hat = sd(v).powi(2);
    let relevance = rho_hat.abs() * sigma2_v_hat.sqrt();
    let threshold = 1e-8 * sd(data.d());
    if !(relevance > threshold) || vd == 0.0 {
        return Err(Error::WeakInstrument {
            relevance,
            threshold,
        });
    }
    let beta_2sls = v_tilde.dot(data.y()) / vd;
    let second = least_squares(data.w(), &(data.y() - data.d() * beta_2sls))?;
    let s2 = second.residuals.norm_squared() / nf;
    Ok(TslsFit {
        beta_2sls,
        gamma_2sls: second.coef,
        rho_hat,
        sigma2_v_hat,
        s2,
        residuals: second.residuals,
        n,
    })
}
