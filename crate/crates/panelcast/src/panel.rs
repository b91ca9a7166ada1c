//! Balanced panel container, forecast targets and per-unit moments.
//!
//! Storage is unit-major: all `T` observations of unit `i` are contiguous in
//! `y`, and `x` holds `T * k` values per unit in period-major order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n_units: usize,
    n_periods: usize,
    k: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    unit_labels: Option<Vec<String>>,
    period_labels: Option<Vec<String>>,
}

impl PanelDataset {
    /// Builds a panel from unit-major buffers. Only shapes are checked here;
    /// call [`PanelDataset::validate`] for the full set of invariants.
    pub fn new(n_units: usize, n_periods: usize, k: usize, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if n_units == 0 || n_periods == 0 {
            return Err(Error::Shape("panel needs at least one unit and one period".into()));
        }
        if y.len() != n_units * n_periods {
            return Err(Error::Shape(format!(
                "y has {} values, expected N*T = {}",
                y.len(),
                n_units * n_periods
            )));
        }
        if x.len() != n_units * n_periods * k {
            return Err(Error::Shape(format!(
                "x has {} values, expected N*T*k = {}",
                x.len(),
                n_units * n_periods * k
            )));
        }
        Ok(Self {
            n_units,
            n_periods,
            k,
            y,
            x,
            unit_labels: None,
            period_labels: None,
        })
    }

    /// Builds a panel from per-unit closures `y(i, t)` and `x(i, t, j)`.
    pub fn from_fn(
        n_units: usize,
        n_periods: usize,
        k: usize,
        mut y: impl FnMut(usize, usize) -> f64,
        mut x: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut yv = Vec::with_capacity(n_units * n_periods);
        let mut xv = Vec::with_capacity(n_units * n_periods * k);
        for i in 0..n_units {
            for t in 0..n_periods {
                yv.push(y(i, t));
                for j in 0..k {
                    xv.push(x(i, t, j));
                }
            }
        }
        Self::new(n_units, n_periods, k, yv, xv)
    }

    pub fn with_labels(mut self, units: Option<Vec<String>>, periods: Option<Vec<String>>) -> Result<Self> {
        if let Some(u) = &units {
            if u.len() != self.n_units {
                return Err(Error::Shape("unit label count differs from N".into()));
            }
        }
        if let Some(p) = &periods {
            if p.len() != self.n_periods {
                return Err(Error::Shape("period label count differs from T".into()));
            }
        }
        self.unit_labels = units;
        self.period_labels = periods;
        Ok(self)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    /// Number of regressors excluding the intercept.
    pub fn k_regressors(&self) -> usize {
        self.k
    }

    /// Number of coefficients including the intercept.
    pub fn n_coef(&self) -> usize {
        self.k + 1
    }

    pub fn unit_labels(&self) -> Option<&[String]> {
        self.unit_labels.as_deref()
    }

    pub fn period_labels(&self) -> Option<&[String]> {
        self.period_labels.as_deref()
    }

    pub fn unit_label(&self, i: usize) -> String {
        match &self.unit_labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn y_unit(&self, i: usize) -> &[f64] {
        &self.y[i * self.n_periods..(i + 1) * self.n_periods]
    }

    pub fn y_at(&self, i: usize, t: usize) -> f64 {
        self.y[i * self.n_periods + t]
    }

    pub fn x_at(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.n_periods + t) * self.k;
        &self.x[start..start + self.k]
    }

    /// `w_it = (1, x_it')'`.
    pub fn w_row(&self, i: usize, t: usize) -> DVector<f64> {
        let mut w = DVector::zeros(self.k + 1);
        w[0] = 1.0;
        for (j, v) in self.x_at(i, t).iter().enumerate() {
            w[j + 1] = *v;
        }
        w
    }

    pub fn y_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.y_unit(i))
    }

    /// `T x K` design `W_i` with a leading column of ones.
    pub fn design(&self, i: usize) -> DMatrix<f64> {
        let t = self.n_periods;
        DMatrix::from_fn(t, self.k + 1, |r, c| if c == 0 { 1.0 } else { self.x_at(i, r)[c - 1] })
    }

    /// `T x k` regressor block `X_i`.
    pub fn x_matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_periods, self.k, |r, c| self.x_at(i, r)[c])
    }

    /// Restricts the panel to periods `start..end`.
    pub fn sub_periods(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_periods {
            return Err(Error::Shape(format!("bad period range {start}..{end}")));
        }
        let out = Self::from_fn(
            self.n_units,
            end - start,
            self.k,
            |i, t| self.y_at(i, start + t),
            |i, t, j| self.x_at(i, start + t)[j],
        )?;
        let periods = self.period_labels.as_ref().map(|p| p[start..end].to_vec());
        out.with_labels(self.unit_labels.clone(), periods)
    }

    /// Keeps only the listed units, in the given order.
    pub fn select_units(&self, units: &[usize]) -> Result<Self> {
        let out = Self::from_fn(
            units.len(),
            self.n_periods,
            self.k,
            |i, t| self.y_at(units[i], t),
            |i, t, j| self.x_at(units[i], t)[j],
        )?;
        let labels = self
            .unit_labels
            .as_ref()
            .map(|l| units.iter().map(|&u| l[u].clone()).collect());
        out.with_labels(labels, self.period_labels.clone())
    }

    pub fn validate(&self) -> ValidationReport {
        validate_panel(self)
    }

    /// Returns an error describing the first failed invariant, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().into_result()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_units: usize,
    pub n_periods: usize,
    pub n_coef: usize,
    /// `(unit, period)` cells holding NaN or infinite values.
    pub non_finite: Vec<(usize, usize)>,
    pub too_few_periods: bool,
    /// Units whose `Q_iT` fails the rank tolerance.
    pub rank_failures: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.non_finite.is_empty() && !self.too_few_periods && self.rank_failures.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.too_few_periods {
            return Err(Error::TooFewPeriods {
                t: self.n_periods,
                k: self.n_coef,
            });
        }
        if let Some(&(i, t)) = self.non_finite.first() {
            return Err(Error::InvalidPanel(format!(
                "{} non-finite cells, first at unit {i}, period {t}",
                self.non_finite.len()
            )));
        }
        if let Some(&i) = self.rank_failures.first() {
            return Err(Error::Singular {
                context: "unit moment matrix",
                unit: Some(i),
            });
        }
        Ok(())
    }
}

pub fn validate_panel(data: &PanelDataset) -> ValidationReport {
    let mut non_finite = Vec::new();
    for i in 0..data.n_units {
        for t in 0..data.n_periods {
            if !data.y_at(i, t).is_finite() || data.x_at(i, t).iter().any(|v| !v.is_finite()) {
                non_finite.push((i, t));
            }
        }
    }
    let too_few_periods = data.n_periods <= data.n_coef();
    let mut rank_failures = Vec::new();
    for i in 0..data.n_units {
        if non_finite.iter().any(|&(u, _)| u == i) {
            continue;
        }
        let w = data.design(i);
        let q = w.transpose() * &w / data.n_periods as f64;
        if !linalg::is_full_rank_sym(&q) {
            rank_failures.push(i);
        }
    }
    ValidationReport {
        n_units: data.n_units,
        n_periods: data.n_periods,
        n_coef: data.n_coef(),
        non_finite,
        too_few_periods,
        rank_failures,
    }
}

/// `M_T` applied to a series: subtracts the time mean.
pub fn within_transform(series: &[f64]) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|v| v - mean).collect()
}

/// Regressor values at the forecast origin, one row `w_{i,T+1}` per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTarget {
    w_next: DMatrix<f64>,
}

impl ForecastTarget {
    /// `w_next` is `N x K` with a leading column of ones.
    pub fn new(w_next: DMatrix<f64>) -> Result<Self> {
        if w_next.ncols() == 0 {
            return Err(Error::Shape("target needs at least the intercept column".into()));
        }
        if w_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel("non-finite forecast target".into()));
        }
        if w_next.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::Shape("first target column must be all ones".into()));
        }
        Ok(Self { w_next })
    }

    /// Builds the target from `x_{i,T+1}` rows (without the intercept).
    pub fn from_regressors(x_next: &[Vec<f64>]) -> Result<Self> {
        let n = x_next.len();
        let k = x_next.first().map(|r| r.len()).unwrap_or(0);
        if x_next.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("ragged target rows".into()));
        }
        Self::new(DMatrix::from_fn(
            n,
            k + 1,
            |i, c| if c == 0 { 1.0 } else { x_next[i][c - 1] },
        ))
    }

    /// Intercept-only target for `n` units.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            w_next: DMatrix::from_element(n, 1, 1.0),
        }
    }

    pub fn n_units(&self) -> usize {
        self.w_next.nrows()
    }

    pub fn n_coef(&self) -> usize {
        self.w_next.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w_next
    }

    /// `w_{i,T+1}` as a column vector.
    pub fn w(&self, i: usize) -> DVector<f64> {
        self.w_next.row(i).transpose()
    }

    /// `x_{i,T+1}` without the intercept.
    pub fn x(&self, i: usize) -> DVector<f64> {
        self.w_next.row(i).columns(1, self.w_next.ncols() - 1).transpose()
    }

    pub fn check_against(&self, data: &PanelDataset) -> Result<()> {
        if self.n_units() != data.n_units() || self.n_coef() != data.n_coef() {
            return Err(Error::Shape(format!(
                "target is {}x{}, panel needs {}x{}",
                self.n_units(),
                self.n_coef(),
                data.n_units(),
                data.n_coef()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitMoments {
    /// `T^-1 W_i'W_i`.
    pub q_it: DMatrix<f64>,
    /// `T^-1 X_i' M_T X_i`.
    pub q_it_beta: DMatrix<f64>,
    pub xbar: DVector<f64>,
    pub ybar: f64,
}

pub fn unit_moments(data: &PanelDataset, unit: usize) -> Result<UnitMoments> {
    let tt = data.n_periods() as f64;
    let w = data.design(unit);
    let q_it = w.transpose() * &w / tt;
    if !linalg::is_full_rank_sym(&q_it) {
        return Err(Error::Singular {
            context: "unit moment matrix",
            unit: Some(unit),
        });
    }
    let x = data.x_matrix(unit);
    let k = data.k_regressors();
    let xbar = if k > 0 {
        x.row_mean().transpose()
    } else {
        DVector::zeros(0)
    };
    let mut xd = x.clone();
    for mut col in xd.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let q_it_beta = xd.transpose() * &xd / tt;
    let ybar = data.y_unit(unit).iter().sum::<f64>() / tt;
    Ok(UnitMoments {
        q_it,
        q_it_beta,
        xbar,
        ybar,
    })
}

pub fn all_unit_moments(data: &PanelDataset) -> Result<Vec<UnitMoments>> {
    (0..data.n_units()).map(|i| unit_moments(data, i)).collect()
}
