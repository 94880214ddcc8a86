//! Random fields `u(t, x, omega)` with analytic path-derivative suites.
//!
//! The workhorse family is Markovian: `u(t, x, omega) = phi(t, x, B_t(omega))`
//! with all partials of `phi` supplied analytically, which makes the suite
//! exact (the path derivative is not identifiable from a single discretized
//! path, so estimating it is off the table). Spatial dimension is one;
//! the driving path may be multidimensional.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{PathwiseError, Result};
use crate::paths::SamplePath;

/// Pointwise path-derivative data of a field at `(t, x, omega)`.
///
/// `dt` is the path-time derivative (the semimartingale drift minus half the
/// trace of `dww`), `dw`/`dww` the first and second path derivatives, and
/// `dx`/`dxx`/`dxw` the spatial and mixed blocks. For Markovian fields the
/// mixed derivatives commute: `dxw` equals the x-gradient of `dw`.
#[derive(Debug, Clone)]
pub struct DerivativeSuite {
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dw: DVector<f64>,
    pub dxw: DVector<f64>,
    pub dww: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Markovian,
    Sampled,
    Composite,
}

pub type EvalFn = dyn Fn(f64, f64, &SamplePath) -> Result<f64> + Send + Sync;
pub type SuiteFn = dyn Fn(f64, f64, &SamplePath) -> Result<DerivativeSuite> + Send + Sync;

/// A random field: an evaluator plus an optional analytic derivative suite.
/// Evaluators are pure and safe for concurrent use.
#[derive(Clone)]
pub struct RandomField {
    kind: FieldKind,
    eval: Arc<EvalFn>,
    suite: Option<Arc<SuiteFn>>,
}

impl RandomField {
    pub fn new(kind: FieldKind, eval: Arc<EvalFn>, suite: Option<Arc<SuiteFn>>) -> Self {
        RandomField { kind, eval, suite }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn has_suite(&self) -> bool {
        self.suite.is_some()
    }

    pub fn evaluator(&self) -> Arc<EvalFn> {
        Arc::clone(&self.eval)
    }

    pub fn suite_fn(&self) -> Option<Arc<SuiteFn>> {
        self.suite.as_ref().map(Arc::clone)
    }

    /// Evaluate `u(t, x, omega)`; `t` must be a grid time within the horizon.
    pub fn evaluate(&self, t: f64, x: f64, path: &SamplePath) -> Result<f64> {
        if t < 0.0 || t > path.horizon() {
            return Err(PathwiseError::Parameter(format!(
                "time {t} outside path horizon {}",
                path.horizon()
            )));
        }
        (self.eval)(t, x, path)
    }

    /// Evaluate the analytic derivative suite; a contract error if absent.
    pub fn suite(&self, t: f64, x: f64, path: &SamplePath) -> Result<DerivativeSuite> {
        let f = self
            .suite
            .as_ref()
            .ok_or_else(|| PathwiseError::Contract("field has no derivative suite".into()))?;
        f(t, x, path)
    }
}

type Scalar3 = dyn Fn(f64, f64, &DVector<f64>) -> f64 + Send + Sync;
type Vector3 = dyn Fn(f64, f64, &DVector<f64>) -> DVector<f64> + Send + Sync;
type Matrix3 = dyn Fn(f64, f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// The smooth function `phi(t, x, b)` with all partials needed for the
/// Markovian suite. Any `None` partial is a construction error.
pub struct MarkovParts {
    pub phi: Arc<Scalar3>,
    pub dt: Option<Arc<Scalar3>>,
    pub dx: Option<Arc<Scalar3>>,
    pub dxx: Option<Arc<Scalar3>>,
    pub db: Option<Arc<Vector3>>,
    pub dxb: Option<Arc<Vector3>>,
    pub dbb: Option<Arc<Matrix3>>,
}

/// Build the Markovian field `u(t, x, omega) = phi(t, x, B_t(omega))`.
///
/// Path derivatives: `dw = d_b phi`, `dww = d^2_bb phi`, and `dt = d_t phi`
/// (the semimartingale drift is `d_t phi + tr(d^2_bb phi) / 2`, of which the
/// path-time derivative subtracts the trace term back off).
pub fn markov_field(parts: MarkovParts) -> Result<RandomField> {
    let missing = |name: &str| PathwiseError::Contract(format!("markov_field: missing partial {name}"));
    let dt = parts.dt.ok_or_else(|| missing("dt"))?;
    let dx = parts.dx.ok_or_else(|| missing("dx"))?;
    let dxx = parts.dxx.ok_or_else(|| missing("dxx"))?;
    let db = parts.db.ok_or_else(|| missing("db"))?;
    let dxb = parts.dxb.ok_or_else(|| missing("dxb"))?;
    let dbb = parts.dbb.ok_or_else(|| missing("dbb"))?;
    let phi = parts.phi;

    let eval_phi = Arc::clone(&phi);
    let eval: Arc<EvalFn> = Arc::new(move |t, x, path: &SamplePath| {
        let b = path.value_at(t)?;
        Ok(eval_phi(t, x, &b))
    });
    let suite: Arc<SuiteFn> = Arc::new(move |t, x, path: &SamplePath| {
        let b = path.value_at(t)?;
        Ok(DerivativeSuite {
            value: phi(t, x, &b),
            dt: dt(t, x, &b),
            dx: dx(t, x, &b),
            dxx: dxx(t, x, &b),
            dw: db(t, x, &b),
            dxw: dxb(t, x, &b),
            dww: dbb(t, x, &b),
        })
    });
    Ok(RandomField::new(FieldKind::Markovian, eval, Some(suite)))
}

/// Scalar-noise shorthand for [`markov_field`]: `phi(t, x, b)` with all six
/// partials, `d = 1`.
#[allow(clippy::too_many_arguments)]
pub fn markov_field_scalar(
    phi: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    dt: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    dx: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    dxx: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    db: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    dxb: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    dbb: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
) -> RandomField {
    let s = |f: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>| -> Arc<Scalar3> {
        Arc::new(move |t, x, b: &DVector<f64>| f(t, x, b[0]))
    };
    let parts = MarkovParts {
        phi: s(Box::new(phi)),
        dt: Some(s(Box::new(dt))),
        dx: Some(s(Box::new(dx))),
        dxx: Some(s(Box::new(dxx))),
        db: Some({
            let f = Box::new(db);
            Arc::new(move |t, x, b: &DVector<f64>| DVector::from_element(1, f(t, x, b[0])))
        }),
        dxb: Some({
            let f = Box::new(dxb);
            Arc::new(move |t, x, b: &DVector<f64>| DVector::from_element(1, f(t, x, b[0])))
        }),
        dbb: Some({
            let f = Box::new(dbb);
            Arc::new(move |t, x, b: &DVector<f64>| DMatrix::from_element(1, 1, f(t, x, b[0])))
        }),
    };
    markov_field(parts).expect("all partials supplied")
}

/// Max residual over grid nodes `t_k <= t_max` of the functional Ito
/// reconstruction `u(t, x) - u(0, x) - int dt_u ds - int dw_u o dB`
/// (trapezoidal drift quadrature, trapezoidal Stratonovich sum).
pub fn verify_functional_ito(
    field: &RandomField,
    path: &SamplePath,
    x: f64,
    t_max: f64,
) -> Result<f64> {
    let k_max = path.grid_index(t_max)?;
    let d = path.dim();
    let dt = path.dt();
    // Tabulate the suite along the path once.
    let mut drift = Vec::with_capacity(k_max + 1);
    let mut dw = vec![Vec::with_capacity(k_max + 1); d];
    let mut u = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let s = field.suite(path.time(k), x, path)?;
        drift.push(s.dt);
        for c in 0..d {
            dw[c].push(s.dw[c]);
        }
        u.push(s.value);
    }
    let mut max_residual: f64 = 0.0;
    let mut drift_acc = 0.0;
    let mut strat_acc = 0.0;
    for k in 1..=k_max {
        drift_acc += 0.5 * (drift[k - 1] + drift[k]) * dt;
        for c in 0..d {
            strat_acc += 0.5 * (dw[c][k - 1] + dw[c][k]) * path.increment(k - 1)[c];
        }
        let residual = (u[k] - u[0] - drift_acc - strat_acc).abs();
        max_residual = max_residual.max(residual);
    }
    Ok(max_residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    Linear,
}

/// A field tabulated on a rectangular `(t, x)` grid, e.g. solver output.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// Row-major `[t][x]`.
    pub values: Vec<f64>,
    pub interp: Interpolation,
}

impl SampledField {
    pub fn new(
        t_grid: Vec<f64>,
        x_grid: Vec<f64>,
        values: Vec<f64>,
        interp: Interpolation,
    ) -> Result<Self> {
        if t_grid.len() * x_grid.len() != values.len() || t_grid.is_empty() || x_grid.is_empty() {
            return Err(PathwiseError::Parameter("sample grid must be rectangular and nonempty".into()));
        }
        Ok(SampledField { t_grid, x_grid, values, interp })
    }

    pub fn value(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.x_grid.len() + ix]
    }

    fn locate(grid: &[f64], q: f64) -> Result<(usize, f64)> {
        let lo = grid[0];
        let hi = grid[grid.len() - 1];
        if q < lo - 1e-12 || q > hi + 1e-12 {
            return Err(PathwiseError::Parameter(format!(
                "query {q} outside sample box [{lo}, {hi}]"
            )));
        }
        let q = q.clamp(lo, hi);
        let i = grid.partition_point(|&g| g <= q).saturating_sub(1).min(grid.len() - 2);
        let span = grid[i + 1] - grid[i];
        let w = if span > 0.0 { (q - grid[i]) / span } else { 0.0 };
        Ok((i, w))
    }

    pub fn interpolate(&self, t: f64, x: f64) -> Result<f64> {
        if self.t_grid.len() == 1 {
            let (ix, wx) = Self::locate(&self.x_grid, x)?;
            return Ok(self.blend_row(0, ix, wx));
        }
        let (it, wt) = Self::locate(&self.t_grid, t)?;
        let (ix, wx) = Self::locate(&self.x_grid, x)?;
        match self.interp {
            Interpolation::Nearest => {
                let it = if wt < 0.5 { it } else { it + 1 };
                let ix = if wx < 0.5 { ix } else { ix + 1 };
                Ok(self.value(it, ix))
            }
            Interpolation::Linear => {
                let lo = self.blend_row(it, ix, wx);
                let hi = self.blend_row(it + 1, ix, wx);
                Ok((1.0 - wt) * lo + wt * hi)
            }
        }
    }

    fn blend_row(&self, it: usize, ix: usize, wx: f64) -> f64 {
        match self.interp {
            Interpolation::Nearest => {
                let ix = if wx < 0.5 { ix } else { ix + 1 };
                self.value(it, ix)
            }
            Interpolation::Linear => {
                if self.x_grid.len() == 1 {
                    self.value(it, 0)
                } else {
                    (1.0 - wx) * self.value(it, ix) + wx * self.value(it, ix + 1)
                }
            }
        }
    }

    /// CSV interchange: columns `t,x,value`, one row per sample.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,value")?;
        for (it, t) in self.t_grid.iter().enumerate() {
            for (ix, x) in self.x_grid.iter().enumerate() {
                writeln!(w, "{},{},{}", t, x, self.value(it, ix))?;
            }
        }
        Ok(())
    }

    /// Read the `t,x,value` CSV back (rows in the written order).
    pub fn read_csv<R: std::io::BufRead>(r: R, interp: Interpolation) -> Result<SampledField> {
        let mut t_grid: Vec<f64> = Vec::new();
        let mut x_grid: Vec<f64> = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "t,x,value" {
                    return Err(PathwiseError::Parameter("expected header t,x,value".into()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(PathwiseError::Parameter(format!("bad CSV row {lineno}")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| PathwiseError::Parameter(format!("bad number on row {lineno}")))
            };
            let (t, x, v) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if t_grid.last() != Some(&t) {
                t_grid.push(t);
            }
            if t_grid.len() == 1 {
                x_grid.push(x);
            }
            values.push(v);
        }
        SampledField::new(t_grid, x_grid, values, interp)
    }
}

/// Wrap a sample grid as a [`RandomField`] (no derivative suite).
pub fn sampled_field(samples: SampledField) -> RandomField {
    let eval: Arc<EvalFn> = Arc::new(move |t, x, _path: &SamplePath| samples.interpolate(t, x));
    RandomField::new(FieldKind::Sampled, eval, None)
}
