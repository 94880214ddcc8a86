//! The coefficient pair `(f, g)` of the equation
//! `du = f(t, x, omega, u, Du, D^2 u) dt + g(t, x, omega, u, Du) o dB`,
//! its Ito-form drift `F`, the parabolicity check, the exponential
//! change of variable, and coefficients shifted around a reference field.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{PathwiseError, Result};
use crate::fields::{DerivativeSuite, FieldKind, RandomField, SuiteFn};
use crate::paths::SamplePath;

/// `g` and its derivative blocks at one point `(t, x, omega, y, z)`.
/// Shapes: `value, dy` are `d`-vectors; `dw` is `d x d`; `dx, dz` are `d' x d`.
#[derive(Debug, Clone)]
pub struct GSuite {
    pub value: DVector<f64>,
    pub dw: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DVector<f64>,
    pub dz: DMatrix<f64>,
}

impl GSuite {
    /// All-zero blocks (`g` absent), noise dimension `d`, spatial `dp`.
    pub fn zero(d: usize, dp: usize) -> Self {
        GSuite {
            value: DVector::zeros(d),
            dw: DMatrix::zeros(d, d),
            dx: DMatrix::zeros(dp, d),
            dy: DVector::zeros(d),
            dz: DMatrix::zeros(dp, d),
        }
    }

    fn check_dims(&self, d: usize, dp: usize) -> Result<()> {
        let ok = self.value.len() == d
            && self.dw.shape() == (d, d)
            && self.dx.shape() == (dp, d)
            && self.dy.len() == d
            && self.dz.shape() == (dp, d);
        if ok {
            Ok(())
        } else {
            Err(PathwiseError::Contract("GSuite block dimensions inconsistent".into()))
        }
    }
}

pub type FEvalFn =
    dyn Fn(f64, &DVector<f64>, &SamplePath, f64, &DVector<f64>, &DMatrix<f64>) -> f64 + Send + Sync;
pub type FGammaFn = dyn Fn(f64, &DVector<f64>, &SamplePath, f64, &DVector<f64>, &DMatrix<f64>) -> DMatrix<f64>
    + Send
    + Sync;
pub type GFn = dyn Fn(f64, &DVector<f64>, &SamplePath, f64, &DVector<f64>) -> GSuite + Send + Sync;

/// `f` with its gamma-gradient `[d f / d gamma_ij]`.
#[derive(Clone)]
pub struct FCoeff {
    pub eval: Arc<FEvalFn>,
    pub dgamma: Arc<FGammaFn>,
}

/// The full pair: `f`, the `g`-suite map, and the dimensions `(d, d')`.
#[derive(Clone)]
pub struct CoefficientSuite {
    pub f: FCoeff,
    pub g: Arc<GFn>,
    pub d: usize,
    pub dprime: usize,
}

impl CoefficientSuite {
    pub fn g_suite(
        &self,
        t: f64,
        x: &DVector<f64>,
        path: &SamplePath,
        y: f64,
        z: &DVector<f64>,
    ) -> Result<GSuite> {
        let gs = (self.g)(t, x, path, y, z);
        gs.check_dims(self.d, self.dprime)?;
        Ok(gs)
    }

    pub fn f_eval(
        &self,
        t: f64,
        x: &DVector<f64>,
        path: &SamplePath,
        y: f64,
        z: &DVector<f64>,
        gamma: &DMatrix<f64>,
    ) -> f64 {
        (self.f.eval)(t, x, path, y, z, gamma)
    }
}

/// One evaluation point for lattice scans.
#[derive(Debug, Clone)]
pub struct LatticePoint {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: f64,
    pub z: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

/// The Ito-form drift
/// `F = f + tr[dw g + g dy^T + (dx g + z dy^T + gamma dz)^T dz] / 2`.
/// Reduces to `f` when `g` vanishes identically.
pub fn ito_drift(
    suite: &CoefficientSuite,
    t: f64,
    x: &DVector<f64>,
    path: &SamplePath,
    y: f64,
    z: &DVector<f64>,
    gamma: &DMatrix<f64>,
) -> Result<f64> {
    let (d, dp) = (suite.d, suite.dprime);
    if x.len() != dp || z.len() != dp || gamma.shape() != (dp, dp) {
        return Err(PathwiseError::Contract("ito_drift: argument dimensions inconsistent".into()));
    }
    let gs = suite.g_suite(t, x, path, y, z)?;
    let _ = d;
    let f = suite.f_eval(t, x, path, y, z, gamma);
    let inner = &gs.dw + &gs.value * gs.dy.transpose()
        + (&gs.dx + z * gs.dy.transpose() + gamma * &gs.dz).transpose() * &gs.dz;
    Ok(f + 0.5 * inner.trace())
}

fn fd_dgamma_of_drift(
    suite: &CoefficientSuite,
    p: &LatticePoint,
    path: &SamplePath,
    step: f64,
) -> Result<DMatrix<f64>> {
    let dp = suite.dprime;
    let mut out = DMatrix::zeros(dp, dp);
    for i in 0..dp {
        for j in 0..dp {
            // Symmetric perturbation whose directional derivative matches the
            // (i, j) entry of the gradient when that gradient is symmetric.
            let w = if i == j { 1.0 } else { 0.5 };
            let mut up = p.gamma.clone();
            let mut dn = p.gamma.clone();
            up[(i, j)] += step * w;
            dn[(i, j)] -= step * w;
            if i != j {
                up[(j, i)] += step * w;
                dn[(j, i)] -= step * w;
            }
            let fu = ito_drift(suite, p.t, &p.x, path, p.y, &p.z, &up)?;
            let fd = ito_drift(suite, p.t, &p.x, path, p.y, &p.z, &dn)?;
            out[(i, j)] = (fu - fd) / (2.0 * step);
        }
    }
    Ok(out)
}

/// Minimum over the lattice of the smallest eigenvalue of `d f / d gamma`.
///
/// Two routes are compared at every point: the supplied gradient directly, and
/// `d F / d gamma - dz dz^T / 2` by central differences (step 1e-5). A
/// disagreement beyond 1e-8 is a contract error. A negative return flags a
/// non-parabolic operator; the caller decides whether that is fatal.
pub fn parabolicity_check(
    suite: &CoefficientSuite,
    lattice: &[LatticePoint],
    path: &SamplePath,
) -> Result<f64> {
    if lattice.is_empty() {
        return Err(PathwiseError::Parameter("parabolicity_check: empty lattice".into()));
    }
    let step = 1e-5;
    let mut min_eig = f64::INFINITY;
    for p in lattice {
        let direct = (suite.f.dgamma)(p.t, &p.x, path, p.y, &p.z, &p.gamma);
        let gs = suite.g_suite(p.t, &p.x, path, p.y, &p.z)?;
        let via_drift = fd_dgamma_of_drift(suite, p, path, step)? - 0.5 * &gs.dz * gs.dz.transpose();
        let gap = (&direct - &via_drift).abs().max();
        if gap > 1e-8 {
            return Err(PathwiseError::Contract(format!(
                "parabolicity_check: gamma-gradient routes disagree by {gap:.3e}"
            )));
        }
        let sym = 0.5 * (&direct + direct.transpose());
        let eigs = sym.symmetric_eigenvalues();
        min_eig = min_eig.min(eigs.min());
    }
    Ok(min_eig)
}

pub type LambdaFn = dyn Fn(f64) -> f64 + Send + Sync;

/// `eta(t) = int_0^t lambda ds`, trapezoidal on the path grid.
pub fn eta_at(lambda: &Arc<LambdaFn>, path: &SamplePath, t: f64) -> Result<f64> {
    let k = path.grid_index(t)?;
    let dt = path.dt();
    let mut acc = 0.0;
    for j in 1..=k {
        acc += 0.5 * (lambda(path.time(j - 1)) + lambda(path.time(j))) * dt;
    }
    Ok(acc)
}

/// Exponential change of variable `u -> e^{eta} u`:
/// `f~(t,x,y,z,gamma) = lambda(t) y + e^eta f(t, x, e^-eta y, e^-eta z, e^-eta gamma)`,
/// and for `g` the value and omega/x blocks scale by `e^eta` while the
/// `y`/`z` blocks are unchanged.
pub fn change_of_variable(suite: &CoefficientSuite, lambda: Arc<LambdaFn>) -> CoefficientSuite {
    let (d, dp) = (suite.d, suite.dprime);
    let f_inner = suite.f.clone();
    let lam_f = Arc::clone(&lambda);
    let eval: Arc<FEvalFn> = Arc::new(
        move |t, x, path: &SamplePath, y, z, gamma: &DMatrix<f64>| {
            let eta = eta_at(&lam_f, path, t).unwrap_or(0.0);
            let e = eta.exp();
            let ei = (-eta).exp();
            lam_f(t) * y + e * (f_inner.eval)(t, x, path, ei * y, &(ei * z), &(ei * gamma))
        },
    );
    let f_inner2 = suite.f.clone();
    let lam_g = Arc::clone(&lambda);
    let dgamma: Arc<FGammaFn> = Arc::new(
        move |t, x, path: &SamplePath, y, z, gamma: &DMatrix<f64>| {
            let eta = eta_at(&lam_g, path, t).unwrap_or(0.0);
            let ei = (-eta).exp();
            (f_inner2.dgamma)(t, x, path, ei * y, &(ei * z), &(ei * gamma))
        },
    );
    let g_inner = Arc::clone(&suite.g);
    let lam = Arc::clone(&lambda);
    let g: Arc<GFn> = Arc::new(move |t, x, path: &SamplePath, y, z| {
        let eta = eta_at(&lam, path, t).unwrap_or(0.0);
        let e = eta.exp();
        let ei = (-eta).exp();
        let gs = g_inner(t, x, path, ei * y, &(ei * z));
        GSuite {
            value: e * gs.value,
            dw: e * gs.dw,
            dx: e * gs.dx,
            dy: gs.dy,
            dz: gs.dz,
        }
    });
    CoefficientSuite { f: FCoeff { eval, dgamma }, g, d, dprime: dp }
}

/// Transform a field by the same change of variable: `u~ = e^{eta_t} u`, with
/// `dt u~ = lambda u~ + e^eta dt u`, `dw u~ = e^eta dw u`, and the spatial
/// blocks scaled by `e^eta`.
pub fn transform_field(u: &RandomField, lambda: Arc<LambdaFn>) -> Result<RandomField> {
    let suite = u
        .suite_fn()
        .ok_or_else(|| PathwiseError::Contract("transform_field: field has no suite".into()))?;
    let eval_suite = Arc::clone(&suite);
    let lam_e = Arc::clone(&lambda);
    let eval_inner = u.evaluator();
    let eval: Arc<crate::fields::EvalFn> = Arc::new(move |t, x, path: &SamplePath| {
        let eta = eta_at(&lam_e, path, t)?;
        Ok(eta.exp() * eval_inner(t, x, path)?)
    });
    let lam = Arc::clone(&lambda);
    let new_suite: Arc<SuiteFn> = Arc::new(move |t, x, path: &SamplePath| {
        let s = eval_suite(t, x, path)?;
        let eta = eta_at(&lam, path, t)?;
        let e = eta.exp();
        Ok(DerivativeSuite {
            value: e * s.value,
            dt: lam(t) * e * s.value + e * s.dt,
            dx: e * s.dx,
            dxx: e * s.dxx,
            dw: e * s.dw,
            dxw: e * s.dxw,
            dww: e * s.dww,
        })
    });
    Ok(RandomField::new(FieldKind::Composite, eval, Some(new_suite)))
}

/// Coefficients shifted around a reference field `v` (spatial dimension one):
/// `f^v(t,x,y,z,gamma) = f(t,x, v+y, v_x+z, v_xx+gamma) - f(t,x, v, v_x, v_xx)`,
/// likewise `g^v`; both vanish identically at `(y,z,gamma) = 0`. The omega- and
/// x-derivative blocks of `g^v` pick up chain terms through `v`.
pub fn shifted_coefficients(suite: &CoefficientSuite, v: &RandomField) -> Result<CoefficientSuite> {
    if suite.dprime != 1 {
        return Err(PathwiseError::Contract("shifted_coefficients requires d' = 1".into()));
    }
    let vsuite = v
        .suite_fn()
        .ok_or_else(|| PathwiseError::Contract("shifted_coefficients: v has no suite".into()))?;
    let (d, dp) = (suite.d, suite.dprime);

    let f_inner = suite.f.clone();
    let vs = Arc::clone(&vsuite);
    let eval: Arc<FEvalFn> = Arc::new(
        move |t, x: &DVector<f64>, path: &SamplePath, y, z: &DVector<f64>, gamma: &DMatrix<f64>| {
            let s = match vs(t, x[0], path) {
                Ok(s) => s,
                Err(_) => return f64::NAN,
            };
            let vz = DVector::from_element(1, s.dx);
            let vg = DMatrix::from_element(1, 1, s.dxx);
            (f_inner.eval)(t, x, path, s.value + y, &(&vz + z), &(&vg + gamma))
                - (f_inner.eval)(t, x, path, s.value, &vz, &vg)
        },
    );
    let f_inner2 = suite.f.clone();
    let vs2 = Arc::clone(&vsuite);
    let dgamma: Arc<FGammaFn> = Arc::new(
        move |t, x: &DVector<f64>, path: &SamplePath, y, z: &DVector<f64>, gamma: &DMatrix<f64>| {
            match vs2(t, x[0], path) {
                Ok(s) => {
                    let vz = DVector::from_element(1, s.dx);
                    let vg = DMatrix::from_element(1, 1, s.dxx);
                    (f_inner2.dgamma)(t, x, path, s.value + y, &(&vz + z), &(&vg + gamma))
                }
                Err(_) => DMatrix::from_element(1, 1, f64::NAN),
            }
        },
    );

    let g_inner = Arc::clone(&suite.g);
    let vs3 = Arc::clone(&vsuite);
    let g: Arc<GFn> = Arc::new(move |t, x: &DVector<f64>, path: &SamplePath, y, z: &DVector<f64>| {
        let s = match vs3(t, x[0], path) {
            Ok(s) => s,
            Err(_) => return GSuite::zero(0, 0), // dims reject downstream
        };
        let vz = DVector::from_element(1, s.dx);
        let shifted = g_inner(t, x, path, s.value + y, &(&vz + z));
        let base = g_inner(t, x, path, s.value, &vz);
        // Chain rule through v(t, x, omega) and v_x(t, x, omega) for the
        // omega and x blocks; the (y, z) blocks are plain shifts.
        let dw = &shifted.dw
            + &shifted.dy * s.dw.transpose()
            + shifted.dz.row(0).transpose() * s.dxw.transpose()
            - (&base.dw + &base.dy * s.dw.transpose() + base.dz.row(0).transpose() * s.dxw.transpose());
        let chain_x = |gs: &GSuite| -> DMatrix<f64> {
            let mut m = gs.dx.clone();
            for j in 0..m.ncols() {
                m[(0, j)] += s.dx * gs.dy[j] + s.dxx * gs.dz[(0, j)];
            }
            m
        };
        let dx = chain_x(&shifted) - chain_x(&base);
        GSuite {
            value: &shifted.value - &base.value,
            dw,
            dx,
            dy: shifted.dy,
            dz: shifted.dz,
        }
    });
    Ok(CoefficientSuite { f: FCoeff { eval, dgamma }, g, d, dprime: dp })
}

/// Derivative blocks for a black-box `g(t, x, y, z)` with no direct path
/// dependence: central differences at step 1e-5 for the `x`, `y`, `z` blocks,
/// zero omega block.
pub fn black_box_g(
    value: Arc<dyn Fn(f64, &DVector<f64>, f64, &DVector<f64>) -> DVector<f64> + Send + Sync>,
    d: usize,
    dp: usize,
) -> Arc<GFn> {
    let h = 1e-5;
    Arc::new(move |t, x: &DVector<f64>, _path: &SamplePath, y, z: &DVector<f64>| {
        let dy = (value(t, x, y + h, z) - value(t, x, y - h, z)) / (2.0 * h);
        let mut dx = DMatrix::zeros(dp, d);
        let mut dz = DMatrix::zeros(dp, d);
        for i in 0..dp {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            dx.set_row(i, &((value(t, &xp, y, z) - value(t, &xm, y, z)) / (2.0 * h)).transpose());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            dz.set_row(i, &((value(t, x, y, &zp) - value(t, x, y, &zm)) / (2.0 * h)).transpose());
        }
        GSuite { value: value(t, x, y, z), dw: DMatrix::zeros(d, d), dx, dy, dz }
    })
}
