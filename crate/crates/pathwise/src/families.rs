//! Named coefficient and field families (spatial dimension one).
//!
//! Experiments refer to these by name + parameter list, both in tests and in
//! the CLI config. Everything here carries full analytic derivative suites.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{CoefficientSuite, FCoeff, GSuite};
use crate::error::{PathwiseError, Result};
use crate::fields::{markov_field_scalar, RandomField};
use crate::paths::SamplePath;

fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

pub(crate) fn scalar_fcoeff(
    eval: impl Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    dgamma: impl Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
) -> FCoeff {
    FCoeff {
        eval: Arc::new(move |t, x: &DVector<f64>, _: &SamplePath, y, z: &DVector<f64>, gm: &DMatrix<f64>| {
            eval(t, x[0], y, z[0], gm[(0, 0)])
        }),
        dgamma: Arc::new(move |t, x: &DVector<f64>, _: &SamplePath, y, z: &DVector<f64>, gm: &DMatrix<f64>| {
            m1(dgamma(t, x[0], y, z[0], gm[(0, 0)]))
        }),
    }
}

fn gsuite_scalar(value: f64, dw: f64, dx: f64, dy: f64, dz: f64) -> GSuite {
    GSuite {
        value: DVector::from_element(1, value),
        dw: m1(dw),
        dx: m1(dx),
        dy: DVector::from_element(1, dy),
        dz: m1(dz),
    }
}

/// `f = a0 gamma`, `g = sigma z`: the transported heat equation.
pub fn heat_suite(a0: f64, sigma: f64) -> CoefficientSuite {
    CoefficientSuite {
        f: scalar_fcoeff(move |_, _, _, _, g| a0 * g, move |_, _, _, _, _| a0),
        g: Arc::new(move |_, _, _: &SamplePath, _, z: &DVector<f64>| {
            gsuite_scalar(sigma * z[0], 0.0, 0.0, 0.0, sigma)
        }),
        d: 1,
        dprime: 1,
    }
}

/// `f = cy y + cz z + cg gamma`, `g = sigma z`: general linear family.
pub fn linear_suite(cy: f64, cz: f64, cg: f64, sigma: f64) -> CoefficientSuite {
    CoefficientSuite {
        f: scalar_fcoeff(
            move |_, _, y, z, g| cy * y + cz * z + cg * g,
            move |_, _, _, _, _| cg,
        ),
        g: Arc::new(move |_, _, _: &SamplePath, _, z: &DVector<f64>| {
            gsuite_scalar(sigma * z[0], 0.0, 0.0, 0.0, sigma)
        }),
        d: 1,
        dprime: 1,
    }
}

/// `f = gamma`, `g = 0`: the plain trace operator.
pub fn trace_suite() -> CoefficientSuite {
    heat_suite(1.0, 0.0)
}

/// `f = -gamma`, `g = 0`: deliberately non-parabolic.
pub fn anti_parabolic_suite() -> CoefficientSuite {
    heat_suite(-1.0, 0.0)
}

/// `f = a0 gamma`, `g = g0(t)` additive in the noise (no `(y, z)` coupling).
pub fn additive_noise_suite(a0: f64, g0: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> CoefficientSuite {
    CoefficientSuite {
        f: scalar_fcoeff(move |_, _, _, _, g| a0 * g, move |_, _, _, _, _| a0),
        g: Arc::new(move |t, _, _: &SamplePath, _, _: &DVector<f64>| {
            gsuite_scalar(g0(t), 0.0, 0.0, 0.0, 0.0)
        }),
        d: 1,
        dprime: 1,
    }
}

/// `f = a0 gamma`, `g = c0 + cy y + cz z`: affine noise coefficient.
pub fn affine_g_suite(a0: f64, c0: f64, cy: f64, cz: f64) -> CoefficientSuite {
    CoefficientSuite {
        f: scalar_fcoeff(move |_, _, _, _, g| a0 * g, move |_, _, _, _, _| a0),
        g: Arc::new(move |_, _, _: &SamplePath, y, z: &DVector<f64>| {
            gsuite_scalar(c0 + cy * y + cz * z[0], 0.0, 0.0, cy, cz)
        }),
        d: 1,
        dprime: 1,
    }
}

/// Gaussian density `N(x; center, var)` and its first three derivatives.
pub fn gaussian_density(x: f64, center: f64, var: f64) -> (f64, f64, f64, f64) {
    let xi = x - center;
    let dens = (-xi * xi / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let d1 = -xi / var * dens;
    let d2 = (xi * xi / (var * var) - 1.0 / var) * dens;
    let d3 = (3.0 * xi / (var * var) - xi * xi * xi / (var * var * var)) * dens;
    (dens, d1, d2, d3)
}

/// Static Gaussian bump: no time or path dependence.
pub fn gaussian_bump_field(center: f64, var: f64) -> RandomField {
    markov_field_scalar(
        move |_, x, _| gaussian_density(x, center, var).0,
        |_, _, _| 0.0,
        move |_, x, _| gaussian_density(x, center, var).1,
        move |_, x, _| gaussian_density(x, center, var).2,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
    )
}

/// `u(t, x) = N(x + sigma B_t; 0, v0 + 2 a0 t)`: classical solution of
/// `du = a0 u_xx dt + sigma u_x o dB`.
pub fn transported_heat_field(a0: f64, sigma: f64, v0: f64) -> RandomField {
    let var = move |t: f64| v0 + 2.0 * a0 * t;
    let at = move |t: f64, x: f64, b: f64| gaussian_density(x + sigma * b, 0.0, var(t));
    markov_field_scalar(
        move |t, x, b| at(t, x, b).0,
        // path-time derivative = psi_t = a0 psi_xx
        move |t, x, b| a0 * at(t, x, b).2,
        move |t, x, b| at(t, x, b).1,
        move |t, x, b| at(t, x, b).2,
        move |t, x, b| sigma * at(t, x, b).1,
        move |t, x, b| sigma * at(t, x, b).2,
        move |t, x, b| sigma * sigma * at(t, x, b).2,
    )
}

/// `u(t, x) = psi(x + sigma B_t)` for a Gaussian-bump profile: solves
/// `du = sigma u_x o dB` (no drift).
pub fn transported_bump_field(sigma: f64, center: f64, var: f64) -> RandomField {
    let at = move |x: f64, b: f64| gaussian_density(x + sigma * b, center, var);
    markov_field_scalar(
        move |_, x, b| at(x, b).0,
        |_, _, _| 0.0,
        move |_, x, b| at(x, b).1,
        move |_, x, b| at(x, b).2,
        move |_, x, b| sigma * at(x, b).1,
        move |_, x, b| sigma * at(x, b).2,
        move |_, x, b| sigma * sigma * at(x, b).2,
    )
}

/// Static polynomial `c0 + c1 x + c2 x^2 + c3 x^3`.
pub fn polynomial_field(c0: f64, c1: f64, c2: f64, c3: f64) -> RandomField {
    markov_field_scalar(
        move |_, x, _| c0 + c1 * x + c2 * x * x + c3 * x * x * x,
        |_, _, _| 0.0,
        move |_, x, _| c1 + 2.0 * c2 * x + 3.0 * c3 * x * x,
        move |_, x, _| 2.0 * c2 + 6.0 * c3 * x,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
    )
}

fn want(params: &[f64], n: usize, family: &str) -> Result<()> {
    if params.len() == n {
        Ok(())
    } else {
        Err(PathwiseError::Parameter(format!(
            "family {family} takes {n} parameters, got {}",
            params.len()
        )))
    }
}

/// Construct a coefficient suite by family name, as used in experiment
/// configs: `heat(a0, sigma)`, `linear(cy, cz, cg, sigma)`, `trace()`,
/// `anti-parabolic()`, `affine-g(a0, c0, cy, cz)`.
pub fn coefficient_family(name: &str, params: &[f64]) -> Result<CoefficientSuite> {
    match name {
        "heat" => {
            want(params, 2, name)?;
            Ok(heat_suite(params[0], params[1]))
        }
        "linear" => {
            want(params, 4, name)?;
            Ok(linear_suite(params[0], params[1], params[2], params[3]))
        }
        "trace" => {
            want(params, 0, name)?;
            Ok(trace_suite())
        }
        "anti-parabolic" => {
            want(params, 0, name)?;
            Ok(anti_parabolic_suite())
        }
        "affine-g" => {
            want(params, 4, name)?;
            Ok(affine_g_suite(params[0], params[1], params[2], params[3]))
        }
        _ => Err(PathwiseError::Parameter(format!("unknown coefficient family {name}"))),
    }
}

/// Construct a field by family name: `gaussian-bump(center, var)`,
/// `transported-heat(a0, sigma, v0)`, `transported-bump(sigma, center, var)`,
/// `polynomial(c0, c1, c2, c3)`.
pub fn field_family(name: &str, params: &[f64]) -> Result<RandomField> {
    match name {
        "gaussian-bump" => {
            want(params, 2, name)?;
            Ok(gaussian_bump_field(params[0], params[1]))
        }
        "transported-heat" => {
            want(params, 3, name)?;
            Ok(transported_heat_field(params[0], params[1], params[2]))
        }
        "transported-bump" => {
            want(params, 3, name)?;
            Ok(transported_bump_field(params[0], params[1], params[2]))
        }
        "polynomial" => {
            want(params, 4, name)?;
            Ok(polynomial_field(params[0], params[1], params[2], params[3]))
        }
        _ => Err(PathwiseError::Parameter(format!("unknown field family {name}"))),
    }
}
