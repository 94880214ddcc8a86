//! Explicit finite-difference reference solver on a frozen path, in both
//! Stratonovich and Ito form, plus the mollified-envelope experiment.
//!
//! The scheme is deliberately plain: central differences for the drift,
//! operator splitting with a Heun (midpoint) noise step for the Stratonovich
//! form, left-point Euler-Maruyama with the converted drift `F` for the Ito
//! form, hard CFL guard, Dirichlet boundaries frozen at the initial data.
//! Every other module validates against this oracle, so transparency beats
//! speed throughout.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{ito_drift, CoefficientSuite};
use crate::error::{PathwiseError, Result};
use crate::fields::{Interpolation, SampledField};
use crate::paths::SamplePath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Edge nodes frozen at the initial data's tail values.
    DirichletFromInitial,
    /// Edge nodes copy their interior neighbor each step.
    Clamp,
}

#[derive(Debug, Clone)]
pub struct FDGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
    pub boundary: Boundary,
}

impl FDGrid {
    pub fn new(x_lo: f64, x_hi: f64, n_x: usize) -> Result<Self> {
        if n_x < 5 || x_hi <= x_lo {
            return Err(PathwiseError::Parameter(
                "FDGrid needs n_x >= 5 and a nonempty box".into(),
            ));
        }
        Ok(FDGrid { x_lo, x_hi, n_x, boundary: Boundary::DirichletFromInitial })
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_x - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x_lo + i as f64 * self.dx()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DriftMode {
    /// Split stepping: f-step, then Heun noise step (Stratonovich).
    StratSplit,
    /// One Euler-Maruyama step with the converted drift `F`.
    ItoConverted,
    /// Euler-Maruyama with the raw `f` — the deliberate negative control.
    ItoNaive,
}

/// Estimate `max |df/dgamma|` over a small probe lattice for the CFL guard.
fn probe_dgamma_max(suite: &CoefficientSuite, grid: &FDGrid, path: &SamplePath) -> f64 {
    let mut worst: f64 = 0.0;
    let mut x = DVector::zeros(1);
    let mut z = DVector::zeros(1);
    let mut gm = DMatrix::zeros(1, 1);
    for &xi in &[grid.x_lo, 0.5 * (grid.x_lo + grid.x_hi), grid.x_hi] {
        for &yi in &[-1.0, 0.0, 1.0] {
            for &gi in &[-1.0, 0.0, 1.0] {
                x[0] = xi;
                z[0] = 0.0;
                gm[(0, 0)] = gi;
                let d = (suite.f.dgamma)(0.0, &x, path, yi, &z, &gm);
                worst = worst.max(d.abs().max());
            }
        }
    }
    worst
}

/// The stability number `max|df/dgamma| dt / dx^2` the setup guard checks
/// against 1/2.
pub fn cfl_number(suite: &CoefficientSuite, grid: &FDGrid, path: &SamplePath) -> f64 {
    probe_dgamma_max(suite, grid, path) * path.dt() / (grid.dx() * grid.dx())
}

fn check_setup(suite: &CoefficientSuite, grid: &FDGrid, path: &SamplePath) -> Result<()> {
    if suite.dprime != 1 {
        return Err(PathwiseError::Contract("refsolver requires d' = 1".into()));
    }
    if grid.n_x < 5 {
        return Err(PathwiseError::Parameter("FDGrid needs n_x >= 5".into()));
    }
    let cfl = probe_dgamma_max(suite, grid, path) * path.dt() / (grid.dx() * grid.dx());
    if cfl > 0.5 {
        return Err(PathwiseError::Stability(format!(
            "CFL bound violated: max|df/dgamma| dt/dx^2 = {cfl:.3} > 0.5"
        )));
    }
    Ok(())
}

fn solve(
    suite: &CoefficientSuite,
    u0: &dyn Fn(f64) -> f64,
    grid: &FDGrid,
    path: &SamplePath,
    mode: DriftMode,
) -> Result<SampledField> {
    check_setup(suite, grid, path)?;
    let nx = grid.n_x;
    let dx = grid.dx();
    let dt = path.dt();
    let n_steps = path.n_steps();
    let xs = grid.nodes();
    let mut u: Vec<f64> = xs.iter().map(|&x| u0(x)).collect();
    let mut values = Vec::with_capacity((n_steps + 1) * nx);
    values.extend_from_slice(&u);

    // reusable argument buffers so the per-node closure calls do not allocate
    let mut xbuf = DVector::zeros(1);
    let mut zbuf = DVector::zeros(1);
    let mut gbuf = DMatrix::zeros(1, 1);

    let mut star = vec![0.0; nx];
    let mut pred = vec![0.0; nx];
    let mut gs0 = vec![0.0; nx];

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let db = path.increment(k)[0];

        // drift step
        star.copy_from_slice(&u);
        for i in 1..nx - 1 {
            let z = (u[i + 1] - u[i - 1]) / (2.0 * dx);
            let gm = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
            xbuf[0] = xs[i];
            zbuf[0] = z;
            gbuf[(0, 0)] = gm;
            let drift = match mode {
                DriftMode::StratSplit | DriftMode::ItoNaive => {
                    (suite.f.eval)(t, &xbuf, path, u[i], &zbuf, &gbuf)
                }
                DriftMode::ItoConverted => ito_drift(suite, t, &xbuf, path, u[i], &zbuf, &gbuf)?,
            };
            star[i] = u[i] + dt * drift;
        }

        // noise step
        match mode {
            DriftMode::StratSplit => {
                // Heun midpoint realizing the Stratonovich increment
                for i in 1..nx - 1 {
                    let z = (star[i + 1] - star[i - 1]) / (2.0 * dx);
                    xbuf[0] = xs[i];
                    zbuf[0] = z;
                    let g = suite.g_suite(t, &xbuf, path, star[i], &zbuf)?;
                    gs0[i] = g.value[0];
                }
                pred.copy_from_slice(&star);
                for i in 1..nx - 1 {
                    pred[i] = star[i] + gs0[i] * db;
                }
                let t1 = (k + 1) as f64 * dt;
                for i in 1..nx - 1 {
                    let z = (pred[i + 1] - pred[i - 1]) / (2.0 * dx);
                    xbuf[0] = xs[i];
                    zbuf[0] = z;
                    let g1 = suite.g_suite(t1, &xbuf, path, pred[i], &zbuf)?;
                    u[i] = star[i] + 0.5 * (gs0[i] + g1.value[0]) * db;
                }
            }
            DriftMode::ItoConverted | DriftMode::ItoNaive => {
                // left-point evaluation on the pre-drift state
                for i in 1..nx - 1 {
                    let z = (values[k * nx + i + 1] - values[k * nx + i - 1]) / (2.0 * dx);
                    xbuf[0] = xs[i];
                    zbuf[0] = z;
                    let g = suite.g_suite(t, &xbuf, path, values[k * nx + i], &zbuf)?;
                    u[i] = star[i] + g.value[0] * db;
                }
            }
        }
        if let Boundary::Clamp = grid.boundary {
            u[0] = u[1];
            u[nx - 1] = u[nx - 2];
        }
        let worst = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !worst.is_finite() || worst > 1e10 {
            return Err(PathwiseError::Stability(format!(
                "blow-up detected at step {k} (max |u| = {worst:.3e})"
            )));
        }
        values.extend_from_slice(&u);
    }

    let t_grid = (0..=n_steps).map(|k| k as f64 * dt).collect();
    SampledField::new(t_grid, xs, values, Interpolation::Linear)
}

/// Solve `du = f dt + g o dB` by splitting with a Heun noise step.
pub fn solve_fd_stratonovich(
    suite: &CoefficientSuite,
    u0: &dyn Fn(f64) -> f64,
    grid: &FDGrid,
    path: &SamplePath,
) -> Result<SampledField> {
    solve(suite, u0, grid, path, DriftMode::StratSplit)
}

/// Solve the Ito form `du = F dt + g dB` with `F` from [`ito_drift`].
pub fn solve_fd_ito(
    suite: &CoefficientSuite,
    u0: &dyn Fn(f64) -> f64,
    grid: &FDGrid,
    path: &SamplePath,
) -> Result<SampledField> {
    solve(suite, u0, grid, path, DriftMode::ItoConverted)
}

/// Euler-Maruyama with the uncorrected drift `f` — the negative control for
/// the Ito/Stratonovich consistency experiments.
pub fn solve_fd_ito_naive(
    suite: &CoefficientSuite,
    u0: &dyn Fn(f64) -> f64,
    grid: &FDGrid,
    path: &SamplePath,
) -> Result<SampledField> {
    solve(suite, u0, grid, path, DriftMode::ItoNaive)
}

/// Max over shared nodes of `|a - b|` at the final time.
pub fn final_time_linf(a: &SampledField, b: &SampledField) -> f64 {
    let ta = a.t_grid.len() - 1;
    let tb = b.t_grid.len() - 1;
    let mut worst: f64 = 0.0;
    for (ix, &x) in a.x_grid.iter().enumerate() {
        let va = a.value(ta, ix);
        let vb = if b.x_grid.len() == a.x_grid.len() {
            b.value(tb, ix)
        } else {
            match b.interpolate(b.t_grid[tb], x) {
                Ok(v) => v,
                Err(_) => continue,
            }
        };
        worst = worst.max((va - vb).abs());
    }
    worst
}

#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub eps: Vec<f64>,
    /// Max over all nodes and times of (upper - lower), per epsilon.
    pub max_gap: Vec<f64>,
    /// Max over x of the gap at the final time, per epsilon.
    pub final_gap: Vec<f64>,
    /// Smallest value of (upper - lower); negative beyond tolerance means the
    /// comparison structure is broken.
    pub min_ordering: Vec<f64>,
    pub ordering_ok: bool,
    pub monotone: bool,
}

/// Squeeze experiment: for each `eps`, solve the upper problem
/// (`f + eps`, mollified initial data `+ eps`) and the lower problem
/// (`f - eps`, `- eps`), and report the gaps. The mollifier is a Gaussian of
/// width `eps^2`, which for Gaussian initial data just widens the variance by
/// `eps^4`.
pub fn envelope_experiment(
    suite: &CoefficientSuite,
    u0_center: f64,
    u0_var: f64,
    eps_list: &[f64],
    grid: &FDGrid,
    path: &SamplePath,
) -> Result<EnvelopeReport> {
    let mut report = EnvelopeReport {
        eps: eps_list.to_vec(),
        max_gap: Vec::new(),
        final_gap: Vec::new(),
        min_ordering: Vec::new(),
        ordering_ok: true,
        monotone: true,
    };
    for &eps in eps_list {
        let shifted = |shift: f64| {
            let mut s = suite.clone();
            let inner = suite.f.clone();
            s.f.eval = std::sync::Arc::new(
                move |t, x: &DVector<f64>, p: &SamplePath, y, z: &DVector<f64>, gm: &DMatrix<f64>| {
                    (inner.eval)(t, x, p, y, z, gm) + shift
                },
            );
            s
        };
        let var = u0_var + eps * eps * eps * eps;
        let upper_u0 =
            move |x: f64| crate::families::gaussian_density(x, u0_center, var).0 + eps;
        let lower_u0 =
            move |x: f64| crate::families::gaussian_density(x, u0_center, var).0 - eps;
        let upper = solve(&shifted(eps), &upper_u0, grid, path, DriftMode::StratSplit)?;
        let lower = solve(&shifted(-eps), &lower_u0, grid, path, DriftMode::StratSplit)?;
        let mut max_gap = f64::NEG_INFINITY;
        let mut min_ordering = f64::INFINITY;
        for (a, b) in upper.values.iter().zip(&lower.values) {
            let gap = a - b;
            max_gap = max_gap.max(gap);
            min_ordering = min_ordering.min(gap);
        }
        let tl = upper.t_grid.len() - 1;
        let mut final_gap = f64::NEG_INFINITY;
        for ix in 0..upper.x_grid.len() {
            final_gap = final_gap.max(upper.value(tl, ix) - lower.value(tl, ix));
        }
        report.ordering_ok &= min_ordering >= -1e-10;
        report.max_gap.push(max_gap);
        report.final_gap.push(final_gap);
        report.min_ordering.push(min_ordering);
    }
    for w in report.max_gap.windows(2) {
        // eps_list is decreasing, so gaps must not increase
        report.monotone &= w[1] <= w[0] + 1e-12;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{
        additive_noise_suite, gaussian_density, heat_suite, transported_heat_field,
    };
    use crate::paths::sample_path;
    use std::sync::Arc;

    fn grid(n_x: usize, half_width: f64) -> FDGrid {
        FDGrid::new(-half_width, half_width, n_x).unwrap()
    }

    #[test]
    fn setup_guards() {
        let p = sample_path(1, 1.0, 64, 0).unwrap();
        assert!(FDGrid::new(-1.0, 1.0, 4).is_err());
        assert!(FDGrid::new(1.0, -1.0, 50).is_err());
        // dt/dx^2 far too big for f = gamma / 2
        let coarse = grid(2001, 1.0);
        let s = heat_suite(0.5, 0.0);
        let err = solve_fd_stratonovich(&s, &|_| 0.0, &coarse, &p);
        assert!(matches!(err, Err(PathwiseError::Stability(_))));
    }

    #[test]
    fn heat_kernel_oracle_and_mesh_convergence() {
        let p = sample_path(1, 0.5, 1 << 12, 0).unwrap();
        let s = heat_suite(0.5, 0.0);
        let v0 = 0.5;
        let u0 = move |x: f64| gaussian_density(x, 0.0, v0).0;
        let mut errs = Vec::new();
        for n_x in [101, 201] {
            let out = solve_fd_stratonovich(&s, &u0, &grid(n_x, 6.0), &p).unwrap();
            let tl = out.t_grid.len() - 1;
            let mut worst: f64 = 0.0;
            for (ix, &x) in out.x_grid.iter().enumerate() {
                let exact = gaussian_density(x, 0.0, v0 + 0.5).0;
                worst = worst.max((out.value(tl, ix) - exact).abs());
            }
            errs.push(worst);
        }
        assert!(errs[0] <= 0.01, "coarse error {}", errs[0]);
        assert!(errs[0] / errs[1] >= 3.0, "convergence factor {}", errs[0] / errs[1]);
    }

    #[test]
    fn additive_noise_is_exact_quadrature() {
        let p = sample_path(1, 1.0, 1 << 10, 4).unwrap();
        let g0 = |t: f64| 1.0 + t * t;
        let s = additive_noise_suite(0.0, Arc::new(g0));
        let u0 = |x: f64| gaussian_density(x, 0.0, 1.0).0;
        let out = solve_fd_stratonovich(&s, &u0, &grid(101, 4.0), &p).unwrap();
        // exact: u(t, x) = u0(x) + int_0^t g0 o dB, trapezoid on the grid
        let mut integral = 0.0;
        for k in 0..p.n_steps() {
            let (t0, t1) = (p.time(k), p.time(k + 1));
            integral += 0.5 * (g0(t0) + g0(t1)) * p.increment(k)[0];
        }
        let tl = out.t_grid.len() - 1;
        let mid = out.x_grid.len() / 2;
        let expect = u0(out.x_grid[mid]) + integral;
        assert!((out.value(tl, mid) - expect).abs() <= 1e-12);
    }

    #[test]
    fn transported_heat_oracle_light() {
        let p = sample_path(1, 0.5, 1 << 10, 2).unwrap();
        let s = heat_suite(0.5, 1.0);
        let v0 = 0.5;
        let u0 = move |x: f64| gaussian_density(x, 0.0, v0).0;
        let out = solve_fd_stratonovich(&s, &u0, &grid(201, 6.0), &p).unwrap();
        let exact = transported_heat_field(0.5, 1.0, v0);
        let tl = out.t_grid.len() - 1;
        let mut worst: f64 = 0.0;
        for (ix, &x) in out.x_grid.iter().enumerate() {
            if x.abs() > 3.0 {
                continue;
            }
            let e = exact.evaluate(0.5, x, &p).unwrap();
            worst = worst.max((out.value(tl, ix) - e).abs());
        }
        assert!(worst <= 0.05, "L-inf {worst}");
    }

    #[test]
    fn ito_equals_stratonovich_bitwise_without_noise() {
        let p = sample_path(1, 0.5, 1 << 9, 1).unwrap();
        let s = heat_suite(0.5, 0.0);
        let u0 = |x: f64| gaussian_density(x, 0.0, 0.5).0;
        let g = grid(101, 5.0);
        let a = solve_fd_stratonovich(&s, &u0, &g, &p).unwrap();
        let b = solve_fd_ito(&s, &u0, &g, &p).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn ito_stratonovich_discrepancy_is_the_qv_defect() {
        // Left-point Euler-Maruyama misses the Heun scheme's (dB)^2 term, so
        // the solver gap is essentially (sigma^2/2) |sum (dB_k)^2 - t| times
        // the peak curvature of the final profile — check that prediction.
        let s = heat_suite(0.5, 1.0);
        let v0 = 0.5;
        let u0 = move |x: f64| gaussian_density(x, 0.0, v0).0;
        let g = grid(201, 6.0);
        for seed in [1, 3, 5] {
            let p = sample_path(1, 0.5, 1 << 12, seed).unwrap();
            let q: f64 = (0..p.n_steps()).map(|k| p.increment(k)[0].powi(2) - p.dt()).sum();
            let d = final_time_linf(
                &solve_fd_stratonovich(&s, &u0, &g, &p).unwrap(),
                &solve_fd_ito(&s, &u0, &g, &p).unwrap(),
            );
            assert!(d <= 0.05, "seed {seed}: discrepancy {d}");
            let peak_curvature = gaussian_density(0.0, 0.0, v0 + 2.0 * 0.5 * 0.5).0 / 1.0;
            let predicted = 0.5 * q.abs() * peak_curvature;
            let ratio = d / predicted;
            assert!((0.3..=3.0).contains(&ratio), "seed {seed}: d {d} vs predicted {predicted}");
        }
    }

    #[test]
    fn naive_conversion_negative_control() {
        // Dropping the drift correction turns diffusion-plus-transport into
        // pure transport; with a sharp bump the mismatch is order one.
        let s = heat_suite(0.5, 1.0);
        let v0 = 0.04;
        let u0 = move |x: f64| gaussian_density(x, 0.0, v0).0;
        let g = grid(401, 4.0);
        let p = sample_path(1, 0.5, 1 << 12, 3).unwrap();
        let good = final_time_linf(
            &solve_fd_stratonovich(&s, &u0, &g, &p).unwrap(),
            &solve_fd_ito(&s, &u0, &g, &p).unwrap(),
        );
        let bad = final_time_linf(
            &solve_fd_stratonovich(&s, &u0, &g, &p).unwrap(),
            &solve_fd_ito_naive(&s, &u0, &g, &p).unwrap(),
        );
        assert!(bad >= 10.0 * 0.05, "negative control too small: {bad}");
        assert!(bad >= 10.0 * good, "separation only {}", bad / good);
    }

    #[test]
    fn constants_preserved_exactly() {
        let p = sample_path(1, 1.0, 1 << 8, 5).unwrap();
        let s = heat_suite(0.5, 1.0);
        let out = solve_fd_stratonovich(&s, &|_| 3.25, &grid(51, 3.0), &p).unwrap();
        for v in &out.values {
            assert_eq!(*v, 3.25);
        }
    }

    #[test]
    fn comparison_ordering_for_ordered_data() {
        let s = heat_suite(0.5, 1.0);
        let v0 = 0.5;
        let u0 = move |x: f64| gaussian_density(x, 0.0, v0).0;
        let v0fun = move |x: f64| gaussian_density(x, 0.0, v0).0 + 0.1;
        let g = grid(201, 6.0);
        for seed in 0..3 {
            let p = sample_path(1, 0.5, 1 << 10, seed).unwrap();
            let a = solve_fd_stratonovich(&s, &u0, &g, &p).unwrap();
            let b = solve_fd_stratonovich(&s, &v0fun, &g, &p).unwrap();
            let min_gap = a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| y - x)
                .fold(f64::INFINITY, f64::min);
            assert!(min_gap >= -1e-6, "seed {seed}: min(v - u) = {min_gap}");
        }
    }

    #[test]
    fn envelope_gap_matches_linear_prediction() {
        let s = heat_suite(0.5, 1.0);
        let g = grid(201, 6.0);
        let p = sample_path(1, 0.5, 1 << 10, 7).unwrap();
        let eps = [0.2, 0.1, 0.05];
        let r = envelope_experiment(&s, 0.0, 0.5, &eps, &g, &p).unwrap();
        assert!(r.ordering_ok);
        assert!(r.monotone);
        for (i, &e) in eps.iter().enumerate() {
            let predict = 2.0 * e * 1.5; // 2 eps (1 + t) at t = 0.5
            let rel = (r.final_gap[i] - predict).abs() / predict;
            assert!(rel <= 0.1, "eps {e}: gap {} vs {predict}", r.final_gap[i]);
        }
        // halving eps halves the gap
        let ratio = r.final_gap[1] / r.final_gap[0];
        assert!((ratio - 0.5).abs() <= 0.05, "ratio {ratio}");

        let z = envelope_experiment(&s, 0.0, 0.5, &[0.0], &g, &p).unwrap();
        assert_eq!(z.final_gap[0], 0.0);
    }
}
