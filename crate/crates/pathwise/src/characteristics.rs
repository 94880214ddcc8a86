//! Stochastic characteristics for the linearized equation (d = d' = 1):
//! freeze the coefficients along a pair of classical fields, transport by the
//! flow `theta`, reweight by the exponential martingale `M`, and represent the
//! reduced deterministic PDE by Feynman-Kac Monte Carlo.
//!
//! Conventions pinned here (see the module tests for the oracles):
//! * `theta` is driven by the gradient-noise coefficient `g_z`, the weight `M`
//!   by the zeroth-order coefficient `g_y` — the only assignment that makes
//!   the noise terms cancel in the Ito-Ventzell computation.
//! * `theta` is stepped by Euler-Maruyama in Ito form on the path's own grid;
//!   `d_x theta` and `M` use their explicit positive-exponential forms, so
//!   positivity holds by construction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::coefficients::{ito_drift, CoefficientSuite};
use crate::error::{PathwiseError, Result};
use crate::exec::par_map_indexed;
use crate::fields::RandomField;
use crate::paths::SamplePath;
use crate::rng::child_rng;

/// 16-point Gauss-Legendre rule on [0, 1].
const GL16: [(f64, f64); 16] = [
    (0.00529953250417505, 0.01357622970587705),
    (0.02771248846338370, 0.03112676196932395),
    (0.06718439880608410, 0.04757925584124640),
    (0.12229779582249850, 0.06231448562776695),
    (0.19106187779867810, 0.07479799440828835),
    (0.27099161117138630, 0.08457825969750125),
    (0.35919822461037055, 0.09130170752246180),
    (0.45249374508118130, 0.09472530522753425),
    (0.54750625491881870, 0.09472530522753425),
    (0.64080177538962945, 0.09130170752246180),
    (0.72900838882861370, 0.08457825969750125),
    (0.80893812220132190, 0.07479799440828835),
    (0.87770220417750150, 0.06231448562776695),
    (0.93281560119391590, 0.04757925584124640),
    (0.97228751153661630, 0.03112676196932395),
    (0.99470046749582495, 0.01357622970587705),
];

/// Coefficients of the linear equation for `w = u - v`, tabulated on a
/// (sub-sampled time) x (space) grid and interpolated bilinearly with clamping
/// outside the box.
#[derive(Debug, Clone)]
pub struct FrozenLinearCoefficients {
    /// Sub-sampled path times, always including 0 and the horizon.
    pub t_grid: Vec<f64>,
    /// Path grid indices behind `t_grid`.
    pub t_idx: Vec<usize>,
    pub x_grid: Vec<f64>,
    // row-major (time) x (space) tables
    pub f_y: Vec<f64>,
    pub f_z: Vec<f64>,
    pub f_gamma: Vec<f64>,
    pub g_y: Vec<f64>,
    pub g_z: Vec<f64>,
    pub psi: Vec<f64>,
}

fn bilinear(t_grid: &[f64], x_grid: &[f64], table: &[f64], t: f64, x: f64) -> f64 {
    let locate = |grid: &[f64], v: f64| -> (usize, f64) {
        let n = grid.len();
        if n == 1 || v <= grid[0] {
            return (0, 0.0);
        }
        if v >= grid[n - 1] {
            return (n - 2, 1.0);
        }
        let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
        let i = (((v - grid[0]) / h) as usize).min(n - 2);
        ((i), ((v - grid[i]) / h).clamp(0.0, 1.0))
    };
    let nx = x_grid.len();
    let (it, wt) = locate(t_grid, t);
    let (ix, wx) = locate(x_grid, x);
    let it1 = (it + 1).min(t_grid.len() - 1);
    let v00 = table[it * nx + ix];
    let v01 = table[it * nx + ix + 1];
    let v10 = table[it1 * nx + ix];
    let v11 = table[it1 * nx + ix + 1];
    (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) + wt * ((1.0 - wx) * v10 + wx * v11)
}

impl FrozenLinearCoefficients {
    pub fn at(&self, table: &[f64], t: f64, x: f64) -> f64 {
        bilinear(&self.t_grid, &self.x_grid, table, t, x)
    }

    fn dx(&self) -> f64 {
        (self.x_grid[self.x_grid.len() - 1] - self.x_grid[0]) / (self.x_grid.len() - 1) as f64
    }

    /// Central-difference x-derivative of a tabulated coefficient (one-sided
    /// at the box edges).
    pub fn x_derivative(&self, table: &[f64]) -> Vec<f64> {
        let nx = self.x_grid.len();
        let dx = self.dx();
        let mut out = vec![0.0; table.len()];
        for r in 0..self.t_grid.len() {
            let row = &table[r * nx..(r + 1) * nx];
            let o = &mut out[r * nx..(r + 1) * nx];
            for i in 0..nx {
                o[i] = if i == 0 {
                    (row[1] - row[0]) / dx
                } else if i == nx - 1 {
                    (row[nx - 1] - row[nx - 2]) / dx
                } else {
                    (row[i + 1] - row[i - 1]) / (2.0 * dx)
                };
            }
        }
        out
    }
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

fn sub_times(path: &SamplePath, t_sub: usize) -> (Vec<f64>, Vec<usize>) {
    let n = path.n_steps();
    let rows = t_sub.max(2).min(n + 1);
    let idx: Vec<usize> = (0..rows).map(|r| r * n / (rows - 1)).collect();
    let times = idx.iter().map(|&k| path.time(k)).collect();
    (times, idx)
}

const FD_STEP: f64 = 1e-5;

/// Average the (y, z, gamma)-derivatives of the Ito drift `F` and the
/// g-blocks along the segment between the jets of `v` and `u`, per the
/// frozen-coefficient construction for `w = u - v`, and tabulate them.
pub fn linearize(
    suite: &CoefficientSuite,
    u: &RandomField,
    v: &RandomField,
    path: &SamplePath,
    x_grid: &[f64],
    t_sub: usize,
) -> Result<FrozenLinearCoefficients> {
    if suite.d != 1 || suite.dprime != 1 {
        return Err(PathwiseError::Contract(
            "characteristics require d = d' = 1".into(),
        ));
    }
    if x_grid.len() < 3 {
        return Err(PathwiseError::Parameter("x_grid needs >= 3 nodes".into()));
    }
    let (t_grid, t_idx) = sub_times(path, t_sub);
    let nx = x_grid.len();
    let rows = par_map_indexed(t_grid.len(), |r| -> Result<Vec<[f64; 6]>> {
        let t = t_grid[r];
        let mut row = Vec::with_capacity(nx);
        let mut xb = DVector::zeros(1);
        for &x in x_grid {
            xb[0] = x;
            let su = u.suite(t, x, path)?;
            let sv = v.suite(t, x, path)?;
            let (dy, dz, dg) = (su.value - sv.value, su.dx - sv.dx, su.dxx - sv.dxx);
            let mut acc = [0.0f64; 5]; // F_y, F_z, F_gamma, g_y, g_z
            for (lam, wgt) in GL16 {
                let y = sv.value + lam * dy;
                let z0 = sv.dx + lam * dz;
                let gm0 = sv.dxx + lam * dg;
                let fd = |iy: f64, iz: f64, ig: f64, s: f64| -> Result<f64> {
                    let z = DVector::from_element(1, z0 + s * iz);
                    let gm = DMatrix::from_element(1, 1, gm0 + s * ig);
                    ito_drift(suite, t, &xb, path, y + s * iy, &z, &gm)
                };
                let zv = DVector::from_element(1, z0);
                acc[0] += wgt * (fd(1.0, 0.0, 0.0, FD_STEP)? - fd(1.0, 0.0, 0.0, -FD_STEP)?)
                    / (2.0 * FD_STEP);
                acc[1] += wgt * (fd(0.0, 1.0, 0.0, FD_STEP)? - fd(0.0, 1.0, 0.0, -FD_STEP)?)
                    / (2.0 * FD_STEP);
                acc[2] += wgt * (fd(0.0, 0.0, 1.0, FD_STEP)? - fd(0.0, 0.0, 1.0, -FD_STEP)?)
                    / (2.0 * FD_STEP);
                let gs = suite.g_suite(t, &xb, path, y, &zv)?;
                acc[3] += wgt * gs.dy[0];
                acc[4] += wgt * gs.dz[(0, 0)];
            }
            // psi = (Ito residual of u) - (Ito residual of v); both vanish for
            // exact solutions of the nonlinear equation
            let residual = |s: &crate::fields::DerivativeSuite| -> Result<f64> {
                let z = DVector::from_element(1, s.dx);
                let gm = DMatrix::from_element(1, 1, s.dxx);
                let f_at = ito_drift(suite, t, &xb, path, s.value, &z, &gm)?;
                Ok(s.dt + 0.5 * s.dww[(0, 0)] - f_at)
            };
            let psi = residual(&su)? - residual(&sv)?;
            row.push([acc[0], acc[1], acc[2], acc[3], acc[4], psi]);
        }
        Ok(row)
    });
    let mut out = FrozenLinearCoefficients {
        t_grid,
        t_idx,
        x_grid: x_grid.to_vec(),
        f_y: Vec::with_capacity(nx),
        f_z: Vec::with_capacity(nx),
        f_gamma: Vec::with_capacity(nx),
        g_y: Vec::with_capacity(nx),
        g_z: Vec::with_capacity(nx),
        psi: Vec::with_capacity(nx),
    };
    for row in rows {
        for cell in row? {
            out.f_y.push(cell[0]);
            out.f_z.push(cell[1]);
            out.f_gamma.push(cell[2]);
            out.g_y.push(cell[3]);
            out.g_z.push(cell[4]);
            out.psi.push(cell[5]);
        }
    }
    Ok(out)
}

/// The flow, its x-derivative, and the exponential weight, tabulated on the
/// same (time) x (starting point) grid as the frozen coefficients.
#[derive(Debug, Clone)]
pub struct CharacteristicsBundle {
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub m: Vec<f64>,
}

impl CharacteristicsBundle {
    fn row(&self, t: f64) -> Result<usize> {
        let h = (self.t_grid[self.t_grid.len() - 1] - self.t_grid[0])
            / (self.t_grid.len() - 1) as f64;
        let r = ((t - self.t_grid[0]) / h).round() as isize;
        if r < 0
            || r as usize >= self.t_grid.len()
            || (self.t_grid[r as usize] - t).abs() > 1e-9 + h * 1e-6
        {
            return Err(PathwiseError::Parameter(format!(
                "time {t} is not on the bundle's tabulation grid"
            )));
        }
        Ok(r as usize)
    }

    /// Invert `x -> theta_t(x)` by monotone bisection on the tabulated flow
    /// with linear interpolation between starting points.
    pub fn zeta(&self, t: f64, target: f64) -> Result<f64> {
        let r = self.row(t)?;
        let nx = self.x_grid.len();
        let row = &self.theta[r * nx..(r + 1) * nx];
        if target < row[0] || target > row[nx - 1] {
            return Err(PathwiseError::Domain(format!(
                "zeta: {target} outside the tabulated flow range [{}, {}]",
                row[0],
                row[nx - 1]
            )));
        }
        let (mut lo, mut hi) = (0usize, nx - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if row[mid] <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = row[hi] - row[lo];
        let w = if span.abs() < 1e-300 { 0.0 } else { (target - row[lo]) / span };
        Ok(self.x_grid[lo] + w * (self.x_grid[hi] - self.x_grid[lo]))
    }

    pub fn m_at(&self, t: f64, x: f64) -> Result<f64> {
        let r = self.row(t)?;
        let nx = self.x_grid.len();
        Ok(bilinear(
            &[self.t_grid[r]],
            &self.x_grid,
            &self.m[r * nx..(r + 1) * nx],
            self.t_grid[r],
            x,
        ))
    }

    /// Max over the grid of `|theta_t(zeta_t(x)) - x|`.
    pub fn inversion_defect(&self) -> Result<f64> {
        let nx = self.x_grid.len();
        let mut worst: f64 = 0.0;
        for (r, &t) in self.t_grid.iter().enumerate() {
            let row = &self.theta[r * nx..(r + 1) * nx];
            for i in 0..nx {
                let x = self.x_grid[i];
                if x < row[0] || x > row[nx - 1] {
                    continue;
                }
                let z = self.zeta(t, x)?;
                let back = bilinear(&[t], &self.x_grid, row, t, z);
                worst = worst.max((back - x).abs());
            }
        }
        Ok(worst)
    }
}

/// Step the characteristics on the path's own grid: Euler-Maruyama for
/// `d theta = -g_z(t, theta) dB` (Ito), explicit exponentials for
/// `d_x theta` and `M` so both stay positive by construction.
pub fn solve_characteristics(
    coeffs: &FrozenLinearCoefficients,
    path: &SamplePath,
) -> Result<CharacteristicsBundle> {
    let nx = coeffs.x_grid.len();
    let rows = coeffs.t_grid.len();
    let gzx = coeffs.x_derivative(&coeffs.g_z);
    let cols = par_map_indexed(nx, |i| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut theta = coeffs.x_grid[i];
        let mut log_dtheta = 0.0f64;
        let mut log_m = 0.0f64;
        let mut out_t = Vec::with_capacity(rows);
        let mut out_d = Vec::with_capacity(rows);
        let mut out_m = Vec::with_capacity(rows);
        let mut next_row = 0usize;
        for k in 0..=path.n_steps() {
            if next_row < rows && coeffs.t_idx[next_row] == k {
                out_t.push(theta);
                out_d.push(log_dtheta.exp());
                out_m.push(log_m.exp());
                next_row += 1;
            }
            if k == path.n_steps() {
                break;
            }
            let t = path.time(k);
            let db = path.increment(k)[0];
            let dt = path.dt();
            let gz = coeffs.at(&coeffs.g_z, t, theta);
            let gy = coeffs.at(&coeffs.g_y, t, theta);
            let gx = coeffs.at(&gzx, t, theta);
            theta -= gz * db;
            log_dtheta += -gx * db - 0.5 * gx * gx * dt;
            log_m += gy * db - 0.5 * gy * gy * dt;
            if !theta.is_finite() || !log_dtheta.is_finite() || !log_m.is_finite() {
                return Err(PathwiseError::Stability(format!(
                    "characteristics blow-up at step {k}, start x = {}",
                    coeffs.x_grid[i]
                )));
            }
        }
        Ok((out_t, out_d, out_m))
    });
    let mut bundle = CharacteristicsBundle {
        t_grid: coeffs.t_grid.clone(),
        x_grid: coeffs.x_grid.clone(),
        theta: vec![0.0; rows * nx],
        dtheta: vec![0.0; rows * nx],
        m: vec![0.0; rows * nx],
    };
    for (i, col) in cols.into_iter().enumerate() {
        let (t, d, m) = col?;
        for r in 0..rows {
            bundle.theta[r * nx + i] = t[r];
            bundle.dtheta[r * nx + i] = d[r];
            bundle.m[r * nx + i] = m[r];
        }
    }
    // the flow must stay monotone across starting points for zeta to exist
    for r in 0..rows {
        for i in 1..nx {
            if bundle.theta[r * nx + i] <= bundle.theta[r * nx + i - 1] {
                return Err(PathwiseError::Stability(format!(
                    "flow lost monotonicity at t = {}", bundle.t_grid[r]
                )));
            }
        }
    }
    Ok(bundle)
}

/// Coefficients of the reduced deterministic PDE
/// `dv = [a v_xx + b v_x + c v + psi] dt` in the flow coordinates.
#[derive(Debug, Clone)]
pub struct ReducedFields {
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub c_bar: Vec<f64>,
    pub psi_bar: Vec<f64>,
}

impl ReducedFields {
    pub fn at(&self, table: &[f64], t: f64, x: f64) -> f64 {
        bilinear(&self.t_grid, &self.x_grid, table, t, x)
    }

    /// Constant-coefficient fields on a box — test and oracle plumbing.
    pub fn constant(a: f64, b: f64, c: f64, psi: f64, x_lo: f64, x_hi: f64, t_max: f64) -> Self {
        ReducedFields {
            t_grid: vec![0.0, t_max],
            x_grid: vec![x_lo, x_hi],
            a_bar: vec![a; 4],
            b_bar: vec![b; 4],
            c_bar: vec![c; 4],
            psi_bar: vec![psi; 4],
        }
    }
}

pub fn reduced_coefficients(
    coeffs: &FrozenLinearCoefficients,
    bundle: &CharacteristicsBundle,
) -> Result<ReducedFields> {
    let nx = coeffs.x_grid.len();
    let rows = coeffs.t_grid.len();
    let dx = coeffs.dx();
    let gzx = coeffs.x_derivative(&coeffs.g_z);
    let gyx = coeffs.x_derivative(&coeffs.g_y);
    let mut out = ReducedFields {
        t_grid: coeffs.t_grid.clone(),
        x_grid: coeffs.x_grid.clone(),
        a_bar: vec![0.0; rows * nx],
        b_bar: vec![0.0; rows * nx],
        c_bar: vec![0.0; rows * nx],
        psi_bar: vec![0.0; rows * nx],
    };
    for r in 0..rows {
        let t = coeffs.t_grid[r];
        let th = &bundle.theta[r * nx..(r + 1) * nx];
        let dth = &bundle.dtheta[r * nx..(r + 1) * nx];
        let mm = &bundle.m[r * nx..(r + 1) * nx];
        let cd = |row: &[f64], i: usize| -> f64 {
            if i == 0 {
                (row[1] - row[0]) / dx
            } else if i == nx - 1 {
                (row[nx - 1] - row[nx - 2]) / dx
            } else {
                (row[i + 1] - row[i - 1]) / (2.0 * dx)
            }
        };
        let cd2 = |row: &[f64], i: usize| -> f64 {
            let j = i.clamp(1, nx - 2);
            (row[j + 1] - 2.0 * row[j] + row[j - 1]) / (dx * dx)
        };
        for i in 0..nx {
            let (theta, theta_x, m) = (th[i], dth[i], mm[i]);
            let theta_xx = cd2(th, i);
            let m_x = cd(mm, i);
            let m_xx = cd2(mm, i);
            let gz = coeffs.at(&coeffs.g_z, t, theta);
            let a_hat = coeffs.at(&coeffs.f_gamma, t, theta) - 0.5 * gz * gz;
            let b_hat = coeffs.at(&coeffs.f_z, t, theta)
                - coeffs.at(&gzx, t, theta) * gz
                - coeffs.at(&coeffs.g_y, t, theta) * gz;
            let c_hat =
                coeffs.at(&coeffs.f_y, t, theta) - coeffs.at(&gyx, t, theta) * gz;
            let a_bar = a_hat / (theta_x * theta_x);
            if a_bar < -1e-10 {
                return Err(PathwiseError::Parabolicity(format!(
                    "reduced diffusion {a_bar:.3e} negative at (t, x) = ({t}, {})",
                    coeffs.x_grid[i]
                )));
            }
            let b_bar = 2.0 * m_x * a_hat / (m * theta_x * theta_x)
                - a_hat * theta_xx / (theta_x * theta_x * theta_x)
                + b_hat / theta_x;
            let c_bar = m_xx * a_hat / (m * theta_x * theta_x)
                - m_x * a_hat * theta_xx / (m * theta_x * theta_x * theta_x)
                + m_x * b_hat / (m * theta_x)
                + c_hat;
            let idx = r * nx + i;
            out.a_bar[idx] = a_bar.max(0.0);
            out.b_bar[idx] = b_bar;
            out.c_bar[idx] = c_bar;
            out.psi_bar[idx] = coeffs.at(&coeffs.psi, t, theta) / m;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct McParams {
    pub samples: usize,
    pub inner_steps: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct FkEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Inner diffusion steps that left the tabulated box and were clamped.
    pub clamp_events: usize,
}

/// Monte Carlo for the reduced PDE:
/// `v(t,x) = E[ Gamma_t v0(X_t) + sum_s Gamma_s psi(t-s, X_s) ds ]` with
/// `dX = sqrt(2 a(t-r, X)) dW + b(t-r, X) dr` and `Gamma = exp int c`.
/// Deterministic given the master seed: per-sample streams from
/// `(master, "fk", index)`, accumulation in index order.
pub fn feynman_kac(
    reduced: &ReducedFields,
    v0: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    x: f64,
    mc: &McParams,
) -> Result<FkEstimate> {
    if mc.samples == 0 || mc.inner_steps == 0 {
        return Err(PathwiseError::Parameter("mc parameters must be positive".into()));
    }
    let (x_lo, x_hi) = (reduced.x_grid[0], reduced.x_grid[reduced.x_grid.len() - 1]);
    let ds = t / mc.inner_steps as f64;
    let draws = par_map_indexed(mc.samples, |i| -> Result<(f64, usize)> {
        let mut rng = child_rng(mc.master_seed, "fk", i as u64);
        let mut xx = x;
        let mut gamma = 1.0f64;
        let mut acc = 0.0f64;
        let mut clamped = 0usize;
        for j in 0..mc.inner_steps {
            let r = j as f64 * ds;
            let xq = xx.clamp(x_lo, x_hi);
            if xq != xx {
                clamped += 1;
            }
            let a = reduced.at(&reduced.a_bar, t - r, xq);
            if a < -1e-10 {
                return Err(PathwiseError::Parabolicity(format!(
                    "negative diffusion {a:.3e} met by the inner process"
                )));
            }
            let b = reduced.at(&reduced.b_bar, t - r, xq);
            let c = reduced.at(&reduced.c_bar, t - r, xq);
            acc += gamma * reduced.at(&reduced.psi_bar, t - r, xq) * ds;
            gamma *= (c * ds).exp();
            let noise: f64 = rng.sample(StandardNormal);
            xx += b * ds + (2.0 * a.max(0.0) * ds).sqrt() * noise;
        }
        let xq = xx.clamp(x_lo, x_hi);
        if xq != xx {
            clamped += 1;
        }
        Ok((gamma * v0(xx) + acc, clamped))
    });
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut clamp_events = 0usize;
    for d in draws {
        let (v, c) = d?;
        sum += v;
        sum_sq += v * v;
        clamp_events += c;
    }
    let n = mc.samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    Ok(FkEstimate { mean, std_error: (var / n).sqrt(), clamp_events })
}

/// Undo the flow change of variables: `w(t, x) = M_t(zeta_t(x)) v(t, zeta_t(x))`.
pub fn reconstruct(
    bundle: &CharacteristicsBundle,
    v: &dyn Fn(f64) -> Result<f64>,
    t: f64,
    x: f64,
) -> Result<f64> {
    let z = bundle.zeta(t, x)?;
    Ok(bundle.m_at(t, z)? * v(z)?)
}

/// One value of the full pipeline for a linear equation: linearize around the
/// zero field, run the characteristics, Feynman-Kac the reduced PDE at the
/// pulled-back point, then reconstruct. The inhomogeneous part enters through
/// `psi = F(t, x, 0, 0, 0)`.
pub struct LinearPipeline {
    pub coeffs: FrozenLinearCoefficients,
    pub bundle: CharacteristicsBundle,
    pub reduced: ReducedFields,
}

pub fn linear_pipeline(
    suite: &CoefficientSuite,
    path: &SamplePath,
    x_grid: &[f64],
    t_sub: usize,
) -> Result<LinearPipeline> {
    let zero = crate::fields::markov_field_scalar(
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
        |_, _, _| 0.0,
    );
    let mut coeffs = linearize(suite, &zero, &zero, path, x_grid, t_sub)?;
    // with v = 0 the source is the equation's value at the zero jet
    let zv = DVector::zeros(1);
    let zg = DMatrix::zeros(1, 1);
    let mut xb = DVector::zeros(1);
    for r in 0..coeffs.t_grid.len() {
        for i in 0..coeffs.x_grid.len() {
            xb[0] = coeffs.x_grid[i];
            coeffs.psi[r * coeffs.x_grid.len() + i] =
                ito_drift(suite, coeffs.t_grid[r], &xb, path, 0.0, &zv, &zg)?;
        }
    }
    let bundle = solve_characteristics(&coeffs, path)?;
    let reduced = reduced_coefficients(&coeffs, &bundle)?;
    Ok(LinearPipeline { coeffs, bundle, reduced })
}

impl LinearPipeline {
    /// `u(t, x)` with its Monte Carlo standard error.
    pub fn value(
        &self,
        u0: &(dyn Fn(f64) -> f64 + Sync),
        t: f64,
        x: f64,
        mc: &McParams,
    ) -> Result<FkEstimate> {
        let z = self.bundle.zeta(t, x)?;
        let est = feynman_kac(&self.reduced, u0, t, z, mc)?;
        let m = self.bundle.m_at(t, z)?;
        Ok(FkEstimate {
            mean: m * est.mean,
            std_error: m.abs() * est.std_error,
            clamp_events: est.clamp_events,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// Per-path minimum over all grid nodes and times of `v - u`.
    pub min_gap: Vec<f64>,
    pub pass: bool,
    /// Initial data crossed, nothing was run.
    pub skipped: bool,
}

/// Solve both initial conditions with the reference solver on each path and
/// check that ordering of the data propagates to ordering of the solutions.
pub fn classical_comparison_experiment(
    suite: &CoefficientSuite,
    u0: &(dyn Fn(f64) -> f64 + Sync),
    v0: &(dyn Fn(f64) -> f64 + Sync),
    paths: &[SamplePath],
    grid: &crate::refsolver::FDGrid,
) -> Result<ComparisonReport> {
    for &x in &grid.nodes() {
        if u0(x) > v0(x) + 1e-12 {
            return Ok(ComparisonReport { min_gap: Vec::new(), pass: false, skipped: true });
        }
    }
    let mut report = ComparisonReport { min_gap: Vec::new(), pass: true, skipped: false };
    for path in paths {
        let a = crate::refsolver::solve_fd_stratonovich(suite, &|x| u0(x), grid, path)?;
        let b = crate::refsolver::solve_fd_stratonovich(suite, &|x| v0(x), grid, path)?;
        let min_gap = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(u, v)| v - u)
            .fold(f64::INFINITY, f64::min);
        report.pass &= min_gap >= -1e-6;
        report.min_gap.push(min_gap);
    }
    Ok(report)
}
