//! Discretized driving paths and their second-level data.
//!
//! A [`SamplePath`] is a d-dimensional path on a uniform grid, frozen as the
//! realized noise for every downstream computation. The discrete Stratonovich
//! integral is the trapezoidal sum, which makes the product rule
//! `I + I^T = B B^T` and the Chen relation exact identities up to rounding.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PathwiseError, Result};
use crate::exec::par_map_indexed;
use crate::rng::child_rng;

/// Magic bytes of the binary path file format.
pub const PATH_MAGIC: &[u8; 4] = b"PWPF";
/// Current binary format version.
pub const PATH_FORMAT_VERSION: u32 = 1;

/// A d-dimensional driving path on the uniform grid `t_k = k T / N`.
///
/// Stored as raw increments plus cumulative values; increments avoid
/// cancellation when forming `B_{s,t}` for nearby grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    dim: usize,
    horizon: f64,
    n_steps: usize,
    /// Row-major `[step][component]`, length `n_steps * dim`.
    increments: Vec<f64>,
    /// Row-major `[node][component]`, length `(n_steps + 1) * dim`.
    values: Vec<f64>,
    seed: u64,
}

/// Second-level data of a path over `[s, t]`: the increment, the matrix of
/// discrete Stratonovich iterated integrals, and the Levy area.
#[derive(Debug, Clone)]
pub struct SecondLevel {
    /// `B_{s,t}`.
    pub increment: DVector<f64>,
    /// `I^{ij}` = trapezoidal Stratonovich integral of `B^i_{s,.}` against `B^j`.
    pub strat_matrix: DMatrix<f64>,
    /// `A = I - I^T`, antisymmetric.
    pub levy: DMatrix<f64>,
}

/// Draw a path with i.i.d. centered Gaussian increments of variance `T/N`
/// per component. Deterministic for a fixed seed.
pub fn sample_path(dim: usize, horizon: f64, n_steps: usize, seed: u64) -> Result<SamplePath> {
    if dim == 0 {
        return Err(PathwiseError::Parameter("dimension must be >= 1".into()));
    }
    if n_steps == 0 {
        return Err(PathwiseError::Parameter("mesh must be >= 1".into()));
    }
    if !(horizon > 0.0) {
        return Err(PathwiseError::Parameter("horizon must be > 0".into()));
    }
    let mut rng = child_rng(seed, "path", 0);
    let sd = (horizon / n_steps as f64).sqrt();
    let increments: Vec<f64> = (0..n_steps * dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(SamplePath::from_increments(dim, horizon, increments, seed))
}

impl SamplePath {
    /// Build a path from raw increments (values are the cumulative sums,
    /// starting at the origin).
    pub fn from_increments(dim: usize, horizon: f64, increments: Vec<f64>, seed: u64) -> Self {
        assert!(dim > 0 && increments.len() % dim == 0);
        let n_steps = increments.len() / dim;
        let mut values = vec![0.0; (n_steps + 1) * dim];
        for k in 0..n_steps {
            for c in 0..dim {
                values[(k + 1) * dim + c] = values[k * dim + c] + increments[k * dim + c];
            }
        }
        SamplePath { dim, horizon, n_steps, increments, values, seed }
    }

    /// Build a deterministic "fake" path from node values (values[0] must be 0).
    pub fn from_values(dim: usize, horizon: f64, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() % dim != 0 || values.len() < 2 * dim {
            return Err(PathwiseError::Parameter("values length must be (N+1)*d, N >= 1".into()));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(PathwiseError::Parameter("path must start from the origin".into()));
        }
        let n_steps = values.len() / dim - 1;
        let increments = (0..n_steps * dim)
            .map(|i| values[i + dim] - values[i])
            .collect();
        Ok(SamplePath { dim, horizon, n_steps, increments, values, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Grid spacing `T / N`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Time of node `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.n_steps as f64
    }

    /// Node values at grid index `k`.
    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Component `c` at grid index `k`.
    pub fn component(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.dim + c]
    }

    /// Increment of step `k` (from node `k` to `k+1`).
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `B_{s,t}` between grid indices, formed from increments.
    pub fn segment_increment(&self, s: usize, t: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for k in s..t {
            for c in 0..self.dim {
                out[c] += self.increments[k * self.dim + c];
            }
        }
        out
    }

    /// Locate a time on the grid; off-grid times are a parameter error.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let dt = self.dt();
        let k = (t / dt).round();
        if k < 0.0 || k > self.n_steps as f64 || (t - k * dt).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(PathwiseError::Parameter(format!("time {t} is not on the grid")));
        }
        Ok(k as usize)
    }

    /// Value of the path at a grid time (all components).
    pub fn value_at(&self, t: f64) -> Result<DVector<f64>> {
        let k = self.grid_index(t)?;
        Ok(DVector::from_column_slice(self.node(k)))
    }

    /// Brownian-bridge midpoint refinement by a power-of-two factor.
    ///
    /// Coarse nodes are preserved exactly; inserted midpoints get the bridge
    /// law. The bridge noise stream is keyed by `(seed, "bridge", N)` where N
    /// is the mesh being refined, so `refine(refine(p, 2), 2)` and
    /// `refine(p, 4)` produce bit-identical paths.
    pub fn refine(&self, factor: usize) -> Result<SamplePath> {
        if factor < 2 || !factor.is_power_of_two() {
            return Err(PathwiseError::Parameter(format!(
                "refinement factor must be a power of two >= 2, got {factor}"
            )));
        }
        let mut p = self.clone();
        let mut remaining = factor;
        while remaining > 1 {
            let mut rng = child_rng(self.seed, "bridge", p.n_steps as u64);
            let half_sd = (p.dt() / 4.0).sqrt();
            p = p.refine_once(|_, _| half_sd * rng.sample::<f64, _>(StandardNormal));
            remaining /= 2;
        }
        Ok(p)
    }

    /// One midpoint-insertion pass with caller-supplied bridge noise,
    /// called as `noise(step, component)` in deterministic order.
    pub fn refine_once<F: FnMut(usize, usize) -> f64>(&self, mut noise: F) -> SamplePath {
        let d = self.dim;
        let n_new = 2 * self.n_steps;
        let mut values = vec![0.0; (n_new + 1) * d];
        for k in 0..self.n_steps {
            for c in 0..d {
                let lo = self.values[k * d + c];
                let hi = self.values[(k + 1) * d + c];
                values[2 * k * d + c] = lo;
                values[(2 * k + 1) * d + c] = 0.5 * (lo + hi) + noise(k, c);
            }
        }
        values[n_new * d..].copy_from_slice(self.node(self.n_steps));
        let increments = (0..n_new * d).map(|i| values[i + d] - values[i]).collect();
        SamplePath {
            dim: d,
            horizon: self.horizon,
            n_steps: n_new,
            increments,
            values,
            seed: self.seed,
        }
    }

    /// Trapezoidal discrete Stratonovich sum of an integrand (given on all
    /// grid nodes) against component `j` over `[s, t]` (grid indices).
    pub fn strat_integral_idx(
        &self,
        integrand: &[f64],
        component: usize,
        s: usize,
        t: usize,
    ) -> Result<f64> {
        if component >= self.dim {
            return Err(PathwiseError::Parameter(format!(
                "component {component} out of range for dimension {}",
                self.dim
            )));
        }
        if s >= t || t > self.n_steps {
            return Err(PathwiseError::Parameter(format!("need s < t on grid, got {s}, {t}")));
        }
        if integrand.len() < t + 1 {
            return Err(PathwiseError::Parameter(
                "integrand must be defined on all nodes in [s, t]".into(),
            ));
        }
        let mut acc = 0.0;
        for k in s..t {
            let db = self.increments[k * self.dim + component];
            acc += 0.5 * (integrand[k] + integrand[k + 1]) * db;
        }
        Ok(acc)
    }

    /// As [`strat_integral_idx`](Self::strat_integral_idx) with grid times.
    pub fn strat_integral(&self, integrand: &[f64], component: usize, s: f64, t: f64) -> Result<f64> {
        let si = self.grid_index(s)?;
        let ti = self.grid_index(t)?;
        self.strat_integral_idx(integrand, component, si, ti)
    }

    /// Second-level data over `[s, t]` (grid indices).
    pub fn second_level_idx(&self, s: usize, t: usize) -> Result<SecondLevel> {
        if s >= t || t > self.n_steps {
            return Err(PathwiseError::Parameter(format!("need s < t on grid, got {s}, {t}")));
        }
        let d = self.dim;
        let increment = self.segment_increment(s, t);
        let mut strat = DMatrix::zeros(d, d);
        for k in s..t {
            for i in 0..d {
                // B^i_{s,k} + B^i_{s,k+1}, midpoint in value.
                let a = (self.values[k * d + i] - self.values[s * d + i])
                    + (self.values[(k + 1) * d + i] - self.values[s * d + i]);
                for j in 0..d {
                    strat[(i, j)] += 0.5 * a * self.increments[k * d + j];
                }
            }
        }
        let levy = &strat - strat.transpose();
        Ok(SecondLevel { increment, strat_matrix: strat, levy })
    }

    /// Second-level data over grid times `[s, t]`.
    pub fn second_level(&self, s: f64, t: f64) -> Result<SecondLevel> {
        self.second_level_idx(self.grid_index(s)?, self.grid_index(t)?)
    }

    /// Max-norm defect of the Chen relation
    /// `A_{s,t} = A_{s,u} + A_{u,t} + B_{s,u} B_{u,t}^T - B_{u,t} B_{s,u}^T`
    /// for grid indices `s < u < t`.
    pub fn chen_check_idx(&self, s: usize, u: usize, t: usize) -> Result<f64> {
        if !(s < u && u < t) {
            return Err(PathwiseError::Parameter("need s < u < t on grid".into()));
        }
        let full = self.second_level_idx(s, t)?;
        let left = self.second_level_idx(s, u)?;
        let right = self.second_level_idx(u, t)?;
        let cross = &left.increment * right.increment.transpose();
        let defect = &full.levy - &left.levy - &right.levy - (&cross - cross.transpose());
        Ok(defect.amax())
    }

    /// As [`chen_check_idx`](Self::chen_check_idx) with grid times.
    pub fn chen_check(&self, s: f64, u: f64, t: f64) -> Result<f64> {
        self.chen_check_idx(self.grid_index(s)?, self.grid_index(u)?, self.grid_index(t)?)
    }

    /// Empirical Holder coefficient: sup over node pairs of
    /// `|B_{s,t}| / (t - s)^kappa`.
    pub fn holder_coefficient(&self, kappa: f64) -> f64 {
        let d = self.dim;
        let dt = self.dt();
        let per_lag = par_map_indexed(self.n_steps, |lag0| {
            let lag = lag0 + 1;
            let denom = (lag as f64 * dt).powf(kappa);
            let mut best: f64 = 0.0;
            for s in 0..=(self.n_steps - lag) {
                let mut norm2 = 0.0;
                for c in 0..d {
                    let diff = self.values[(s + lag) * d + c] - self.values[s * d + c];
                    norm2 += diff * diff;
                }
                best = best.max(norm2);
            }
            best.sqrt() / denom
        });
        per_lag.into_iter().fold(0.0, f64::max)
    }

    /// Write the binary path file (PWPF header + little-endian increments).
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PATH_MAGIC)?;
        w.write_all(&PATH_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a binary path file.
    pub fn read_binary<R: std::io::Read>(mut r: R) -> Result<SamplePath> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PATH_MAGIC {
            return Err(PathwiseError::Parameter("bad magic in path file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != PATH_FORMAT_VERSION {
            return Err(PathwiseError::Parameter(format!("unsupported path format version {version}")));
        }
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let n_steps = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let horizon = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let mut increments = vec![0.0; n_steps * dim];
        for v in increments.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Ok(SamplePath::from_increments(dim, horizon, increments, seed))
    }

    /// CSV export with columns `k,t,B_1,...,B_d`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "k,t")?;
        for c in 1..=self.dim {
            write!(w, ",B_{c}")?;
        }
        writeln!(w)?;
        for k in 0..=self.n_steps {
            write!(w, "{},{}", k, self.time(k))?;
            for c in 0..self.dim {
                write!(w, ",{}", self.component(k, c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
