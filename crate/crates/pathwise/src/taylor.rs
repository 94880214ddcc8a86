//! The pathwise backward Taylor operator and remainder-order estimation.
//!
//! The operator predicts `u(t - delta, x + h) - u(t, x)` from a second-order
//! jet, the coefficient `g` with its derivative blocks, and the second-level
//! increment of the driving path over `[t - delta, t]`. Two algebraically
//! equivalent forms are evaluated and cross-checked on every call: the
//! unreduced one, and the reduced one obtained by completing the square in
//! `(h - dz_g B)` — their difference contracts a symmetric matrix against the
//! antisymmetric Levy area and must vanish.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{CoefficientSuite, GSuite};
use crate::error::{PathwiseError, Result};
use crate::exec::par_map_slice;
use crate::fields::RandomField;
use crate::paths::{SamplePath, SecondLevel};

/// Second-order jet `(y, a, z, gamma)`: value, time slot, gradient, Hessian.
#[derive(Debug, Clone)]
pub struct Jet {
    pub y: f64,
    pub a: f64,
    pub z: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

/// Which value fills the jet's time slot in [`expand`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSlot {
    /// The path-time derivative of the field.
    PathTime,
    /// The coefficient `f` at the field's jet — the candidate-solution form.
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Every `(delta, h)` combination.
    Product,
    /// `h = c sqrt(delta)` for each entry `c` of `hs`.
    MatchedScale,
}

/// The `(delta, h)` scan set for order estimation.
#[derive(Debug, Clone)]
pub struct ScanLattice {
    pub deltas: Vec<f64>,
    pub hs: Vec<f64>,
    pub pairing: Pairing,
}

impl ScanLattice {
    /// Default matched-scale lattice: `h = c sqrt(delta)`, `c` in `-2..=2`.
    pub fn matched(deltas: Vec<f64>) -> Self {
        ScanLattice { deltas, hs: vec![-2.0, -1.0, 0.0, 1.0, 2.0], pairing: Pairing::MatchedScale }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &d in &self.deltas {
            for &h in &self.hs {
                let off = match self.pairing {
                    Pairing::Product => h,
                    Pairing::MatchedScale => h * d.sqrt(),
                };
                out.push((d, off));
            }
        }
        out
    }
}

fn check_inputs(gsuite: &GSuite, jet: &Jet, level: &SecondLevel, delta: f64, h: &DVector<f64>) -> Result<()> {
    if delta <= 0.0 {
        return Err(PathwiseError::Parameter("taylor_operator: delta must be positive".into()));
    }
    let dp = jet.z.len();
    let d = gsuite.value.len();
    if jet.gamma.shape() != (dp, dp)
        || h.len() != dp
        || level.increment.len() != d
        || gsuite.dz.shape() != (dp, d)
        || gsuite.dx.shape() != (dp, d)
    {
        return Err(PathwiseError::Contract("taylor_operator: dimension mismatch".into()));
    }
    let asym = (&jet.gamma - jet.gamma.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(PathwiseError::Contract(format!("taylor_operator: gamma asymmetric by {asym:.3e}")));
    }
    Ok(())
}

/// The unreduced form: quadratic term `gamma : h h^T / 2` and the full bracket
/// `dw_g + g dy_g^T + (dx_g + z dy_g^T + gamma dz_g)^T dz_g` against
/// `(B B^T + A)`, minus `(dx_g + z dy_g^T + gamma dz_g) : h B^T`.
pub fn taylor_operator_unreduced(
    gsuite: &GSuite,
    jet: &Jet,
    level: &SecondLevel,
    delta: f64,
    h: &DVector<f64>,
) -> Result<f64> {
    check_inputs(gsuite, jet, level, delta, h)?;
    let b = &level.increment;
    let bb_a = b * b.transpose() + &level.levy;
    let mixed = &gsuite.dx + &jet.z * gsuite.dy.transpose() + &jet.gamma * &gsuite.dz;
    let bracket = &gsuite.dw + &gsuite.value * gsuite.dy.transpose() + mixed.transpose() * &gsuite.dz;
    let quad = 0.5 * (&jet.gamma * h).dot(h);
    Ok(-jet.a * delta + jet.z.dot(h) - gsuite.value.dot(b) + quad
        + 0.5 * bracket.component_mul(&bb_a).sum()
        - mixed.component_mul(&(h * b.transpose())).sum())
}

/// The reduced form: quadratic term in `(h - dz_g B)`, bracket without the
/// `gamma dz_g` contribution.
pub fn taylor_operator_reduced(
    gsuite: &GSuite,
    jet: &Jet,
    level: &SecondLevel,
    delta: f64,
    h: &DVector<f64>,
) -> Result<f64> {
    check_inputs(gsuite, jet, level, delta, h)?;
    let b = &level.increment;
    let bb_a = b * b.transpose() + &level.levy;
    let mixed = &gsuite.dx + &jet.z * gsuite.dy.transpose();
    let bracket = &gsuite.dw + &gsuite.value * gsuite.dy.transpose() + mixed.transpose() * &gsuite.dz;
    let w = h - &gsuite.dz * b;
    let quad = 0.5 * (&jet.gamma * &w).dot(&w);
    Ok(-jet.a * delta + jet.z.dot(h) - gsuite.value.dot(b) + quad
        + 0.5 * bracket.component_mul(&bb_a).sum()
        - mixed.component_mul(&(h * b.transpose())).sum())
}

/// Evaluate the operator; both forms are computed and must agree to 1e-10.
pub fn taylor_operator(
    gsuite: &GSuite,
    jet: &Jet,
    level: &SecondLevel,
    delta: f64,
    h: &DVector<f64>,
) -> Result<f64> {
    let unreduced = taylor_operator_unreduced(gsuite, jet, level, delta, h)?;
    let reduced = taylor_operator_reduced(gsuite, jet, level, delta, h)?;
    let gap = (unreduced - reduced).abs();
    if gap > 1e-10 * unreduced.abs().max(1.0) {
        return Err(PathwiseError::Internal(format!(
            "taylor_operator forms disagree by {gap:.3e}"
        )));
    }
    Ok(reduced)
}

/// Backward prediction `u(t, x) + T` of `u(t - delta, x + h)` from the field's
/// own jet (spatial dimension one).
pub fn expand(
    field: &RandomField,
    suite: &CoefficientSuite,
    t: f64,
    x: f64,
    delta: f64,
    h: f64,
    path: &SamplePath,
    slot: TimeSlot,
) -> Result<f64> {
    if delta > t {
        return Err(PathwiseError::Domain(format!("expand: delta {delta} exceeds anchor time {t}")));
    }
    let s = field.suite(t, x, path)?;
    let xv = DVector::from_element(1, x);
    let z = DVector::from_element(1, s.dx);
    let gamma = DMatrix::from_element(1, 1, s.dxx);
    let a = match slot {
        TimeSlot::PathTime => s.dt,
        TimeSlot::Drift => suite.f_eval(t, &xv, path, s.value, &z, &gamma),
    };
    let jet = Jet { y: s.value, a, z: z.clone(), gamma };
    let gsuite = suite.g_suite(t, &xv, path, s.value, &z)?;
    let level = path.second_level(t - delta, t)?;
    let hv = DVector::from_element(1, h);
    Ok(s.value + taylor_operator(&gsuite, &jet, &level, delta, &hv)?)
}

/// `R = u(t - delta, x + h) - expand(...)`, the quantity claimed
/// `o((delta + |h|^2)^{1 + alpha})`.
pub fn remainder(
    field: &RandomField,
    suite: &CoefficientSuite,
    t: f64,
    x: f64,
    delta: f64,
    h: f64,
    path: &SamplePath,
    slot: TimeSlot,
) -> Result<f64> {
    let predicted = expand(field, suite, t, x, delta, h, path, slot)?;
    Ok(field.evaluate(t - delta, x + h, path)? - predicted)
}

#[derive(Debug, Clone)]
pub struct OrderEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
}

/// Least-squares slope of `log|R|` against `log(delta + h^2)` over the scan
/// lattice. Points with `|R| <= 1e-13` are treated as exact and excluded;
/// fewer than 4 usable points is an insufficient-data error.
pub fn order_estimate(
    field: &RandomField,
    suite: &CoefficientSuite,
    t: f64,
    x: f64,
    path: &SamplePath,
    lattice: &ScanLattice,
    slot: TimeSlot,
) -> Result<OrderEstimate> {
    let pts = lattice.points();
    if pts.is_empty() {
        return Err(PathwiseError::Parameter("order_estimate: empty lattice".into()));
    }
    let min_delta = lattice.deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_delta < 4.0 * path.dt() - 1e-12 {
        return Err(PathwiseError::Parameter(
            "order_estimate: smallest delta must span at least 4 path steps".into(),
        ));
    }
    let rs: Vec<Result<(f64, f64)>> = par_map_slice(&pts, |&(delta, h)| {
        let r = remainder(field, suite, t, x, delta, h, path, slot)?;
        Ok((delta + h * h, r))
    });
    // fixed-order sequential fit regardless of evaluation schedule
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in rs {
        let (scale, rem) = r?;
        if rem.abs() > 1e-13 {
            xs.push(scale.ln());
            ys.push(rem.abs().ln());
        }
    }
    fit_line(&xs, &ys)
}

/// Least-squares line through `(xs, ys)`; requires at least 4 points.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<OrderEstimate> {
    let n = xs.len();
    if n < 4 {
        return Err(PathwiseError::InsufficientData(format!(
            "order fit needs at least 4 usable points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(OrderEstimate { slope, intercept: my - slope * mx, n_points: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{FCoeff, GSuite};
    use crate::fields::markov_field_scalar;
    use crate::paths::sample_path;
    use crate::rng::child_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use std::sync::Arc;

    fn v1(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }
    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn gsuite_scalar(value: f64, dw: f64, dx: f64, dy: f64, dz: f64) -> GSuite {
        GSuite { value: v1(value), dw: m1(dw), dx: m1(dx), dy: v1(dy), dz: m1(dz) }
    }

    fn level_scalar(b: f64) -> SecondLevel {
        SecondLevel { increment: v1(b), strat_matrix: m1(0.5 * b * b), levy: m1(0.0) }
    }

    fn zero_g_suite() -> CoefficientSuite {
        CoefficientSuite {
            f: FCoeff {
                eval: Arc::new(|_, _, _: &SamplePath, _, _: &DVector<f64>, _: &DMatrix<f64>| 0.0),
                dgamma: Arc::new(|_, _, _: &SamplePath, _, _: &DVector<f64>, _: &DMatrix<f64>| m1(0.0)),
            },
            g: Arc::new(|_, _, _: &SamplePath, _, _: &DVector<f64>| gsuite_scalar(0.0, 0.0, 0.0, 0.0, 0.0)),
            d: 1,
            dprime: 1,
        }
    }

    fn gradient_g_suite(sigma: f64) -> CoefficientSuite {
        CoefficientSuite {
            f: FCoeff {
                eval: Arc::new(|_, _, _: &SamplePath, _, _: &DVector<f64>, _: &DMatrix<f64>| 0.0),
                dgamma: Arc::new(|_, _, _: &SamplePath, _, _: &DVector<f64>, _: &DMatrix<f64>| m1(0.0)),
            },
            g: Arc::new(move |_, _, _: &SamplePath, _, z: &DVector<f64>| {
                gsuite_scalar(sigma * z[0], 0.0, 0.0, 0.0, sigma)
            }),
            d: 1,
            dprime: 1,
        }
    }

    #[test]
    fn classical_taylor_polynomial() {
        // g = 0: T = -a delta + z h + gamma h^2 / 2.
        let jet = Jet { y: 0.0, a: 1.0, z: v1(2.0), gamma: m1(6.0) };
        let g = gsuite_scalar(0.0, 0.0, 0.0, 0.0, 0.0);
        let t = taylor_operator(&g, &jet, &level_scalar(0.37), 0.1, &v1(0.2)).unwrap();
        assert_abs_diff_eq!(t, -0.1 + 0.4 + 0.12, epsilon = 1e-14);
    }

    #[test]
    fn gradient_noise_hand_value() {
        // g = z with z = 3, B = 0.05: T = -0.05 + 0.3 - 0.15 + 2 * 0.05^2.
        let jet = Jet { y: 2.0, a: 5.0, z: v1(3.0), gamma: m1(4.0) };
        let g = gsuite_scalar(3.0, 0.0, 0.0, 0.0, 1.0);
        let t = taylor_operator(&g, &jet, &level_scalar(0.05), 0.01, &v1(0.1)).unwrap();
        assert_abs_diff_eq!(t, 0.105, epsilon = 1e-14);
    }

    #[test]
    fn rejects_asymmetric_gamma_and_bad_delta() {
        let jet = Jet {
            y: 0.0,
            a: 0.0,
            z: DVector::zeros(2),
            gamma: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]),
        };
        let g = GSuite::zero(2, 2);
        let level = SecondLevel {
            increment: DVector::zeros(2),
            strat_matrix: DMatrix::zeros(2, 2),
            levy: DMatrix::zeros(2, 2),
        };
        assert!(taylor_operator(&g, &jet, &level, 0.1, &DVector::zeros(2)).is_err());
        let jet_ok = Jet { y: 0.0, a: 0.0, z: DVector::zeros(2), gamma: DMatrix::zeros(2, 2) };
        assert!(taylor_operator(&g, &jet_ok, &level, -0.1, &DVector::zeros(2)).is_err());
    }

    fn random_case(rng: &mut impl Rng, d: usize, dp: usize) -> (GSuite, Jet, SecondLevel, f64, DVector<f64>) {
        let mat = |r: usize, c: usize, rng: &mut dyn FnMut() -> f64| {
            DMatrix::from_fn(r, c, |_, _| rng())
        };
        let mut draw = {
            let mut r = rng.random::<u64>();
            move || {
                // cheap deterministic uniform in [-2, 2)
                r = r.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((r >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            }
        };
        let gsuite = GSuite {
            value: DVector::from_fn(d, |_, _| draw()),
            dw: mat(d, d, &mut draw),
            dx: mat(dp, d, &mut draw),
            dy: DVector::from_fn(d, |_, _| draw()),
            dz: mat(dp, d, &mut draw),
        };
        let m = mat(dp, dp, &mut draw);
        let jet = Jet {
            y: draw(),
            a: draw(),
            z: DVector::from_fn(dp, |_, _| draw()),
            gamma: 0.5 * (&m + m.transpose()),
        };
        let la = mat(d, d, &mut draw);
        let level = SecondLevel {
            increment: DVector::from_fn(d, |_, _| 0.3 * draw()),
            strat_matrix: DMatrix::zeros(d, d),
            levy: 0.5 * (&la - la.transpose()),
        };
        let delta = 0.01 + 0.5 * (draw() + 2.0) / 4.0;
        let h = DVector::from_fn(dp, |_, _| 0.3 * draw());
        (gsuite, jet, level, delta, h)
    }

    #[test]
    fn reduced_and_unreduced_agree_on_random_inputs() {
        let mut rng = child_rng(42, "taylor-forms", 0);
        for i in 0..10_000 {
            let d = 1 + (i % 3);
            let dp = 1 + (i % 2);
            let (g, jet, level, delta, h) = random_case(&mut rng, d, dp);
            let a = taylor_operator_unreduced(&g, &jet, &level, delta, &h).unwrap();
            let b = taylor_operator_reduced(&g, &jet, &level, delta, &h).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                "case {i}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn symmetric_levy_shift_is_linear_in_bracket() {
        // Adding a symmetric S to the Levy slot moves the unreduced form by
        // exactly bracket : S / 2.
        let mut rng = child_rng(43, "taylor-linear", 0);
        for i in 0..200 {
            let d = 1 + (i % 3);
            let (g, jet, level, delta, h) = random_case(&mut rng, d, d);
            let (s_raw, ..) = random_case(&mut rng, d, d);
            let s = 0.5 * (&s_raw.dw + s_raw.dw.transpose());
            let mut shifted = level.clone();
            shifted.levy = &level.levy + &s;
            let base = taylor_operator_unreduced(&g, &jet, &level, delta, &h).unwrap();
            let moved = taylor_operator_unreduced(&g, &jet, &shifted, delta, &h).unwrap();
            let mixed = &g.dx + &jet.z * g.dy.transpose() + &jet.gamma * &g.dz;
            let bracket = &g.dw + &g.value * g.dy.transpose() + mixed.transpose() * &g.dz;
            let expect = 0.5 * bracket.component_mul(&s).sum();
            assert_abs_diff_eq!(moved - base, expect, epsilon = 1e-10 * expect.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn y_shift_invariance_when_dy_zero(
            y in -3.0f64..3.0, c in -5.0f64..5.0, z in -2.0f64..2.0,
            gm in -2.0f64..2.0, b in -0.5f64..0.5, dzg in -2.0f64..2.0,
        ) {
            let g = gsuite_scalar(1.3 + 0.7 * z, 0.4, -0.2, 0.0, dzg);
            let level = level_scalar(b);
            let jet = Jet { y, a: 0.3, z: v1(z), gamma: m1(gm) };
            let jet2 = Jet { y: y + c, ..jet.clone() };
            let t1 = taylor_operator(&g, &jet, &level, 0.05, &v1(0.1)).unwrap();
            let t2 = taylor_operator(&g, &jet2, &level, 0.05, &v1(0.1)).unwrap();
            prop_assert!((t1 - t2).abs() < 1e-12);
        }

        #[test]
        fn zero_g_is_polynomial(
            a in -2.0f64..2.0, z in -2.0f64..2.0, gm in -2.0f64..2.0,
            delta in 0.01f64..0.5, h in -0.5f64..0.5, b in -0.5f64..0.5,
        ) {
            let g = gsuite_scalar(0.0, 0.0, 0.0, 0.0, 0.0);
            let jet = Jet { y: 0.0, a, z: v1(z), gamma: m1(gm) };
            let t = taylor_operator(&g, &jet, &level_scalar(b), delta, &v1(h)).unwrap();
            let poly = -a * delta + z * h + 0.5 * gm * h * h;
            prop_assert!((t - poly).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_constant_and_quadratic() {
        let p = sample_path(1, 1.0, 256, 1).unwrap();
        let suite = zero_g_suite();
        let constant = markov_field_scalar(
            |_, _, _| 4.2,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        let v = expand(&constant, &suite, 0.5, 1.0, 0.25, 0.3, &p, TimeSlot::PathTime).unwrap();
        assert_abs_diff_eq!(v, 4.2, epsilon = 1e-14);

        let square = markov_field_scalar(
            |_, x, _| x * x,
            |_, _, _| 0.0,
            |_, x, _| 2.0 * x,
            |_, _, _| 2.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        let x = 1.3;
        let h = 0.4;
        let v = expand(&square, &suite, 0.5, x, 0.25, h, &p, TimeSlot::PathTime).unwrap();
        assert_abs_diff_eq!(v, (x + h) * (x + h), epsilon = 1e-13);
        assert!(expand(&square, &suite, 0.5, x, 0.75, h, &p, TimeSlot::PathTime).is_err());
    }

    #[test]
    fn expand_transported_quadratic_exact() {
        // u(t, x) = psi(x + B_t) with psi quadratic and g = z: the prediction
        // is exact on grid times.
        let p = sample_path(1, 1.0, 512, 7).unwrap();
        let psi = |v: f64| 1.0 + 2.0 * v + 1.5 * v * v;
        let dpsi = |v: f64| 2.0 + 3.0 * v;
        let u = markov_field_scalar(
            move |_, x, b| psi(x + b),
            |_, _, _| 0.0,
            move |_, x, b| dpsi(x + b),
            |_, _, _| 3.0,
            move |_, x, b| dpsi(x + b),
            |_, _, _| 3.0,
            |_, _, _| 3.0,
        );
        let suite = gradient_g_suite(1.0);
        for (delta, h) in [(0.25, 0.3), (0.125, -0.4), (0.5, 0.0)] {
            let r = remainder(&u, &suite, 0.75, 0.2, delta, h, &p, TimeSlot::PathTime).unwrap();
            assert!(r.abs() <= 1e-10, "remainder {r}");
        }
    }

    #[test]
    fn cubic_remainder_and_slope() {
        let p = sample_path(1, 1.0, 1 << 10, 3).unwrap();
        let suite = zero_g_suite();
        let cube = markov_field_scalar(
            |_, x, _| x * x * x,
            |_, _, _| 0.0,
            |_, x, _| 3.0 * x * x,
            |_, x, _| 6.0 * x,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        let h = 0.2;
        let r = remainder(&cube, &suite, 0.5, 0.7, 0.25, h, &p, TimeSlot::PathTime).unwrap();
        assert_abs_diff_eq!(r, h * h * h, epsilon = 1e-12);

        // R = h^3 exactly, so scanning h at negligible delta fits the pure
        // (h^2)^{3/2} scale.
        let lattice = ScanLattice {
            deltas: vec![1.0 / 256.0],
            hs: vec![-0.7, -0.6, -0.5, 0.4, 0.5, 0.6, 0.7],
            pairing: Pairing::Product,
        };
        let est = order_estimate(&cube, &suite, 0.5, 0.7, &p, &lattice, TimeSlot::PathTime).unwrap();
        assert_abs_diff_eq!(est.slope, 1.5, epsilon = 0.05);
    }

    #[test]
    fn exact_quadratic_yields_insufficient_data() {
        let p = sample_path(1, 1.0, 1 << 10, 3).unwrap();
        let suite = zero_g_suite();
        let square = markov_field_scalar(
            |_, x, _| x * x,
            |_, _, _| 0.0,
            |_, x, _| 2.0 * x,
            |_, _, _| 2.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        let lattice = ScanLattice::matched(vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
        let err = order_estimate(&square, &suite, 0.5, 0.7, &p, &lattice, TimeSlot::PathTime);
        assert!(matches!(err, Err(PathwiseError::InsufficientData(_))));
    }

    #[test]
    fn order_estimate_guards_mesh() {
        let p = sample_path(1, 1.0, 16, 0).unwrap();
        let suite = zero_g_suite();
        let cube = markov_field_scalar(
            |_, x, _| x * x * x,
            |_, _, _| 0.0,
            |_, x, _| 3.0 * x * x,
            |_, x, _| 6.0 * x,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        // min delta = 1/8 but dt = 1/16 -> only 2 steps
        let lattice = ScanLattice::matched(vec![0.125]);
        assert!(order_estimate(&cube, &suite, 0.5, 0.0, &p, &lattice, TimeSlot::PathTime).is_err());
    }

    #[test]
    fn transported_bump_order_light_sweep() {
        // Gaussian bump transported along the path, g = z: the remainder
        // order lands at or above 1.2 for most seeds even on a light lattice.
        let deltas: Vec<f64> = (6..=10).map(|k| 1.0 / (1u64 << k) as f64).collect();
        let lattice = ScanLattice::matched(deltas);
        let mut hits = 0;
        for seed in 0..5 {
            let p = sample_path(1, 1.0, 1 << 14, seed).unwrap();
            let u = markov_field_scalar(
                |_, x, b| (-(x + b) * (x + b)).exp(),
                |_, _, _| 0.0,
                |_, x, b| -2.0 * (x + b) * (-(x + b) * (x + b)).exp(),
                |_, x, b| (4.0 * (x + b) * (x + b) - 2.0) * (-(x + b) * (x + b)).exp(),
                |_, x, b| -2.0 * (x + b) * (-(x + b) * (x + b)).exp(),
                |_, x, b| (4.0 * (x + b) * (x + b) - 2.0) * (-(x + b) * (x + b)).exp(),
                |_, x, b| (4.0 * (x + b) * (x + b) - 2.0) * (-(x + b) * (x + b)).exp(),
            );
            let suite = gradient_g_suite(1.0);
            let est = order_estimate(&u, &suite, 0.5, 0.3, &p, &lattice, TimeSlot::Drift).unwrap();
            if est.slope >= 1.2 {
                hits += 1;
            }
        }
        assert!(hits >= 4, "only {hits}/5 seeds reached slope 1.2");
    }
}
