//! Jet-based viscosity machinery: membership of second-order jets in the
//! backward parabolic jet sets, pointwise sub/supersolution verdicts, and the
//! classical-vs-viscosity consistency experiment.
//!
//! Membership is decided on a finite backward scan: for a super-jet the excess
//! `u(t - delta, x + h) - u(t, x) - T` must stay below `tau` after scaling by
//! `(delta + h^2)^(1 + alpha)`; sub-jets flip the sign. With the operator's
//! `-a delta` slot this orients the sets so that lowering the time slot keeps
//! super-jet membership and raising it keeps sub-jet membership; subsolution
//! verdicts over member super-jets then reduce, for smooth fields, to
//! `a - f <= 0` at the canonical jet.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::CoefficientSuite;
use crate::error::{PathwiseError, Result};
use crate::exec::par_map_slice;
use crate::fields::RandomField;
use crate::paths::{sample_path, SamplePath};
use crate::taylor::{taylor_operator, Jet, ScanLattice};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetSide {
    /// `J^{2,+}`: expansion dominates the field from above.
    SuperJet,
    /// `J^{2,-}`: expansion stays below the field.
    SubJet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionSide {
    Subsolution,
    Supersolution,
}

impl SolutionSide {
    /// Subsolutions are tested against super-jets and vice versa.
    pub fn jet_side(self) -> JetSide {
        match self {
            SolutionSide::Subsolution => JetSide::SuperJet,
            SolutionSide::Supersolution => JetSide::SubJet,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolutionSide::Subsolution => "sub",
            SolutionSide::Supersolution => "super",
        }
    }
}

#[derive(Debug, Clone)]
pub struct JetVerdict {
    pub jet: Jet,
    pub side: JetSide,
    /// Max over the lattice of the side-signed scaled excess.
    pub ratio_max: f64,
    pub member: bool,
    pub alpha: f64,
}

pub const DEFAULT_ALPHA: f64 = 0.25;
pub const DEFAULT_TAU: f64 = 0.05;

/// The field's own second-order jet at `(t, x)`.
pub fn canonical_jet(field: &RandomField, t: f64, x: f64, path: &SamplePath) -> Result<Jet> {
    let s = field.suite(t, x, path)?;
    Ok(Jet {
        y: s.value,
        a: s.dt,
        z: DVector::from_element(1, s.dx),
        gamma: DMatrix::from_element(1, 1, s.dxx),
    })
}

/// Decide membership of `jet` in the side's jet set at `(t, x)` by scanning
/// the lattice of backward offsets.
#[allow(clippy::too_many_arguments)]
pub fn jet_membership(
    u: &RandomField,
    suite: &CoefficientSuite,
    t: f64,
    x: f64,
    path: &SamplePath,
    jet: &Jet,
    side: JetSide,
    alpha: f64,
    lattice: &ScanLattice,
    tau: f64,
) -> Result<JetVerdict> {
    let u_here = u.evaluate(t, x, path)?;
    let xv = DVector::from_element(1, x);
    let gsuite = suite.g_suite(t, &xv, path, u_here, &jet.z)?;
    let sign = match side {
        JetSide::SuperJet => 1.0,
        JetSide::SubJet => -1.0,
    };
    let mut ratio_max = f64::NEG_INFINITY;
    for &delta in &lattice.deltas {
        if delta > t {
            return Err(PathwiseError::Domain(format!(
                "jet_membership: delta {delta} exceeds anchor time {t}"
            )));
        }
        let level = path.second_level(t - delta, t)?;
        for &c in &lattice.hs {
            let h = match lattice.pairing {
                crate::taylor::Pairing::Product => c,
                crate::taylor::Pairing::MatchedScale => c * delta.sqrt(),
            };
            let hv = DVector::from_element(1, h);
            let op = taylor_operator(&gsuite, jet, &level, delta, &hv)?;
            let excess = u.evaluate(t - delta, x + h, path)? - u_here - op;
            let scale = (delta + h * h).powf(1.0 + alpha);
            ratio_max = ratio_max.max(sign * excess / scale);
        }
    }
    Ok(JetVerdict { jet: jet.clone(), side, ratio_max, member: ratio_max <= tau, alpha })
}

/// Outcome of testing one jet inside [`check_point`].
#[derive(Debug, Clone)]
pub struct JetCheck {
    pub verdict: JetVerdict,
    pub a_minus_f: f64,
    /// Jets that fail membership are skipped, not failed.
    pub skipped: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct PointVerdict {
    pub side: SolutionSide,
    pub pass: bool,
    /// Worst signed violation of the side's inequality among member jets.
    pub worst_margin: f64,
    pub checks: Vec<JetCheck>,
}

/// Pointwise Definition-3.4 style verdict: every member jet of the matching
/// side must satisfy `a - f <= tol` (subsolution) or `a - f >= -tol`
/// (supersolution).
#[allow(clippy::too_many_arguments)]
pub fn check_point(
    u: &RandomField,
    suite: &CoefficientSuite,
    t: f64,
    x: f64,
    path: &SamplePath,
    jets: &[Jet],
    side: SolutionSide,
    alpha: f64,
    tau: f64,
    f_tol: f64,
    lattice: &ScanLattice,
) -> Result<PointVerdict> {
    let u_here = u.evaluate(t, x, path)?;
    let xv = DVector::from_element(1, x);
    let mut checks = Vec::with_capacity(jets.len());
    let mut pass = true;
    let mut worst_margin: f64 = 0.0;
    for jet in jets {
        let verdict = jet_membership(u, suite, t, x, path, jet, side.jet_side(), alpha, lattice, tau)?;
        let a_minus_f =
            jet.a - suite.f_eval(t, &xv, path, u_here, &jet.z, &jet.gamma);
        if !verdict.member {
            checks.push(JetCheck { verdict, a_minus_f, skipped: true, pass: true });
            continue;
        }
        let violation = match side {
            SolutionSide::Subsolution => a_minus_f,
            SolutionSide::Supersolution => -a_minus_f,
        };
        let ok = violation <= f_tol;
        pass &= ok;
        worst_margin = worst_margin.max(violation);
        checks.push(JetCheck { verdict, a_minus_f, skipped: false, pass: ok });
    }
    Ok(PointVerdict { side, pass, worst_margin, checks })
}

#[derive(Debug, Clone)]
pub struct ConsistencyConfig {
    pub alpha: f64,
    pub tau: f64,
    pub f_tol: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub deltas: Vec<f64>,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        ConsistencyConfig {
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            f_tol: 1e-9,
            horizon: 1.0,
            // The scaled remainder at a canonical jet behaves like
            // |Z|^3 delta^alpha with Z standard normal, so staying inside
            // tau across thousands of samples needs a small delta.
            n_steps: 1 << 16,
            deltas: vec![1.0 / 65536.0],
        }
    }
}

/// One CSV row of the consistency experiment.
#[derive(Debug, Clone)]
pub struct ConsistencyRow {
    pub seed: u64,
    pub t: f64,
    pub x: f64,
    pub side: SolutionSide,
    pub a_minus_f: f64,
    pub ratio_max: f64,
    pub member: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub max_abs_a_minus_f: f64,
    pub sub_pass: bool,
    pub super_pass: bool,
    pub pass: bool,
}

/// Check a claimed classical solution at every `(t, x)` sample over a sweep of
/// path seeds: canonical jets must be members of both jet sets and satisfy
/// both solution-side inequalities. The report is always produced; `pass`
/// summarizes it.
pub fn consistency_experiment(
    u: &RandomField,
    suite: &CoefficientSuite,
    points: &[(f64, f64)],
    seeds: &[u64],
    cfg: &ConsistencyConfig,
) -> Result<ConsistencyReport> {
    let lattice = ScanLattice::matched(cfg.deltas.clone());
    let per_seed: Vec<Result<Vec<ConsistencyRow>>> = par_map_slice(seeds, |&seed| {
        let path = sample_path(1, cfg.horizon, cfg.n_steps, seed)?;
        let mut rows = Vec::with_capacity(points.len() * 2);
        for &(t, x) in points {
            let jet = canonical_jet(u, t, x, &path)?;
            for side in [SolutionSide::Subsolution, SolutionSide::Supersolution] {
                let v = check_point(
                    u, suite, t, x, &path, std::slice::from_ref(&jet), side, cfg.alpha, cfg.tau,
                    cfg.f_tol, &lattice,
                )?;
                let c = &v.checks[0];
                rows.push(ConsistencyRow {
                    seed,
                    t,
                    x,
                    side,
                    a_minus_f: c.a_minus_f,
                    ratio_max: c.verdict.ratio_max,
                    member: c.verdict.member,
                    pass: v.pass && c.verdict.member,
                });
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    let max_abs_a_minus_f = rows.iter().map(|r| r.a_minus_f.abs()).fold(0.0, f64::max);
    let sub_pass = rows.iter().filter(|r| r.side == SolutionSide::Subsolution).all(|r| r.pass);
    let super_pass = rows.iter().filter(|r| r.side == SolutionSide::Supersolution).all(|r| r.pass);
    Ok(ConsistencyReport { rows, max_abs_a_minus_f, sub_pass, super_pass, pass: sub_pass && super_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{FCoeff, GSuite};
    use crate::fields::markov_field_scalar;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn gsuite_scalar(value: f64, dz: f64) -> GSuite {
        GSuite {
            value: DVector::from_element(1, value),
            dw: m1(0.0),
            dx: m1(0.0),
            dy: DVector::from_element(1, 0.0),
            dz: m1(dz),
        }
    }

    /// f = c_gamma * gamma (0 for the trivial equation), g = sigma z.
    fn suite_heat(c_gamma: f64, sigma: f64) -> CoefficientSuite {
        CoefficientSuite {
            f: FCoeff {
                eval: Arc::new(move |_, _, _: &SamplePath, _, _: &DVector<f64>, gm: &DMatrix<f64>| {
                    c_gamma * gm[(0, 0)]
                }),
                dgamma: Arc::new(move |_, _, _: &SamplePath, _, _: &DVector<f64>, _: &DMatrix<f64>| {
                    m1(c_gamma)
                }),
            },
            g: Arc::new(move |_, _, _: &SamplePath, _, z: &DVector<f64>| {
                gsuite_scalar(sigma * z[0], sigma)
            }),
            d: 1,
            dprime: 1,
        }
    }

    fn square_field() -> RandomField {
        markov_field_scalar(
            |_, x, _| x * x,
            |_, _, _| 0.0,
            |_, x, _| 2.0 * x,
            |_, _, _| 2.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        )
    }

    fn default_lattice() -> ScanLattice {
        ScanLattice::matched(vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0])
    }

    #[test]
    fn canonical_jets_of_simple_fields() {
        let p = sample_path(1, 1.0, 256, 3).unwrap();
        let j = canonical_jet(&square_field(), 0.5, 1.5, &p).unwrap();
        assert_eq!((j.a, j.z[0], j.gamma[(0, 0)], j.y), (0.0, 3.0, 2.0, 2.25));

        let bsq = markov_field_scalar(
            |_, _, b| b * b,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, b| 2.0 * b,
            |_, _, _| 0.0,
            |_, _, _| 2.0,
        );
        let j = canonical_jet(&bsq, 0.5, 0.0, &p).unwrap();
        let b = p.value_at(0.5).unwrap()[0];
        assert_eq!((j.a, j.z[0], j.gamma[(0, 0)]), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(j.y, b * b, epsilon = 1e-15);

        let lin = markov_field_scalar(
            |t, x, _| t + x,
            |_, _, _| 1.0,
            |_, _, _| 1.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        let j = canonical_jet(&lin, 0.5, 1.0, &p).unwrap();
        assert_eq!((j.a, j.z[0], j.gamma[(0, 0)], j.y), (1.0, 1.0, 0.0, 1.5));
    }

    #[test]
    fn canonical_jet_requires_suite() {
        let p = sample_path(1, 1.0, 8, 0).unwrap();
        let f = crate::fields::sampled_field(
            crate::fields::SampledField::new(
                vec![0.0],
                vec![0.0],
                vec![1.0],
                crate::fields::Interpolation::Nearest,
            )
            .unwrap(),
        );
        assert!(canonical_jet(&f, 0.0, 0.0, &p).is_err());
    }

    #[test]
    fn quadratic_equality_case_both_sides() {
        let p = sample_path(1, 1.0, 1 << 10, 1).unwrap();
        let u = square_field();
        let suite = suite_heat(0.0, 0.0);
        let jet = canonical_jet(&u, 0.5, 0.7, &p).unwrap();
        for side in [JetSide::SuperJet, JetSide::SubJet] {
            let v = jet_membership(&u, &suite, 0.5, 0.7, &p, &jet, side, 0.25, &default_lattice(), DEFAULT_TAU)
                .unwrap();
            assert!(v.member);
            assert!(v.ratio_max.abs() <= 1e-9, "ratio {}", v.ratio_max);
        }
    }

    #[test]
    fn steeper_paraboloid_membership_is_one_sided() {
        let p = sample_path(1, 1.0, 1 << 10, 1).unwrap();
        let u = square_field();
        let suite = suite_heat(0.0, 0.0);
        let mut jet = canonical_jet(&u, 0.5, 0.7, &p).unwrap();
        jet.gamma = m1(4.0);
        let sup = jet_membership(&u, &suite, 0.5, 0.7, &p, &jet, JetSide::SuperJet, 0.25, &default_lattice(), DEFAULT_TAU)
            .unwrap();
        assert!(sup.member);
        let sub = jet_membership(&u, &suite, 0.5, 0.7, &p, &jet, JetSide::SubJet, 0.25, &default_lattice(), DEFAULT_TAU)
            .unwrap();
        assert!(!sub.member, "sub ratio {}", sub.ratio_max);
    }

    #[test]
    fn time_slot_orientation() {
        // Lowering the time slot keeps super-jet membership (the -a delta term
        // raises the prediction); raising it breaks membership once
        // eps * delta^(-alpha) clears tau.
        let p = sample_path(1, 1.0, 1 << 10, 1).unwrap();
        let u = square_field();
        let suite = suite_heat(0.0, 0.0);
        let eps = 0.5;
        let mut lower = canonical_jet(&u, 0.5, 0.7, &p).unwrap();
        lower.a -= eps;
        let v = jet_membership(&u, &suite, 0.5, 0.7, &p, &lower, JetSide::SuperJet, 0.25, &default_lattice(), DEFAULT_TAU)
            .unwrap();
        assert!(v.member);
        let mut upper = canonical_jet(&u, 0.5, 0.7, &p).unwrap();
        upper.a += eps;
        let v = jet_membership(&u, &suite, 0.5, 0.7, &p, &upper, JetSide::SuperJet, 0.25, &default_lattice(), DEFAULT_TAU)
            .unwrap();
        assert!(!v.member, "ratio {}", v.ratio_max);
        // mirrored for the sub-jet side
        let v = jet_membership(&u, &suite, 0.5, 0.7, &p, &upper, JetSide::SubJet, 0.25, &default_lattice(), DEFAULT_TAU)
            .unwrap();
        assert!(v.member);
    }

    #[test]
    fn membership_rejects_delta_beyond_anchor() {
        let p = sample_path(1, 1.0, 1 << 8, 1).unwrap();
        let u = square_field();
        let suite = suite_heat(0.0, 0.0);
        let jet = canonical_jet(&u, 0.125, 0.0, &p).unwrap();
        let lattice = ScanLattice::matched(vec![0.25]);
        assert!(jet_membership(&u, &suite, 0.125, 0.0, &p, &jet, JetSide::SuperJet, 0.25, &lattice, DEFAULT_TAU)
            .is_err());
    }

    /// `u(t, x) = N(x + sigma B_t; 0, v0 + t)` solves `du = u_xx/2 dt + sigma u_x o dB`.
    fn transported_heat(sigma: f64, v0: f64) -> RandomField {
        let dens = move |t: f64, x: f64, b: f64| {
            let v = v0 + t;
            let xi = x + sigma * b;
            (-xi * xi / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        };
        let d1 = move |t: f64, x: f64, b: f64| {
            let v = v0 + t;
            -(x + sigma * b) / v * dens(t, x, b)
        };
        let d2 = move |t: f64, x: f64, b: f64| {
            let v = v0 + t;
            let xi = x + sigma * b;
            (xi * xi / (v * v) - 1.0 / v) * dens(t, x, b)
        };
        markov_field_scalar(
            dens,
            // path-time derivative is psi_t = psi_xx / 2, independent of sigma
            move |t, x, b| 0.5 * d2(t, x, b),
            d1,
            d2,
            move |t, x, b| sigma * d1(t, x, b),
            move |t, x, b| sigma * d2(t, x, b),
            move |t, x, b| {
                let v = v0 + t;
                let xi = x + sigma * b;
                sigma * sigma * (xi * xi / (v * v) - 1.0 / v) * dens(t, x, b)
            },
        )
    }

    #[test]
    fn heat_solution_passes_both_sides() {
        let p = sample_path(1, 1.0, 1 << 10, 5).unwrap();
        let u = transported_heat(0.0, 0.5);
        let suite = suite_heat(0.5, 0.0);
        let jet = canonical_jet(&u, 0.5, 0.3, &p).unwrap();
        for side in [SolutionSide::Subsolution, SolutionSide::Supersolution] {
            let v = check_point(&u, &suite, 0.5, 0.3, &p, std::slice::from_ref(&jet), side, 0.25, DEFAULT_TAU, 1e-9, &default_lattice())
                .unwrap();
            assert!(v.pass);
            assert!(!v.checks[0].skipped);
            assert!(v.checks[0].a_minus_f.abs() <= 1e-12);
        }
    }

    #[test]
    fn strictly_decreasing_field_is_subsolution_only() {
        let p = sample_path(1, 1.0, 1 << 10, 5).unwrap();
        let u = markov_field_scalar(
            |t, _, _| -t,
            |_, _, _| -1.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        let suite = suite_heat(0.0, 0.0);
        let jet = canonical_jet(&u, 0.5, 0.0, &p).unwrap();
        let sub = check_point(&u, &suite, 0.5, 0.0, &p, std::slice::from_ref(&jet), SolutionSide::Subsolution, 0.25, DEFAULT_TAU, 1e-9, &default_lattice())
            .unwrap();
        assert!(sub.pass);
        let sup = check_point(&u, &suite, 0.5, 0.0, &p, std::slice::from_ref(&jet), SolutionSide::Supersolution, 0.25, DEFAULT_TAU, 1e-9, &default_lattice())
            .unwrap();
        assert!(!sup.pass);
        assert_abs_diff_eq!(sup.worst_margin, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_member_jets_are_skipped_not_failed() {
        let p = sample_path(1, 1.0, 1 << 10, 5).unwrap();
        let u = square_field();
        let suite = suite_heat(0.0, 0.0);
        let mut bad = canonical_jet(&u, 0.5, 0.7, &p).unwrap();
        bad.a += 5.0; // far outside the super-jet set
        let v = check_point(&u, &suite, 0.5, 0.7, &p, std::slice::from_ref(&bad), SolutionSide::Subsolution, 0.25, DEFAULT_TAU, 1e-9, &default_lattice())
            .unwrap();
        assert!(v.pass);
        assert!(v.checks[0].skipped);
    }

    #[test]
    fn transported_heat_random_points_twenty_seeds() {
        let suite = suite_heat(0.5, 1.0);
        let u = transported_heat(1.0, 0.5);
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let p = sample_path(1, 1.0, 1 << 10, seed).unwrap();
            let mut rng = crate::rng::child_rng(seed, "visc-points", 0);
            use rand::Rng;
            for _ in 0..5 {
                let k = 4 + (rng.random::<u64>() % ((1 << 10) - 4)) as usize;
                let t = k as f64 * p.dt();
                let x = rng.random::<f64>() * 4.0 - 2.0;
                let jet = canonical_jet(&u, t, x, &p).unwrap();
                let xv = DVector::from_element(1, x);
                let f = suite.f_eval(t, &xv, &p, jet.y, &jet.z, &jet.gamma);
                worst = worst.max((jet.a - f).abs());
            }
        }
        assert!(worst <= 1e-9, "worst |a - f| = {worst}");
    }

    #[test]
    fn consistency_report_pass_and_corruption() {
        let suite = suite_heat(0.5, 1.0);
        let u = transported_heat(1.0, 2.0);
        let points: Vec<(f64, f64)> = vec![(0.25, -0.5), (0.5, 0.0), (0.75, 0.8)];
        let seeds: Vec<u64> = (0..4).collect();
        let cfg = ConsistencyConfig::default();
        let report = consistency_experiment(&u, &suite, &points, &seeds, &cfg).unwrap();
        assert!(report.pass, "max |a-f| = {}", report.max_abs_a_minus_f);
        assert!(report.max_abs_a_minus_f <= 1e-9);
        assert_eq!(report.rows.len(), points.len() * seeds.len() * 2);

        // corrupt by +0.1 t: the subsolution side must fail with margin ~ 0.1
        let v0 = 2.0;
        let corrupted = {
            let dens = move |t: f64, x: f64, b: f64| {
                let v = v0 + t;
                let xi = x + b;
                (-xi * xi / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
            };
            let d1 = move |t: f64, x: f64, b: f64| -(x + b) / (v0 + t) * dens(t, x, b);
            let d2 = move |t: f64, x: f64, b: f64| {
                let v = v0 + t;
                let xi = x + b;
                (xi * xi / (v * v) - 1.0 / v) * dens(t, x, b)
            };
            markov_field_scalar(
                move |t, x, b| dens(t, x, b) + 0.1 * t,
                move |t, x, b| 0.5 * d2(t, x, b) + 0.1,
                d1,
                d2,
                d1,
                d2,
                d2,
            )
        };
        let report = consistency_experiment(&corrupted, &suite, &points, &seeds, &cfg).unwrap();
        assert!(!report.pass);
        let sub_margin = report
            .rows
            .iter()
            .filter(|r| r.side == SolutionSide::Subsolution)
            .map(|r| r.a_minus_f)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(sub_margin, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn transported_family_over_sigmas() {
        for &sigma in &[0.0, 0.5, 1.0] {
            let suite = suite_heat(0.5, sigma);
            let u = transported_heat(sigma, 2.0);
            let points = vec![(0.5, 0.0), (0.25, 1.0)];
            let seeds = vec![0, 1];
            let report =
                consistency_experiment(&u, &suite, &points, &seeds, &ConsistencyConfig::default())
                    .unwrap();
            assert!(report.pass, "sigma {sigma}: max |a-f| = {}", report.max_abs_a_minus_f);
        }
    }

    #[test]
    fn change_of_variable_preserves_verdicts() {
        use crate::coefficients::{change_of_variable, transform_field};
        let suite = suite_heat(0.5, 1.0);
        let u = transported_heat(1.0, 0.5);
        let lam: Arc<crate::coefficients::LambdaFn> = Arc::new(|_| 1.0);
        let tsuite = change_of_variable(&suite, Arc::clone(&lam));
        let tu = transform_field(&u, lam).unwrap();
        let p = sample_path(1, 1.0, 1 << 10, 9).unwrap();
        for &(t, x) in &[(0.5, 0.0), (0.25, -0.7)] {
            for (field, coeffs) in [(&u, &suite), (&tu, &tsuite)] {
                let jet = canonical_jet(field, t, x, &p).unwrap();
                for side in [SolutionSide::Subsolution, SolutionSide::Supersolution] {
                    let v = check_point(field, coeffs, t, x, &p, std::slice::from_ref(&jet), side, 0.25, DEFAULT_TAU, 1e-8, &default_lattice())
                        .unwrap();
                    assert!(v.pass, "side {:?} at ({t}, {x})", side);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gamma_monotonicity_super_jet(eps in 0.0f64..3.0, x in -1.0f64..1.0) {
            let p = sample_path(1, 1.0, 1 << 9, 2).unwrap();
            let u = square_field();
            let suite = suite_heat(0.0, 0.0);
            let base = canonical_jet(&u, 0.5, x, &p).unwrap();
            let mut fat = base.clone();
            fat.gamma = m1(base.gamma[(0, 0)] + eps);
            let lattice = ScanLattice::matched(vec![1.0 / 64.0, 1.0 / 128.0]);
            let v0 = jet_membership(&u, &suite, 0.5, x, &p, &base, JetSide::SuperJet, 0.25, &lattice, DEFAULT_TAU).unwrap();
            let v1 = jet_membership(&u, &suite, 0.5, x, &p, &fat, JetSide::SuperJet, 0.25, &lattice, DEFAULT_TAU).unwrap();
            prop_assert!(v0.member);
            prop_assert!(v1.member);
            prop_assert!(v1.ratio_max <= v0.ratio_max + 1e-12);
        }
    }
}
