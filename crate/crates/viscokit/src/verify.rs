//! Verification suites: finite-difference oracles, structural identities
//! and homogeneous load cases with known limits.
//!
//! Every suite is deterministic for a given seed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibrate::{self, ExperimentDataset, FitTemplate, TestMode};
use crate::driver::{run_sweep, DriverSettings, LoadProgram, ProgramMode, Signal, TimeSeries};
use crate::error::Result;
use crate::hyperelastic::{EquilibriumBranch, Volumetric};
use crate::kinbridge::{coaxial_pair, hencky_split_residual, invariants_equivalence, MultiplicativePair};
use crate::par::{self, Execution};
use crate::projections::{projection_l, projection_q, projection_q_inv};
use crate::spectral::{decompose, spectral_decompose};
use crate::strains::{check_coercivity, generalized_strain, ScaleFunction};
use crate::tensor::{SymTensor2, Tensor2, Tensor4, Vec3, VOIGT};
use crate::viscoelastic::{
    evaluate_point, force_tangent, integrate_branch, respond, thermodynamic_force, Formulation, LocalSettings, Material,
    MaxwellBranch, PointState, PressureInput,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
    Holds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            bound: Bound::AtMost,
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            bound: Bound::AtLeast,
            passed: value >= limit,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: f64::from(u8::from(ok)),
            limit: 1.0,
            bound: Bound::Holds,
            passed: ok,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        match self.bound {
            Bound::AtMost => write!(f, "[{tag}] {}: {:.3e} <= {:.1e}", self.name, self.value, self.limit),
            Bound::AtLeast => write!(f, "[{tag}] {}: {:.4e} >= {:.4e}", self.name, self.value, self.limit),
            Bound::Holds => write!(f, "[{tag}] {}", self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(f, "{tag} {}", self.suite)?;
        for c in &self.checks {
            writeln!(f, "    {c}")?;
        }
        Ok(())
    }
}

type SuiteFn = fn(u64) -> Result<Vec<Check>>;

/// Suite name, acceptance criterion number, entry point.
pub const SUITES: [(&str, usize, SuiteFn); 13] = [
    ("projections", 1, suite_projections),
    ("lemma", 2, suite_lemma),
    ("reduction", 3, suite_reduction),
    ("relaxation", 4, suite_relaxation),
    ("tangent", 5, suite_tangent),
    ("newton", 6, suite_newton),
    ("dissipation", 7, suite_dissipation),
    ("order", 8, suite_order),
    ("creep", 9, suite_creep),
    ("shear", 10, suite_shear),
    ("kinbridge", 11, suite_kinbridge),
    ("strains", 12, suite_strains),
    ("calibration", 13, suite_calibration),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    let &(suite, _, run) = SUITES.iter().find(|s| s.0 == name)?;
    let checks = match run(seed) {
        Ok(c) => c,
        Err(e) => vec![Check::holds(format!("suite aborted: {e}"), false)],
    };
    Some(SuiteReport { suite, checks })
}

/// Runs the suites whose names contain `filter` (all when `None`).
pub fn run_suites(seed: u64, filter: Option<&str>, exec: Execution) -> Vec<SuiteReport> {
    let names: Vec<&str> = suite_names().into_iter().filter(|n| filter.is_none_or(|f| n.contains(f))).collect();
    par::map(exec, &names, |n| run_suite(n, seed).expect("listed suite"))
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream)
}

fn rotation(r: &mut impl Rng) -> Tensor2 {
    let (u1, u2, u3): (f64, f64, f64) = (r.gen(), r.gen(), r.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos());
    Tensor2([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

fn rotated_diag(rot: &Tensor2, d: Vec3) -> SymTensor2 {
    SymTensor2::diag(d).push_forward(rot)
}

fn random_sym(r: &mut impl Rng, amp: f64) -> SymTensor2 {
    SymTensor2::from_voigt(std::array::from_fn(|_| amp * r.gen_range(-1.0..1.0)))
}

fn random_spd_near_identity(r: &mut impl Rng, amp: f64) -> SymTensor2 {
    decompose(&random_sym(r, amp)).map(f64::exp)
}

fn random_f(r: &mut impl Rng, amp: f64) -> Tensor2 {
    loop {
        let mut f = Tensor2::identity();
        for i in 0..3 {
            for j in 0..3 {
                f[(i, j)] += amp * r.gen_range(-1.0..1.0);
            }
        }
        if f.det() > 0.3 {
            return f;
        }
    }
}

fn isochoric(f: &Tensor2) -> Tensor2 {
    *f * f.det().powf(-1.0 / 3.0)
}

/// Right stretch of an SPD tensor, used as a deformation gradient.
fn stretch_of(c: &SymTensor2) -> Tensor2 {
    decompose(c).map(f64::sqrt).to_tensor2()
}

fn random_family(r: &mut impl Rng, which: usize) -> ScaleFunction {
    match which % 5 {
        0 => ScaleFunction::SethHill { m: r.gen_range(-1.0..3.0) },
        1 => ScaleFunction::CurnierRakotomanana {
            m: r.gen_range(0.0..3.0),
            n: r.gen_range(0.0..3.0),
        },
        2 => ScaleFunction::BazantItskov { m: r.gen_range(0.1..3.0) },
        3 => ScaleFunction::CurnierZysset { m: r.gen_range(-2.0..2.0) },
        _ => ScaleFunction::Darijani {
            m: r.gen_range(0.1..2.0),
            n: r.gen_range(0.1..2.0),
        },
    }
}

fn unit_basis(k: usize) -> SymTensor2 {
    let (i, j) = VOIGT[k];
    let mut a = [[0.0; 3]; 3];
    a[i][j] = 1.0;
    a[j][i] = 1.0;
    SymTensor2::new(a)
}

/// Derivative at zero of a tensor-valued map by Ridders' extrapolation of
/// central differences, starting from step `h0`.
fn ridders(g: impl Fn(f64) -> Result<SymTensor2>, h0: f64) -> Result<SymTensor2> {
    const SHRINK: f64 = 1.4;
    const DEPTH: usize = 14;
    let central = |h: f64| -> Result<SymTensor2> { Ok((g(h)? - g(-h)?) * (1.0 / (2.0 * h))) };
    let mut h = h0;
    let mut prev: Vec<SymTensor2> = vec![central(h)?];
    let mut best = prev[0];
    let mut err = f64::INFINITY;
    for _ in 1..DEPTH {
        h /= SHRINK;
        let mut row = vec![central(h)?];
        let mut fac = SHRINK * SHRINK;
        for j in 1..=prev.len() {
            let next = (row[j - 1] * fac - prev[j - 1]) * (1.0 / (fac - 1.0));
            fac *= SHRINK * SHRINK;
            let e = (next - row[j - 1]).norm().max((next - prev[j - 1]).norm());
            if e <= err {
                err = e;
                best = next;
            }
            row.push(next);
        }
        let last = prev.len();
        if (row[last] - prev[last - 1]).norm() >= 2.0 * err {
            break;
        }
        prev = row;
    }
    Ok(best)
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// A projection sample: SPD tensor with prescribed spectrum structure.
#[derive(Clone, Debug)]
pub struct ProjectionSample {
    pub c: SymTensor2,
    pub kind: &'static str,
    pub condition: f64,
    pub families: [ScaleFunction; 5],
}

/// At least 200 SPD tensors with condition numbers in `[1, 1e6]`; every
/// fourth is engineered with exactly or nearly repeated eigenvalues.
pub fn projection_samples(seed: u64) -> Vec<ProjectionSample> {
    let mut r = rng(seed, 1);
    let max_log = 1e6f64.ln();
    (0..240)
        .map(|k| {
            let rot = rotation(&mut r);
            let centre = r.gen_range(-0.5..0.5);
            let span = match k % 12 {
                0 => max_log,
                1 => 0.0,
                _ => r.gen_range(0.0..max_log),
            };
            let mid = r.gen_range(0.0..1.0);
            let (kind, logs) = match k % 8 {
                1 => ("triple", [0.0, 0.0, 0.0]),
                3 => ("double", [0.5 * span, 0.5 * span, -0.5 * span]),
                5 => ("near-double", [0.5 * span, -0.5 * span + 1e-7, -0.5 * span]),
                7 => ("near-triple", [1e-8, 0.0, -1e-8]),
                _ => ("distinct", [0.5 * span, (mid - 0.5) * span, -0.5 * span]),
            };
            let eig = logs.map(|l: f64| (centre + l).exp());
            let c = rotated_diag(&rot, eig);
            let condition = eig.iter().cloned().fold(0.0, f64::max) / eig.iter().cloned().fold(f64::INFINITY, f64::min);
            ProjectionSample {
                c,
                kind,
                condition,
                families: std::array::from_fn(|w| random_family(&mut r, w)),
            }
        })
        .collect()
}

fn suite_projections(seed: u64) -> Result<Vec<Check>> {
    let samples = projection_samples(seed);
    let mut r = rng(seed, 2);
    let (mut worst_q, mut worst_l) = (0.0_f64, 0.0_f64);
    let (mut where_q, mut where_l) = (String::new(), String::new());
    for s in &samples {
        let dec = spectral_decompose(&s.c)?;
        let h = 0.05 * dec.eigenvalues[2];
        for f in &s.families {
            let q = projection_q(&dec, f);
            let l = projection_l(&dec, f);
            let t = random_sym(&mut r, 1.0);
            let tl = l.left_ddot2(&t);
            let (mut eq, mut nq, mut el, mut nl) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..6 {
                let d = unit_basis(k);
                let fd_q = ridders(|e| generalized_strain(&(s.c + d * e), f), h)? * 2.0;
                let an_q = q.ddot2(&d);
                eq += (fd_q - an_q).norm().powi(2);
                nq += an_q.norm().powi(2);
                let fd_l = ridders(|e| Ok(projection_q(&spectral_decompose(&(s.c + d * e))?, f).left_ddot2(&t)), h)? * 2.0;
                let an_l = tl.ddot2(&d);
                el += (fd_l - an_l).norm().powi(2);
                nl += an_l.norm().powi(2);
            }
            let rq = relative(eq.sqrt(), nq.sqrt());
            let rl = relative(el.sqrt(), nl.sqrt());
            if rq > worst_q {
                worst_q = rq;
                where_q = format!("{f} {} cond {:.1e}", s.kind, s.condition);
            }
            if rl > worst_l {
                worst_l = rl;
                where_l = format!("{f} {} cond {:.1e}", s.kind, s.condition);
            }
        }
    }
    let conds = samples.iter().map(|s| s.condition).fold(0.0, f64::max);
    let engineered = samples.iter().filter(|s| s.kind != "distinct").count();
    Ok(vec![
        Check::at_least("sample count", samples.len() as f64, 200.0),
        Check::at_least("largest condition number", conds, 0.999e6),
        Check::at_least("engineered repeated-eigenvalue samples", engineered as f64, 40.0),
        Check::at_most(format!("Q vs FD of strain, worst rel. error ({where_q})"), worst_q, 1e-5),
        Check::at_most(format!("T:L vs FD of T:Q, worst rel. error ({where_l})"), worst_l, 1e-4),
    ])
}

fn suite_lemma(seed: u64) -> Result<Vec<Check>> {
    let (mut worst, mut worst_mild) = (0.0_f64, 0.0_f64);
    let mut at = String::new();
    let id = Tensor4::identity_sym();
    for s in projection_samples(seed) {
        let dec = spectral_decompose(&s.c)?;
        for f in &s.families {
            let q = projection_q(&dec, f);
            let qi = projection_q_inv(&dec, f);
            let e = (q.ddot4(&qi) - id.clone()).norm().max((qi.ddot4(&q) - id.clone()).norm());
            if s.condition <= 1e2 {
                worst_mild = worst_mild.max(e);
            }
            if e > worst {
                worst = e;
                at = format!("{f} {} cond {:.1e}", s.kind, s.condition);
            }
        }
    }
    Ok(vec![
        Check::at_most(format!("|Q:Q^-1 - I| worst ({at})"), worst, 1e-12),
        Check::at_most("|Q:Q^-1 - I| worst over samples with cond(C) <= 1e2", worst_mild, 1e-12),
    ])
}

fn suite_reduction(seed: u64) -> Result<Vec<Check>> {
    let sh2 = ScaleFunction::SethHill { m: 2.0 };
    let (mut dq, mut dl) = (0.0_f64, 0.0_f64);
    for s in projection_samples(seed) {
        let dec = spectral_decompose(&s.c)?;
        dq = dq.max((projection_q(&dec, &sh2) - Tensor4::identity_sym()).norm());
        dl = dl.max(projection_l(&dec, &sh2).max_abs());
    }

    let mut r = rng(seed, 3);
    let (mu_eq, mu, tau) = (2.0e5, 3.0e5, 0.8);
    let material = Material::new(
        Volumetric::Incompressible,
        vec![EquilibriumBranch::new(mu_eq, sh2)],
        vec![MaxwellBranch::with_tau(mu, tau, sh2)],
    );
    let dir = random_f(&mut r, 0.3) - Tensor2::identity();
    let dt = tau / 10.0;
    let ramp = 100;
    let f_at = |n: usize| isochoric(&(Tensor2::identity() + dir * (n.min(ramp) as f64 / ramp as f64)));
    let c_tilde = |n: usize| {
        let f = f_at(n);
        f.right_cauchy_green() * f.det().powf(-2.0 / 3.0)
    };
    let a = dt / (2.0 * tau);
    let tight = LocalSettings {
        tol_relative: 1e-14,
        tol_absolute: 1e-15,
        max_iterations: 5,
    };
    let mut state = PointState::initial(&material);
    let mut gamma_ref = SymTensor2::identity();
    let (mut dg, mut dqn) = (0.0_f64, 0.0_f64);
    for n in 1..=500 {
        gamma_ref = (gamma_ref * (1.0 - a) + (c_tilde(n - 1) + c_tilde(n)) * a) * (1.0 / (1.0 + a));
        let out = evaluate_point(&material, &f_at(n), PressureInput::Given(0.0), &state, dt, &tight)?;
        dg = dg.max((out.state.gamma[0] - gamma_ref).max_abs());
        dqn = dqn.max((out.q[0] - (c_tilde(n) - gamma_ref) * mu).max_abs() / mu);
        state = out.state;
    }
    Ok(vec![
        Check::at_most("SH(2): |Q - I| over projection samples", dq, 1e-14),
        Check::at_most("SH(2): max |L| over projection samples", dl, 1e-14),
        Check::at_most("500-step history: max |Gamma - closed form|", dg, 1e-12),
        Check::at_most("500-step history: max |Q - closed form| / mu", dqn, 1e-12),
    ])
}

fn random_material(r: &mut impl Rng, maxwell: usize, formulation: Formulation) -> Material {
    let neq = r.gen_range(1..=2);
    let equilibrium = (0..neq)
        .map(|_| {
            let w = r.gen_range(0..5);
            EquilibriumBranch::new(r.gen_range(0.5..2.0), random_family(r, w))
        })
        .collect();
    let maxwell = (0..maxwell)
        .map(|_| {
            let w = r.gen_range(0..5);
            MaxwellBranch::with_tau(r.gen_range(0.5..2.0), r.gen_range(0.5..5.0), random_family(r, w))
        })
        .collect();
    let mut m = Material::new(Volumetric::Quad { kappa: 50.0 }, equilibrium, maxwell);
    m.formulation = formulation;
    m
}

fn hold(material: &Material, f: &Tensor2) -> Result<(f64, usize)> {
    let tau_min = material.maxwell.iter().filter_map(MaxwellBranch::tau).fold(f64::INFINITY, f64::min);
    let tau_max = material.maxwell.iter().filter_map(MaxwellBranch::tau).fold(0.0, f64::max);
    let dt = tau_min / 10.0;
    let steps = (50.0 * tau_max / dt).ceil() as usize;
    let mut state = PointState::initial(material);
    let mut s_neq = SymTensor2::zero();
    for _ in 0..steps {
        let out = evaluate_point(material, f, PressureInput::Constitutive, &state, dt, &LocalSettings::default())?;
        s_neq = out.s_neq;
        state = out.state;
    }
    let mu_max = material.maxwell.iter().map(|b| b.mu).fold(0.0, f64::max);
    Ok((s_neq.norm() / mu_max, steps))
}

fn suite_relaxation(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed, 4);
    let mut cases = Vec::new();
    for k in 0..10 {
        let m = 1 + k % 3;
        let gibbs = random_material(&mut r, m, Formulation::Gibbs);
        let mut helm = gibbs.clone();
        helm.formulation = Formulation::Helmholtz;
        let f = random_f(&mut r, 0.2);
        cases.push((gibbs, isochoric(&f)));
        cases.push((helm, f));
    }
    let results = par::map(Execution::Parallel, &cases, |(m, f)| hold(m, f));
    let (mut g, mut h) = (0.0_f64, 0.0_f64);
    for ((m, _), res) in cases.iter().zip(results) {
        let (v, _) = res?;
        match m.formulation {
            Formulation::Gibbs => g = g.max(v),
            Formulation::Helmholtz => h = h.max(v),
        }
    }
    Ok(vec![
        Check::at_most("Gibbs: max |S_neq_iso| / max mu after 50 max tau", g, 1e-6),
        Check::at_most("Helmholtz: max |S_neq| / max mu after 50 max tau", h, 1e-6),
    ])
}

fn stress_fd(material: &Material, c: &SymTensor2, gammas: &[SymTensor2], p: PressureInput) -> Result<(f64, f64)> {
    let an = respond(material, &stretch_of(c), gammas, p)?.tangent;
    let h = 0.05 * decompose(c).eigenvalues[2];
    let (mut e, mut n) = (0.0, 0.0);
    for k in 0..6 {
        let d = unit_basis(k);
        let fd = ridders(|t| Ok(respond(material, &stretch_of(&(*c + d * t)), gammas, p)?.s), h)? * 2.0;
        let a = an.ddot2(&d);
        e += (fd - a).norm().powi(2);
        n += a.norm().powi(2);
    }
    Ok((e.sqrt(), n.sqrt()))
}

fn suite_tangent(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed, 5);
    let (mut wc, mut wh, mut wk) = (0.0_f64, 0.0_f64, 0.0_f64);
    for k in 0..60 {
        let material = random_material(&mut r, 1 + k % 2, Formulation::Gibbs);
        let c = random_f(&mut r, 0.3).right_cauchy_green();
        let gammas: Vec<_> = material.maxwell.iter().map(|_| random_spd_near_identity(&mut r, 0.3)).collect();
        let (e, n) = stress_fd(&material, &c, &gammas, PressureInput::Given(0.0))?;
        wc = wc.max(relative(e, n));
        let mut helm = material.clone();
        helm.formulation = Formulation::Helmholtz;
        let (e, n) = stress_fd(&helm, &c, &gammas, PressureInput::Constitutive)?;
        wh = wh.max(relative(e, n));

        for (b, g) in material.maxwell.iter().zip(&gammas) {
            let e_total = generalized_strain(&c, &b.strain)?;
            let kt = force_tangent(b, &e_total, g)?;
            let h = 0.05 * decompose(g).eigenvalues[2];
            let (mut e, mut n) = (0.0, 0.0);
            for j in 0..6 {
                let d = unit_basis(j);
                let fd = ridders(|t| thermodynamic_force(b, &e_total, &(*g + d * t)), h)? * 2.0;
                let a = kt.ddot2(&d);
                e += (fd - a).norm().powi(2);
                n += a.norm().powi(2);
            }
            wk = wk.max(relative(e.sqrt(), n.sqrt()));
        }
    }
    Ok(vec![
        Check::at_most("C_iso (frozen state) vs FD of S_iso", wc, 1e-5),
        Check::at_most("Helmholtz C vs FD of S", wh, 1e-5),
        Check::at_most("K vs FD of Q", wk, 1e-5),
    ])
}

fn suite_newton(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed, 6);
    let settings = LocalSettings::default();
    let (mut failures, mut worst_iter, mut worst_c, mut multi) = (0usize, 0usize, 0.0_f64, 0usize);
    let samples = 300;
    for k in 0..samples {
        let w = r.gen_range(0..5);
        let b = MaxwellBranch::with_tau(r.gen_range(0.5..2.0), r.gen_range(0.2..5.0), random_family(&mut r, w));
        let tau = b.tau().expect("isotropic");
        let drive_n = isochoric(&random_f(&mut r, 0.25)).right_cauchy_green();
        let step = isochoric(&random_f(&mut r, 0.1));
        let drive_np1 = drive_n.pull_back(&step);
        let gamma_n = if k % 3 == 0 { SymTensor2::identity() } else { random_spd_near_identity(&mut r, 0.2) };
        match integrate_branch(&b, 0, &gamma_n, &drive_n, &drive_np1, tau / 10.0, &settings) {
            Ok((_, hist)) => {
                worst_iter = worst_iter.max(hist.len() - 1);
                if hist.len() > 2 {
                    multi += 1;
                }
                for pair in hist.windows(2) {
                    if pair[0] > 0.0 {
                        worst_c = worst_c.max(pair[1] / (pair[0] * pair[0]));
                    }
                }
            }
            Err(_) => failures += 1,
        }
    }
    Ok(vec![
        Check::at_most("failed local solves", failures as f64, 0.0),
        Check::at_most("max iterations", worst_iter as f64, settings.max_iterations as f64),
        Check::at_least("samples needing two or more iterations", multi as f64, 1.0),
        Check::at_most("max r_{k+1} / r_k^2", worst_c, 1e6),
    ])
}

fn smooth_path(r: &mut impl Rng) -> impl Fn(f64) -> Tensor2 {
    let modes: Vec<(Tensor2, f64, f64)> = (0..3)
        .map(|_| (random_f(r, 0.12) - Tensor2::identity(), r.gen_range(0.2..2.0), r.gen_range(0.0..6.28)))
        .collect();
    move |t| {
        let mut f = Tensor2::identity();
        for (a, w, p) in &modes {
            f = f + *a * ((w * t + p).sin() - p.sin());
        }
        f
    }
}

fn suite_dissipation(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed, 7);
    let mut worst = f64::INFINITY;
    let mut worst_discrete = f64::INFINITY;
    let mut steps = 0usize;
    let settings = LocalSettings {
        max_iterations: 25,
        ..LocalSettings::default()
    };
    for k in 0..100 {
        let formulation = if k % 2 == 0 { Formulation::Gibbs } else { Formulation::Helmholtz };
        let material = random_material(&mut r, 1 + k % 3, formulation);
        let path = smooth_path(&mut r);
        let mu = material.maxwell.iter().map(|b| b.mu).fold(0.0, f64::max);
        let dt = material.maxwell.iter().filter_map(MaxwellBranch::tau).fold(f64::INFINITY, f64::min) / 10.0;
        let mut state = PointState::initial(&material);
        for n in 1..=100 {
            let f = path(n as f64 * dt);
            let out = evaluate_point(&material, &f, PressureInput::Constitutive, &state, dt, &settings)?;
            for d in &out.dissipation {
                worst = worst.min(d / mu);
            }
            let drive_h = (state.drive + out.state.drive) * 0.5;
            for ((b, g0), g1) in material.maxwell.iter().zip(&state.gamma).zip(&out.state.gamma) {
                let e_h = generalized_strain(&drive_h, &b.strain)?;
                let q_h = thermodynamic_force(b, &e_h, &((*g0 + *g1) * 0.5))?;
                worst_discrete = worst_discrete.min(q_h.ddot(&(*g1 - *g0)) / (2.0 * dt * mu));
            }
            steps += 1;
            state = out.state;
        }
    }
    Ok(vec![
        Check::at_least("steps checked", steps as f64, 10_000.0),
        Check::at_least("min D / mu at step ends", worst, -1e-12),
        Check::at_least("min Q_h : dGamma / (2 dt mu) over steps", worst_discrete, -1e-12),
    ])
}

fn terminal_gamma(b: &MaxwellBranch, path: &dyn Fn(f64) -> SymTensor2, t_end: f64, steps: usize) -> Result<SymTensor2> {
    let settings = LocalSettings {
        tol_relative: 1e-15,
        tol_absolute: 1e-15,
        max_iterations: 20,
    };
    let dt = t_end / steps as f64;
    let mut g = SymTensor2::identity();
    let mut drive = path(0.0);
    for n in 1..=steps {
        let next = path(n as f64 * dt);
        g = integrate_branch(b, 0, &g, &drive, &next, dt, &settings)?.0;
        drive = next;
    }
    Ok(g)
}

fn suite_order(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed, 8);
    let mut checks = Vec::new();
    let cases = [
        ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 },
        ScaleFunction::Darijani { m: 0.8, n: 0.6 },
        ScaleFunction::SethHill { m: -1.0 },
    ];
    for f in cases {
        let tau = 1.0;
        let b = MaxwellBranch::with_tau(1.0, tau, f);
        let a = random_f(&mut r, 0.3) - Tensor2::identity();
        let path = move |t: f64| isochoric(&(Tensor2::identity() + a * (1.3 * t).sin())).right_cauchy_green();
        let t_end = 2.0 * tau;
        let reference = terminal_gamma(&b, &path, t_end, 20 * 64)?;
        let errs: Vec<f64> = [5usize, 10, 20]
            .iter()
            .map(|&k| terminal_gamma(&b, &path, t_end, 2 * k).map(|g| (g - reference).norm()))
            .collect::<Result<_>>()?;
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        checks.push(Check::at_least(format!("{f}: order tau/5 -> tau/10"), o1, 1.9));
        checks.push(Check::at_least(format!("{f}: order tau/10 -> tau/20"), o2, 1.9));
    }
    Ok(checks)
}

/// Axial stretch of the equilibrium branches under nominal uniaxial stress.
pub fn equilibrium_uniaxial_stretch(branches: &[EquilibriumBranch], nominal: f64) -> Result<f64> {
    let g = |l: f64| calibrate::nominal_stress_homogeneous(TestMode::Uniaxial, l, branches).map(|p| p - nominal);
    let (mut lo, mut hi) = (1.0, 2.0);
    while g(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(crate::Error::InvalidParameters("no equilibrium stretch below 1e3".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn creep_material(tau: f64) -> Material {
    let cr = ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 };
    let mut m = Material::new(
        Volumetric::Incompressible,
        vec![EquilibriumBranch::new(4.225e5, cr)],
        vec![MaxwellBranch::with_tau(4.225e5, tau, cr)],
    );
    m.density = 1.0e3;
    m
}

pub fn creep_program() -> LoadProgram {
    LoadProgram {
        mode: ProgramMode::StressControlUniaxial {
            traction: Signal::RampHold {
                peak: 1.737e6,
                ramp_time: 1.0,
            },
        },
        t_end: 200.0,
        dt: 0.05,
    }
}

fn suite_creep(_seed: u64) -> Result<Vec<Check>> {
    let taus = [0.5, 5.0, 50.0];
    let cases: Vec<_> = taus.iter().map(|&t| (creep_program(), creep_material(t))).collect();
    let runs = run_sweep(&cases, &DriverSettings::default(), Execution::Parallel);
    let lambda_eq = equilibrium_uniaxial_stretch(&cases[0].1.equilibrium, 1.737e6)?;
    let mu1 = 4.225e5;
    let mut checks = Vec::new();
    let mut distance: Vec<Vec<f64>> = Vec::new();
    for (tau, run) in taus.iter().zip(runs) {
        let run = run?;
        let stretch: Vec<f64> = run.records.iter().map(|r| r.f[(2, 2)]).collect();
        let monotone = stretch.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
        checks.push(Check::holds(format!("tau={tau}: axial stretch non-decreasing"), monotone));
        distance.push(
            run.records
                .iter()
                .filter(|r| r.t > 1.0 + 1e-9)
                .map(|r| (r.f[(2, 2)] - lambda_eq).abs() / lambda_eq)
                .collect(),
        );
        if *tau == 0.5 {
            let last = run.last().expect("non-empty run");
            checks.push(Check::at_most("tau=0.5: terminal |Q33| / mu1", last.q[0].get(2, 2).abs() / mu1, 1e-6));
            checks.push(Check::at_most(
                "tau=0.5: terminal stretch vs equilibrium solve (rel.)",
                (last.f[(2, 2)] - lambda_eq).abs() / lambda_eq,
                1e-3,
            ));
        }
    }
    let ordered = (0..distance[0].len()).all(|k| distance[0][k] < distance[1][k] && distance[1][k] < distance[2][k]);
    let terminal: Vec<String> = distance.iter().map(|d| format!("{:.2e}", d.last().copied().unwrap_or(f64::NAN))).collect();
    checks.push(Check::holds(
        format!("distance to equilibrium ordered by tau over the hold (terminal {})", terminal.join(" < ")),
        ordered,
    ));
    Ok(checks)
}

pub fn shear_material(m: f64, n: f64) -> Material {
    let mx = ScaleFunction::CurnierRakotomanana { m, n };
    let mut mat = Material::new(
        Volumetric::Incompressible,
        vec![
            EquilibriumBranch::new(1.75e5, ScaleFunction::CurnierRakotomanana { m: 2.0, n: 0.0 }),
            EquilibriumBranch::new(0.35e5, ScaleFunction::CurnierRakotomanana { m: 0.0, n: 0.0 }),
        ],
        vec![MaxwellBranch::with_tau(5.36e5, 17.5, mx)],
    );
    mat.density = 1.0e3;
    mat
}

pub fn shear_program(amplitude: f64) -> LoadProgram {
    let omega = 0.3;
    LoadProgram {
        mode: ProgramMode::CyclicShear { amplitude, omega },
        t_end: 6.0 * std::f64::consts::TAU / omega,
        dt: 0.1,
    }
}

fn interpolate(series: &TimeSeries, t: f64, value: impl Fn(&crate::driver::StepRecord) -> f64) -> f64 {
    let rec = &series.records;
    let k = rec.partition_point(|r| r.t < t);
    if k == 0 {
        let w = t / rec[0].t;
        return w * value(&rec[0]);
    }
    let (a, b) = (&rec[k - 1], &rec[k.min(rec.len() - 1)]);
    if b.t == a.t {
        return value(a);
    }
    let w = (t - a.t) / (b.t - a.t);
    (1.0 - w) * value(a) + w * value(b)
}

/// Steady-cycle metrics of a cyclic shear run: (peak force, drift, loop area).
pub fn cycle_metrics(series: &TimeSeries, period: f64) -> (f64, f64, f64) {
    let force = |r: &crate::driver::StepRecord| r.first_pk[(1, 2)];
    let gamma = |r: &crate::driver::StepRecord| r.f[(1, 2)];
    let t_end = series.last().map_or(0.0, |r| r.t);
    let start = t_end - period;
    let last: Vec<_> = series.records.iter().filter(|r| r.t >= start).collect();
    let peak = last.iter().map(|r| force(r).abs()).fold(0.0, f64::max);
    let drift = last
        .iter()
        .filter(|r| r.t - period >= series.records[0].t)
        .map(|r| (force(r) - interpolate(series, r.t - period, force)).abs())
        .fold(0.0, f64::max)
        / peak;
    let mut pts = vec![(interpolate(series, start, gamma), interpolate(series, start, force))];
    pts.extend(last.iter().map(|r| (gamma(r), force(r))));
    let area = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum::<f64>();
    (peak, drift, area)
}

fn suite_shear(_seed: u64) -> Result<Vec<Check>> {
    let params = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)];
    let program = shear_program(1.0);
    let period = std::f64::consts::TAU / 0.3;
    let cases: Vec<_> = params.iter().map(|&(m, n)| (program.clone(), shear_material(m, n))).collect();
    let runs = run_sweep(&cases, &DriverSettings::default(), Execution::Parallel);
    let mut checks = Vec::new();
    let mut peaks = Vec::new();
    for ((m, n), run) in params.iter().zip(runs) {
        let (peak, drift, area) = cycle_metrics(&run?, period);
        checks.push(Check::at_most(format!("CR({m},{n}): loop drift cycle 6 vs 5 / peak"), drift, 1e-2));
        checks.push(Check::at_least(format!("CR({m},{n}): loop area"), area, 0.0));
        peaks.push(peak);
    }
    checks.push(Check::holds(
        format!("peak force increases with m: {:.5e} < {:.5e} < {:.5e}", peaks[0], peaks[1], peaks[2]),
        peaks[0] < peaks[1] && peaks[1] < peaks[2],
    ));
    Ok(checks)
}

fn suite_kinbridge(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed, 11);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let p = MultiplicativePair::new(random_f(&mut r, 0.3), random_f(&mut r, 0.3))?;
        let (a, b) = invariants_equivalence(&p)?;
        for k in 0..3 {
            worst = worst.max((a[k] - b[k]).abs() / a[k].abs().max(1.0));
        }
    }
    let mut coaxial = 0.0_f64;
    for _ in 0..100 {
        let triad_rot = rotation(&mut r);
        let triad = std::array::from_fn(|a| [triad_rot[(0, a)], triad_rot[(1, a)], triad_rot[(2, a)]]);
        let s: Vec3 = std::array::from_fn(|_| r.gen_range(0.5..2.0));
        let v: Vec3 = std::array::from_fn(|_| r.gen_range(0.5..2.0));
        let p = coaxial_pair(&rotation(&mut r), s, v, &triad)?;
        coaxial = coaxial.max(hencky_split_residual(&p)?);
    }
    let mut skew = f64::INFINITY;
    for k in 0..20 {
        let theta = (20.0 + 2.5 * k as f64).to_radians();
        let (c, s) = (theta.cos(), theta.sin());
        let rot = Tensor2([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        let f = Tensor2::diag([1.6, 0.8, 1.0 / 1.28]);
        let fv = rotated_diag(&rot, [1.4, 0.75, 1.0]).to_tensor2();
        skew = skew.min(hencky_split_residual(&MultiplicativePair::new(f, fv)?)?);
    }
    Ok(vec![
        Check::at_most("invariant triples, worst rel. mismatch", worst, 1e-10),
        Check::at_most("coaxial Hencky split residual", coaxial, 1e-12),
        Check::at_least("non-coaxial counterexample residual (min)", skew, 1e-3),
    ])
}

fn suite_strains(_seed: u64) -> Result<Vec<Check>> {
    let mut fams = Vec::new();
    for m in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0] {
        fams.push(ScaleFunction::SethHill { m });
    }
    for m in [0.0, 0.5, 1.2, 2.0] {
        for n in [0.0, 0.5, 1.4, 2.0] {
            fams.push(ScaleFunction::CurnierRakotomanana { m, n });
        }
    }
    for m in [0.3, 1.0, 2.0, 3.0] {
        fams.push(ScaleFunction::BazantItskov { m });
    }
    for m in [-2.0, -1.0, 0.0, 0.5, 2.0] {
        fams.push(ScaleFunction::CurnierZysset { m });
    }
    for (m, n) in [(0.3, 0.3), (1.0, 0.5), (0.5, 2.0)] {
        fams.push(ScaleFunction::Darijani { m, n });
    }
    let (mut e1, mut d1) = (0.0_f64, 0.0_f64);
    let mut monotone = true;
    let mut coercivity_consistent = true;
    for f in &fams {
        let v = f.eval(1.0);
        e1 = e1.max(v.e.abs());
        d1 = d1.max((v.de - 1.0).abs());
        monotone &= (1..200).all(|k| f.eval(0.05 * k as f64).de > 0.0);
        coercivity_consistent &= check_coercivity(f, 10.0).consistent();
    }
    let mut sym = 0.0_f64;
    for f in [ScaleFunction::HENCKY, ScaleFunction::BazantItskov { m: 0.3 }, ScaleFunction::BazantItskov { m: 2.0 }] {
        for k in 1..100 {
            let l = 0.1 * k as f64;
            sym = sym.max((f.value(1.0 / l) + f.value(l)).abs() / f.value(l).abs().max(1.0));
        }
    }
    let sh_fails_lower = fams.iter().all(|f| match f {
        ScaleFunction::SethHill { m } if *m > 0.0 => !check_coercivity(f, 10.0).lower_sampled,
        ScaleFunction::SethHill { m } if *m < 0.0 => !check_coercivity(f, 10.0).upper_sampled,
        _ => true,
    });
    let full = |f: &ScaleFunction| {
        let c = check_coercivity(f, 10.0);
        c.lower_sampled && c.upper_sampled
    };
    let others_pass = [
        ScaleFunction::HENCKY,
        ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 },
        ScaleFunction::BazantItskov { m: 1.0 },
        ScaleFunction::Darijani { m: 1.0, n: 0.5 },
        ScaleFunction::CurnierZysset { m: 0.5 },
    ]
    .iter()
    .all(full);
    Ok(vec![
        Check::at_most("max |E(1)|", e1, 1e-12),
        Check::at_most("max |E'(1) - 1|", d1, 1e-12),
        Check::holds("E' > 0 on (0, 10)", monotone),
        Check::at_most("Hencky/BI: max |E(1/l) + E(l)|", sym, 1e-12),
        Check::holds("sampled coercivity matches the closed-form classification", coercivity_consistent),
        Check::holds("Seth-Hill m > 0 bounded as l -> 0, m < 0 bounded as l -> inf", sh_fails_lower),
        Check::holds("Hencky, CR(n>0,m>0), BI, DN, CZ(|m|<2) coercive at both ends", others_pass),
    ])
}

/// Two-branch CR model used for the calibration round trip.
pub fn calibration_truth() -> Vec<EquilibriumBranch> {
    vec![
        EquilibriumBranch::new(3.0e5, ScaleFunction::CurnierRakotomanana { m: 1.8, n: 0.6 }),
        EquilibriumBranch::new(1.2e5, ScaleFunction::CurnierRakotomanana { m: 0.4, n: 2.2 }),
    ]
}

pub fn calibration_data() -> Result<ExperimentDataset> {
    let grid: Vec<(TestMode, Vec<f64>)> = vec![
        (TestMode::Uniaxial, (0..12).map(|k| 1.1 + 0.4 * k as f64).collect()),
        (TestMode::Equibiaxial, (0..10).map(|k| 1.05 + 0.2 * k as f64).collect()),
        (TestMode::PureShear, (0..10).map(|k| 1.1 + 0.3 * k as f64).collect()),
    ];
    ExperimentDataset::synthetic(&calibration_truth(), &grid)
}

fn suite_calibration(seed: u64) -> Result<Vec<Check>> {
    let data = calibration_data()?;
    let mut template = FitTemplate::two_branch_cr(4e5);
    template.seed = seed;
    let fit = calibrate::fit(&data, &template, Execution::Parallel)?;
    let again = calibrate::fit(&data, &template, Execution::Parallel)?;
    let sequential = calibrate::fit(&data, &template, Execution::Sequential)?;
    let truth: Vec<[f64; 3]> = calibration_truth()
        .iter()
        .map(|b| {
            let p = b.strain.params();
            [b.mu, p[0], p[1]]
        })
        .collect();
    let mut got: Vec<[f64; 3]> = fit.parameters.iter().map(|p| [p.mu, p.m, p.n.unwrap_or(0.0)]).collect();
    got.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut worst = 0.0_f64;
    for (g, t) in got.iter().zip(&truth) {
        for k in 0..3 {
            worst = worst.max((g[k] - t[k]).abs() / t[k].abs());
        }
    }
    Ok(vec![
        Check::at_most("total chi2", fit.chi2_total, 1e-10),
        Check::at_most("worst relative parameter error", worst, 1e-2),
        Check::holds("identical result on repeat with the same seed", fit == again),
        Check::holds("sequential and parallel starts agree", fit == sequential),
    ])
}

/// Runs every suite and prints a report; returns whether all passed.
pub fn report(seed: u64, filter: Option<&str>, exec: Execution, out: &mut impl std::io::Write) -> std::io::Result<bool> {
    let reports = run_suites(seed, filter, exec);
    let mut ok = !reports.is_empty();
    for r in &reports {
        write!(out, "{r}")?;
        ok &= r.passed();
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    writeln!(out, "{passed}/{} suites passed", reports.len())?;
    Ok(ok)
}
