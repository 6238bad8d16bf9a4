//! Multi-branch viscoelastic constitutive update.
//!
//! Each Maxwell branch carries an SPD internal variable `Gamma` that evolves as
//!
//! ```text
//! dGamma/dt = 2 V^-1 : Q,    Q = T : Q^v(Gamma),    T = 2 mu (E(C~) - E^v(Gamma))
//! ```
//!
//! discretized with the implicit midpoint rule and solved by a local Newton
//! iteration per branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperelastic::{
    isochoric_push, volumetric_stress, volumetric_tangent, volumetric_tangent_fixed_p, EquilibriumBranch,
    Volumetric,
};
use crate::projections::{projection_l, projection_p, strain_kinematics, StrainKinematics};
use crate::spectral::{decompose, spectral_decompose, SpectralDecomp};
use crate::strains::ScaleFunction;
use crate::tensor::{solve_sym, SymTensor2, Tensor2, Tensor4};

/// Eigenvalue floor for internal variables.
pub const SPD_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Isochoric split with the pressure as independent variable.
    #[default]
    Gibbs,
    /// Total strains of `C`, no split.
    Helmholtz,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Viscosity {
    /// `V = 2 eta I`.
    Isotropic(f64),
    /// General SPD viscosity tensor, stored with its inverse.
    Anisotropic { v: Tensor4, v_inv: Tensor4 },
}

impl Viscosity {
    pub fn anisotropic(v: Tensor4) -> Result<Self> {
        let m = v.to_mandel();
        let eig = m.symmetric_eigenvalues();
        if v.major_asymmetry() > 1e-12 * v.max_abs() || eig.iter().any(|e| *e <= 0.0) {
            return Err(Error::InvalidParameters("viscosity tensor must be symmetric positive definite".into()));
        }
        let v_inv = v.inverse_sym().ok_or_else(|| Error::InvalidParameters("singular viscosity tensor".into()))?;
        Ok(Viscosity::Anisotropic { v, v_inv })
    }

    pub fn apply_inverse(&self, q: &SymTensor2) -> SymTensor2 {
        match self {
            Viscosity::Isotropic(eta) => *q * (0.5 / eta),
            Viscosity::Anisotropic { v_inv, .. } => v_inv.ddot2(q),
        }
    }

    pub fn inverse_tensor(&self) -> Tensor4 {
        match self {
            Viscosity::Isotropic(eta) => Tensor4::identity_sym() * (0.5 / eta),
            Viscosity::Anisotropic { v_inv, .. } => v_inv.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellBranch {
    pub mu: f64,
    pub viscosity: Viscosity,
    pub strain: ScaleFunction,
    pub viscous_strain: ScaleFunction,
}

impl MaxwellBranch {
    /// Isotropic branch with relaxation time `tau = eta / mu` and the same
    /// scale function for total and viscous strain.
    pub fn with_tau(mu: f64, tau: f64, strain: ScaleFunction) -> Self {
        MaxwellBranch {
            mu,
            viscosity: Viscosity::Isotropic(tau * mu),
            strain,
            viscous_strain: strain,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self.viscosity {
            Viscosity::Isotropic(eta) => Some(eta / self.mu),
            Viscosity::Anisotropic { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameters(format!("shear modulus must be positive, got {}", self.mu)));
        }
        if let Viscosity::Isotropic(eta) = self.viscosity {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::InvalidParameters(format!("viscosity must be positive, got {eta}")));
            }
        }
        self.strain.validate()?;
        self.viscous_strain.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub formulation: Formulation,
    pub volumetric: Volumetric,
    pub equilibrium: Vec<EquilibriumBranch>,
    pub maxwell: Vec<MaxwellBranch>,
    pub density: f64,
}

impl Material {
    pub fn new(volumetric: Volumetric, equilibrium: Vec<EquilibriumBranch>, maxwell: Vec<MaxwellBranch>) -> Self {
        Material {
            formulation: Formulation::Gibbs,
            volumetric,
            equilibrium,
            maxwell,
            density: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.equilibrium.is_empty() && self.maxwell.is_empty() {
            return Err(Error::InvalidParameters("material has no branches".into()));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::InvalidParameters(format!("density must be positive, got {}", self.density)));
        }
        self.volumetric.validate()?;
        self.equilibrium.iter().try_for_each(EquilibriumBranch::validate)?;
        self.maxwell.iter().try_for_each(MaxwellBranch::validate)
    }

    /// Sum of all shear moduli; used to scale stress residuals.
    pub fn reference_modulus(&self) -> f64 {
        let s: f64 = self.equilibrium.iter().map(|b| b.mu).sum::<f64>() + self.maxwell.iter().map(|b| b.mu).sum::<f64>();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalSettings {
    pub tol_relative: f64,
    pub tol_absolute: f64,
    pub max_iterations: usize,
}

impl Default for LocalSettings {
    fn default() -> Self {
        LocalSettings {
            tol_relative: 1e-10,
            tol_absolute: 1e-10,
            max_iterations: 5,
        }
    }
}

/// Internal state at the end of a converged step.
#[derive(Clone, Debug, PartialEq)]
pub struct PointState {
    pub gamma: Vec<SymTensor2>,
    pub pressure: f64,
    pub time: f64,
    /// Driving tensor of the step that produced this state
    /// (`C~` for the Gibbs form, `C` otherwise).
    pub drive: SymTensor2,
}

impl PointState {
    pub fn initial(material: &Material) -> Self {
        PointState {
            gamma: vec![SymTensor2::identity(); material.maxwell.len()],
            pressure: 0.0,
            time: 0.0,
            drive: SymTensor2::identity(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalReport {
    pub iterations: Vec<usize>,
    pub residuals: Vec<Vec<f64>>,
}

impl LocalReport {
    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }
}

/// Branch kinematics at a given `Gamma`.
struct ViscousEval {
    t: SymTensor2,
    q: SymTensor2,
    kin: StrainKinematics,
    dec: SpectralDecomp,
}

fn check_spd(g: &SymTensor2, branch: usize) -> Result<SpectralDecomp> {
    let d = decompose(g);
    if !g.is_finite() || d.eigenvalues[2] <= SPD_FLOOR || !d.eigenvalues[2].is_finite() {
        return Err(Error::StateNotSPD {
            branch,
            min_eigenvalue: d.eigenvalues[2],
        });
    }
    Ok(d)
}

fn viscous_eval(b: &MaxwellBranch, e_total: &SymTensor2, gamma: &SymTensor2, idx: usize, with_l: bool) -> Result<ViscousEval> {
    let dec = check_spd(gamma, idx)?;
    let kin = strain_kinematics(&dec, &b.viscous_strain, with_l);
    let t = (*e_total - kin.strain) * (2.0 * b.mu);
    let q = kin.q.left_ddot2(&t);
    Ok(ViscousEval { t, q, kin, dec })
}

fn force_tangent_of(b: &MaxwellBranch, ev: &ViscousEval) -> Tensor4 {
    let qv = &ev.kin.q;
    let lv = projection_l(&ev.dec, &b.viscous_strain);
    qv.transpose().ddot4(qv) * (-2.0 * b.mu) + lv.left_ddot2(&ev.t)
}

/// Thermodynamic force `Q = T : Q^v` of a branch at total strain `e_total`.
pub fn thermodynamic_force(b: &MaxwellBranch, e_total: &SymTensor2, gamma: &SymTensor2) -> Result<SymTensor2> {
    Ok(viscous_eval(b, e_total, gamma, 0, false)?.q)
}

/// `K = 2 dQ/dGamma`.
pub fn force_tangent(b: &MaxwellBranch, e_total: &SymTensor2, gamma: &SymTensor2) -> Result<Tensor4> {
    let ev = viscous_eval(b, e_total, gamma, 0, false)?;
    Ok(force_tangent_of(b, &ev))
}

/// Midpoint update of one branch. Returns `Gamma_{n+1}` and the residual history.
pub fn integrate_branch(
    b: &MaxwellBranch,
    idx: usize,
    gamma_n: &SymTensor2,
    drive_n: &SymTensor2,
    drive_np1: &SymTensor2,
    dt: f64,
    settings: &LocalSettings,
) -> Result<(SymTensor2, Vec<f64>)> {
    let drive_h = (*drive_n + *drive_np1) * 0.5;
    let e_total = strain_kinematics(&spectral_decompose(&drive_h)?, &b.strain, false).strain;
    let mut gamma = *gamma_n;
    let mut history = Vec::with_capacity(settings.max_iterations + 1);
    loop {
        let gh = (*gamma_n + gamma) * 0.5;
        let ev = viscous_eval(b, &e_total, &gh, idx, false)?;
        let r = gamma - *gamma_n - b.viscosity.apply_inverse(&ev.q) * (2.0 * dt);
        let rn = r.norm();
        if !rn.is_finite() {
            return Err(Error::LocalNewtonDiverged {
                branch: idx,
                iterations: history.len(),
                residual: rn,
            });
        }
        history.push(rn);
        if rn <= settings.tol_absolute || (history.len() > 1 && rn <= settings.tol_relative * history[0]) {
            check_spd(&gamma, idx)?;
            return Ok((gamma, history));
        }
        if history.len() > settings.max_iterations {
            return Err(Error::LocalNewtonDiverged {
                branch: idx,
                iterations: history.len() - 1,
                residual: rn,
            });
        }
        let k = force_tangent_of(b, &ev);
        let jac = Tensor4::identity_sym() - b.viscosity.inverse_tensor().ddot4(&k) * (0.5 * dt);
        let step = solve_sym(&jac, &(-r)).ok_or(Error::LocalNewtonDiverged {
            branch: idx,
            iterations: history.len(),
            residual: rn,
        })?;
        gamma += step;
        check_spd(&gamma, idx)?;
    }
}

/// Advances every Maxwell branch to the driving tensor `drive_np1`.
pub fn integrate_state(
    material: &Material,
    state_n: &PointState,
    drive_np1: &SymTensor2,
    dt: f64,
    settings: &LocalSettings,
) -> Result<(Vec<SymTensor2>, LocalReport)> {
    let mut gammas = Vec::with_capacity(material.maxwell.len());
    let mut report = LocalReport::default();
    for (idx, (b, g)) in material.maxwell.iter().zip(&state_n.gamma).enumerate() {
        let (g1, hist) = integrate_branch(b, idx, g, &state_n.drive, drive_np1, dt, settings)?;
        gammas.push(g1);
        report.iterations.push(hist.len() - 1);
        report.residuals.push(hist);
    }
    Ok((gammas, report))
}

/// How the pressure enters a point evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PressureInput {
    /// Prescribed pressure (incompressible multiplier or externally solved).
    Given(f64),
    /// `P = -psi'(J)` from the volumetric model.
    Constitutive,
}

#[derive(Clone, Debug)]
pub struct PointOutput {
    pub j: f64,
    pub c: SymTensor2,
    pub c_inv: SymTensor2,
    pub pressure: f64,
    /// Second Piola-Kirchhoff stress.
    pub s: SymTensor2,
    pub s_eq: SymTensor2,
    pub s_neq: SymTensor2,
    pub s_vol: SymTensor2,
    /// `2 dS/dC` with frozen internal variables; at fixed pressure when
    /// the pressure was given.
    pub tangent: Tensor4,
    /// Thermodynamic forces per Maxwell branch.
    pub q: Vec<SymTensor2>,
    /// Per-branch dissipation `Q : V^-1 : Q`.
    pub dissipation: Vec<f64>,
    /// Stored energy per unit reference volume, volumetric part included
    /// for constitutive pressures.
    pub free_energy: f64,
    pub state: PointState,
    pub report: LocalReport,
}

impl PointOutput {
    pub fn total_dissipation(&self) -> f64 {
        self.dissipation.iter().sum()
    }

    /// First Piola-Kirchhoff stress `F S`.
    pub fn first_pk(&self, f: &Tensor2) -> Tensor2 {
        f.mul_sym(&self.s)
    }

    /// Cauchy stress `J^-1 F S F^T`.
    pub fn cauchy(&self, f: &Tensor2) -> SymTensor2 {
        self.s.push_forward(f) * (1.0 / self.j)
    }
}

struct Accumulated {
    s_eq: SymTensor2,
    s_neq: SymTensor2,
    tangent: Tensor4,
    q: Vec<SymTensor2>,
    dissipation: Vec<f64>,
    energy: f64,
}

fn accumulate(material: &Material, drive: &SymTensor2, gammas: &[SymTensor2]) -> Result<Accumulated> {
    let dec = spectral_decompose(drive)?;
    let mut acc = Accumulated {
        s_eq: SymTensor2::zero(),
        s_neq: SymTensor2::zero(),
        tangent: Tensor4::zero(),
        q: Vec::with_capacity(gammas.len()),
        dissipation: Vec::with_capacity(gammas.len()),
        energy: 0.0,
    };
    for b in &material.equilibrium {
        let k = strain_kinematics(&dec, &b.strain, true);
        let t = b.conjugate_stress(&k.strain);
        acc.energy += b.energy(&k.strain);
        acc.s_eq += k.q.left_ddot2(&t);
        acc.tangent += &(k.q.transpose().ddot4(&b.stiffness()).ddot4(&k.q) + k.l.as_ref().unwrap().left_ddot2(&t));
    }
    for (idx, (b, g)) in material.maxwell.iter().zip(gammas).enumerate() {
        let k = strain_kinematics(&dec, &b.strain, true);
        let ev = viscous_eval(b, &k.strain, g, idx, false)?;
        acc.energy += ev.t.ddot(&ev.t) / (4.0 * b.mu);
        acc.s_neq += k.q.left_ddot2(&ev.t);
        acc.tangent += &(k.q.transpose().ddot4(&k.q) * (2.0 * b.mu) + k.l.as_ref().unwrap().left_ddot2(&ev.t));
        acc.dissipation.push(ev.q.ddot(&b.viscosity.apply_inverse(&ev.q)));
        acc.q.push(ev.q);
    }
    Ok(acc)
}

/// Driving tensor of the evolution equations at `F`.
pub fn drive_tensor(material: &Material, f: &Tensor2) -> Result<SymTensor2> {
    let j = f.det();
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::NonPositiveJacobian(j));
    }
    let c = f.right_cauchy_green();
    Ok(match material.formulation {
        Formulation::Gibbs => c * j.powf(-2.0 / 3.0),
        Formulation::Helmholtz => c,
    })
}

/// Stress and tangent at `F` for given internal variables, without
/// integrating the evolution equations.
pub fn respond(material: &Material, f: &Tensor2, gammas: &[SymTensor2], pressure: PressureInput) -> Result<PointOutput> {
    let j = f.det();
    let drive = drive_tensor(material, f)?;
    let c = f.right_cauchy_green();
    let c_inv = c.inverse().ok_or(Error::NonPositiveJacobian(j))?;
    let acc = accumulate(material, &drive, gammas)?;

    let (s_eq, s_neq, mut tangent) = match material.formulation {
        Formulation::Gibbs => {
            let p_proj = projection_p(&c, &c_inv);
            let j23 = j.powf(-2.0 / 3.0);
            let s_eq = p_proj.ddot2(&acc.s_eq) * j23;
            let s_neq = p_proj.ddot2(&acc.s_neq) * j23;
            let (_, t) = isochoric_push(&c, &c_inv, j, &(acc.s_eq + acc.s_neq), &(acc.tangent * j.powf(-4.0 / 3.0)));
            (s_eq, s_neq, t)
        }
        Formulation::Helmholtz => (acc.s_eq, acc.s_neq, acc.tangent),
    };

    let (p, energy) = match pressure {
        PressureInput::Given(p) => {
            tangent += &volumetric_tangent_fixed_p(j, p, &c_inv);
            (p, acc.energy)
        }
        PressureInput::Constitutive => {
            tangent += &volumetric_tangent(&material.volumetric, j, &c_inv);
            (material.volumetric.pressure(j), acc.energy + material.volumetric.energy(j).0)
        }
    };
    let s_vol = volumetric_stress(j, p, &c_inv);

    Ok(PointOutput {
        j,
        c,
        c_inv,
        pressure: p,
        s: s_eq + s_neq + s_vol,
        s_eq,
        s_neq,
        s_vol,
        tangent,
        q: acc.q,
        dissipation: acc.dissipation,
        free_energy: energy,
        state: PointState {
            gamma: gammas.to_vec(),
            pressure: p,
            time: 0.0,
            drive,
        },
        report: LocalReport::default(),
    })
}

/// Full constitutive update at deformation gradient `f`.
pub fn evaluate_point(
    material: &Material,
    f: &Tensor2,
    pressure: PressureInput,
    state_n: &PointState,
    dt: f64,
    settings: &LocalSettings,
) -> Result<PointOutput> {
    let drive = drive_tensor(material, f)?;
    let (gammas, report) = integrate_state(material, state_n, &drive, dt, settings)?;
    let mut out = respond(material, f, &gammas, pressure)?;
    out.state.time = state_n.time + dt;
    out.report = report;
    Ok(out)
}

/// Evaluates many independent points, in parallel when enabled.
pub fn evaluate_batch(
    material: &Material,
    points: &[(Tensor2, PointState)],
    dt: f64,
    settings: &LocalSettings,
    exec: crate::par::Execution,
) -> Vec<Result<PointOutput>> {
    crate::par::map(exec, points, |(f, st)| {
        evaluate_point(material, f, PressureInput::Constitutive, st, dt, settings)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::tensor::VOIGT;

    fn basis(r: usize) -> SymTensor2 {
        let (i, j) = VOIGT[r];
        let mut m = [[0.0; 3]; 3];
        m[i][j] = 1.0;
        m[j][i] = 1.0;
        SymTensor2::new(m)
    }

    fn material(formulation: Formulation) -> Material {
        let cr = ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 };
        let mut m = Material::new(
            Volumetric::Ln2 { kappa: 50.0 },
            vec![EquilibriumBranch::new(1.0, cr)],
            vec![
                MaxwellBranch::with_tau(2.0, 0.7, cr),
                MaxwellBranch::with_tau(0.5, 3.0, ScaleFunction::SethHill { m: -1.0 }),
            ],
        );
        m.formulation = formulation;
        m
    }

    fn sample_f() -> Tensor2 {
        Tensor2([[1.2, 0.1, 0.0], [0.05, 0.92, 0.08], [0.0, -0.04, 1.03]])
    }

    #[test]
    fn seth_hill_two_matches_closed_form_recursion() {
        let sh2 = ScaleFunction::SethHill { m: 2.0 };
        let (mu, tau, dt) = (3.0, 0.8, 0.1);
        let b = MaxwellBranch::with_tau(mu, tau, sh2);
        let c0 = SymTensor2::diag([1.1, 0.95, 0.97]);
        let c1 = SymTensor2::new([[1.2, 0.05, 0.0], [0.05, 0.9, 0.0], [0.0, 0.0, 0.93]]);
        let g0 = SymTensor2::new([[1.02, 0.01, 0.0], [0.01, 0.99, 0.0], [0.0, 0.0, 1.0]]);
        let (g1, _) = integrate_branch(&b, 0, &g0, &c0, &c1, dt, &LocalSettings::default()).unwrap();
        let a = dt / tau;
        let expect = (g0 * (1.0 - a / 2.0) + (c0 + c1) * (0.5 * a)) * (1.0 / (1.0 + a / 2.0));
        assert!((g1 - expect).max_abs() < 1e-12);
    }

    #[test]
    fn equilibrium_start_needs_no_iterations() {
        let m = material(Formulation::Gibbs);
        let st = PointState::initial(&m);
        let out = evaluate_point(&m, &Tensor2::identity(), PressureInput::Constitutive, &st, 0.1, &LocalSettings::default()).unwrap();
        assert_eq!(out.report.iterations, vec![0, 0]);
        assert!(out.s.max_abs() < 1e-14);
    }

    #[test]
    fn local_newton_converges_quadratically() {
        let m = material(Formulation::Gibbs);
        let st = PointState::initial(&m);
        let out = evaluate_point(&m, &sample_f(), PressureInput::Constitutive, &st, 0.3, &LocalSettings::default()).unwrap();
        for h in &out.report.residuals {
            for w in h.windows(3) {
                if w[2] > 1e-13 {
                    assert!(w[2] <= 10.0 * w[1] * w[1] / w[0], "{h:?}");
                }
            }
        }
    }

    #[test]
    fn frozen_tangent_matches_differences_at_fixed_state() {
        for form in [Formulation::Gibbs, Formulation::Helmholtz] {
            let m = material(form);
            let st = evaluate_point(&m, &sample_f(), PressureInput::Constitutive, &PointState::initial(&m), 0.4, &LocalSettings::default())
                .unwrap()
                .state;
            let f = Tensor2([[1.14, 0.04, 0.01], [0.05, 0.95, -0.03], [0.0, 0.02, 1.04]]);
            let base = respond(&m, &f, &st.gamma, PressureInput::Constitutive).unwrap();
            let c = base.c;
            let stress = |c: &SymTensor2| {
                let u = crate::spectral::spectral_decompose(c).unwrap().map(f64::sqrt);
                respond(&m, &u.to_tensor2(), &st.gamma, PressureInput::Constitutive).unwrap().s
            };
            let h = 1e-6;
            for r in 0..6 {
                let d = basis(r);
                let fd = (stress(&(c + d * h)) - stress(&(c - d * h))) * (1.0 / h);
                let err = (base.tangent.ddot2(&d) - fd).max_abs();
                assert!(err < 1e-6 * base.tangent.max_abs(), "{form:?} {r}: {err}");
            }
        }
    }

    #[test]
    fn stress_is_energy_gradient() {
        let m = material(Formulation::Gibbs);
        let st = evaluate_point(&m, &sample_f(), PressureInput::Constitutive, &PointState::initial(&m), 0.4, &LocalSettings::default())
            .unwrap()
            .state;
        let f = Tensor2([[1.14, 0.04, 0.01], [0.05, 0.95, -0.03], [0.0, 0.02, 1.04]]);
        let base = respond(&m, &f, &st.gamma, PressureInput::Constitutive).unwrap();
        let energy = |c: &SymTensor2| {
            let u = crate::spectral::spectral_decompose(c).unwrap().map(f64::sqrt);
            respond(&m, &u.to_tensor2(), &st.gamma, PressureInput::Constitutive).unwrap().free_energy
        };
        let h = 1e-6;
        for r in 0..6 {
            let d = basis(r);
            let fd = (energy(&(base.c + d * h)) - energy(&(base.c - d * h))) / h;
            assert!((base.s.ddot(&d) - fd).abs() < 1e-7, "{r}");
        }
    }

    #[test]
    fn dissipation_is_non_negative() {
        let m = material(Formulation::Gibbs);
        let out = evaluate_point(&m, &sample_f(), PressureInput::Constitutive, &PointState::initial(&m), 0.2, &LocalSettings::default()).unwrap();
        assert!(out.dissipation.iter().all(|d| *d >= 0.0));
        assert!(out.total_dissipation() > 0.0);
    }

    #[test]
    fn anisotropic_viscosity_reduces_to_isotropic() {
        let cr = ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 };
        let iso = MaxwellBranch::with_tau(2.0, 0.7, cr);
        let mut aniso = iso.clone();
        aniso.viscosity = Viscosity::anisotropic(Tensor4::identity_sym() * (2.0 * 1.4)).unwrap();
        let c1 = sample_f().right_cauchy_green();
        let i = SymTensor2::identity();
        let s = LocalSettings::default();
        let (a, _) = integrate_branch(&iso, 0, &i, &i, &c1, 0.2, &s).unwrap();
        let (b, _) = integrate_branch(&aniso, 0, &i, &i, &c1, 0.2, &s).unwrap();
        assert!((a - b).max_abs() < 1e-13);
        assert!(Viscosity::anisotropic(Tensor4::identity_sym() * -1.0).is_err());
    }

    #[test]
    fn returns_not_spd_for_absurd_steps() {
        let b = MaxwellBranch::with_tau(1.0, 1e-6, ScaleFunction::SethHill { m: 2.0 });
        let i = SymTensor2::identity();
        let g0 = SymTensor2::diag([3.0, 1.0, 1.0 / 3.0]);
        let r = integrate_branch(&b, 0, &g0, &i, &i, 10.0, &LocalSettings::default());
        assert!(matches!(r, Err(Error::StateNotSPD { .. }) | Err(Error::LocalNewtonDiverged { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn single_step_dissipation_non_negative(
            g in prop::array::uniform9(-0.2f64..0.2),
            dt in 0.01f64..1.0,
            gibbs in any::<bool>(),
        ) {
            let mut f = Tensor2::identity();
            for (i, v) in g.iter().enumerate() {
                f.0[i / 3][i % 3] += v;
            }
            prop_assume!(f.det() > 0.3);
            let m = material(if gibbs { Formulation::Gibbs } else { Formulation::Helmholtz });
            let settings = LocalSettings { max_iterations: 30, ..LocalSettings::default() };
            let out = evaluate_point(&m, &f, PressureInput::Constitutive, &PointState::initial(&m), dt, &settings).unwrap();
            for d in &out.dissipation {
                prop_assert!(*d >= -1e-12);
            }
            prop_assert!(out.s.is_finite());
        }
    }
}
