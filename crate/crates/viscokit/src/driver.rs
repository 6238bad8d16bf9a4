//! Homogeneous material-point load programs.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::tensor::{SymTensor2, Tensor2, Tensor4};
use crate::viscoelastic::{evaluate_point, LocalSettings, Material, PointOutput, PointState, PressureInput};

/// Scalar control signal of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Constant { value: f64 },
    /// Linear ramp from 0 to `peak` over `ramp_time`, then constant.
    RampHold { peak: f64, ramp_time: f64 },
    /// `amplitude * sin(omega t)`.
    Sine { amplitude: f64, omega: f64 },
    /// Piecewise-linear interpolation of `[t, value]` pairs, held constant outside.
    Piecewise { points: Vec<[f64; 2]> },
}

impl Signal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { value } => *value,
            Signal::RampHold { peak, ramp_time } => {
                if *ramp_time <= 0.0 || t >= *ramp_time {
                    *peak
                } else {
                    peak * t / ramp_time
                }
            }
            Signal::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
            Signal::Piecewise { points } => {
                let Some(first) = points.first() else { return 0.0 };
                if t <= first[0] {
                    return first[1];
                }
                for w in points.windows(2) {
                    if t <= w[1][0] {
                        let s = (t - w[0][0]) / (w[1][0] - w[0][0]);
                        return w[0][1] + s * (w[1][1] - w[0][1]);
                    }
                }
                points.last().unwrap()[1]
            }
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match self {
            Signal::Constant { value } => finite(*value, "value"),
            Signal::RampHold { peak, ramp_time } => {
                finite(*peak, "peak")?;
                if !(ramp_time.is_finite() && *ramp_time >= 0.0) {
                    return Err("ramp_time must be non-negative".into());
                }
                Ok(())
            }
            Signal::Sine { amplitude, omega } => {
                finite(*amplitude, "amplitude")?;
                finite(*omega, "omega")
            }
            Signal::Piecewise { points } => {
                if points.is_empty() {
                    return Err("points must not be empty".into());
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err("points must be finite".into());
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err("point times must be strictly increasing".into());
                }
                Ok(())
            }
        }
    }
}

/// Prescribed homogeneous deformation templates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationPath {
    /// `F = I + gamma e2 (x) e3`.
    SimpleShear { gamma: Signal },
    /// Volume-preserving stretch `1 + s(t)` along `e3`.
    UniaxialIsochoric { stretch: Signal },
    /// `F = (1 + s(t)) I`.
    Dilation { stretch: Signal },
}

impl DeformationPath {
    pub fn deformation(&self, t: f64) -> Tensor2 {
        match self {
            DeformationPath::SimpleShear { gamma } => simple_shear(gamma.value(t)),
            DeformationPath::UniaxialIsochoric { stretch } => {
                let l = 1.0 + stretch.value(t);
                let lat = 1.0 / l.sqrt();
                Tensor2::diag([lat, lat, l])
            }
            DeformationPath::Dilation { stretch } => Tensor2::identity() * (1.0 + stretch.value(t)),
        }
    }

    /// Normal stress component left free for the pressure multiplier.
    fn free_normal(&self) -> Option<usize> {
        match self {
            DeformationPath::SimpleShear { .. } => Some(2),
            DeformationPath::UniaxialIsochoric { .. } => Some(0),
            DeformationPath::Dilation { .. } => None,
        }
    }
}

pub fn simple_shear(gamma: f64) -> Tensor2 {
    let mut f = Tensor2::identity();
    f[(1, 2)] = gamma;
    f
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProgramMode {
    StrainControl { path: DeformationPath },
    /// Nominal axial traction along `e3` with stress-free lateral faces.
    StressControlUniaxial { traction: Signal },
    /// Simple shear with `gamma = amplitude sin(omega t)`.
    CyclicShear { amplitude: f64, omega: f64 },
    /// Isochoric stretch ramped to `stretch` over `ramp_time`, then held.
    RelaxationHold { stretch: f64, ramp_time: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadProgram {
    pub mode: ProgramMode,
    pub t_end: f64,
    pub dt: f64,
}

impl LoadProgram {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        let sig = match &self.mode {
            ProgramMode::StrainControl { path } => match path {
                DeformationPath::SimpleShear { gamma } => gamma.validate(),
                DeformationPath::UniaxialIsochoric { stretch } | DeformationPath::Dilation { stretch } => stretch.validate(),
            },
            ProgramMode::StressControlUniaxial { traction } => traction.validate(),
            ProgramMode::CyclicShear { amplitude, omega } => Signal::Sine {
                amplitude: *amplitude,
                omega: *omega,
            }
            .validate(),
            ProgramMode::RelaxationHold { stretch, ramp_time } => {
                if !(stretch.is_finite() && *stretch > 0.0) {
                    Err("stretch must be positive".to_string())
                } else {
                    Signal::RampHold { peak: stretch - 1.0, ramp_time: *ramp_time }.validate()
                }
            }
        };
        sig.map_err(Error::InvalidParameters)
    }

    /// Time grid `dt, 2 dt, ..., t_end`, the last step possibly shorter.
    pub fn times(&self) -> Vec<f64> {
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (1..=n).map(|k| (k as f64 * self.dt).min(self.t_end)).collect()
    }

    /// The strain-controlled template equivalent to this program, if any.
    pub fn deformation_path(&self) -> Option<DeformationPath> {
        match &self.mode {
            ProgramMode::StrainControl { path } => Some(path.clone()),
            ProgramMode::CyclicShear { amplitude, omega } => Some(DeformationPath::SimpleShear {
                gamma: Signal::Sine {
                    amplitude: *amplitude,
                    omega: *omega,
                },
            }),
            ProgramMode::RelaxationHold { stretch, ramp_time } => Some(DeformationPath::UniaxialIsochoric {
                stretch: Signal::RampHold {
                    peak: stretch - 1.0,
                    ramp_time: *ramp_time,
                },
            }),
            ProgramMode::StressControlUniaxial { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobalTangent {
    /// Constitutive tangent at frozen internal state.
    #[default]
    Frozen,
    /// Central differences of the global residual, internal state re-integrated.
    Numerical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriverSettings {
    pub local: LocalSettings,
    pub tol_relative: f64,
    pub tol_absolute: f64,
    pub max_iterations: usize,
    pub tangent: GlobalTangent,
    /// Maximum number of step halvings after a local failure.
    pub max_cuts: usize,
}

impl Default for DriverSettings {
    fn default() -> Self {
        DriverSettings {
            local: LocalSettings::default(),
            tol_relative: 1e-10,
            tol_absolute: 1e-10,
            max_iterations: 10,
            tangent: GlobalTangent::Frozen,
            max_cuts: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub f: Tensor2,
    pub j: f64,
    pub pressure: f64,
    pub s: SymTensor2,
    pub s_neq: SymTensor2,
    /// First Piola-Kirchhoff stress.
    pub first_pk: Tensor2,
    pub q: Vec<SymTensor2>,
    pub dissipation: f64,
    pub free_energy: f64,
    pub local_iterations: usize,
    pub global_iterations: usize,
}

impl StepRecord {
    fn from_output(t: f64, f: &Tensor2, out: &PointOutput, global_iterations: usize) -> Self {
        StepRecord {
            t,
            f: *f,
            j: out.j,
            pressure: out.pressure,
            s: out.s,
            s_neq: out.s_neq,
            first_pk: out.first_pk(f),
            q: out.q.clone(),
            dissipation: out.total_dissipation(),
            free_energy: out.free_energy,
            local_iterations: out.report.max_iterations(),
            global_iterations,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub records: Vec<StepRecord>,
    pub final_state: Option<PointState>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl TimeSeries {
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn header(branches: usize) -> Vec<String> {
        let mut h: Vec<String> = vec!["t".into()];
        for i in 1..=3 {
            for j in 1..=3 {
                h.push(format!("F{i}{j}"));
            }
        }
        h.extend(["J", "P", "S11", "S22", "S33", "S12", "S23", "S13", "Sneq33"].map(String::from));
        h.extend((1..=branches).map(|k| format!("normQ_{k}")));
        h.extend(["D", "local_iters", "global_iters"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let branches = self.records.first().map_or(0, |r| r.q.len());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::header(branches))?;
        for r in &self.records {
            let mut row = vec![fmt17(r.t)];
            row.extend(r.f.0.iter().flatten().map(|v| fmt17(*v)));
            row.push(fmt17(r.j));
            row.push(fmt17(r.pressure));
            row.extend(r.s.voigt().iter().map(|v| fmt17(*v)));
            row.push(fmt17(r.s_neq.get(2, 2)));
            row.extend(r.q.iter().map(|q| fmt17(q.norm())));
            row.push(fmt17(r.dissipation));
            row.push(r.local_iterations.to_string());
            row.push(r.global_iterations.to_string());
            out.write_record(row)?;
        }
        out.flush()
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn write_csv_atomic(&self, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_atomic(path, &buf)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

/// `dP_iJ / dF_aN` from `S` and `C = 2 dS/dC`.
pub fn first_pk_tangent(f: &Tensor2, s: &SymTensor2, c: &Tensor4) -> [[[[f64; 3]; 3]; 3]; 3] {
    let mut fc = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for jj in 0..3 {
            for m in 0..3 {
                for n in 0..3 {
                    fc[i][jj][m][n] = (0..3).map(|k| f[(i, k)] * c.get(k, jj, m, n)).sum();
                }
            }
        }
    }
    let mut a = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for jj in 0..3 {
            for aa in 0..3 {
                for n in 0..3 {
                    let mut v = if i == aa { s.get(n, jj) } else { 0.0 };
                    for m in 0..3 {
                        v += fc[i][jj][m][n] * f[(aa, m)];
                    }
                    a[i][jj][aa][n] = v;
                }
            }
        }
    }
    a
}

/// Constraint used to determine the pressure at prescribed `F`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureConstraint {
    /// `S_cc = 0` for the given normal component.
    StressFree(usize),
    /// `J(P) = det F` through the volumetric model.
    Volume,
}

/// Solves the pressure at prescribed `F` by scalar Newton.
pub fn solve_pressure(
    material: &Material,
    f: &Tensor2,
    constraint: PressureConstraint,
    state_n: &PointState,
    dt: f64,
    settings: &LocalSettings,
) -> Result<PointOutput> {
    match constraint {
        PressureConstraint::StressFree(c) => {
            let mut p = state_n.pressure;
            let mut out = evaluate_point(material, f, PressureInput::Given(p), state_n, dt, settings)?;
            let s_dev = out.s_eq + out.s_neq;
            let scale = s_dev.max_abs().max(material.reference_modulus() * 1e-300);
            for _ in 0..20 {
                let r = s_dev.get(c, c) - out.j * p * out.c_inv.get(c, c);
                if r.abs() <= 1e-12 * scale {
                    break;
                }
                p += r / (out.j * out.c_inv.get(c, c));
            }
            out.pressure = p;
            out.state.pressure = p;
            out.s_vol = out.c_inv * (-out.j * p);
            out.s = s_dev + out.s_vol;
            out.tangent = out.tangent.clone() - crate::hyperelastic::volumetric_tangent_fixed_p(out.j, state_n.pressure, &out.c_inv)
                + crate::hyperelastic::volumetric_tangent_fixed_p(out.j, p, &out.c_inv);
            Ok(out)
        }
        PressureConstraint::Volume => {
            let vol = material.volumetric;
            let target = f.det();
            let mut p = 0.0;
            for _ in 0..100 {
                let j = vol.gibbs_j_of_p(p)?;
                let g = j - target;
                if g.abs() <= 1e-12 * target {
                    break;
                }
                let d2 = vol.energy(j).2;
                if !(d2 > 0.0) {
                    return Err(Error::NoVolumetricRoot { pressure: p });
                }
                p += g * d2;
            }
            let mut out = evaluate_point(material, f, PressureInput::Constitutive, state_n, dt, settings)?;
            out.pressure = p;
            out.state.pressure = p;
            Ok(out)
        }
    }
}

fn pressure_constraint_for(material: &Material, free_normal: Option<usize>) -> Result<Option<PressureConstraint>> {
    if material.volumetric.is_incompressible() {
        free_normal
            .map(|c| Some(PressureConstraint::StressFree(c)))
            .ok_or_else(|| Error::InvalidParameters("deformation path is not volume preserving".into()))
    } else {
        Ok(None)
    }
}

fn step_prescribed(
    material: &Material,
    f: &Tensor2,
    constraint: Option<PressureConstraint>,
    state: &PointState,
    dt: f64,
    settings: &DriverSettings,
) -> Result<PointOutput> {
    match constraint {
        Some(c) => solve_pressure(material, f, c, state, dt, &settings.local),
        None => evaluate_point(material, f, PressureInput::Constitutive, state, dt, &settings.local),
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::LocalNewtonDiverged { .. } | Error::StateNotSPD { .. })
}

/// Runs a fully prescribed deformation history `f_of_t` on the grid `times`.
pub fn run_deformation_history(
    material: &Material,
    f_of_t: &(dyn Fn(f64) -> Tensor2 + Sync),
    times: &[f64],
    constraint: Option<PressureConstraint>,
    state0: PointState,
    settings: &DriverSettings,
) -> Result<TimeSeries> {
    material.validate()?;
    let mut series = TimeSeries::default();
    let mut state = state0;
    for &t1 in times {
        advance_prescribed(material, f_of_t, constraint, &mut state, t1, 0, settings, &mut series)?;
    }
    series.final_state = Some(state);
    Ok(series)
}

#[allow(clippy::too_many_arguments)]
fn advance_prescribed(
    material: &Material,
    f_of_t: &(dyn Fn(f64) -> Tensor2 + Sync),
    constraint: Option<PressureConstraint>,
    state: &mut PointState,
    t1: f64,
    depth: usize,
    settings: &DriverSettings,
    series: &mut TimeSeries,
) -> Result<()> {
    let t0 = state.time;
    let dt = t1 - t0;
    let f = f_of_t(t1);
    match step_prescribed(material, &f, constraint, state, dt, settings) {
        Ok(mut out) => {
            out.state.time = t1;
            series.records.push(StepRecord::from_output(t1, &f, &out, 0));
            *state = out.state;
            Ok(())
        }
        Err(e) if recoverable(&e) => {
            if depth >= settings.max_cuts {
                return Err(Error::StepRejected {
                    time: t1,
                    suggested_dt: dt / 2.0,
                });
            }
            let tm = t0 + 0.5 * dt;
            advance_prescribed(material, f_of_t, constraint, state, tm, depth + 1, settings, series)?;
            advance_prescribed(material, f_of_t, constraint, state, t1, depth + 1, settings, series)
        }
        Err(e) => Err(e),
    }
}

/// Strain-controlled programs: cyclic shear, relaxation hold, prescribed paths.
pub fn run_strain_controlled(program: &LoadProgram, material: &Material, state0: PointState, settings: &DriverSettings) -> Result<TimeSeries> {
    program.validate()?;
    let path = program
        .deformation_path()
        .ok_or_else(|| Error::InvalidParameters("program is not strain controlled".into()))?;
    let constraint = pressure_constraint_for(material, path.free_normal())?;
    let f_of_t = |t: f64| path.deformation(t);
    run_deformation_history(material, &f_of_t, &program.times(), constraint, state0, settings)
}

struct UniaxialProblem<'a> {
    material: &'a Material,
    incompressible: bool,
    scale: f64,
    settings: &'a DriverSettings,
}

impl UniaxialProblem<'_> {
    fn unknowns(&self) -> usize {
        if self.incompressible {
            4
        } else {
            3
        }
    }

    fn evaluate(&self, x: &DVector<f64>, state: &PointState, dt: f64) -> Result<(Tensor2, PointOutput)> {
        let f = Tensor2::diag([x[0], x[1], x[2]]);
        let p = if self.incompressible {
            PressureInput::Given(x[3] * self.scale)
        } else {
            PressureInput::Constitutive
        };
        let out = evaluate_point(self.material, &f, p, state, dt, &self.settings.local)?;
        Ok((f, out))
    }

    fn residual(&self, f: &Tensor2, out: &PointOutput, target: f64) -> DVector<f64> {
        let pk = out.first_pk(f);
        let mut r = DVector::zeros(self.unknowns());
        r[0] = pk[(0, 0)] / self.scale;
        r[1] = pk[(1, 1)] / self.scale;
        r[2] = (pk[(2, 2)] - target) / self.scale;
        if self.incompressible {
            r[3] = out.j - 1.0;
        }
        r
    }

    fn frozen_jacobian(&self, f: &Tensor2, out: &PointOutput) -> DMatrix<f64> {
        let n = self.unknowns();
        let a = first_pk_tangent(f, &out.s, &out.tangent);
        let mut jac = DMatrix::zeros(n, n);
        for r in 0..3 {
            for c in 0..3 {
                jac[(r, c)] = a[r][r][c][c] / self.scale;
            }
        }
        if self.incompressible {
            let finv_t = f.inverse().map(|m| m.transpose()).unwrap_or_else(Tensor2::identity);
            let fc = f.mul_sym(&out.c_inv);
            for r in 0..3 {
                jac[(r, 3)] = -out.j * fc[(r, r)];
                jac[(3, r)] = out.j * finv_t[(r, r)];
            }
        }
        jac
    }

    fn numerical_jacobian(&self, x: &DVector<f64>, state: &PointState, dt: f64, target: f64) -> Result<DMatrix<f64>> {
        let n = self.unknowns();
        let mut jac = DMatrix::zeros(n, n);
        for c in 0..n {
            let h = 1e-7 * x[c].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (fp, op) = self.evaluate(&xp, state, dt)?;
            let (fm, om) = self.evaluate(&xm, state, dt)?;
            let col = (self.residual(&fp, &op, target) - self.residual(&fm, &om, target)) / (2.0 * h);
            jac.set_column(c, &col);
        }
        Ok(jac)
    }

    /// Global Newton for one step; returns the converged output and iteration count.
    fn solve_step(&self, x: &mut DVector<f64>, state: &PointState, t1: f64, target: f64) -> Result<(Tensor2, PointOutput, usize)> {
        let dt = t1 - state.time;
        let mut r0 = None;
        for it in 0..=self.settings.max_iterations {
            let (f, out) = self.evaluate(x, state, dt)?;
            let r = self.residual(&f, &out, target);
            let rn = r.norm();
            let first = *r0.get_or_insert(rn);
            if rn <= self.settings.tol_absolute || (it > 0 && rn <= self.settings.tol_relative * first) {
                return Ok((f, out, it));
            }
            if it == self.settings.max_iterations || !rn.is_finite() {
                return Err(Error::GlobalNewtonDiverged {
                    time: t1,
                    iterations: it,
                    residual: rn,
                });
            }
            let jac = match self.settings.tangent {
                GlobalTangent::Frozen => self.frozen_jacobian(&f, &out),
                GlobalTangent::Numerical => self.numerical_jacobian(x, state, dt, target)?,
            };
            let dx = jac.lu().solve(&(-r)).ok_or(Error::GlobalNewtonDiverged {
                time: t1,
                iterations: it,
                residual: rn,
            })?;
            *x += dx;
            for k in 0..3 {
                if !(x[k] > 0.0) {
                    return Err(Error::NonPositiveJacobian(x[k]));
                }
            }
        }
        unreachable!()
    }
}

/// Uniaxial nominal-traction control along `e3` with free lateral stretches.
pub fn run_stress_controlled(program: &LoadProgram, material: &Material, state0: PointState, settings: &DriverSettings) -> Result<TimeSeries> {
    program.validate()?;
    material.validate()?;
    let ProgramMode::StressControlUniaxial { traction } = &program.mode else {
        return Err(Error::InvalidParameters("program is not stress controlled".into()));
    };
    let problem = UniaxialProblem {
        material,
        incompressible: material.volumetric.is_incompressible(),
        scale: material.reference_modulus(),
        settings,
    };
    let mut x = DVector::from_element(problem.unknowns(), 1.0);
    if problem.incompressible {
        x[3] = state0.pressure / problem.scale;
    }
    let mut series = TimeSeries::default();
    let mut state = state0;
    for t1 in program.times() {
        advance_stress(&problem, traction, &mut x, &mut state, t1, 0, &mut series)?;
    }
    series.final_state = Some(state);
    Ok(series)
}

fn advance_stress(
    problem: &UniaxialProblem<'_>,
    traction: &Signal,
    x: &mut DVector<f64>,
    state: &mut PointState,
    t1: f64,
    depth: usize,
    series: &mut TimeSeries,
) -> Result<()> {
    let t0 = state.time;
    let saved = x.clone();
    match problem.solve_step(x, state, t1, traction.value(t1)) {
        Ok((f, mut out, its)) => {
            out.state.time = t1;
            series.records.push(StepRecord::from_output(t1, &f, &out, its));
            *state = out.state;
            Ok(())
        }
        Err(e) if recoverable(&e) => {
            *x = saved;
            if depth >= problem.settings.max_cuts {
                return Err(Error::StepRejected {
                    time: t1,
                    suggested_dt: (t1 - t0) / 2.0,
                });
            }
            let tm = t0 + 0.5 * (t1 - t0);
            advance_stress(problem, traction, x, state, tm, depth + 1, series)?;
            advance_stress(problem, traction, x, state, t1, depth + 1, series)
        }
        Err(e) => Err(e),
    }
}

/// Dispatches on the program mode.
pub fn run_program(program: &LoadProgram, material: &Material, settings: &DriverSettings) -> Result<TimeSeries> {
    let s0 = PointState::initial(material);
    match program.mode {
        ProgramMode::StressControlUniaxial { .. } => run_stress_controlled(program, material, s0, settings),
        _ => run_strain_controlled(program, material, s0, settings),
    }
}

/// Independent runs, concurrently when parallel execution is enabled.
pub fn run_sweep(cases: &[(LoadProgram, Material)], settings: &DriverSettings, exec: Execution) -> Vec<Result<TimeSeries>> {
    par::map(exec, cases, |(p, m)| run_program(p, m, settings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperelastic::{EquilibriumBranch, Volumetric};
    use crate::strains::ScaleFunction;
    use crate::viscoelastic::MaxwellBranch;

    fn material(vol: Volumetric) -> Material {
        let cr = ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 };
        Material::new(vol, vec![EquilibriumBranch::new(1.0, cr)], vec![MaxwellBranch::with_tau(1.0, 0.5, cr)])
    }

    #[test]
    fn signals() {
        let r = Signal::RampHold { peak: 2.0, ramp_time: 1.0 };
        assert_eq!(r.value(0.5), 1.0);
        assert_eq!(r.value(3.0), 2.0);
        let p = Signal::Piecewise {
            points: vec![[0.0, 0.0], [1.0, 2.0], [2.0, 0.0]],
        };
        assert_eq!(p.value(0.5), 1.0);
        assert_eq!(p.value(1.5), 1.0);
        assert_eq!(p.value(5.0), 0.0);
        assert!(Signal::Piecewise { points: vec![[1.0, 0.0], [0.5, 1.0]] }.validate().is_err());
    }

    #[test]
    fn time_grid() {
        let p = LoadProgram {
            mode: ProgramMode::CyclicShear { amplitude: 0.0, omega: 1.0 },
            t_end: 1.0,
            dt: 0.3,
        };
        assert_eq!(p.times(), vec![0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn zero_amplitude_shear_is_stress_free() {
        let m = material(Volumetric::Incompressible);
        let p = LoadProgram {
            mode: ProgramMode::CyclicShear { amplitude: 0.0, omega: 0.3 },
            t_end: 2.0,
            dt: 0.1,
        };
        let ts = run_program(&p, &m, &DriverSettings::default()).unwrap();
        assert_eq!(ts.records.len(), 20);
        assert!(ts.records.iter().all(|r| r.s.max_abs() == 0.0));
    }

    #[test]
    fn zero_traction_keeps_identity() {
        for vol in [Volumetric::Incompressible, Volumetric::Quad { kappa: 100.0 }] {
            let m = material(vol);
            let p = LoadProgram {
                mode: ProgramMode::StressControlUniaxial {
                    traction: Signal::Constant { value: 0.0 },
                },
                t_end: 0.5,
                dt: 0.1,
            };
            let ts = run_program(&p, &m, &DriverSettings::default()).unwrap();
            for r in &ts.records {
                assert!((r.f - Tensor2::identity()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn pressure_for_dilation() {
        let kappa = 7.0;
        let m = material(Volumetric::Ln2 { kappa });
        let f = Tensor2::identity() * 1.1;
        let st = PointState::initial(&m);
        let out = solve_pressure(&m, &f, PressureConstraint::Volume, &st, 0.1, &LocalSettings::default()).unwrap();
        let j: f64 = 1.331;
        assert!((out.pressure - (-kappa * j.ln() / j)).abs() < 1e-11);
    }

    #[test]
    fn pressure_for_shear_constraint() {
        let sh2 = ScaleFunction::SethHill { m: 2.0 };
        let m = Material::new(Volumetric::Incompressible, vec![EquilibriumBranch::new(1.0, sh2)], vec![]);
        let st = PointState::initial(&m);
        let out = solve_pressure(&m, &simple_shear(1.0), PressureConstraint::StressFree(2), &st, 0.1, &LocalSettings::default()).unwrap();
        assert!(out.s.get(2, 2).abs() < 1e-12);
        let at_rest = solve_pressure(&m, &Tensor2::identity(), PressureConstraint::StressFree(2), &st, 0.1, &LocalSettings::default()).unwrap();
        assert_eq!(at_rest.pressure, 0.0);
    }

    #[test]
    fn first_pk_tangent_matches_differences() {
        let m = material(Volumetric::Quad { kappa: 20.0 });
        let st = PointState::initial(&m);
        let f = Tensor2([[1.1, 0.05, 0.0], [0.02, 0.95, 0.1], [0.0, 0.0, 1.02]]);
        let resp = |f: &Tensor2| crate::viscoelastic::respond(&m, f, &st.gamma, PressureInput::Constitutive).unwrap();
        let pk = |f: &Tensor2| resp(f).first_pk(f);
        let base = resp(&f);
        let a = first_pk_tangent(&f, &base.s, &base.tangent);
        let h = 1e-6;
        for aa in 0..3 {
            for n in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp[(aa, n)] += h;
                fm[(aa, n)] -= h;
                let d = (pk(&fp) - pk(&fm)) * (0.5 / h);
                for i in 0..3 {
                    for jj in 0..3 {
                        assert!((a[i][jj][aa][n] - d[(i, jj)]).abs() < 1e-6, "{i}{jj}{aa}{n}");
                    }
                }
            }
        }
    }

    #[test]
    fn csv_layout() {
        let m = material(Volumetric::Incompressible);
        let p = LoadProgram {
            mode: ProgramMode::CyclicShear { amplitude: 0.1, omega: 0.3 },
            t_end: 0.3,
            dt: 0.1,
        };
        let ts = run_program(&p, &m, &DriverSettings::default()).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("t,F11,F12"));
        assert!(lines[0].ends_with("Sneq33,normQ_1,D,local_iters,global_iters"));
        assert_eq!(lines[1].split(',').count(), TimeSeries::header(1).len());
    }
}
