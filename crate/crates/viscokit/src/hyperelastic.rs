//! Equilibrium response: volumetric models, generalized-strain branches and
//! the deviatoric push of fictitious stresses and tangents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::{projection_p, projection_p_tilde, strain_kinematics};
use crate::spectral::spectral_decompose;
use crate::strains::ScaleFunction;
use crate::tensor::{SymTensor2, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Volumetric {
    /// `kappa/2 ln(J)^2`.
    Ln2 { kappa: f64 },
    /// `kappa/2 (J - 1)^2`.
    Quad { kappa: f64 },
    /// `J = 1` enforced by a pressure multiplier.
    Incompressible,
}

impl Volumetric {
    pub fn is_incompressible(&self) -> bool {
        matches!(self, Volumetric::Incompressible)
    }

    pub fn kappa(&self) -> Option<f64> {
        match *self {
            Volumetric::Ln2 { kappa } | Volumetric::Quad { kappa } => Some(kappa),
            Volumetric::Incompressible => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kappa() {
            Some(k) if !(k.is_finite() && k > 0.0) => {
                Err(Error::InvalidParameters(format!("bulk modulus must be positive, got {k}")))
            }
            _ => Ok(()),
        }
    }

    /// `(psi, psi', psi'')` at volume ratio `j`.
    pub fn energy(&self, j: f64) -> (f64, f64, f64) {
        match *self {
            Volumetric::Ln2 { kappa } => {
                let l = j.ln();
                (0.5 * kappa * l * l, kappa * l / j, kappa * (1.0 - l) / (j * j))
            }
            Volumetric::Quad { kappa } => (0.5 * kappa * (j - 1.0).powi(2), kappa * (j - 1.0), kappa),
            Volumetric::Incompressible => (0.0, 0.0, 0.0),
        }
    }

    /// Pressure `P = -psi'(J)`.
    pub fn pressure(&self, j: f64) -> f64 {
        -self.energy(j).1
    }

    /// Volume ratio on the stable branch solving `psi'(J) + P = 0`.
    pub fn gibbs_j_of_p(&self, p: f64) -> Result<f64> {
        match *self {
            Volumetric::Incompressible => Ok(1.0),
            Volumetric::Quad { kappa } => {
                let j = 1.0 - p / kappa;
                if j > 0.0 {
                    Ok(j)
                } else {
                    Err(Error::NoVolumetricRoot { pressure: p })
                }
            }
            Volumetric::Ln2 { kappa } => {
                let e = std::f64::consts::E;
                if -p >= kappa / e {
                    return Err(Error::NoVolumetricRoot { pressure: p });
                }
                let g = |j: f64| kappa * j.ln() / j + p;
                let (mut lo, mut hi) = (1e-300_f64.max(f64::MIN_POSITIVE), e);
                if g(hi) < 0.0 {
                    return Err(Error::NoVolumetricRoot { pressure: p });
                }
                let mut j = if p.abs() < kappa { (-p / kappa).exp() } else { 0.5 * (lo + hi) };
                j = j.clamp(lo, hi);
                lo = lo.max(1e-300);
                for _ in 0..200 {
                    let gj = g(j);
                    if gj.abs() <= 1e-15 * kappa {
                        return Ok(j);
                    }
                    if gj > 0.0 {
                        hi = j;
                    } else {
                        lo = j;
                    }
                    let dg = kappa * (1.0 - j.ln()) / (j * j);
                    let newton = j - gj / dg;
                    j = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                    if (hi - lo) <= 1e-16 * hi {
                        return Ok(j);
                    }
                }
                Ok(j)
            }
        }
    }

    /// Complementary potential `G(P) = psi(J) + P J` at `J = J(P)`.
    pub fn gibbs_energy(&self, p: f64) -> Result<f64> {
        let j = self.gibbs_j_of_p(p)?;
        Ok(self.energy(j).0 + p * j)
    }
}

/// `S_vol = -J P C^-1`.
pub fn volumetric_stress(j: f64, p: f64, c_inv: &SymTensor2) -> SymTensor2 {
    *c_inv * (-j * p)
}

/// `2 dS_vol/dC` at fixed `P`: `-P J (C^-1 (x) C^-1 - 2 C^-1 o C^-1)`.
pub fn volumetric_tangent_fixed_p(j: f64, p: f64, c_inv: &SymTensor2) -> Tensor4 {
    (Tensor4::dyad(c_inv, c_inv) - Tensor4::odot(c_inv, c_inv) * 2.0) * (-p * j)
}

/// `2 dS_vol/dC` with `P = -psi'(J)`.
pub fn volumetric_tangent(vol: &Volumetric, j: f64, c_inv: &SymTensor2) -> Tensor4 {
    let (_, d1, d2) = vol.energy(j);
    let p = -d1;
    volumetric_tangent_fixed_p(j, p, c_inv) + Tensor4::dyad(c_inv, c_inv) * (j * j * d2)
}

/// Equilibrium branch with shear modulus and optional bulk pairing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumBranch {
    pub mu: f64,
    pub kappa: Option<f64>,
    pub strain: ScaleFunction,
}

impl EquilibriumBranch {
    pub fn new(mu: f64, strain: ScaleFunction) -> Self {
        EquilibriumBranch { mu, kappa: None, strain }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameters(format!("shear modulus must be positive, got {}", self.mu)));
        }
        if let Some(k) = self.kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::InvalidParameters(format!("bulk modulus must be positive, got {k}")));
            }
        }
        self.strain.validate()
    }

    /// Conjugate stress `T = dW/dE` as a function of the strain.
    pub fn conjugate_stress(&self, e: &SymTensor2) -> SymTensor2 {
        match self.kappa {
            None => *e * (2.0 * self.mu),
            Some(k) => e.dev() * (2.0 * self.mu) + SymTensor2::identity() * (k * e.trace()),
        }
    }

    /// `dT/dE`.
    pub fn stiffness(&self) -> Tensor4 {
        let i4 = Tensor4::identity_sym();
        match self.kappa {
            None => i4 * (2.0 * self.mu),
            Some(k) => {
                let i = SymTensor2::identity();
                let ii = Tensor4::dyad(&i, &i);
                (i4 - ii.clone() * (1.0 / 3.0)) * (2.0 * self.mu) + ii * k
            }
        }
    }

    pub fn energy(&self, e: &SymTensor2) -> f64 {
        match self.kappa {
            None => self.mu * e.ddot(e),
            Some(k) => {
                let d = e.dev();
                self.mu * d.ddot(&d) + 0.5 * k * e.trace().powi(2)
            }
        }
    }
}

/// Stress and tangent of one branch driven by `c`:
/// `S = T : Q` and `2 dS/dC = Q^T : dT/dE : Q + T : L`.
pub fn branch_response(branch: &EquilibriumBranch, c: &SymTensor2) -> Result<(SymTensor2, Tensor4)> {
    let dec = spectral_decompose(c)?;
    let k = strain_kinematics(&dec, &branch.strain, true);
    let t = branch.conjugate_stress(&k.strain);
    let s = k.q.left_ddot2(&t);
    let qt = k.q.transpose();
    let tangent = qt.ddot4(&branch.stiffness()).ddot4(&k.q) + k.l.as_ref().unwrap().left_ddot2(&t);
    Ok((s, tangent))
}

/// Isochoric push of a fictitious stress `S~` and fictitious tangent
/// `C~ = 2 J^(-4/3) dS~/dC~`.
///
/// ```text
/// S_iso = J^(-2/3) P : S~
/// C_iso = P : C~ : P^T + 2/3 Tr(J^(-2/3) S~) P~ - 2/3 (C^-1 (x) S_iso + S_iso (x) C^-1)
/// ```
pub fn isochoric_push(
    c: &SymTensor2,
    c_inv: &SymTensor2,
    j: f64,
    s_fict: &SymTensor2,
    c_fict: &Tensor4,
) -> (SymTensor2, Tensor4) {
    let j23 = j.powf(-2.0 / 3.0);
    let p = projection_p(c, c_inv);
    let s_iso = p.ddot2(s_fict) * j23;
    let tr = (*s_fict * j23).ddot(c);
    let tangent = p.ddot4(c_fict).ddot4(&p.transpose()) + projection_p_tilde(c_inv) * (2.0 / 3.0 * tr)
        - (Tensor4::dyad(c_inv, &s_iso) + Tensor4::dyad(&s_iso, c_inv)) * (2.0 / 3.0);
    (s_iso, tangent)
}

/// Hyperelastic isochoric response of a set of equilibrium branches.
pub fn isochoric_response(branches: &[EquilibriumBranch], c: &SymTensor2) -> Result<(SymTensor2, Tensor4)> {
    let j = c.det().sqrt();
    if !(j > 0.0) {
        return Err(Error::NonPositiveJacobian(j));
    }
    let c_inv = c.inverse().ok_or(Error::NonPositiveJacobian(j))?;
    let c_bar = *c * j.powf(-2.0 / 3.0);
    let mut s_fict = SymTensor2::zero();
    let mut c_fict = Tensor4::zero();
    for b in branches {
        let (s, t) = branch_response(b, &c_bar)?;
        s_fict += s;
        c_fict += &t;
    }
    Ok(isochoric_push(c, &c_inv, j, &s_fict, &(c_fict * j.powf(-4.0 / 3.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::tensor::{Tensor2, VOIGT};

    fn basis(r: usize) -> SymTensor2 {
        let (i, j) = VOIGT[r];
        let mut m = [[0.0; 3]; 3];
        m[i][j] = 1.0;
        m[j][i] = 1.0;
        SymTensor2::new(m)
    }

    fn sample_c() -> SymTensor2 {
        Tensor2([[1.15, 0.2, 0.0], [0.05, 0.95, 0.1], [-0.1, 0.0, 1.05]]).right_cauchy_green()
    }

    #[test]
    fn volumetric_roots() {
        for vol in [Volumetric::Ln2 { kappa: 1e6 }, Volumetric::Quad { kappa: 1e6 }] {
            for p in [-2e5, -1.0, 0.0, 3e4, 5e5] {
                let j = vol.gibbs_j_of_p(p).unwrap();
                assert!((vol.pressure(j) - p).abs() < 1e-9 * 1e6, "{vol:?} {p}");
            }
        }
        assert!(Volumetric::Ln2 { kappa: 1.0 }.gibbs_j_of_p(-0.5).is_err());
        assert!(Volumetric::Quad { kappa: 1.0 }.gibbs_j_of_p(2.0).is_err());
    }

    #[test]
    fn volumetric_energy_derivatives() {
        for vol in [Volumetric::Ln2 { kappa: 3.0 }, Volumetric::Quad { kappa: 3.0 }] {
            let j = 1.3;
            let h = 1e-6;
            let (_, d1, d2) = vol.energy(j);
            assert!(((vol.energy(j + h).0 - vol.energy(j - h).0) / (2.0 * h) - d1).abs() < 1e-8);
            assert!(((vol.energy(j + h).1 - vol.energy(j - h).1) / (2.0 * h) - d2).abs() < 1e-8);
        }
    }

    #[test]
    fn branch_tangent_matches_differences() {
        let b = EquilibriumBranch {
            mu: 2.0,
            kappa: Some(5.0),
            strain: ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 },
        };
        let c = sample_c();
        let (_, tan) = branch_response(&b, &c).unwrap();
        let h = 1e-6;
        for r in 0..6 {
            let d = basis(r);
            let fd = (branch_response(&b, &(c + d * h)).unwrap().0 - branch_response(&b, &(c - d * h)).unwrap().0)
                * (1.0 / h);
            assert!((tan.ddot2(&d) - fd).max_abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn isochoric_tangent_matches_differences() {
        let br = [
            EquilibriumBranch::new(1.5, ScaleFunction::SethHill { m: 2.0 }),
            EquilibriumBranch::new(0.5, ScaleFunction::HENCKY),
        ];
        let c = sample_c();
        let (s, tan) = isochoric_response(&br, &c).unwrap();
        assert!(s.ddot(&c).abs() < 1e-12);
        let h = 1e-6;
        for r in 0..6 {
            let d = basis(r);
            let fd = (isochoric_response(&br, &(c + d * h)).unwrap().0 - isochoric_response(&br, &(c - d * h)).unwrap().0)
                * (1.0 / h);
            assert!((tan.ddot2(&d) - fd).max_abs() < 1e-6, "{r}");
        }
        assert!(tan.major_asymmetry() < 1e-10);
    }

    #[test]
    fn volumetric_tangent_matches_differences() {
        let vol = Volumetric::Ln2 { kappa: 4.0 };
        let c = sample_c();
        let sv = |c: &SymTensor2| {
            let j = c.det().sqrt();
            volumetric_stress(j, vol.pressure(j), &c.inverse().unwrap())
        };
        let tan = volumetric_tangent(&vol, c.det().sqrt(), &c.inverse().unwrap());
        let h = 1e-6;
        for r in 0..6 {
            let d = basis(r);
            let fd = (sv(&(c + d * h)) - sv(&(c - d * h))) * (1.0 / h);
            assert!((tan.ddot2(&d) - fd).max_abs() < 1e-7, "{r}");
        }
    }

    #[test]
    fn volumetric_curvature_on_sample_range() {
        let quad = Volumetric::Quad { kappa: 3.0 };
        let ln2 = Volumetric::Ln2 { kappa: 3.0 };
        let e = std::f64::consts::E;
        for k in 0..=480 {
            let j = 0.2 + 4.8 * k as f64 / 480.0;
            assert!(quad.energy(j).2 > 0.0);
            let curvature = ln2.energy(j).2;
            if j < e - 1e-9 {
                assert!(curvature > 0.0, "{j}");
            } else if j > e + 1e-9 {
                assert!(curvature < 0.0, "{j}");
            }
        }
    }

    fn family(k: usize, a: f64, b: f64) -> ScaleFunction {
        match k {
            0 => ScaleFunction::SethHill { m: a * 4.0 - 2.0 },
            1 => ScaleFunction::CurnierRakotomanana { m: a * 3.0, n: b * 3.0 },
            2 => ScaleFunction::BazantItskov { m: a * 3.0 },
            3 => ScaleFunction::CurnierZysset { m: a * 4.0 - 2.0 },
            _ => ScaleFunction::Darijani { m: 0.1 + a * 2.0, n: 0.1 + b * 2.0 },
        }
    }

    proptest! {
        #[test]
        fn isochoric_stress_annihilates_c(
            g in prop::array::uniform9(-0.3f64..0.3),
            k in 0usize..5, a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let mut f = Tensor2::identity();
            for (i, v) in g.iter().enumerate() {
                f.0[i / 3][i % 3] += v;
            }
            prop_assume!(f.det() > 0.2);
            let c = f.right_cauchy_green();
            let br = [EquilibriumBranch::new(2.0, family(k, a, b))];
            let (s, tan) = isochoric_response(&br, &c).unwrap();
            prop_assert!(s.ddot(&c).abs() <= 1e-10 * s.norm().max(1.0) * c.norm());
            prop_assert!(tan.major_asymmetry() <= 1e-8 * tan.max_abs().max(1.0));
        }
    }
}
