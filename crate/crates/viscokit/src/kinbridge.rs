//! Checks relating the internal-variable picture to a multiplicative split
//! `F = Fe Fv`, with the internal variable read as `Cv = Fv^T Fv`.

use crate::error::{Error, Result};
use crate::spectral::spectral_decompose;
use crate::tensor::{SymTensor2, Tensor2, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplicativePair {
    pub f: Tensor2,
    pub fv: Tensor2,
}

impl MultiplicativePair {
    pub fn new(f: Tensor2, fv: Tensor2) -> Result<Self> {
        for d in [f.det(), fv.det()] {
            if !(d > 0.0) {
                return Err(Error::NonPositiveJacobian(d));
            }
        }
        Ok(MultiplicativePair { f, fv })
    }

    pub fn c(&self) -> SymTensor2 {
        self.f.right_cauchy_green()
    }

    pub fn cv(&self) -> SymTensor2 {
        self.fv.right_cauchy_green()
    }

    /// `Ce = Fv^-T C Fv^-1`.
    pub fn ce(&self) -> SymTensor2 {
        let fv_inv = self.fv.inverse().expect("det Fv > 0");
        self.c().pull_back(&fv_inv)
    }
}

/// `log A` of an SPD tensor by its eigenvalue map.
pub fn log_spd(a: &SymTensor2) -> Result<SymTensor2> {
    Ok(spectral_decompose(a)?.map(f64::ln))
}

/// `exp A` of a symmetric tensor.
pub fn exp_sym(a: &SymTensor2) -> SymTensor2 {
    crate::spectral::decompose(a).map(f64::exp)
}

/// `(tr X, tr X^2, tr X^3)`.
pub fn trace_powers(x: &Tensor2) -> Vec3 {
    let x2 = x.matmul(x);
    [x.trace(), x2.trace(), x2.matmul(x).trace()]
}

/// Trace powers of `(Ce - I)/2` and of `((C - Cv)/2) Cv^-1`.
pub fn invariants_equivalence(p: &MultiplicativePair) -> Result<(Vec3, Vec3)> {
    let e_hat = (p.ce() - SymTensor2::identity()) * 0.5;
    let gamma = p.cv();
    let gamma_inv = gamma.inverse().ok_or(Error::NonPositiveJacobian(gamma.det()))?;
    let e = (p.c() - gamma) * 0.5;
    Ok((trace_powers(&e_hat.to_tensor2()), trace_powers(&e.matmul(&gamma_inv))))
}

/// Pair whose `Fv = sum lv_a N_a (x) N_a` is coaxial with `C = F^T F`
/// for `F = R sum l_a N_a (x) N_a`.
pub fn coaxial_pair(rotation: &Tensor2, stretches: Vec3, viscous_stretches: Vec3, triad: &[Vec3; 3]) -> Result<MultiplicativePair> {
    let build = |s: Vec3| {
        (0..3).fold(SymTensor2::zero(), |acc, a| acc + SymTensor2::outer(&triad[a]) * s[a])
    };
    let u = build(stretches).to_tensor2();
    MultiplicativePair::new(rotation.matmul(&u), build(viscous_stretches).to_tensor2())
}

/// `|ln(C)/2 - ln(Ce)/2 - ln(Cv)/2|`.
pub fn hencky_split_residual(p: &MultiplicativePair) -> Result<f64> {
    let total = log_spd(&p.c())? * 0.5;
    let elastic = log_spd(&p.ce())? * 0.5;
    let viscous = log_spd(&p.cv())? * 0.5;
    Ok((total - elastic - viscous).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triad() -> [Vec3; 3] {
        let (c, s) = (0.6f64.cos(), 0.6f64.sin());
        [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    #[test]
    fn log_exp_roundtrip() {
        let a = SymTensor2::new([[2.0, 0.3, 0.1], [0.3, 1.2, -0.2], [0.1, -0.2, 0.7]]);
        let back = exp_sym(&log_spd(&a).unwrap());
        assert!((back - a).norm() / a.norm() < 1e-12);
    }

    #[test]
    fn identity_viscous_part_gives_green_lagrange() {
        let f = Tensor2([[1.2, 0.1, 0.0], [0.0, 0.9, 0.2], [0.1, 0.0, 1.1]]);
        let p = MultiplicativePair::new(f, Tensor2::identity()).unwrap();
        let (a, b) = invariants_equivalence(&p).unwrap();
        let gl = (f.right_cauchy_green() - SymTensor2::identity()) * 0.5;
        let expect = trace_powers(&gl.to_tensor2());
        for k in 0..3 {
            assert!((a[k] - expect[k]).abs() < 1e-14 && (b[k] - expect[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn relaxed_pair_has_zero_invariants() {
        let f = Tensor2([[1.2, 0.1, 0.0], [0.0, 0.9, 0.2], [0.1, 0.0, 1.1]]);
        let (a, b) = invariants_equivalence(&MultiplicativePair::new(f, f).unwrap()).unwrap();
        assert!(a.iter().chain(b.iter()).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn coaxial_split_holds_and_rotated_fails() {
        let p = coaxial_pair(&Tensor2::identity(), [1.4, 0.8, 1.1], [1.2, 0.9, 1.05], &triad()).unwrap();
        assert!(hencky_split_residual(&p).unwrap() < 1e-14);
        let unit = coaxial_pair(&Tensor2::identity(), [1.4, 0.8, 1.1], [1.0; 3], &triad()).unwrap();
        assert!(hencky_split_residual(&unit).unwrap() < 1e-14);
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let r = Tensor2([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        let fv = SymTensor2::diag([1.5, 0.7, 1.0]).push_forward(&r).to_tensor2();
        let skew = MultiplicativePair::new(p.f, fv).unwrap();
        assert!(hencky_split_residual(&skew).unwrap() > 1e-3);
    }

    fn near_identity(g: &[f64; 9], scale: f64) -> Tensor2 {
        let mut f = Tensor2::identity();
        for (i, v) in g.iter().enumerate() {
            f.0[i / 3][i % 3] += scale * v;
        }
        f
    }

    proptest! {
        #[test]
        fn invariant_triples_agree(
            a in prop::array::uniform9(-1.0f64..1.0),
            b in prop::array::uniform9(-1.0f64..1.0),
        ) {
            let p = MultiplicativePair::new(near_identity(&a, 0.3), near_identity(&b, 0.25));
            prop_assume!(p.is_ok());
            let (x, y) = invariants_equivalence(&p.unwrap()).unwrap();
            for k in 0..3 {
                prop_assert!((x[k] - y[k]).abs() <= 1e-10 * x[k].abs().max(1.0));
            }
        }
    }
}
