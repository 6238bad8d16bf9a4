//! Projection tensors of generalized strains.
//!
//! With `x_a` the eigenvalues of `C` and `f(x) = E(sqrt x)`, every
//! coefficient below is a divided difference of `f`:
//!
//! ```text
//! d_a      = 2 f[x_a, x_a]          theta_ab = 2 f[x_a, x_b]
//! f_a      = 8 f[x_a, x_a, x_a]     xi_ab    = f[x_a, x_b, x_b]
//! eta      = f[x_1, x_2, x_3]
//! ```
//!
//! Divided differences over nearly coincident nodes are evaluated by
//! Hermite-Genocchi quadrature, so coefficients stay accurate through
//! eigenvalue crossings and coincide with their limits at equality.

use crate::spectral::{Multiplicity, SpectralDecomp};
use crate::strains::ScaleFunction;
use crate::tensor::{SymTensor2, Tensor4, Tensor6};

/// Relative node spread below which divided differences use quadrature.
pub const QUADRATURE_SPREAD: f64 = 0.05;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `f(x) = E(sqrt x)` and its derivatives in `x`.
#[derive(Clone, Copy, Debug)]
pub struct SquaredArgument<'a>(pub &'a ScaleFunction);

impl SquaredArgument<'_> {
    pub fn f0(&self, x: f64) -> f64 {
        self.0.value(x.sqrt())
    }

    pub fn f1(&self, x: f64) -> f64 {
        let l = x.sqrt();
        self.0.eval(l).de / (2.0 * l)
    }

    pub fn f2(&self, x: f64) -> f64 {
        let l = x.sqrt();
        let v = self.0.eval(l);
        0.25 * (v.d2e - v.de / l) / x
    }

    fn near(x: f64, y: f64) -> bool {
        (x - y).abs() <= QUADRATURE_SPREAD * x.abs().max(y.abs())
    }

    /// `f[x, y]`.
    pub fn dd1(&self, x: f64, y: f64) -> f64 {
        if x == y {
            return self.f1(x);
        }
        if Self::near(x, y) {
            let mut s = 0.0;
            for (t, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let u = 0.5 * (1.0 + t);
                s += w * self.f1(x + u * (y - x));
            }
            return 0.5 * s;
        }
        self.0.squared_difference(x, y) / (x - y)
    }

    /// `f[x, y, z]`, symmetric in its arguments.
    pub fn dd2(&self, x: f64, y: f64, z: f64) -> f64 {
        let mut v = [x, y, z];
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let [lo, mid, hi] = v;
        if Self::near(lo, hi) {
            if lo == hi {
                return 0.5 * self.f2(lo);
            }
            let mut s = 0.0;
            for (tu, wu) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let u = 0.5 * (1.0 + tu);
                for (tv, wv) in GL_NODES.iter().zip(GL_WEIGHTS) {
                    let w = 0.5 * (1.0 + tv) * (1.0 - u);
                    s += wu * wv * (1.0 - u) * self.f2(lo + u * (mid - lo) + w * (hi - lo));
                }
            }
            return 0.25 * s;
        }
        (self.dd1(lo, mid) - self.dd1(mid, hi)) / (lo - hi)
    }
}

/// Scalar coefficients of `Q`, `Q^-1` and `L` in the eigenbasis of `C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrainCoefficients {
    /// Eigenvalues of `C` after merging classified-equal groups.
    pub x: [f64; 3],
    pub e: [f64; 3],
    pub d: [f64; 3],
    pub theta: [[f64; 3]; 3],
    pub curvature: [f64; 3],
    pub xi: [[f64; 3]; 3],
    pub eta: f64,
}

fn merged_eigenvalues(d: &SpectralDecomp) -> [f64; 3] {
    let v = d.eigenvalues;
    match d.multiplicity {
        Multiplicity::Distinct => v,
        Multiplicity::Double(p, q) => {
            let mut x = v;
            let m = 0.5 * (v[p] + v[q]);
            x[p] = m;
            x[q] = m;
            x
        }
        Multiplicity::Triple => [(v[0] + v[1] + v[2]) / 3.0; 3],
    }
}

pub fn strain_coefficients(dec: &SpectralDecomp, f: &ScaleFunction) -> StrainCoefficients {
    let g = SquaredArgument(f);
    let x = merged_eigenvalues(dec);
    let e = dec.eigenvalues.map(|v| f.value(v.sqrt()));
    let d = x.map(|v| 2.0 * g.f1(v));
    let curvature = x.map(|v| 4.0 * g.f2(v));
    let mut theta = [[0.0; 3]; 3];
    let mut xi = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            theta[a][b] = if a == b { d[a] } else { 2.0 * g.dd1(x[a], x[b]) };
            xi[a][b] = g.dd2(x[a], x[b], x[b]);
        }
    }
    StrainCoefficients {
        x,
        e,
        d,
        theta,
        curvature,
        xi,
        eta: g.dd2(x[0], x[1], x[2]),
    }
}

fn pair_products(dec: &SpectralDecomp) -> [[SymTensor2; 3]; 3] {
    let n = &dec.eigenvectors;
    let mut s = [[SymTensor2::zero(); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            s[a][b] = SymTensor2::sym_outer(&n[a], &n[b]);
        }
    }
    s
}

fn assemble_q(dec: &SpectralDecomp, diag: [f64; 3], off: [[f64; 3]; 3]) -> Tensor4 {
    let s = pair_products(dec);
    let mut q = Tensor4::zero();
    for a in 0..3 {
        q.scale_add(diag[a], &Tensor4::dyad(&s[a][a], &s[a][a]));
        for b in (a + 1)..3 {
            q.scale_add(2.0 * off[a][b], &Tensor4::dyad(&s[a][b], &s[a][b]));
        }
    }
    q
}

/// `Q = 2 dE/dC`.
pub fn projection_q(dec: &SpectralDecomp, f: &ScaleFunction) -> Tensor4 {
    let c = strain_coefficients(dec, f);
    assemble_q(dec, c.d, c.theta)
}

/// Inverse of `Q` on symmetric tensors, built from reciprocal coefficients.
pub fn projection_q_inv(dec: &SpectralDecomp, f: &ScaleFunction) -> Tensor4 {
    let c = strain_coefficients(dec, f);
    assemble_q(dec, c.d.map(|v| 1.0 / v), c.theta.map(|r| r.map(|v| 1.0 / v)))
}

/// `H_abc = 8 S_ab (x) S_ca (x) S_bc` with `S_ab = sym(N_a (x) N_b)`.
fn add_h(l: &mut Tensor6, coef: f64, s: &[[SymTensor2; 3]; 3], a: usize, b: usize, c: usize) {
    l.add_triad(8.0 * coef, &s[a][b], &s[c][a], &s[b][c]);
}

/// `L = 4 d^2E/dC dC`; the leading index pair belongs to the strain.
pub fn projection_l(dec: &SpectralDecomp, f: &ScaleFunction) -> Tensor6 {
    let c = strain_coefficients(dec, f);
    let s = pair_products(dec);
    let mut l = Tensor6::zero();
    for a in 0..3 {
        l.add_triad(c.curvature[a], &s[a][a], &s[a][a], &s[a][a]);
        for b in 0..3 {
            if a == b {
                continue;
            }
            add_h(&mut l, c.xi[a][b], &s, a, b, b);
            add_h(&mut l, c.xi[a][b], &s, b, a, b);
            add_h(&mut l, c.xi[a][b], &s, b, b, a);
        }
    }
    for (a, b, cc) in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
        add_h(&mut l, c.eta, &s, a, b, cc);
    }
    l
}

/// Strain, `Q` and optionally `L` from one decomposition.
#[derive(Clone, Debug)]
pub struct StrainKinematics {
    pub strain: SymTensor2,
    pub q: Tensor4,
    pub l: Option<Tensor6>,
}

pub fn strain_kinematics(dec: &SpectralDecomp, f: &ScaleFunction, with_l: bool) -> StrainKinematics {
    let c = strain_coefficients(dec, f);
    let strain = (0..3).fold(SymTensor2::zero(), |acc, a| acc + dec.projector(a) * c.e[a]);
    StrainKinematics {
        strain,
        q: assemble_q(dec, c.d, c.theta),
        l: with_l.then(|| projection_l(dec, f)),
    }
}

/// `P = I - (1/3) C^-1 (x) C`.
pub fn projection_p(c: &SymTensor2, c_inv: &SymTensor2) -> Tensor4 {
    Tensor4::identity_sym() - Tensor4::dyad(c_inv, c) * (1.0 / 3.0)
}

/// `P~ = C^-1 o C^-1 - (1/3) C^-1 (x) C^-1`.
pub fn projection_p_tilde(c_inv: &SymTensor2) -> Tensor4 {
    Tensor4::odot(c_inv, c_inv) - Tensor4::dyad(c_inv, c_inv) * (1.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::spectral::{decompose, spectral_decompose};
    use crate::strains::strain_from_decomp;
    use crate::tensor::{Tensor2, VOIGT};

    fn cr() -> ScaleFunction {
        ScaleFunction::CurnierRakotomanana { m: 1.2, n: 1.4 }
    }

    fn sample_c() -> SymTensor2 {
        let f = Tensor2([[1.2, 0.3, -0.1], [0.05, 0.9, 0.2], [0.1, -0.15, 1.1]]);
        f.right_cauchy_green()
    }

    fn basis(r: usize) -> SymTensor2 {
        let (i, j) = VOIGT[r];
        let mut m = [[0.0; 3]; 3];
        m[i][j] = 1.0;
        m[j][i] = 1.0;
        SymTensor2::new(m)
    }

    fn strain_at(c: &SymTensor2, f: &ScaleFunction) -> SymTensor2 {
        strain_from_decomp(&decompose(c), f)
    }

    #[test]
    fn q_matches_strain_differences() {
        for f in [cr(), ScaleFunction::HENCKY, ScaleFunction::SethHill { m: -2.0 }] {
            let c = sample_c();
            let q = projection_q(&spectral_decompose(&c).unwrap(), &f);
            let h = 1e-6;
            for r in 0..6 {
                let dir = basis(r);
                let fd = (strain_at(&(c + dir * h), &f) - strain_at(&(c - dir * h), &f)) * (1.0 / h);
                let err = (q.ddot2(&dir) - fd).max_abs();
                assert!(err < 1e-8, "{f} dir {r}: {err}");
            }
        }
    }

    #[test]
    fn l_matches_q_differences() {
        let c = sample_c();
        let t = SymTensor2::new([[0.7, -0.2, 0.4], [0.0, -1.1, 0.3], [0.0, 0.0, 0.5]]);
        let h = 1e-6;
        for f in [cr(), ScaleFunction::Darijani { m: 0.8, n: 1.3 }] {
            let l = projection_l(&spectral_decompose(&c).unwrap(), &f);
            for r in 0..6 {
                let dir = basis(r);
                let tq = |c: SymTensor2| projection_q(&decompose(&c), &f).left_ddot2(&t);
                let fd = (tq(c + dir * h) - tq(c - dir * h)) * (1.0 / h);
                let err = (l.left_ddot2(&t).ddot2(&dir) - fd).max_abs();
                assert!(err < 1e-7, "{f} dir {r}: {err}");
            }
        }
    }

    #[test]
    fn q_inverse_is_inverse() {
        let dec = spectral_decompose(&sample_c()).unwrap();
        let q = projection_q(&dec, &cr());
        let qi = projection_q_inv(&dec, &cr());
        assert!((q.ddot4(&qi) - Tensor4::identity_sym()).max_abs() < 1e-12);
    }

    #[test]
    fn hencky_at_identity_gives_identity_q() {
        let dec = spectral_decompose(&SymTensor2::identity()).unwrap();
        let q = projection_q(&dec, &ScaleFunction::HENCKY);
        assert!((q - Tensor4::identity_sym()).max_abs() < 1e-15);
    }

    #[test]
    fn coefficients_continuous_across_coincidence() {
        let f = cr();
        let exact = strain_coefficients(&decompose(&SymTensor2::diag([2.0, 1.5, 1.5])), &f);
        for gap in [1e-4, 1e-7, 1e-10, 1e-13] {
            let near = strain_coefficients(&decompose(&SymTensor2::diag([2.0, 1.5 + gap, 1.5])), &f);
            let tol = 1e-12 + 10.0 * gap;
            assert!((near.theta[1][2] - exact.theta[1][2]).abs() < tol, "gap {gap}");
            assert!((near.xi[1][2] - exact.xi[1][2]).abs() < tol, "gap {gap}");
            assert!((near.eta - exact.eta).abs() < tol, "gap {gap}");
        }
        assert!((exact.theta[1][2] - exact.d[1]).abs() < 1e-15);
        assert!((exact.xi[1][2] - exact.curvature[1] / 8.0).abs() < 1e-14);
        assert!((exact.eta - exact.xi[0][1]).abs() < 1e-14);
    }

    #[test]
    fn divided_differences_against_explicit_formulas() {
        let f = cr();
        let g = SquaredArgument(&f);
        let (x, y) = (1.3, 1.31);
        let explicit1 = (g.f0(x) - g.f0(y)) / (x - y);
        assert!((g.dd1(x, y) - explicit1).abs() < 1e-12);
        let (a, b, c) = (0.8, 1.7, 2.9);
        let explicit2 = g.f0(a) / ((a - b) * (a - c)) + g.f0(b) / ((b - a) * (b - c)) + g.f0(c) / ((c - a) * (c - b));
        assert!((g.dd2(a, b, c) - explicit2).abs() < 1e-13);
        let (p, q, r) = (1.5, 1.51, 1.49);
        let quad = g.dd2(p, q, r);
        let via_first = (g.dd1(p, q) - g.dd1(q, r)) / (p - r);
        assert!((quad - via_first).abs() < 1e-9);
    }

    #[test]
    fn lemma_identities() {
        let dec = spectral_decompose(&sample_c()).unwrap();
        let m: Vec<_> = (0..3).map(|a| dec.projector(a)).collect();
        for a in 0..3 {
            for b in 0..3 {
                let mmab = Tensor4::dyad(&m[a], &m[b]);
                let odab = Tensor4::odot(&m[a], &m[b]);
                for c in 0..3 {
                    for d in 0..3 {
                        let left = Tensor4::dyad(&m[a], &m[b]).ddot4(&Tensor4::dyad(&m[c], &m[d]));
                        let expect = if b == c { Tensor4::dyad(&m[a], &m[d]) } else { Tensor4::zero() };
                        assert!((left - expect).max_abs() < 1e-14);
                        let left = odab.ddot4(&Tensor4::odot(&m[c], &m[d]));
                        let expect = if a == c && b == d && a != b {
                            odab.clone() * 0.5
                        } else if a == d && b == c && a != b {
                            Tensor4::odot(&m[a], &m[b]) * 0.5
                        } else if a == b && b == c && c == d {
                            mmab.clone()
                        } else {
                            Tensor4::zero()
                        };
                        assert!((left - expect).max_abs() < 1e-14, "{a}{b}{c}{d}");
                    }
                }
            }
        }
    }

    #[test]
    fn deviatoric_projectors() {
        let c = sample_c();
        let ci = c.inverse().unwrap();
        let p = projection_p(&c, &ci);
        let s = SymTensor2::new([[1.0, 0.2, 0.0], [0.0, -0.3, 0.4], [0.0, 0.0, 2.0]]);
        assert!(p.ddot2(&s).ddot(&c).abs() < 1e-13);
        assert!((p.ddot4(&p) - p.clone()).max_abs() < 1e-13);
        let pt = projection_p_tilde(&ci);
        assert!(pt.minor_asymmetry() < 1e-15 && pt.major_asymmetry() < 1e-15);
    }

    proptest! {
        #[test]
        fn q_inverse_for_moderate_stretch(
            l in prop::array::uniform3(0.55f64..1.8),
            angles in prop::array::uniform3(0.0f64..6.28),
            m in 0.0f64..3.0, n in 0.0f64..3.0,
        ) {
            let (c0, s0) = (angles[0].cos(), angles[0].sin());
            let (c1, s1) = (angles[1].cos(), angles[1].sin());
            let r = Tensor2([[c0, -s0, 0.0], [s0, c0, 0.0], [0.0, 0.0, 1.0]])
                .matmul(&Tensor2([[1.0, 0.0, 0.0], [0.0, c1, -s1], [0.0, s1, c1]]));
            let c = SymTensor2::diag([l[0] * l[0], l[1] * l[1], l[2] * l[2]]).push_forward(&r);
            let dec = spectral_decompose(&c).unwrap();
            let id = Tensor4::identity_sym();
            for f in [ScaleFunction::CurnierRakotomanana { m, n }, ScaleFunction::SethHill { m: m - 1.5 }, ScaleFunction::HENCKY] {
                let q = projection_q(&dec, &f);
                let qi = projection_q_inv(&dec, &f);
                prop_assert!((q.ddot4(&qi) - id.clone()).norm() < 1e-12);
                prop_assert!(q.major_asymmetry() < 1e-13 * q.max_abs());
            }
        }
    }
}
