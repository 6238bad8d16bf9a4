//! Second-, fourth- and sixth-order Cartesian tensors in three dimensions.
//!
//! Fourth- and sixth-order tensors are stored densely in row-major index
//! order. Symmetric second-order tensors map to 6-vectors in the Mandel
//! basis, which makes minor-symmetric fourth-order tensors 6x6 matrices.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix6, Vector6};

pub type Vec3 = [f64; 3];

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Voigt/Mandel ordering: 11, 22, 33, 12, 23, 13.
pub const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

const MANDEL_W: [f64; 6] = [1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2];

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// General (not necessarily symmetric) second-order tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor2(pub [[f64; 3]; 3]);

impl Tensor2 {
    pub fn zero() -> Self {
        Tensor2([[0.0; 3]; 3])
    }

    pub fn identity() -> Self {
        Tensor2([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(d: Vec3) -> Self {
        Tensor2([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn transpose(&self) -> Self {
        let a = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[j][i];
            }
        }
        Tensor2(t)
    }

    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        let (a, b) = (&self.0, &other.0);
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Tensor2(c)
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn inverse(&self) -> Option<Tensor2> {
        let a = &self.0;
        let det = self.det();
        let scale = self.norm().powi(3);
        if det == 0.0 || !det.is_finite() || det.abs() <= 1e-300 * scale.max(1e-300) {
            return None;
        }
        let cof = [
            [
                a[1][1] * a[2][2] - a[1][2] * a[2][1],
                a[0][2] * a[2][1] - a[0][1] * a[2][2],
                a[0][1] * a[1][2] - a[0][2] * a[1][1],
            ],
            [
                a[1][2] * a[2][0] - a[1][0] * a[2][2],
                a[0][0] * a[2][2] - a[0][2] * a[2][0],
                a[0][2] * a[1][0] - a[0][0] * a[1][2],
            ],
            [
                a[1][0] * a[2][1] - a[1][1] * a[2][0],
                a[0][1] * a[2][0] - a[0][0] * a[2][1],
                a[0][0] * a[1][1] - a[0][1] * a[1][0],
            ],
        ];
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                inv[i][j] = cof[i][j] / det;
            }
        }
        Some(Tensor2(inv))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn ddot(&self, other: &Tensor2) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// `F^T F`.
    pub fn right_cauchy_green(&self) -> SymTensor2 {
        SymTensor2::from_tensor(&self.transpose().matmul(self))
    }

    /// `self . S`, where `S` is symmetric.
    pub fn mul_sym(&self, s: &SymTensor2) -> Tensor2 {
        self.matmul(&s.to_tensor2())
    }

    pub fn symmetric_part(&self) -> SymTensor2 {
        SymTensor2::from_tensor(self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(mut self, rhs: Tensor2) -> Tensor2 {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(mut self, rhs: Tensor2) -> Tensor2 {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(mut self, s: f64) -> Tensor2 {
        self.0.iter_mut().flatten().for_each(|v| *v *= s);
        self
    }
}

/// Symmetric second-order tensor. Symmetry is enforced on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor2 {
    m: [[f64; 3]; 3],
}

impl SymTensor2 {
    /// Builds from a full matrix, keeping its symmetric part.
    pub fn new(a: [[f64; 3]; 3]) -> Self {
        let mut m = a;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let v = 0.5 * (a[i][j] + a[j][i]);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        SymTensor2 { m }
    }

    pub fn from_tensor(t: &Tensor2) -> Self {
        Self::new(t.0)
    }

    pub fn zero() -> Self {
        SymTensor2 { m: [[0.0; 3]; 3] }
    }

    pub fn identity() -> Self {
        Self::diag([1.0, 1.0, 1.0])
    }

    pub fn diag(d: Vec3) -> Self {
        SymTensor2 {
            m: [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]],
        }
    }

    /// Components in the order 11, 22, 33, 12, 23, 13.
    pub fn from_voigt(v: [f64; 6]) -> Self {
        SymTensor2 {
            m: [[v[0], v[3], v[5]], [v[3], v[1], v[4]], [v[5], v[4], v[2]]],
        }
    }

    pub fn voigt(&self) -> [f64; 6] {
        VOIGT.map(|(i, j)| self.m[i][j])
    }

    pub fn to_mandel(&self) -> Vector6<f64> {
        Vector6::from_fn(|r, _| MANDEL_W[r] * self.m[VOIGT[r].0][VOIGT[r].1])
    }

    pub fn from_mandel(v: &Vector6<f64>) -> Self {
        let mut w = [0.0; 6];
        for r in 0..6 {
            w[r] = v[r] / MANDEL_W[r];
        }
        Self::from_voigt(w)
    }

    /// `a (x) a`.
    pub fn outer(a: &Vec3) -> Self {
        Self::sym_outer(a, a)
    }

    /// `(a (x) b + b (x) a) / 2`.
    pub fn sym_outer(a: &Vec3, b: &Vec3) -> Self {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = 0.5 * (a[i] * b[j] + b[i] * a[j]);
            }
        }
        SymTensor2 { m }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn as_array(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn to_tensor2(&self) -> Tensor2 {
        Tensor2(self.m)
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> f64 {
        self.to_tensor2().det()
    }

    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn dev(&self) -> SymTensor2 {
        *self - SymTensor2::identity() * (self.trace() / 3.0)
    }

    pub fn inverse(&self) -> Option<SymTensor2> {
        self.to_tensor2().inverse().map(|t| SymTensor2::from_tensor(&t))
    }

    /// General matrix product; the result is not symmetric in general.
    pub fn matmul(&self, other: &SymTensor2) -> Tensor2 {
        self.to_tensor2().matmul(&other.to_tensor2())
    }

    /// `A B A` for symmetric `A` and `B`, which is symmetric.
    pub fn sandwich(&self, b: &SymTensor2) -> SymTensor2 {
        SymTensor2::from_tensor(&self.matmul(b).matmul(&self.to_tensor2()))
    }

    /// `F^T S F`.
    pub fn pull_back(&self, f: &Tensor2) -> SymTensor2 {
        SymTensor2::from_tensor(&f.transpose().matmul(&self.to_tensor2()).matmul(f))
    }

    /// `F S F^T`.
    pub fn push_forward(&self, f: &Tensor2) -> SymTensor2 {
        SymTensor2::from_tensor(&f.matmul(&self.to_tensor2()).matmul(&f.transpose()))
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(mut self, rhs: SymTensor2) -> SymTensor2 {
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] += rhs.m[i][j];
            }
        }
        self
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: SymTensor2) {
        *self = *self + rhs;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(mut self, rhs: SymTensor2) -> SymTensor2 {
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] -= rhs.m[i][j];
            }
        }
        self
    }
}

impl SubAssign for SymTensor2 {
    fn sub_assign(&mut self, rhs: SymTensor2) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(mut self, s: f64) -> SymTensor2 {
        self.m.iter_mut().flatten().for_each(|v| *v *= s);
        self
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        self * -1.0
    }
}

#[inline]
fn idx4(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 3 + j) * 3 + k) * 3 + l
}

/// Fourth-order tensor `A_ijkl`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    c: [f64; 81],
}

impl Tensor4 {
    pub fn zero() -> Self {
        Tensor4 { c: [0.0; 81] }
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        t.c[idx4(i, j, k, l)] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// Symmetric identity on symmetric tensors.
    ///
    /// ```text
    /// I_ijkl = (d_ik d_jl + d_il d_jk) / 2
    /// ```
    pub fn identity_sym() -> Self {
        Self::from_fn(|i, j, k, l| 0.5 * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k)))
    }

    /// `A (x) B`, i.e. `A_ij B_kl`.
    pub fn dyad(a: &SymTensor2, b: &SymTensor2) -> Self {
        let (a, b) = (a.as_array(), b.as_array());
        Self::from_fn(|i, j, k, l| a[i][j] * b[k][l])
    }

    /// Symmetrized box product.
    ///
    /// ```text
    /// (A o B)_ijkl = (A_ik B_jl + A_il B_jk) / 2
    /// ```
    pub fn odot(a: &SymTensor2, b: &SymTensor2) -> Self {
        let (a, b) = (a.as_array(), b.as_array());
        Self::from_fn(|i, j, k, l| 0.5 * (a[i][k] * b[j][l] + a[i][l] * b[j][k]))
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[idx4(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.c[idx4(i, j, k, l)] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    /// `A_ijkl B_kl`.
    pub fn ddot2(&self, b: &SymTensor2) -> SymTensor2 {
        let b = b.as_array();
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.c[idx4(i, j, k, l)] * b[k][l];
                    }
                }
                m[i][j] = s;
            }
        }
        SymTensor2::new(m)
    }

    /// `B_ij A_ijkl`.
    pub fn left_ddot2(&self, b: &SymTensor2) -> SymTensor2 {
        let b = b.as_array();
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let bij = b[i][j];
                if bij == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    for l in 0..3 {
                        m[k][l] += bij * self.c[idx4(i, j, k, l)];
                    }
                }
            }
        }
        SymTensor2::new(m)
    }

    /// `A_ijmn B_mnkl`.
    pub fn ddot4(&self, b: &Tensor4) -> Tensor4 {
        let mut out = Tensor4::zero();
        for ij in 0..9 {
            for mn in 0..9 {
                let a = self.c[ij * 9 + mn];
                if a == 0.0 {
                    continue;
                }
                let row = &b.c[mn * 9..mn * 9 + 9];
                let dst = &mut out.c[ij * 9..ij * 9 + 9];
                for (d, r) in dst.iter_mut().zip(row) {
                    *d += a * r;
                }
            }
        }
        out
    }

    /// Major transpose `A_klij`.
    pub fn transpose(&self) -> Tensor4 {
        let mut out = Tensor4::zero();
        for ij in 0..9 {
            for kl in 0..9 {
                out.c[kl * 9 + ij] = self.c[ij * 9 + kl];
            }
        }
        out
    }

    /// 6x6 Mandel matrix. Only meaningful for minor-symmetric tensors.
    pub fn to_mandel(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|r, s| {
            let (i, j) = VOIGT[r];
            let (k, l) = VOIGT[s];
            MANDEL_W[r] * MANDEL_W[s] * self.get(i, j, k, l)
        })
    }

    pub fn from_mandel(m: &Matrix6<f64>) -> Tensor4 {
        let map = |i: usize, j: usize| -> usize {
            VOIGT.iter().position(|&(a, b)| (a, b) == (i, j) || (b, a) == (i, j)).unwrap()
        };
        Self::from_fn(|i, j, k, l| {
            let (r, s) = (map(i, j), map(k, l));
            m[(r, s)] / (MANDEL_W[r] * MANDEL_W[s])
        })
    }

    /// Inverse on the space of symmetric tensors.
    pub fn inverse_sym(&self) -> Option<Tensor4> {
        self.to_mandel().try_inverse().map(|m| Tensor4::from_mandel(&m))
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Largest violation of `A_ijkl = A_jikl = A_ijlk`.
    pub fn minor_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = self.get(i, j, k, l);
                        worst = worst.max((v - self.get(j, i, k, l)).abs());
                        worst = worst.max((v - self.get(i, j, l, k)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of `A_ijkl = A_klij`.
    pub fn major_asymmetry(&self) -> f64 {
        (self.clone() - self.transpose()).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn scale_add(&mut self, s: f64, other: &Tensor4) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += s * b;
        }
    }
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(mut self, rhs: Tensor4) -> Tensor4 {
        self += &rhs;
        self
    }
}

impl AddAssign<&Tensor4> for Tensor4 {
    fn add_assign(&mut self, rhs: &Tensor4) {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(mut self, rhs: Tensor4) -> Tensor4 {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for Tensor4 {
    type Output = Tensor4;
    fn mul(mut self, s: f64) -> Tensor4 {
        self.c.iter_mut().for_each(|v| *v *= s);
        self
    }
}

impl Mul<f64> for &Tensor4 {
    type Output = Tensor4;
    fn mul(self, s: f64) -> Tensor4 {
        self.clone() * s
    }
}

/// Sixth-order tensor `L_ijklmn`, heap allocated.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor6 {
    c: Vec<f64>,
}

impl Tensor6 {
    pub fn zero() -> Self {
        Tensor6 { c: vec![0.0; 729] }
    }

    #[inline]
    fn idx(i: usize, j: usize, k: usize, l: usize, m: usize, n: usize) -> usize {
        idx4(i, j, k, l) * 9 + m * 3 + n
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, m: usize, n: usize) -> f64 {
        self.c[Self::idx(i, j, k, l, m, n)]
    }

    /// Adds `s * A (x) B (x) C`.
    pub fn add_triad(&mut self, s: f64, a: &SymTensor2, b: &SymTensor2, c: &SymTensor2) {
        let (a, b, c) = (a.as_array(), b.as_array(), c.as_array());
        let mut bc = [0.0; 81];
        for kl in 0..9 {
            let bv = b[kl / 3][kl % 3];
            for mn in 0..9 {
                bc[kl * 9 + mn] = bv * c[mn / 3][mn % 3];
            }
        }
        for ij in 0..9 {
            let av = s * a[ij / 3][ij % 3];
            if av == 0.0 {
                continue;
            }
            let dst = &mut self.c[ij * 81..ij * 81 + 81];
            for (d, v) in dst.iter_mut().zip(bc.iter()) {
                *d += av * v;
            }
        }
    }

    /// `T_ij L_ijklmn`.
    pub fn left_ddot2(&self, t: &SymTensor2) -> Tensor4 {
        let t = t.as_array();
        let mut out = Tensor4::zero();
        for ij in 0..9 {
            let tv = t[ij / 3][ij % 3];
            if tv == 0.0 {
                continue;
            }
            let src = &self.c[ij * 81..ij * 81 + 81];
            for (d, v) in out.c.iter_mut().zip(src) {
                *d += tv * v;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn scale_add(&mut self, s: f64, other: &Tensor6) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += s * b;
        }
    }
}

impl Sub for &Tensor6 {
    type Output = Tensor6;
    fn sub(self, rhs: &Tensor6) -> Tensor6 {
        Tensor6 {
            c: self.c.iter().zip(rhs.c.iter()).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Solves `A : X = B` for symmetric `X`, with `A` minor-symmetric.
pub fn solve_sym(a: &Tensor4, b: &SymTensor2) -> Option<SymTensor2> {
    let lu = a.to_mandel().lu();
    lu.solve(&b.to_mandel()).map(|x| SymTensor2::from_mandel(&x))
}
