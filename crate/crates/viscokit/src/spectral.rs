//! Eigen-decomposition of symmetric 3x3 tensors by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::tensor::{SymTensor2, Vec3};

/// Relative tolerance under which two eigenvalues are treated as equal.
pub const EPS_MULT: f64 = 1e-9;

/// Eigenvalues at or below this fraction of the largest one make the
/// tensor count as not positive definite.
pub const PD_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicity {
    Distinct,
    /// Two eigenvalues coincide; the indices are the equal pair.
    Double(usize, usize),
    Triple,
}

impl Multiplicity {
    /// Whether eigenvalues `a` and `b` were classified as equal.
    pub fn same(&self, a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        match *self {
            Multiplicity::Distinct => false,
            Multiplicity::Double(p, q) => (a == p && b == q) || (a == q && b == p),
            Multiplicity::Triple => true,
        }
    }
}

/// `A = sum_a lambda_a N_a (x) N_a` with eigenvalues in descending order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec3,
    pub eigenvectors: [Vec3; 3],
    pub multiplicity: Multiplicity,
}

impl SpectralDecomp {
    /// Eigenprojection `M_a = N_a (x) N_a`.
    pub fn projector(&self, a: usize) -> SymTensor2 {
        SymTensor2::outer(&self.eigenvectors[a])
    }

    /// `sum_a g(lambda_a) M_a`.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> SymTensor2 {
        (0..3).fold(SymTensor2::zero(), |acc, a| acc + self.projector(a) * g(self.eigenvalues[a]))
    }

    pub fn reconstruct(&self) -> SymTensor2 {
        self.map(|x| x)
    }
}

fn jacobi(a: &SymTensor2) -> (Vec3, [Vec3; 3]) {
    let mut m = *a.as_array();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..64 {
        let off = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
        let diag = m[0][0].powi(2) + m[1][1].powi(2) + m[2][2].powi(2);
        if off == 0.0 || off <= 1e-36 * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = m[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            m[p][q] = 0.0;
            m[q][p] = 0.0;
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let vals = [m[0][0], m[1][1], m[2][2]];
    let vecs = [0, 1, 2].map(|a| [v[0][a], v[1][a], v[2][a]]);
    (vals, vecs)
}

fn fix_sign(mut n: Vec3) -> Vec3 {
    let mut best = 0;
    for k in 1..3 {
        if n[k].abs() > n[best].abs() {
            best = k;
        }
    }
    if n[best] < 0.0 {
        n = n.map(|x| -x);
    }
    n
}

/// Classifies eigenvalue coincidence with the relative test
/// `|a - b| <= EPS_MULT * max(|a|, |b|)`, merging transitively.
pub fn classify_multiplicity(values: &Vec3) -> Multiplicity {
    let close = |a: f64, b: f64| (a - b).abs() <= EPS_MULT * a.abs().max(b.abs());
    let e01 = close(values[0], values[1]);
    let e12 = close(values[1], values[2]);
    let e02 = close(values[0], values[2]);
    match (e01, e12, e02) {
        (true, true, _) | (true, _, true) | (_, true, true) => Multiplicity::Triple,
        (true, false, false) => Multiplicity::Double(0, 1),
        (false, true, false) => Multiplicity::Double(1, 2),
        (false, false, true) => Multiplicity::Double(0, 2),
        (false, false, false) => Multiplicity::Distinct,
    }
}

/// Decomposes a symmetric tensor without checking definiteness.
pub fn decompose(a: &SymTensor2) -> SpectralDecomp {
    let (vals, vecs) = jacobi(a);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| vals[y].partial_cmp(&vals[x]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.map(|k| vals[k]);
    let eigenvectors = order.map(|k| fix_sign(vecs[k]));
    SpectralDecomp {
        eigenvalues,
        eigenvectors,
        multiplicity: classify_multiplicity(&eigenvalues),
    }
}

/// Decomposes an SPD tensor, failing with `NotPositiveDefinite` otherwise.
pub fn spectral_decompose(a: &SymTensor2) -> Result<SpectralDecomp> {
    if !a.is_finite() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
            max_eigenvalue: f64::NAN,
        });
    }
    let d = decompose(a);
    let (max, min) = (d.eigenvalues[0], d.eigenvalues[2]);
    if max <= 0.0 || min <= PD_FLOOR * max {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(d)
}
