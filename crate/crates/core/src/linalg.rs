//! Small dense linear-algebra helpers shared by the simulators.
//!
//! Gate matrices use the basis ordering `|s_left s_right⟩ → 2·s_left + s_right`,
//! i.e. the left (lower-index) qubit is the most significant bit.

use nalgebra::{DMatrix, Matrix2, Matrix4};
pub use num_complex::Complex64 as C64;

pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Mat2 {
    Mat2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

/// `exp(-i θ X / 2)`
pub fn rx(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    Mat2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

/// `exp(-i θ Y / 2)`
pub fn ry(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    Mat2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

/// `exp(-i θ Z / 2)`
pub fn rz(theta: f64) -> Mat2 {
    let e = C64::from_polar(1.0, -theta / 2.0);
    Mat2::new(e, ZERO, ZERO, e.conj())
}

/// CNOT with the control on the left qubit of the pair.
pub fn cnot_left_control() -> Mat4 {
    let mut m = Mat4::zeros();
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

/// CNOT with the control on the right qubit of the pair.
pub fn cnot_right_control() -> Mat4 {
    let mut m = Mat4::zeros();
    m[(0, 0)] = ONE;
    m[(1, 3)] = ONE;
    m[(2, 2)] = ONE;
    m[(3, 1)] = ONE;
    m
}

pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    m
}

/// Largest entrywise deviation of `u†u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    let p = u.adjoint() * u;
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            err = err.max((p[(i, j)] - target).norm());
        }
    }
    err
}

pub fn unitarity_error2(u: &Mat2) -> f64 {
    let p = u.adjoint() * u;
    (p - Mat2::identity())
        .iter()
        .fold(0.0, |m, z| m.max(z.norm()))
}

pub fn unitarity_error4(u: &Mat4) -> f64 {
    let p = u.adjoint() * u;
    (p - Mat4::identity())
        .iter()
        .fold(0.0, |m, z| m.max(z.norm()))
}

/// Frobenius distance between `a` and `b` after removing the best global phase.
pub fn phase_distance4(a: &Mat4, b: &Mat4) -> f64 {
    let ov: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
    (a * phase - b).norm()
}

/// Matrix exponential `exp(i·t·G)` of a real symmetric generator via its eigendecomposition.
pub fn expi_symmetric(generator: &DMatrix<f64>, t: f64) -> CMatrix {
    let eig = generator.clone().symmetric_eigen();
    let n = generator.nrows();
    let v = eig.eigenvectors.map(|x| c(x, 0.0));
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, e * t)),
    ));
    &v * d * v.adjoint()
}

pub fn to_dynamic2(m: &Mat2) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn to_dynamic4(m: &Mat4) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| m[(i, j)])
}
