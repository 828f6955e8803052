//! 2×2 real matrices, enough for Jacobian products along orbits.

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

#[inline]
pub fn apply(a: &Mat2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

#[inline]
pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

#[inline]
pub fn inverse(a: &Mat2) -> Option<Mat2> {
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]])
}

pub fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

pub fn scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

#[inline]
pub fn norm(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

/// Largest and smallest singular values.
pub fn singular_values(a: &Mat2) -> (f64, f64) {
    // eigenvalues of AᵀA via trace and determinant
    let p = a[0][0] * a[0][0] + a[1][0] * a[1][0];
    let q = a[0][1] * a[0][1] + a[1][1] * a[1][1];
    let r = a[0][0] * a[0][1] + a[1][0] * a[1][1];
    let tr = p + q;
    let disc = ((p - q) * (p - q) + 4.0 * r * r).sqrt();
    let smax = (0.5 * (tr + disc)).sqrt();
    let d = det(a).abs();
    let smin = if smax > 0.0 { d / smax } else { 0.0 };
    (smax, smin)
}

/// Real eigenvalues and unit eigenvectors, ordered by decreasing modulus.
/// `None` if the spectrum is complex.
pub fn real_eigen(a: &Mat2) -> Option<[(f64, [f64; 2]); 2]> {
    let tr = a[0][0] + a[1][1];
    let d = det(a);
    let disc = tr * tr - 4.0 * d;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let mut ls = [0.5 * (tr + s), 0.5 * (tr - s)];
    if ls[0].abs() < ls[1].abs() {
        ls.swap(0, 1);
    }
    let vec_for = |l: f64| {
        let v = if (a[0][1]).abs() > (a[1][0]).abs() {
            [a[0][1], l - a[0][0]]
        } else if a[1][0] != 0.0 {
            [l - a[1][1], a[1][0]]
        } else if (a[0][0] - l).abs() < (a[1][1] - l).abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let nv = norm(v);
        [v[0] / nv, v[1] / nv]
    };
    Some([(ls[0], vec_for(ls[0])), (ls[1], vec_for(ls[1]))])
}
