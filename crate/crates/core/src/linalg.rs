//! Small dense complex linear-algebra helpers: matrix exponential and the
//! eigendecomposition of unitary (normal) matrices.
//!
//! Everything here targets the tiny matrices of this crate (dimension at
//! most 8); no external LAPACK backend is used.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use nalgebra::linalg::SymmetricEigen;

/// Pade approximation orders and the corresponding theta bounds from the
/// scaling-and-squaring method.
const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

fn pade_coeffs(order: usize) -> &'static [f64] {
    match order {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[
            17_297_280.0,
            8_648_640.0,
            1_995_840.0,
            277_200.0,
            25_200.0,
            1_512.0,
            56.0,
            1.0,
        ],
        9 => &[
            17_643_225_600.0,
            8_821_612_800.0,
            2_075_673_600.0,
            302_702_400.0,
            30_270_240.0,
            2_162_160.0,
            110_880.0,
            3_960.0,
            90.0,
            1.0,
        ],
        13 => &[
            6.476_475_253_248e16,
            3.238_237_626_624e16,
            7.771_770_303_897_6e15,
            1.187_353_796_428_8e15,
            1.290_601_952_64e14,
            1.055_947_052_16e13,
            6.704_425_728e11,
            3.352_212_864e10,
            1.323_241_92e9,
            4.084_08e7,
            960_960.0,
            16_380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!(),
    }
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with Pade approximants.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    if n == 2 {
        return expm_2x2(a);
    }

    let norm = one_norm(a);
    let (order, scale_pow) = THETA
        .iter()
        .find(|(_, theta)| norm <= *theta)
        .map(|(o, _)| (*o, 0u32))
        .unwrap_or_else(|| {
            let s = (norm / THETA[4].1).log2().ceil().max(0.0) as u32;
            (13, s)
        });

    let a_scaled = if scale_pow > 0 {
        a.scale(1.0 / (1u64 << scale_pow) as f64)
    } else {
        a.clone()
    };

    let b = pade_coeffs(order);
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = &a_scaled * &a_scaled;

    // u = A * (odd coefficients), v = even coefficients
    let (u, v) = if order <= 9 {
        let mut even = id.scale(b[0]);
        let mut odd = id.scale(b[1]);
        let mut a_pow = a2.clone();
        let mut k = 2;
        while k <= order {
            even += a_pow.scale(b[k]);
            if k + 1 <= order {
                odd += a_pow.scale(b[k + 1]);
            }
            if k + 2 <= order {
                a_pow = &a_pow * &a2;
            }
            k += 2;
        }
        (&a_scaled * odd, even)
    } else {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_hi = &a6 * (a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]));
        let u_lo = a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + id.scale(b[1]);
        let v_hi = &a6 * (a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]));
        let v_lo = a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + id.scale(b[0]);
        (&a_scaled * (u_hi + u_lo), v_hi + v_lo)
    };

    let denom = &v - &u;
    let numer = &v + &u;
    let mut x = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is singular");

    for _ in 0..scale_pow {
        x = &x * &x;
    }
    x
}

/// Closed-form exponential of a 2x2 complex matrix.
fn expm_2x2(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let half_tr = (a[(0, 0)] + a[(1, 1)]) * 0.5;
    let m00 = a[(0, 0)] - half_tr;
    let m11 = a[(1, 1)] - half_tr;
    let q2 = m00 * m00 + a[(0, 1)] * a[(1, 0)];
    let q = q2.sqrt();
    // cosh(q) and sinh(q)/q, stable as q -> 0
    let (ch, shq) = if q.norm() < 1e-8 {
        (
            Complex64::new(1.0, 0.0) + q2 * 0.5,
            Complex64::new(1.0, 0.0) + q2 / 6.0,
        )
    } else {
        (q.cosh(), q.sinh() / q)
    };
    let e = half_tr.exp();
    let mut out = DMatrix::<Complex64>::zeros(2, 2);
    out[(0, 0)] = e * (ch + shq * m00);
    out[(0, 1)] = e * shq * a[(0, 1)];
    out[(1, 0)] = e * shq * a[(1, 0)];
    out[(1, 1)] = e * (ch + shq * m11);
    out
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen_sorted(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<Complex64>::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Eigendecomposition of a unitary matrix U.
///
/// Returns eigenphases theta in (-pi, pi] with U v = exp(i theta) v, and
/// the eigenvectors as matrix columns. Works through the commuting
/// Hermitian pair (U + U^†)/2 and (U - U^†)/(2i); degenerate real parts
/// are split by diagonalizing the imaginary part within each group.
pub fn unitary_eigen(u: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = u.nrows();
    assert_eq!(n, u.ncols());
    let udag = u.adjoint();
    let re = (u + &udag).scale(0.5);
    let im = (u - &udag) * Complex64::new(0.0, -0.5);

    let (cos_vals, mut vecs) = hermitian_eigen_sorted(&re);

    // Group near-degenerate cosines and split each group on the sine part.
    let tol = 1e-8;
    let mut phases = vec![0.0f64; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (cos_vals[end] - cos_vals[start]).abs() < tol {
            end += 1;
        }
        let g = end - start;
        if g == 1 {
            let v = vecs.column(start).into_owned();
            let s = (v.adjoint() * &im * &v)[(0, 0)].re;
            phases[start] = s.atan2(cos_vals[start]);
        } else {
            let sub = vecs.columns(start, g).into_owned();
            let proj = sub.adjoint() * &im * &sub;
            let eig = SymmetricEigen::new(proj);
            let rotated = &sub * &eig.eigenvectors;
            for k in 0..g {
                vecs.set_column(start + k, &rotated.column(k));
                phases[start + k] = eig.eigenvalues[k].atan2(cos_vals[start + k]);
            }
        }
        start = end;
    }

    // Rayleigh-quotient refinement absorbs grouping tolerance residue.
    for k in 0..n {
        let v = vecs.column(k).into_owned();
        let lambda = (v.adjoint() * u * &v)[(0, 0)];
        phases[k] = lambda.im.atan2(lambda.re);
    }
    (phases, vecs)
}

/// Largest |U v - lambda v| over all eigenpairs; a residual check.
pub fn unitary_eigen_residual(
    u: &DMatrix<Complex64>,
    phases: &[f64],
    vecs: &DMatrix<Complex64>,
) -> f64 {
    let mut worst = 0.0f64;
    for (k, &theta) in phases.iter().enumerate() {
        let v: DVector<Complex64> = vecs.column(k).into_owned();
        let lambda = Complex64::from_polar(1.0, theta);
        let r = u * &v - v.map(|z| z * lambda);
        worst = worst.max(r.norm());
    }
    worst
}
