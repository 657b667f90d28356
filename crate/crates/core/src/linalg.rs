//! Dense complex matrix exponential by scaling and squaring with a
//! degree-13 Padé approximant, and its Fréchet derivative.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

// Padé(13, 13) numerator coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the unscaled degree-13 approximant is accurate
// to double precision.
const THETA13: f64 = 5.371920351148152;

/// Largest absolute column sum.
pub fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled_identity(n: usize, s: f64) -> CMatrix {
    CMatrix::identity(n, n) * Complex64::new(s, 0.0)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `exp(a)` for a square complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * real(0.5f64.powi(squarings));

    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let ident = CMatrix::identity(n, n);

    let u_inner = &a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]);
    let u = &a * (&a6 * u_inner + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + &ident * real(b[1]));
    let v_inner = &a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]);
    let v = &a6 * v_inner + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + scaled_identity(n, b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// `(exp(a), L(a, e))` where `L` is the Fréchet derivative of the exponential
/// at `a` in direction `e`, read off the upper-right block of
/// `exp([[a, e], [0, a]])`.
pub fn expm_frechet(a: &CMatrix, e: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    assert_eq!((n, n), e.shape(), "direction must match the matrix shape");
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(a);
    block.view_mut((n, n), (n, n)).copy_from(a);
    block.view_mut((0, n), (n, n)).copy_from(e);
    let big = expm(&block);
    (
        big.view((0, 0), (n, n)).into_owned(),
        big.view((0, n), (n, n)).into_owned(),
    )
}
