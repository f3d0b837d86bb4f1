//! Real-coefficient polynomial utilities and a companion-matrix root finder.
//!
//! Coefficients are stored in ascending powers: `c[0] + c[1] x + ... + c[n] x^n`.

use nalgebra::{DMatrix, Schur};

use crate::{Complex64, Error, Result};

/// Leading coefficients below this fraction of the largest are treated as zero.
const LEADING_ZERO_TOLERANCE: f64 = 1e-12;

pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

/// Coefficients of `prod (x - r_i)` for real roots, ascending.
pub fn from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k + 1] += v;
            next[k] -= r * v;
        }
        c = next;
    }
    c
}

/// Drop negligible high-order coefficients.
pub fn trim(coeffs: &[f64]) -> Result<&[f64]> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroPolynomial);
    }
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1].abs() <= LEADING_ZERO_TOLERANCE * scale {
        end -= 1;
    }
    Ok(&coeffs[..end])
}

/// All complex roots, counted with multiplicity.
///
/// Exact zero roots are split off first; the rest are eigenvalues of the
/// balanced companion matrix, each polished with a few Newton steps on the
/// original polynomial.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let c = trim(coeffs)?;
    let zeros = c.iter().take_while(|v| **v == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let reduced = &c[zeros..];
    let n = reduced.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(Complex64::new(-reduced[0] / reduced[1], 0.0));
        return Ok(roots);
    }

    let lead = reduced[n];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -reduced[i] / lead;
    }
    balance(&mut companion);
    let eig = Schur::new(companion).complex_eigenvalues();

    let dc = derivative(reduced);
    for z0 in eig.iter() {
        roots.push(polish(reduced, &dc, *z0));
    }
    Ok(roots)
}

fn polish(c: &[f64], dc: &[f64], mut z: Complex64) -> Complex64 {
    let mut best = eval_complex(c, z).norm();
    for _ in 0..4 {
        let d = eval_complex(dc, z);
        if d.norm() == 0.0 {
            break;
        }
        let step = eval_complex(c, z) / d;
        let cand = z - step;
        let val = eval_complex(c, cand).norm();
        if !(val < best) {
            break;
        }
        z = cand;
        best = val;
    }
    z
}

/// Parlett-Reinsch balancing with power-of-two scalings.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}
