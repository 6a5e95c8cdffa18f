//! Matrix-free conjugate gradient for Hermitian positive-definite systems.

use num_complex::Complex64;

/// Outcome of a CG solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    dot(a, a).re.sqrt()
}

/// Solve `A x = b` for Hermitian positive-definite `A` given only the
/// matrix-vector product. Converges when the residual norm drops below
/// `tol * |b|`. Starts from `x0` when provided.
pub fn solve<F>(
    apply: F,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iterations: usize,
) -> CgSolution
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return CgSolution {
            x: vec![Complex64::ZERO; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![Complex64::ZERO; n],
    };
    let ax = apply(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r).re;

    let mut iterations = 0;
    while iterations < max_iterations {
        if rs.sqrt() <= tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 || !pap.is_finite() {
            // Lost positive definiteness (numerically); stop here.
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r).re;
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iterations += 1;
    }

    let relative_residual = rs.sqrt() / b_norm;
    CgSolution {
        converged: relative_residual <= tol,
        x,
        iterations,
        relative_residual,
    }
}
