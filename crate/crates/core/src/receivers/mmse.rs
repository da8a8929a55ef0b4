use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// `R⁻¹ p` through a Cholesky factorization; `R` must be Hermitian positive definite.
pub fn mmse_oracle(r: &CMatrix, p: &CVector) -> Result<CVector> {
    if r.nrows() != r.ncols() || r.nrows() != p.len() {
        return Err(Error::DimensionMismatch { expected: r.nrows(), found: p.len() });
    }
    let chol = r.clone().cholesky().ok_or(Error::SingularMatrix)?;
    Ok(chol.solve(p))
}

/// As [`mmse_oracle`], falling back to a tiny diagonal loading when `R` is singular, as
/// happens for noiseless single-user covariances.
pub fn mmse_oracle_loaded(r: &CMatrix, p: &CVector) -> Result<CVector> {
    match mmse_oracle(r, p) {
        Err(Error::SingularMatrix) => {
            let m = r.nrows();
            let load = 1e-10 * (r.trace().re / m as f64).max(f64::MIN_POSITIVE);
            mmse_oracle(&(r + CMatrix::identity(m, m) * Complex64::new(load, 0.0)), p)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real, solve, ONE, ZERO};
    use crate::rng::{self, complex_normal};

    #[test]
    fn loaded_oracle_handles_rank_one() {
        let g = CVector::from_vec(vec![real(1.0), real(1.0)]);
        let r = &g * g.adjoint();
        assert!(matches!(mmse_oracle(&r, &g), Err(Error::SingularMatrix)));
        let w = mmse_oracle_loaded(&r, &g).unwrap();
        // the loaded solution points along g
        assert!((w[0] - w[1]).norm() < 1e-9 * w[0].norm());
    }

    #[test]
    fn trivial_systems() {
        let e1 = CVector::from_vec(vec![ONE, ZERO]);
        assert_eq!(mmse_oracle(&CMatrix::identity(2, 2), &e1).unwrap(), e1);
        let w = mmse_oracle(&(CMatrix::identity(2, 2) * real(2.0)), &CVector::from_vec(vec![real(4.0), ZERO]))
            .unwrap();
        assert!((w - CVector::from_vec(vec![real(2.0), ZERO])).norm() < 1e-15);
    }

    #[test]
    fn single_user_instance_matches_lu() {
        let mut rg = rng::stream(4, 4);
        let m = 8;
        let hc = CVector::from_fn(m, |_, _| complex_normal(&mut rg, 1.0 / m as f64));
        let a = 1.7;
        let sigma2 = 0.05;
        let r = &hc * hc.adjoint() * real(a * a) + CMatrix::identity(m, m) * real(sigma2);
        let p = &hc * real(a);
        let w = mmse_oracle(&r, &p).unwrap();
        assert!((w - solve(&r, &p).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn singular_is_rejected() {
        assert!(matches!(
            mmse_oracle(&CMatrix::zeros(2, 2), &CVector::zeros(2)),
            Err(Error::SingularMatrix)
        ));
    }
}
