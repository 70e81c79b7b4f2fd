//! Unshifted QR iteration and its handoff to the Newton refinement.
//!
//! The iteration is the textbook one, deliberately unoptimized: no Hessenberg
//! reduction, no shifts.  `A_{k+1} = R_k Q_k` where `A_k = Q_k R_k` is a
//! Householder QR factorization normalized so the diagonal of `R` is real and
//! nonnegative.  Progress is measured by the largest modulus among entries
//! strictly below the diagonal.
//!
//! Two stopping rules:
//!
//! - [`QrStop::LowerTri`]: stop when the below-diagonal maximum drops under a
//!   fixed threshold (the classical rule; the threshold is guesswork).
//! - [`QrStop::Certificate`]: after each sweep, build the eigendecomposition
//!   candidate the accumulated `Q` implies and evaluate the Newton
//!   certificate `u = kappa^2 (K+1)^3 eps`; stop as soon as `u <= threshold`.
//!   This replaces the guess with a guarantee: from a certified point the
//!   Newton iteration converges quadratically, so QR can hand off as early as
//!   possible.
//!
//! The handoff ([`newton_state_from_qr`]) reads the candidate straight off
//! the iterate: `Sigma = diag(A_k)`, `E = Q` (the accumulated similarity) and
//! `F = Q^*`.  For a matrix far from normal this pair never certifies --
//! `F E = I` exactly but `F M E` stays far from diagonal -- and the
//! certificate rule keeps sweeping until the budget runs out, which is the
//! honest answer.

use rug::{Assign, Complex, Float};

use crate::diag::{self, DiagSolveOptions, DiagSolveOutcome, DiagState};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::report::CertificateReport;
use crate::scalar;
use crate::spectrum::Spectrum;

/// Householder QR with the diagonal of `R` made real and nonnegative.
pub fn householder_qr(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = m.n();
    let prec = m.prec();
    let mut r: Vec<Complex> = m.entries().to_vec();
    let mut q: Vec<Complex> = Matrix::identity(n, prec).entries().to_vec();
    let mut tmp = Complex::new(prec);
    let mut mag = Float::new(prec);
    for k in 0..n.saturating_sub(1) {
        let mut norm2 = Float::new(prec);
        for i in k..n {
            scalar::abs_into(&r[i * n + k], &mut mag);
            norm2 += mag.clone().square();
        }
        if norm2.is_zero() {
            continue;
        }
        let norm = norm2.sqrt();
        scalar::abs_into(&r[k * n + k], &mut mag);
        let phase = if mag.is_zero() {
            Complex::with_val(prec, 1)
        } else {
            Complex::with_val(prec, &r[k * n + k] / &mag)
        };
        // v = x + phase * ||x|| e1
        let mut v: Vec<Complex> = (k..n).map(|i| r[i * n + k].clone()).collect();
        tmp.assign(&phase * &norm);
        v[0] += &tmp;
        let mut vnorm2 = Float::new(prec);
        for c in &v {
            scalar::abs_into(c, &mut mag);
            vnorm2 += mag.clone().square();
        }
        if vnorm2.is_zero() {
            continue;
        }
        // R <- H R on columns k..n
        for j in k..n {
            let mut dot = Complex::new(prec);
            for (off, vi) in v.iter().enumerate() {
                tmp.assign(Complex::with_val(prec, vi.conj_ref()) * &r[(k + off) * n + j]);
                dot += &tmp;
            }
            let mut factor = dot;
            factor *= 2u32;
            factor /= &vnorm2;
            for (off, vi) in v.iter().enumerate() {
                tmp.assign(&factor * vi);
                r[(k + off) * n + j] -= &tmp;
            }
        }
        // Q <- Q H (H is Hermitian): row i loses (2/v*v)(Q v)_i v^*
        for i in 0..n {
            let mut dot = Complex::new(prec);
            for (off, vi) in v.iter().enumerate() {
                tmp.assign(&q[i * n + k + off] * vi);
                dot += &tmp;
            }
            let mut factor = dot;
            factor *= 2u32;
            factor /= &vnorm2;
            for (off, vi) in v.iter().enumerate() {
                tmp.assign(&factor * Complex::with_val(prec, vi.conj_ref()));
                q[i * n + k + off] -= &tmp;
            }
        }
    }
    // normalize: make diag(R) real nonnegative by a phase diagonal
    for k in 0..n {
        scalar::abs_into(&r[k * n + k], &mut mag);
        if mag.is_zero() {
            continue;
        }
        let phase = Complex::with_val(prec, &r[k * n + k] / &mag);
        let phase_conj = Complex::with_val(prec, phase.conj_ref());
        for j in k + 1..n {
            let cur = r[k * n + j].clone();
            tmp.assign(&cur * &phase_conj);
            r[k * n + j].assign(&tmp);
        }
        // the pivot itself becomes its modulus exactly
        r[k * n + k].assign(&mag);
        for i in 0..n {
            let cur = q[i * n + k].clone();
            tmp.assign(&cur * &phase);
            q[i * n + k].assign(&tmp);
        }
    }
    // the subdiagonal of R is zero by construction; make it exact
    for i in 1..n {
        for j in 0..i {
            r[i * n + j].assign(0);
        }
    }
    let q = Matrix::from_entries(n, prec, q);
    let r = Matrix::from_entries(n, prec, r);
    Ok((q, r))
}

#[derive(Debug, Clone, Copy)]
pub enum QrStop {
    /// Stop when the max below-diagonal modulus is at or under the value.
    LowerTri(f64),
    /// Stop when the Newton certificate of the implied eigendecomposition is
    /// at or under the value (use [`diag::DIAG_CERT_THRESHOLD`]).
    Certificate(f64),
}

#[derive(Debug, Clone)]
pub struct QrOutcome {
    /// Near-triangular iterate `Q^* M Q`.
    pub a: Matrix,
    /// Accumulated unitary similarity.
    pub q: Matrix,
    pub iterations: usize,
    /// Max below-diagonal modulus of `a`.
    pub err: Float,
    /// Whether the stopping rule fired (false: iteration budget ran out).
    pub stopped: bool,
    /// Certificate that fired the stop, for the certificate rule.
    pub certificate: Option<CertificateReport>,
}

/// Below this lower-triangular level the certificate rule starts paying for
/// the (order n^3, like a sweep) certificate evaluation.
const CERT_TEST_GATE: f64 = 0.1;

pub fn qr_iterate(m: &Matrix, stop: QrStop, max_iter: usize) -> Result<QrOutcome> {
    let n = m.n();
    let prec = m.prec();
    let mut a = m.clone();
    let mut q_total = Matrix::identity(n, prec);
    let mut iterations = 0;
    let mut stopped = false;
    let mut certificate = None;
    let mut err = a.norm_lower_tri_max();
    // do-while: even an already-triangular input performs one sweep
    while iterations < max_iter {
        let (q, r) = householder_qr(&a)?;
        a = r.matmul(&q)?;
        q_total = q_total.matmul(&q)?;
        iterations += 1;
        err = a.norm_lower_tri_max();
        match stop {
            QrStop::LowerTri(threshold) => {
                if err.clone() <= threshold {
                    stopped = true;
                }
            }
            QrStop::Certificate(threshold) => {
                if err.clone() <= CERT_TEST_GATE {
                    let out = QrOutcome {
                        a: a.clone(),
                        q: q_total.clone(),
                        iterations,
                        err: err.clone(),
                        stopped: false,
                        certificate: None,
                    };
                    if let Ok(state) = newton_state_from_qr(m, &out) {
                        let cert = state.certificate_from(&state.residuals()?);
                        if cert.u.is_finite() && cert.u.clone() <= threshold {
                            certificate = Some(cert);
                            stopped = true;
                        }
                    }
                }
            }
        }
        if stopped {
            break;
        }
    }
    Ok(QrOutcome { a, q: q_total, iterations, err, stopped, certificate })
}

/// Classical Algorithm: QR until the below-diagonal maximum is at or under
/// `threshold`.
pub fn qr_basic(m: &Matrix, threshold: f64, max_iter: usize) -> Result<QrOutcome> {
    qr_iterate(m, QrStop::LowerTri(threshold), max_iter)
}

/// Build the Newton starting point implied by a QR iterate: eigenvalues from
/// the diagonal of `A`, `E` the accumulated `Q`, `F = Q^*`.
pub fn newton_state_from_qr(m: &Matrix, out: &QrOutcome) -> Result<DiagState> {
    let sigma = Spectrum::from_diag(&out.a);
    sigma.check_distinct()?;
    let e = out.q.clone();
    let f = out.q.conj_transpose();
    DiagState::new(m.clone(), e, f, sigma)
}

#[derive(Debug)]
pub struct HybridOutcome {
    pub qr: QrOutcome,
    pub solve: DiagSolveOutcome,
}

/// QR with the certificate stopping rule, then Newton refinement at
/// `newton_prec` bits.
pub fn hybrid_eigensolve(
    m: &Matrix,
    qr_threshold: f64,
    qr_max_iter: usize,
    newton_prec: u32,
    newton_max_iter: usize,
    newton_target: Float,
) -> Result<HybridOutcome> {
    let qr = qr_iterate(m, QrStop::Certificate(qr_threshold), qr_max_iter)?;
    let state = newton_state_from_qr(m, &qr)?.with_prec(newton_prec);
    let solve = diag::diag_solve(
        state,
        &DiagSolveOptions { max_iter: newton_max_iter, target: newton_target },
    )?;
    Ok(HybridOutcome { qr, solve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Field;

    /// Symmetric matrix with known spectrum: O diag(vals) O^T for an
    /// orthogonal O from the QR of a random real matrix.
    fn symmetric_with_spectrum(vals: &[f64], seed: u64, prec: u32) -> Matrix {
        let n = vals.len();
        let g = Matrix::random_gaussian(n, Field::Real, seed, false, prec);
        let (o, _) = householder_qr(&g).unwrap();
        let sp = Spectrum::from_f64(vals, prec);
        o.mul_diag_right(&sp).unwrap().matmul(&o.conj_transpose()).unwrap()
    }

    #[test]
    fn qr_factorization_contract() {
        let prec = 192;
        let m = Matrix::random_gaussian(7, Field::Complex, 5, false, prec);
        let (q, r) = householder_qr(&m).unwrap();
        let tol = Float::with_val(prec, 2f64.powi(-160));
        let recon = q.matmul(&r).unwrap().sub(&m).unwrap().norm_inf();
        assert!(recon < tol, "{recon:e}");
        let unitary = q.conj_transpose().matmul(&q).unwrap().sub_identity().unwrap().norm_inf();
        assert!(unitary < tol, "{unitary:e}");
        assert!(r.norm_lower_tri_max().is_zero());
        for i in 0..7 {
            assert!(r.get(i, i).imag().is_zero(), "diag {i} not real");
            assert!(!r.get(i, i).real().is_sign_negative(), "diag {i} negative");
        }
    }

    #[test]
    fn qr_of_identity_like_input_runs_one_sweep() {
        let prec = 128;
        let m = Spectrum::from_f64(&[3.0, 1.0, 2.0], prec).to_matrix();
        let out = qr_basic(&m, 1e-10, 50).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.stopped);
    }

    #[test]
    fn qr_two_by_two_frozen_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1
        let prec = 192;
        let m = Matrix::from_rows_f64(&[vec![2.0, 1.0], vec![1.0, 2.0]], prec);
        let out = qr_basic(&m, 1e-40, 500).unwrap();
        assert!(out.stopped);
        let mut got: Vec<f64> = (0..2).map(|i| out.a.get(i, i).real().to_f64()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((got[0] - 1.0).abs() < 1e-30);
        assert!((got[1] - 3.0).abs() < 1e-30);
    }

    #[test]
    fn qr_converges_on_symmetric_matrix() {
        let prec = 256;
        let m = symmetric_with_spectrum(&[1.0, 2.5, 4.0, 8.0], 11, prec);
        let out = qr_basic(&m, 1e-20, 2000).unwrap();
        assert!(out.stopped, "err after {} iters: {:e}", out.iterations, out.err);
        // diagonal approximates the spectrum (descending for positive spectra)
        let mut got: Vec<f64> = (0..4).map(|i| out.a.get(i, i).real().to_f64()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, want) in got.iter().zip([1.0, 2.5, 4.0, 8.0]) {
            assert!((g - want).abs() < 1e-15, "{g} vs {want}");
        }
        // similarity: Q^* M Q = A
        let sim = out
            .q
            .conj_transpose()
            .matmul(&m)
            .unwrap()
            .matmul(&out.q)
            .unwrap()
            .sub(&out.a)
            .unwrap()
            .norm_inf();
        assert!(sim < Float::with_val(prec, 2f64.powi(-200)), "{sim:e}");
    }

    #[test]
    fn qr_handoff_is_valid_newton_state() {
        let prec = 256;
        let m = symmetric_with_spectrum(&[1.0, 2.0, 3.5, 5.0, 9.0], 3, prec);
        let out = qr_basic(&m, 1e-8, 2000).unwrap();
        assert!(out.stopped);
        let state = newton_state_from_qr(&m, &out).unwrap();
        let res = state.residuals().unwrap();
        // handoff residual tracks the QR error, not the rounding floor
        assert!(res.err() < Float::with_val(prec, 1e-5), "{:e}", res.err());
        let cert = state.certificate_from(&res);
        assert!(cert.satisfied, "u = {:e}", cert.u);
    }

    #[test]
    fn certificate_stop_fires_before_tight_lower_tri() {
        let prec = 256;
        let m = symmetric_with_spectrum(&[1.0, 2.0, 3.5, 5.0, 9.0], 3, prec);
        let certified = qr_iterate(&m, QrStop::Certificate(diag::DIAG_CERT_THRESHOLD), 4000).unwrap();
        assert!(certified.stopped);
        let cert = certified.certificate.as_ref().unwrap();
        assert!(cert.satisfied);
        // a naive tight threshold needs strictly more sweeps
        let tight = qr_basic(&m, 1e-30, 4000).unwrap();
        assert!(
            certified.iterations < tight.iterations,
            "certified {} vs tight {}",
            certified.iterations,
            tight.iterations
        );
    }

    #[test]
    fn hybrid_refines_to_target() {
        let base_prec = 128;
        let high_prec = 512;
        let m = symmetric_with_spectrum(&[1.0, 2.0, 4.0, 7.0, 11.0, 16.0], 7, base_prec);
        let target = Float::with_val(high_prec, 2f64.powi(-420));
        let out = hybrid_eigensolve(
            &m,
            diag::DIAG_CERT_THRESHOLD,
            4000,
            high_prec,
            12,
            target.clone(),
        )
        .unwrap();
        assert!(out.qr.stopped);
        assert_eq!(out.solve.trace.status, crate::report::SolveStatus::Converged);
        assert!(*out.solve.trace.final_err() <= target);
        // the refined spectrum still matches the constructed one at double level
        let mut got: Vec<f64> = out.solve.state.sigma.values().iter().map(|c| c.real().to_f64()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, want) in got.iter().zip([1.0, 2.0, 4.0, 7.0, 11.0, 16.0]) {
            assert!((g - want).abs() < 1e-12, "{g} vs {want}");
        }
    }
}
