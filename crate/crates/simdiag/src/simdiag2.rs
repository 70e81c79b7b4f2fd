//! Simultaneous refinement of a joint eigendecomposition of two matrices.
//!
//! State: fixed matrices `M_1, M_2` assumed simultaneously diagonalizable,
//! approximations `(E, F, Sigma_1, Sigma_2)`.  Residuals:
//!
//! ```text
//! Z_k = F M_k E - Sigma_k,    k = 1, 2
//! ```
//!
//! The linearized equations decouple into 2x2 scalar systems indexed by the
//! off-diagonal slots.  With the spectral determinant
//!
//! ```text
//! det_ij = sigma_i^1 sigma_j^2 - sigma_j^1 sigma_i^2
//! ```
//!
//! the closed-form solution is `x_ii = y_ii = 0`, `s_i^k = z_ii^k`, and for
//! `i != j`
//!
//! ```text
//! x_ij = (sigma_j^1 z_ij^2 - z_ij^1 sigma_j^2) / det_ij
//! y_ij = -(sigma_i^1 z_ij^2 - z_ij^1 sigma_i^2) / det_ij
//! ```
//!
//! which satisfies `sigma_i^k x_ij + sigma_j^k y_ij + z_ij^k = 0` for both k.
//! Updates are multiplicative as in [`crate::diag`].  Note the system does
//! *not* constrain `F E - I`; [`SimDiag2State::fe_residual`] reports it
//! separately.
//!
//! Certificate: with `eps = max_k ||Z_k||_inf`, `kappa = max(1, 1 / min_ij
//! |det_ij|)` and `K = max(1, max |sigma_i^k|)`,
//!
//! ```text
//! u = 4 eps kappa^2 K^3 <= 0.094
//! ```

use rug::ops::Pow;
use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::report::{CertificateReport, IterationTrace, SolveStatus, TraceRow};
use crate::scalar;
use crate::spectrum::Spectrum;

pub const SIMDIAG2_CERT_THRESHOLD: f64 = 0.094;

#[derive(Debug, Clone)]
pub struct SimDiag2State {
    pub m: [Matrix; 2],
    pub e: Matrix,
    pub f: Matrix,
    pub sigma: [Spectrum; 2],
}

#[derive(Debug, Clone)]
pub struct Residuals2 {
    pub z: [Matrix; 2],
}

impl Residuals2 {
    /// err_res = max over the two residual infinity norms.
    pub fn err(&self) -> Float {
        let a = self.z[0].norm_inf();
        let b = self.z[1].norm_inf();
        if a > b { a } else { b }
    }
}

#[derive(Debug, Clone)]
pub struct UpdatePair {
    pub x: Matrix,
    pub y: Matrix,
    pub s: [Spectrum; 2],
}

impl SimDiag2State {
    pub fn new(m: [Matrix; 2], e: Matrix, f: Matrix, sigma: [Spectrum; 2]) -> Result<Self> {
        m[0].check_same_dims(&m[1])?;
        m[0].check_same_dims(&e)?;
        m[0].check_same_dims(&f)?;
        for s in &sigma {
            if s.n() != m[0].n() {
                return Err(Error::DimensionMismatch { left: m[0].n(), right: s.n() });
            }
        }
        Ok(SimDiag2State { m, e, f, sigma })
    }

    pub fn residuals(&self) -> Result<Residuals2> {
        let mk = |k: usize| -> Result<Matrix> {
            self.f
                .matmul(&self.m[k])?
                .matmul(&self.e)?
                .sub(&self.sigma[k].to_matrix())
        };
        Ok(Residuals2 { z: [mk(0)?, mk(1)?] })
    }

    /// ||F E - I||_inf, not driven to zero by this iteration.
    pub fn fe_residual(&self) -> Result<Float> {
        Ok(self.f.matmul(&self.e)?.sub_identity()?.norm_inf())
    }

    pub fn certificate_from(&self, res: &Residuals2) -> CertificateReport {
        certificate(res, &self.sigma)
    }

    pub fn with_prec(&self, prec: u32) -> SimDiag2State {
        SimDiag2State {
            m: [self.m[0].with_prec(prec), self.m[1].with_prec(prec)],
            e: self.e.with_prec(prec),
            f: self.f.with_prec(prec),
            sigma: [self.sigma[0].with_prec(prec), self.sigma[1].with_prec(prec)],
        }
    }
}

fn spectral_det(sigma: &[Spectrum; 2], i: usize, j: usize, prec: u32) -> Complex {
    let mut det = Complex::with_val(prec, sigma[0].value(i) * sigma[1].value(j));
    let mut tmp = Complex::new(prec);
    tmp.assign(sigma[0].value(j) * sigma[1].value(i));
    det -= &tmp;
    det
}

/// min over pairs of |det_ij|; positive infinity for n = 1.
fn min_abs_det(sigma: &[Spectrum; 2], prec: u32) -> Float {
    let n = sigma[0].n();
    let mut best = Float::with_val(prec, rug::float::Special::Infinity);
    let mut mag = Float::new(prec);
    for i in 0..n {
        for j in i + 1..n {
            let det = spectral_det(sigma, i, j, prec);
            scalar::abs_into(&det, &mut mag);
            if mag < best {
                best.assign(&mag);
            }
        }
    }
    best
}

pub fn certificate(res: &Residuals2, sigma: &[Spectrum; 2]) -> CertificateReport {
    let prec = sigma[0].prec().max(sigma[1].prec());
    let epsilon = res.err();
    let inv_det = Float::with_val(prec, min_abs_det(sigma, prec).recip_ref());
    let kappa = if inv_det < 1u32 { Float::with_val(prec, 1) } else { inv_det };
    let ra = sigma[0].radius_bound();
    let rb = sigma[1].radius_bound();
    let k_bound = if ra > rb { ra } else { rb };
    let mut u = Float::with_val(prec, &kappa * &kappa);
    u *= k_bound.clone().square() * &k_bound;
    u *= &epsilon;
    u *= 4u32;
    CertificateReport::new(epsilon, kappa, k_bound, u, SIMDIAG2_CERT_THRESHOLD)
}

/// Error if some |det_ij| is below relative 2^(-prec/2), where the scale is
/// max(1, |sigma_i^1 sigma_j^2|, |sigma_j^1 sigma_i^2|).
pub fn check_dets(sigma: &[Spectrum; 2], prec: u32) -> Result<()> {
    let n = sigma[0].n();
    let threshold = Float::with_val(prec, 2f64).pow(-(Float::with_val(prec, prec) / 2u32));
    let mut mag = Float::new(prec);
    let mut term = Complex::new(prec);
    for i in 0..n {
        for j in i + 1..n {
            let det = spectral_det(sigma, i, j, prec);
            let mut det_mag = Float::new(prec);
            scalar::abs_into(&det, &mut det_mag);
            let mut scale = Float::with_val(prec, 1);
            term.assign(sigma[0].value(i) * sigma[1].value(j));
            scalar::abs_into(&term, &mut mag);
            if mag > scale {
                scale.assign(&mag);
            }
            term.assign(sigma[0].value(j) * sigma[1].value(i));
            scalar::abs_into(&term, &mut mag);
            if mag > scale {
                scale.assign(&mag);
            }
            let rel = det_mag / scale;
            if rel < threshold {
                return Err(Error::DeterminantCollapse { i, j, det: rel.to_f64(), prec });
            }
        }
    }
    Ok(())
}

pub fn solve_linearized(res: &Residuals2, sigma: &[Spectrum; 2]) -> Result<UpdatePair> {
    let n = sigma[0].n();
    let prec = res.z[0].prec().max(sigma[0].prec()).max(sigma[1].prec());
    check_dets(sigma, prec)?;
    let mut x = Matrix::zeros(n, prec);
    let mut y = Matrix::zeros(n, prec);
    let mut s0: Vec<Complex> = Vec::with_capacity(n);
    let mut s1: Vec<Complex> = Vec::with_capacity(n);
    let mut tmp = Complex::new(prec);
    for i in 0..n {
        s0.push(res.z[0].get(i, i).clone());
        s1.push(res.z[1].get(i, i).clone());
        for j in 0..n {
            if i == j {
                continue;
            }
            let det = spectral_det(sigma, i, j, prec);
            let z1 = res.z[0].get(i, j);
            let z2 = res.z[1].get(i, j);
            // x numerator: sigma_j^1 z^2 - z^1 sigma_j^2
            let mut num_x = Complex::with_val(prec, sigma[0].value(j) * z2);
            tmp.assign(z1 * sigma[1].value(j));
            num_x -= &tmp;
            x.set(i, j, num_x / &det);
            // y numerator: -(sigma_i^1 z^2 - z^1 sigma_i^2)
            let mut num_y = Complex::with_val(prec, sigma[0].value(i) * z2);
            tmp.assign(z1 * sigma[1].value(i));
            num_y -= &tmp;
            num_y = -num_y;
            y.set(i, j, num_y / &det);
        }
    }
    Ok(UpdatePair {
        x,
        y,
        s: [Spectrum::new(s0, prec), Spectrum::new(s1, prec)],
    })
}

pub fn apply_update(state: &SimDiag2State, upd: &UpdatePair) -> Result<SimDiag2State> {
    let e = state.e.matmul(&upd.x.add_identity()?)?;
    let f = upd.y.add_identity()?.matmul(&state.f)?;
    let mut sigma = state.sigma.clone();
    for k in 0..2 {
        for i in 0..sigma[k].n() {
            let v = Complex::with_val(sigma[k].prec(), state.sigma[k].value(i) + upd.s[k].value(i));
            sigma[k].set(i, v);
        }
    }
    SimDiag2State::new(state.m.clone(), e, f, sigma)
}

pub fn simdiag2_step(state: &SimDiag2State) -> Result<SimDiag2State> {
    let res = state.residuals()?;
    let upd = solve_linearized(&res, &state.sigma)?;
    apply_update(state, &upd)
}

#[derive(Debug)]
pub struct SimDiag2SolveOptions {
    pub max_iter: usize,
    pub target: Float,
}

#[derive(Debug)]
pub struct SimDiag2SolveOutcome {
    pub state: SimDiag2State,
    pub trace: IterationTrace,
    pub initial_certificate: CertificateReport,
    pub first_certified: Option<usize>,
}

pub fn simdiag2_solve(state: SimDiag2State, opts: &SimDiag2SolveOptions) -> Result<SimDiag2SolveOutcome> {
    let mut state = state;
    let mut res = state.residuals()?;
    let mut cert = state.certificate_from(&res);
    let initial_certificate = cert.clone();
    let mut first_certified = cert.satisfied.then_some(0);
    let mut err = cert.epsilon.clone();
    let mut rows = vec![TraceRow {
        iteration: 0,
        certificate: Some(cert.u.clone()),
        err_res: err.clone(),
        wall_time: 0.0,
    }];
    let mut status = SolveStatus::MaxIterReached;
    let mut growth_streak = 0usize;
    if err <= opts.target {
        status = SolveStatus::Converged;
    } else {
        for iter in 1..=opts.max_iter {
            let t0 = std::time::Instant::now();
            let upd = solve_linearized(&res, &state.sigma)?;
            state = apply_update(&state, &upd)?;
            res = state.residuals()?;
            cert = state.certificate_from(&res);
            let new_err = cert.epsilon.clone();
            rows.push(TraceRow {
                iteration: iter,
                certificate: Some(cert.u.clone()),
                err_res: new_err.clone(),
                wall_time: t0.elapsed().as_secs_f64(),
            });
            if cert.satisfied && first_certified.is_none() {
                first_certified = Some(iter);
            }
            if new_err > err && !cert.satisfied {
                growth_streak += 1;
            } else {
                growth_streak = 0;
            }
            err = new_err;
            if err <= opts.target {
                status = SolveStatus::Converged;
                break;
            }
            if growth_streak >= 3 {
                status = SolveStatus::Diverging;
                break;
            }
        }
    }
    Ok(SimDiag2SolveOutcome {
        state,
        trace: IterationTrace { rows, status },
        initial_certificate,
        first_certified,
    })
}
