//! Inversion-free Newton iteration for an approximate inverse pair.
//!
//! Given `E` and an approximate inverse `F`, the residual is `Z = F E - I`.
//! One step multiplies on the appropriate sides by `I - Z/2`:
//!
//! ```text
//! E' = E (I - Z/2),    F' = (I - Z/2) F
//! ```
//!
//! which keeps `F' E'` a similarity-free expression in `Z` only:
//! `Z' = Z^2 (-3I/4 + Z/4)`.  Hence `||Z'|| <= ||Z||^2` whenever `||Z|| <= 1`,
//! and if the starting residual `eps = ||Z_0|| < 1/2` the iteration is
//! certified: `||Z_k|| <= 2^(1 - 2^k) eps`.

use rug::{Complex, Float};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::report::{IterationTrace, SolveStatus, TraceRow};

/// Residual threshold below which convergence is guaranteed.
pub const INVERSE_CERT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct InversePairState {
    pub e: Matrix,
    pub f: Matrix,
}

impl InversePairState {
    pub fn new(e: Matrix, f: Matrix) -> Result<Self> {
        // dimension check via a cheap operation
        e.check_same_dims(&f)?;
        Ok(InversePairState { e, f })
    }

    /// Z = F E - I.
    pub fn residual(&self) -> Result<Matrix> {
        self.f.matmul(&self.e)?.sub_identity()
    }

    pub fn residual_norm(&self) -> Result<Float> {
        Ok(self.residual()?.norm_inf())
    }
}

/// One Newton step; returns the updated state.
pub fn inverse_step(state: &InversePairState) -> Result<InversePairState> {
    let z = state.residual()?;
    let prec = z.prec();
    let half = Complex::with_val(prec, (-0.5, 0.0));
    let correction = z.scale(&half)?.add_identity()?; // I - Z/2
    let e = state.e.matmul(&correction)?;
    let f = correction.matmul(&state.f)?;
    Ok(InversePairState { e, f })
}

#[derive(Debug)]
pub struct InverseSolveOptions {
    pub max_iter: usize,
    /// Stop once ||Z|| drops to this value or below.
    pub target: Float,
}

#[derive(Debug)]
pub struct InverseSolveOutcome {
    pub state: InversePairState,
    pub trace: IterationTrace,
    /// True iff the initial residual was below [`INVERSE_CERT_THRESHOLD`].
    pub certified: bool,
}

/// Run Newton steps until the residual target, the iteration budget, or a
/// divergence pattern (three consecutive uncertified increases) is hit.
pub fn inverse_solve(e: Matrix, f: Matrix, opts: &InverseSolveOptions) -> Result<InverseSolveOutcome> {
    let mut state = InversePairState::new(e, f)?;
    let mut err = state.residual_norm()?;
    let certified = err.clone() < INVERSE_CERT_THRESHOLD;
    let mut rows = vec![TraceRow {
        iteration: 0,
        certificate: Some(err.clone()),
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
            state = inverse_step(&state)?;
            let new_err = state.residual_norm()?;
            rows.push(TraceRow {
                iteration: iter,
                certificate: Some(new_err.clone()),
                err_res: new_err.clone(),
                wall_time: t0.elapsed().as_secs_f64(),
            });
            if new_err > err && new_err.clone() >= INVERSE_CERT_THRESHOLD {
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
    Ok(InverseSolveOutcome {
        state,
        trace: IterationTrace { rows, status },
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Field;
    use proptest::prelude::*;
    use rug::ops::Pow;

    fn perturbed_pair(n: usize, seed: u64, scale: f64, prec: u32) -> (Matrix, Matrix) {
        let e = Matrix::random_gaussian(n, Field::Complex, seed, false, prec);
        let f_exact = e.invert().unwrap();
        let noise = Matrix::random_gaussian(n, Field::Complex, seed + 1000, true, prec);
        let f = f_exact
            .add(&noise.scale(&Complex::with_val(prec, scale)).unwrap())
            .unwrap();
        (e, f)
    }

    #[test]
    fn exact_inverse_stops_immediately() {
        let e = Matrix::random_gaussian(5, Field::Real, 3, false, 128);
        let f = e.invert().unwrap();
        let opts = InverseSolveOptions {
            max_iter: 10,
            target: Float::with_val(128, 2f64.powi(-60)),
        };
        let out = inverse_solve(e, f, &opts).unwrap();
        assert_eq!(out.trace.status, SolveStatus::Converged);
        assert_eq!(out.trace.rows.len(), 1);
        assert!(out.certified);
    }

    #[test]
    fn residual_identity_holds() {
        // Z' = Z^2 (-3I/4 + Z/4), checked against the actually updated pair
        let prec = 256;
        let (e, f) = perturbed_pair(6, 11, 1e-3, prec);
        let state = InversePairState::new(e, f).unwrap();
        let z = state.residual().unwrap();
        let next = inverse_step(&state).unwrap();
        let z_next = next.residual().unwrap();
        let quarter = Complex::with_val(prec, 0.25);
        let minus_three_quarters = Complex::with_val(prec, -0.75);
        let inner = z
            .scale(&quarter)
            .unwrap()
            .add(&Matrix::identity(z.n(), prec).scale(&minus_three_quarters).unwrap())
            .unwrap();
        let predicted = z.matmul(&z).unwrap().matmul(&inner).unwrap();
        let dev = z_next.sub(&predicted).unwrap().norm_inf();
        assert!(dev < Float::with_val(prec, 2f64.powi(-200)), "{dev:e}");
    }

    #[test]
    fn quadratic_decay_and_theorem_bound() {
        let prec = 1024;
        let (e, f) = perturbed_pair(8, 21, 1e-2, prec);
        let opts = InverseSolveOptions {
            max_iter: 7,
            target: Float::new(prec),
        };
        let out = inverse_solve(e, f, &opts).unwrap();
        assert!(out.certified);
        let eps = out.trace.rows[0].err_res.clone();
        assert!(eps < 0.5);
        for k in 1..out.trace.rows.len() {
            let prev = &out.trace.rows[k - 1].err_res;
            let cur = &out.trace.rows[k].err_res;
            // floor: the product F E itself carries ~2^-prec rounding noise
            let floor = Float::with_val(prec, 2f64.powi(-(prec as i32) + 40));
            if *prev > floor {
                assert!(cur.clone() <= prev.clone().square() + &floor, "step {k}");
            }
            // ||Z_k|| <= 2^(1 - 2^k) eps while above the rounding floor
            let exponent = Float::with_val(prec, 1i32) - Float::with_val(prec, 2u32).pow(k as u32);
            let bound = Float::with_val(prec, 2u32).pow(&exponent) * &eps;
            assert!(cur.clone() <= bound + floor, "theorem bound at step {k}");
        }
        // 7 certified steps from 1e-2 must be far below 1e-100
        assert!(*out.trace.final_err() < Float::with_val(prec, 1e-100));
    }

    #[test]
    fn divergence_detected() {
        // grossly wrong F with a large residual keeps growing
        let prec = 128;
        let e = Matrix::random_gaussian(5, Field::Real, 8, false, prec);
        let f = Matrix::random_gaussian(5, Field::Real, 9, false, prec)
            .scale(&Complex::with_val(prec, 50))
            .unwrap();
        let opts = InverseSolveOptions {
            max_iter: 30,
            target: Float::with_val(prec, 2f64.powi(-100)),
        };
        let out = inverse_solve(e, f, &opts).unwrap();
        assert!(!out.certified);
        assert_eq!(out.trace.status, SolveStatus::Diverging);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn contraction_from_small_residual(seed in 0u64..1000, n in 2usize..7) {
            let (e, f) = perturbed_pair(n, seed, 1e-4, 192);
            let state = InversePairState::new(e, f).unwrap();
            let before = state.residual_norm().unwrap();
            prop_assume!(before.clone() < 0.5);
            let after = inverse_step(&state).unwrap().residual_norm().unwrap();
            let bound = before.square() + Float::with_val(192, 2f64.powi(-150));
            prop_assert!(after <= bound);
        }
    }
}
