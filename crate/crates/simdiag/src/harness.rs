//! Seeded experiment harness behind the CLI: instance construction for the
//! two refinement tests, the QR comparison table, and the Wilkinson pipeline.
//!
//! Every random component gets its own sub-stream `seed + component * 2^32`,
//! so resampling one component (offsets 0, 1, ...) never perturbs another and
//! identical configs reproduce identical instances byte for byte.

use rug::ops::Pow;
use rug::{Complex, Float};

use crate::diag::{self, DiagSolveOptions, DiagSolveOutcome, DiagState};
use crate::error::{Error, Result};
use crate::matrix::{Field, Matrix};
use crate::poly::{self, Polynomial, RefineOutcome, Route};
use crate::qr;
use crate::rng::GaussianSource;
use crate::scalar;
use crate::simdiag2::{self, SimDiag2SolveOptions, SimDiag2SolveOutcome, SimDiag2State};
use crate::spectrum::Spectrum;

/// Shared knobs of the seeded refinement tests.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    /// Exponent `e` of the perturbation scale `10^-e`.
    pub perturb_exp: u32,
    pub field: Field,
    pub seed: u64,
    pub prec: u32,
    pub iters: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("n must be at least 2, got {}", self.n)));
        }
        if self.prec < scalar::MIN_PREC {
            return Err(Error::InvalidInput(format!(
                "precision must be at least {} bits, got {}",
                scalar::MIN_PREC,
                self.prec
            )));
        }
        Ok(())
    }
}

const SEED_STRIDE: u64 = 1 << 32;

fn component_seed(seed: u64, component: u64) -> u64 {
    seed.wrapping_add(component.wrapping_mul(SEED_STRIDE))
}

const RESAMPLE_LIMIT: u64 = 64;

/// Draw until the condition estimate is at most `2^(prec/4)`; returns the
/// matrix together with the resample offset actually used.
fn sample_well_conditioned(n: usize, field: Field, seed: u64, prec: u32) -> Result<(Matrix, u64)> {
    let limit = Float::with_val(prec, 2u32).pow(prec / 4);
    for offset in 0..RESAMPLE_LIMIT {
        let m = Matrix::random_gaussian(n, field, seed.wrapping_add(offset), false, prec);
        if let Ok(cond) = m.cond_inf_estimate() {
            if cond <= limit {
                return Ok((m, offset));
            }
        }
    }
    Err(Error::InvalidInput(format!(
        "no well-conditioned draw within {RESAMPLE_LIMIT} attempts"
    )))
}

/// Random diagonal with numerically distinct entries, optionally rescaled to
/// Frobenius norm one.
fn sample_distinct_diag(
    n: usize,
    field: Field,
    seed: u64,
    prec: u32,
    unit_frobenius: bool,
) -> Result<(Spectrum, u64)> {
    for offset in 0..RESAMPLE_LIMIT {
        let mut src = GaussianSource::new(seed.wrapping_add(offset));
        let mut vals: Vec<Complex> = (0..n)
            .map(|_| {
                let re = src.next_normal();
                let im = match field {
                    Field::Real => 0.0,
                    Field::Complex => src.next_normal(),
                };
                Complex::with_val(prec, (re, im))
            })
            .collect();
        if unit_frobenius {
            let mut norm2 = Float::new(prec);
            let mut mag = Float::new(prec);
            for v in &vals {
                scalar::abs_into(v, &mut mag);
                norm2 += mag.clone().square();
            }
            let norm = norm2.sqrt();
            for v in &mut vals {
                *v /= &norm;
            }
        }
        let sp = Spectrum::new(vals, prec);
        if sp.check_distinct().is_ok() {
            return Ok((sp, offset));
        }
    }
    Err(Error::InvalidInput(format!(
        "no distinct diagonal draw within {RESAMPLE_LIMIT} attempts"
    )))
}

fn pow10_neg(e: u32, prec: u32) -> Complex {
    let f = Float::with_val(prec, 10u32).pow(-(e as i32));
    Complex::with_val(prec, f)
}

#[derive(Debug)]
pub struct Test1Run {
    pub outcome: DiagSolveOutcome,
    /// Resample offset that produced the invertible `E`.
    pub resample_offset: u64,
}

/// Test 1: `M = E Sigma E^-1 + 10^-e A` with the unperturbed decomposition as
/// the initial point.
pub fn run_test1(cfg: &RunConfig) -> Result<Test1Run> {
    cfg.validate()?;
    let prec = cfg.prec;
    let (e, resample_offset) =
        sample_well_conditioned(cfg.n, cfg.field, component_seed(cfg.seed, 0), prec)?;
    let f = e.invert()?;
    let (sigma, _) = sample_distinct_diag(cfg.n, cfg.field, component_seed(cfg.seed, 1), prec, false)?;
    let a = Matrix::random_gaussian(cfg.n, cfg.field, component_seed(cfg.seed, 2), true, prec);
    let m = e
        .mul_diag_right(&sigma)?
        .matmul(&f)?
        .add(&a.scale(&pow10_neg(cfg.perturb_exp, prec))?)?;
    let state = DiagState::new(m, e, f, sigma)?;
    let outcome = diag::diag_solve(
        state,
        &DiagSolveOptions { max_iter: cfg.iters, target: Float::new(prec) },
    )?;
    Ok(Test1Run { outcome, resample_offset })
}

#[derive(Debug)]
pub struct Test2Run {
    pub outcome: SimDiag2SolveOutcome,
    pub e_resample_offset: u64,
    pub f_resample_offset: u64,
}

/// Test 2: `M_k = F^-1 Sigma_k E^-1` with every initial component perturbed
/// at scale `10^-e` (full matrices for `E`, `F`; unit-Frobenius diagonals for
/// the spectra).
pub fn run_test2(cfg: &RunConfig) -> Result<Test2Run> {
    cfg.validate()?;
    let prec = cfg.prec;
    let (e, e_off) = sample_well_conditioned(cfg.n, cfg.field, component_seed(cfg.seed, 0), prec)?;
    let (f, f_off) = sample_well_conditioned(cfg.n, cfg.field, component_seed(cfg.seed, 1), prec)?;
    let (s1, _) = sample_distinct_diag(cfg.n, cfg.field, component_seed(cfg.seed, 2), prec, false)?;
    let (s2, _) = sample_distinct_diag(cfg.n, cfg.field, component_seed(cfg.seed, 3), prec, false)?;
    let e_inv = e.invert()?;
    let f_inv = f.invert()?;
    let m1 = f_inv.mul_diag_right(&s1)?.matmul(&e_inv)?;
    let m2 = f_inv.mul_diag_right(&s2)?.matmul(&e_inv)?;
    let scale = pow10_neg(cfg.perturb_exp, prec);
    let a = Matrix::random_gaussian(cfg.n, cfg.field, component_seed(cfg.seed, 4), true, prec);
    let b = Matrix::random_gaussian(cfg.n, cfg.field, component_seed(cfg.seed, 5), true, prec);
    let (c, _) = sample_distinct_diag(cfg.n, cfg.field, component_seed(cfg.seed, 6), prec, true)?;
    let (d, _) = sample_distinct_diag(cfg.n, cfg.field, component_seed(cfg.seed, 7), prec, true)?;
    let e0 = e.add(&a.scale(&scale)?)?;
    let f0 = f.add(&b.scale(&scale)?)?;
    let perturb = |s: &Spectrum, noise: &Spectrum| {
        let mut out = s.clone();
        for i in 0..s.n() {
            let v = Complex::with_val(prec, noise.value(i) * &scale) + s.value(i);
            out.set(i, v);
        }
        out
    };
    let s01 = perturb(&s1, &c);
    let s02 = perturb(&s2, &d);
    let state = SimDiag2State::new([m1, m2], e0, f0, [s01, s02])?;
    let outcome = simdiag2::simdiag2_solve(
        state,
        &SimDiag2SolveOptions { max_iter: cfg.iters, target: Float::new(prec) },
    )?;
    Ok(Test2Run { outcome, e_resample_offset: e_off, f_resample_offset: f_off })
}

#[derive(Debug, Clone)]
pub struct QrCompareConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub trials: usize,
    /// Below-diagonal threshold of the classical stopping rule.
    pub threshold: f64,
    pub seed: u64,
}

/// Sweep counts for one instance; `-1` marks a budget exhaustion, not a crash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrCompareRow {
    pub n: usize,
    pub trial: usize,
    pub iters_alg1: i64,
    pub iters_alg3: i64,
}

const QR_COMPARE_PREC: u32 = 128;
const QR_COMPARE_MAX_ITER: usize = 10_000;

fn qr_compare_one(cfg: &QrCompareConfig, n: usize, trial: usize) -> Result<QrCompareRow> {
    let seed = component_seed(cfg.seed, (n as u64) << 16 | trial as u64);
    let g = Matrix::random_gaussian(n, Field::Real, seed, false, QR_COMPARE_PREC);
    let m = g.matmul(&g.transpose())?; // symmetric positive semi-definite
    let alg1 = qr::qr_basic(&m, cfg.threshold, QR_COMPARE_MAX_ITER)?;
    let alg3 = qr::qr_iterate(
        &m,
        qr::QrStop::Certificate(diag::DIAG_CERT_THRESHOLD),
        QR_COMPARE_MAX_ITER,
    )?;
    let count = |out: &qr::QrOutcome| if out.stopped { out.iterations as i64 } else { -1 };
    Ok(QrCompareRow { n, trial, iters_alg1: count(&alg1), iters_alg3: count(&alg3) })
}

/// Figure-1 comparison: classical threshold stop vs certificate stop on
/// Gaussian PSD instances.  Rows come out in (n, trial) order regardless of
/// scheduling.
pub fn run_qr_compare(cfg: &QrCompareConfig) -> Result<Vec<QrCompareRow>> {
    if cfg.min_n < 2 || cfg.max_n < cfg.min_n {
        return Err(Error::InvalidInput(format!(
            "bad size range {}..{}",
            cfg.min_n, cfg.max_n
        )));
    }
    let jobs: Vec<(usize, usize)> = (cfg.min_n..=cfg.max_n)
        .flat_map(|n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(n, t)| qr_compare_one(cfg, n, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(|&(n, t)| qr_compare_one(cfg, n, t)).collect()
    }
}

/// Wilkinson pipeline: exact coefficients, chosen matrix route, bootstrap,
/// Newton refinement at `prec` bits.
pub fn run_wilkinson(n: usize, prec: u32, iters: usize, route: Route) -> Result<RefineOutcome> {
    if n < 2 {
        return Err(Error::InvalidInput("wilkinson test needs n >= 2".into()));
    }
    let p = Polynomial::wilkinson(n);
    poly::refine_roots(&p, route, None, prec, iters)
}
