//! Refinement strategies for a family of p simultaneously diagonalizable
//! matrices.
//!
//! Three reductions of the family problem are provided:
//!
//! - `Subproblem1`: refine the eigendecomposition of `M_1` alone, then read
//!   off every spectrum as `diag(F M_k E)`.
//! - `Subproblem2`: refine `(M_1, M_2)` simultaneously (see
//!   [`crate::simdiag2`]), then read off the remaining spectra.
//! - `Combination`: form a single linear combination `M(alpha) = sum_k
//!   alpha_k M_k` whose approximate spectrum is pushed onto the n-th roots of
//!   unity by a least-squares choice of `alpha`, and refine that.  On the
//!   unit circle the gap bound is `kappa = 1/(2 sin(pi/n)) <= n/4` and the
//!   radius bound is `K = 1`, which turns the single-matrix certificate into
//!   the dimension-only test
//!
//!   ```text
//!   u = n^2 eps <= 0.272
//!   ```
//!
//! Whatever the route, the outcome reports the *family* residual
//! `max(||off(F E)||, max_k ||off(F M_k E)||)` alongside the reduced
//! problem's own trace, since the reduced residual alone does not measure how
//! well the untouched family members are diagonalized.

use rug::{Assign, Complex, Float};

use crate::diag::{self, DiagSolveOptions, DiagState};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, MatrixJson};
use crate::report::{CertificateReport, IterationTrace};
use crate::scalar;
use crate::simdiag2::{self, SimDiag2SolveOptions, SimDiag2State};
use crate::spectrum::Spectrum;

pub const THEOREM6_CERT_THRESHOLD: f64 = 0.272;

/// Ordered family of same-sized matrices.
#[derive(Debug, Clone)]
pub struct Pencil {
    mats: Vec<Matrix>,
}

impl Pencil {
    pub fn new(mats: Vec<Matrix>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidInput("pencil must contain at least one matrix".into()));
        }
        for m in &mats[1..] {
            mats[0].check_same_dims(m)?;
        }
        Ok(Pencil { mats })
    }

    pub fn p(&self) -> usize {
        self.mats.len()
    }

    pub fn n(&self) -> usize {
        self.mats[0].n()
    }

    pub fn mat(&self, k: usize) -> &Matrix {
        &self.mats[k]
    }

    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }

    /// Serialized form: a JSON array of matrix objects.
    pub fn write_json_file(&self, path: &std::path::Path) -> Result<()> {
        let docs: Vec<MatrixJson> = self.mats.iter().map(Matrix::to_json).collect();
        std::fs::write(path, serde_json::to_string(&docs)?)?;
        Ok(())
    }

    pub fn read_json_file(path: &std::path::Path) -> Result<Pencil> {
        let text = std::fs::read_to_string(path)?;
        let docs: Vec<MatrixJson> = serde_json::from_str(&text)?;
        Pencil::new(docs.iter().map(Matrix::from_json).collect::<Result<_>>()?)
    }
}

/// Rayleigh-quotient spectrum estimate: `sigma_i = e_i^* M e_i / e_i^* e_i`
/// over the columns `e_i` of `E`.
pub fn rayleigh_extract(m: &Matrix, e: &Matrix) -> Result<Spectrum> {
    m.check_same_dims(e)?;
    let n = m.n();
    let prec = m.prec().max(e.prec());
    let mut values = Vec::with_capacity(n);
    let mut tmp = Complex::new(prec);
    for col in 0..n {
        let mut num = Complex::new(prec);
        let mut den = Complex::new(prec);
        // num = sum_i conj(e_ic) * (M e)_ic computed without forming M e fully
        for i in 0..n {
            let ei_conj = Complex::with_val(prec, e.get(i, col).conj_ref());
            let mut me = Complex::new(prec);
            for j in 0..n {
                tmp.assign(m.get(i, j) * e.get(j, col));
                me += &tmp;
            }
            tmp.assign(&ei_conj * &me);
            num += &tmp;
            tmp.assign(&ei_conj * e.get(i, col));
            den += &tmp;
        }
        if den.real().is_zero() && den.imag().is_zero() {
            return Err(Error::ZeroColumn { col });
        }
        values.push(num / &den);
    }
    Ok(Spectrum::new(values, prec))
}

/// Minimal rectangular storage for [`lstsq`] inputs, row major.
#[derive(Debug, Clone)]
pub struct RectMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex>,
}

/// Least squares `min_alpha || S alpha - rhs ||_2` for a full-column-rank
/// `n x p` matrix (`p <= n`), by Householder QR.
pub fn lstsq(s: &RectMatrix, rhs: &[Complex], prec: u32) -> Result<Vec<Complex>> {
    let (n, p) = (s.rows, s.cols);
    if rhs.len() != n || p > n {
        return Err(Error::InvalidInput(format!("lstsq shape {n}x{p} with rhs {}", rhs.len())));
    }
    let mut a: Vec<Complex> = s.data.iter().map(|c| Complex::with_val(prec, c)).collect();
    let mut b: Vec<Complex> = rhs.iter().map(|c| Complex::with_val(prec, c)).collect();
    let mut scale = Float::new(prec);
    let mut mag = Float::new(prec);
    for c in &a {
        scalar::abs_into(c, &mut mag);
        if mag > scale {
            scale.assign(&mag);
        }
    }
    if scale < 1u32 {
        scale.assign(1);
    }
    let threshold = {
        use rug::ops::Pow;
        Float::with_val(prec, 2f64).pow(-(Float::with_val(prec, prec) / 2u32)) * &scale
    };
    let mut tmp = Complex::new(prec);
    for k in 0..p {
        // Householder vector for column k below row k
        let mut norm = Float::new(prec);
        for i in k..n {
            scalar::abs_into(&a[i * p + k], &mut mag);
            norm += mag.clone().square();
        }
        let norm = norm.sqrt();
        if norm <= threshold {
            return Err(Error::RankDeficient { col: k });
        }
        // phase of the pivot entry (1 if zero)
        let pivot = a[k * p + k].clone();
        scalar::abs_into(&pivot, &mut mag);
        let phase = if mag.is_zero() {
            Complex::with_val(prec, 1)
        } else {
            Complex::with_val(prec, &pivot / &mag)
        };
        // v = x + phase * norm * e1
        let mut v: Vec<Complex> = (k..n).map(|i| a[i * p + k].clone()).collect();
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
        // apply H = I - 2 v v^* / (v^* v) to the remaining columns and to b
        for j in k..p {
            let mut dot = Complex::new(prec);
            for (off, vi) in v.iter().enumerate() {
                tmp.assign(Complex::with_val(prec, vi.conj_ref()) * &a[(k + off) * p + j]);
                dot += &tmp;
            }
            let mut factor = dot;
            factor *= 2u32;
            factor /= &vnorm2;
            for (off, vi) in v.iter().enumerate() {
                tmp.assign(&factor * vi);
                a[(k + off) * p + j] -= &tmp;
            }
        }
        let mut dot = Complex::new(prec);
        for (off, vi) in v.iter().enumerate() {
            tmp.assign(Complex::with_val(prec, vi.conj_ref()) * &b[k + off]);
            dot += &tmp;
        }
        let mut factor = dot;
        factor *= 2u32;
        factor /= &vnorm2;
        for (off, vi) in v.iter().enumerate() {
            tmp.assign(&factor * vi);
            b[k + off] -= &tmp;
        }
    }
    // back substitution on the p x p upper triangle
    let mut alpha: Vec<Complex> = (0..p).map(|_| Complex::new(prec)).collect();
    for k in (0..p).rev() {
        let mut acc = b[k].clone();
        for j in k + 1..p {
            tmp.assign(&a[k * p + j] * &alpha[j]);
            acc -= &tmp;
        }
        scalar::abs_into(&a[k * p + k], &mut mag);
        if mag <= threshold {
            return Err(Error::RankDeficient { col: k });
        }
        alpha[k] = acc / &a[k * p + k];
    }
    Ok(alpha)
}

/// Stack the Rayleigh spectra of the family into the `n x p` matrix
/// `S_{i,k} = sigma_i(M_k)` and solve `S alpha ~ roots of unity`.
pub fn combine_pencil(pencil: &Pencil, e: &Matrix) -> Result<(Matrix, Vec<Complex>)> {
    let n = pencil.n();
    let p = pencil.p();
    let prec = e.prec();
    let spectra: Vec<Spectrum> = pencil
        .mats()
        .iter()
        .map(|m| rayleigh_extract(m, e))
        .collect::<Result<_>>()?;
    let mut s = RectMatrix { rows: n, cols: p, data: Vec::with_capacity(n * p) };
    for i in 0..n {
        for sp in &spectra {
            s.data.push(sp.value(i).clone());
        }
    }
    let target = Spectrum::roots_of_unity(n, prec);
    let alpha = lstsq(&s, target.values(), prec)?;
    let mut combined = pencil.mat(0).with_prec(prec).scale(&alpha[0])?;
    for k in 1..p {
        combined = combined.add(&pencil.mat(k).with_prec(prec).scale(&alpha[k])?)?;
    }
    Ok((combined, alpha))
}

/// Dimension-only certificate for the combined matrix with the
/// roots-of-unity target spectrum: `u = n^2 eps <= 0.272`.
pub fn theorem6_certificate(res: &diag::Residuals, n: usize) -> CertificateReport {
    let prec = res.z.prec();
    let epsilon = res.err();
    let kappa = {
        let pi = Float::with_val(prec, rug::float::Constant::Pi);
        let gap = (pi / n as u32).sin() * 2u32;
        let inv = Float::with_val(prec, gap.recip_ref());
        if inv < 1u32 { Float::with_val(prec, 1) } else { inv }
    };
    let u = Float::with_val(prec, (n * n) as u32) * &epsilon;
    CertificateReport::new(epsilon, kappa, Float::with_val(prec, 1), u, THEOREM6_CERT_THRESHOLD)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Subproblem1,
    Subproblem2,
    Combination,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subproblem1" => Ok(Strategy::Subproblem1),
            "subproblem2" => Ok(Strategy::Subproblem2),
            "combination" => Ok(Strategy::Combination),
            other => Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug)]
pub struct FamilySolveOptions {
    pub strategy: Strategy,
    pub max_iter: usize,
    pub target: Float,
}

#[derive(Debug)]
pub struct FamilySolveOutcome {
    pub e: Matrix,
    pub f: Matrix,
    pub sigmas: Vec<Spectrum>,
    /// Trace of the reduced problem actually iterated.
    pub trace: IterationTrace,
    /// max(||off(F E)||, max_k ||off(F M_k E)||) at the final point.
    pub family_err: Float,
    /// Theorem-6 certificate at the initial combined point (Combination only).
    pub combined_certificate: Option<CertificateReport>,
    /// Combination coefficients (Combination only).
    pub alpha: Option<Vec<Complex>>,
}

/// Family residual at `(E, F)`: how far the pair is from simultaneously
/// diagonalizing everything.  Off-diagonal parts only — fixed points of the
/// two-matrix route leave `F E` diagonal rather than exactly `I`, so the
/// diagonal of `F E` is not part of the residual.
pub fn family_residual(pencil: &Pencil, e: &Matrix, f: &Matrix) -> Result<Float> {
    let mut worst = f.matmul(e)?.off_part().norm_inf();
    for m in pencil.mats() {
        let fme = f.matmul(m)?.matmul(e)?;
        let off = fme.off_part().norm_inf();
        if off > worst {
            worst = off;
        }
    }
    Ok(worst)
}

pub fn family_solve(pencil: &Pencil, e0: Matrix, f0: Matrix, opts: &FamilySolveOptions) -> Result<FamilySolveOutcome> {
    pencil.mat(0).check_same_dims(&e0)?;
    pencil.mat(0).check_same_dims(&f0)?;
    let mut combined_certificate = None;
    let mut alpha_out = None;
    let (e, f, trace) = match opts.strategy {
        Strategy::Subproblem1 => {
            let m = pencil.mat(0).clone();
            let sigma0 = Spectrum::from_diag(&f0.matmul(&m)?.matmul(&e0)?);
            let out = diag::diag_solve(
                DiagState::new(m, e0, f0, sigma0)?,
                &DiagSolveOptions { max_iter: opts.max_iter, target: opts.target.clone() },
            )?;
            (out.state.e, out.state.f, out.trace)
        }
        Strategy::Subproblem2 => {
            if pencil.p() < 2 {
                return Err(Error::InvalidInput("subproblem2 needs at least two matrices".into()));
            }
            let m1 = pencil.mat(0).clone();
            let m2 = pencil.mat(1).clone();
            let s1 = Spectrum::from_diag(&f0.matmul(&m1)?.matmul(&e0)?);
            let s2 = Spectrum::from_diag(&f0.matmul(&m2)?.matmul(&e0)?);
            let out = simdiag2::simdiag2_solve(
                SimDiag2State::new([m1, m2], e0, f0, [s1, s2])?,
                &SimDiag2SolveOptions { max_iter: opts.max_iter, target: opts.target.clone() },
            )?;
            (out.state.e, out.state.f, out.trace)
        }
        Strategy::Combination => {
            let (combined, alpha) = combine_pencil(pencil, &e0)?;
            let sigma0 = Spectrum::from_diag(&f0.matmul(&combined)?.matmul(&e0)?);
            let state = DiagState::new(combined, e0, f0, sigma0)?;
            let res = state.residuals()?;
            combined_certificate = Some(theorem6_certificate(&res, pencil.n()));
            alpha_out = Some(alpha);
            let out = diag::diag_solve(
                state,
                &DiagSolveOptions { max_iter: opts.max_iter, target: opts.target.clone() },
            )?;
            (out.state.e, out.state.f, out.trace)
        }
    };
    let sigmas = pencil
        .mats()
        .iter()
        .map(|m| Ok(Spectrum::from_diag(&f.matmul(m)?.matmul(&e)?)))
        .collect::<Result<_>>()?;
    let family_err = family_residual(pencil, &e, &f)?;
    Ok(FamilySolveOutcome {
        e,
        f,
        sigmas,
        trace,
        family_err,
        combined_certificate,
        alpha: alpha_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Field;

    /// p commuting matrices sharing eigenvectors E_true, initial point
    /// perturbed multiplicatively by `perturb`.
    fn fixture(n: usize, p: usize, seed: u64, perturb: f64, prec: u32) -> (Pencil, Matrix, Matrix) {
        let e_true = Matrix::random_gaussian(n, Field::Complex, seed, false, prec);
        let f_true = e_true.invert().unwrap();
        let mut mats = Vec::new();
        let mut src = crate::rng::GaussianSource::new(seed + 77);
        for _ in 0..p {
            let vals: Vec<f64> = (0..n).map(|_| src.next_normal()).collect();
            let sp = Spectrum::from_f64(&vals, prec);
            mats.push(e_true.mul_diag_right(&sp).unwrap().matmul(&f_true).unwrap());
        }
        let noise = Matrix::random_gaussian(n, Field::Complex, seed + 200, true, prec);
        let bump = noise.scale(&Complex::with_val(prec, perturb)).unwrap().add_identity().unwrap();
        let e0 = e_true.matmul(&bump).unwrap();
        let f0 = bump.invert().unwrap().matmul(&f_true).unwrap();
        (Pencil::new(mats).unwrap(), e0, f0)
    }

    #[test]
    fn rayleigh_recovers_exact_spectrum() {
        let prec = 256;
        let e = Matrix::random_gaussian(5, Field::Complex, 4, false, prec);
        let f = e.invert().unwrap();
        let sp = Spectrum::from_f64(&[2.0, -1.0, 0.5, 3.0, 7.0], prec);
        let m = e.mul_diag_right(&sp).unwrap().matmul(&f).unwrap();
        let got = rayleigh_extract(&m, &e).unwrap();
        for i in 0..5 {
            let dev = Complex::with_val(prec, got.value(i) - sp.value(i));
            let mut mag = Float::new(prec);
            scalar::abs_into(&dev, &mut mag);
            assert!(mag < Float::with_val(prec, 2f64.powi(-230)), "slot {i}: {mag:e}");
        }
    }

    #[test]
    fn rayleigh_zero_column_is_error() {
        let prec = 64;
        let m = Matrix::identity(3, prec);
        let mut e = Matrix::identity(3, prec);
        e.set(1, 1, Complex::new(prec));
        assert!(matches!(rayleigh_extract(&m, &e), Err(Error::ZeroColumn { col: 1 })));
    }

    #[test]
    fn lstsq_frozen_oracle() {
        // S = [[1,0],[0,1],[1,1]], rhs = (1,2,4): normal equations give
        // alpha = (4/3, 7/3)
        let prec = 128;
        let s = RectMatrix {
            rows: 3,
            cols: 2,
            data: [1, 0, 0, 1, 1, 1].iter().map(|&v| Complex::with_val(prec, v)).collect(),
        };
        let rhs: Vec<Complex> = [1, 2, 4].iter().map(|&v| Complex::with_val(prec, v)).collect();
        let alpha = lstsq(&s, &rhs, prec).unwrap();
        let expect = [
            Complex::with_val(prec, 4) / Complex::with_val(prec, 3),
            Complex::with_val(prec, 7) / Complex::with_val(prec, 3),
        ];
        let mut mag = Float::new(prec);
        for k in 0..2 {
            let dev = Complex::with_val(prec, &alpha[k] - &expect[k]);
            scalar::abs_into(&dev, &mut mag);
            assert!(mag < Float::with_val(prec, 2f64.powi(-120)), "alpha[{k}] = {:?}", alpha[k]);
        }
    }

    #[test]
    fn lstsq_exact_square_system() {
        let prec = 96;
        let s = RectMatrix {
            rows: 2,
            cols: 2,
            data: [2, 1, 0, 3].iter().map(|&v| Complex::with_val(prec, v)).collect(),
        };
        let rhs: Vec<Complex> = [4, 9].iter().map(|&v| Complex::with_val(prec, v)).collect();
        let alpha = lstsq(&s, &rhs, prec).unwrap();
        // 2a + b = 4, 3b = 9 -> b = 3, a = 1/2
        let mut mag = Float::new(prec);
        let dev = Complex::with_val(prec, &alpha[0] - &Complex::with_val(prec, 0.5));
        scalar::abs_into(&dev, &mut mag);
        assert!(mag < Float::with_val(prec, 2f64.powi(-90)));
        let dev = Complex::with_val(prec, &alpha[1] - &Complex::with_val(prec, 3));
        scalar::abs_into(&dev, &mut mag);
        assert!(mag < Float::with_val(prec, 2f64.powi(-90)));
    }

    #[test]
    fn lstsq_rank_deficient_is_error() {
        let prec = 96;
        let s = RectMatrix {
            rows: 3,
            cols: 2,
            data: [1, 2, 1, 2, 1, 2].iter().map(|&v| Complex::with_val(prec, v)).collect(),
        };
        let rhs: Vec<Complex> = (0..3).map(|_| Complex::with_val(prec, 1)).collect();
        assert!(matches!(lstsq(&s, &rhs, prec), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn combination_hits_roots_of_unity() {
        let prec = 320;
        let (pencil, e0, _f0) = fixture(6, 6, 31, 0.0, prec);
        let (combined, alpha) = combine_pencil(&pencil, &e0).unwrap();
        assert_eq!(alpha.len(), 6);
        let got = rayleigh_extract(&combined, &e0).unwrap();
        let target = Spectrum::roots_of_unity(6, prec);
        let mut mag = Float::new(prec);
        for i in 0..6 {
            let dev = Complex::with_val(prec, got.value(i) - target.value(i));
            scalar::abs_into(&dev, &mut mag);
            assert!(mag < Float::with_val(prec, 2f64.powi(-280)), "slot {i}: {mag:e}");
        }
    }

    #[test]
    fn theorem6_frozen_formula() {
        let prec = 128;
        let mut z = Matrix::zeros(4, prec);
        z.set(0, 1, Complex::with_val(prec, 2f64.powi(-10)));
        let res = diag::Residuals { z, delta: Matrix::zeros(4, prec) };
        let cert = theorem6_certificate(&res, 4);
        // u = 16 * 2^-10 = 0.015625; kappa = 1/(2 sin(pi/4)) = 1/sqrt(2) -> floored to 1
        assert_eq!(cert.u, Float::with_val(prec, 0.015625));
        assert_eq!(cert.kappa, Float::with_val(prec, 1));
        assert!(cert.satisfied);
        // n = 8: kappa = 1/(2 sin(pi/8)) ~ 1.3066
        let z8 = Matrix::zeros(8, prec);
        let res8 = diag::Residuals { z: z8, delta: Matrix::zeros(8, prec) };
        let cert8 = theorem6_certificate(&res8, 8);
        let dev = (cert8.kappa.clone() - Float::with_val(prec, 1.3065629648763766)).abs();
        assert!(dev < Float::with_val(prec, 1e-12));
        assert!(cert8.kappa < Float::with_val(prec, 2)); // <= n/4

        // n = 10 boundary: u = 100 eps, so eps = 0.003 fails (u = 0.3) while
        // eps = 0.002 passes (u = 0.2 <= 0.272)
        for (eps, want) in [(0.003, false), (0.002, true)] {
            let mut z = Matrix::zeros(10, prec);
            z.set(0, 1, Complex::with_val(prec, eps));
            let cert = theorem6_certificate(
                &diag::Residuals { z, delta: Matrix::zeros(10, prec) },
                10,
            );
            assert_eq!(cert.satisfied, want, "eps = {eps}");
            let dev = (cert.u.clone() - Float::with_val(prec, 100.0 * eps)).abs();
            assert!(dev < Float::with_val(prec, 1e-15));
        }
    }

    #[test]
    fn all_strategies_converge_on_commuting_family() {
        let prec = 512;
        for strategy in [Strategy::Subproblem1, Strategy::Subproblem2, Strategy::Combination] {
            let (pencil, e0, f0) = fixture(5, 3, 9, 1e-8, prec);
            let out = family_solve(
                &pencil,
                e0,
                f0,
                &FamilySolveOptions {
                    strategy,
                    max_iter: 8,
                    target: Float::with_val(prec, 2f64.powi(-400)),
                },
            )
            .unwrap();
            assert!(
                out.family_err < Float::with_val(prec, 2f64.powi(-350)),
                "{strategy:?}: family err {:e}",
                out.family_err
            );
            assert_eq!(out.sigmas.len(), 3);
            if strategy == Strategy::Combination {
                let cert = out.combined_certificate.unwrap();
                assert!(cert.satisfied, "u = {:e}", cert.u);
                assert!(out.alpha.is_some());
            }
        }
    }
}
