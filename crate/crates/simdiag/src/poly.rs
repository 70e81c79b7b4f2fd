//! Polynomials with exact rational coefficients and the two matrix
//! constructions used for high-precision root refinement.
//!
//! Coefficients are kept as exact rationals so that the companion and
//! arrowhead matrices are exact up to one final rounding at the requested
//! precision — crucial for ill-conditioned polynomials whose coefficients
//! must not be damaged by an intermediate double rounding.

use rug::{Assign, Complex, Float, Rational};
use serde::{Deserialize, Serialize};

use crate::diag::{self, DiagSolveOptions, DiagSolveOutcome, DiagState};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::qr;
use crate::spectrum::Spectrum;

/// Dense polynomial, constant term first, exact coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Rational>,
}

impl Polynomial {
    /// `coeffs[k]` is the coefficient of `x^k`; the leading one must be
    /// nonzero.
    pub fn new(coeffs: Vec<Rational>) -> Result<Self> {
        match coeffs.last() {
            None => Err(Error::InvalidInput("polynomial needs at least one coefficient".into())),
            Some(c) if c.cmp0() == std::cmp::Ordering::Equal && coeffs.len() > 1 => {
                Err(Error::InvalidInput("leading coefficient is zero".into()))
            }
            _ => Ok(Polynomial { coeffs }),
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &Rational {
        &self.coeffs[k]
    }

    /// prod_{i=1..n} (x - i), expanded exactly.
    pub fn wilkinson(n: usize) -> Polynomial {
        assert!(n >= 1);
        let mut coeffs = vec![Rational::from(1)];
        for root in 1..=n {
            // multiply by (x - root)
            let mut next = vec![Rational::new(); coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= Rational::from((root as u64, 1u64)) * c;
            }
            coeffs = next;
        }
        Polynomial { coeffs }
    }

    /// Exact Horner evaluation.
    pub fn eval_rational(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    /// Horner evaluation at a complex point, at the point's precision.
    pub fn eval_complex(&self, x: &Complex) -> Complex {
        let prec = x.prec().0.max(x.prec().1);
        let mut acc = Complex::new(prec);
        let mut tmp = Complex::new(prec);
        for c in self.coeffs.iter().rev() {
            tmp.assign(&acc * x);
            acc.assign(&tmp);
            acc += Complex::with_val(prec, Float::with_val(prec, c));
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Polynomial { coeffs: vec![Rational::new()] };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| Rational::from((k as u64, 1u64)) * c)
            .collect();
        Polynomial { coeffs }
    }

    /// Monic-normalized coefficients a_0..a_{n-1} (exact).
    fn monic_tail(&self) -> Vec<Rational> {
        let lead = self.coeffs.last().unwrap();
        self.coeffs[..self.degree()]
            .iter()
            .map(|c| Rational::from(c / lead))
            .collect()
    }

    /// Companion matrix, right-column convention: ones on the subdiagonal,
    /// `-a_0 .. -a_{n-1}` (monic) down the last column.
    pub fn companion_matrix(&self, prec: u32) -> Result<Matrix> {
        let n = self.degree();
        if n == 0 {
            return Err(Error::InvalidInput("constant polynomial has no companion matrix".into()));
        }
        let tail = self.monic_tail();
        let mut m = Matrix::zeros(n, prec);
        for i in 1..n {
            m.set(i, i - 1, Complex::with_val(prec, 1));
        }
        for (i, a) in tail.iter().enumerate() {
            m.set(i, n - 1, Complex::with_val(prec, -Float::with_val(prec, a)));
        }
        Ok(m)
    }

    /// Eigenvector of the companion matrix for the (approximate) root
    /// `lambda`, by the Horner shift recurrence: `v_{n-1} = 1`,
    /// `v_{i-1} = lambda v_i + a_i`.
    pub fn companion_eigvector(&self, lambda: &Complex, prec: u32) -> Vec<Complex> {
        let n = self.degree();
        let tail = self.monic_tail();
        let mut v = vec![Complex::new(prec); n];
        v[n - 1].assign(1);
        let mut tmp = Complex::new(prec);
        for i in (1..n).rev() {
            tmp.assign(lambda * &v[i]);
            tmp += Complex::with_val(prec, Float::with_val(prec, &tail[i]));
            v[i - 1].assign(&tmp);
        }
        v
    }

    /// Default interior nodes for the arrowhead construction: `i + 1/2` for
    /// `i = 1 .. degree-1`.
    pub fn default_nodes(&self) -> Vec<Rational> {
        (1..self.degree())
            .map(|i| Rational::from((2 * i as u64 + 1, 2u64)))
            .collect()
    }

    /// Symmetric arrowhead matrix with this characteristic polynomial (up to
    /// the leading coefficient):
    ///
    /// ```text
    /// A = [ diag(b)  c ]      c_i = sqrt(-P(b_i) / Q'(b_i)),  Q = prod (x - b_i)
    ///     [   c^t    d ]      d   = -a_{n-1} - sum_i b_i      (monic a's)
    /// ```
    ///
    /// Requires the nodes `b` to interlace the roots so every radicand is
    /// nonnegative; otherwise the offending node is reported.
    pub fn arrowhead_matrix(&self, nodes: &[Rational], prec: u32) -> Result<Matrix> {
        let n = self.degree();
        if nodes.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "degree {n} needs {} nodes, got {}",
                n - 1,
                nodes.len()
            )));
        }
        let tail = self.monic_tail();
        let lead = self.coeffs.last().unwrap();
        let mut m = Matrix::zeros(n, prec);
        for (i, b) in nodes.iter().enumerate() {
            m.set(i, i, Complex::with_val(prec, Float::with_val(prec, b)));
            // radicand = -P(b_i)/Q'(b_i), all exact
            let p = Rational::from(&self.eval_rational(b) / lead);
            let mut qp = Rational::from(1);
            for (j, other) in nodes.iter().enumerate() {
                if j != i {
                    qp *= Rational::from(b - other);
                }
            }
            let radicand = -p / qp;
            if radicand.cmp0() == std::cmp::Ordering::Less {
                return Err(Error::PositiveRadicand {
                    index: i,
                    value: (-Rational::from(&radicand)).to_f64(),
                });
            }
            let c = Float::with_val(prec, &radicand).sqrt();
            m.set(i, n - 1, Complex::with_val(prec, &c));
            m.set(n - 1, i, Complex::with_val(prec, &c));
        }
        let mut d = -Rational::from(&tail[n - 1]);
        for b in nodes {
            d -= b;
        }
        m.set(n - 1, n - 1, Complex::with_val(prec, Float::with_val(prec, &d)));
        Ok(m)
    }
}

/// Which matrix realization seeds the root refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Companion,
    Arrowhead,
}

impl std::str::FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Route> {
        match s {
            "companion" => Ok(Route::Companion),
            "arrowhead" => Ok(Route::Arrowhead),
            other => Err(Error::Parse(format!("unknown route {other:?}"))),
        }
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::Companion => "companion",
            Route::Arrowhead => "arrowhead",
        })
    }
}

/// Bootstrap precision for the symmetric arrowhead route: double scale is
/// enough, the QR error there sits well inside the Newton basin.
const ARROWHEAD_BOOT_PREC: u32 = 64;
/// The companion matrix is badly non-normal (entries up to the largest
/// coefficient), so the bootstrap runs wider and to a tighter sweep level.
const COMPANION_BOOT_PREC: u32 = 192;

#[derive(Debug)]
pub struct RefineOutcome {
    /// Refined eigenvalues, i.e. the roots of `P`, in QR discovery order.
    pub roots: Spectrum,
    pub solve: DiagSolveOutcome,
}

/// Bootstrap an eigendecomposition of the chosen matrix realization at low
/// precision, widen it to `prec_bits` and refine with the Newton iteration.
///
/// `nodes` (arrowhead route only) defaults to `i + 1/2`.  The companion route
/// degrades with the root condition number; for the Wilkinson family it stops
/// working around degree 20, which is the point of the comparison.
pub fn refine_roots(
    p: &Polynomial,
    route: Route,
    nodes: Option<&[Rational]>,
    prec_bits: u32,
    iters: usize,
) -> Result<RefineOutcome> {
    let n = p.degree();
    if n < 2 {
        return Err(Error::InvalidInput("refinement needs degree at least 2".into()));
    }
    let (m_high, low_state) = match route {
        Route::Arrowhead => {
            let owned;
            let nodes = match nodes {
                Some(b) => b,
                None => {
                    owned = p.default_nodes();
                    &owned
                }
            };
            let a_low = p.arrowhead_matrix(nodes, ARROWHEAD_BOOT_PREC)?;
            let out = qr::qr_basic(&a_low, 1e-13, 5000)?;
            let state = qr::newton_state_from_qr(&a_low, &out)?;
            (p.arrowhead_matrix(nodes, prec_bits)?, state)
        }
        Route::Companion => {
            let c_low = p.companion_matrix(COMPANION_BOOT_PREC)?;
            let out = qr::qr_basic(&c_low, 1e-20, 4000)?;
            let sigma = Spectrum::from_diag(&out.a);
            sigma.check_distinct()?;
            // eigenvectors from the Horner recurrence at the estimates
            let mut e = Matrix::zeros(n, COMPANION_BOOT_PREC);
            for j in 0..n {
                let v = p.companion_eigvector(sigma.value(j), COMPANION_BOOT_PREC);
                for (i, vi) in v.into_iter().enumerate() {
                    e.set(i, j, vi);
                }
            }
            let f = e.invert()?;
            let state = DiagState::new(c_low, e, f, sigma)?;
            (p.companion_matrix(prec_bits)?, state)
        }
    };
    let mut state = low_state.with_prec(prec_bits);
    state.m = m_high;
    let solve = diag::diag_solve(
        state,
        &DiagSolveOptions { max_iter: iters, target: Float::new(prec_bits) },
    )?;
    let roots = solve.state.sigma.clone();
    Ok(RefineOutcome { roots, solve })
}

/// JSON schema: exact decimal/rational strings, constant term first.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub degree: usize,
    pub coeffs: Vec<String>,
}

impl Polynomial {
    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            degree: self.degree(),
            coeffs: self.coeffs.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn from_json(json: &PolynomialJson) -> Result<Polynomial> {
        if json.coeffs.len() != json.degree + 1 {
            return Err(Error::InvalidInput(format!(
                "degree {} disagrees with {} coefficients",
                json.degree,
                json.coeffs.len()
            )));
        }
        let coeffs = json
            .coeffs
            .iter()
            .map(|s| s.parse::<Rational>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        Polynomial::new(coeffs)
    }

    pub fn write_json_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_json())?)?;
        Ok(())
    }

    pub fn read_json_file(path: &std::path::Path) -> Result<Polynomial> {
        let text = std::fs::read_to_string(path)?;
        Polynomial::from_json(&serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qr;
    use crate::scalar;

    fn rat(n: i64) -> Rational {
        Rational::from(n)
    }

    #[test]
    fn wilkinson_small_expansion() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let p = Polynomial::wilkinson(3);
        assert_eq!(p.degree(), 3);
        for (k, want) in [-6i64, 11, -6, 1].iter().enumerate() {
            assert_eq!(p.coeff(k), &rat(*want), "coeff {k}");
        }
    }

    #[test]
    fn wilkinson_20_extreme_coefficients() {
        let p = Polynomial::wilkinson(20);
        assert_eq!(p.coeff(0), &"2432902008176640000".parse::<Rational>().unwrap()); // 20!
        assert_eq!(p.coeff(19), &rat(-210)); // -(1 + ... + 20)
        assert_eq!(p.coeff(20), &rat(1));
        // all twenty integer roots are exact
        for root in 1..=20 {
            assert_eq!(p.eval_rational(&rat(root)).cmp0(), std::cmp::Ordering::Equal);
        }
    }

    #[test]
    fn eval_and_derivative() {
        let p = Polynomial::wilkinson(3);
        // P(1/2) = (-1/2)(-3/2)(-5/2) = -15/8
        assert_eq!(p.eval_rational(&Rational::from((1, 2))), Rational::from((-15, 8)));
        let dp = p.derivative();
        // P' = 3x^2 - 12x + 11 ; P'(2) = -1
        assert_eq!(dp.eval_rational(&rat(2)), rat(-1));
    }

    #[test]
    fn companion_matrix_and_horner_eigvector() {
        let prec = 192;
        let p = Polynomial::wilkinson(3);
        let c = p.companion_matrix(prec).unwrap();
        // last column is -a_0, -a_1, -a_2 = 6, -11, 6
        assert_eq!(c.get(0, 2), &Complex::with_val(prec, 6));
        assert_eq!(c.get(1, 2), &Complex::with_val(prec, -11));
        assert_eq!(c.get(2, 2), &Complex::with_val(prec, 6));
        // C v = 2 v for the Horner eigenvector at the root 2
        let lambda = Complex::with_val(prec, 2);
        let v = p.companion_eigvector(&lambda, prec);
        assert_eq!(v[2], Complex::with_val(prec, 1));
        let mut mag = Float::new(prec);
        let mut tmp = Complex::new(prec);
        for i in 0..3 {
            let mut cv = Complex::new(prec);
            for j in 0..3 {
                tmp.assign(c.get(i, j) * &v[j]);
                cv += &tmp;
            }
            tmp.assign(&lambda * &v[i]);
            cv -= &tmp;
            scalar::abs_into(&cv, &mut mag);
            assert!(mag.is_zero(), "row {i}: {mag:e}");
        }
    }

    #[test]
    fn arrowhead_is_symmetric_with_right_spectrum() {
        let prec = 256;
        let p = Polynomial::wilkinson(4);
        let nodes = p.default_nodes();
        assert_eq!(nodes, vec![Rational::from((3, 2)), Rational::from((5, 2)), Rational::from((7, 2))]);
        let a = p.arrowhead_matrix(&nodes, prec).unwrap();
        // corner d = -a_3 - sum b_i = 10 - 7.5 = 2.5
        assert_eq!(a.get(3, 3), &Complex::with_val(prec, 2.5));
        let asym = a.sub(&a.transpose()).unwrap().norm_inf();
        assert!(asym.is_zero());
        // its eigenvalues are the roots 1..4
        let out = qr::qr_basic(&a, 1e-30, 3000).unwrap();
        assert!(out.stopped);
        let mut got: Vec<f64> = (0..4).map(|i| out.a.get(i, i).real().to_f64()).collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (g, want) in got.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((g - want).abs() < 1e-20, "{g} vs {want}");
        }
    }

    #[test]
    fn arrowhead_frozen_two_by_two() {
        // P = x^2 - 3x + 2, node b = 3/2: P(3/2) = -1/4, Q' = 1, so
        // c_1 = 1/2 and d = 3 - 3/2 = 3/2; A = [[3/2, 1/2], [1/2, 3/2]]
        let prec = 128;
        let p = Polynomial::new(vec![rat(2), rat(-3), rat(1)]).unwrap();
        let a = p.arrowhead_matrix(&[Rational::from((3, 2))], prec).unwrap();
        assert_eq!(a.get(0, 0), &Complex::with_val(prec, 1.5));
        assert_eq!(a.get(0, 1), &Complex::with_val(prec, 0.5));
        assert_eq!(a.get(1, 0), &Complex::with_val(prec, 0.5));
        assert_eq!(a.get(1, 1), &Complex::with_val(prec, 1.5));
    }

    #[test]
    fn wilkinson_companion_trace_is_root_sum() {
        let prec = 128;
        let c = Polynomial::wilkinson(10).companion_matrix(prec).unwrap();
        let mut trace = Complex::new(prec);
        for i in 0..10 {
            trace += c.get(i, i);
        }
        assert_eq!(trace, Complex::with_val(prec, 55)); // 1 + ... + 10
    }

    #[test]
    fn arrowhead_rejects_non_interlacing_nodes() {
        let p = Polynomial::wilkinson(4);
        let bad: Vec<Rational> = [100, 101, 102].iter().map(|&v| rat(v)).collect();
        assert!(matches!(
            p.arrowhead_matrix(&bad, 128),
            Err(Error::PositiveRadicand { .. })
        ));
    }

    #[test]
    fn refine_quadratic_both_routes() {
        let prec = 512;
        let p = Polynomial::new(vec![rat(2), rat(-3), rat(1)]).unwrap();
        for route in [Route::Arrowhead, Route::Companion] {
            let out = refine_roots(&p, route, None, prec, 5).unwrap();
            let mut got: Vec<f64> = (0..2).map(|i| out.roots.value(i).real().to_f64()).collect();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!((got[0] - 1.0).abs() < 1e-15 && (got[1] - 2.0).abs() < 1e-15, "{route}");
            // residual at rounding scale after a handful of steps
            let err = out.solve.trace.final_err();
            assert!(*err < Float::with_val(prec, 2f64.powi(-400)), "{route}: {err:e}");
            // exact integer roots to high precision
            for i in 0..2 {
                let r = out.roots.value(i).real();
                let nearest = Float::with_val(prec, r.to_f64().round());
                let dev = Float::with_val(prec, r - &nearest).abs();
                assert!(dev < Float::with_val(prec, 2f64.powi(-380)), "{route}: {dev:e}");
            }
        }
    }

    #[test]
    fn refine_wilkinson_eight_companion_route() {
        let prec = 640;
        let p = Polynomial::wilkinson(8);
        let out = refine_roots(&p, Route::Companion, None, prec, 8).unwrap();
        let mut got: Vec<Float> = (0..8).map(|i| out.roots.value(i).real().clone()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, r) in got.iter().enumerate() {
            let dev = Float::with_val(prec, r - Float::with_val(prec, (k + 1) as u32)).abs();
            assert!(dev < Float::with_val(prec, 1e-60), "root {}: {dev:e}", k + 1);
            // refined roots are real up to rounding
            let imag = out.roots.value(0).imag().clone().abs();
            assert!(imag < Float::with_val(prec, 2f64.powi(-300)));
        }
    }

    #[test]
    fn refine_wilkinson_six_arrowhead_route() {
        let prec = 512;
        let p = Polynomial::wilkinson(6);
        let out = refine_roots(&p, Route::Arrowhead, None, prec, 6).unwrap();
        let mut got: Vec<Float> = (0..6).map(|i| out.roots.value(i).real().clone()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, r) in got.iter().enumerate() {
            let dev = Float::with_val(prec, r - Float::with_val(prec, (k + 1) as u32)).abs();
            assert!(dev < Float::with_val(prec, 1e-80), "root {}: {dev:e}", k + 1);
        }
        // row 0 of the trace is the bootstrap residual: double scale
        let first = &out.solve.trace.rows[0].err_res;
        assert!(*first < Float::with_val(prec, 1e-9), "{first:e}");
    }

    #[test]
    fn json_roundtrip_exact() {
        let p = Polynomial::wilkinson(20);
        let back = Polynomial::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
        let half = Polynomial::new(vec![Rational::from((1, 2)), rat(1)]).unwrap();
        let json = half.to_json();
        assert_eq!(json.coeffs[0], "1/2");
        assert_eq!(Polynomial::from_json(&json).unwrap(), half);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Polynomial::new(vec![]).is_err());
        assert!(Polynomial::new(vec![rat(1), rat(0)]).is_err());
        let p = Polynomial::wilkinson(4);
        assert!(p.arrowhead_matrix(&[rat(1)], 64).is_err());
    }
}
