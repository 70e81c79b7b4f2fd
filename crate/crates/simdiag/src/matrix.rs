//! Dense square complex matrices with runtime-configurable precision.
//!
//! Entries are MPFR-backed complex scalars; every matrix carries the binary
//! precision its entries were rounded to.  Operations between matrices of
//! different precision widen to the larger one.  All operations check the
//! result for non-finite entries and fail instead of propagating NaN.

use rug::{Assign, Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GaussianSource;
use crate::scalar::{self, MIN_PREC};
use crate::spectrum::Spectrum;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Smallest dimension for which the data-parallel kernels are used.
#[cfg(feature = "parallel")]
const PAR_MIN_DIM: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

impl std::str::FromStr for Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(Error::InvalidInput(format!("unknown field {other:?}"))),
        }
    }
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Field::Real => "real",
            Field::Complex => "complex",
        })
    }
}

/// Dense square matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    prec: u32,
    data: Vec<Complex>,
}

impl Matrix {
    pub fn zeros(n: usize, prec: u32) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        assert!(prec >= MIN_PREC, "precision must be at least {MIN_PREC} bits");
        Matrix {
            n,
            prec,
            data: (0..n * n).map(|_| Complex::new(prec)).collect(),
        }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut m = Matrix::zeros(n, prec);
        for i in 0..n {
            m.data[i * n + i].assign(1);
        }
        m
    }

    pub fn from_fn(n: usize, prec: u32, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut m = Matrix::zeros(n, prec);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = Complex::with_val(prec, f(i, j));
            }
        }
        m
    }

    /// Real matrix from a row-major grid of f64 values.
    pub fn from_rows_f64(rows: &[Vec<f64>], prec: u32) -> Self {
        let n = rows.len();
        Matrix::from_fn(n, prec, |i, j| Complex::with_val(prec, rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub(crate) fn entries(&self) -> &[Complex] {
        &self.data
    }

    pub(crate) fn from_entries(n: usize, prec: u32, data: Vec<Complex>) -> Matrix {
        debug_assert_eq!(data.len(), n * n);
        Matrix { n, prec, data }
    }

    pub fn get(&self, i: usize, j: usize) -> &Complex {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex) {
        self.data[i * self.n + j] = Complex::with_val(self.prec, v);
    }

    /// Re-round every entry to `prec` (widening is exact).
    pub fn with_prec(&self, prec: u32) -> Matrix {
        Matrix {
            n: self.n,
            prec,
            data: self.data.iter().map(|c| Complex::with_val(prec, c)).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.n).map(|i| self.get(i, j).clone()).collect()
    }

    /// Error unless both matrices have the same dimension.
    pub fn check_same_dims(&self, rhs: &Matrix) -> Result<()> {
        self.check_dims(rhs).map(|_| ())
    }

    fn check_dims(&self, rhs: &Matrix) -> Result<u32> {
        if self.n != rhs.n {
            return Err(Error::DimensionMismatch { left: self.n, right: rhs.n });
        }
        Ok(self.prec.max(rhs.prec))
    }

    fn check_finite(self, context: &'static str) -> Result<Matrix> {
        if self.data.iter().all(scalar::is_finite) {
            Ok(self)
        } else {
            Err(Error::NonFinite { context })
        }
    }

    fn mul_row_into(&self, rhs: &Matrix, i: usize, prec: u32, out: &mut [Complex]) {
        let n = self.n;
        let mut tmp = Complex::new(prec);
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex::new(prec);
            for k in 0..n {
                tmp.assign(&self.data[i * n + k] * &rhs.data[k * n + j]);
                acc += &tmp;
            }
            *slot = acc;
        }
    }

    /// Sequential matrix product (the fallback kernel; also exposed so the
    /// benchmark suite can compare it against the data-parallel path).
    pub fn matmul_seq(&self, rhs: &Matrix) -> Result<Matrix> {
        let prec = self.check_dims(rhs)?;
        let n = self.n;
        let mut data: Vec<Complex> = (0..n * n).map(|_| Complex::new(prec)).collect();
        for i in 0..n {
            self.mul_row_into(rhs, i, prec, &mut data[i * n..(i + 1) * n]);
        }
        Matrix { n, prec, data }.check_finite("matmul")
    }

    #[cfg(feature = "parallel")]
    pub fn matmul_par(&self, rhs: &Matrix) -> Result<Matrix> {
        let prec = self.check_dims(rhs)?;
        let n = self.n;
        let mut data: Vec<Complex> = (0..n * n).map(|_| Complex::new(prec)).collect();
        data.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| self.mul_row_into(rhs, i, prec, row));
        Matrix { n, prec, data }.check_finite("matmul")
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        #[cfg(feature = "parallel")]
        if self.n >= PAR_MIN_DIM {
            return self.matmul_par(rhs);
        }
        self.matmul_seq(rhs)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        let prec = self.check_dims(rhs)?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| Complex::with_val(prec, a + b))
            .collect();
        Matrix { n: self.n, prec, data }.check_finite("matadd")
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        let prec = self.check_dims(rhs)?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| Complex::with_val(prec, a - b))
            .collect();
        Matrix { n: self.n, prec, data }.check_finite("matsub")
    }

    pub fn scale(&self, factor: &Complex) -> Result<Matrix> {
        let data = self
            .data
            .iter()
            .map(|a| Complex::with_val(self.prec, a * factor))
            .collect();
        Matrix { n: self.n, prec: self.prec, data }.check_finite("scale")
    }

    /// Subtract the identity in place of allocating a full identity matrix.
    pub fn sub_identity(&self) -> Result<Matrix> {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] -= 1u32;
        }
        m.check_finite("sub_identity")
    }

    pub fn add_identity(&self) -> Result<Matrix> {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += 1u32;
        }
        m.check_finite("add_identity")
    }

    /// diag(M): keep the diagonal, zero everything else.
    pub fn diag_part(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.prec);
        for i in 0..self.n {
            m.data[i * self.n + i].assign(self.get(i, i));
        }
        m
    }

    /// off(M): zero the diagonal, keep everything else.
    pub fn off_part(&self) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i].assign(0);
        }
        m
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, self.prec, |i, j| self.get(j, i).clone())
    }

    pub fn conj_transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, self.prec, |i, j| {
            Complex::with_val(self.prec, self.get(j, i).conj_ref())
        })
    }

    /// M * D for diagonal D (scales column j by d_j), O(n^2).
    pub fn mul_diag_right(&self, d: &Spectrum) -> Result<Matrix> {
        if d.n() != self.n {
            return Err(Error::DimensionMismatch { left: self.n, right: d.n() });
        }
        let prec = self.prec.max(d.prec());
        Matrix::from_fn(self.n, prec, |i, j| {
            Complex::with_val(prec, self.get(i, j) * d.value(j))
        })
        .check_finite("mul_diag_right")
    }

    /// D * M for diagonal D (scales row i by d_i), O(n^2).
    pub fn mul_diag_left(&self, d: &Spectrum) -> Result<Matrix> {
        if d.n() != self.n {
            return Err(Error::DimensionMismatch { left: self.n, right: d.n() });
        }
        let prec = self.prec.max(d.prec());
        Matrix::from_fn(self.n, prec, |i, j| {
            Complex::with_val(prec, self.get(i, j) * d.value(i))
        })
        .check_finite("mul_diag_left")
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> Float {
        let mut best = Float::new(self.prec);
        let mut tmp = Float::new(self.prec);
        for i in 0..self.n {
            let mut row = Float::new(self.prec);
            for j in 0..self.n {
                scalar::abs_into(self.get(i, j), &mut tmp);
                row += &tmp;
            }
            if row > best {
                best = row;
            }
        }
        best
    }

    pub fn norm_frobenius(&self) -> Float {
        let mut acc = Float::new(self.prec);
        let mut tmp = Float::new(self.prec);
        for c in &self.data {
            tmp.assign(c.real() * c.real());
            acc += &tmp;
            tmp.assign(c.imag() * c.imag());
            acc += &tmp;
        }
        acc.sqrt()
    }

    /// Max entry modulus strictly below the diagonal; 0 for n = 1.
    pub fn norm_lower_tri_max(&self) -> Float {
        let mut best = Float::new(self.prec);
        let mut tmp = Float::new(self.prec);
        for i in 1..self.n {
            for j in 0..i {
                scalar::abs_into(self.get(i, j), &mut tmp);
                if tmp > best {
                    best.assign(&tmp);
                }
            }
        }
        best
    }

    /// Entries i.i.d. standard normal, drawn at double precision from a fixed
    /// seeded pipeline and widened to `prec`.  With `unit_frobenius` the
    /// result is rescaled to Frobenius norm 1.
    pub fn random_gaussian(n: usize, field: Field, seed: u64, unit_frobenius: bool, prec: u32) -> Matrix {
        let mut src = GaussianSource::new(seed);
        let mut m = Matrix::from_fn(n, prec, |_, _| {
            let re = src.next_normal();
            let im = match field {
                Field::Real => 0.0,
                Field::Complex => src.next_normal(),
            };
            Complex::with_val(prec, (re, im))
        });
        if unit_frobenius {
            let norm = m.norm_frobenius();
            for c in &mut m.data {
                *c /= &norm;
            }
        }
        m
    }

    /// Inverse by LU factorization with partial pivoting at working precision.
    pub fn invert(&self) -> Result<Matrix> {
        let n = self.n;
        let prec = self.prec;
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut mag = Float::new(prec);
        let mut best_mag = Float::new(prec);
        let mut tmp = Complex::new(prec);
        for col in 0..n {
            // pivot search
            let mut pivot_row = col;
            scalar::abs_into(&lu[col * n + col], &mut best_mag);
            for r in col + 1..n {
                scalar::abs_into(&lu[r * n + col], &mut mag);
                if mag > best_mag {
                    best_mag.assign(&mag);
                    pivot_row = r;
                }
            }
            if best_mag.is_zero() {
                return Err(Error::Singular { col });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col].clone();
            for r in col + 1..n {
                let factor = Complex::with_val(prec, &lu[r * n + col] / &pivot);
                lu[r * n + col] = factor.clone();
                for j in col + 1..n {
                    tmp.assign(&factor * &lu[col * n + j]);
                    lu[r * n + j] -= &tmp;
                }
            }
        }
        // solve LU x = P e_k for each unit column
        let mut inv = Matrix::zeros(n, prec);
        let mut y: Vec<Complex> = (0..n).map(|_| Complex::new(prec)).collect();
        for k in 0..n {
            for (i, yi) in y.iter_mut().enumerate() {
                yi.assign(if perm[i] == k { 1 } else { 0 });
            }
            for i in 0..n {
                for j in 0..i {
                    tmp.assign(&lu[i * n + j] * &y[j]);
                    y[i] -= &tmp;
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    tmp.assign(&lu[i * n + j] * &y[j]);
                    y[i] -= &tmp;
                }
                let v = Complex::with_val(prec, &y[i] / &lu[i * n + i]);
                y[i] = v;
            }
            for i in 0..n {
                inv.data[i * n + k].assign(&y[i]);
            }
        }
        inv.check_finite("invert")
    }

    /// Determinant by LU with partial pivoting; zero when a pivot collapses.
    pub fn determinant(&self) -> Result<Complex> {
        let n = self.n;
        let prec = self.prec;
        let mut lu = self.data.clone();
        let mut mag = Float::new(prec);
        let mut best_mag = Float::new(prec);
        let mut tmp = Complex::new(prec);
        let mut det = Complex::with_val(prec, 1);
        for col in 0..n {
            let mut pivot_row = col;
            scalar::abs_into(&lu[col * n + col], &mut best_mag);
            for r in col + 1..n {
                scalar::abs_into(&lu[r * n + col], &mut mag);
                if mag > best_mag {
                    best_mag.assign(&mag);
                    pivot_row = r;
                }
            }
            if best_mag.is_zero() {
                return Ok(Complex::new(prec));
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                det = -det;
            }
            let pivot = lu[col * n + col].clone();
            det *= &pivot;
            for r in col + 1..n {
                let factor = Complex::with_val(prec, &lu[r * n + col] / &pivot);
                for j in col + 1..n {
                    tmp.assign(&factor * &lu[col * n + j]);
                    lu[r * n + j] -= &tmp;
                }
            }
        }
        scalar::is_finite(&det)
            .then_some(det)
            .ok_or(Error::NonFinite { context: "determinant" })
    }

    /// Crude condition estimate ||M|| * ||M^-1|| in the infinity norm.
    pub fn cond_inf_estimate(&self) -> Result<Float> {
        let inv = self.invert()?;
        Ok(self.norm_inf() * inv.norm_inf())
    }

    fn looks_real(&self) -> bool {
        self.data.iter().all(|c| c.imag().is_zero())
    }
}

/// JSON schema for matrix files: decimal strings preserve entries bit-exactly
/// at the declared precision.
#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub field: String,
    pub precision_bits: u32,
    pub entries: Vec<Vec<[String; 2]>>,
}

impl Matrix {
    pub fn to_json(&self) -> MatrixJson {
        let field = if self.looks_real() { "real" } else { "complex" };
        MatrixJson {
            n: self.n,
            field: field.to_string(),
            precision_bits: self.prec,
            entries: (0..self.n)
                .map(|i| {
                    (0..self.n)
                        .map(|j| {
                            let c = self.get(i, j);
                            [
                                scalar::float_to_decimal(c.real()),
                                scalar::float_to_decimal(c.imag()),
                            ]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(json: &MatrixJson) -> Result<Matrix> {
        let n = json.n;
        let prec = json.precision_bits;
        if prec < MIN_PREC {
            return Err(Error::InvalidInput(format!("precision_bits {prec} below minimum {MIN_PREC}")));
        }
        if json.entries.len() != n || json.entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("entries grid does not match n".into()));
        }
        let mut m = Matrix::zeros(n, prec);
        for i in 0..n {
            for j in 0..n {
                let [re, im] = &json.entries[i][j];
                let c = Complex::with_val(
                    prec,
                    (scalar::parse_float(re, prec)?, scalar::parse_float(im, prec)?),
                );
                m.data[i * n + j] = c;
            }
        }
        m.check_finite("from_json")
    }

    pub fn write_json_file(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json_file(path: &std::path::Path) -> Result<Matrix> {
        let text = std::fs::read_to_string(path)?;
        let json: MatrixJson = serde_json::from_str(&text)?;
        Matrix::from_json(&json)
    }
}
