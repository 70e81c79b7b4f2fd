//! Diagonal spectra: ordered lists of approximate eigenvalues.

use rug::ops::Pow;
use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar;

/// Diagonal of an (approximate) eigenvalue matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    prec: u32,
    values: Vec<Complex>,
}

impl Spectrum {
    pub fn new(values: Vec<Complex>, prec: u32) -> Self {
        assert!(!values.is_empty(), "spectrum must be nonempty");
        Spectrum {
            prec,
            values: values.into_iter().map(|v| Complex::with_val(prec, v)).collect(),
        }
    }

    pub fn from_f64(values: &[f64], prec: u32) -> Self {
        Spectrum::new(values.iter().map(|&v| Complex::with_val(prec, v)).collect(), prec)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn value(&self, i: usize) -> &Complex {
        &self.values[i]
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn set(&mut self, i: usize, v: Complex) {
        self.values[i] = Complex::with_val(self.prec, v);
    }

    pub fn with_prec(&self, prec: u32) -> Spectrum {
        Spectrum::new(self.values.clone(), prec)
    }

    /// Diagonal of `m` as a spectrum.
    pub fn from_diag(m: &Matrix) -> Spectrum {
        Spectrum::new((0..m.n()).map(|i| m.get(i, i).clone()).collect(), m.prec())
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n(), self.prec, |i, j| {
            if i == j {
                self.values[i].clone()
            } else {
                Complex::new(self.prec)
            }
        })
    }

    /// The n-th roots of unity 1, e^{2 pi i / n}, ..., in index order.
    pub fn roots_of_unity(n: usize, prec: u32) -> Spectrum {
        let tau = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
        let values = (0..n)
            .map(|k| {
                let angle = tau.clone() * k as u32 / n as u32;
                let (sin, cos) = angle.sin_cos(Float::new(prec));
                Complex::with_val(prec, (cos, sin))
            })
            .collect();
        Spectrum::new(values, prec)
    }

    /// Smallest pairwise distance |s_i - s_j|; positive infinity for n = 1.
    pub fn min_gap(&self) -> Float {
        let mut best = Float::with_val(self.prec, rug::float::Special::Infinity);
        let mut tmp = Float::new(self.prec);
        let mut diff = Complex::new(self.prec);
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                diff.assign(&self.values[i] - &self.values[j]);
                scalar::abs_into(&diff, &mut tmp);
                if tmp < best {
                    best.assign(&tmp);
                }
            }
        }
        best
    }

    /// max(1, max_i |s_i|): the spectral-radius bound used by certificates.
    pub fn radius_bound(&self) -> Float {
        let mut best = Float::with_val(self.prec, 1);
        let mut tmp = Float::new(self.prec);
        for v in &self.values {
            scalar::abs_into(v, &mut tmp);
            if tmp > best {
                best.assign(&tmp);
            }
        }
        best
    }

    /// max(1, 1 / min_gap): the gap bound used by certificates.
    pub fn gap_bound(&self) -> Float {
        let gap = self.min_gap();
        let inv = Float::with_val(self.prec, gap.recip_ref());
        if inv < 1u32 {
            Float::with_val(self.prec, 1)
        } else {
            inv
        }
    }

    /// Error if two entries coincide to within relative 2^(-prec/2), where the
    /// gap is measured relative to max(1, |s_i|, |s_j|).
    pub fn check_distinct(&self) -> Result<()> {
        let threshold = Float::with_val(self.prec, 2f64).pow(-(Float::with_val(self.prec, self.prec) / 2u32));
        let mut diff = Complex::new(self.prec);
        let mut gap = Float::new(self.prec);
        let mut mag = Float::new(self.prec);
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                diff.assign(&self.values[i] - &self.values[j]);
                scalar::abs_into(&diff, &mut gap);
                let mut scale = Float::with_val(self.prec, 1);
                scalar::abs_into(&self.values[i], &mut mag);
                if mag > scale {
                    scale.assign(&mag);
                }
                scalar::abs_into(&self.values[j], &mut mag);
                if mag > scale {
                    scale.assign(&mag);
                }
                let rel = gap.clone() / scale;
                if rel < threshold {
                    return Err(Error::SpectrumCollision {
                        i,
                        j,
                        gap: rel.to_f64(),
                        prec: self.prec,
                    });
                }
            }
        }
        Ok(())
    }
}
