//! Truncated power series in `eps = t - 1`, used to evaluate the scalar
//! functions whose direct formulas are 0/0 at `t = 1`.

pub(crate) const ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Series(pub [f64; ORDER]);

impl Series {
    pub fn zero() -> Self {
        Series([0.0; ORDER])
    }

    #[cfg(test)]
    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero();
        s.0[0] = c;
        s
    }

    /// `(1 + eps)^q`, generalized binomial coefficients.
    pub fn binomial(q: f64) -> Self {
        let mut s = Self::zero();
        s.0[0] = 1.0;
        for k in 1..ORDER {
            s.0[k] = s.0[k - 1] * (q - (k as f64 - 1.0)) / k as f64;
        }
        s
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.0.iter_mut().for_each(|x| *x *= c);
        out
    }

    pub fn add(&self, other: &Series) -> Self {
        let mut out = self.clone();
        for (o, b) in out.0.iter_mut().zip(other.0.iter()) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &Series) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Series) -> Self {
        let mut out = Self::zero();
        for i in 0..ORDER {
            if self.0[i] == 0.0 {
                continue;
            }
            for j in 0..ORDER - i {
                out.0[i + j] += self.0[i] * other.0[j];
            }
        }
        out
    }

    /// Requires a nonzero constant term in `other`.
    pub fn div(&self, other: &Series) -> Self {
        let b0 = other.0[0];
        debug_assert!(b0 != 0.0);
        let mut out = Self::zero();
        for k in 0..ORDER {
            let mut acc = self.0[k];
            for j in 0..k {
                acc -= out.0[j] * other.0[k - j];
            }
            out.0[k] = acc / b0;
        }
        out
    }

    /// Divide by `eps^n`; the dropped low coefficients must vanish.
    pub fn drop_low(&self, n: usize) -> Self {
        let mut out = Self::zero();
        out.0[..ORDER - n].copy_from_slice(&self.0[n..]);
        out
    }

    /// Multiply by `eps^n`.
    pub fn raise(&self, n: usize) -> Self {
        let mut out = Self::zero();
        out.0[n..].copy_from_slice(&self.0[..ORDER - n]);
        out
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::zero();
        for k in 1..ORDER {
            out.0[k - 1] = k as f64 * self.0[k];
        }
        out
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * eps + c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_matches_powf() {
        for &q in &[2.5, 6.0, -1.5, 99.0] {
            let s = Series::binomial(q);
            for &eps in &[-5e-3, 1e-3, 8e-3] {
                let exact = (1.0f64 + eps).powf(q);
                assert!((s.eval(eps) - exact).abs() < 5e-14 * exact.abs());
            }
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = Series::binomial(3.3);
        let b = Series::binomial(-0.7).add(&Series::constant(1.0));
        let q = a.mul(&b).div(&b);
        for k in 0..10 {
            assert!((q.0[k] - a.0[k]).abs() < 1e-12 * (1.0 + a.0[k].abs()));
        }
    }
}
