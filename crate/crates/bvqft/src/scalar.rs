//! Exact scalars: arbitrary-precision rationals, polynomials in `ħ`, and
//! finite Laurent series in `ħ`.
//!
//! Correlation functions of the engine live in `ℚ[ħ]`; only the quantum
//! coordinates `T^γ` and the partition function `Z` need genuinely negative
//! powers of `ħ`, for which [`HbarLaurent`] provides a finite Laurent wrapper.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rational scalar used throughout the engine.
pub type Rat = num_rational::BigRational;

/// The rational number `n`.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// The rational number `p/q`. Panics if `q == 0`.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// `n!` as a rational (exact).
pub fn factorial(n: u64) -> Rat {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    Rat::from_integer(acc)
}

/// Renders a rational as `p` or `p/q` (lowest terms, `q > 0`).
pub fn rat_to_string(r: &Rat) -> String {
    use alloc::format;
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p` or `p/q` with optional sign. Whitespace is not consumed.
pub fn rat_from_str(s: &str) -> Option<Rat> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rat::new(n, d))
}

/// A polynomial in `ħ` with rational coefficients.
///
/// Invariant: the last entry of `coeffs` is nonzero (zero is the empty vec).
#[derive(Clone, PartialEq, Eq, Default)]
pub struct HbarScalar {
    coeffs: Vec<Rat>,
}

impl HbarScalar {
    /// The zero polynomial.
    pub fn zero() -> Self {
        HbarScalar { coeffs: Vec::new() }
    }

    /// The constant polynomial `r`.
    pub fn constant(r: Rat) -> Self {
        if r.is_zero() {
            Self::zero()
        } else {
            HbarScalar { coeffs: vec![r] }
        }
    }

    /// `r · ħ^k`.
    pub fn monomial(r: Rat, k: usize) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Rat::zero(); k + 1];
        coeffs[k] = r;
        HbarScalar { coeffs }
    }

    /// Builds from a coefficient vector (index = power of `ħ`).
    pub fn from_coeffs(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        HbarScalar { coeffs }
    }

    /// Coefficient of `ħ^k`.
    pub fn coeff(&self, k: usize) -> Rat {
        self.coeffs.get(k).cloned().unwrap_or_else(Rat::zero)
    }

    /// Coefficient slice, lowest power first.
    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// True when the polynomial is zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree in `ħ`, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) + other.coeff(k));
        }
        Self::from_coeffs(out)
    }

    /// Difference.
    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) - other.coeff(k));
        }
        Self::from_coeffs(out)
    }

    /// Product.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Rat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_coeffs(out)
    }

    /// Product with a rational scalar.
    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        HbarScalar {
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    /// Product with `ħ^k`.
    pub fn mul_hbar_pow(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Rat::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        HbarScalar { coeffs }
    }

    /// Additive inverse.
    pub fn neg(&self) -> Self {
        HbarScalar {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl fmt::Display for HbarScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_mag = mag.is_one() && k > 0;
            if !unit_mag {
                write!(f, "{}", rat_to_string(&mag))?;
            }
            if k > 0 {
                if !unit_mag {
                    write!(f, "*")?;
                }
                if k == 1 {
                    write!(f, "hbar")?;
                } else {
                    write!(f, "hbar^{k}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for HbarScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A finite Laurent polynomial in `ħ`: `ħ^shift · (c_0 + c_1 ħ + …)`.
///
/// Used for the quantum coordinates `T^γ` and the partition function, which
/// carry inverse powers of `ħ`; plain correlator entries normalise to
/// `shift = 0`.
#[derive(Clone, PartialEq, Eq)]
pub struct HbarLaurent {
    shift: i64,
    coeffs: Vec<Rat>,
}

impl HbarLaurent {
    /// The zero Laurent polynomial.
    pub fn zero() -> Self {
        HbarLaurent {
            shift: 0,
            coeffs: Vec::new(),
        }
    }

    /// `ħ^shift · p` for a polynomial part `p`.
    pub fn from_poly_shifted(p: &HbarScalar, shift: i64) -> Self {
        Self::normalise(shift, p.coeffs().to_vec())
    }

    /// Embeds a polynomial (`shift = 0`).
    pub fn from_poly(p: &HbarScalar) -> Self {
        Self::from_poly_shifted(p, 0)
    }

    fn normalise(mut shift: i64, mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        let lead_zeros = coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead_zeros > 0 {
            coeffs.drain(..lead_zeros);
            shift += lead_zeros as i64;
        }
        if coeffs.is_empty() {
            shift = 0;
        }
        HbarLaurent { shift, coeffs }
    }

    /// True when zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest power of `ħ` present (0 for the zero element).
    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Coefficients starting at `ħ^shift`.
    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// Coefficient of `ħ^k`.
    pub fn coeff(&self, k: i64) -> Rat {
        if k < self.shift {
            return Rat::zero();
        }
        self.coeffs
            .get((k - self.shift) as usize)
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    /// Sum.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let shift = self.shift.min(other.shift);
        let top = (self.shift + self.coeffs.len() as i64).max(other.shift + other.coeffs.len() as i64);
        let mut coeffs = Vec::with_capacity((top - shift) as usize);
        for k in shift..top {
            coeffs.push(self.coeff(k) + other.coeff(k));
        }
        Self::normalise(shift, coeffs)
    }

    /// Difference.
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Additive inverse.
    pub fn neg(&self) -> Self {
        HbarLaurent {
            shift: self.shift,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// Product with a rational scalar.
    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        HbarLaurent {
            shift: self.shift,
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    /// Product with `ħ^k` (k may be negative).
    pub fn mul_hbar_pow(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        HbarLaurent {
            shift: self.shift + k,
            coeffs: self.coeffs.clone(),
        }
    }
}

impl fmt::Display for HbarLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let k = self.shift + i as i64;
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_mag = mag.is_one() && k != 0;
            if !unit_mag {
                write!(f, "{}", rat_to_string(&mag))?;
            }
            if k != 0 {
                if !unit_mag {
                    write!(f, "*")?;
                }
                if k == 1 {
                    write!(f, "hbar")?;
                } else {
                    write!(f, "hbar^{k}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for HbarLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
