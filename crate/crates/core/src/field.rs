//! Prime-field arithmetic for all protocol parameters, masks, and codes.
//!
//! Every symbol that crosses the wire is an element of `F_q` for a prime
//! modulus `q`. Elements carry their modulus so that mixing values from
//! different fields is rejected instead of silently producing garbage.

use thiserror::Error;

/// Errors raised by field construction and arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("operands belong to different fields (q={0} vs q={1})")]
    ModulusMismatch(u32, u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("vector length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("encoded value {0} is not a canonical residue mod {1}")]
    NotCanonical(u32, u32),
    #[error("field element wire encoding requires 4 bytes, got {0}")]
    ShortEncoding(usize),
}

/// A prime modulus `q`, verified prime at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u32,
}

impl PrimeField {
    /// Builds the field `F_q`, rejecting composite or trivial moduli.
    pub fn new(q: u32) -> Result<Self, FieldError> {
        if is_prime_u64(q as u64) {
            Ok(PrimeField { q })
        } else {
            Err(FieldError::NotPrime(q as u64))
        }
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.q
    }

    /// Canonical element from an arbitrary integer (reduced mod q).
    #[inline]
    pub fn element(&self, v: u64) -> FieldElement {
        FieldElement {
            value: (v % self.q as u64) as u32,
            q: self.q,
        }
    }

    #[inline]
    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    #[inline]
    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// Bits needed to represent one symbol: `ceil(log2 q)`.
    pub fn bits_per_symbol(&self) -> u32 {
        32 - (self.q - 1).leading_zeros()
    }

    // Raw value-level arithmetic on canonical residues. Internal hot paths
    // (matrix multiplies, enumeration) use these; the `FieldElement` API is
    // the checked public surface.

    #[inline]
    pub(crate) fn add_raw(&self, a: u32, b: u32) -> u32 {
        let s = a as u64 + b as u64;
        let q = self.q as u64;
        (if s >= q { s - q } else { s }) as u32
    }

    #[inline]
    pub(crate) fn sub_raw(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            (a as u64 + self.q as u64 - b as u64) as u32
        }
    }

    #[inline]
    pub(crate) fn mul_raw(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub(crate) fn pow_raw(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc: u32 = 1 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            exp >>= 1;
        }
        acc
    }

    pub(crate) fn inv_raw(&self, a: u32) -> Result<u32, FieldError> {
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        // Fermat: a^(q-2) mod q.
        Ok(self.pow_raw(a, self.q as u64 - 2))
    }
}

/// One element of `F_q` in canonical form `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    q: u32,
}

impl FieldElement {
    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    #[inline]
    fn field(&self) -> PrimeField {
        PrimeField { q: self.q }
    }

    fn same_field(&self, other: &FieldElement) -> Result<PrimeField, FieldError> {
        if self.q == other.q {
            Ok(self.field())
        } else {
            Err(FieldError::ModulusMismatch(self.q, other.q))
        }
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.add_raw(self.value, other.value),
            q: self.q,
        })
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.sub_raw(self.value, other.value),
            q: self.q,
        })
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.mul_raw(self.value, other.value),
            q: self.q,
        })
    }

    /// Additive inverse.
    pub fn neg(&self) -> FieldElement {
        FieldElement {
            value: self.field().sub_raw(0, self.value),
            q: self.q,
        }
    }

    /// Multiplicative inverse; errors on zero.
    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        Ok(FieldElement {
            value: self.field().inv_raw(self.value)?,
            q: self.q,
        })
    }

    /// Wire encoding: unsigned 4-byte big-endian value.
    pub fn to_be_bytes(&self) -> [u8; 4] {
        self.value.to_be_bytes()
    }

    /// Decodes a 4-byte big-endian value, enforcing canonicity (`value < q`).
    pub fn from_be_bytes(bytes: &[u8], field: &PrimeField) -> Result<FieldElement, FieldError> {
        if bytes.len() < 4 {
            return Err(FieldError::ShortEncoding(bytes.len()));
        }
        let v = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        if v >= field.modulus() {
            return Err(FieldError::NotCanonical(v, field.modulus()));
        }
        Ok(field.element(v as u64))
    }
}

/// Componentwise sum of two equal-length vectors.
pub fn vec_add(a: &[FieldElement], b: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
    if a.len() != b.len() {
        return Err(FieldError::LengthMismatch(a.len(), b.len()));
    }
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

/// Componentwise difference of two equal-length vectors.
pub fn vec_sub(a: &[FieldElement], b: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
    if a.len() != b.len() {
        return Err(FieldError::LengthMismatch(a.len(), b.len()));
    }
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// Scalar multiple of a vector.
pub fn vec_scale(scalar: &FieldElement, v: &[FieldElement]) -> Result<Vec<FieldElement>, FieldError> {
    v.iter().map(|x| scalar.mul(x)).collect()
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        base %= n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            exp >>= 1;
        }
        acc
    };
    // These witnesses decide primality for every n < 3.3e24.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
