// SPDX-License-Identifier: Apache-2.0
//! Float conversions for arbitrary-precision counts.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Multiply `x` by `2^exp` without intermediate overflow.
pub fn ldexp(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp as i32)
}

/// `(mantissa, exponent)` with `x ≈ mantissa · 2^exponent`, mantissa in [2^63, 2^64).
fn split(x: &BigUint) -> (u64, i64) {
    let bits = x.bits() as i64;
    if bits <= 64 {
        let m = x.to_u64().unwrap_or(0);
        return (m, 0);
    }
    let shift = bits - 64;
    let m = (x >> (shift as usize)).to_u64().unwrap_or(u64::MAX);
    (m, shift)
}

/// Natural log of a positive big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "ln of zero");
    let (m, e) = split(x);
    (m as f64).ln() + e as f64 * std::f64::consts::LN_2
}

/// Convert to f64 with the exponent applied in one step; large values give `inf`.
pub fn big_to_f64(x: &BigUint) -> f64 {
    let (m, e) = split(x);
    ldexp(m as f64, e)
}

/// `a / b` as f64, rounded from a 128-bit quotient so the result is within one ulp.
pub fn ratio_to_f64(a: &BigUint, b: &BigUint) -> f64 {
    assert!(!b.is_zero(), "division by zero");
    if a.is_zero() {
        return 0.0;
    }
    let shift = 128 + b.bits() as i64 - a.bits() as i64;
    let q = if shift >= 0 {
        (a << (shift as usize)) / b
    } else {
        (a >> ((-shift) as usize)) / b
    };
    let (m, e) = split(&q);
    ldexp(m as f64, e - shift)
}

/// `e / sqrt(su · sv)` computed from the exact rational `e² / (su·sv)`.
pub fn hopping(e: &BigUint, su: &BigUint, sv: &BigUint) -> f64 {
    let num = e * e;
    let den = su * sv;
    ratio_to_f64(&num, &den).sqrt()
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = r.numer();
    let d = r.denom();
    let v = ratio_to_f64(n.magnitude(), d.magnitude());
    if (n.sign() == num_bigint::Sign::Minus) ^ (d.sign() == num_bigint::Sign::Minus) {
        -v
    } else {
        v
    }
}

pub fn ln_rational(r: &BigRational) -> f64 {
    ln_big(r.numer().magnitude()) - ln_big(r.denom().magnitude())
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Non-negative integral rational as a big unsigned integer.
pub fn to_biguint(r: &BigRational) -> Option<BigUint> {
    if r.denom().is_one() && r.numer().sign() != num_bigint::Sign::Minus {
        r.numer().to_biguint()
    } else {
        None
    }
}

pub fn biguint_to_rational(x: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(x.clone()))
}

/// Serialize big integers as decimal strings.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse::<BigUint>().map_err(serde::de::Error::custom))
            .collect()
    }

    pub mod opt {
        use num_bigint::BigUint;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<Vec<BigUint>>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<Vec<BigUint>>, D::Error> {
            let raw: Option<Vec<String>> = Option::deserialize(d)?;
            raw.map(|v| {
                v.iter()
                    .map(|s| s.parse::<BigUint>().map_err(serde::de::Error::custom))
                    .collect()
            })
            .transpose()
        }
    }
}
