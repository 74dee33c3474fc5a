use num_bigint::{BigInt, Sign};
use num_traits::{ToPrimitive, Zero};

use crate::model::Value;

/// Exact, order-independent sum of finite `f64`s with O(1) add and remove.
///
/// Every finite double is an integer multiple of 2^-1074, so the running
/// total is kept as that integer. Rounding happens once, on read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExactSum {
    scaled: BigInt,
    pos_inf: u64,
    neg_inf: u64,
    nan: u64,
}

const SCALE: i32 = 1074;

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        self.adjust(x, true);
    }

    pub fn remove(&mut self, x: f64) {
        self.adjust(x, false);
    }

    fn adjust(&mut self, x: f64, add: bool) {
        let counter = if x.is_nan() {
            &mut self.nan
        } else if x == f64::INFINITY {
            &mut self.pos_inf
        } else if x == f64::NEG_INFINITY {
            &mut self.neg_inf
        } else {
            let v = scaled(x);
            if add {
                self.scaled += v;
            } else {
                self.scaled -= v;
            }
            return;
        };
        if add {
            *counter += 1;
        } else {
            *counter -= 1;
        }
    }

    /// Correctly rounded (half to even) value of the exact total.
    pub fn value(&self) -> f64 {
        if self.nan > 0 || (self.pos_inf > 0 && self.neg_inf > 0) {
            return f64::NAN;
        }
        if self.pos_inf > 0 {
            return f64::INFINITY;
        }
        if self.neg_inf > 0 {
            return f64::NEG_INFINITY;
        }
        unscale(&self.scaled)
    }
}

/// `x · 2^1074` as an integer; `x` must be finite.
fn scaled(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { Sign::Minus } else { Sign::Plus };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    // x = mant · 2^(e - 1074) with e ≥ 0 for every finite double.
    let (mant, e) = if exp == 0 {
        (frac, 0)
    } else {
        (frac | (1u64 << 52), exp - 1)
    };
    BigInt::from_biguint(sign, num_bigint::BigUint::from(mant)) << e as usize
}

fn unscale(n: &BigInt) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    let negative = n.sign() == Sign::Minus;
    let mag = n.magnitude();
    let len = mag.bits() as i64;
    let (mant, shift) = if len <= 53 {
        (mag.to_u64().expect("fits in 53 bits"), 0i64)
    } else {
        let shift = len - 53;
        let kept = (mag >> shift as usize).to_u64().expect("53 bits");
        let rem = mag - (num_bigint::BigUint::from(kept) << shift as usize);
        let half = num_bigint::BigUint::from(1u8) << (shift - 1) as usize;
        let round_up = rem > half || (rem == half && kept & 1 == 1);
        let kept = kept + u64::from(round_up);
        if kept == 1u64 << 53 {
            (kept >> 1, shift + 1)
        } else {
            (kept, shift)
        }
    };
    let exp = shift - SCALE as i64;
    let mut v = mant as f64;
    // Scale in steps so no intermediate underflows; results with more than
    // 53 significant bits are at least 2^-1021 and thus normal.
    let mut e = exp;
    while e > 0 {
        let step = e.min(1000);
        v *= pow2(step as i32);
        e -= step;
    }
    while e < 0 {
        let step = e.max(-1000);
        v *= pow2(step as i32);
        e -= step;
    }
    if negative {
        -v
    } else {
        v
    }
}

fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// Exact integer accumulator; overflow is reported when reading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntSum(pub i128);

impl IntSum {
    pub fn value(&self) -> Option<i64> {
        i64::try_from(self.0).ok()
    }
}

/// Running sum over values of one numeric kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sum {
    Int(IntSum),
    Float(ExactSum),
}

impl Sum {
    pub fn for_float(float: bool) -> Sum {
        if float {
            Sum::Float(ExactSum::new())
        } else {
            Sum::Int(IntSum::default())
        }
    }

    pub fn add(&mut self, v: &Value) {
        self.adjust(v, true);
    }

    pub fn remove(&mut self, v: &Value) {
        self.adjust(v, false);
    }

    fn adjust(&mut self, v: &Value, add: bool) {
        match (self, v) {
            (Sum::Int(s), Value::Int(i)) => {
                if add {
                    s.0 += *i as i128
                } else {
                    s.0 -= *i as i128
                }
            }
            (Sum::Float(s), _) => {
                let x = v.as_f64().unwrap_or(f64::NAN);
                if add {
                    s.add(x)
                } else {
                    s.remove(x)
                }
            }
            (Sum::Int(_), _) => panic!("non-integer value in integer sum"),
        }
    }

    /// `None` when an integer total leaves the i64 range.
    pub fn value(&self) -> Option<Value> {
        match self {
            Sum::Int(s) => s.value().map(Value::Int),
            Sum::Float(s) => Some(Value::float(s.value())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_independent_and_exact() {
        let xs = [1e100, 1.0, -1e100, 0.1, 0.2, 5e-324];
        let mut a = ExactSum::new();
        for x in xs {
            a.add(x);
        }
        let mut b = ExactSum::new();
        for x in xs.iter().rev() {
            b.add(*x);
        }
        assert_eq!(a.value().to_bits(), b.value().to_bits());
        // 1 + 0.1 + 0.2 + 5e-324, correctly rounded
        assert_eq!(a.value(), 1.3000000000000000444);
    }

    #[test]
    fn add_then_remove_is_identity() {
        let mut s = ExactSum::new();
        s.add(0.1);
        s.add(0.7);
        s.remove(0.1);
        assert_eq!(s.value(), 0.7);
        s.remove(0.7);
        assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn round_trips_extremes() {
        for x in [f64::MAX, f64::MIN_POSITIVE, 5e-324, -3.5, 123456.789] {
            let mut s = ExactSum::new();
            s.add(x);
            assert_eq!(s.value(), x);
        }
        let mut s = ExactSum::new();
        s.add(f64::MAX);
        s.add(f64::MAX);
        assert_eq!(s.value(), f64::INFINITY);
    }

    #[test]
    fn non_finite() {
        let mut s = ExactSum::new();
        s.add(f64::INFINITY);
        s.add(1.0);
        assert_eq!(s.value(), f64::INFINITY);
        s.add(f64::NEG_INFINITY);
        assert!(s.value().is_nan());
        s.remove(f64::INFINITY);
        assert_eq!(s.value(), f64::NEG_INFINITY);
    }
}
