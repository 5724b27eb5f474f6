//! Double-double arithmetic (~32 significant digits) for oracle evaluation.
//!
//! Classic error-free transformations: TwoSum, FMA-based TwoProd, and
//! Newton-refined division and square root. Precision is far beyond the
//! 1e-12 tolerances being checked, so oracle rounding never masks a defect.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    (p, err)
}

impl DD {
    pub fn from(a: f64) -> Self {
        DD { hi: a, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: DD) -> DD {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        DD { hi, lo }
    }

    pub fn sub(self, other: DD) -> DD {
        self.add(DD {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    pub fn mul(self, other: DD) -> DD {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }

    pub fn div(self, other: DD) -> DD {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(DD::from(q1)));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul(DD::from(q2)));
        let q3 = r.hi / other.hi;
        let (s, e) = two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        DD { hi, lo }
    }

    pub fn sqrt(self) -> DD {
        if self.hi == 0.0 && self.lo == 0.0 {
            return DD::from(0.0);
        }
        // One Newton step on y0 = sqrt(hi): y = y0 + (a - y0^2) / (2 y0).
        let y0 = self.hi.sqrt();
        let y0dd = DD::from(y0);
        let diff = self.sub(y0dd.mul(y0dd));
        let correction = diff.div(DD::from(2.0 * y0));
        y0dd.add(correction)
    }

    pub fn scale(self, c: f64) -> DD {
        self.mul(DD::from(c))
    }
}

/// pi to double-double precision.
pub fn dd_pi() -> DD {
    DD {
        hi: 3.141592653589793,
        lo: 1.2246467991473532e-16,
    }
}

#[cfg(test)]
mod self_test {
    use super::*;

    #[test]
    fn dd_identities() {
        let third = DD::from(1.0).div(DD::from(3.0));
        let one = third.scale(3.0);
        assert!((one.to_f64() - 1.0).abs() < 1e-30);
        assert!((one.hi - 1.0).abs() + one.lo.abs() < 1e-30);

        let two = DD::from(2.0);
        let r = two.sqrt();
        let back = r.mul(r).sub(two);
        assert!(back.to_f64().abs() < 1e-30);

        // pi * (1/pi) == 1 to dd precision
        let inv_pi = DD::from(1.0).div(dd_pi());
        let prod = inv_pi.mul(dd_pi());
        assert!((prod.to_f64() - 1.0).abs() < 1e-30);
    }
}
