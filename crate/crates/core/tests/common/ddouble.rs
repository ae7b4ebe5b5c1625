//! Double-double complex arithmetic and a reverse-order ₀F_q oracle.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub fn from(z: C64) -> Self {
        Cdd { re: Dd::from(z.re), im: Dd::from(z.im) }
    }

    pub fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn div(self, o: Cdd) -> Cdd {
        let den = o.re.mul(o.re).add(o.im.mul(o.im));
        let conj = Cdd { re: o.re, im: o.im.neg() };
        let n = self.mul(conj);
        Cdd { re: n.re.div(den), im: n.im.div(den) }
    }

    pub fn norm(self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// ₀F_q(; b; z) with terms generated in double-double and summed from the
/// smallest term back to the first.
pub fn hyp0fq_oracle(b: &[C64], z: C64) -> C64 {
    let z = Cdd::from(z);
    let mut terms = vec![Cdd::from(C64::new(1.0, 0.0))];
    let mut peak = 1.0f64;
    for k in 0..200_000usize {
        let kf = k as f64;
        let mut den = Cdd::from(C64::new(kf + 1.0, 0.0));
        for c in b {
            den = den.mul(Cdd::from(c + kf));
        }
        let next = terms[k].mul(z).div(den);
        let m = next.norm();
        peak = peak.max(m);
        terms.push(next);
        // term ratio is eventually monotone decreasing
        if m < 1e-36 * peak && (kf + 1.0) > z.norm() {
            break;
        }
    }
    let mut sum = Cdd::from(C64::new(0.0, 0.0));
    for t in terms.iter().rev() {
        sum = sum.add(*t);
    }
    sum.to_c64()
}
