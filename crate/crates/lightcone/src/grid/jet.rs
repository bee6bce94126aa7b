//! Truncated Taylor series for derivatives up to fourth order.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 5;

/// Coefficients c_n = g^{(n)}(x)/n! of a function around a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; ORDER]);

impl Jet {
    pub fn var(x: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x;
        c[1] = 1.0;
        Jet(c)
    }

    pub fn constant(x: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x;
        Jet(c)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// n-th derivative.
    pub fn deriv(&self, n: usize) -> f64 {
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        self.0[n] * fact
    }

    fn compose(&self, d: [f64; ORDER]) -> Self {
        // d holds g^{(n)}(x0)/n!; compose with the non-constant part of self.
        let mut u = *self;
        u.0[0] = 0.0;
        let mut out = [0.0; ORDER];
        let mut pow = Jet::constant(1.0);
        for dn in d {
            for k in 0..ORDER {
                out[k] += dn * pow.0[k];
            }
            pow = pow * u;
        }
        Jet(out)
    }

    pub fn exp(self) -> Self {
        let e = self.0[0].exp();
        let mut d = [0.0; ORDER];
        let mut fact = 1.0;
        for (n, dn) in d.iter_mut().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            *dn = e / fact;
        }
        self.compose(d)
    }

    pub fn ln(self) -> Self {
        let x = self.0[0];
        let mut d = [0.0; ORDER];
        d[0] = x.ln();
        for (n, dn) in d.iter_mut().enumerate().skip(1) {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            *dn = sign / (n as f64 * x.powi(n as i32));
        }
        self.compose(d)
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.0[0];
        let mut d = [0.0; ORDER];
        let mut coef = 1.0;
        for (n, dn) in d.iter_mut().enumerate() {
            *dn = coef * x.powf(p - n as f64);
            coef *= (p - n as f64) / (n as f64 + 1.0);
        }
        self.compose(d)
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(self) -> Self {
        self.powf(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        Jet(c)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|x| -x))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; ORDER];
        for i in 0..ORDER {
            for j in 0..ORDER - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(c)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        let mut c = self.0;
        c[0] += o;
        Jet(c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        Jet(self.0.map(|x| x * o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_derivatives() {
        // g(s) = (1 + s^2)^{-1/2}
        let x = 0.7;
        let s = Jet::var(x);
        let g = (s * s + 1.0).powf(-0.5);
        let b = 1.0 + x * x;
        assert!((g.deriv(0) - b.powf(-0.5)).abs() < 1e-15);
        assert!((g.deriv(1) + x * b.powf(-1.5)).abs() < 1e-15);
        let d2 = (2.0 * x * x - 1.0) * b.powf(-2.5);
        assert!((g.deriv(2) - d2).abs() < 1e-14);
    }

    #[test]
    fn exp_ln_roundtrip() {
        let s = Jet::var(1.3);
        let r = (s * 2.0).exp().ln();
        let want = s * 2.0;
        for k in 0..ORDER {
            assert!((r.0[k] - want.0[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn fourth_derivative_of_exp_product() {
        // (x e^x)'''' = (x + 4) e^x
        let x = 0.4;
        let s = Jet::var(x);
        let g = s * s.exp();
        assert!((g.deriv(4) - (x + 4.0) * x.exp()).abs() < 1e-13);
        let q = s / (s + 2.0);
        // d^3/dx^3 x/(x+2) = 12/(x+2)^4
        assert!((q.deriv(3) - 12.0 / (x + 2.0).powi(4)).abs() < 1e-13);
    }
}
