//! Scalar functions applied to |k| or |y|.

use std::fmt;
use std::sync::Arc;

use super::bump;
use super::jet::Jet;
use crate::error::{invalid, Result};

/// Smooth real function known through its Taylor jets, tagged with a symbol
/// class exponent ρ: |g^{(n)}(s)| ≲ ⟨s⟩^{ρ-n}.
#[derive(Clone)]
pub struct Symbol {
    pub name: String,
    pub rho: f64,
    pub g: Arc<dyn Fn(Jet) -> Jet + Send + Sync>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symbol({}, rho={})", self.name, self.rho)
    }
}

impl Symbol {
    pub fn new(name: &str, rho: f64, g: impl Fn(Jet) -> Jet + Send + Sync + 'static) -> Self {
        Symbol { name: name.to_string(), rho, g: Arc::new(g) }
    }

    /// ⟨s⟩^p = (1 + s²)^{p/2}.
    pub fn bracket(p: f64) -> Self {
        Symbol::new(&format!("bracket^{p}"), p, move |s| (s * s + 1.0).powf(0.5 * p))
    }

    /// s⟨s⟩^{p-1}, an odd member of the same class.
    pub fn odd_bracket(p: f64) -> Self {
        Symbol::new(&format!("s*bracket^{}", p - 1.0), p, move |s| s * (s * s + 1.0).powf(0.5 * (p - 1.0)))
    }

    /// 1/(1 + (s - a)²).
    pub fn shifted_inverse(a: f64) -> Self {
        Symbol::new(&format!("1/(1+(s-{a})^2)"), -2.0, move |s| {
            let d = s + (-a);
            (d * d + 1.0).recip()
        })
    }

    pub fn identity() -> Self {
        Symbol::new("s", 1.0, |s| s)
    }

    pub fn constant(c: f64) -> Self {
        Symbol::new("const", 0.0, move |_| Jet::constant(c))
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.g)(Jet::constant(s)).value()
    }

    pub fn jet(&self, s: f64) -> Jet {
        (self.g)(Jet::var(s))
    }

    /// Fitted constants C_n = max |g^{(n)}(s)| ⟨s⟩^{n-ρ} over `samples`
    /// points in [-smax, smax], n = 0..=3.
    pub fn class_constants(&self, smax: f64, samples: usize) -> [f64; 4] {
        let mut c = [0.0f64; 4];
        for i in 0..samples {
            let s = -smax + 2.0 * smax * i as f64 / (samples - 1) as f64;
            let j = self.jet(s);
            let br = (1.0 + s * s).sqrt();
            for (n, cn) in c.iter_mut().enumerate() {
                *cn = cn.max(j.deriv(n).abs() * br.powf(n as f64 - self.rho));
            }
        }
        c
    }
}

/// Functions of |y| or |k| used to build one-photon operators.
#[derive(Clone, Debug)]
pub enum SymbolFunction {
    /// F(r/(ct)).
    LightconeF { c: f64, t: f64 },
    /// J_β((r/(ct))²).
    JBeta { beta: f64, c: f64, t: f64 },
    /// r^{-δ}.
    InversePowerDelta { delta: f64 },
    /// ⟨r⟩^β.
    BracketYBeta { beta: f64 },
    /// h(scale·r).
    LowpassH { scale: f64 },
    /// 1 when r ≥ radius.
    SharpExterior { radius: f64 },
    /// r^p.
    Power { p: f64 },
    Generic(Symbol),
}

impl SymbolFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SymbolFunction::LightconeF { c, t } | SymbolFunction::JBeta { c, t, .. } => {
                if !(t > 0.0) {
                    return Err(invalid("t", format!("{t} must be positive")));
                }
                if !(c > 0.0) {
                    return Err(invalid("c", format!("{c} must be positive")));
                }
            }
            SymbolFunction::LowpassH { scale } if !(scale >= 0.0) => {
                return Err(invalid("scale", format!("{scale} must be non-negative")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            SymbolFunction::LightconeF { c, t } => bump::big_f(r / (c * t)),
            SymbolFunction::JBeta { beta, c, t } => {
                let v = r / (c * t);
                bump::j_beta(*beta, v * v)
            }
            SymbolFunction::InversePowerDelta { delta } => r.powf(-delta),
            SymbolFunction::BracketYBeta { beta } => (1.0 + r * r).powf(0.5 * beta),
            SymbolFunction::LowpassH { scale } => bump::h(scale * r),
            SymbolFunction::SharpExterior { radius } => {
                if r >= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            SymbolFunction::Power { p } => r.powf(*p),
            SymbolFunction::Generic(s) => s.eval(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lightcone_profile_shape() {
        let sf = SymbolFunction::LightconeF { c: 1.0, t: 1.0 };
        assert_eq!(sf.eval(0.5), 0.0);
        assert_eq!(sf.eval(1.0), 0.0);
        assert_eq!(sf.eval(2.0), 1.0);
        assert_eq!(sf.eval(7.0), 1.0);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = sf.eval(1.0 + i as f64 * 1e-3);
            assert!(v >= prev);
            prev = v;
        }
        // second differences stay small at the edges: no kinks
        let e = 1e-3;
        for &r in &[1.0, 2.0] {
            let d2 = sf.eval(r + e) - 2.0 * sf.eval(r) + sf.eval(r - e);
            assert!(d2.abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_time() {
        assert!(SymbolFunction::LightconeF { c: 1.0, t: 0.0 }.validate().is_err());
        assert!(SymbolFunction::LightconeF { c: 1.0, t: -1.0 }.validate().is_err());
        assert!(SymbolFunction::LightconeF { c: 1.0, t: 1.0 }.validate().is_ok());
    }

    #[test]
    fn class_constants_stabilize() {
        for s in [Symbol::bracket(-1.0), Symbol::odd_bracket(-0.5), Symbol::shifted_inverse(1.5)] {
            let a = s.class_constants(100.0, 4001);
            let b = s.class_constants(1000.0, 40001);
            for n in 0..4 {
                assert!(b[n] <= 1.05 * a[n] + 1e-12, "{} n={n}: {} vs {}", s.name, a[n], b[n]);
            }
        }
    }
}
