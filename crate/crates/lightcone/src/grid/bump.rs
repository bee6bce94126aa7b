//! Smooth bump f on [1,2], its primitive F, the plateau h = 1 - F, the
//! saturating profile φ and J_β(s) = s^β F(√s).
//!
//! F and its moments are tabulated on 2048 panels with 8-point Gauss-Legendre
//! sums; values inside a panel add one more 8-point rule on the sub-panel.

use std::sync::OnceLock;

const PANELS: usize = 2048;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(8))
}

fn integrate(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gl8();
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * g(m + r * xi)).sum::<f64>() * r
}

fn raw_bump(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        0.0
    } else {
        (-1.0 / ((t - 1.0) * (2.0 - t))).exp()
    }
}

struct Tables {
    z: f64,
    /// ∫_1^{s_i} f and ∫_1^{s_i} τ f(τ) dτ at panel edges.
    cum0: Vec<f64>,
    cum1: Vec<f64>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let h = 1.0 / PANELS as f64;
        let mut c0 = vec![0.0; PANELS + 1];
        let mut c1 = vec![0.0; PANELS + 1];
        for i in 0..PANELS {
            let (a, b) = (1.0 + i as f64 * h, 1.0 + (i + 1) as f64 * h);
            c0[i + 1] = c0[i] + integrate(a, b, raw_bump);
            c1[i + 1] = c1[i] + integrate(a, b, |t| t * raw_bump(t));
        }
        let z = 1.0 / c0[PANELS];
        for v in c0.iter_mut().chain(c1.iter_mut()) {
            *v *= z;
        }
        Tables { z, cum0: c0, cum1: c1 }
    })
}

/// Normalized bump, supported in [1, 2], with unit integral.
pub fn f(t: f64) -> f64 {
    tables().z * raw_bump(t)
}

fn cumulative(s: f64, moment: usize) -> f64 {
    let t = tables();
    let pos = (s - 1.0) * PANELS as f64;
    let i = (pos.floor() as usize).min(PANELS - 1);
    let a = 1.0 + i as f64 / PANELS as f64;
    let base = if moment == 0 { t.cum0[i] } else { t.cum1[i] };
    base + integrate(a, s, |x| if moment == 0 { f(x) } else { x * f(x) })
}

/// F(s) = ∫_{-∞}^s f: 0 below 1, 1 above 2, smooth and non-decreasing.
pub fn big_f(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        cumulative(s, 0)
    }
}

/// ∫_{-∞}^w F.
pub fn int_big_f(w: f64) -> f64 {
    if w <= 1.0 {
        0.0
    } else if w >= 2.0 {
        0.5 + (w - 2.0)
    } else {
        w * cumulative(w, 0) - cumulative(w, 1)
    }
}

/// Plateau function: 1 on (-∞, 1], 0 on [2, ∞).
pub fn h(s: f64) -> f64 {
    1.0 - big_f(s)
}

pub fn h_prime(s: f64) -> f64 {
    -f(s)
}

/// Odd, non-decreasing profile with φ(r) = r for |r| ≤ 1/2 and φ(r) = ±1 for
/// |r| ≥ 1.
pub fn phi(r: f64) -> f64 {
    let a = r.abs();
    let v = if a <= 0.5 {
        a
    } else if a >= 1.0 {
        1.0
    } else {
        let u = 2.0 * a;
        0.5 + 0.5 * ((u - 1.0) - int_big_f(u) + 0.5 * big_f(u))
    };
    v.copysign(r)
}

/// φ'(r) = h(2|r|) + f(2|r|)/2.
pub fn phi_prime(r: f64) -> f64 {
    let u = 2.0 * r.abs();
    h(u) + 0.5 * f(u)
}

/// J_β(s) = s^β F(√s) for s ≥ 0.
pub fn j_beta(beta: f64, s: f64) -> f64 {
    if s <= 1.0 {
        return 0.0;
    }
    s.powf(beta) * big_f(s.sqrt())
}

pub fn j_beta_prime(beta: f64, s: f64) -> f64 {
    if s <= 1.0 {
        return 0.0;
    }
    let r = s.sqrt();
    beta * s.powf(beta - 1.0) * big_f(r) + s.powf(beta) * f(r) / (2.0 * r)
}
