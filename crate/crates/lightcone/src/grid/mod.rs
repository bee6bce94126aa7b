//! One-photon space on a half-offset momentum lattice.
//!
//! Momenta are k_j = (j + 1/2 - M/2)Δk per axis, so no lattice point sits at
//! k = 0. The conjugate position lattice uses the same offset with spacing
//! Δy = 2π/(MΔk), and the unitary transform U_{k,y} = e^{-iky}/√M realizes
//! y = i∇_k. Mode index is `site * P + λ` with sites in axis-major order.

pub mod bump;
pub mod commutator;
pub mod hs;
pub mod jet;
pub mod symbol;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, DMat, ZERO};

pub use symbol::{Symbol, SymbolFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Scalar1d,
    Vector3d,
}

impl Mode {
    pub fn dim(self) -> usize {
        match self {
            Mode::Scalar1d => 1,
            Mode::Vector3d => 3,
        }
    }
    pub fn polarizations(self) -> usize {
        match self {
            Mode::Scalar1d => 1,
            Mode::Vector3d => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rep {
    Momentum,
    Position,
}

#[derive(Clone, Debug)]
pub struct PhotonGrid {
    pub dim: usize,
    pub modes_per_axis: usize,
    pub spacing: f64,
    pub mode: Mode,
    pub polarizations: usize,
    /// Momentum of each lattice site (unused components are 0).
    pub k_points: Vec<[f64; 3]>,
    pub omega: Vec<f64>,
    /// Polarization frame per site (vector3d only).
    pub eps: Vec<[[f64; 3]; 2]>,
    /// Per-axis momentum and position coordinates.
    pub k_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub y_spacing: f64,
    dft: Vec<C64>,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// ε₁ = normalize(e_z × k), falling back to e_x when k is along e_z;
/// ε₂ = k̂ × ε₁.
pub fn polarization_frame(k: [f64; 3]) -> [[f64; 3]; 2] {
    let kn = norm3(k);
    let kh = [k[0] / kn, k[1] / kn, k[2] / kn];
    let c = cross([0.0, 0.0, 1.0], k);
    let cn = norm3(c);
    let e1 = if cn > 1e-8 { [c[0] / cn, c[1] / cn, c[2] / cn] } else { [1.0, 0.0, 0.0] };
    [e1, cross(kh, e1)]
}

pub fn build_photon_grid(dim: usize, m: usize, dk: f64, mode: Mode) -> Result<PhotonGrid> {
    if dim != 1 && dim != 3 {
        return Err(invalid("dim", format!("{dim} is not 1 or 3")));
    }
    if dim != mode.dim() {
        return Err(invalid("dim", format!("{dim} does not match mode {mode:?}")));
    }
    if m < 2 || m % 2 != 0 {
        return Err(invalid("modes_per_axis", format!("{m} must be even and at least 2")));
    }
    if !(dk > 0.0 && dk.is_finite()) {
        return Err(invalid("spacing", format!("{dk} must be positive")));
    }
    let off = 0.5 - m as f64 / 2.0;
    let k_axis: Vec<f64> = (0..m).map(|j| (j as f64 + off) * dk).collect();
    let dy = 2.0 * std::f64::consts::PI / (m as f64 * dk);
    let y_axis: Vec<f64> = (0..m).map(|j| (j as f64 + off) * dy).collect();
    let inv = 1.0 / (m as f64).sqrt();
    let mut dft = Vec::with_capacity(m * m);
    for &k in &k_axis {
        for &y in &y_axis {
            dft.push(C64::from_polar(inv, -k * y));
        }
    }
    let sites = m.pow(dim as u32);
    let mut k_points = Vec::with_capacity(sites);
    for s in 0..sites {
        let mut v = [0.0; 3];
        let mut r = s;
        for a in (0..dim).rev() {
            v[a] = k_axis[r % m];
            r /= m;
        }
        k_points.push(v);
    }
    let omega = k_points.iter().map(|&k| norm3(k)).collect();
    let eps = if mode == Mode::Vector3d {
        k_points.iter().map(|&k| polarization_frame(k)).collect()
    } else {
        vec![]
    };
    Ok(PhotonGrid {
        dim,
        modes_per_axis: m,
        spacing: dk,
        mode,
        polarizations: mode.polarizations(),
        k_points,
        omega,
        eps,
        k_axis,
        y_axis,
        y_spacing: dy,
        dft,
    })
}

impl PhotonGrid {
    pub fn sites(&self) -> usize {
        self.k_points.len()
    }

    pub fn n_modes(&self) -> usize {
        self.sites() * self.polarizations
    }

    pub fn site_of(&self, mode: usize) -> usize {
        mode / self.polarizations
    }

    /// Dispersion per mode (site value repeated over polarizations).
    pub fn omega_modes(&self) -> Vec<f64> {
        (0..self.n_modes()).map(|j| self.omega[self.site_of(j)]).collect()
    }

    /// Position vector of each position-lattice site, same ordering as
    /// momentum sites.
    pub fn y_points(&self) -> Vec<[f64; 3]> {
        let m = self.modes_per_axis;
        (0..self.sites())
            .map(|s| {
                let mut v = [0.0; 3];
                let mut r = s;
                for a in (0..self.dim).rev() {
                    v[a] = self.y_axis[r % m];
                    r /= m;
                }
                v
            })
            .collect()
    }

    pub fn y_norms(&self) -> Vec<f64> {
        self.y_points().into_iter().map(norm3).collect()
    }

    /// Half-length of the position box.
    pub fn box_half_length(&self) -> f64 {
        0.5 * self.modes_per_axis as f64 * self.y_spacing
    }

    /// Largest |k| on any axis.
    pub fn k_max(&self) -> f64 {
        self.k_axis[self.modes_per_axis - 1]
    }

    /// Unitary transform matrix element U_{k_j, y_m} along one axis.
    pub fn dft_entry(&self, j: usize, m: usize) -> C64 {
        self.dft[j * self.modes_per_axis + m]
    }

    /// Applies U (position → momentum) or U† (momentum → position) to a
    /// scalar field over sites, in place, one axis at a time.
    pub fn transform_sites(&self, data: &mut [C64], to_position: bool) {
        let m = self.modes_per_axis;
        assert_eq!(data.len(), self.sites());
        let mut line = vec![ZERO; m];
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let outer = self.sites() / (m * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * m * stride + inner;
                    for (a, l) in line.iter_mut().enumerate() {
                        *l = data[base + a * stride];
                    }
                    for b in 0..m {
                        let mut acc = ZERO;
                        for (a, l) in line.iter().enumerate() {
                            let u = if to_position {
                                self.dft[a * m + b].conj()
                            } else {
                                self.dft[b * m + a]
                            };
                            acc += u * l;
                        }
                        data[base + b * stride] = acc;
                    }
                }
            }
        }
    }

    /// Applies U diag(values) U† to a one-photon vector given in momentum
    /// representation; `values` are indexed by position site.
    pub fn position_multiply(&self, values: &[f64], psi: &[C64]) -> Vec<C64> {
        assert_eq!(values.len(), self.sites());
        assert_eq!(psi.len(), self.n_modes());
        let p = self.polarizations;
        let mut out = vec![ZERO; psi.len()];
        let mut buf = vec![ZERO; self.sites()];
        for lam in 0..p {
            for s in 0..self.sites() {
                buf[s] = psi[s * p + lam];
            }
            self.transform_sites(&mut buf, true);
            for (b, &v) in buf.iter_mut().zip(values) {
                *b *= v;
            }
            self.transform_sites(&mut buf, false);
            for s in 0..self.sites() {
                out[s * p + lam] = buf[s];
            }
        }
        out
    }

    /// Dense one-photon operator diagonal in the requested representation,
    /// written in the momentum basis.
    pub fn operator_function(&self, rep: Rep, sf: &SymbolFunction) -> Result<DMat> {
        sf.validate()?;
        let n = self.n_modes();
        match rep {
            Rep::Momentum => {
                let mut m = DMat::zeros(n, n);
                for j in 0..n {
                    let w = self.omega[self.site_of(j)];
                    if w == 0.0 && matches!(sf, SymbolFunction::InversePowerDelta { .. }) {
                        return Err(Error::ZeroDenominator("|k| = 0 in inverse power"));
                    }
                    m[(j, j)] = C64::from(sf.eval(w));
                }
                Ok(m)
            }
            Rep::Position => {
                let vals: Vec<f64> = self.y_norms().iter().map(|&r| sf.eval(r)).collect();
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("symbol", "not finite on the position lattice"));
                }
                Ok(self.position_matrix(&vals))
            }
        }
    }

    /// U diag(values) U† on the scalar site space (one polarization).
    pub fn site_position_matrix(&self, values: &[f64]) -> DMat {
        let s = self.sites();
        let m = self.modes_per_axis;
        let mut w = DMat::zeros(s, s);
        for a in 0..s {
            for b in 0..s {
                let (mut ra, mut rb) = (a, b);
                let mut val = C64::from(1.0);
                for _ in 0..self.dim {
                    val *= self.dft[(ra % m) * m + (rb % m)];
                    ra /= m;
                    rb /= m;
                }
                w[(a, b)] = val;
            }
        }
        let mut wd = w.clone();
        for b in 0..s {
            for a in 0..s {
                wd[(a, b)] *= values[b];
            }
        }
        let op = &wd * w.adjoint();
        (&op + op.adjoint()) * C64::from(0.5)
    }

    /// U diag(values) U† as a dense matrix in the momentum basis.
    pub fn position_matrix(&self, values: &[f64]) -> DMat {
        let s = self.sites();
        let p = self.polarizations;
        let site_op = self.site_position_matrix(values);
        if p == 1 {
            return site_op;
        }
        let mut out = DMat::zeros(s * p, s * p);
        for a in 0..s {
            for b in 0..s {
                for lam in 0..p {
                    out[(a * p + lam, b * p + lam)] = site_op[(a, b)];
                }
            }
        }
        out
    }

    /// Dense matrix of y·k̂ + k̂·y on the scalar site space.
    pub fn dilation_like(&self) -> DMat {
        let s = self.sites();
        let ys = self.y_points();
        let mut out = DMat::zeros(s, s);
        for axis in 0..self.dim {
            let ya: Vec<f64> = ys.iter().map(|v| v[axis]).collect();
            let y = self.site_position_matrix(&ya);
            for a in 0..s {
                for b in 0..s {
                    let ka = self.k_points[a][axis] / self.omega[a];
                    let kb = self.k_points[b][axis] / self.omega[b];
                    out[(a, b)] += y[(a, b)] * (kb + ka);
                }
            }
        }
        out
    }

    /// Fraction of position-space mass within two lattice sites of the box
    /// edge on any axis.
    pub fn boundary_mass_fraction(&self, psi: &[C64]) -> f64 {
        let p = self.polarizations;
        let m = self.modes_per_axis;
        let mut total = 0.0;
        let mut edge = 0.0;
        let mut buf = vec![ZERO; self.sites()];
        for lam in 0..p {
            for s in 0..self.sites() {
                buf[s] = psi[s * p + lam];
            }
            self.transform_sites(&mut buf, true);
            for (s, b) in buf.iter().enumerate() {
                let w = b.norm_sqr();
                total += w;
                let mut r = s;
                let mut near = false;
                for _ in 0..self.dim {
                    let i = r % m;
                    r /= m;
                    if i < 2 || i >= m - 2 {
                        near = true;
                    }
                }
                if near {
                    edge += w;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }
}

/// ‖|k|^{-s} u‖ / ‖|y|^s u‖ for a one-photon vector in momentum
/// representation.
pub fn hardy_ratio(grid: &PhotonGrid, s: f64, u: &[C64]) -> Result<f64> {
    let limit = if grid.dim == 3 { 1.5 } else { 0.5 };
    if !(0.0..limit).contains(&s) {
        return Err(invalid("s", format!("{s} outside [0, {limit})")));
    }
    if u.len() != grid.n_modes() {
        return Err(Error::BasisMismatch { expected: grid.n_modes(), got: u.len() });
    }
    let num: Vec<C64> =
        u.iter().enumerate().map(|(j, &a)| a * grid.omega[grid.site_of(j)].powf(-s)).collect();
    let yw: Vec<f64> = grid.y_norms().iter().map(|r| r.powf(s)).collect();
    let den = norm(&grid.position_multiply(&yw, u));
    if den == 0.0 {
        return Err(Error::ZeroDenominator("‖|y|^s u‖ = 0"));
    }
    Ok(norm(&num) / den)
}

/// Normalized Gaussian one-photon packet centred at (k0, y0) with momentum
/// width `width`, all weight in polarization 0.
pub fn gaussian_packet(grid: &PhotonGrid, k0: [f64; 3], y0: [f64; 3], width: f64) -> Vec<C64> {
    let p = grid.polarizations;
    let mut v = vec![ZERO; grid.n_modes()];
    for (s, k) in grid.k_points.iter().enumerate() {
        let mut e = 0.0;
        let mut ph = 0.0;
        for a in 0..grid.dim {
            e += (k[a] - k0[a]).powi(2);
            ph -= k[a] * y0[a];
        }
        v[s * p] = C64::from_polar((-e / (2.0 * width * width)).exp(), ph);
    }
    crate::linalg::normalize(&mut v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{op_norm, start_vector};

    #[test]
    fn half_offset_momenta() {
        let g = build_photon_grid(1, 4, 0.5, Mode::Scalar1d).unwrap();
        assert_eq!(g.k_axis, vec![-0.75, -0.25, 0.25, 0.75]);
        assert!(g.omega.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn position_spacing() {
        let g = build_photon_grid(1, 2, 1.0, Mode::Scalar1d).unwrap();
        assert!((g.y_spacing - std::f64::consts::PI).abs() < 1e-15);
        assert!((g.y_axis[1] - g.y_axis[0] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_photon_grid(1, 5, 0.5, Mode::Scalar1d).is_err());
        assert!(build_photon_grid(2, 4, 0.5, Mode::Scalar1d).is_err());
        assert!(build_photon_grid(1, 4, 0.0, Mode::Scalar1d).is_err());
    }

    #[test]
    fn polarization_frames_orthonormal() {
        let g = build_photon_grid(3, 4, 0.5, Mode::Vector3d).unwrap();
        assert_eq!(g.n_modes(), 128);
        for (k, e) in g.k_points.iter().zip(&g.eps) {
            for l in 0..2 {
                let dk: f64 = (0..3).map(|a| e[l][a] * k[a]).sum();
                assert!(dk.abs() < 1e-12);
                for l2 in 0..2 {
                    let d: f64 = (0..3).map(|a| e[l][a] * e[l2][a]).sum();
                    let want = if l == l2 { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn frame_falls_back_on_z_axis() {
        let f = polarization_frame([0.0, 0.0, 2.0]);
        assert_eq!(f[0], [1.0, 0.0, 0.0]);
        assert_eq!(f[1], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn transform_is_unitary_3d() {
        let g = build_photon_grid(3, 4, 0.7, Mode::Vector3d).unwrap();
        let v = start_vector(g.sites(), 3);
        let mut w = v.clone();
        g.transform_sites(&mut w, true);
        assert!((norm(&w) - 1.0).abs() < 1e-13);
        g.transform_sites(&mut w, false);
        let d: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-13);
    }

    #[test]
    fn position_operator_is_derivative_in_k() {
        // i∂_k of a smooth packet equals y acting on it.
        let g = build_photon_grid(1, 64, 0.1, Mode::Scalar1d).unwrap();
        let u = gaussian_packet(&g, [0.0; 3], [0.0; 3], 0.4);
        let yu = g.position_multiply(&g.y_axis, &u);
        for j in 20..44 {
            let k = g.k_axis[j];
            let want = C64::new(0.0, 1.0) * u[j] * (-k / 0.16);
            assert!((yu[j] - want).norm() < 1e-8, "j={j}");
        }
    }

    #[test]
    fn inverse_power_entries() {
        let g = build_photon_grid(1, 4, 0.5, Mode::Scalar1d).unwrap();
        let m = g
            .operator_function(Rep::Momentum, &SymbolFunction::InversePowerDelta { delta: 1.0 })
            .unwrap();
        let d: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        let want = [4.0 / 3.0, 4.0, 4.0, 4.0 / 3.0];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn lightcone_function_on_localized_states() {
        let g = build_photon_grid(1, 128, 0.05, Mode::Scalar1d).unwrap();
        let sf = SymbolFunction::LightconeF { c: 2.0, t: 10.0 };
        let fop = g.operator_function(Rep::Position, &sf).unwrap();
        // state supported at a single position site with |y| <= 10
        let inner = g.y_axis.iter().position(|&y| y.abs() < 5.0).unwrap();
        let mut e = vec![ZERO; g.sites()];
        e[inner] = C64::from(1.0);
        g.transform_sites(&mut e, false);
        let v = crate::linalg::to_dvec(&e);
        let ex = (v.adjoint() * &fop * &v)[(0, 0)].re;
        assert!(ex.abs() < 1e-12);
        let outer = g.y_axis.iter().position(|&y| y.abs() >= 40.0).unwrap();
        let mut e = vec![ZERO; g.sites()];
        e[outer] = C64::from(1.0);
        g.transform_sites(&mut e, false);
        let v = crate::linalg::to_dvec(&e);
        let ex = (v.adjoint() * &fop * &v)[(0, 0)].re;
        assert!((ex - 1.0).abs() < 1e-12);
    }

    #[test]
    fn functions_of_position_commute() {
        let g = build_photon_grid(1, 32, 0.2, Mode::Scalar1d).unwrap();
        let a = g.operator_function(Rep::Position, &SymbolFunction::LightconeF { c: 1.0, t: 2.0 }).unwrap();
        let b = g
            .operator_function(Rep::Position, &SymbolFunction::JBeta { beta: 0.3, c: 1.0, t: 2.0 })
            .unwrap();
        assert!(op_norm(&(&a * &b - &b * &a)) < 1e-12);
    }

    #[test]
    fn hardy_ratio_edge_cases() {
        let g = build_photon_grid(1, 32, 0.2, Mode::Scalar1d).unwrap();
        let u = vec![ZERO; 32];
        assert!(matches!(hardy_ratio(&g, 0.25, &u), Err(Error::ZeroDenominator(_))));
        let v = start_vector(32, 2);
        assert!((hardy_ratio(&g, 0.0, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!(hardy_ratio(&g, 0.6, &v).is_err());
    }
}
