//! Commutators of functions of v = y/(ct) with |k| and with y·k̂ + k̂·y on
//! the scalar site space.
//!
//! With y = i∇_k one has [y², i|k|] = -(y·k̂ + k̂·y), so the leading part of
//! [G(v²), i|k|] is -(ct)^{-1} G'(v²)(v·k̂ + k̂·v).

use num_complex::Complex64 as C64;

use super::symbol::Symbol;
use super::PhotonGrid;
use crate::error::{invalid, Result};
use crate::linalg::{op_norm, DMat};

#[derive(Clone, Debug)]
pub struct CommutatorResidual {
    pub leading: DMat,
    pub residual: DMat,
    pub residual_norm: f64,
}

/// G(v²) and G'(v²) as site-space matrices.
pub fn g_of_v2(grid: &PhotonGrid, g: &Symbol, t: f64, c: f64) -> (DMat, DMat) {
    let ct = c * t;
    let r = grid.y_norms();
    let vals: Vec<f64> = r.iter().map(|&r| g.eval((r / ct).powi(2))).collect();
    let ders: Vec<f64> = r.iter().map(|&r| g.jet((r / ct).powi(2)).deriv(1)).collect();
    (grid.site_position_matrix(&vals), grid.site_position_matrix(&ders))
}

fn k_diag(grid: &PhotonGrid, p: f64) -> DMat {
    DMat::from_diagonal(&nalgebra::DVector::from_iterator(
        grid.sites(),
        grid.omega.iter().map(|w| C64::from(w.powf(p))),
    ))
}

/// ‖|k|^{δ/2} M |k|^{δ/2}‖ on the site space.
pub fn weighted_norm(grid: &PhotonGrid, m: &DMat, delta: f64) -> f64 {
    let w = k_diag(grid, 0.5 * delta);
    op_norm(&(&w * m * &w))
}

/// Leading term and residual of [G(v²), i|k|] without hypothesis checks.
pub fn residual_operator(grid: &PhotonGrid, g: &Symbol, t: f64, c: f64) -> (DMat, DMat) {
    let (gv, dg) = g_of_v2(grid, g, t, c);
    let ik = k_diag(grid, 1.0) * C64::new(0.0, 1.0);
    let comm = &gv * &ik - &ik * &gv;
    let ct = c * t;
    let dil = grid.dilation_like() * C64::from(1.0 / ct);
    let leading = (&dg * &dil) * C64::from(-1.0 / ct);
    let residual = comm - &leading;
    (leading, residual)
}

fn check_region(g: &Symbol, delta: f64, t: f64, rho_max: f64) -> Result<()> {
    if !(g.rho < rho_max) {
        return Err(invalid("rho", format!("{} must be below {rho_max}", g.rho)));
    }
    let lo = (1.0 + 2.0 * g.rho).max(0.0);
    if !(delta > lo && delta <= 1.0) {
        return Err(invalid("delta", format!("{delta} outside ({lo}, 1]")));
    }
    if !(t >= 1.0) {
        return Err(invalid("t", format!("{t} must be at least 1")));
    }
    Ok(())
}

/// R = [G(v²), i|k|] + (ct)^{-1} G'(v²)(v·k̂ + k̂·v) and ‖|k|^{δ/2} R |k|^{δ/2}‖.
pub fn commutator_decomposition_residual(
    grid: &PhotonGrid,
    g: &Symbol,
    t: f64,
    delta: f64,
    c: f64,
) -> Result<CommutatorResidual> {
    check_region(g, delta, t, 1.0)?;
    let (leading, residual) = residual_operator(grid, g, t, c);
    let residual_norm = weighted_norm(grid, &residual, delta);
    Ok(CommutatorResidual { leading, residual, residual_norm })
}

/// ‖|k|^{δ/2} [G(v²), y·k̂ + k̂·y] |k|^{δ/2}‖ for G with ρ < 0.
pub fn dilation_commutator_norm(
    grid: &PhotonGrid,
    g: &Symbol,
    t: f64,
    delta: f64,
    c: f64,
) -> Result<f64> {
    check_region(g, delta, t, 0.0)?;
    let (gv, _) = g_of_v2(grid, g, t, c);
    let a = grid.dilation_like();
    Ok(weighted_norm(grid, &(&gv * &a - &a * &gv), delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_photon_grid, Mode};

    fn grid() -> PhotonGrid {
        build_photon_grid(1, 64, 0.1, Mode::Scalar1d).unwrap()
    }

    #[test]
    fn constant_symbol_has_no_residual() {
        let g = grid();
        let (leading, residual) = residual_operator(&g, &Symbol::constant(2.5), 1.0, 1.0);
        assert!(op_norm(&leading) < 1e-12);
        assert!(weighted_norm(&g, &residual, 0.5) < 1e-12);
    }

    #[test]
    fn identity_symbol_two_routes_agree() {
        // Direct: [Y2, i|k|] with Y2 = U diag(y²) U†. Product route: Y2 = Y·Y
        // and [Y², B] = Y[Y, B] + [Y, B]Y.
        let g = grid();
        let (_, direct) = residual_operator(&g, &Symbol::identity(), 1.0, 1.0);
        let y = g.site_position_matrix(&g.y_axis);
        let ik = k_diag(&g, 1.0) * C64::new(0.0, 1.0);
        let cy = &y * &ik - &ik * &y;
        let comm = &y * &cy + &cy * &y;
        let dil = g.dilation_like();
        let route = comm + dil * C64::from(1.0);
        for delta in [0.3, 1.0] {
            let a = weighted_norm(&g, &direct, delta);
            let b = weighted_norm(&g, &route, delta);
            assert!((a - b).abs() < 1e-10 * (1.0 + a), "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_outside_region() {
        let g = grid();
        let s = Symbol::bracket(-0.25);
        // needs delta > 1 + 2ρ = 0.5
        assert!(commutator_decomposition_residual(&g, &s, 1.0, 0.4, 1.0).is_err());
        assert!(commutator_decomposition_residual(&g, &s, 1.0, 0.6, 1.0).is_ok());
        assert!(commutator_decomposition_residual(&g, &s, 0.5, 0.6, 1.0).is_err());
        assert!(dilation_commutator_norm(&g, &Symbol::constant(1.0), 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn residual_shrinks_with_time() {
        let g = build_photon_grid(1, 128, 0.05, Mode::Scalar1d).unwrap();
        let s = Symbol::bracket(-1.0);
        let r1 = commutator_decomposition_residual(&g, &s, 2.0, 0.5, 1.0).unwrap();
        let r2 = commutator_decomposition_residual(&g, &s, 4.0, 0.5, 1.0).unwrap();
        assert!(r2.residual_norm < r1.residual_norm * 2f64.powf(-0.5 + 0.3));
    }
}
