//! Ground-state assembly for one `(p, lambda)`: the vertex value `z`, the
//! soliton shift `y`, the masses `Theta_1` and `Theta`, and `dTheta/dlambda`.
//!
//! Every quantity is a function of the vertex value `z` at the `lambda = 1`
//! level; the frequency enters through `ell = sqrt(lambda)` and the scaling
//! `Theta(p, lambda) = lambda^alpha Theta_1(p, z(p, ell))`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{Graph, HamiltonianLevel, ModelParams, Nonlinearity};
use crate::quadrature::{integrate_soliton_tail, QuadOptions, UpperEdge, DEFAULT_TOL, NEAR_PEAK};
use crate::roots::{brent, RootOptions};

/// Relative tolerance on `z` in [`solve_z`].
pub const TOL_Z: f64 = 1e-10;

/// Smallest vertex value [`solve_z`] will search down to.
const Z_FLOOR: f64 = 1e-300;

/// Phase-plane coordinates that pin the profile down edge by edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub z: f64,
    pub y: f64,
    pub level: HamiltonianLevel,
    pub ell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRecord {
    pub params: ModelParams,
    pub lambda: f64,
    pub phase: PhaseState,
    pub theta1: f64,
    pub theta: f64,
    pub dtheta_dlambda: f64,
}

/// Mass exponent `alpha = (6 - p) / (2 (p - 2))`, pinned to zero at `p = 6`.
pub fn alpha(p: f64) -> f64 {
    if (p - 6.0).abs() < 1e-12 {
        0.0
    } else {
        (6.0 - p) / (2.0 * (p - 2.0))
    }
}

/// `Theta_1 = a mu_1(theta) + b mu_2`: (1, 2) on the T-graph, (2, 1) on the
/// tadpole.
fn mass_weights(graph: Graph) -> Result<(f64, f64)> {
    match graph {
        Graph::TGraph => Ok((1.0, 2.0)),
        Graph::Tadpole => Ok((2.0, 1.0)),
        Graph::RawTheta(theta) => domain(format!(
            "mass decomposition is only defined for the T-graph and tadpole, got theta = {theta}"
        )),
    }
}

/// `f(z)` with full relative accuracy near the peak.
fn f_at(nl: &Nonlinearity, z: f64) -> f64 {
    if z > 1.0 {
        nl.f_diff(nl.peak(), z - nl.peak())
    } else {
        nl.f(z)
    }
}

fn opts() -> QuadOptions {
    QuadOptions::with_tol(DEFAULT_TOL)
}

/// `L(p, z) = (1/sqrt 2) int_z^T dt / sqrt(f(t) - (1 - theta^2) f(z))`.
pub fn length_l(nl: &Nonlinearity, theta: f64, z: f64) -> Result<f64> {
    Ok(UpperEdge::new(nl, theta, z)?.integrate(|_| 1.0, opts())? / SQRT_2)
}

fn dlength_dz_on(nl: &Nonlinearity, edge: &UpperEdge, theta: f64, z: f64) -> Result<f64> {
    let fz = f_at(nl, z);
    let k = 1.0 - theta * theta;
    let integral = if k == 0.0 {
        0.0
    } else {
        edge.integrate(|t| nl.eval_a(t), opts())?
    };
    let rhs = theta * nl.f_one() / fz.sqrt() + k * nl.df(z) * integral;
    Ok(rhs / (SQRT_2 * (edge.level() - nl.f_one())))
}

/// `dL/dz` from its non-singular representation; negative for `theta <= 2`.
pub fn dlength_dz(nl: &Nonlinearity, theta: f64, z: f64) -> Result<f64> {
    let edge = UpperEdge::new(nl, theta, z)?;
    dlength_dz_on(nl, &edge, theta, z)
}

/// `mu_1(p, z, theta) = (1/sqrt 2) int_z^T t^2 / sqrt(f(t) - (1 - theta^2) f(z))`.
pub fn mu1(nl: &Nonlinearity, theta: f64, z: f64) -> Result<f64> {
    Ok(UpperEdge::new(nl, theta, z)?.integrate(|t| t * t, opts())? / SQRT_2)
}

/// `mu_2(p, z) = (1/sqrt 2) int_0^z t^2 / sqrt(f(t))`.
pub fn mu2(nl: &Nonlinearity, z: f64) -> Result<f64> {
    if z >= nl.peak() - NEAR_PEAK && z < nl.peak() {
        // integrand is t^2/sqrt(f) ~ peak^2 / sqrt(|f'| (peak - t)) over the last stretch
        let zb = nl.peak() - NEAR_PEAK;
        let base = integrate_soliton_tail(nl, zb, DEFAULT_TOL)?;
        let slope = nl.df(nl.peak()).abs();
        let piece = 2.0 * nl.peak().powi(2) * (NEAR_PEAK.sqrt() - (nl.peak() - z).sqrt()) / slope.sqrt();
        return Ok(base + piece / SQRT_2);
    }
    integrate_soliton_tail(nl, z, DEFAULT_TOL)
}

fn mass_integrand(nl: &Nonlinearity) -> impl Fn(f64) -> f64 + '_ {
    move |t| t * t - 0.5 * nl.eval_g(t)
}

fn dmu1_dz_on(nl: &Nonlinearity, edge: &UpperEdge, theta: f64, z: f64) -> Result<f64> {
    let fz = f_at(nl, z);
    let k = 1.0 - theta * theta;
    let integral = if k == 0.0 {
        0.0
    } else {
        edge.integrate(mass_integrand(nl), opts())?
    };
    let rhs = theta * z * z * nl.f_one() / fz.sqrt() - k * nl.df(z) * integral;
    Ok(rhs / (SQRT_2 * (edge.level() - nl.f_one())))
}

/// `d mu_1 / dz`.
pub fn dmu1_dz(nl: &Nonlinearity, theta: f64, z: f64) -> Result<f64> {
    let edge = UpperEdge::new(nl, theta, z)?;
    dmu1_dz_on(nl, &edge, theta, z)
}

/// `d mu_2 / dz = z^2 / sqrt(2 f(z))`.
pub fn dmu2_dz(nl: &Nonlinearity, z: f64) -> Result<f64> {
    if !(z > 0.0 && z < nl.peak()) {
        return domain(format!("z must lie in (0, {}), got {z}", nl.peak()));
    }
    Ok(z * z / (2.0 * f_at(nl, z)).sqrt())
}

/// `Theta_1` as a function of the vertex value.
pub fn mass_theta1(nl: &Nonlinearity, graph: Graph, z: f64) -> Result<f64> {
    let (a, b) = mass_weights(graph)?;
    Ok(a * mu1(nl, graph.theta(), z)? + b * mu2(nl, z)?)
}

fn dmass_theta1_dz_on(nl: &Nonlinearity, edge: &UpperEdge, graph: Graph, z: f64) -> Result<f64> {
    let (a, b) = mass_weights(graph)?;
    let theta = graph.theta();
    // The 1/sqrt(f(z)) terms of a dmu1/dz + b dmu2/dz cancel because
    // a theta = b for both graphs; what remains is regular up to the peak.
    let k = 1.0 - theta * theta;
    let integral = edge.integrate(mass_integrand(nl), opts())?;
    let rhs = k * (b * z * z * f_at(nl, z).sqrt() - a * nl.df(z) * integral);
    Ok(rhs / (SQRT_2 * (edge.level() - nl.f_one())))
}

/// `d Theta_1 / dz`.
pub fn dmass_theta1_dz(nl: &Nonlinearity, graph: Graph, z: f64) -> Result<f64> {
    let edge = UpperEdge::new(nl, graph.theta(), z)?;
    dmass_theta1_dz_on(nl, &edge, graph, z)
}

/// The unique `z` with `L(p, z) = ell`, for `theta in (0, 2]`.
pub fn solve_z(nl: &Nonlinearity, theta: f64, ell: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 2.0) {
        return domain(format!(
            "L is only known to be monotone for theta in (0, 2], got {theta}"
        ));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return domain(format!("ell must be positive, got {ell}"));
    }
    let peak = nl.peak();
    let slope = nl.df(peak).abs();
    // inverse of the near-peak closed form L = sqrt(2) theta sqrt(peak - z) / sqrt(|f'(peak)|)
    let gap = ell * ell * slope / (2.0 * theta * theta);
    if gap < NEAR_PEAK {
        return Ok(peak - gap);
    }
    let z_hi = peak - NEAR_PEAK;
    let residual = |w: f64| -> Result<f64> {
        let z = z_of_w(peak, w);
        Ok(length_l(nl, theta, z)?.ln() - ell.ln())
    };
    let w_hi = (z_hi / NEAR_PEAK).ln();
    if residual(w_hi)? >= 0.0 {
        // ell sits in the O(NEAR_PEAK) seam between quadrature and closed form
        return Ok(z_hi);
    }
    let mut w_lo = -18.4;
    while residual(w_lo)? < 0.0 {
        w_lo *= 2.0;
        if z_of_w(peak, w_lo) < Z_FLOOR {
            w_lo = (Z_FLOOR / peak).ln();
            if residual(w_lo)? < 0.0 {
                return Err(Error::BracketFailure(format!(
                    "ell = {ell} needs a vertex value below {Z_FLOOR:e}"
                )));
            }
        }
    }
    let w = brent(
        residual,
        w_lo,
        w_hi,
        RootOptions {
            xtol: TOL_Z * 1e-2,
            ..RootOptions::default()
        },
    )?;
    Ok(z_of_w(peak, w))
}

fn z_of_w(peak: f64, w: f64) -> f64 {
    if w >= 0.0 {
        peak / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        peak * e / (1.0 + e)
    }
}

/// `Theta_1` as a function of the half-length `ell`.
pub fn theta1_of_ell(nl: &Nonlinearity, graph: Graph, ell: f64) -> Result<f64> {
    let z = solve_z(nl, graph.theta(), ell)?;
    mass_theta1(nl, graph, z)
}

/// Ground-state record at frequency `lambda`.
pub fn assemble(params: ModelParams, lambda: f64) -> Result<GroundStateRecord> {
    assemble_with(&params.nonlinearity(), params, lambda)
}

/// [`assemble`] reusing a prebuilt [`Nonlinearity`] for `params.p()`.
pub fn assemble_with(nl: &Nonlinearity, params: ModelParams, lambda: f64) -> Result<GroundStateRecord> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let graph = params.graph();
    let theta = params.theta();
    let p = params.p();
    let ell = lambda.sqrt();
    let z = solve_z(nl, theta, ell)?;
    let edge = UpperEdge::new(nl, theta, z)?;
    let y = nl.soliton_inverse(z)?;
    let theta1 = mass_theta1(nl, graph, z)?;
    let dl = dlength_dz_on(nl, &edge, theta, z)?;
    let dm = dmass_theta1_dz_on(nl, &edge, graph, z)?;
    let al = alpha(p);
    let scale = lambda.powf(al);
    let dtheta_dlambda = scale / lambda * (al * theta1 + 0.5 * ell * dm / dl);
    Ok(GroundStateRecord {
        params,
        lambda,
        phase: PhaseState {
            z,
            y,
            level: HamiltonianLevel::new(nl, theta, z),
            ell,
        },
        theta1,
        theta: scale * theta1,
        dtheta_dlambda,
    })
}

/// `Theta(p, lambda)` alone, skipping the derivative quadratures.
pub fn mass_theta(nl: &Nonlinearity, params: ModelParams, lambda: f64) -> Result<f64> {
    let z = solve_z(nl, params.theta(), lambda.sqrt())?;
    Ok(lambda.powf(alpha(params.p())) * mass_theta1(nl, params.graph(), z)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nl(p: f64) -> Nonlinearity {
        Nonlinearity::new(p).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn central<F: Fn(f64) -> f64>(f: F, z: f64, h: f64) -> f64 {
        (f(z + h) - f(z - h)) / (2.0 * h)
    }

    #[test]
    fn alpha_at_six_is_exactly_zero() {
        assert_eq!(alpha(6.0), 0.0);
        assert_eq!(alpha(6.0 + 1e-13), 0.0);
        assert!((alpha(4.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dlength_matches_finite_difference() {
        let n = nl(4.0);
        let fd = central(|z| length_l(&n, 0.5, z).unwrap(), 0.7, 1e-5);
        let an = dlength_dz(&n, 0.5, 0.7).unwrap();
        assert!(rel(an, fd) < 1e-5, "{an} vs {fd}");
        assert!(dlength_dz(&nl(6.0), 2.0, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn dmu_match_finite_differences() {
        let n = nl(5.0);
        for &(theta, z) in &[(2.0, 0.6), (0.5, 1.1), (1.0, 0.4)] {
            let fd = central(|z| mu1(&n, theta, z).unwrap(), z, 1e-5);
            let an = dmu1_dz(&n, theta, z).unwrap();
            assert!(rel(an, fd) < 1e-5, "theta={theta} z={z}: {an} vs {fd}");
        }
        let fd = central(|z| mu2(&n, z).unwrap(), 0.9, 1e-5);
        assert!(rel(dmu2_dz(&n, 0.9).unwrap(), fd) < 1e-6);
    }

    #[test]
    fn dmu1_at_theta_one_has_no_integral() {
        let n = nl(3.5);
        let z = 0.8;
        let expected = -(z * z * n.f_one() / n.f(z).sqrt()) / (SQRT_2 * n.f_one());
        assert!(rel(dmu1_dz(&n, 1.0, z).unwrap(), expected) < 1e-14);
    }

    #[test]
    fn dtheta1_matches_finite_difference() {
        let n = nl(4.0);
        for graph in [Graph::TGraph, Graph::Tadpole] {
            let fd = central(|z| mass_theta1(&n, graph, z).unwrap(), 0.6, 1e-5);
            let an = dmass_theta1_dz(&n, graph, 0.6).unwrap();
            assert!(rel(an, fd) < 1e-5, "{graph:?}: {an} vs {fd}");
        }
    }

    #[test]
    fn p6_t_graph_mass_derivative_signs() {
        let n = nl(6.0);
        assert!(dmass_theta1_dz(&n, Graph::TGraph, 1.1).unwrap() > 0.0);
        assert!(dmass_theta1_dz(&n, Graph::TGraph, 0.05).unwrap() < 0.0);
    }

    #[test]
    fn solve_z_round_trip_and_monotone() {
        let n = nl(3.0);
        let mut last = f64::INFINITY;
        for &ell in &[0.05, 0.3, 1.0, 2.5, 8.0] {
            for &theta in &[2.0, 0.5] {
                let z = solve_z(&n, theta, ell).unwrap();
                assert!(rel(length_l(&n, theta, z).unwrap(), ell) < 1e-8);
            }
            let z = solve_z(&n, 2.0, ell).unwrap();
            assert!(z < last);
            last = z;
        }
        assert!(solve_z(&n, 2.5, 1.0).is_err());
        assert!(solve_z(&n, 2.0, 0.0).is_err());
    }

    #[test]
    fn solve_z_tends_to_sqrt_e_near_p2() {
        let n = nl(2.001);
        let z = solve_z(&n, 2.0, 1.0).unwrap();
        assert!((z - 1f64.exp().sqrt()).abs() < 0.05, "{z}");
    }

    #[test]
    fn near_peak_branch_is_consistent() {
        let n = nl(4.0);
        let ell = 1.5e-3;
        let z = solve_z(&n, 2.0, ell).unwrap();
        assert!(n.peak() - z < NEAR_PEAK);
        assert!(rel(length_l(&n, 2.0, z).unwrap(), ell) < 1e-8);
    }

    #[test]
    fn assembled_record_invariants() {
        let params = ModelParams::new(4.0, Graph::TGraph).unwrap();
        let n = params.nonlinearity();
        let r = assemble(params, 2.0).unwrap();
        assert!((r.phase.ell * r.phase.ell - r.lambda).abs() < 1e-15);
        assert!(rel(r.theta, 2f64.powf(alpha(4.0)) * r.theta1) < 1e-15);
        assert!(rel(n.soliton(r.phase.y), r.phase.z) < 1e-10);
        assert_eq!(r.phase.level.value, -3.0 * n.f(r.phase.z));
        let h = 1e-4 * r.lambda;
        let fd = (mass_theta(&n, params, r.lambda + h).unwrap() - mass_theta(&n, params, r.lambda - h).unwrap())
            / (2.0 * h);
        assert!(rel(r.dtheta_dlambda, fd) < 1e-4);
    }

    #[test]
    fn p6_mass_turn_signs() {
        let t = ModelParams::new(6.0, Graph::TGraph).unwrap();
        assert!(assemble(t, 1e-2).unwrap().dtheta_dlambda < 0.0);
        assert!(assemble(t, 1e2).unwrap().dtheta_dlambda > 0.0);
        let tp = ModelParams::new(6.0, Graph::Tadpole).unwrap();
        assert!(assemble(tp, 1e-2).unwrap().dtheta_dlambda > 0.0);
        assert!(assemble(tp, 1e2).unwrap().dtheta_dlambda < 0.0);
    }

    #[test]
    fn raw_theta_masses_are_rejected() {
        let n = nl(4.0);
        assert!(mass_theta1(&n, Graph::RawTheta(1.5), 0.5).is_err());
        assert!(length_l(&n, 1.5, 0.5).is_ok());
    }
}
