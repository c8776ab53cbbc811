//! Independent reference computations: direct integration of
//! `-u'' + u = u^(p-1)` along the compact edge with an embedded Dormand-Prince
//! 5(4) pair, direct quadrature of the shifted soliton on half-lines, and
//! reconstruction of the full profile on the graph.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ground_state::solve_z;
use crate::model::{Graph, ModelParams, Nonlinearity};
use crate::quadrature::{gauss_kronrod, QuadOptions};

pub const DEFAULT_STEP_TOL: f64 = 1e-12;

type State = [f64; 3];

/// `(u, u', m)` with `m' = u^2`.
fn rhs(p: f64, y: &State) -> State {
    let u = y[0];
    let pow = if u > 0.0 {
        ((p - 1.0) * u.ln()).exp()
    } else {
        -((p - 1.0) * (-u).ln()).exp()
    };
    [y[1], u - pow, u * u]
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step: the fifth-order update and the error estimate.
fn dopri_step(p: f64, y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; 3]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for i in 0..3 {
                ys[i] += h * A[s][j] * kj[i];
            }
        }
        k[s] = rhs(p, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; 3];
    for s in 0..7 {
        for i in 0..3 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

fn error_norm(err: &State, y0: &State, y1: &State, tol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        let scale = tol * (1.0 + y0[i].abs().max(y1[i].abs()));
        acc += (err[i] / scale).powi(2);
    }
    (acc / 3.0).sqrt()
}

/// Adaptive stepper that carries its step-size guess between calls.
struct Integrator {
    p: f64,
    tol: f64,
    h: f64,
}

impl Integrator {
    fn new(p: f64, tol: f64) -> Self {
        Integrator { p, tol, h: 1e-3 }
    }

    /// Attempt one adaptive step of at most `h_max`; returns the accepted
    /// step size and new state.
    fn step(&mut self, y: &State, h_max: f64) -> Result<(f64, State)> {
        let mut h = self.h.min(h_max);
        for _ in 0..200 {
            let (y1, err) = dopri_step(self.p, y, h);
            let e = error_norm(&err, y, &y1, self.tol);
            if e <= 1.0 && y1.iter().all(|v| v.is_finite()) {
                let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = (h * grow).max(1e-14);
                return Ok((h, y1));
            }
            let shrink = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= shrink;
        }
        Err(Error::NonConvergence("step size collapsed in the ODE integrator".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotTrajectory {
    pub p: f64,
    pub theta: f64,
    pub z: f64,
    /// `(x, u, u')` at every accepted step, ending at the turning point.
    pub samples: Vec<(f64, f64, f64)>,
    pub ell_hit: f64,
    pub mass_edge: f64,
    pub hamiltonian_drift: f64,
}

/// Integrate from `u(0) = z`, `u'(0) = theta sqrt(2 f(z))` until `u' = 0`.
pub fn shoot_compact_edge(p: f64, theta: f64, z: f64, step_tol: f64) -> Result<ShotTrajectory> {
    let nl = Nonlinearity::new(p)?;
    if !(z > 0.0 && z < nl.peak()) {
        return domain(format!("z must lie in (0, {}), got {z}", nl.peak()));
    }
    if !(theta > 0.0) {
        return domain(format!("theta must be positive, got {theta}"));
    }
    if !(step_tol > 0.0) {
        return domain(format!("step_tol must be positive, got {step_tol}"));
    }
    let level = (1.0 - theta * theta) * nl.f(z);
    let hamiltonian = |y: &State| -0.5 * y[1] * y[1] + nl.f(y[0].max(0.0)) - level;
    let x_max = 10.0 * (1.0 + z.ln().abs());
    let mut y: State = [z, theta * (2.0 * nl.f(z)).sqrt(), 0.0];
    let mut x = 0.0;
    let mut samples = vec![(x, y[0], y[1])];
    let mut drift: f64 = 0.0;
    let mut integ = Integrator::new(p, step_tol);
    while x < x_max {
        let (h, y1) = integ.step(&y, x_max - x)?;
        if y1[1] <= 0.0 {
            // bisect the step length on the sign of u'
            let (mut lo, mut hi) = (0.0, h);
            let mut y_hi = y1;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (ym, _) = dopri_step(p, &y, mid);
                if ym[1] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    y_hi = ym;
                }
            }
            let (y_end, _) = dopri_step(p, &y, 0.5 * (lo + hi));
            let y_end = if y_end[1].abs() <= y_hi[1].abs() { y_end } else { y_hi };
            x += 0.5 * (lo + hi);
            drift = drift.max(hamiltonian(&y_end).abs());
            samples.push((x, y_end[0], y_end[1]));
            return Ok(ShotTrajectory {
                p,
                theta,
                z,
                samples,
                ell_hit: x,
                mass_edge: y_end[2],
                hamiltonian_drift: drift,
            });
        }
        x += h;
        y = y1;
        drift = drift.max(hamiltonian(&y).abs());
        samples.push((x, y[0], y[1]));
    }
    Err(Error::EventNotFound(format!(
        "u' stayed positive up to x = {x_max} (p = {p}, theta = {theta}, z = {z})"
    )))
}

/// `int_0^inf phi(x + y)^2 dx`, truncated where the `sech` tail bound
/// drops below `1e-13`.
pub fn halfline_mass(nl: &Nonlinearity, y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return domain(format!("shift y must be nonnegative, got {y}"));
    }
    let peak = nl.peak();
    let k = 2.0 / (nl.p() - 2.0);
    // phi(x)^2 <= peak^2 4^k e^(-2x)
    let log_bound = 2.0 * peak.ln() + k * 4f64.ln() - 2f64.ln();
    let x_end = (0.5 * (log_bound + 13.0 * 10f64.ln()) - y).max(1.0);
    let opts = QuadOptions::with_tol(1e-13);
    let body = |x: f64| nl.soliton(x + y).powi(2);
    // split so the bulk near the vertex is resolved on its own
    let knee = x_end.min(4.0);
    let mut total = gauss_kronrod(body, 0.0, knee, opts)?.value;
    if x_end > knee {
        total += gauss_kronrod(body, knee, x_end, opts)?.value;
    }
    Ok(total)
}

/// `||phi||^2_{L^2(R)}`.
pub fn soliton_mass(nl: &Nonlinearity) -> Result<f64> {
    Ok(2.0 * halfline_mass(nl, 0.0)?)
}

/// Independent `Theta_1` from a shot compact edge plus half-line quadrature.
pub fn shot_theta1(graph: Graph, p: f64, z: f64, step_tol: f64) -> Result<f64> {
    let nl = Nonlinearity::new(p)?;
    let shot = shoot_compact_edge(p, graph.theta(), z, step_tol)?;
    let y = nl.soliton_inverse(z)?;
    let tail = halfline_mass(&nl, y)?;
    match graph {
        Graph::TGraph => Ok(shot.mass_edge + 2.0 * tail),
        Graph::Tadpole => Ok(2.0 * shot.mass_edge + tail),
        Graph::RawTheta(t) => domain(format!("no mass decomposition for theta = {t}")),
    }
}

/// Integrate the compact edge and report the state at each of `points`
/// (increasing, starting at 0).
fn sample_edge(p: f64, y0: State, points: &[f64], tol: f64) -> Result<Vec<State>> {
    let mut out = Vec::with_capacity(points.len());
    let mut integ = Integrator::new(p, tol);
    let mut x = 0.0;
    let mut y = y0;
    for &target in points {
        while x < target {
            let remaining = target - x;
            let (h, y1) = integ.step(&y, remaining)?;
            x = if h >= remaining { target } else { x + h };
            y = y1;
        }
        out.push(y);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSamples {
    pub name: String,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub params: ModelParams,
    pub lambda: f64,
    pub z: f64,
    pub y: f64,
    pub edges: Vec<EdgeSamples>,
    /// Sum of outgoing derivatives at the vertex.
    pub flux_residual: f64,
    /// Largest difference between edge values at the vertex.
    pub vertex_mismatch: f64,
}

impl Profile {
    pub fn edge(&self, name: &str) -> Option<&EdgeSamples> {
        self.edges.iter().find(|e| e.name == name)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "edge,x,u")?;
        for e in &self.edges {
            for (x, u) in e.x.iter().zip(&e.u) {
                writeln!(out, "{},{:.16e},{:.16e}", e.name, x, u)?;
            }
        }
        Ok(())
    }
}

/// Sample the ground state at frequency `lambda` on every edge, `n` points
/// per edge. Half-lines are cut at ten decay lengths past the vertex.
pub fn reconstruct_profile(params: ModelParams, lambda: f64, n: usize) -> Result<Profile> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    if n < 2 {
        return domain("need at least two samples per edge");
    }
    let graph = params.graph();
    if matches!(graph, Graph::RawTheta(_)) {
        return domain("profiles are built for the T-graph and tadpole only");
    }
    let p = params.p();
    let theta = params.theta();
    let nl = params.nonlinearity();
    let ell = lambda.sqrt();
    let z = solve_z(&nl, theta, ell)?;
    let y = nl.soliton_inverse(z)?;
    let su = lambda.powf(1.0 / (p - 2.0));
    let sx = lambda.sqrt();

    let v0 = theta * (2.0 * nl.f(z)).sqrt();
    let unit_points: Vec<f64> = (0..n).map(|i| ell * i as f64 / (n - 1) as f64).collect();
    let states = sample_edge(p, [z, v0, 0.0], &unit_points, DEFAULT_STEP_TOL)?;
    let edge_x: Vec<f64> = unit_points.iter().map(|x| x / sx).collect();
    let edge_u: Vec<f64> = states.iter().map(|s| su * s[0]).collect();

    let span = 10.0;
    let half_x: Vec<f64> = (0..n).map(|i| span * i as f64 / (n - 1) as f64 / sx).collect();
    let half_u: Vec<f64> = half_x.iter().map(|&x| su * nl.soliton(sx * x + y)).collect();
    let half_slope = su * sx * nl.soliton_deriv(y);
    let edge_slope = su * sx * v0;

    let mut edges = Vec::new();
    let flux = match graph {
        Graph::TGraph => {
            edges.push(EdgeSamples {
                name: "h1".into(),
                x: half_x.clone(),
                u: half_u.clone(),
            });
            edges.push(EdgeSamples {
                name: "h2".into(),
                x: half_x,
                u: half_u,
            });
            edges.push(EdgeSamples {
                name: "e1".into(),
                x: edge_x,
                u: edge_u,
            });
            2.0 * half_slope + edge_slope
        }
        _ => {
            edges.push(EdgeSamples {
                name: "h1".into(),
                x: half_x,
                u: half_u,
            });
            // even reflection about the loop midpoint
            let loop_len = 2.0 * ell / sx;
            let mut lx = edge_x.clone();
            let mut lu = edge_u.clone();
            for i in (0..n - 1).rev() {
                lx.push(loop_len - edge_x[i]);
                lu.push(edge_u[i]);
            }
            edges.push(EdgeSamples {
                name: "loop".into(),
                x: lx,
                u: lu,
            });
            half_slope + 2.0 * edge_slope
        }
    };
    let vertex = su * z;
    let mut mismatch: f64 = 0.0;
    for e in &edges {
        mismatch = mismatch.max((e.u[0] - vertex).abs());
        if e.name == "loop" {
            mismatch = mismatch.max((e.u[e.u.len() - 1] - vertex).abs());
        }
    }
    Ok(Profile {
        params,
        lambda,
        z,
        y,
        edges,
        flux_residual: flux,
        vertex_mismatch: mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{length_l, mass_theta1};
    use crate::model::Branch;

    #[test]
    fn shot_length_matches_quadrature() {
        let nl = Nonlinearity::new(3.0).unwrap();
        let shot = shoot_compact_edge(3.0, 2.0, 0.5, DEFAULT_STEP_TOL).unwrap();
        let l = length_l(&nl, 2.0, 0.5).unwrap();
        assert!((shot.ell_hit - l).abs() < 1e-7 * l, "{} vs {l}", shot.ell_hit);
        assert!(shot.hamiltonian_drift < 1e-9);
        let t = nl.branch_inverse(Branch::Upper, -3.0 * nl.f(0.5)).unwrap();
        let (_, u_end, _) = *shot.samples.last().unwrap();
        assert!((u_end - t).abs() < 1e-8);
    }

    #[test]
    fn shot_is_increasing() {
        let shot = shoot_compact_edge(6.0, 0.5, 0.9, DEFAULT_STEP_TOL).unwrap();
        assert!(shot.samples.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn tadpole_mass_from_shot() {
        let nl = Nonlinearity::new(6.0).unwrap();
        let shot = shot_theta1(Graph::Tadpole, 6.0, 0.9, DEFAULT_STEP_TOL).unwrap();
        let closed = mass_theta1(&nl, Graph::Tadpole, 0.9).unwrap();
        assert!((shot - closed).abs() < 1e-6 * closed);
    }

    #[test]
    fn halfline_mass_matches_soliton_tail() {
        let nl = Nonlinearity::new(4.5).unwrap();
        for &y in &[0.1, 0.8, 3.0] {
            let z = nl.soliton(y);
            let tail = crate::quadrature::integrate_soliton_tail(&nl, z, 1e-12).unwrap();
            let direct = halfline_mass(&nl, y).unwrap();
            // t = phi(x + y), dx = -dt / sqrt(2 f(t)) maps one onto the other
            assert!((direct - tail).abs() < 1e-8 * direct, "{direct} vs {tail}");
        }
        assert!(halfline_mass(&nl, 60.0).unwrap() < 1e-40);
    }

    #[test]
    fn event_not_found_is_reported() {
        assert!(matches!(
            shoot_compact_edge(4.0, 2.0, 0.5, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn profile_vertex_conditions() {
        for graph in [Graph::TGraph, Graph::Tadpole] {
            let params = ModelParams::new(5.0, graph).unwrap();
            let prof = reconstruct_profile(params, 2.0, 64).unwrap();
            assert!(prof.vertex_mismatch < 1e-8);
            assert!(prof.flux_residual.abs() < 1e-7, "{graph:?}: {}", prof.flux_residual);
        }
        let prof = reconstruct_profile(ModelParams::new(5.0, Graph::TGraph).unwrap(), 2.0, 64).unwrap();
        let e1 = prof.edge("e1").unwrap();
        let max_all = prof
            .edges
            .iter()
            .flat_map(|e| e.u.iter().copied())
            .fold(f64::MIN, f64::max);
        assert_eq!(*e1.u.last().unwrap(), max_all);
    }
}
