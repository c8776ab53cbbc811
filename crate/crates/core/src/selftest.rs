//! A quick property suite that exercises every module. Each check is cheap
//! enough that the whole run finishes in a few seconds in release builds.

use serde::Serialize;

use crate::asymptotics::{check_lambda_asymptotes, check_p2_regime, LambdaSide};
use crate::error::Result;
use crate::ground_state::{dmass_theta1_dz, length_l, mass_theta1, solve_z};
use crate::model::{Branch, Graph, ModelParams, Nonlinearity};
use crate::oracle::{shoot_compact_edge, shot_theta1, DEFAULT_STEP_TOL};
use crate::stability::{classify, detect_transitions, find_p6_turning_point, Pattern, VerdictKind};

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn run_one(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> SelfCheck {
    match body() {
        Ok((pass, detail)) => SelfCheck { name, pass, detail },
        Err(e) => SelfCheck {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run_all() -> Vec<SelfCheck> {
    vec![
        run_one("branch inverse round trip", || {
            let mut worst = 0.0f64;
            for p in [2.5, 3.0, 6.0, 10.0] {
                let nl = Nonlinearity::new(p)?;
                for t in [0.1, 0.5, 0.9, 1.2, 0.99 * nl.peak()] {
                    let branch = if t < 1.0 { Branch::Lower } else { Branch::Upper };
                    let back = nl.branch_inverse(branch, nl.f(t))?;
                    worst = worst.max((back - t).abs());
                }
            }
            Ok((worst < 1e-9, format!("max |t - f^-1(f(t))| = {worst:.2e}")))
        }),
        run_one("soliton first integral", || {
            let mut worst = 0.0f64;
            for p in [3.0, 6.0, 8.0] {
                let nl = Nonlinearity::new(p)?;
                for x in [0.0, 0.3, 1.0, 3.0] {
                    let (u, du) = (nl.soliton(x), nl.soliton_deriv(x));
                    worst = worst.max((-du * du / 2.0 + nl.f(u)).abs());
                }
            }
            Ok((worst < 1e-10, format!("max |-phi'^2/2 + f(phi)| = {worst:.2e}")))
        }),
        run_one("shooting length matches closed form", || {
            let mut worst = 0.0f64;
            for (p, theta) in [(3.0, 2.0), (6.0, 0.5), (8.0, 2.0)] {
                let nl = Nonlinearity::new(p)?;
                for frac in [0.2, 0.6] {
                    let z = frac * nl.peak();
                    let shot = shoot_compact_edge(p, theta, z, DEFAULT_STEP_TOL)?;
                    worst = worst.max(rel(shot.ell_hit, length_l(&nl, theta, z)?));
                }
            }
            Ok((worst < 1e-7, format!("max relative gap = {worst:.2e}")))
        }),
        run_one("shot mass matches closed form", || {
            let nl = Nonlinearity::new(6.0)?;
            let shot = shot_theta1(Graph::Tadpole, 6.0, 0.9, DEFAULT_STEP_TOL)?;
            let gap = rel(shot, mass_theta1(&nl, Graph::Tadpole, 0.9)?);
            Ok((gap < 1e-6, format!("relative gap = {gap:.2e}")))
        }),
        run_one("mass derivative by finite differences", || {
            let mut worst = 0.0f64;
            for graph in [Graph::TGraph, Graph::Tadpole] {
                let nl = Nonlinearity::new(4.0)?;
                for z in [0.3, 0.8, 1.1] {
                    let h = 1e-5 * z;
                    let fd = (mass_theta1(&nl, graph, z + h)? - mass_theta1(&nl, graph, z - h)?) / (2.0 * h);
                    worst = worst.max(rel(dmass_theta1_dz(&nl, graph, z)?, fd));
                }
            }
            Ok((worst < 1e-5, format!("max relative gap = {worst:.2e}")))
        }),
        run_one("z(ell) inverts L", || {
            let nl = Nonlinearity::new(5.0)?;
            let mut worst = 0.0f64;
            for ell in [0.05, 0.5, 2.0, 8.0] {
                let z = solve_z(&nl, 2.0, ell)?;
                worst = worst.max(rel(length_l(&nl, 2.0, z)?, ell));
            }
            Ok((worst < 1e-8, format!("max relative gap = {worst:.2e}")))
        }),
        run_one("p=6 turning points", || {
            let t = find_p6_turning_point(Graph::TGraph)?;
            let d = find_p6_turning_point(Graph::Tadpole)?;
            let ok = t.sign_before < 0 && d.sign_before > 0 && t.z0 > 0.0 && t.z0 < 1.0;
            Ok((ok, format!("T-graph z0 = {:.6}, tadpole z0 = {:.6}", t.z0, d.z0)))
        }),
        run_one("USU transition for the T-graph at p=6.05", || {
            let r = detect_transitions(ModelParams::new(6.05, Graph::TGraph)?, (1e-4, 1e4), 64)?;
            Ok((r.pattern == Pattern::Usu, format!("pattern {}", r.pattern.as_str())))
        }),
        run_one("corner verdicts", || {
            let mut bad = Vec::new();
            for p in [3.0, 8.0] {
                for lambda in [1e-3, 1e3] {
                    let want = if p < 6.0 { VerdictKind::Stable } else { VerdictKind::Unstable };
                    let got = classify(ModelParams::new(p, Graph::TGraph)?, lambda)?.kind;
                    if got != want {
                        bad.push(format!("p={p} lambda={lambda}: {}", got.as_str()));
                    }
                }
            }
            Ok((bad.is_empty(), if bad.is_empty() { "all as expected".into() } else { bad.join("; ") }))
        }),
        run_one("lambda asymptotes at p=4", || {
            let c = check_lambda_asymptotes(ModelParams::new(4.0, Graph::TGraph)?, LambdaSide::Small)?;
            Ok((c.pass, format!("{} assertions", c.assertions.len())))
        }),
        run_one("p -> 2 regime", || {
            let c = check_p2_regime(Graph::TGraph, (0.5, 2.0))?;
            let failed = c.assertions.iter().filter(|a| !a.pass).count();
            Ok((c.pass, format!("{failed} failed of {}", c.assertions.len())))
        }),
    ]
}
