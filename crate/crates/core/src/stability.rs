//! Vakhitov-Kolokolov classification, transition detection in `lambda`, the
//! `p = 6` turning point and the `(lambda, p)` phase diagram.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ground_state::{assemble_with, dmass_theta1_dz, length_l, GroundStateRecord};
use crate::model::{Graph, ModelParams, Nonlinearity};
use crate::quadrature::{QuadOptions, UpperEdge};
use crate::roots::{brent, RootOptions};

/// Relative half-width of the window around `lambda*` reported as
/// [`VerdictKind::NearDegenerate`].
pub const DELTA_STAR: f64 = 1e-3;
/// Relative sign floor, in units of `|Theta| / lambda`.
pub const EPS_SIGN: f64 = 1e-9;

/// Minimum run length (in scan points) for a sign regime to count.
pub const MIN_RUN: usize = 2;

pub const DEFAULT_LAMBDA_RANGE: (f64, f64) = (1e-4, 1e4);
pub const DEFAULT_SCAN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Stable,
    Unstable,
    NearDegenerate,
    Inconclusive,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::Stable => "stable",
            VerdictKind::Unstable => "unstable",
            VerdictKind::NearDegenerate => "near_degenerate",
            VerdictKind::Inconclusive => "inconclusive",
        }
    }

    pub fn rgb(&self) -> [u8; 3] {
        match self {
            VerdictKind::Stable => [0, 0, 255],
            VerdictKind::Unstable => [255, 255, 0],
            VerdictKind::NearDegenerate => [128, 128, 128],
            VerdictKind::Inconclusive => [255, 255, 255],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub kind: VerdictKind,
    pub dtheta_dlambda: f64,
    /// `(lambda - lambda*) / lambda*`.
    pub lambda_star_distance: f64,
}

/// `lambda* = L(p, 1)^2`.
pub fn lambda_star(nl: &Nonlinearity, theta: f64) -> Result<f64> {
    Ok(length_l(nl, theta, 1.0)?.powi(2))
}

/// Sign floor below which a derivative is not trusted. The power
/// `lambda^(alpha - 1)` in `dTheta/dlambda` is exact, so the noise of the
/// derivative is relative to `Theta / lambda` and has no absolute part.
pub fn eps_sign(record: &GroundStateRecord) -> f64 {
    EPS_SIGN * record.theta.abs() / record.lambda
}

/// Classify a ground state given a precomputed `lambda*`.
pub fn verdict_for(record: &GroundStateRecord, lambda_star: f64) -> StabilityVerdict {
    let d = record.dtheta_dlambda;
    let distance = (record.lambda - lambda_star) / lambda_star;
    let eps = eps_sign(record);
    let kind = if distance.abs() <= DELTA_STAR {
        VerdictKind::NearDegenerate
    } else if d > eps {
        VerdictKind::Stable
    } else if d < -eps {
        VerdictKind::Unstable
    } else {
        VerdictKind::Inconclusive
    };
    StabilityVerdict {
        kind,
        dtheta_dlambda: d,
        lambda_star_distance: distance,
    }
}

pub fn classify(params: ModelParams, lambda: f64) -> Result<StabilityVerdict> {
    let nl = params.nonlinearity();
    let star = lambda_star(&nl, params.theta())?;
    Ok(verdict_for(&assemble_with(&nl, params, lambda)?, star))
}

/// Record plus verdict, the unit reported by `state` queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub record: GroundStateRecord,
    pub lambda_star: f64,
    pub verdict: StabilityVerdict,
}

pub fn state_report(params: ModelParams, lambda: f64) -> Result<StateReport> {
    let nl = params.nonlinearity();
    let star = lambda_star(&nl, params.theta())?;
    let record = assemble_with(&nl, params, lambda)?;
    Ok(StateReport {
        record,
        lambda_star: star,
        verdict: verdict_for(&record, star),
    })
}

/// The `p = 6` sign change of `dTheta_1/dz`, and the frequency it maps to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub graph: Graph,
    pub z0: f64,
    pub lambda0: f64,
    /// Sign of `dTheta/dlambda` below `lambda0`.
    pub sign_before: i8,
    /// Sign changes seen on the z scan; exactly one is expected.
    pub changes_on_scan: usize,
}

pub fn find_p6_turning_point(graph: Graph) -> Result<TurningPoint> {
    let nl = Nonlinearity::new(6.0)?;
    let peak = nl.peak();
    let n = 400;
    let (lo, hi) = (1e-3, peak - 1e-3);
    let zs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut signs = Vec::with_capacity(n);
    for &z in &zs {
        signs.push(dmass_theta1_dz(&nl, graph, z)?.signum());
    }
    let flips: Vec<usize> = (1..n).filter(|&i| signs[i] != signs[i - 1]).collect();
    let Some(&first) = flips.first() else {
        return Err(Error::NoSignChange(format!(
            "dTheta_1/dz keeps sign {} on [{lo}, {hi}] for {graph:?}",
            signs[0]
        )));
    };
    let z0 = brent(
        |z| dmass_theta1_dz(&nl, graph, z),
        zs[first - 1],
        zs[first],
        RootOptions {
            xtol: 1e-14,
            ..RootOptions::default()
        },
    )?;
    let lambda0 = length_l(&nl, graph.theta(), z0)?.powi(2);
    // large z is small lambda, and dTheta/dlambda has the sign of -dTheta_1/dz at p = 6
    let sign_before = -(signs[n - 1] as i8);
    Ok(TurningPoint {
        graph,
        z0,
        lambda0,
        sign_before,
        changes_on_scan: flips.len(),
    })
}

/// `F(z) = int_z^T (1 - t^2)/(1 + t^2)^2 / sqrt(f(t) + 3 f(z)) dt` at `p = 6`
/// on the T-graph.
pub fn eval_f_aux(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return domain(format!("F is defined on (0, 1), got {z}"));
    }
    let nl = Nonlinearity::new(6.0)?;
    UpperEdge::new(&nl, 2.0, z)?.integrate(
        |t| {
            let s = 1.0 + t * t;
            (1.0 - t * t) / (s * s)
        },
        QuadOptions::default(),
    )
}

/// `G(z) = 6 z^2 sqrt(f(z)) / f'(z)` at `p = 6`.
pub fn eval_g_aux(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return domain(format!("G is defined on (0, 1), got {z}"));
    }
    let nl = Nonlinearity::new(6.0)?;
    Ok(6.0 * z * z * nl.f(z).sqrt() / nl.df(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `dTheta/dlambda` turns positive.
    ToStable,
    /// `dTheta/dlambda` turns negative.
    ToUnstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    pub lambda: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Monotone,
    SingleSwitch,
    #[serde(rename = "SUS")]
    Sus,
    #[serde(rename = "USU")]
    Usu,
    Other,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::Monotone => "monotone",
            Pattern::SingleSwitch => "single-switch",
            Pattern::Sus => "SUS",
            Pattern::Usu => "USU",
            Pattern::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub p: f64,
    pub graph: Graph,
    pub lambda_range: (f64, f64),
    pub n_scan: usize,
    pub sign_changes: Vec<SignChange>,
    pub pattern: Pattern,
    /// Signs of the retained regimes, in increasing `lambda`.
    pub regimes: Vec<i8>,
    /// Scan points that fell in the window around `lambda*`.
    pub near_degenerate: Vec<f64>,
    /// Scan points whose evaluation failed or fell below the sign floor.
    pub inconclusive: Vec<f64>,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn detect_transitions(params: ModelParams, lambda_range: (f64, f64), n_scan: usize) -> Result<TransitionReport> {
    let (lo, hi) = lambda_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return domain(format!("lambda range must satisfy 0 < lo < hi, got ({lo}, {hi})"));
    }
    if n_scan < 16 {
        return domain(format!("n_scan must be at least 16, got {n_scan}"));
    }
    let nl = params.nonlinearity();
    let star = lambda_star(&nl, params.theta())?;
    let grid = log_grid(lo, hi, n_scan);
    let mut near_degenerate = Vec::new();
    let mut inconclusive = Vec::new();
    // (sign, index) of decisive scan points
    let mut decisive: Vec<(i8, usize)> = Vec::new();
    for (i, &lambda) in grid.iter().enumerate() {
        match assemble_with(&nl, params, lambda) {
            Ok(record) => match verdict_for(&record, star).kind {
                VerdictKind::Stable => decisive.push((1, i)),
                VerdictKind::Unstable => decisive.push((-1, i)),
                VerdictKind::NearDegenerate => near_degenerate.push(lambda),
                VerdictKind::Inconclusive => inconclusive.push(lambda),
            },
            Err(_) => inconclusive.push(lambda),
        }
    }

    // runs of equal sign: (sign, first index, last index, length)
    let mut runs: Vec<(i8, usize, usize, usize)> = Vec::new();
    for &(s, i) in &decisive {
        match runs.last_mut() {
            Some(run) if run.0 == s => {
                run.2 = i;
                run.3 += 1;
            }
            _ => runs.push((s, i, i, 1)),
        }
    }
    let mut kept: Vec<(i8, usize, usize)> = Vec::new();
    for &(s, first, last, len) in &runs {
        if len < MIN_RUN {
            continue;
        }
        match kept.last_mut() {
            Some(run) if run.0 == s => run.2 = last,
            _ => kept.push((s, first, last)),
        }
    }

    let mut sign_changes = Vec::new();
    for pair in kept.windows(2) {
        let (s0, _, a) = pair[0];
        let (_, b, _) = pair[1];
        let lambda = refine_sign_change(&nl, params, grid[a], grid[b], s0)?;
        sign_changes.push(SignChange {
            lambda,
            direction: if s0 < 0 {
                Direction::ToStable
            } else {
                Direction::ToUnstable
            },
        });
    }
    let regimes: Vec<i8> = kept.iter().map(|r| r.0).collect();
    let pattern = match regimes.as_slice() {
        [_] => Pattern::Monotone,
        [_, _] => Pattern::SingleSwitch,
        [1, -1, 1] => Pattern::Sus,
        [-1, 1, -1] => Pattern::Usu,
        _ => Pattern::Other,
    };
    Ok(TransitionReport {
        p: params.p(),
        graph: params.graph(),
        lambda_range,
        n_scan,
        sign_changes,
        pattern,
        regimes,
        near_degenerate,
        inconclusive,
    })
}

/// Bisection in `ln lambda` on the sign of `dTheta/dlambda`, to `1e-6`
/// relative width or 60 halvings.
fn refine_sign_change(nl: &Nonlinearity, params: ModelParams, lo: f64, hi: f64, sign_lo: i8) -> Result<f64> {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..60 {
        if b - a < 1e-6 {
            break;
        }
        let m = 0.5 * (a + b);
        let d = assemble_with(nl, params, m.exp())?.dtheta_dlambda;
        if (d > 0.0) == (sign_lo > 0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub p: f64,
    pub lambda: f64,
    pub kind: VerdictKind,
    pub dtheta_dlambda: f64,
    pub lambda_star: f64,
}

/// Row-major grid of verdicts: row `i` is `p_grid[i]`, column `j` is
/// `lambda_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub graph: Graph,
    pub lambda_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub cells: Vec<DiagramCell>,
}

fn diagram_row(graph: Graph, p: f64, lambda_grid: &[f64]) -> Vec<DiagramCell> {
    let failed = |lambda: f64, star: f64| DiagramCell {
        p,
        lambda,
        kind: VerdictKind::Inconclusive,
        dtheta_dlambda: f64::NAN,
        lambda_star: star,
    };
    let setup = ModelParams::new(p, graph).and_then(|params| {
        let nl = params.nonlinearity();
        let star = lambda_star(&nl, params.theta())?;
        Ok((params, nl, star))
    });
    let Ok((params, nl, star)) = setup else {
        return lambda_grid.iter().map(|&l| failed(l, f64::NAN)).collect();
    };
    lambda_grid
        .iter()
        .map(|&lambda| match assemble_with(&nl, params, lambda) {
            Ok(record) => {
                let v = verdict_for(&record, star);
                DiagramCell {
                    p,
                    lambda,
                    kind: v.kind,
                    dtheta_dlambda: v.dtheta_dlambda,
                    lambda_star: star,
                }
            }
            Err(_) => failed(lambda, star),
        })
        .collect()
}

/// Evaluate the verdict at every grid point. `workers = Some(n)` bounds the
/// thread pool; the result does not depend on `n`.
pub fn phase_diagram(graph: Graph, lambda_grid: &[f64], p_grid: &[f64], workers: Option<usize>) -> Result<PhaseDiagram> {
    if lambda_grid.is_empty() || p_grid.is_empty() {
        return domain("phase diagram grids must be nonempty");
    }
    if let Some(&p) = p_grid.iter().find(|&&p| !(p > 2.0)) {
        return domain(format!("every p must exceed 2, got {p}"));
    }
    let rows = compute_rows(graph, lambda_grid, p_grid, workers);
    Ok(PhaseDiagram {
        graph,
        lambda_grid: lambda_grid.to_vec(),
        p_grid: p_grid.to_vec(),
        cells: rows.into_iter().flatten().collect(),
    })
}

#[cfg(feature = "parallel")]
fn compute_rows(graph: Graph, lambda_grid: &[f64], p_grid: &[f64], workers: Option<usize>) -> Vec<Vec<DiagramCell>> {
    use rayon::prelude::*;
    let run = || {
        p_grid
            .par_iter()
            .map(|&p| diagram_row(graph, p, lambda_grid))
            .collect::<Vec<_>>()
    };
    match workers {
        Some(1) => p_grid.iter().map(|&p| diagram_row(graph, p, lambda_grid)).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn compute_rows(graph: Graph, lambda_grid: &[f64], p_grid: &[f64], _workers: Option<usize>) -> Vec<Vec<DiagramCell>> {
    p_grid.iter().map(|&p| diagram_row(graph, p, lambda_grid)).collect()
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    log_grid(lo, hi, n)
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl PhaseDiagram {
    pub fn cell(&self, row: usize, col: usize) -> &DiagramCell {
        &self.cells[row * self.lambda_grid.len() + col]
    }

    pub fn row(&self, row: usize) -> &[DiagramCell] {
        let n = self.lambda_grid.len();
        &self.cells[row * n..(row + 1) * n]
    }

    /// CSV with `# `-prefixed comment lines first.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "p,lambda,verdict,dtheta_dlambda,lambda_star")?;
        for c in &self.cells {
            writeln!(
                out,
                "{:.16e},{:.16e},{},{:.16e},{:.16e}",
                c.p,
                c.lambda,
                c.kind.as_str(),
                c.dtheta_dlambda,
                c.lambda_star
            )?;
        }
        Ok(())
    }

    /// Binary PPM (P6): `lambda` grows to the right, `p` grows upward.
    /// Comment lines follow the magic number, as the format requires.
    pub fn write_ppm<W: Write>(&self, mut out: W, comments: &[String]) -> io::Result<()> {
        let (w, h) = (self.lambda_grid.len(), self.p_grid.len());
        writeln!(out, "P6")?;
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{w} {h}")?;
        writeln!(out, "255")?;
        out.write_all(&self.rgb_rows())?;
        Ok(())
    }

    /// Packed RGB bytes, top row first (largest `p`).
    pub fn rgb_rows(&self) -> Vec<u8> {
        let (w, h) = (self.lambda_grid.len(), self.p_grid.len());
        let mut bytes = Vec::with_capacity(3 * w * h);
        for row in (0..h).rev() {
            for c in self.row(row) {
                bytes.extend_from_slice(&c.kind.rgb());
            }
        }
        bytes
    }

    /// Number of color changes along row `row`, ignoring gray and white cells.
    pub fn row_boundaries(&self, row: usize) -> usize {
        let mut last = None;
        let mut changes = 0;
        for c in self.row(row) {
            if matches!(c.kind, VerdictKind::Stable | VerdictKind::Unstable) {
                if last.is_some_and(|k| k != c.kind) {
                    changes += 1;
                }
                last = Some(c.kind);
            }
        }
        changes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_star_limits() {
        let star50 = lambda_star(&Nonlinearity::new(50.0).unwrap(), 2.0).unwrap();
        assert!(star50 < 0.5, "{star50}");
        let star2 = lambda_star(&Nonlinearity::new(2.01).unwrap(), 2.0).unwrap();
        assert!(star2 > 10.0, "{star2}");
    }

    #[test]
    fn near_degenerate_window() {
        let params = ModelParams::new(4.0, Graph::TGraph).unwrap();
        let star = lambda_star(&params.nonlinearity(), 2.0).unwrap();
        let v = classify(params, star * (1.0 + 5e-4)).unwrap();
        assert_eq!(v.kind, VerdictKind::NearDegenerate);
        assert!((v.lambda_star_distance - 5e-4).abs() < 1e-9);
    }

    #[test]
    fn p4_is_stable_at_both_ends() {
        for graph in [Graph::TGraph, Graph::Tadpole] {
            let params = ModelParams::new(4.0, graph).unwrap();
            assert_eq!(classify(params, 1e-3).unwrap().kind, VerdictKind::Stable);
            assert_eq!(classify(params, 1e3).unwrap().kind, VerdictKind::Stable);
        }
    }

    #[test]
    fn p6_turning_points() {
        let t = find_p6_turning_point(Graph::TGraph).unwrap();
        assert!(t.z0 > 0.0 && t.z0 < 1.0);
        assert_eq!(t.sign_before, -1);
        assert_eq!(t.changes_on_scan, 1);
        let tp = find_p6_turning_point(Graph::Tadpole).unwrap();
        assert_eq!(tp.sign_before, 1);
        assert_eq!(tp.changes_on_scan, 1);
    }

    #[test]
    fn f_and_g_monotone_around_half() {
        let f: Vec<f64> = [0.4, 0.5, 0.6].iter().map(|&z| eval_f_aux(z).unwrap()).collect();
        let g: Vec<f64> = [0.4, 0.5, 0.6].iter().map(|&z| eval_g_aux(z).unwrap()).collect();
        assert!(f[0] > f[1] && f[1] > f[2]);
        assert!(g[0] < g[1] && g[1] < g[2]);
        assert!(eval_g_aux(1e-4).unwrap() < 1e-6);
    }

    #[test]
    fn turning_point_balances_f_and_g() {
        let t = find_p6_turning_point(Graph::TGraph).unwrap();
        let (f, g) = (eval_f_aux(t.z0).unwrap(), eval_g_aux(t.z0).unwrap());
        assert!((f - g).abs() < 1e-8 * (1.0 + f.abs()), "{f} vs {g}");
    }

    #[test]
    fn csv_and_ppm_shapes() {
        let d = phase_diagram(
            Graph::TGraph,
            &log_spaced(1e-2, 1e2, 4),
            &lin_spaced(3.0, 8.0, 3),
            Some(1),
        )
        .unwrap();
        let mut csv = Vec::new();
        d.write_csv(&mut csv, &["hello".to_string()]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("# hello\np,lambda,verdict,dtheta_dlambda,lambda_star\n"));
        assert_eq!(text.lines().count(), 2 + 12);
        let mut ppm = Vec::new();
        d.write_ppm(&mut ppm, &["c".to_string()]).unwrap();
        assert!(ppm.starts_with(b"P6\n# c\n4 3\n255\n"));
        assert_eq!(ppm.len(), b"P6\n# c\n4 3\n255\n".len() + 36);
        // top raster row is p = 8, unstable at the left edge
        let header = b"P6\n# c\n4 3\n255\n".len();
        assert_eq!(&ppm[header..header + 3], &[255, 255, 0]);
    }

    #[test]
    fn diagram_is_independent_of_workers() {
        let lg = log_spaced(1e-2, 1e2, 5);
        let pg = lin_spaced(3.0, 9.0, 4);
        let a = phase_diagram(Graph::Tadpole, &lg, &pg, Some(1)).unwrap();
        let b = phase_diagram(Graph::Tadpole, &lg, &pg, Some(3)).unwrap();
        assert_eq!(a, b);
    }
}
