use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nlsgraph::asymptotics::{check_lambda_asymptotes, check_p2_regime, check_pinfty_regime, LambdaSide};
use nlsgraph::ground_state::{length_l, mass_theta1};
use nlsgraph::model::{TOL_ROOT, TOL_SERIES};
use nlsgraph::oracle::{reconstruct_profile, shoot_compact_edge, shot_theta1};
use nlsgraph::quadrature::DEFAULT_TOL;
use nlsgraph::stability::{
    detect_transitions, lin_spaced, log_spaced, phase_diagram, state_report, VerdictKind, DELTA_STAR, EPS_SIGN,
};
use nlsgraph::{ground_state, selftest, ModelParams, Nonlinearity};
use serde::{Deserialize, Serialize};

use crate::{
    AsymptoticArgs, Command, DiagramArgs, OracleArgs, ProfileArgs, RegimeArg, SelftestArgs, StateArgs,
    TransitionArgs,
};

/// `println!` that stops quietly when the reader has gone away.
macro_rules! outln {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout(), $($t)*);
    }};
}

pub enum Failure {
    Usage(String),
    Compute(String),
}

impl From<nlsgraph::Error> for Failure {
    fn from(e: nlsgraph::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(format!("i/o: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub quadrature: f64,
    pub root: f64,
    pub series_radius: f64,
    pub vertex_value: f64,
    pub delta_star: f64,
    pub eps_sign_relative: f64,
}

impl Tolerances {
    fn current() -> Self {
        Tolerances {
            quadrature: DEFAULT_TOL,
            root: TOL_ROOT,
            series_radius: TOL_SERIES,
            vertex_value: ground_state::TOL_Z,
            delta_star: DELTA_STAR,
            eps_sign_relative: EPS_SIGN,
        }
    }
}

/// What every `--json` output looks like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub tolerances: Tolerances,
    pub result: T,
}

fn envelope<T>(argv: &[String], result: T) -> Envelope<T> {
    Envelope {
        tool: "nlsgraph".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: argv.to_vec(),
        tolerances: Tolerances::current(),
        result,
    }
}

fn print_json<T: Serialize>(argv: &[String], result: T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&envelope(argv, result)).map_err(|e| Failure::Compute(e.to_string()))?;
    outln!("{text}");
    Ok(())
}

fn provenance(argv: &[String], extra: &[String]) -> Vec<String> {
    let t = Tolerances::current();
    let mut lines = vec![
        format!("nlsgraph {}", env!("CARGO_PKG_VERSION")),
        format!("command: {}", argv.join(" ")),
        format!(
            "tolerances: quadrature={:e} root={:e} series_radius={:e} vertex_value={:e} delta_star={:e} eps_sign={:e}*|Theta|/lambda",
            t.quadrature, t.root, t.series_radius, t.vertex_value, t.delta_star, t.eps_sign_relative
        ),
    ];
    lines.extend_from_slice(extra);
    lines
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Compute(format!("cannot create {}: {e}", path.display())))
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn check_p(p: f64) -> Result<(), Failure> {
    if !(p > 2.0 && p.is_finite()) {
        return usage(format!("--p must be a finite number greater than 2, got {p}"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if !(v > 0.0 && v.is_finite()) {
        return usage(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

fn check_range(lo_name: &str, lo: f64, hi_name: &str, hi: f64) -> Result<(), Failure> {
    check_positive(lo_name, lo)?;
    check_positive(hi_name, hi)?;
    if !(lo < hi) {
        return usage(format!("{lo_name} must be below {hi_name}, got {lo} and {hi}"));
    }
    Ok(())
}

pub fn run(command: Command, argv: &[String]) -> Outcome {
    match command {
        Command::State(a) => state(a, argv),
        Command::Transitions(a) => transitions(a, argv),
        Command::Diagram(a) => diagram(a, argv),
        Command::Asymptotics(a) => asymptotics(a, argv),
        Command::Profile(a) => profile(a, argv),
        Command::Oracle(a) => oracle(a, argv),
        Command::Selftest(a) => self_test(a, argv),
    }
}

fn state(a: StateArgs, argv: &[String]) -> Outcome {
    check_p(a.p)?;
    check_positive("--lambda", a.lambda)?;
    let report = state_report(ModelParams::new(a.p, a.graph.graph())?, a.lambda)?;
    if a.json {
        print_json(argv, report)?;
    } else {
        let r = &report.record;
        outln!("graph           {}", r.params.graph().label());
        outln!("p               {}", r.params.p());
        outln!("lambda          {}", r.lambda);
        outln!("ell             {}", r.phase.ell);
        outln!("z               {}", r.phase.z);
        outln!("y               {}", r.phase.y);
        outln!("theta1          {}", r.theta1);
        outln!("mass            {}", r.theta);
        outln!("dmass/dlambda   {}", r.dtheta_dlambda);
        outln!("lambda*         {}", report.lambda_star);
        outln!("verdict         {}", report.verdict.kind.as_str());
    }
    Ok(true)
}

fn transitions(a: TransitionArgs, argv: &[String]) -> Outcome {
    check_p(a.p)?;
    check_range("--lmin", a.lmin, "--lmax", a.lmax)?;
    if a.scan < 8 {
        return usage(format!("--scan needs at least 8 points, got {}", a.scan));
    }
    let report = detect_transitions(ModelParams::new(a.p, a.graph.graph())?, (a.lmin, a.lmax), a.scan)?;
    if a.json {
        print_json(argv, &report)?;
    } else {
        outln!("pattern         {}", report.pattern.as_str());
        let regimes: Vec<&str> = report
            .regimes
            .iter()
            .map(|&s| if s > 0 { "stable" } else { "unstable" })
            .collect();
        outln!("regimes         {}", regimes.join(" -> "));
        for c in &report.sign_changes {
            outln!("change          lambda = {:.10e} ({:?})", c.lambda, c.direction);
        }
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ");
        outln!("near-degenerate [{}]", list(&report.near_degenerate));
        outln!("inconclusive    [{}]", list(&report.inconclusive));
    }
    Ok(true)
}

fn diagram(a: DiagramArgs, argv: &[String]) -> Outcome {
    check_range("--lmin", a.lmin, "--lmax", a.lmax)?;
    check_p(a.pmin)?;
    if !(a.pmax > a.pmin && a.pmax.is_finite()) {
        return usage(format!("--pmax must exceed --pmin, got {} and {}", a.pmin, a.pmax));
    }
    if a.nx < 2 || a.ny < 2 {
        return usage("--nx and --ny must be at least 2");
    }
    if a.workers == Some(0) {
        return usage("--workers must be at least 1");
    }
    let lambdas = log_spaced(a.lmin, a.lmax, a.nx);
    let ps = lin_spaced(a.pmin, a.pmax, a.ny);
    let start = Instant::now();
    let d = phase_diagram(a.graph.graph(), &lambdas, &ps, a.workers)?;
    let secs = start.elapsed().as_secs_f64();
    let extra = [
        format!("graph: {}", a.graph.graph().label()),
        format!("lambda grid: {} log-spaced points on [{:e}, {:e}]", a.nx, a.lmin, a.lmax),
        format!("p grid: {} linear points on [{}, {}]", a.ny, a.pmin, a.pmax),
    ];
    let comments = provenance(argv, &extra);
    let mut out = create(&a.csv)?;
    d.write_csv(&mut out, &comments)?;
    out.flush()?;
    if let Some(path) = &a.ppm {
        let mut out = create(path)?;
        let mut ppm_comments = comments.clone();
        ppm_comments.push("colors: blue stable, yellow unstable, gray near lambda*, white inconclusive".into());
        ppm_comments.push("axes: lambda increases rightward, p increases upward".into());
        d.write_ppm(&mut out, &ppm_comments)?;
        out.flush()?;
    }
    let count = |k: VerdictKind| d.cells.iter().filter(|c| c.kind == k).count();
    outln!(
        "{} cells in {secs:.2} s: {} stable, {} unstable, {} near-degenerate, {} inconclusive",
        d.cells.len(),
        count(VerdictKind::Stable),
        count(VerdictKind::Unstable),
        count(VerdictKind::NearDegenerate),
        count(VerdictKind::Inconclusive)
    );
    Ok(true)
}

fn asymptotics(a: AsymptoticArgs, argv: &[String]) -> Outcome {
    let graph = a.graph.graph();
    let check = match a.regime {
        RegimeArg::LambdaSmall | RegimeArg::LambdaLarge => {
            let Some(p) = a.p else {
                return usage("the lambda regimes need --p");
            };
            check_p(p)?;
            if (p - 6.0).abs() < 1e-12 {
                return usage("the lambda regimes are not defined at p = 6");
            }
            let side = if a.regime == RegimeArg::LambdaSmall {
                LambdaSide::Small
            } else {
                LambdaSide::Large
            };
            check_lambda_asymptotes(ModelParams::new(p, graph)?, side)?
        }
        RegimeArg::P2 | RegimeArg::Pinf => {
            if a.p.is_some() {
                return usage("--p only applies to the lambda regimes");
            }
            check_range("--lmin", a.lmin, "--lmax", a.lmax)?;
            if a.regime == RegimeArg::P2 {
                check_p2_regime(graph, (a.lmin, a.lmax))?
            } else {
                check_pinfty_regime(graph, (a.lmin, a.lmax))?
            }
        }
    };
    let pass = check.pass;
    print_json(argv, check)?;
    Ok(pass)
}

fn profile(a: ProfileArgs, argv: &[String]) -> Outcome {
    check_p(a.p)?;
    check_positive("--lambda", a.lambda)?;
    if a.n < 2 {
        return usage("--n must be at least 2");
    }
    let prof = reconstruct_profile(ModelParams::new(a.p, a.graph.graph())?, a.lambda, a.n)?;
    let extra = [
        format!("graph: {} p: {} lambda: {}", a.graph.graph().label(), a.p, a.lambda),
        format!("samples per edge: {}", a.n),
    ];
    let mut out = create(&a.csv)?;
    prof.write_csv(&mut out, &provenance(argv, &extra))?;
    out.flush()?;
    outln!(
        "z = {}, vertex mismatch {:.2e}, flux residual {:.2e}",
        prof.z, prof.vertex_mismatch, prof.flux_residual
    );
    Ok(true)
}

fn oracle(a: OracleArgs, argv: &[String]) -> Outcome {
    check_p(a.p)?;
    check_positive("--step-tol", a.step_tol)?;
    let nl = Nonlinearity::new(a.p)?;
    let peak = nl.peak();
    if !(a.zmin > 0.0 && a.zmin <= a.zmax && a.zmax < peak) {
        return usage(format!("need 0 < --zmin <= --zmax < {peak} for p = {}", a.p));
    }
    if a.n == 0 || (a.n == 1 && a.zmin != a.zmax) {
        return usage("--n must be positive, and 1 only when --zmin equals --zmax");
    }
    let graph = a.graph.graph();
    let theta = graph.theta();
    let zs = if a.n == 1 { vec![a.zmin] } else { lin_spaced(a.zmin, a.zmax, a.n) };
    let mut rows = Vec::with_capacity(zs.len());
    for z in zs {
        let l = length_l(&nl, theta, z)?;
        let shot = shoot_compact_edge(a.p, theta, z, a.step_tol)?;
        let m = mass_theta1(&nl, graph, z)?;
        let m_shot = shot_theta1(graph, a.p, z, a.step_tol)?;
        rows.push(format!(
            "{:.16e},{:.16e},{:.16e},{:.3e},{:.16e},{:.16e},{:.3e},{:.3e}",
            z,
            l,
            shot.ell_hit,
            (shot.ell_hit - l).abs() / l,
            m,
            m_shot,
            (m_shot - m).abs() / m,
            shot.hamiltonian_drift
        ));
    }
    let extra = [
        format!("graph: {} p: {} step_tol: {:e}", graph.label(), a.p, a.step_tol),
    ];
    let mut out: Box<dyn Write> = match &a.csv {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    for c in provenance(argv, &extra) {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "z,length,shot_length,length_rel_gap,theta1,shot_theta1,theta1_rel_gap,hamiltonian_drift")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    Ok(true)
}

fn self_test(a: SelftestArgs, argv: &[String]) -> Outcome {
    let checks = selftest::run_all();
    let pass = checks.iter().all(|c| c.pass);
    if a.json {
        print_json(argv, &checks)?;
    } else {
        for c in &checks {
            outln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = checks.iter().filter(|c| !c.pass).count();
        outln!("{} checks, {failed} failed", checks.len());
    }
    Ok(pass)
}
