use nlsgraph::ground_state::{length_l, mass_theta1, mu2};
use nlsgraph::oracle::{halfline_mass, shoot_compact_edge, soliton_mass, DEFAULT_STEP_TOL};
use nlsgraph::{Branch, Graph, Nonlinearity};

#[test]
fn turning_value_on_upper_branch() {
    for (p, theta) in [(3.0, 2.0), (6.0, 0.5), (8.0, 2.0), (2.5, 0.5)] {
        let nl = Nonlinearity::new(p).unwrap();
        for frac in [0.1, 0.5, 0.9] {
            let z = frac * nl.peak();
            let shot = shoot_compact_edge(p, theta, z, DEFAULT_STEP_TOL).unwrap();
            let &(_, u_end, du_end) = shot.samples.last().unwrap();
            let want = nl.branch_inverse(Branch::Upper, (1.0 - theta * theta) * nl.f(z)).unwrap();
            assert!((u_end - want).abs() < 1e-8, "p={p} z={z}: {u_end} vs {want}");
            assert!(du_end.abs() < 1e-8);
            assert!(shot.hamiltonian_drift < 1e-9);
            assert!(shot.samples.windows(2).all(|w| w[1].1 > w[0].1));
        }
    }
}

#[test]
fn step_halving_converges_at_design_rate() {
    // Per-step error control on a fifth-order pair gives global error
    // roughly proportional to the tolerance.
    let (p, theta, z) = (3.0, 2.0, 0.5);
    let nl = Nonlinearity::new(p).unwrap();
    let exact = length_l(&nl, theta, z).unwrap();
    let tols: Vec<f64> = (0..6).map(|k| 1e-5 / 2f64.powi(k)).collect();
    let errs: Vec<f64> = tols
        .iter()
        .map(|&tol| (shoot_compact_edge(p, theta, z, tol).unwrap().ell_hit - exact).abs())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let xs: Vec<f64> = tols.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope - 1.0).abs() < 0.5, "slope {slope}, errors {errs:?}");
}

#[test]
fn tadpole_mass_decomposition_at_p6() {
    let nl = Nonlinearity::new(6.0).unwrap();
    let z = 0.9;
    let shot = shoot_compact_edge(6.0, 0.5, z, DEFAULT_STEP_TOL).unwrap();
    let y = nl.soliton_inverse(z).unwrap();
    let total = 2.0 * shot.mass_edge + halfline_mass(&nl, y).unwrap();
    let want = mass_theta1(&nl, Graph::Tadpole, z).unwrap();
    assert!((total - want).abs() < 1e-6 * want);
}

#[test]
fn halfline_mass_identities() {
    for p in [2.5, 4.0, 6.0, 10.0] {
        let nl = Nonlinearity::new(p).unwrap();
        let full = soliton_mass(&nl).unwrap();
        assert!((halfline_mass(&nl, 0.0).unwrap() - 0.5 * full).abs() < 1e-12 * full);
        for y in [0.2, 1.0, 4.0] {
            let z = nl.soliton(y);
            let a = halfline_mass(&nl, y).unwrap();
            let b = mu2(&nl, z).unwrap();
            assert!((a - b).abs() < 1e-8 * b, "p={p} y={y}: {a} vs {b}");
        }
        assert!(halfline_mass(&nl, 60.0).unwrap() < 1e-20);
    }
}
