use nlsgraph::ground_state::{assemble_with, dmass_theta1_dz};
use nlsgraph::stability::{
    classify, detect_transitions, eps_sign, eval_f_aux, eval_g_aux, lambda_star, lin_spaced, log_spaced,
    phase_diagram, Pattern, VerdictKind,
};
use nlsgraph::{Graph, ModelParams, Nonlinearity};

#[test]
fn verdict_sign_agrees_with_finite_differences() {
    for p in [3.0, 5.5, 6.0, 6.5, 9.0] {
        for graph in [Graph::TGraph, Graph::Tadpole] {
            let params = ModelParams::new(p, graph).unwrap();
            let nl = params.nonlinearity();
            for lambda in log_spaced(1e-3, 1e3, 13) {
                let r = assemble_with(&nl, params, lambda).unwrap();
                if r.dtheta_dlambda.abs() <= 10.0 * eps_sign(&r) {
                    continue;
                }
                let h = 1e-4 * lambda;
                let fd = (assemble_with(&nl, params, lambda + h).unwrap().theta
                    - assemble_with(&nl, params, lambda - h).unwrap().theta)
                    / (2.0 * h);
                assert_eq!(fd.signum(), r.dtheta_dlambda.signum(), "p={p} {:?} lambda={lambda}", graph);
                let v = classify(params, lambda).unwrap();
                match v.kind {
                    VerdictKind::Stable => assert!(fd > 0.0),
                    VerdictKind::Unstable => assert!(fd < 0.0),
                    VerdictKind::NearDegenerate => {}
                    VerdictKind::Inconclusive => panic!("inconclusive at p={p} lambda={lambda}"),
                }
            }
        }
    }
}

#[test]
fn p6_t_graph_single_mass_turn_in_unit_interval() {
    let nl = Nonlinearity::new(6.0).unwrap();
    let hi = 3f64.powf(0.25) - 0.01;
    let zs = lin_spaced(0.01, hi, 2000);
    let signs: Vec<f64> = zs
        .iter()
        .map(|&z| dmass_theta1_dz(&nl, Graph::TGraph, z).unwrap().signum())
        .collect();
    let changes: Vec<usize> = (1..signs.len()).filter(|&i| signs[i] != signs[i - 1]).collect();
    assert_eq!(changes.len(), 1);
    let z0 = zs[changes[0]];
    assert!(z0 > 0.0 && z0 < 1.0, "z0 = {z0}");
}

#[test]
fn p6_f_decreasing_g_increasing() {
    let zs = lin_spaced(0.02, 0.98, 500);
    let f: Vec<f64> = zs.iter().map(|&z| eval_f_aux(z).unwrap()).collect();
    let g: Vec<f64> = zs.iter().map(|&z| eval_g_aux(z).unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] < w[0]));
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn p6_tadpole_sign_change_positive_then_negative() {
    let r = detect_transitions(ModelParams::new(6.0, Graph::Tadpole).unwrap(), (1e-4, 1e4), 128).unwrap();
    assert_eq!(r.sign_changes.len(), 1, "{:?}", r.sign_changes);
    assert_eq!(r.regimes, vec![1, -1]);
    let r = detect_transitions(ModelParams::new(6.0, Graph::TGraph).unwrap(), (1e-4, 1e4), 128).unwrap();
    assert_eq!(r.regimes, vec![-1, 1]);
}

#[test]
fn transition_patterns_independent_of_scan_density() {
    for graph in [Graph::TGraph, Graph::Tadpole] {
        for (p, want) in [(6.05, Pattern::Usu), (5.95, Pattern::Sus)] {
            let params = ModelParams::new(p, graph).unwrap();
            let coarse = detect_transitions(params, (1e-4, 1e4), 64).unwrap();
            let fine = detect_transitions(params, (1e-4, 1e4), 256).unwrap();
            assert_eq!(coarse.pattern, want, "{:?} p={p}", graph);
            assert_eq!(fine.pattern, want, "{:?} p={p}", graph);
            assert_eq!(coarse.sign_changes.len(), fine.sign_changes.len());
            for (a, b) in coarse.sign_changes.iter().zip(&fine.sign_changes) {
                assert_eq!(a.direction, b.direction);
                assert!((a.lambda / b.lambda - 1.0).abs() < 1e-4, "{} vs {}", a.lambda, b.lambda);
            }
        }
    }
}

#[test]
fn lambda_star_flagged_near_degenerate() {
    for (p, graph) in [(4.0, Graph::TGraph), (7.0, Graph::Tadpole)] {
        let params = ModelParams::new(p, graph).unwrap();
        let star = lambda_star(&params.nonlinearity(), params.theta()).unwrap();
        let v = classify(params, star * (1.0 + 5e-4)).unwrap();
        assert_eq!(v.kind, VerdictKind::NearDegenerate);
        assert!(v.lambda_star_distance.abs() <= 1e-3);
        let v = classify(params, star * 1.01).unwrap();
        assert_ne!(v.kind, VerdictKind::NearDegenerate);
    }
}

#[test]
fn small_diagram_is_deterministic_across_workers() {
    let lambdas = log_spaced(1e-2, 1e2, 12);
    let ps = lin_spaced(2.2, 10.0, 9);
    let one = phase_diagram(Graph::TGraph, &lambdas, &ps, Some(1)).unwrap();
    let many = phase_diagram(Graph::TGraph, &lambdas, &ps, Some(4)).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    one.write_csv(&mut a, &[]).unwrap();
    many.write_csv(&mut b, &[]).unwrap();
    assert_eq!(a, b);
}
