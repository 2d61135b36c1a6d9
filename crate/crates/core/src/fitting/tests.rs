use super::*;
use crate::kittel::KittelMaterial;
use crate::model::Couplings;
use crate::oracle::{synth_map, NoiseSpec};
use crate::sweep::{compute_branches, compute_map, linspace, TemplateMode};
use num_complex::Complex64;

fn canonical(g1: f64, g2: f64) -> SystemTemplate {
    SystemTemplate::canonical(
        TemplateMode::kittel("py", KittelMaterial::PERMALLOY, 0.06, 0.02),
        TemplateMode::fixed("res", 10.0, 0.03, 0.05),
        TemplateMode::kittel("yig", KittelMaterial::YIG, 0.02, 0.04),
        g1,
        g2,
    )
    .unwrap()
}

fn yig_only(g: f64) -> SystemTemplate {
    SystemTemplate::new(
        vec![
            TemplateMode::fixed("res", 10.0, 0.03, 0.05),
            TemplateMode::kittel("yig", KittelMaterial::YIG, 0.02, 0.04),
        ],
        Couplings::new(2).with(0, 1, g).unwrap(),
    )
    .unwrap()
}

fn free_g(template: &SystemTemplate, name: &str, initial: f64) -> FreeParam {
    FreeParam {
        param: Param::parse(name, template).unwrap(),
        lower: 0.0,
        upper: 1.0,
        initial,
    }
}

/// Ridges taken straight from the model eigenvalues over both crossing windows.
fn exact_ridges(template: &SystemTemplate) -> Ridges {
    let mut fields = Vec::new();
    for m in template.magnon_indices() {
        let (lo, hi) = template.crossing_window(m, 1.5).unwrap();
        fields.extend(linspace(lo, hi, 41));
    }
    fields.sort_by(f64::total_cmp);
    let curves = compute_branches(template, &fields).unwrap();
    Ridges {
        fields,
        peaks: curves
            .branches
            .iter()
            .map(|b| {
                b.iter()
                    .map(|z| z.re)
                    .filter(|w| (8.5..11.5).contains(w))
                    .collect()
            })
            .collect(),
    }
}

fn map_grid() -> (Vec<f64>, Vec<f64>) {
    (linspace(100.0, 1100.0, 101), linspace(9.0, 11.0, 101))
}

#[test]
fn param_names_round_trip() {
    let t = canonical(0.2, 0.21);
    for name in [
        "g.py.res",
        "alpha.yig",
        "beta.res",
        "omega.res",
        "gamma.py",
        "four_pi_m.yig",
    ] {
        let p = Param::parse(name, &t).unwrap();
        assert_eq!(p.name(&t), name);
    }
    assert!(Param::parse("omega.py", &t).is_err());
    assert!(Param::parse("gamma.res", &t).is_err());
    assert!(Param::parse("g.py.cobalt", &t).is_err());
    assert!(Param::parse("kappa.py", &t).is_err());
    assert!(Param::parse("g.py.py", &t).is_err());
}

#[test]
fn param_set_get() {
    let mut t = canonical(0.2, 0.21);
    let p = Param::parse("g.res.yig", &t).unwrap();
    assert_eq!(p.get(&t).unwrap(), 0.21);
    p.set(&mut t, 0.3).unwrap();
    assert_eq!(t.couplings().get(2, 1), 0.3);
    let p = Param::parse("four_pi_m.yig", &t).unwrap();
    p.set(&mut t, 1800.0).unwrap();
    assert_eq!(t.modes()[2].material().unwrap().four_pi_m, 1800.0);
}

#[test]
fn problem_validation() {
    let t = canonical(0.2, 0.21);
    let mut f = free_g(&t, "g.py.res", 0.1);
    f.initial = 2.0;
    assert!(FitProblem::new(t.clone(), vec![f]).is_err());
    let mut f = free_g(&t, "g.py.res", 0.1);
    f.upper = f64::INFINITY;
    assert!(FitProblem::new(t.clone(), vec![f]).is_err());
    let a = free_g(&t, "g.py.res", 0.1);
    let b = free_g(&t, "g.res.py", 0.1);
    assert!(FitProblem::new(t, vec![a, b]).is_err());
}

#[test]
fn no_free_parameters_just_evaluates() {
    let t = canonical(0.2, 0.21);
    let (fields, freqs) = map_grid();
    let map = compute_map(&t, &fields, &freqs).unwrap();
    let problem = FitProblem::new(t.clone(), vec![]).unwrap();
    let res = fit_map(&map, &problem).unwrap();
    assert_eq!(res.residual, 0.0);
    assert_eq!(res.iterations, 0);
    assert!(res.converged);

    let ridges = exact_ridges(&t);
    let res = fit_branches(&ridges, &problem).unwrap();
    assert!(res.residual < 1e-20);
    assert_eq!(res.iterations, 0);
}

#[test]
fn fit_branches_single_coupling() {
    let truth = yig_only(0.25);
    let ridges = exact_ridges(&truth);
    let start = yig_only(0.1);
    let problem = FitProblem::new(start.clone(), vec![free_g(&start, "g.res.yig", 0.1)]).unwrap();
    let res = fit_branches(&ridges, &problem).unwrap();
    assert!(res.converged);
    assert!((res.values()[0] - 0.25).abs() < 1e-4, "{:?}", res.params);
}

#[test]
fn fit_branches_both_couplings() {
    let truth = canonical(0.2, 0.21);
    let ridges = exact_ridges(&truth);
    for (g1, g2) in [(0.1, 0.105), (0.3, 0.315), (0.1, 0.315)] {
        let start = canonical(g1, g2);
        let problem = FitProblem::new(
            start.clone(),
            vec![
                free_g(&start, "g.py.res", g1),
                free_g(&start, "g.res.yig", g2),
            ],
        )
        .unwrap();
        let res = fit_branches(&ridges, &problem).unwrap();
        let v = res.values();
        assert!(
            (v[0] - 0.2).abs() < 1e-3 && (v[1] - 0.21).abs() < 1e-3,
            "from ({g1}, {g2}): {v:?}"
        );
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fit_branches_needs_data() {
    let t = canonical(0.2, 0.21);
    let ridges = Ridges {
        fields: vec![500.0, 600.0],
        peaks: vec![vec![10.0], vec![10.1]],
    };
    let problem = FitProblem::new(
        t.clone(),
        vec![free_g(&t, "g.py.res", 0.1), free_g(&t, "g.res.yig", 0.1)],
    )
    .unwrap();
    assert!(matches!(
        fit_branches(&ridges, &problem),
        Err(Error::DegenerateProblem(_))
    ));
}

#[test]
fn fit_map_noiseless_round_trip() {
    let truth = canonical(0.2, 0.21);
    let (fields, freqs) = map_grid();
    let map = compute_map(&truth, &fields, &freqs).unwrap();
    for (g1, g2) in [(0.1, 0.315), (0.3, 0.105)] {
        let start = canonical(g1, g2);
        let problem = FitProblem::new(
            start.clone(),
            vec![
                free_g(&start, "g.py.res", g1),
                free_g(&start, "g.res.yig", g2),
            ],
        )
        .unwrap();
        let res = fit_map(&map, &problem).unwrap();
        let v = res.values();
        assert!(res.converged);
        assert!(
            (v[0] - 0.2).abs() < 1e-6 && (v[1] - 0.21).abs() < 1e-6,
            "{v:?}"
        );
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fit_map_with_noise_and_dampings() {
    let truth = canonical(0.2, 0.21);
    let (fields, freqs) = map_grid();
    let clean = compute_map(&truth, &fields, &freqs).unwrap();
    let sigma = 0.01 * clean.max_abs();
    let map = synth_map(&truth, &fields, &freqs, &NoiseSpec::new(sigma, 9).unwrap()).unwrap();
    let start = canonical(0.15, 0.15);
    let mut alpha = free_g(&start, "alpha.res", 0.05);
    alpha.upper = 0.5;
    let problem = FitProblem::new(
        start.clone(),
        vec![
            free_g(&start, "g.py.res", 0.15),
            free_g(&start, "g.res.yig", 0.15),
            alpha,
        ],
    )
    .unwrap();
    let res = fit_map(&map, &problem).unwrap();
    let v = res.values();
    assert!((v[0] - 0.2).abs() < 0.02 * 0.2, "{v:?}");
    assert!((v[1] - 0.21).abs() < 0.02 * 0.21, "{v:?}");
    assert!((v[2] - 0.03).abs() < 0.1 * 0.03, "{v:?}");
    for p in &res.params {
        assert!(p.stderr.is_finite() && p.stderr > 0.0);
        assert!(
            (p.value - [0.2, 0.21, 0.03][res.params.iter().position(|q| q == p).unwrap()]).abs()
                < 6.0 * p.stderr
        );
    }
}

#[test]
fn truth_is_local_minimum() {
    let truth = canonical(0.2, 0.21);
    let (fields, freqs) = map_grid();
    let map = compute_map(&truth, &fields, &freqs).unwrap();
    let at_truth: f64 = optim::sum_sq(&map_residuals(&truth, &map).unwrap());
    for (d1, d2) in [
        (0.05, 0.0),
        (-0.05, 0.0),
        (0.0, 0.05),
        (0.0, -0.05),
        (0.05, -0.05),
        (0.08, 0.1),
    ] {
        let moved = canonical(0.2 + d1, 0.21 + d2);
        let r = optim::sum_sq(&map_residuals(&moved, &map).unwrap());
        assert!(at_truth <= r);
    }
}

#[test]
fn jacobian_matches_analytic_derivative() {
    // Single mode: S21 = 2 beta / D with D = i (w - w0) - (alpha + beta), so
    // dS21/dalpha = 2 beta / D^2 and dS21/dbeta = 2 / D + 2 beta / D^2.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let freqs = linspace(9.5, 10.5, 21);
    let zero =
        SpectrumMap::new(vec![0.0], freqs.clone(), vec![Complex64::new(0.0, 0.0); 21]).unwrap();
    for _ in 0..10 {
        let (alpha, beta) = (rng.gen_range(0.01..0.3), rng.gen_range(0.01..0.3));
        let t = SystemTemplate::new(
            vec![TemplateMode::fixed("res", 10.0, alpha, beta)],
            Couplings::new(1),
        )
        .unwrap();
        let problem = FitProblem::new(
            t.clone(),
            vec![
                FreeParam {
                    param: Param::Alpha(0),
                    lower: 0.0,
                    upper: 1.0,
                    initial: alpha,
                },
                FreeParam {
                    param: Param::Beta(0),
                    lower: 0.0,
                    upper: 1.0,
                    initial: beta,
                },
            ],
        )
        .unwrap();
        let residuals = |x: &[f64]| map_residuals(&problem.apply(x).ok()?, &zero);
        let jac =
            optim::central_jacobian(&residuals, &[alpha, beta], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        for (j, &w) in freqs.iter().enumerate() {
            let d = Complex64::new(-(alpha + beta), w - 10.0);
            let da = 2.0 * beta / (d * d);
            let db = 2.0 / d + 2.0 * beta / (d * d);
            for (col, exact) in [(0, da), (1, db)] {
                let fd = Complex64::new(jac[(2 * j, col)], jac[(2 * j + 1, col)]);
                assert!(
                    (fd - exact).norm() <= 1e-5 * exact.norm(),
                    "{fd} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn seeds_dampings_from_isolated_linewidth() {
    let truth = yig_only(0.25);
    let map = compute_map(
        &truth,
        &linspace(100.0, 260.0, 81),
        &linspace(9.0, 11.0, 401),
    )
    .unwrap();
    let ridges = extract_ridges(&map, 2, 0.03).unwrap();
    let mut start = truth.clone();
    start.couplings_mut().set(0, 1, 0.05).unwrap();
    let bound = |name: &str| FreeParam {
        param: Param::parse(name, &start).unwrap(),
        lower: 0.0,
        upper: 1.0,
        initial: 0.5,
    };
    let free = vec![
        bound("alpha.res"),
        bound("beta.res"),
        bound("g.res.yig"),
        bound("alpha.yig"),
    ];
    let mut problem = FitProblem::new(start, free).unwrap();
    problem.seed_initial_guesses(&map, &ridges, &[0, 1, 2, 3]);
    let init: Vec<f64> = problem.free.iter().map(|f| f.initial).collect();
    // Resonator total linewidth 0.08 split evenly. The YIG peak is never far
    // from the coupled resonator inside this band, so its estimate is rough.
    assert!(
        (init[0] - 0.04).abs() < 0.01 && (init[1] - 0.04).abs() < 0.01,
        "{init:?}"
    );
    assert!((init[2] - 0.25).abs() < 0.03, "{init:?}");
    assert!(init[3] > 0.005 && init[3] < 0.08, "{init:?}");

    let mut untouched = problem.clone();
    untouched.seed_initial_guesses(&map, &ridges, &[]);
    assert_eq!(untouched, problem);
}
