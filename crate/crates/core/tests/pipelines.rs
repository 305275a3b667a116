use lurye_ozf::hyperdominant::{augment_zero_excess, conic_decompose};
use lurye_ozf::linalg::{max_eigenpair, DenseMatrix};
use lurye_ozf::multiplier_search::{
    negativity_form, quadratic_negativity, search_fir, ClassMode, FrequencyGrid,
};
use lurye_ozf::nonlinearity::RandomConfig;
use lurye_ozf::periodic_banded::{enumerate_basis, BandedOperator, DEFAULT_BASIS_CAP};
use lurye_ozf::plant::RationalPlant;
use lurye_ozf::simulator::{destabilization_probe, ProbeFamily};
use lurye_ozf::sprocedure::{
    build_sigma0, build_sigmak, certificate_search, combined_max_eig, CertificateConfig, QuadraticForm,
};

fn feasibility_pattern(g: &RationalPlant, max_b: usize) -> String {
    (0..=max_b)
        .map(|b| {
            let r = search_fir(g, b, &FrequencyGrid::default_for(b), ClassMode::Hyperdominant).unwrap();
            if r.feasible {
                assert!(r.verification.as_ref().unwrap().pass);
                'F'
            } else {
                assert!(r.certificate_verified);
                '.'
            }
        })
        .collect()
}

#[test]
fn wider_multipliers_rescue_a_plant_with_feedthrough() {
    let g = RationalPlant::new(vec![-1.0, -1.0, -0.5], vec![1.0, -0.5]).unwrap();
    assert_eq!(feasibility_pattern(&g, 3), ".FFF");
}

#[test]
fn strictly_proper_negative_plants_are_never_feasible() {
    // sum_k m_k Re{G} averages to zero over the circle when G(inf) = 0
    for g in [
        RationalPlant::new(vec![0.0, -0.5], vec![1.0, -0.5]).unwrap(),
        RationalPlant::new(vec![0.0, -1.0, 0.4], vec![1.0, -0.3]).unwrap(),
    ] {
        assert_eq!(feasibility_pattern(&g, 2), "...");
    }
}

/// Rebuilds an S-procedure certificate from a frequency-domain multiplier:
/// the window of `M` is split into principal blocks of `I - P`, and with
/// `c = 2 / eps` every `gamma^2 > c^2 ||M||^2 / 4` makes `sigma_0 + c sigma_M`
/// negative definite.
#[test]
fn multiplier_yields_s_procedure_certificate() {
    let g = RationalPlant::static_gain(-0.5);
    let report = search_fir(&g, 1, &FrequencyGrid::default_for(1), ClassMode::Hyperdominant).unwrap();
    let m = report.multiplier.unwrap();
    let h = 9;
    let lambda = max_eigenpair(&negativity_form(&m, &g, h, 0.0)).unwrap().0;
    assert!(lambda < 0.0);
    let eps = -lambda;
    assert!(quadratic_negativity(&m, &g, h, eps * 0.99).unwrap().holds);

    let window = m.window_matrix(0, h);
    let combo = conic_decompose(&augment_zero_excess(&window).unwrap()).unwrap();
    let idx: Vec<usize> = (0..h).collect();
    let blocks: Vec<DenseMatrix> = combo
        .iter()
        .map(|t| {
            let mut c = DenseMatrix::identity(h + 1);
            c.add_scaled(-1.0, &DenseMatrix::permutation(&t.perm));
            c.principal(&idx)
        })
        .collect();
    let mut rebuilt = DenseMatrix::zeros(h);
    for (t, c) in combo.iter().zip(&blocks) {
        rebuilt.add_scaled(t.weight, c);
    }
    assert!(rebuilt.max_abs_diff(&window) <= 1e-9);

    let sigmas: Vec<QuadraticForm> = blocks.iter().map(QuadraticForm::from_bilinear).collect();
    let c = 2.0 / eps;
    let norm_bound: f64 = m.coeffs().iter().map(|x| x.abs()).sum();
    let gamma = 2.0 * c * norm_bound / 2.0;
    let s0 = build_sigma0(&g, gamma, h).unwrap();
    let alpha: Vec<f64> = combo.iter().map(|t| c * t.weight).collect();
    assert!(combined_max_eig(&s0, &alpha, &sigmas).unwrap() < 0.0);

    let out = certificate_search(&s0, &sigmas, &CertificateConfig::default()).unwrap();
    assert!(out.found(), "{:?} after {} iterations", out.status, out.iterations);
    let cert = out.certificate.unwrap();
    assert!(combined_max_eig(&s0, &cert.alpha, &sigmas).unwrap() <= 1e-8);
}

#[test]
fn cutting_plane_objective_is_nondecreasing() {
    // the eigenvalue history itself is not monotone for Kelley iterates;
    // the LP objective is, since cuts only shrink the feasible set
    let h = 4;
    let sigmas: Vec<QuadraticForm> = enumerate_basis(4, 1, DEFAULT_BASIS_CAP)
        .unwrap()
        .iter()
        .filter(|p| !p.is_identity())
        .map(|p| build_sigmak(p, h).unwrap())
        .collect();
    for scale in [0.3, 1.0, 2.5] {
        let mut q = DenseMatrix::identity(2 * h).scaled(-0.05);
        for (i, s) in sigmas.iter().enumerate() {
            q.add_scaled(-scale * (i % 3) as f64, s.matrix());
        }
        let s0 = QuadraticForm::new(h, q).unwrap();
        let out = certificate_search(&s0, &sigmas, &CertificateConfig::default()).unwrap();
        assert!(out.found());
        assert!(out.objective_history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        let best = out.eig_history.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(best, out.max_eig);
    }
}

/// Consistency check, not a proof: a plant with a multiplier should not be
/// destabilized by any sampled monotone nonlinearity.
#[test]
fn feasible_plant_resists_the_probe() {
    let g = RationalPlant::new(vec![-1.0, -1.0, -0.5], vec![1.0, -0.5]).unwrap();
    assert!(search_fir(&g, 1, &FrequencyGrid::default_for(1), ClassMode::Hyperdominant).unwrap().feasible);
    let family = ProbeFamily {
        nonlinearity: RandomConfig { slope_cap: 5.0, ..RandomConfig::default() },
        horizon: 48,
        refinement_rounds: 1,
        seed: 4,
        ..ProbeFamily::default()
    };
    let r = destabilization_probe(&g, &family, 24).unwrap();
    assert!(!r.diverged);
    assert!(r.gamma.is_finite() && r.gamma < 10.0, "gamma {}", r.gamma);
    assert_eq!(r.skipped, 0);
}

#[test]
fn unstable_loop_is_found_by_the_probe() {
    // positive feedback around a positive gain; saturation keeps it bounded but large
    let g = RationalPlant::new(vec![0.0, 0.9], vec![1.0, -0.5]).unwrap();
    let family = ProbeFamily {
        nonlinearity: RandomConfig { slope_cap: 3.0, ..RandomConfig::default() },
        horizon: 64,
        seed: 2,
        ..ProbeFamily::default()
    };
    let r = destabilization_probe(&g, &family, 16).unwrap();
    assert!(r.gamma > 5.0, "gamma {}", r.gamma);
}
