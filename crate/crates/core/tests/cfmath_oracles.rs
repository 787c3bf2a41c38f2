use icilink::cfmath::{
    bessel_k, cf_effective, cf_single_attempt, gil_pelaez_cdf, gil_pelaez_cdf_raw, Approximation, CfSpec,
    QuadratureConfig, UnitCdfTable,
};
use icilink::sim::ks_statistic;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Composite Simpson rule with `panels` (even) panels.
fn simpson(f: impl Fn(f64) -> Complex64, a: f64, b: f64, panels: usize) -> Complex64 {
    assert!(panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn ln_gamma_int(k: u32) -> f64 {
    (1..k).map(|i| (i as f64).ln()).sum()
}

#[test]
fn cf_matches_direct_quadrature_of_the_density() {
    // IPLA, K = 6, s = 1, mean path loss 0.2: Y ~ Inv-Gamma(6, 5)
    let spec = CfSpec::ipla(1.0, &[0.2; 6], 1).unwrap();
    let (shape, beta, t) = (6u32, 5.0f64, 3.7);
    let density = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        (shape as f64 * beta.ln() - ln_gamma_int(shape) - (shape as f64 + 1.0) * y.ln() - beta / y).exp()
    };
    let integrand = |y: f64| Complex64::from_polar(density(y), t * y);
    // the tail beyond 2000 carries less than 1e-18 of the mass
    let direct = simpson(integrand, 0.0, 50.0, 100_000) + simpson(integrand, 50.0, 2000.0, 400_000);
    let closed = cf_single_attempt(&spec, t).unwrap();
    assert!((direct - closed).norm() < 1e-6, "direct {direct} vs closed form {closed}");
}

#[test]
fn cf_is_normalized_and_continuous() {
    let spec = CfSpec::ipla(0.3, &[0.01, 0.02, 0.05, 0.005, 0.002, 0.001], 1).unwrap();
    let ga = CfSpec::ga(0.3, &[0.01, 0.02], 1e4, 1).unwrap();
    for s in [spec, ga] {
        assert!((cf_single_attempt(&s, 1e-9).unwrap() - 1.0).norm() < 1e-6);
        let mut prev = cf_single_attempt(&s, 1e-6).unwrap();
        for i in 1..20_000 {
            let t = 1e-6 * (1.0 + 0.002f64).powi(i);
            let phi = cf_single_attempt(&s, t).unwrap();
            assert!(phi.norm() <= 1.0 + 1e-12, "|phi({t})| = {}", phi.norm());
            // a branch-cut crossing would jump by O(1) between neighbours
            assert!((phi - prev).norm() < 0.05, "jump at t = {t}");
            prev = phi;
        }
        let four = s.with_attempts(4);
        let t = 0.7;
        assert!((cf_effective(&four, t).unwrap() - cf_single_attempt(&s, t).unwrap().powi(4)).norm() < 1e-12);
    }
}

/// `I_ν(z)` by its power series; accurate for moderate `|z|`.
fn bessel_i_series(nu: u32, z: Complex64) -> Complex64 {
    let quarter = z * z / 4.0;
    let mut term = (z / 2.0).powu(nu) / (1..=nu).map(|k| k as f64).product::<f64>();
    let mut sum = term;
    for k in 1..400 {
        term *= quarter / (k as f64 * (k + nu) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

#[test]
fn bessel_recurrence_and_wronskian() {
    let mut worst_recurrence: f64 = 0.0;
    let mut worst_wronskian: f64 = 0.0;
    for i in 0..40 {
        let modulus = 0.1 * (80f64).powf(i as f64 / 39.0);
        for j in 0..9 {
            let arg = -std::f64::consts::FRAC_PI_2 * 0.999 + j as f64 * std::f64::consts::PI * 0.999 / 8.0;
            let z = Complex64::from_polar(modulus, arg);
            for nu in 1..8u32 {
                let (km, k0, kp) =
                    (bessel_k(nu - 1, z).unwrap(), bessel_k(nu, z).unwrap(), bessel_k(nu + 1, z).unwrap());
                worst_recurrence = worst_recurrence.max((kp - km - k0 * (2.0 * nu as f64) / z).norm() / kp.norm());
                // I_ν K_{ν+1} + I_{ν+1} K_ν = 1/z
                let w = bessel_i_series(nu, z) * kp + bessel_i_series(nu + 1, z) * k0;
                worst_wronskian = worst_wronskian.max((w * z - 1.0).norm());
            }
        }
    }
    assert!(worst_recurrence < 1e-10, "recurrence {worst_recurrence:e}");
    assert!(worst_wronskian < 1e-10, "wronskian {worst_wronskian:e}");
}

#[test]
fn ga_single_attempt_matches_exponential_of_reciprocal() {
    let q = QuadratureConfig::default();
    let spec = CfSpec::ga(2.0, &[0.1, 0.05, 0.05], 100.0, 1).unwrap();
    for i in 0..40 {
        let x = 0.05 * (2.0f64).powf(i as f64 / 3.0);
        let want = (-spec.s / (spec.scale * x)).exp();
        assert!((gil_pelaez_cdf(&spec, x, &q).unwrap() - want).abs() < 1e-6, "x = {x}");
    }
}

#[test]
fn raw_inversion_stays_within_tolerance_and_reaches_limits() {
    let q = QuadratureConfig::default();
    let slack = 2.0 * q.abs_tol;
    for spec in [
        CfSpec::ipla(1.0, &[0.2; 6], 3).unwrap(),
        CfSpec::ga(1.0, &[0.2; 6], 1e3, 2).unwrap(),
        CfSpec::ipla(50.0, &[0.01; 2], 4).unwrap(),
    ] {
        let c = spec.ratio();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..80 {
            let x = c * (-4.0 + 12.0 * i as f64 / 79.0).exp();
            let v = gil_pelaez_cdf_raw(&spec, x, &q).unwrap().values[0];
            assert!(v >= -slack && v <= 1.0 + slack, "raw value {v} at x = {x}");
            assert!(v >= prev - slack, "not monotone at x = {x}");
            prev = v;
        }
        assert!(gil_pelaez_cdf(&spec, c * 1e-4, &q).unwrap() < 1e-6);
        assert!(gil_pelaez_cdf(&spec, c * 1e6, &q).unwrap() > 1.0 - 1e-4);
    }
}

#[test]
fn multi_attempt_inversion_matches_sampled_sums() {
    let q = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for shape in [1u32, 6] {
        let table = UnitCdfTable::shared(shape, 4, &q).unwrap();
        let approx = if shape == 1 { Approximation::Ga } else { Approximation::Ipla };
        let spec = CfSpec { approx, s: 1.0, scale: 1.0, interferers: 6, attempts: 1 };
        // the table is the interpolated inversion: tie it to direct inversion first
        for n in 2..=4u32 {
            let direct_spec = spec.with_attempts(n);
            for i in 0..25 {
                let y = (-2.0 + 6.0 * i as f64 / 24.0).exp() * n as f64;
                let direct = gil_pelaez_cdf(&direct_spec, y, &q).unwrap();
                assert!((table.cdf(n, y) - direct).abs() < 1e-7, "table off at n={n}, y={y}");
            }
        }
        // Y = 1/G with G ~ Gamma(shape, 1)
        let gamma = Gamma::new(shape as f64, 1.0).unwrap();
        for n in 2..=4u32 {
            let sums: Vec<f64> = (0..1_000_000).map(|_| (0..n).map(|_| 1.0 / gamma.sample(&mut rng)).sum()).collect();
            let ks = ks_statistic(&sums, |y| table.cdf(n, y));
            assert!(ks <= 0.005, "shape {shape}, n = {n}: KS {ks}");
        }
    }
}
