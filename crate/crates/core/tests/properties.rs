use hardy_core::geometry::Axis;
use hardy_core::kernels::{kernel_eval, FactorSpec, KernelFamily};
use hardy_core::transforms::{
    maximal_function, riesz_far_constant, riesz_kernel, riesz_kernel_split, Profile, SampledFunction,
    TransformConfig,
};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(FactorSpec::Heat),
        Just(FactorSpec::Dirichlet),
        (0.2f64..3.0).prop_map(|beta| FactorSpec::Bessel { beta }),
        (0.2f64..3.0).prop_map(|beta| FactorSpec::Laguerre { beta }),
    ]
    .prop_map(|s| KernelFamily::from_specs(&[s]).unwrap())
}

fn point(f: &KernelFamily) -> impl Strategy<Value = f64> {
    match f.factors()[0].axis() {
        Axis::Line => (-6.0f64..6.0).boxed(),
        Axis::HalfLine => (0.01f64..8.0).boxed(),
    }
}

fn triple() -> impl Strategy<Value = (KernelFamily, f64, f64, f64)> {
    family().prop_flat_map(|f| {
        let (x, y) = (point(&f), point(&f));
        (Just(f), -3.0f64..1.5, x, y).prop_map(|(f, lt, x, y)| (f, 10f64.powf(lt), x, y))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn kernels_are_symmetric_positive_and_gaussian_dominated((f, t, x, y) in triple()) {
        let a = kernel_eval(&f, t, &[x], &[y]).unwrap();
        let b = kernel_eval(&f, t, &[y], &[x]).unwrap();
        prop_assert!(a.value >= 0.0);
        prop_assert!((a.value - b.value).abs() <= 1e-12 * a.value.max(1e-300), "{} vs {}", a.value, b.value);
        let (c_big, c) = f.gaussian_certificate();
        let ln_bound = c_big.ln() - 0.5 * (c * std::f64::consts::PI * t).ln() - (x - y).powi(2) / (c * t);
        prop_assert!(a.ln_value <= ln_bound + 1e-10 * ln_bound.abs().max(1.0), "{} > {}", a.ln_value, ln_bound);
        if a.value > 1e-290 {
            prop_assert!((a.value.ln() - a.ln_value).abs() <= 1e-10 * a.ln_value.abs().max(1.0));
        }
    }

    #[test]
    fn laguerre_is_dominated_by_bessel(beta in 0.2f64..3.0, lt in -3.0f64..1.0, x in 0.05f64..5.0, y in 0.05f64..5.0) {
        // The extra potential |x|² can only lower the kernel.
        let t = 10f64.powf(lt);
        let l = kernel_eval(&KernelFamily::laguerre(beta).unwrap(), t, &[x], &[y]).unwrap().value;
        let b = kernel_eval(&KernelFamily::bessel(beta).unwrap(), t, &[x], &[y]).unwrap().value;
        prop_assert!(l <= b * (1.0 + 1e-12), "{l} > {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_riesz_kernel_is_antisymmetric(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        prop_assume!((x - y).abs() > 1e-2);
        let f = KernelFamily::heat();
        let a = riesz_kernel(&f, 0, &[x], &[y]).unwrap();
        let b = riesz_kernel(&f, 0, &[y], &[x]).unwrap();
        prop_assert!((a + b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn riesz_split_sums_to_the_full_kernel((f, tau, x, y) in triple()) {
        prop_assume!((x - y).abs() > 1e-2 * (x.abs() + y.abs()).max(1e-2));
        let full = riesz_kernel(&f, 0, &[x], &[y]).unwrap();
        let split = riesz_kernel_split(&f, 0, tau.sqrt(), &[x], &[y]).unwrap();
        prop_assert!((split.total() - full).abs() <= 1e-9 * full.abs().max(1e-12), "{} vs {}", split.total(), full);
    }

    #[test]
    fn bessel_and_laguerre_riesz_kernels_obey_the_far_field_bound(
        beta in 0.3f64..3.0, laguerre in any::<bool>(), x in 0.05f64..6.0, ratio in 1.5f64..20.0, above in any::<bool>(),
    ) {
        let f = if laguerre { KernelFamily::laguerre(beta) } else { KernelFamily::bessel(beta) }.unwrap();
        let y = if above { x * ratio } else { x / ratio };
        let r = riesz_kernel(&f, 0, &[x], &[y]).unwrap();
        prop_assert!(r.abs() * (x - y).abs() <= riesz_far_constant(&f), "{}", r.abs() * (x - y).abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn maximal_function_is_sublinear(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, s1 in 0.2f64..1.5, s2 in 0.2f64..1.5, x in -3.0f64..3.0) {
        let fam = KernelFamily::heat();
        let cfg = TransformConfig::default();
        let p = Profile::Gaussian { center: c1, sigma: s1, amp: 1.0 };
        let q = Profile::Gaussian { center: c2, sigma: s2, amp: -0.7 };
        let grid: Vec<f64> = (0..=800).map(|k| -12.0 + 24.0 * k as f64 / 800.0).collect();
        let sum: Vec<f64> = grid.iter().map(|&z| p.eval(z) + q.eval(z)).collect();
        let f = SampledFunction::sample(p, Axis::Line).unwrap();
        let g = SampledFunction::sample(q, Axis::Line).unwrap();
        let h = SampledFunction::from_values(grid, sum).unwrap();
        let mf = maximal_function(&fam, &f, x, &cfg).unwrap().value;
        let mg = maximal_function(&fam, &g, x, &cfg).unwrap().value;
        let mh = maximal_function(&fam, &h, x, &cfg).unwrap().value;
        // Both sides are sampled sups; allow the grid's relative resolution.
        prop_assert!(mh <= (mf + mg) * (1.0 + 1e-4), "{mh} > {mf} + {mg}");
    }
}
