use std::sync::OnceLock;

use dnls::continuation::recenter;
use dnls::config::RunConfig;
use dnls::energy::{rho_norm_plus, Functional};
use dnls::hardy::{best_hardy_constant, rho_plus, weighted_mass, InequalityConstants};
use dnls::lattice::{dirichlet_energy, dirichlet_form, gamma, laplacian, lp_norm, translate, BoxDomain, Field, Site};
use dnls::nonlinearity::{simpson_primitive, Nonlinearity, Power, Saturable};
use dnls::spectral::{split_box, PeriodicPotential, Sign, SpectralSplit};
use dnls::Error;
use proptest::prelude::*;

fn split() -> &'static SpectralSplit {
    static S: OnceLock<SpectralSplit> = OnceLock::new();
    S.get_or_init(|| {
        let d = BoxDomain::new(3, 2).unwrap();
        split_box(&d, &PeriodicPotential::default_checkerboard(3, 1.0).unwrap(), None).unwrap()
    })
}

fn constants() -> &'static InequalityConstants {
    static C: OnceLock<InequalityConstants> = OnceLock::new();
    C.get_or_init(|| {
        let s = split();
        let k = best_hardy_constant(s.domain()).unwrap();
        let r = rho_plus(s).unwrap();
        InequalityConstants::from_parts(3, 2, k.kappa, r.value).unwrap()
    })
}

fn domain() -> &'static BoxDomain {
    split().domain()
}

fn field() -> impl Strategy<Value = Field> {
    prop::collection::vec(-2.0f64..2.0, domain().len()).prop_map(|v| Field::new(domain().clone(), v).unwrap())
}

fn plus_field() -> impl Strategy<Value = Field> {
    field().prop_map(|u| split().project(&u, Sign::Plus).unwrap())
}

fn minus_field() -> impl Strategy<Value = Field> {
    field().prop_map(|u| split().project(&u, Sign::Minus).unwrap())
}

fn inner(a: &Field, b: &Field) -> f64 {
    a.dot(b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn summation_by_parts(u in field()) {
        let lhs = dirichlet_energy(&u);
        let rhs = -inner(&laplacian(&u), &u);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn gamma_is_symmetric(u in field(), v in field()) {
        let d = domain();
        let inside: f64 = d.sites().map(|x| gamma(&u, &v, &x).unwrap()).sum();
        // the outer half of each boundary edge sits on a zero site outside the box
        let mut outside = 0.0;
        for i in 0..d.len() {
            d.for_each_neighbor(i, |j| {
                if j.is_none() {
                    outside += 0.5 * u.values()[i] * v.values()[i];
                }
            });
        }
        let total = inside + outside;
        prop_assert!((dirichlet_form(&u, &v).unwrap() - total).abs() <= 1e-10 * total.abs().max(1.0));
        let a = -inner(&laplacian(&u), &v);
        let b = -inner(&u, &laplacian(&v));
        prop_assert!((total - a).abs() <= 1e-10 * a.abs().max(1.0));
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn interpolation(u in field()) {
        let inf = lp_norm(&u, f64::INFINITY).unwrap();
        for (p, q) in [(2.0, 4.0), (2.0, 6.0), (4.0, 8.0)] {
            let lhs = lp_norm(&u, q).unwrap().powf(q);
            let rhs = lp_norm(&u, p).unwrap().powf(p) * inf.powf(q - p);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn laplacian_is_linear(u in field(), v in field(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let lhs = laplacian(&u.combine(a, &v, b).unwrap());
        let rhs = laplacian(&u).combine(a, &laplacian(&v), b).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn laplacian_is_local(u in field(), idx in 0usize..125, far in 0usize..125, bump in -1.0f64..1.0) {
        let d = domain();
        let x = d.site(idx);
        let y = d.site(far);
        let dist: i64 = x.0.iter().zip(&y.0).map(|(a, b)| (a - b).abs()).sum();
        prop_assume!(dist >= 2);
        let mut w = u.values().to_vec();
        w[far] += bump;
        let w = Field::new(d.clone(), w).unwrap();
        prop_assert_eq!(laplacian(&u).values()[idx], laplacian(&w).values()[idx]);
    }

    #[test]
    fn plus_and_minus_bounds(u in plus_field(), v in minus_field()) {
        let s = split();
        let a = s.operator();
        let lo = s.sigma_plus_box().unwrap();
        let hi = s.sigma_minus_box().unwrap();
        prop_assert!(a.quadratic(u.values()) >= lo * u.norm2().powi(2) * (1.0 - 1e-10));
        prop_assert!(a.quadratic(v.values()) <= hi * v.norm2().powi(2) * (1.0 - 1e-10));
    }

    #[test]
    fn hardy_inequality(u in field()) {
        let k = constants().kappa;
        prop_assert!(weighted_mass(&u, 1.0).unwrap() <= k * dirichlet_energy(&u) + 1e-9);
    }

    #[test]
    fn norm_equivalence_on_plus(u in plus_field(), frac in 0.0f64..0.999) {
        let c = constants();
        let s = split();
        let rho = frac * c.rho_plus / c.kappa;
        let full = s.norm_sq(&u).unwrap();
        let reduced = rho_norm_plus(s, &u, rho, c).unwrap();
        prop_assert!(reduced <= full * (1.0 + 1e-12));
        prop_assert!(reduced >= (1.0 - rho * c.kappa / c.rho_plus) * full - 1e-10 * full);
    }

    #[test]
    fn primitive_matches_quadrature(u in -5.0f64..5.0, p in 2.5f64..6.0) {
        let x = [0i64, 0, 0];
        let models: [Box<dyn Nonlinearity>; 2] = [Box::new(Power::new(p).unwrap()), Box::new(Saturable)];
        for m in &models {
            let q = simpson_primitive(|t| m.f(&x, t), u, 10_000);
            prop_assert!((m.primitive(&x, u) - q).abs() <= 1e-8 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn derivative_matches_differences(u in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0], p in 3.0f64..6.0) {
        let x = [1i64, 0, 0];
        let h = 1e-5;
        let models: [Box<dyn Nonlinearity>; 2] = [Box::new(Power::new(p).unwrap()), Box::new(Saturable)];
        for m in &models {
            let fd = (m.f(&x, u + h) - m.f(&x, u - h)) / (2.0 * h);
            prop_assert!((m.df(&x, u) - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn superquadratic_pointwise(u in -10.0f64..10.0, p in 2.1f64..8.0) {
        let x = [0i64, 1, 0];
        let models: [Box<dyn Nonlinearity>; 2] = [Box::new(Power::new(p).unwrap()), Box::new(Saturable)];
        for m in &models {
            let big_f = m.primitive(&x, u);
            prop_assert!(m.f(&x, u) * u >= 2.0 * big_f - 1e-12 * big_f.abs());
            prop_assert!(big_f >= 0.0);
        }
    }

    #[test]
    fn energy_identity(u in field(), rho in 0.0f64..0.2) {
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(split(), &p, rho).unwrap();
        let g = f.gradient(&u).unwrap();
        let lhs = f.value(u.values()) - 0.5 * inner(&g, &u);
        let rhs = f.sum_g(u.values());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn gradient_structure(u in field(), v in field(), a in -2.0f64..2.0, idx in 0usize..125) {
        let s = split();
        let p = Power::new(4.0).unwrap();
        let quad = Functional::new(s, &dnls::nonlinearity::Zero, 0.0).unwrap();
        // quadratic part: linear in u
        let lhs = quad.gradient(&u.combine(1.0, &v, a).unwrap()).unwrap();
        let rhs = quad.gradient(&u).unwrap().combine(1.0, &quad.gradient(&v).unwrap(), a).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-11 * (1.0 + x.abs()));
        }
        // nonlinear part: J'(u)(x) − (Au)(x) = −f(u(x))
        let f = Functional::new(s, &p, 0.0).unwrap();
        let g = f.gradient(&u).unwrap();
        let au = s.operator().apply(u.values());
        let x = domain().site(idx);
        let ux = u.values()[idx];
        prop_assert!((g.values()[idx] - au[idx] + p.f(&x.0, ux)).abs() <= 1e-12 * (1.0 + au[idx].abs()));
    }

    #[test]
    fn recenter_is_idempotent(u in field()) {
        let (c, shift) = recenter(&u).unwrap();
        let (c2, shift2) = recenter(&c).unwrap();
        prop_assert!(shift2.is_origin(), "shift {shift} then {shift2}");
        prop_assert_eq!(c.values()[domain().index(&Site::origin(3)).unwrap()].abs(), lp_norm(&u, f64::INFINITY).unwrap());
        prop_assert_eq!(c, c2);
    }

    #[test]
    fn unknown_config_keys_are_rejected(key in "[a-z]{3,10}", section in 0usize..4) {
        let known = ["dimension", "radius", "boundary", "side", "potential", "nonlinearity", "hardy", "rho",
            "bloch", "solver", "sweep", "output", "threads", "kind", "amplitude", "shift", "p", "weight", "grid",
            "solve", "seed", "armijo", "backtrack", "multistart", "floor"];
        prop_assume!(!known.contains(&key.as_str()));
        let base = "dimension = 3\nradius = 2\n[potential]\nkind = \"checkerboard\"\n[nonlinearity]\nkind = \"power\"\np = 4.0\n";
        let text = match section {
            0 => format!("{key} = 1\n{base}"),
            1 => base.replace("[potential]\n", &format!("[potential]\n{key} = 1\n")),
            2 => format!("{base}[solver]\n{key} = 1\n"),
            _ => format!("{base}[sweep]\n{key} = 1\n"),
        };
        prop_assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }
}

#[test]
fn eigen_residuals() {
    let s = split();
    let a = s.operator();
    for (j, &lambda) in s.eigenvalues().iter().enumerate() {
        let e: Vec<f64> = s.vectors().col(j).iter().copied().collect();
        let r: f64 = a
            .apply(&e)
            .iter()
            .zip(&e)
            .map(|(ae, e)| (ae - lambda * e).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(r <= 1e-9 * (1.0 + lambda.abs()), "pair {j}: {r:e}");
    }
}

#[test]
fn translation_decay() {
    let d = BoxDomain::new(3, 6).unwrap();
    let r = 1i64;
    let u = Field::from_fn(&d, |x| {
        let n: i64 = x.0.iter().map(|c| c.abs()).max().unwrap();
        if n <= r {
            1.0 + 0.1 * x.0[0] as f64
        } else {
            0.0
        }
    })
    .unwrap();
    let l2 = u.norm2().powi(2);
    let mut prev = f64::INFINITY;
    // u(· + shift) has its mass at −shift
    for k in 0..=(6 - r) {
        let moved = translate(&u, &Site(vec![-k, 0, 0])).unwrap();
        assert!((moved.norm2().powi(2) - l2).abs() <= 1e-12, "mass left the box at shift {k}");
        let m = weighted_mass(&moved, 1.0).unwrap();
        if k > r {
            assert!(m < prev, "not decreasing at shift {k}");
            assert!(m <= l2 / ((k - r) as f64).powi(2));
        }
        prev = m;
    }
}
