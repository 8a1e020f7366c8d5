mod common;

use common::rng;
use ompath_core::{holder_norm, holder_seminorm, sup_norm, DiscretePath, HolderParams};
use proptest::prelude::*;
use rand::Rng;

/// Reference O(N^2) scan, written independently of the library.
fn brute_seminorm(path: &DiscretePath, alpha: f64) -> f64 {
    let n = path.dimension();
    let grid = path.grid();
    let mut total = 0.0;
    for i in 0..n {
        let xs = path.coordinate(i);
        let mut best = 0.0_f64;
        for j in 0..xs.len() {
            for k in j + 1..xs.len() {
                best = best.max((xs[k] - xs[j]).abs() / (grid[k] - grid[j]).powf(alpha));
            }
        }
        total += best;
    }
    total / n as f64
}

fn random_walk(r: &mut impl Rng, steps: usize, n: usize) -> DiscretePath {
    let mut values = vec![0.0; (steps + 1) * n];
    for k in 1..=steps {
        for i in 0..n {
            values[k * n + i] = values[(k - 1) * n + i] + r.random_range(-1.0..1.0) / (steps as f64).sqrt();
        }
    }
    DiscretePath::from_values(steps, n, values).unwrap()
}

#[test]
fn optimized_scans_equal_brute_force_exactly() {
    let mut r = rng(3);
    for &(steps, n) in &[(1, 1), (7, 1), (64, 2), (300, 1), (1500, 1), (5000, 1)] {
        let path = random_walk(&mut r, steps, n);
        for alpha in [0.05, 0.2, 0.24] {
            let hp = HolderParams::new(alpha).unwrap();
            assert_eq!(
                holder_seminorm(&path, &hp),
                brute_seminorm(&path, alpha),
                "steps {steps}, n {n}, alpha {alpha}"
            );
        }
    }
}

#[test]
fn hand_values() {
    let hp = HolderParams::new(0.25).unwrap();
    let tent = DiscretePath::from_values(2, 1, vec![0.0, 1.0, 0.0]).unwrap();
    assert!((holder_seminorm(&tent, &hp) - 2f64.powf(0.25)).abs() < 1e-15);
    let line = DiscretePath::from_scalar_fn(100, |t| t).unwrap();
    assert!((holder_norm(&line, &hp) - 2.0).abs() < 1e-12);
    let two = DiscretePath::from_fn(4, 2, |t, x| {
        x[0] = t;
        x[1] = 3.0 * t;
    })
    .unwrap();
    assert_eq!(sup_norm(&two), 2.0);
}

fn arb_path() -> impl Strategy<Value = DiscretePath> {
    (1usize..3, 2usize..40).prop_flat_map(|(n, steps)| {
        prop::collection::vec(-5.0f64..5.0, (steps + 1) * n)
            .prop_map(move |v| DiscretePath::from_values(steps, n, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn absolute_homogeneity(path in arb_path(), c in -4.0f64..4.0, alpha in 0.01f64..0.249) {
        let hp = HolderParams::new(alpha).unwrap();
        let lhs = holder_norm(&path.scaled(c), &hp);
        let rhs = c.abs() * holder_norm(&path, &hp);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn triangle_inequality(
        (p, q) in arb_path().prop_flat_map(|p| {
            let (steps, n) = (p.steps(), p.dimension());
            (Just(p), prop::collection::vec(-5.0f64..5.0, (steps + 1) * n)
                .prop_map(move |v| DiscretePath::from_values(steps, n, v).unwrap()))
        }),
        alpha in 0.01f64..0.249,
    ) {
        let hp = HolderParams::new(alpha).unwrap();
        let neg_q = q.scaled(-1.0);
        let sum = p.difference(&neg_q).unwrap();
        prop_assert!(holder_norm(&sum, &hp) <= holder_norm(&p, &hp) + holder_norm(&q, &hp) + 1e-12);
    }

    #[test]
    fn subgrid_never_exceeds_full_grid(path in arb_path(), stride in 1usize..4, alpha in 0.01f64..0.249) {
        prop_assume!(path.steps() % stride == 0);
        let hp = HolderParams::new(alpha).unwrap();
        let coarse = path.subsample(stride).unwrap();
        prop_assert!(holder_seminorm(&coarse, &hp) <= holder_seminorm(&path, &hp));
    }
}
