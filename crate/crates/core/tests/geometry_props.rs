use matchvar::geometry::{ball_volume, fill_unit_ball, normalized_union_g, two_ball_union_volume, BallGeometry, BallUnionConfig};
use matchvar::rng::stream;
use proptest::prelude::*;
use rand::Rng;

fn union(d: usize, r1: f64, r2: f64, t: f64) -> f64 {
    two_ball_union_volume(&BallUnionConfig::new(d, r1, r2, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn scaling_law(d in 1usize..=10, r1 in 0.01f64..3.0, r2 in 0.01f64..3.0, t in 0.0f64..6.0, k in 0.05f64..20.0) {
        let base = union(d, r1, r2, t);
        let scaled = union(d, k * r1, k * r2, k * t);
        let expect = k.powi(d as i32) * base;
        prop_assert!((scaled - expect).abs() <= 1e-10 * expect, "{scaled} vs {expect}");
    }

    #[test]
    fn union_bounds(d in 1usize..=10, r1 in 0.0f64..3.0, r2 in 0.0f64..3.0, t in 0.0f64..6.0) {
        let (v1, v2) = (ball_volume(d, r1).unwrap(), ball_volume(d, r2).unwrap());
        let u = union(d, r1, r2, t);
        let slack = 1e-12 * (v1 + v2).max(1e-300);
        prop_assert!(u >= v1.max(v2) - slack && u <= v1 + v2 + slack, "{u} outside [{}, {}]", v1.max(v2), v1 + v2);
    }

    #[test]
    fn union_nondecreasing_in_distance(d in 1usize..=8, r1 in 0.01f64..2.0, r2 in 0.01f64..2.0, t in 0.0f64..4.0, dt in 0.0f64..1.0) {
        let (a, b) = (union(d, r1, r2, t), union(d, r1, r2, t + dt));
        prop_assert!(b >= a * (1.0 - 1e-12), "{a} then {b}");
    }

    #[test]
    fn union_is_symmetric(d in 1usize..=8, r1 in 0.01f64..2.0, r2 in 0.01f64..2.0, t in 0.0f64..4.0) {
        let (a, b) = (union(d, r1, r2, t), union(d, r2, r1, t));
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn normalized_union_increases_in_angle() {
    let mut rng = stream(11, 0);
    for d in [2usize, 3, 5, 8] {
        for _ in 0..1000 {
            let (v1, v2): (f64, f64) = (rng.gen_range(1e-3..1.0), rng.gen_range(1e-3..1.0));
            let mut last = f64::NEG_INFINITY;
            for s in 1..64 {
                let gamma = std::f64::consts::PI * s as f64 / 64.0;
                let g = normalized_union_g(d, v1, v2, gamma).unwrap();
                assert!(g > last, "d={d} v=({v1},{v2}) gamma={gamma}: {g} <= {last}");
                last = g;
            }
        }
    }
}

#[test]
fn union_agrees_with_rejection_sampling() {
    // bounding box of both balls, 4 standard errors
    let mut rng = stream(12, 0);
    let samples = 40_000;
    for d in [2usize, 3, 4] {
        let geom = BallGeometry::new(d);
        for _ in 0..100 {
            let (r1, r2): (f64, f64) = (rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5));
            let t: f64 = rng.gen_range(0.0..(r1 + r2) * 1.1);
            let lo: Vec<f64> = (0..d).map(|c| if c == 0 { (-r1).min(t - r2) } else { -r1.max(r2) }).collect();
            let hi: Vec<f64> = (0..d).map(|c| if c == 0 { r1.max(t + r2) } else { r1.max(r2) }).collect();
            let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
            let mut hits = 0u32;
            let mut z = vec![0.0; d];
            for _ in 0..samples {
                for c in 0..d {
                    z[c] = rng.gen_range(lo[c]..hi[c]);
                }
                let a: f64 = z.iter().map(|v| v * v).sum();
                let b: f64 = a - z[0] * z[0] + (z[0] - t) * (z[0] - t);
                if a <= r1 * r1 || b <= r2 * r2 {
                    hits += 1;
                }
            }
            let p = hits as f64 / samples as f64;
            let est = p * box_volume;
            let se = box_volume * (p * (1.0 - p) / samples as f64).sqrt();
            let exact = geom.union_volume(r1, r2, t);
            assert!((est - exact).abs() <= 4.0 * se + 1e-12, "d={d} r=({r1},{r2}) t={t}: {est}±{se} vs {exact}");
        }
    }
}

#[test]
fn ball_sampler_fills_the_ball_uniformly() {
    // P(|U| <= 1/2) = 2^-d
    let mut rng = stream(13, 0);
    for d in [1usize, 2, 5] {
        let mut p = vec![0.0; d];
        let n = 200_000;
        let inner = (0..n)
            .filter(|_| {
                fill_unit_ball(&mut p, &mut rng);
                p.iter().map(|v| v * v).sum::<f64>() <= 0.25
            })
            .count();
        let expect = 0.5f64.powi(d as i32);
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((inner as f64 / n as f64 - expect).abs() < 5.0 * se);
    }
}
