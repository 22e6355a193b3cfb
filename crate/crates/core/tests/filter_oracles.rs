mod support;

use dynenh::enhance::{guided, wls_smooth, EnhanceParams};
use dynenh::imgcore::{box_filter, gaussian_blur, Plane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles::*;

fn textured(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane {
    let noise = Plane::from_fn(h, w, |_, _| rng.gen_range(0.0..1.0));
    let smooth = gaussian_blur(&noise, 1.5);
    Plane::from_fn(h, w, |i, j| {
        let edge = if j > w / 2 { 0.35 } else { 0.0 };
        (0.2 + edge + 0.6 * smooth.get(i, j) + 0.05 * noise.get(i, j)).clamp(0.0, 1.0)
    })
}

#[test]
fn wls_solves_dense_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y = textured(&mut rng, 32, 32);
    let p = EnhanceParams::default();
    let u = wls_smooth(&y, p.wls_lambda, p.wls_alpha, p.wls_eps).unwrap();
    let a = dense_wls_matrix(&y, p.wls_lambda, p.wls_alpha, p.wls_eps);
    assert!(residual_inf(&a, u.data(), y.data()) < 1e-6);
    let direct = dense_solve(a, y.data().to_vec());
    let diff = direct.iter().zip(u.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn guided_matches_window_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (radius, eps) in [(1, 1e-3), (2, 1e-2), (3, 1e-4)] {
        let y = textured(&mut rng, 16, 16);
        let g = textured(&mut rng, 16, 16);
        for guide in [&y, &g] {
            let fast = guided(&y, guide, radius, eps).unwrap();
            let slow = naive_guided(&y, guide, radius, eps);
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-8);
        }
    }
}

#[test]
fn box_matches_naive_window_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..120 {
        let h = rng.gen_range(1..20);
        let w = rng.gen_range(1..20);
        let radius = rng.gen_range(0..6);
        let p = Plane::from_fn(h, w, |_, _| rng.gen_range(-2.0..2.0));
        assert!(box_filter(&p, radius).max_abs_diff(&naive_box(&p, radius)).unwrap() < 1e-10);
    }
}
