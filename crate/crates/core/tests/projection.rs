use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use szego::projection::{apply_with_cache, GridFunction, GridSpec, SliceWeightCache};
use szego::{apply_szego_projection, build_model};

/// `S` applied to a single-node bump, against a direct sum over slices of
/// `ψ(x) ψ(x₀) w₀ e^{2πi(η(y − y₀) + τ·(t − t₀))} / (‖ψ‖² L_y L_tⁿ)` times the cell.
#[test]
fn delta_response_matches_direct_slice_sum() {
    let model = build_model(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
    let spec = GridSpec { n: 1, n_x: 24, n_y: 8, n_t: 8, x_max: 6.0, l_y: 8.0, l_t: 2.0 };
    let cache = SliceWeightCache::new(spec, &model).unwrap();
    let m = spec.slice_count();
    let (i0, j0, k0) = (11, 3, 5);
    let mut f = GridFunction::zeros(spec).unwrap();
    f.samples[i0 * m + j0 * spec.n_t + k0] = Complex64::new(1.0, 0.0);
    let (sf, _) = apply_with_cache(&f, &cache).unwrap();

    let w = spec.x_weights();
    let vol = spec.l_y * spec.l_t;
    let mut worst: f64 = 0.0;
    let scale = sf.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for i in 0..spec.n_x {
        for j in 0..spec.n_y {
            for k in 0..spec.n_t {
                let mut direct = Complex64::new(0.0, 0.0);
                for slice in cache.slices.iter().filter(|s| s.active()) {
                    let fr = &slice.frequency;
                    let phase = 2.0
                        * PI
                        * (fr.eta * (spec.y_node(j) - spec.y_node(j0)) + fr.tau[0] * (spec.t_node(k) - spec.t_node(k0)));
                    let amp = slice.profile[i] * slice.profile[i0] * w[i0] * spec.cell_yt() / (slice.discrete_norm * vol);
                    direct += Complex64::from_polar(amp, phase);
                }
                worst = worst.max((sf.samples[i * m + j * spec.n_t + k] - direct).norm());
            }
        }
    }
    assert!(worst < 1e-10 * scale, "{worst} vs {scale}");
}

#[test]
fn two_codimension_projection_is_orthogonal() {
    let model = build_model(&[0.0, 0.0, 1.0], &[2.0, 1.0]).unwrap();
    let spec = GridSpec { n: 2, n_x: 32, n_y: 8, n_t: 8, x_max: 8.0, l_y: 8.0, l_t: 4.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut random = || {
        let samples = (0..spec.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        GridFunction::from_samples(spec, samples).unwrap()
    };
    let (f, g) = (random(), random());
    let (sf, diag) = apply_szego_projection(&f, &model).unwrap();
    let (sg, _) = apply_szego_projection(&g, &model).unwrap();
    assert!(diag.in_sigma_count > 0);
    assert!((sf.inner(&g) - f.inner(&sg)).norm() < 1e-10 * f.norm() * g.norm());
    let (ssf, _) = apply_szego_projection(&sf, &model).unwrap();
    assert!(ssf.sub(&sf).norm() < 1e-10 * sf.norm());
    // f − Sf is orthogonal to the range
    assert!(f.sub(&sf).inner(&sg).norm() < 1e-10 * f.norm() * g.norm());
}
