use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use removal_eval::dataset::{decode_rle, dilate, encode_rle, rasterize_polygon, BinaryMask};
use removal_eval::evaluation::{
    rank_removers, ComparisonDescriptor, ConfigEcho, MetricReport, QueryDescriptor, FID_STAR,
    SSIM, U_IDS_STAR,
};
use removal_eval::features::{decode_features, encode_features, toy_descriptor, ImageBuffer};
use removal_eval::paired::{psnr, ssim, ImagePair};
use removal_eval::stats::{compute_gaussian_stats, frechet_distance, sqrtm_psd, GaussianStats};
use removal_eval::svm::{train_linear_svm, u_ids, unseparability, SvmConfig};
use removal_eval::{Features, Features32};

fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(d, d) * 0.1
}

fn stats(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianStats<f64> {
    GaussianStats::new(mean, cov, 100).unwrap()
}

fn random_rows(n: usize, d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

fn features(prefix: &str, rows: Vec<Vec<f64>>) -> Features {
    Features::from_rows(rows.into_iter().enumerate().map(|(i, r)| (format!("{prefix}{i}"), r))).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Even-odd point-in-polygon test on pixel centers.
fn pnpoly(ring: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn random_mask(w: u32, h: u32, density: f64, rng: &mut ChaCha8Rng) -> BinaryMask {
    let bits = (0..w * h).map(|_| rng.random_bool(density)).collect();
    BinaryMask::from_bits(w, h, bits).unwrap()
}

fn noisy_image(seed: u64, w: u32, h: u32, channels: u8) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..w * h * channels as u32).map(|_| rng.random_range(30..=220)).collect();
    ImageBuffer::new(w, h, channels, data).unwrap()
}

fn add_noise(img: &ImageBuffer, amplitude: i32, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let sign = if rng.random_bool(0.5) { 1 } else { -1 };
            (v as i32 + sign * amplitude).clamp(0, 255) as u8
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), img.channels(), data).unwrap()
}

fn report(label: &str, fid: f64, uids: f64, s: f64) -> MetricReport {
    MetricReport {
        remover: label.into(),
        query: QueryDescriptor {
            count: 100,
            kernel_size: Some(0),
            coverage_band: None,
        },
        comparison: ComparisonDescriptor {
            count: 100,
            contains_target_class: false,
        },
        extractor_fingerprint: "fp".into(),
        metrics: [(FID_STAR, fid), (U_IDS_STAR, uids), (SSIM, s)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        config: ConfigEcho {
            svm: SvmConfig::default(),
            scalar: "f64".into(),
            covariance: "unbiased (n-1)".into(),
            svm_fit_rows: None,
            jitter: vec![],
            notes: vec![],
            run: None,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frechet_is_symmetric_and_non_negative(seed in any::<u64>(), d in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = stats(DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)), random_spd(d, &mut rng));
        let q = stats(DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)), random_spd(d, &mut rng));
        let pq = frechet_distance(&p, &q).unwrap();
        let qp = frechet_distance(&q, &p).unwrap();
        prop_assert!(pq >= 0.0 && qp >= 0.0);
        prop_assert!(rel_close(pq, qp, 1e-8), "{pq} vs {qp}");
    }

    #[test]
    fn frechet_is_translation_invariant(seed in any::<u64>(), d in 1usize..=16, shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_rows(60, d, 1.0, &mut rng);
        let b: Vec<Vec<f64>> = random_rows(50, d, 1.5, &mut rng)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v + 0.3).collect())
            .collect();
        let c: Vec<f64> = (0..d).map(|k| shift * (k as f64 + 1.0) / d as f64).collect();
        let moved = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| r.iter().zip(&c).map(|(v, s)| v + s).collect()).collect()
        };
        let base = frechet_distance(
            &compute_gaussian_stats(&features("a", a.clone())).unwrap(),
            &compute_gaussian_stats(&features("b", b.clone())).unwrap(),
        ).unwrap();
        let shifted = frechet_distance(
            &compute_gaussian_stats(&features("a", moved(&a))).unwrap(),
            &compute_gaussian_stats(&features("b", moved(&b))).unwrap(),
        ).unwrap();
        prop_assert!(rel_close(base, shifted, 1e-8), "{base} vs {shifted}");
    }

    #[test]
    fn equal_covariances_leave_the_mean_term(seed in any::<u64>(), d in 1usize..=32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_spd(d, &mut rng);
        let mu1 = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let mu2 = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let expected = (&mu1 - &mu2).norm_squared();
        let got = frechet_distance(&stats(mu1, cov.clone()), &stats(mu2, cov)).unwrap();
        prop_assert!((got - expected).abs() <= 1e-8 * expected.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn sqrtm_of_square_recovers_root(seed in any::<u64>(), d in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(d, &mut rng);
        let s = sqrtm_psd(&a).unwrap();
        let again = sqrtm_psd(&(&s * &s)).unwrap();
        prop_assert!((&again - &s).norm() / s.norm() <= 1e-7);
    }

    #[test]
    fn u_ids_stays_in_unit_interval(seed in any::<u64>(), shift in 0.0f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = features("r", random_rows(40, 4, 1.0, &mut rng));
        let fake = features("f", random_rows(30, 4, 1.0, &mut rng).into_iter()
            .map(|mut r| { r[0] += shift; r }).collect());
        let cfg = SvmConfig { max_epochs: 30, seed, ..SvmConfig::default() };
        let v = u_ids(&real, &fake, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let f = train_linear_svm(&real, &fake, &cfg).unwrap();
        let separated = real.rows().all(|r| f.decision(r) > 0.0) && fake.rows().all(|r| f.decision(r) < 0.0);
        prop_assert_eq!(v == 0.0, separated);
    }

    #[test]
    fn scaling_features_keeps_misclassified_rows(seed in any::<u64>(), exp in -6i32..=6) {
        // Powers of two scale exactly, so standardization cancels bit for bit.
        let scale = 2f64.powi(exp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real_rows = random_rows(40, 5, 1.0, &mut rng);
        let fake_rows: Vec<Vec<f64>> = random_rows(40, 5, 1.0, &mut rng)
            .into_iter().map(|mut r| { r[1] += 0.8; r }).collect();
        let scaled = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect()
        };
        let cfg = SvmConfig { max_epochs: 40, ..SvmConfig::default() };
        let wrong = |real: &Features, fake: &Features| -> Vec<String> {
            let f = train_linear_svm(real, fake, &cfg).unwrap();
            let mut ids: Vec<String> = real.ids().iter().zip(real.rows())
                .filter(|(_, r)| f.decision(r) <= 0.0).map(|(id, _)| id.clone()).collect();
            ids.extend(fake.ids().iter().zip(fake.rows())
                .filter(|(_, r)| f.decision(r) >= 0.0).map(|(id, _)| id.clone()));
            ids
        };
        let before = wrong(&features("r", real_rows.clone()), &features("f", fake_rows.clone()));
        let after = wrong(&features("r", scaled(&real_rows)), &features("f", scaled(&fake_rows)));
        prop_assert_eq!(before, after);
    }

    #[test]
    fn rle_round_trip(seed in any::<u64>(), w in 1u32..40, h in 1u32..40, density in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mask(w, h, density, &mut rng);
        let counts = encode_rle(&m);
        prop_assert_eq!(counts.iter().sum::<u64>(), (w * h) as u64);
        prop_assert_eq!(decode_rle(&counts, h, w).unwrap(), m);
    }

    #[test]
    fn polygon_matches_point_in_polygon(seed in any::<u64>(), n in 3usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Off-grid vertices keep pixel centers away from edges and vertices.
        let ring: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-3.0..27.0) + 0.0137, rng.random_range(-3.0..27.0) + 0.0291))
            .collect();
        let flat: Vec<f64> = ring.iter().flat_map(|&(x, y)| [x, y]).collect();
        let m = rasterize_polygon(&[flat], 24, 24).unwrap();
        for r in 0..24 {
            for c in 0..24 {
                prop_assert_eq!(m.get(r, c), pnpoly(&ring, c as f64 + 0.5, r as f64 + 0.5), "pixel ({}, {})", r, c);
            }
        }
    }

    #[test]
    fn dilation_is_monotone_and_extensive(seed in any::<u64>(), k1 in 0u32..12, k2 in 0u32..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mask(32, 32, 0.03, &mut rng);
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        let a = dilate(&m, lo);
        let b = dilate(&m, hi);
        prop_assert!(m.is_subset_of(&a) && m.is_subset_of(&b));
        prop_assert!(a.is_subset_of(&b));
        prop_assert_eq!(b.kernel_size(), hi);
    }

    #[test]
    fn container_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..20, d in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Features32::from_rows((0..n).map(|i| {
            let row = (0..d).map(|_| f32::from_bits(rng.random_range(0..0x7f00_0000u32)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            (format!("id/{i}/{}", rng.random::<u16>()), row)
        })).unwrap();
        let bytes = encode_features(&m).unwrap();
        let back: Features32 = decode_features(&bytes).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        let same_bits = back.data().iter().zip(m.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same_bits);
    }

    #[test]
    fn toy_blocks_are_distributions(seed in any::<u64>(), w in 1u32..24, h in 1u32..24) {
        let d = toy_descriptor(&noisy_image(seed, w, h, 3));
        for block in d.chunks(16) {
            prop_assert!((block.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn paired_metric_symmetry(seed in any::<u64>(), channels in prop::sample::select(vec![1u8, 3])) {
        let a = noisy_image(seed, 24, 20, channels);
        let b = add_noise(&a, 9, seed ^ 1);
        let ab = ImagePair::new("x", a.clone(), b).unwrap();
        prop_assert_eq!(psnr(&ab), psnr(&ab.swapped()));
        prop_assert!((ssim(&ab).unwrap() - ssim(&ab.swapped()).unwrap()).abs() <= 1e-9);
        let aa = ImagePair::new("x", a.clone(), a).unwrap();
        prop_assert!((ssim(&aa).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn ranking_ignores_monotone_rescaling(
        values in prop::collection::vec((0.01f64..10.0, 0.0f64..0.5, 0.0f64..1.0), 2..6),
        scale in 0.01f64..100.0,
    ) {
        let plain: Vec<MetricReport> = values.iter().enumerate()
            .map(|(i, &(f, u, s))| report(&format!("m{i}"), f, u, s)).collect();
        // Positive scaling for one metric, a strictly increasing map for another.
        let rescaled: Vec<MetricReport> = values.iter().enumerate()
            .map(|(i, &(f, u, s))| report(&format!("m{i}"), f * scale, u.powi(3) + u, s.exp())).collect();
        let a = rank_removers(&plain).unwrap();
        let b = rank_removers(&rescaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.metric, &y.metric);
            prop_assert_eq!(&x.order, &y.order);
        }
    }
}

#[test]
fn label_swap_with_negated_decision() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = features("a", random_rows(150, 6, 1.0, &mut rng).into_iter().map(|mut r| { r[0] += 0.7; r }).collect());
    let b = features("b", random_rows(150, 6, 1.0, &mut rng).into_iter().map(|mut r| { r[0] -= 0.7; r }).collect());
    let cfg = SvmConfig::default();
    let forward = unseparability(&train_linear_svm(&a, &b, &cfg).unwrap(), &a, &b);
    let swapped = unseparability(&train_linear_svm(&b, &a, &cfg).unwrap(), &b, &a);
    assert!((forward - swapped).abs() <= 0.02, "{forward} vs {swapped}");
}

#[test]
fn psnr_falls_as_noise_grows() {
    let img = noisy_image(3, 32, 32, 3);
    let ladder: Vec<f64> = [1, 2, 4, 8]
        .iter()
        .map(|&amp| psnr(&ImagePair::new("n", img.clone(), add_noise(&img, amp, 99)).unwrap()))
        .collect();
    assert!(ladder.windows(2).all(|w| w[1] <= w[0]), "{ladder:?}");
}
