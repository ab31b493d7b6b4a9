use proptest::prelude::*;

use specforge::colorimetry::{project, quantize, BitDepth, QuantizationSpec};
use specforge::cube::{RgbImage, SpectralCube, Srf};
use specforge::io::{decode_cube, encode_cube};
use specforge::metamer::{candidate, decompose, Projector};
use specforge::metrics;
use specforge::optics::{blur_cube, form_aberrated, gen_chromatic, ChromaticParams, Padding, PsfStack};
use specforge::pipeline::{apply_ops, AugOp};

fn grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| 400.0 + 300.0 * i as f64 / (k - 1) as f64).collect()
}

fn cube_strategy(max_side: usize, max_bands: usize) -> impl Strategy<Value = SpectralCube> {
    sized_cube_strategy(1, max_side, max_bands)
}

fn sized_cube_strategy(min_side: usize, max_side: usize, max_bands: usize) -> impl Strategy<Value = SpectralCube> {
    (min_side..=max_side, min_side..=max_side, 3..=max_bands).prop_flat_map(|(h, w, k)| {
        prop::collection::vec(0.0f64..1.0, h * w * k)
            .prop_map(move |d| SpectralCube::new(h, w, grid(k), d, false).unwrap())
    })
}

fn srf_for(k: usize, seed: &[f64]) -> Srf {
    let q = (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            [
                (-(t - 0.2 - 0.1 * seed[0]).powi(2) * 8.0).exp(),
                (-(t - 0.5).powi(2) * (6.0 + seed[1])).exp(),
                (-(t - 0.8 + 0.1 * seed[2]).powi(2) * 8.0).exp(),
            ]
        })
        .collect();
    Srf::new(grid(k), q).unwrap()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hsc_roundtrip_is_f32_exact(cube in cube_strategy(6, 12)) {
        let back = decode_cube(&encode_cube(&cube).unwrap()).unwrap();
        prop_assert!(cube.same_shape(&back));
        for (a, b) in cube.wavelengths().iter().chain(cube.data()).zip(back.wavelengths().iter().chain(back.data())) {
            prop_assert_eq!(*a as f32 as f64, *b);
        }
        // a second trip is lossless
        prop_assert_eq!(encode_cube(&back).unwrap(), encode_cube(&decode_cube(&encode_cube(&back).unwrap()).unwrap()).unwrap());
    }

    #[test]
    fn projection_is_linear(
        a in cube_strategy(5, 10),
        s in -3.0f64..3.0,
        seed in prop::array::uniform3(0.0f64..1.0),
    ) {
        let srf = srf_for(a.bands(), &seed);
        let b = SpectralCube::new(a.height(), a.width(), a.wavelengths().to_vec(),
            a.data().iter().rev().cloned().collect(), false).unwrap();
        let combo = SpectralCube::new(a.height(), a.width(), a.wavelengths().to_vec(),
            a.data().iter().zip(b.data()).map(|(x, y)| x + s * y).collect(), false).unwrap();
        let (pa, pb, pc) = (project(&a, &srf).unwrap(), project(&b, &srf).unwrap(), project(&combo, &srf).unwrap());
        let expect: Vec<f64> = pa.data().iter().zip(pb.data()).map(|(x, y)| x + s * y).collect();
        prop_assert!(max_abs(pc.data(), &expect) < 1e-10);
    }

    #[test]
    fn metamer_candidates_share_rgb(
        cube in cube_strategy(5, 16),
        alpha in -3.0f64..3.0,
        seed in prop::array::uniform3(0.0f64..1.0),
    ) {
        let srf = srf_for(cube.bands(), &seed);
        prop_assume!(Projector::new(&srf).is_ok());
        let d = decompose(&cube, &srf).unwrap();
        let c = candidate(&cube, &d, alpha).unwrap();
        let diff = max_abs(project(&c, &srf).unwrap().data(), project(&cube, &srf).unwrap().data());
        prop_assert!(diff < 1e-9, "diff {}", diff);
    }

    #[test]
    fn quantize_is_idempotent(data in prop::collection::vec(-0.2f64..1.2, 3 * 4 * 5), sixteen in any::<bool>()) {
        let img = RgbImage::new(4, 5, data).unwrap();
        let spec = QuantizationSpec::new(if sixteen { BitDepth::Sixteen } else { BitDepth::Eight });
        let once = quantize(&img, spec);
        prop_assert_eq!(quantize(&once, spec), once.clone());
        prop_assert!(once.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn metric_invariances(
        est in prop::collection::vec(0.01f64..1.0, 2 * 3 * 6),
        gt in prop::collection::vec(0.01f64..1.0, 2 * 3 * 6),
        c in 0.1f64..10.0,
    ) {
        let mk = |d: Vec<f64>| SpectralCube::new(2, 3, grid(6), d, false).unwrap();
        let (e, g) = (mk(est.clone()), mk(gt.clone()));
        let (ce, cg) = (mk(est.iter().map(|v| v * c).collect()), mk(gt.iter().map(|v| v * c).collect()));
        let sam = metrics::sam(&e, &g).unwrap();
        prop_assert!((metrics::sam(&ce, &g).unwrap() - sam).abs() < 1e-12);
        let mrae = metrics::mrae(&e, &g).unwrap();
        prop_assert!((metrics::mrae(&ce, &cg).unwrap() - mrae).abs() < 1e-12 * mrae.max(1.0));
        prop_assert!((metrics::rmse(&ce, &cg).unwrap() - c * metrics::rmse(&e, &g).unwrap()).abs() < 1e-12);
        // symmetric distances
        prop_assert!((metrics::rmse(&e, &g).unwrap() - metrics::rmse(&g, &e).unwrap()).abs() < 1e-15);
        prop_assert!((metrics::l1(&e, &g).unwrap() - metrics::l1(&g, &e).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn aberrated_formation_is_linear(
        a in sized_cube_strategy(3, 7, 6),
        s in -2.0f64..2.0,
        kernel in prop::collection::vec(0.0f64..1.0, 9),
        circular in any::<bool>(),
    ) {
        let k = a.bands();
        let srf = srf_for(k, &[0.5, 0.5, 0.5]);
        let total: f64 = kernel.iter().sum::<f64>() + 1e-3;
        // a different rotation of the same taps per band
        let kernels: Vec<f64> = (0..k)
            .flat_map(|b| (0..9).map(move |i| b + i))
            .map(|i| (kernel[i % 9] + 1e-3 / 9.0) / total)
            .collect();
        let padding = if circular { Padding::Circular } else { Padding::Reflect };
        let psf = PsfStack::new(grid(k), 3, 3, kernels, padding).unwrap();
        let b = SpectralCube::new(a.height(), a.width(), grid(k), a.data().iter().map(|v| 1.0 - v).collect(), false).unwrap();
        let combo = SpectralCube::new(a.height(), a.width(), grid(k),
            a.data().iter().zip(b.data()).map(|(x, y)| x + s * y).collect(), false).unwrap();
        let fa = form_aberrated(&a, &psf, &srf).unwrap();
        let fb = form_aberrated(&b, &psf, &srf).unwrap();
        let fc = form_aberrated(&combo, &psf, &srf).unwrap();
        let expect: Vec<f64> = fa.data().iter().zip(fb.data()).map(|(x, y)| x + s * y).collect();
        prop_assert!(max_abs(fc.data(), &expect) < 1e-9);
    }

    #[test]
    fn circular_blur_conserves_energy(
        cube in sized_cube_strategy(17, 28, 5),
        sigma_slope in 0.0f64..0.02,
        shift_slope in -0.01f64..0.01,
    ) {
        let params = ChromaticParams { sigma_slope, shift_slope, ..ChromaticParams::default() };
        let psf = gen_chromatic(cube.wavelengths(), &params, 17).unwrap().with_padding(Padding::Circular);
        let blurred = blur_cube(&cube, &psf).unwrap();
        let n = cube.pixels();
        for b in 0..cube.bands() {
            let before: f64 = cube.band(b).iter().sum();
            let after: f64 = blurred[b * n..(b + 1) * n].iter().sum();
            prop_assert!((before - after).abs() < 1e-9 * before.max(1.0), "band {} {} vs {}", b, before, after);
        }
    }

    #[test]
    fn augmentation_group_laws(cube in cube_strategy(6, 4)) {
        let id = |ops: &[AugOp]| apply_ops(&cube, ops) == cube;
        prop_assert!(id(&[AugOp::FlipH, AugOp::FlipH]));
        prop_assert!(id(&[AugOp::FlipV, AugOp::FlipV]));
        prop_assert!(id(&[AugOp::Rot180, AugOp::Rot180]));
        prop_assert!(id(&[AugOp::Rot90, AugOp::Rot270]));
        prop_assert!(id(&[AugOp::Rot90; 4]));
        prop_assert_eq!(apply_ops(&cube, &[AugOp::Rot90, AugOp::Rot90]), apply_ops(&cube, &[AugOp::Rot180]));
        prop_assert_eq!(apply_ops(&cube, &[AugOp::FlipH, AugOp::FlipV]), apply_ops(&cube, &[AugOp::Rot180]));
    }
}
