use fabscan_core::features::{ahog, dense_sift, AHOG_DIM, SIFT_DIM};
use fabscan_core::imaging::{gaussian_smooth, local_minima, projection_curve, Axis, GrayImage, Rect};
use fabscan_core::segment::{segment_rule1, segment_rule2, SegmentConfig};
use fabscan_core::synthgen::{generate_corpus, generate_fabric, inject_defect, CorpusSpec, DefectKind, DefectSpec, FabricSpec};
use proptest::prelude::*;

fn image() -> impl Strategy<Value = GrayImage> {
    (1usize..12, 1usize..12)
        .prop_flat_map(|(w, h)| prop::collection::vec(0.0f64..1.0, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap()))
}

proptest! {
    #[test]
    fn transpose_swaps_projection_axes(img in image()) {
        let a = projection_curve(&img.transpose(), Axis::Horizontal).unwrap().values;
        let b = projection_curve(&img, Axis::Vertical).unwrap().values;
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn minima_are_sorted_and_separated(values in prop::collection::vec(-1.0f64..1.0, 0..80), sep in 1usize..12) {
        let m = local_minima(&values, sep);
        for w in m.windows(2) {
            prop_assert!(w[0] < w[1]);
            prop_assert!(w[1] - w[0] >= sep);
        }
        for &i in &m {
            prop_assert!(i > 0 && i + 1 < values.len());
            prop_assert!(values[i] <= values[i - 1] && values[i] <= values[i + 1]);
        }
    }

    #[test]
    fn smoothing_keeps_interior_mass(vals in prop::collection::vec(0.0f64..1.0, 36), sigma in 0.5f64..2.0) {
        // content sits well inside a zero border wider than the kernel radius
        let img = GrayImage::from_fn(20, 20, |x, y| if (7..13).contains(&x) && (7..13).contains(&y) { vals[(y - 7) * 6 + x - 7] } else { 0.0 });
        let out = gaussian_smooth(&img, sigma, 3).unwrap();
        prop_assert!((out.sum() - img.sum()).abs() < 1e-9);
    }

    #[test]
    fn descriptors_are_pure(seed in 0u64..1000) {
        let (img, _) = generate_fabric(&FabricSpec::default().with_seed(seed)).unwrap();
        let smooth = gaussian_smooth(&img, 1.0, 2).unwrap();
        let cfg = SegmentConfig::default();
        let srs = segment_rule1(&smooth, &cfg).unwrap();
        let sr = &srs[seed as usize % srs.len()];
        prop_assert_eq!(ahog(sr).unwrap().values, ahog(&sr.clone()).unwrap().values);
        let p = &segment_rule2(sr, &cfg).unwrap()[4];
        let a: Vec<_> = dense_sift(p, 16, 2).unwrap().into_iter().map(|d| d.values).collect();
        let b: Vec<_> = dense_sift(&p.clone(), 16, 2).unwrap().into_iter().map(|d| d.values).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn default_corpus_dimensions() {
    let cfg = SegmentConfig::default();
    let corpus = generate_corpus(&FabricSpec::default(), &CorpusSpec::default()).unwrap();
    let (mut subregions, mut primitives) = (0, 0);
    for s in &corpus {
        let smooth = gaussian_smooth(&s.image, 1.0, 2).unwrap();
        let srs = segment_rule1(&smooth, &cfg).unwrap();
        assert_eq!(srs.len(), 12, "{}", s.id);
        for sr in &srs {
            assert_eq!(ahog(sr).unwrap().values.len(), AHOG_DIM);
            let prims = segment_rule2(sr, &cfg).unwrap();
            assert_eq!(prims.len(), 9);
            for p in &prims {
                let d = dense_sift(p, 16, 2).unwrap();
                assert_eq!(d.len(), 3);
                for v in &d {
                    assert_eq!(v.values.len(), SIFT_DIM);
                    let n = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
                    assert!((n - 1.0).abs() < 1e-9 || n == 0.0);
                    assert!(v.values.iter().all(|x| (0.0..=1.0).contains(x)));
                }
            }
            primitives += prims.len();
        }
        subregions += srs.len();
    }
    assert_eq!((subregions, primitives), (600, 5400));
}

fn primitive_crops(img: &GrayImage) -> Vec<Vec<u64>> {
    let cfg = SegmentConfig::default();
    let smooth = gaussian_smooth(img, 1.0, 2).unwrap();
    let mut crops: Vec<Vec<u64>> = segment_rule1(&smooth, &cfg)
        .unwrap()
        .iter()
        .flat_map(|sr| segment_rule2(sr, &cfg).unwrap())
        .map(|p| p.pixels.data().iter().map(|v| v.to_bits()).collect())
        .collect();
    crops.sort();
    crops
}

#[test]
fn lattice_period_shift_keeps_primitive_multiset() {
    let base = FabricSpec::default();
    let (px, py) = base.lattice_period();
    let spec = FabricSpec { width: base.width + px, height: base.height + py, noise_amplitude: 0.0, ..base.clone() };
    let (big, _) = generate_fabric(&spec).unwrap();
    let a = big.crop(Rect::new(0, 0, base.width, base.height));
    let b = big.crop(Rect::new(px as i64, py as i64, base.width, base.height));
    let (ca, cb) = (primitive_crops(&a), primitive_crops(&b));
    assert_eq!(ca.len(), 108);
    assert_eq!(ca, cb);
}

#[test]
fn defects_only_touch_their_masks() {
    let spec = FabricSpec::default().with_seed(21);
    let (clean, truth) = generate_fabric(&spec).unwrap();
    let mut img = clean.clone();
    let mut t = truth.clone();
    for (i, kind) in DefectKind::ALL.into_iter().enumerate() {
        let before = t.primitive_flags.clone();
        (img, t) = inject_defect(&spec, &img, &t, &DefectSpec::new(kind, 1 + 2 * i, i)).unwrap();
        assert!(before.iter().zip(&t.primitive_flags).all(|(b, a)| !b || *a));
    }
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !t.in_mask(x as i64, y as i64) {
                assert_eq!(img.get(x, y), clean.get(x, y));
            }
        }
    }
}

#[test]
fn hole_moves_ahog_further_than_noise() {
    let cfg = SegmentConfig::default();
    let twin = |seed: u64, hole: bool| {
        let spec = FabricSpec::default().with_seed(seed);
        let (mut img, truth) = generate_fabric(&spec).unwrap();
        if hole {
            img = inject_defect(&spec, &img, &truth, &DefectSpec::new(DefectKind::Hole, 4, 4)).unwrap().0;
        }
        let srs = segment_rule1(&gaussian_smooth(&img, 1.0, 2).unwrap(), &cfg).unwrap();
        ahog(&srs[5]).unwrap().values
    };
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (clean, noisy, holed) = (twin(3, false), twin(4, false), twin(3, true));
    assert!(d(&clean, &holed) > d(&clean, &noisy));
}
