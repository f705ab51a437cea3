//! Property tests over the algorithm surface: randomized inputs, law-style
//! assertions.

use canopy_core::cloud::{cloud_fraction, screen_clouds, CloudRule};
use canopy_core::fusion::{binarize, sigma_filter, weighted_average, FusionConfig, WeightedMask};
use canopy_core::metrics::ConfusionCounts;
use canopy_core::morph::{dilate, erode, opening, SeShape, StructElement};
use canopy_core::preprocess::{percentile_clip_normalize, ClipSpec};
use canopy_core::{BinaryMask, ImageMeta, MultiBandImage, ProbMask, SatelliteSource};
use proptest::prelude::*;

fn meta3(source: SatelliteSource) -> ImageMeta {
    let names = vec!["B4".to_string(), "B3".to_string(), "B2".to_string()];
    ImageMeta::new(source, -3.0, -54.0, 2020, 6, names).unwrap()
}

fn arb_mask(max_side: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(0u8..=1, w * h)
            .prop_map(move |bits| BinaryMask::new(w, h, bits).unwrap())
    })
}

fn arb_rgb_image() -> impl Strategy<Value = MultiBandImage> {
    (1usize..=10, 1usize..=10).prop_flat_map(|(w, h)| {
        prop::collection::vec(-500.0f32..500.0, 3 * w * h).prop_map(move |samples| {
            MultiBandImage::new(w, h, 3, samples, meta3(SatelliteSource::Sentinel2)).unwrap()
        })
    })
}

fn arb_prob_group() -> impl Strategy<Value = Vec<ProbMask>> {
    (1usize..=6, 1usize..=6, 1usize..=6).prop_flat_map(|(w, h, n)| {
        prop::collection::vec(prop::collection::vec(0.0f32..=1.0, w * h), n).prop_map(
            move |grids| {
                grids
                    .into_iter()
                    .map(|probs| {
                        ProbMask::new(w, h, probs, meta3(SatelliteSource::Sentinel2)).unwrap()
                    })
                    .collect()
            },
        )
    })
}

fn arb_se() -> impl Strategy<Value = StructElement> {
    (
        prop_oneof![Just(SeShape::Square), Just(SeShape::Cross)],
        1u32..=3,
    )
        .prop_map(|(shape, radius)| StructElement { shape, radius })
}

proptest! {
    #[test]
    fn set_pixel_round_trips(
        img in arb_rgb_image(),
        band in 0usize..3,
        pos in (0.0f64..1.0, 0.0f64..1.0),
        value in -100.0f32..100.0,
    ) {
        let mut img = img;
        let row = (pos.0 * img.height() as f64) as usize;
        let col = (pos.1 * img.width() as f64) as usize;
        let before = img.clone();
        img.set_pixel(band, row, col, value).unwrap();
        prop_assert_eq!(img.pixel_at(band, row, col).unwrap(), value);

        let mut diffs = 0;
        for (a, b) in img.samples().iter().zip(before.samples()) {
            if a.to_bits() != b.to_bits() {
                diffs += 1;
            }
        }
        prop_assert!(diffs <= 1, "set_pixel touched {} samples", diffs);
    }

    #[test]
    fn complement_partitions_pixels(mask in arb_mask(12)) {
        let total = mask.width() * mask.height();
        prop_assert_eq!(mask.ones() + mask.complement().ones(), total);
        let sum = mask.mask_ratio().unwrap() + mask.complement().mask_ratio().unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_output_in_unit_range(
        img in arb_rgb_image(),
        low in 0.0f64..20.0,
        high in 0.0f64..20.0,
    ) {
        let spec = ClipSpec { low_pct: low, high_pct: high };
        let out = percentile_clip_normalize(&img, &spec).unwrap();
        for &s in out.samples() {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn normalize_is_monotone_within_band(img in arb_rgb_image()) {
        let out = percentile_clip_normalize(&img, &ClipSpec::default()).unwrap();
        for band in 0..3 {
            let raw = img.band(band).unwrap();
            let norm = out.channel(band);
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    if raw[i] <= raw[j] {
                        prop_assert!(norm[i] <= norm[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn screening_is_a_subsequence_keeping_all_sar(
        fills in prop::collection::vec((0u8..4, 0.0f32..400.0), 1..10),
        value_threshold in 0.0f32..300.0,
        fraction_threshold in 0.01f64..=1.0,
    ) {
        let rule = CloudRule { value_threshold, fraction_threshold, ..CloudRule::default() };
        let entries: Vec<(MultiBandImage, usize)> = fills
            .iter()
            .enumerate()
            .map(|(i, &(s, fill))| {
                let source = SatelliteSource::ALL[s as usize];
                let img = MultiBandImage::new(
                    2, 2, 3, vec![fill; 12], meta3(source),
                ).unwrap();
                (img, i)
            })
            .collect();
        let sar_ids: Vec<usize> = entries
            .iter()
            .filter(|(img, _)| img.meta.source.is_sar())
            .map(|&(_, i)| i)
            .collect();

        let kept = screen_clouds(entries, &rule).unwrap();
        let kept_ids: Vec<usize> = kept.iter().map(|&(_, i)| i).collect();

        // Strictly increasing ids = subsequence of the input order.
        prop_assert!(kept_ids.windows(2).all(|w| w[0] < w[1]));
        for id in sar_ids {
            prop_assert!(kept_ids.contains(&id));
        }
    }

    #[test]
    fn cloud_fraction_monotone_in_threshold(
        img in arb_rgb_image(),
        t1 in 0.0f32..300.0,
        t2 in 0.0f32..300.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let rule_lo = CloudRule { value_threshold: lo, ..CloudRule::default() };
        let rule_hi = CloudRule { value_threshold: hi, ..CloudRule::default() };
        prop_assert!(
            cloud_fraction(&img, &rule_hi).unwrap() <= cloud_fraction(&img, &rule_lo).unwrap()
        );
    }

    #[test]
    fn binarize_monotone_in_threshold(
        group in arb_prob_group(),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        for mask in &group {
            prop_assert!(binarize(mask, hi).subset_of(&binarize(mask, lo)));
        }
    }

    #[test]
    fn sigma_filter_shrinks_but_never_empties(group in arb_prob_group()) {
        let cfg = FusionConfig::default();
        let weighted: Vec<WeightedMask> = group
            .iter()
            .map(|m| WeightedMask { mask: m.clone(), weight: 1.0, month_offset: 0 })
            .collect();
        let kept = sigma_filter(weighted, &cfg);
        prop_assert!(!kept.is_empty());
        prop_assert!(kept.len() <= group.len());

        // Sub-multiset: every kept mask appears in the input at least as
        // often as in the output.
        for wm in &kept {
            let in_input = group.iter().filter(|m| m.probs() == wm.mask.probs()).count();
            let in_kept = kept.iter().filter(|k| k.mask.probs() == wm.mask.probs()).count();
            prop_assert!(in_kept <= in_input);
        }
    }

    #[test]
    fn weighted_average_inside_envelope(
        group in arb_prob_group(),
        weights in prop::collection::vec(0.1f64..10.0, 6),
    ) {
        let weighted: Vec<WeightedMask> = group
            .iter()
            .zip(&weights)
            .map(|(m, &w)| WeightedMask { mask: m.clone(), weight: w, month_offset: 0 })
            .collect();
        let avg = weighted_average(&weighted).unwrap();
        for (i, &p) in avg.probs().iter().enumerate() {
            let lo = weighted.iter().map(|wm| wm.mask.probs()[i]).fold(f32::INFINITY, f32::min);
            let hi = weighted
                .iter()
                .map(|wm| wm.mask.probs()[i])
                .fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(p >= lo - 1e-6 && p <= hi + 1e-6);
        }
    }

    #[test]
    fn f1_iou_identity_on_random_counts(
        tp in 0u64..100_000,
        fp in 0u64..100_000,
        fneg in 0u64..100_000,
        tn in 0u64..100_000,
    ) {
        let c = ConfusionCounts { true_pos: tp, false_pos: fp, false_neg: fneg, true_neg: tn };
        let identity = 2.0 * c.iou() / (1.0 + c.iou());
        prop_assert!((c.f1() - identity).abs() <= 1e-12);
    }

    #[test]
    fn opening_laws(mask in arb_mask(16), se in arb_se()) {
        let opened = opening(&mask, &se);
        prop_assert!(opened.subset_of(&mask));
        prop_assert_eq!(opening(&opened, &se), opened.clone());

        let eroded = erode(&mask, &se);
        prop_assert!(eroded.subset_of(&mask));
        prop_assert!(mask.subset_of(&dilate(&mask, &se)) || mask.ones() == 0);
    }
}
