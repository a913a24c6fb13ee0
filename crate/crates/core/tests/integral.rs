// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use topsurf_core::image::{compute_integral_image, GrayscaleImage, PixelRect};

/// Dyadic intensities keep every partial sum exact in f64.
fn image_strategy() -> impl Strategy<Value = GrayscaleImage> {
    (1usize..=64, 1usize..=64).prop_flat_map(|(w, h)| {
        prop::collection::vec(0u16..=256, w * h).prop_map(move |v| {
            GrayscaleImage::new(w, h, v.into_iter().map(|p| f64::from(p) / 256.0).collect()).unwrap()
        })
    })
}

fn brute_sum(img: &GrayscaleImage, r: PixelRect) -> f64 {
    let mut s = 0.0;
    for y in r.y.max(0)..(r.y + r.height).min(img.height() as i64) {
        for x in r.x.max(0)..(r.x + r.width).min(img.width() as i64) {
            s += img.get(x as usize, y as usize);
        }
    }
    s
}

fn brute_replicated(img: &GrayscaleImage, r: PixelRect) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut s = 0.0;
    for y in r.y..r.y + r.height {
        for x in r.x..r.x + r.width {
            s += img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize);
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn box_sums_are_exact(
        img in image_strategy(),
        rects in prop::collection::vec((-10i64..74, -10i64..74, 0i64..80, 0i64..80), 1..20),
    ) {
        let ii = compute_integral_image(&img);
        for (x, y, w, h) in rects {
            let r = PixelRect::new(x, y, w, h);
            prop_assert_eq!(ii.box_sum(r), brute_sum(&img, r));
            prop_assert_eq!(ii.box_sum_replicated(r), brute_replicated(&img, r));
        }
        let whole = PixelRect::new(0, 0, img.width() as i64, img.height() as i64);
        prop_assert_eq!(ii.box_sum(whole), img.data().iter().sum::<f64>());
    }
}
