
use proptest::prelude::*;

use panogen::canvas::{attach_view, compose, solid_angle_fraction, Panorama};
use panogen::conditioning::{Conditioner, ConditioningConfig};
use panogen::geom::{
    dir_to_lon_lat, lon_lat_to_dir, rotate_horizontal, rotate_mask_horizontal, view_footprint,
    wrap_lon, EquirectImage, Mask, Raster, ViewSpec,
};
use panogen::scheduler::{next_view, plan_traversal};

fn pano(width: usize, seed: u64) -> Panorama {
    let h = width / 2;
    let img = EquirectImage::new(Raster::from_fn(width, h, 3, |x, y, c| {
        ((x * 7 + y * 13 + c * 3 + seed as usize) % 17) as f32 / 16.0
    }))
    .unwrap();
    let mask = Mask::from_fn(width, h, |x, y| (x * 31 + y * 17 + seed as usize) % 5 < 2);
    Panorama::new(img, mask).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direction_round_trip(lon in -179.9f64..179.9, lat in -89.9f64..89.9) {
        let (l, t) = dir_to_lon_lat(lon_lat_to_dir(lon, lat));
        prop_assert!((wrap_lon(l - lon)).abs() < 1e-9);
        prop_assert!((t - lat).abs() < 1e-9);
    }

    #[test]
    fn quarter_turns_compose(k1 in 0usize..4, k2 in 0usize..4, seed in 0u64..100) {
        let p = pano(64, seed);
        let (a, b) = (90.0 * k1 as f64, 90.0 * k2 as f64);
        let twice = rotate_horizontal(&rotate_horizontal(p.image(), a), b);
        let once = rotate_horizontal(p.image(), a + b);
        prop_assert_eq!(twice, once);
        let m = rotate_mask_horizontal(&rotate_mask_horizontal(p.mask(), a), b);
        prop_assert_eq!(m, rotate_mask_horizontal(p.mask(), a + b));
        prop_assert_eq!(rotate_horizontal(p.image(), 360.0), p.image().clone());
    }

    #[test]
    fn column_rotations_keep_known_area(cols in 0usize..64, seed in 0u64..100) {
        let p = pano(64, seed);
        let r = rotate_mask_horizontal(p.mask(), cols as f64 * 360.0 / 64.0);
        prop_assert!((solid_angle_fraction(&r) - solid_angle_fraction(p.mask())).abs() < 1e-12);
    }

    #[test]
    fn compose_is_associative(s1 in 0u64..50, s2 in 50u64..100, s3 in 100u64..150) {
        let (a, b, c) = (pano(16, s1), pano(16, s2), pano(16, s3));
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn attach_only_fills_unknown_pixels(
        lon in -180.0f64..180.0,
        lat in -80.0f64..80.0,
        fov in 40.0f64..120.0,
        seed in 0u64..100,
    ) {
        let state = pano(64, seed);
        let view = ViewSpec::new(lon, lat, fov, 24, 24).unwrap();
        let nfov = Raster::filled(24, 24, 3, 0.25);
        let next = attach_view(&state, &nfov, &view).unwrap();
        let fp = view_footprint(&view, 64).unwrap();
        for i in 0..state.mask().data.len() {
            let was = state.mask().data[i];
            prop_assert_eq!(next.mask().data[i], was || fp.data[i]);
            if !was && fp.data[i] {
                prop_assert!(next.image().data[i * 3..i * 3 + 3].iter().all(|&v| v == 0.25));
            }
        }
    }

    #[test]
    fn plans_cover_the_sphere(lon in -180.0f64..180.0, lat in -60.0f64..60.0, stride in 30.0f64..60.0) {
        let start = ViewSpec::square(lon, lat, 32).unwrap();
        let plan = plan_traversal(&start, 128, stride, stride, 0.25).unwrap();
        let mut covered = Mask::new(128, 64, false);
        for v in &plan.views {
            covered = covered.union(&view_footprint(v, 128).unwrap());
        }
        prop_assert!(covered.all_known());
        prop_assert_eq!(&plan.views[0], &start);
    }

    #[test]
    fn next_view_always_has_unknown_pixels(seed in 0u64..100, cursor in 0usize..40) {
        let state = pano(128, seed);
        let start = ViewSpec::square(0.0, 0.0, 32).unwrap();
        let plan = plan_traversal(&start, 128, 45.0, 45.0, 0.25).unwrap();
        if let Some((i, v)) = next_view(&plan, &state, cursor % plan.len()).unwrap() {
            let fp = view_footprint(&v, 128).unwrap();
            prop_assert!(fp.data.iter().zip(&state.mask().data).any(|(&f, &k)| f && !k));
            prop_assert_eq!(&plan.views[i], &v);
        }
    }

    #[test]
    fn text_embeddings_are_deterministic(prompt in "[a-z ]{0,40}") {
        let c = Conditioner::new(ConditioningConfig::default()).unwrap();
        let a = c.text(&prompt).unwrap();
        let b = c.text(&prompt).unwrap();
        prop_assert_eq!(&a.embedding, &b.embedding);
        prop_assert!(a.embedding.iter().all(|v| v.is_finite()));
    }
}
