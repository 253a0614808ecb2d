//! Property tests for the spec-level invariants that hold over whole input
//! families rather than single examples.

use proptest::prelude::*;

use gaze_core::agent::{combine_reward, decode_product_action};
use gaze_core::diffnet::softmax;
use gaze_core::envkit::anchor_positions;
use gaze_core::evalkit::{iqm, kl_to_uniform};
use gaze_core::image::Image;
use gaze_core::pvm::PvmBuffer;

proptest! {
    #[test]
    fn resize_preserves_unit_range_and_constants(
        h in 1usize..24, w in 1usize..24,
        th in 1usize..32, tw in 1usize..32,
        c in 0.0f32..1.0,
    ) {
        let img = Image::constant(h, w, c);
        let out = img.resize_bilinear(th, tw);
        prop_assert!(out.as_slice().iter().all(|v| (v - c).abs() < 1e-5));
        let ramp = Image::from_fn(h, w, |i, j| ((i * 7 + j * 3) % 11) as f32 / 11.0);
        let out = ramp.resize_bilinear(th, tw);
        prop_assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn anchors_keep_fovea_inside_any_frame(
        frame in 24usize..200,
        extent_frac in 0.05f64..1.0,
    ) {
        let extent = ((frame as f64 * extent_frac) as usize).max(1);
        for a in anchor_positions(frame, extent) {
            prop_assert!(a + extent <= frame);
        }
    }

    #[test]
    fn stitch_recency_invariant(
        cap in 1usize..6,
        pushes in proptest::collection::vec(
            (0usize..20, 0usize..20, 1usize..12, 1usize..12, 0.0f32..1.0),
            1..12,
        ),
    ) {
        let hw = 32;
        let mut buf = PvmBuffer::new(cap, hw, hw);
        let mut window: Vec<(usize, usize, usize, usize, f32)> = Vec::new();
        for (x, y, h, w, v) in pushes {
            let h = h.min(hw - x);
            let w = w.min(hw - y);
            let obs = Image::constant(h, w, v);
            window.push((x, y, h, w, v));
            if window.len() > cap {
                window.remove(0);
            }
            let canvas = buf.push_stitch(obs, (x, y)).unwrap();
            // Every pixel equals the newest covering record, else zero.
            for i in 0..hw {
                for j in 0..hw {
                    let want = window
                        .iter()
                        .rev()
                        .find(|(x, y, h, w, _)| i >= *x && i < x + h && j >= *y && j < y + w)
                        .map_or(0.0, |&(_, _, _, _, v)| v);
                    prop_assert_eq!(canvas.get(i, j), want);
                }
            }
        }
    }

    #[test]
    fn iqm_permutation_invariant_translation_equivariant(
        mut values in proptest::collection::vec(-100.0f64..100.0, 4..40),
        shift in -50.0f64..50.0,
    ) {
        let base = iqm(&values).unwrap();
        values.reverse();
        prop_assert!((iqm(&values).unwrap() - base).abs() < 1e-9);
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        prop_assert!((iqm(&shifted).unwrap() - (base + shift)).abs() < 1e-9);
    }

    #[test]
    fn kl_nonnegative_and_zero_only_at_uniform(
        hist in proptest::collection::vec(0u64..50, 16),
    ) {
        prop_assume!(hist.iter().sum::<u64>() > 0);
        let kl = kl_to_uniform(&hist);
        prop_assert!(kl >= -1e-12);
        let uniform = hist.iter().all(|&c| c == hist[0]);
        if uniform {
            prop_assert!(kl.abs() < 1e-12);
        }
        if kl.abs() < 1e-12 {
            prop_assert!(uniform);
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-40.0f64..40.0, 1..12)) {
        let p = softmax(&logits);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn product_action_decode_round_trips(k in 0usize..1000, n_sensory in 1usize..64) {
        let (s, o) = decode_product_action(k, n_sensory);
        prop_assert_eq!(s * n_sensory + o, k);
        prop_assert!(o < n_sensory);
    }

    #[test]
    fn combined_reward_matches_formula(
        r_env in -10.0f32..10.0,
        r_sm in -1.0f32..0.0,
        beta in 0.0f32..2.0,
    ) {
        prop_assert_eq!(combine_reward(r_env, r_sm, beta, true), r_env + beta * r_sm);
        prop_assert_eq!(combine_reward(r_env, r_sm, beta, false), r_env + r_sm);
        prop_assert_eq!(combine_reward(r_env, 0.0, beta, true), r_env);
    }
}
