//! Property tests over the raw array kernels.

use bsda_nn::kernels::{conv2d_forward, upsample2x_backward, upsample2x_forward, ConvDims};
use proptest::prelude::*;

fn dims_and_buffers() -> impl Strategy<Value = (ConvDims, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=2, 1usize..=2, 3usize..=6, 1usize..=2).prop_flat_map(|(n, ci, hw, co)| {
        let d = ConvDims { n, ci, h: hw, w: hw, co, kh: 3, kw: 3, pad: 1 };
        let xs = prop::collection::vec(-1.0f64..1.0, n * ci * hw * hw);
        let x2 = prop::collection::vec(-1.0f64..1.0, n * ci * hw * hw);
        let ws = prop::collection::vec(-1.0f64..1.0, co * ci * 9);
        (Just(d), xs, x2, ws)
    })
}

fn run_conv(x: &[f64], w: &[f64], d: &ConvDims) -> Vec<f64> {
    let bias = vec![0.0; d.co];
    let mut cols = vec![0.0; d.k() * d.m()];
    let mut y = vec![0.0; d.n * d.co * d.m()];
    conv2d_forward(x, w, &bias, d, &mut cols, &mut y);
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Convolution with zero bias is linear in its input.
    #[test]
    fn conv_is_linear_in_the_input((d, x1, x2, w) in dims_and_buffers(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mixed: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let y_mixed = run_conv(&mixed, &w, &d);
        let y1 = run_conv(&x1, &w, &d);
        let y2 = run_conv(&x2, &w, &d);
        for (ym, (p, q)) in y_mixed.iter().zip(y1.iter().zip(&y2)) {
            let want = a * p + b * q;
            prop_assert!((ym - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    /// The upsample backward pass is the adjoint of the forward pass:
    /// <up(x), y> == <x, up_T(y)> for every x and y.
    #[test]
    fn upsample_backward_is_the_adjoint(
        (n, c, hw) in (1usize..=2, 1usize..=3, 2usize..=5),
        seedx in any::<u64>(),
        seedy in any::<u64>(),
    ) {
        let lo = n * c * hw * hw;
        let hi = lo * 4;
        // Cheap deterministic fill; the property is exact so the
        // distribution does not matter.
        let fill = |seed: u64, len: usize| -> Vec<f64> {
            let mut s = seed | 1;
            (0..len)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect()
        };
        let x = fill(seedx, lo);
        let y = fill(seedy, hi);

        let mut up = vec![0.0; hi];
        upsample2x_forward(&x, n, c, hw, hw, &mut up);
        let mut down = vec![0.0; lo];
        upsample2x_backward(&y, n, c, hw, hw, &mut down);

        let lhs: f64 = up.iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(&down).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }
}
