use ndarray::Array2;

use crate::Scalar;

/// Bilinear resampling with half-pixel-center coordinates (the
/// `align_corners = false` convention): source position of output pixel `o`
/// is `(o + 0.5) * in/out - 0.5`, clamped to the valid range.
///
/// Resizing to the input shape is an exact identity.
pub fn resize_bilinear<S: Scalar>(src: &Array2<S>, out_h: usize, out_w: usize) -> Array2<S> {
    let (in_h, in_w) = src.dim();
    assert!(in_h > 0 && in_w > 0 && out_h > 0 && out_w > 0);
    if (in_h, in_w) == (out_h, out_w) {
        return src.clone();
    }
    let scale_y = in_h as f64 / out_h as f64;
    let scale_x = in_w as f64 / out_w as f64;

    let mut out = Array2::zeros((out_h, out_w));
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (in_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(in_h - 1);
        let wy = S::cast_from(sy - y0 as f64);
        let iy = S::one() - wy;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (in_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(in_w - 1);
            let wx = S::cast_from(sx - x0 as f64);
            let ix = S::one() - wx;
            out[[oy, ox]] = src[[y0, x0]] * iy * ix
                + src[[y0, x1]] * iy * wx
                + src[[y1, x0]] * wy * ix
                + src[[y1, x1]] * wy * wx;
        }
    }
    out
}

/// Nearest-neighbor resampling for binary masks, same coordinate convention
/// as [`resize_bilinear`].
pub fn resize_nearest_bool(src: &Array2<bool>, out_h: usize, out_w: usize) -> Array2<bool> {
    let (in_h, in_w) = src.dim();
    assert!(in_h > 0 && in_w > 0 && out_h > 0 && out_w > 0);
    let scale_y = in_h as f64 / out_h as f64;
    let scale_x = in_w as f64 / out_w as f64;
    Array2::from_shape_fn((out_h, out_w), |(oy, ox)| {
        let sy = (((oy as f64 + 0.5) * scale_y).floor() as usize).min(in_h - 1);
        let sx = (((ox as f64 + 0.5) * scale_x).floor() as usize).min(in_w - 1);
        src[[sy, sx]]
    })
}
