use super::Image;

/// Fraction of the strongest gradient below which pixels are not edges.
pub const EDGE_THRESHOLD: f64 = 0.15;

/// Binary edge map: Sobel magnitude, thinned by non-maximum suppression
/// along the dominant gradient axis, thresholded at 15% of the maximum.
///
/// Suppression keeps a pixel when it is `>=` its predecessor and `>` its
/// successor, so an ideal step yields a single-pixel line.
pub fn edge_map(img: &Image) -> Image {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.at(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let k = y as usize * w + x as usize;
            gx[k] = sx;
            gy[k] = sy;
            mag[k] = (sx * sx + sy * sy).sqrt();
        }
    }
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let mut out = Image::filled(w, h, 0.0);
    if max == 0.0 {
        return out;
    }
    let m = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            if mag[k] < EDGE_THRESHOLD * max {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            let (prev, next) = if gx[k].abs() >= gy[k].abs() {
                (m(xi - 1, yi), m(xi + 1, yi))
            } else {
                (m(xi, yi - 1), m(xi, yi + 1))
            };
            if mag[k] >= prev && mag[k] > next {
                out.data[k] = 1.0;
            }
        }
    }
    out
}
