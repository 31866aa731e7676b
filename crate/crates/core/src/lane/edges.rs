//! Gaussian smoothing and gradient edges with non-maximum suppression and
//! hysteresis. Borders replicate the nearest pixel.

pub(crate) fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f32> {
    let size = size.max(1) | 1;
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / sum) as f32).collect()
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable convolution with `kernel` along both axes.
pub(crate) fn blur(src: &[f32], width: usize, height: usize, kernel: &[f32]) -> Vec<f32> {
    let half = (kernel.len() / 2) as isize;
    let mut tmp = vec![0f32; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0f32;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * row[clamp_idx(x as isize + k as isize - half, width)];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0f32; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0f32;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * tmp[clamp_idx(y as isize + k as isize - half, height) * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Edge map: Sobel gradient magnitude, thinned by non-maximum suppression along
/// the gradient direction, then hysteresis (8-connected) between `low` and `high`.
pub(crate) fn edges(img: &[f32], width: usize, height: usize, low: f32, high: f32) -> Vec<bool> {
    let at = |x: isize, y: isize| img[clamp_idx(y, height) * width + clamp_idx(x, width)];
    let mut mag = vec![0f32; img.len()];
    let mut dir = vec![0u8; img.len()];
    for y in 0..height as isize {
        for x in 0..width as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * width + x as usize;
            mag[i] = gx.hypot(gy);
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            dir[i] = if !(22.5..157.5).contains(&angle) {
                0
            } else if angle < 67.5 {
                1
            } else if angle < 112.5 {
                2
            } else {
                3
            };
        }
    }

    // 0: neighbours left/right, 1: down-right/up-left, 2: up/down, 3: down-left/up-right
    const OFFSETS: [((isize, isize), (isize, isize)); 4] = [
        ((1, 0), (-1, 0)),
        ((1, 1), (-1, -1)),
        ((0, 1), (0, -1)),
        ((-1, 1), (1, -1)),
    ];
    let mut thin = vec![0f32; img.len()];
    for y in 1..height.saturating_sub(1) {
        for x in 1..width.saturating_sub(1) {
            let i = y * width + x;
            let m = mag[i];
            if m < low {
                continue;
            }
            let ((ax, ay), (bx, by)) = OFFSETS[dir[i] as usize];
            let a = mag[(y as isize + ay) as usize * width + (x as isize + ax) as usize];
            let b = mag[(y as isize + by) as usize * width + (x as isize + bx) as usize];
            if m > a && m >= b {
                thin[i] = m;
            }
        }
    }

    let mut out = vec![false; img.len()];
    let mut stack = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high && !out[i] {
            out[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (jx, jy) = ((j % width) as isize, (j / width) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (jx + dx, jy + dy);
                        if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                            continue;
                        }
                        let n = ny as usize * width + nx as usize;
                        if !out[n] && thin[n] >= low {
                            out[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    out
}
