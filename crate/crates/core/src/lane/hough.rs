//! Line voting in (rho, theta) space followed by segment extraction along each
//! accepted peak.
//!
//! Peaks are visited in descending vote order. Walking a peak's line collects
//! edge pixels within a small perpendicular tolerance, splits them into runs
//! separated by more than `max_gap` misses, and emits runs at least
//! `min_length` long. Pixels claimed by an emitted segment are not reused by
//! later peaks.

use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }
}

pub(crate) struct HoughConfig {
    pub rho_res: f64,
    pub theta_res_deg: f64,
    pub threshold: u32,
    pub min_length: f64,
    pub max_gap: usize,
}

// Perpendicular search radius, in pixels, when walking a peak line.
const WALK_TOLERANCE: isize = 2;

pub(crate) fn segments(
    edges: &[bool],
    width: usize,
    height: usize,
    cfg: &HoughConfig,
) -> Vec<Segment> {
    let n_theta = ((180.0 / cfg.theta_res_deg).round() as usize).max(1);
    let diag = (width as f64).hypot(height as f64);
    let n_rho = (2.0 * diag / cfg.rho_res).ceil() as usize + 1;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|k| {
            let t = (k as f64 * cfg.theta_res_deg).to_radians();
            (t.cos(), t.sin())
        })
        .collect();

    let mut votes = vec![0u32; n_theta * n_rho];
    for y in 0..height {
        for x in 0..width {
            if !edges[y * width + x] {
                continue;
            }
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            for (k, &(c, s)) in trig.iter().enumerate() {
                let r = ((px * c + py * s + diag) / cfg.rho_res).round() as usize;
                votes[k * n_rho + r.min(n_rho - 1)] += 1;
            }
        }
    }

    let mut peaks = Vec::new();
    for k in 0..n_theta {
        for r in 0..n_rho {
            let v = votes[k * n_rho + r];
            if v < cfg.threshold {
                continue;
            }
            let mut is_max = true;
            'nbr: for dk in -1isize..=1 {
                for dr in -1isize..=1 {
                    if dk == 0 && dr == 0 {
                        continue;
                    }
                    let (nk, nr) = (k as isize + dk, r as isize + dr);
                    if nk < 0 || nr < 0 || nk >= n_theta as isize || nr >= n_rho as isize {
                        continue;
                    }
                    let nv = votes[nk as usize * n_rho + nr as usize];
                    // earlier neighbours must be strictly lower so plateaus keep one peak
                    let earlier = (nk, nr) < (k as isize, r as isize);
                    if nv > v || (earlier && nv == v) {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                peaks.push((v, k, r));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used = vec![false; edges.len()];
    let mut out = Vec::new();
    for &(_, k, r) in &peaks {
        let (c, s) = trig[k];
        let rho = r as f64 * cfg.rho_res - diag;
        walk_line(edges, &mut used, width, height, c, s, rho, cfg, &mut out);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn walk_line(
    edges: &[bool],
    used: &mut [bool],
    width: usize,
    height: usize,
    c: f64,
    s: f64,
    rho: f64,
    cfg: &HoughConfig,
    out: &mut Vec<Segment>,
) {
    // Step along the axis the line is closer to; the other coordinate is solved.
    let steep = c.abs() >= s.abs();
    let steps = if steep { height } else { width };
    let span = if steep { width } else { height } as isize;

    let mut run: Vec<Vec<usize>> = Vec::new();
    let mut first: Option<(usize, usize)> = None;
    let mut last: Option<(usize, usize)> = None;
    let mut misses = 0usize;

    let close = |run: &mut Vec<Vec<usize>>,
                 first: &mut Option<(usize, usize)>,
                 last: &mut Option<(usize, usize)>,
                 used: &mut [bool],
                 out: &mut Vec<Segment>| {
        if let (Some(f), Some(l)) = (*first, *last) {
            let seg = Segment {
                a: Point2::new(f.0 as f64 + 0.5, f.1 as f64 + 0.5),
                b: Point2::new(l.0 as f64 + 0.5, l.1 as f64 + 0.5),
            };
            if seg.length() >= cfg.min_length {
                for idx in run.iter().flatten() {
                    used[*idx] = true;
                }
                out.push(seg);
            }
        }
        run.clear();
        *first = None;
        *last = None;
    };

    for t in 0..steps {
        let tc = t as f64 + 0.5;
        let other = if steep {
            (rho - tc * s) / c - 0.5
        } else {
            (rho - tc * c) / s - 0.5
        };
        if !other.is_finite() {
            continue;
        }
        let centre = other.round() as isize;
        let mut hits = Vec::new();
        let mut best: Option<(isize, usize)> = None;
        for d in -WALK_TOLERANCE..=WALK_TOLERANCE {
            let o = centre + d;
            if o < 0 || o >= span {
                continue;
            }
            let (x, y) = if steep {
                (o as usize, t)
            } else {
                (t, o as usize)
            };
            let idx = y * width + x;
            if edges[idx] && !used[idx] {
                hits.push(idx);
                if best.is_none_or(|(bd, _)| d.abs() < bd) {
                    best = Some((d.abs(), idx));
                }
            }
        }
        match best {
            Some((_, idx)) => {
                let p = (idx % width, idx / width);
                if first.is_none() {
                    first = Some(p);
                }
                last = Some(p);
                run.push(hits);
                misses = 0;
            }
            None => {
                if first.is_some() {
                    misses += 1;
                    if misses > cfg.max_gap {
                        close(&mut run, &mut first, &mut last, used, out);
                        misses = 0;
                    }
                }
            }
        }
    }
    close(&mut run, &mut first, &mut last, used, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> HoughConfig {
        HoughConfig {
            rho_res: 2.0,
            theta_res_deg: 1.0,
            threshold: 15,
            min_length: 40.0,
            max_gap: 20,
        }
    }

    #[test]
    fn finds_diagonal_line() {
        let (w, h) = (100, 100);
        let mut e = vec![false; w * h];
        for i in 10..90 {
            e[i * w + i] = true;
        }
        let segs = segments(&e, w, h, &cfg());
        assert_eq!(segs.len(), 1, "{segs:?}");
        let s = segs[0];
        assert!((s.length() - 79.0 * 2f64.sqrt()).abs() < 1.5);
    }

    #[test]
    fn gap_splits_segments() {
        let (w, h) = (200, 60);
        let mut e = vec![false; w * h];
        for x in (5..60).chain(100..190) {
            e[30 * w + x] = true;
        }
        let segs = segments(&e, w, h, &cfg());
        assert_eq!(segs.len(), 2, "{segs:?}");
    }

    #[test]
    fn short_runs_dropped() {
        let (w, h) = (100, 100);
        let mut e = vec![false; w * h];
        for x in 10..30 {
            e[50 * w + x] = true;
        }
        assert!(segments(&e, w, h, &cfg()).is_empty());
    }
}
