//! One-dimensional search primitives shared by the optimizers and the
//! distance solver.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[lo, hi]` until the bracket is
/// narrower than `tol`. Ties are resolved toward the smaller abscissa.
pub fn golden_section_min<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    if b - a <= tol {
        let x = a;
        return (x, f(x));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        // `<=` keeps the left interior point on ties.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(a, f(a)), (c, fc), (d, fd), (b, f(b))];
    best_of(&candidates)
}

/// Scans `points` evenly spaced samples on `[lo, hi]`, then refines the
/// neighbourhood of the best sample with golden-section search.
///
/// Used for objectives that are not unimodal over the whole range
/// (poles, flat zero regions).
pub fn scan_then_refine<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidRange { lo, hi });
    }
    if lo == hi {
        return Ok((lo, f(lo)));
    }
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = if i == points - 1 {
                hi
            } else {
                lo + step * i as f64
            };
            (x, f(x))
        })
        .collect();
    let (best_idx, _) =
        grid.iter()
            .enumerate()
            .fold((0usize, f64::INFINITY), |(bi, bv), (i, &(_, v))| {
                if v < bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    let left = grid[best_idx.saturating_sub(1)].0;
    let right = grid[(best_idx + 1).min(points - 1)].0;
    let refined = golden_section_min(&f, left, right, tol);
    Ok(best_of(&[grid[best_idx], refined]))
}

/// Finds the boundary between `pred == true` at `inside` and `pred == false`
/// at `outside`, narrowing until the bracket is below `tol`. Returns the last
/// point known to satisfy the predicate.
pub fn bisect_boundary<P>(pred: P, mut inside: f64, mut outside: f64, tol: f64) -> f64
where
    P: Fn(f64) -> bool,
{
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

fn best_of(candidates: &[(f64, f64)]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for &(x, v) in candidates {
        let better = v < best.1 || (v == best.1 && x < best.0) || best.0.is_nan();
        if better && !v.is_nan() {
            best = (x, v);
        }
    }
    if best.0.is_nan() {
        // every value was NaN
        best = candidates[0];
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden_section_min(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(v < 1e-15);
    }

    #[test]
    fn golden_degenerate_bracket() {
        let (x, _) = golden_section_min(|x| x, 2.0, 2.0, 1e-6);
        assert_eq!(x, 2.0);
    }

    #[test]
    fn scan_escapes_local_minimum() {
        // local minimum at 0.2 (value 0.1), global at 0.8 (value 0)
        let f = |x: f64| ((x - 0.2).powi(2) + 0.1).min((x - 0.8).powi(2) * 4.0);
        let (x, _) = scan_then_refine(f, 0.0, 1.0, 64, 1e-9).unwrap();
        assert!((x - 0.8).abs() < 1e-6, "{x}");
    }

    #[test]
    fn scan_prefers_smaller_on_flat() {
        let (x, _) = scan_then_refine(|_| 1.0, 0.5, 1.0, 16, 1e-6).unwrap();
        assert_eq!(x, 0.5);
    }

    #[test]
    fn scan_rejects_inverted_range() {
        assert!(scan_then_refine(|x| x, 1.0, 0.0, 8, 1e-6).is_err());
    }

    #[test]
    fn bisect_sqrt_two() {
        let x = bisect_boundary(|x| x * x < 2.0, 0.0, 2.0, 1e-12);
        assert!((x - 2f64.sqrt()).abs() < 1e-11);
    }
}
