//! Bounded 1-D minimization on `[0, 1]`: uniform grid, then golden-section
//! refinement inside the bracket around the best grid point.

pub const GRID_POINTS: usize = 65;
pub const X_TOL: f64 = 1e-8;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search on `[lo, hi]` until the bracket is narrower than `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Minimum {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        Minimum { x: x1, value: f1 }
    } else {
        Minimum { x: x2, value: f2 }
    }
}

/// Never returns a value above the best grid sample.
pub fn minimize_unit_interval<F: FnMut(f64) -> f64>(mut f: F) -> Minimum {
    let last = GRID_POINTS - 1;
    let mut best = Minimum {
        x: 0.0,
        value: f(0.0),
    };
    let mut best_i = 0;
    for i in 1..GRID_POINTS {
        let x = i as f64 / last as f64;
        let value = f(x);
        if value < best.value {
            best = Minimum { x, value };
            best_i = i;
        }
    }
    let lo = best_i.saturating_sub(1) as f64 / last as f64;
    let hi = (best_i + 1).min(last) as f64 / last as f64;
    let refined = golden_section(&mut f, lo, hi, X_TOL);
    if refined.value < best.value {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_interior_quadratic_minimum() {
        let m = minimize_unit_interval(|x| (x - 0.3141).powi(2) + 2.0);
        assert!((m.x - 0.3141).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_minima() {
        let m = minimize_unit_interval(|x| x);
        assert!(m.x < 1e-8 && m.value < 1e-8);
        let m = minimize_unit_interval(|x| -x);
        assert!(m.x > 1.0 - 1e-8);
    }

    #[test]
    fn constant_function_returns_grid_start() {
        let m = minimize_unit_interval(|_| 1.0);
        assert_eq!(m, Minimum { x: 0.0, value: 1.0 });
    }

    proptest! {
        #[test]
        fn never_worse_than_grid(c in 0.0f64..1.0, w in 0.1f64..10.0) {
            let f = |x: f64| ((x - c) * w).cosh() + 0.1 * (20.0 * x).sin();
            let m = minimize_unit_interval(f);
            for i in 0..GRID_POINTS {
                let x = i as f64 / (GRID_POINTS - 1) as f64;
                prop_assert!(m.value <= f(x));
            }
        }
    }
}
