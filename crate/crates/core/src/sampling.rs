//! Pole-avoiding sample grids and sup-norm sweeps over them.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, Point};
use crate::error::{Error, Result};

/// Cell midpoints of an `n` point grid on one axis. Unbounded axes are sampled
/// through `x = lo + tan(u)`.
pub fn axis_samples(chart: &Chart, coord: usize, n: usize) -> Vec<f64> {
    let d = chart.domain[coord];
    let mid = |lo: f64, hi: f64, i: usize| lo + (i as f64 + 0.5) * (hi - lo) / n as f64;
    (0..n)
        .map(|i| match (d.lo.is_finite(), d.hi.is_finite()) {
            (true, true) => mid(d.lo, d.hi, i),
            (true, false) => d.lo + mid(0.0, FRAC_PI_2, i).tan(),
            (false, true) => d.hi + mid(-FRAC_PI_2, 0.0, i).tan(),
            (false, false) => mid(-FRAC_PI_2, FRAC_PI_2, i).tan(),
        })
        .collect()
}

/// Tensor grid of `n` midpoints per axis; never touches a singular locus or the boundary.
pub fn sample_grid(chart: &Chart, n: usize) -> Vec<Point> {
    sample_grid_shape(chart, [n, n, n])
}

pub fn sample_grid_shape(chart: &Chart, shape: [usize; 3]) -> Vec<Point> {
    let axes: Vec<Vec<f64>> = (0..3).map(|c| axis_samples(chart, c, shape[c])).collect();
    let mut out = Vec::with_capacity(shape.iter().product());
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Result of a sup-norm sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub sup: f64,
    /// Point where the sup is attained.
    pub argmax: Option<Point>,
    pub evaluated: usize,
    /// Points skipped because the differential is rank deficient there.
    pub rank_deficient: usize,
}

impl Sweep {
    pub fn empty() -> Sweep {
        Sweep {
            sup: 0.0,
            argmax: None,
            evaluated: 0,
            rank_deficient: 0,
        }
    }

    pub fn merge(self, other: Sweep) -> Sweep {
        let (sup, argmax) = if other.sup > self.sup {
            (other.sup, other.argmax)
        } else {
            (self.sup, self.argmax)
        };
        Sweep {
            sup,
            argmax,
            evaluated: self.evaluated + other.evaluated,
            rank_deficient: self.rank_deficient + other.rank_deficient,
        }
    }
}

/// Sup of `f` over `points`. Rank-deficient points are counted and skipped;
/// any other error aborts the sweep. NaN counts as an infinite defect.
pub fn sup_over<F>(points: &[Point], f: F) -> Result<Sweep>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    let results: Vec<Result<Sweep>> = points
        .par_iter()
        .map(|x| match f(x) {
            Ok(v) => {
                let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
                Ok(Sweep {
                    sup: v,
                    argmax: Some(*x),
                    evaluated: 1,
                    rank_deficient: 0,
                })
            }
            Err(Error::RankDeficient { .. }) => Ok(Sweep {
                rank_deficient: 1,
                ..Sweep::empty()
            }),
            Err(e) => Err(e),
        })
        .collect();
    let mut acc = Sweep::empty();
    for r in results {
        acc = acc.merge(r?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_avoids_poles_and_boundaries() {
        let chart = Chart::hopf();
        let g = sample_grid(&chart, 8);
        assert_eq!(g.len(), 512);
        assert!(g.iter().all(|x| chart.check_regular(x).is_ok()));
        let r = axis_samples(&Chart::polar_circle(), 0, 4);
        assert!(r.windows(2).all(|w| w[0] < w[1]) && r[0] > 0.0);
        let z = axis_samples(&Chart::cylindrical(), 2, 4);
        assert!((z[0] + z[3]).abs() < 1e-12);
    }

    #[test]
    fn sweep_skips_rank_deficient_points() {
        let pts = vec![[0.1, 0.0, 0.0], [0.2, 0.0, 0.0], [0.3, 0.0, 0.0]];
        let s = sup_over(&pts, |x| {
            if x[0] < 0.15 {
                Err(Error::RankDeficient {
                    point: *x,
                    sigma2: 0.0,
                })
            } else {
                Ok(-x[0])
            }
        })
        .unwrap();
        assert_eq!((s.evaluated, s.rank_deficient), (2, 1));
        assert_eq!(s.sup, 0.3);
        assert_eq!(s.argmax, Some([0.3, 0.0, 0.0]));
    }
}
