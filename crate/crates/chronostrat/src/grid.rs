//! Uniform year grids and iteration over monotone boundary tuples.
//!
//! Boundary vectors live on the cone `t_start ≤ τ_1 ≤ … ≤ τ_k ≤ t_end`;
//! discretized, that is the set of nondecreasing index tuples, enumerated
//! here in lexicographic order so that parallel passes stay deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid of calendar years covering an epoch window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Grid {
    pub fn from_window(t_start: f64, t_end: f64, step: f64) -> Result<Grid> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {step}")));
        }
        if !(t_end > t_start) {
            return Err(Error::InvalidArgument(format!(
                "window [{t_start}, {t_end}] is empty"
            )));
        }
        let n = ((t_end - t_start) / step).round() as usize + 1;
        if n < 2 {
            return Err(Error::InvalidArgument("grid step exceeds the window".into()));
        }
        Ok(Grid { start: t_start, step, n })
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.value(self.n - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    /// Index of the grid point nearest to `y`, clamped into range.
    pub fn nearest_index(&self, y: f64) -> usize {
        let raw = ((y - self.start) / self.step).round();
        raw.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Number of nondecreasing `k`-tuples over `0..n`: C(n+k−1, k).
pub fn n_monotone_tuples(n: usize, k: usize) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for j in 0..k {
        num *= (n + k - 1 - j) as u128;
        den *= (j + 1) as u128;
    }
    (num / den) as usize
}

/// Visits every nondecreasing `k`-tuple over `0..n` in lexicographic order.
pub fn for_each_monotone_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut tuple = vec![0usize; k];
    loop {
        f(&tuple);
        // lexicographic successor on the nondecreasing cone
        let mut d = k;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            if tuple[d] + 1 < n {
                let v = tuple[d] + 1;
                for x in tuple.iter_mut().skip(d) {
                    *x = v;
                }
                break;
            }
        }
    }
}

/// Number of nondecreasing `k`-tuples whose first coordinate is `c`:
/// tuples over `c..n` of length `k−1`, i.e. C((n−c) + k−2, k−1).
pub fn tuples_with_first(n: usize, k: usize, c: usize) -> usize {
    if k == 1 {
        1
    } else {
        n_monotone_tuples(n - c, k - 1)
    }
}
