//! Frequentist estimation: the ordered-sequence MLE (weighted
//! pool-adjacent-violators with box constraints) and the two-loop
//! profile-likelihood boundary estimator.
//!
//! The boundary estimator profiles out the sample dates: for a candidate
//! boundary vector τ, each sample's date is the interval-truncated
//! M-estimate on its stratum, and the criterion is
//! `l(τ) = −Σ ρ_c((Y − μ̂(τ))/σ)` (higher is better). The criterion is
//! piecewise-smooth with kinks at the data, so the outer maximization is an
//! exhaustive scan of the monotone boundary grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{for_each_monotone_tuple, Grid};
use crate::model::{BoundaryVector, CalendarDataset};
use crate::robust::{self, HuberSpec, Truncation};

/// Isotonic weighted least squares with box constraints: minimizes
/// `Σ (y_i − μ_i)²/σ_i²` over nondecreasing `μ` with every coordinate in
/// `[t_s, t_e]`. Pool-adjacent-violators, then clipping with re-pooling
/// until the fixed point.
pub fn ordered_sequence_mle(y: &[f64], sigma: &[f64], t_s: f64, t_e: f64) -> Result<Vec<f64>> {
    if y.len() != sigma.len() {
        return Err(Error::InvalidArgument("y and sigma lengths differ".into()));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    if t_s > t_e {
        return Err(Error::InvalidArgument(format!("bounds [{t_s}, {t_e}] are empty")));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let w: Vec<f64> = sigma.iter().map(|&s| 1.0 / (s * s)).collect();
    let mut fit: Vec<f64> = pava(y, &w).iter().map(|&v| v.clamp(t_s, t_e)).collect();
    loop {
        let repooled: Vec<f64> = pava(&fit, &w).iter().map(|&v| v.clamp(t_s, t_e)).collect();
        if repooled == fit {
            return Ok(fit);
        }
        fit = repooled;
    }
}

/// Weighted pool-adjacent-violators for a nondecreasing fit.
fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    // blocks of (pooled value, total weight, member count)
    let mut vals: Vec<f64> = Vec::with_capacity(y.len());
    let mut wts: Vec<f64> = Vec::with_capacity(y.len());
    let mut lens: Vec<usize> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        vals.push(yi);
        wts.push(wi);
        lens.push(1);
        while vals.len() > 1 && vals[vals.len() - 2] > vals[vals.len() - 1] {
            let (v2, w2, l2) = (vals.pop().unwrap(), wts.pop().unwrap(), lens.pop().unwrap());
            let last = vals.len() - 1;
            vals[last] = (vals[last] * wts[last] + v2 * w2) / (wts[last] + w2);
            wts[last] += w2;
            lens[last] += l2;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (v, l) in vals.iter().zip(&lens) {
        out.extend(std::iter::repeat(*v).take(*l));
    }
    out
}

/// Profile criterion at one boundary vector: the inner maximization runs
/// the interval-truncated M-estimate per sample.
pub fn profile_loglik(tau: &BoundaryVector, data: &CalendarDataset, c: HuberSpec) -> Result<f64> {
    if tau.n_strata() != data.n_strata() {
        return Err(Error::InvalidArgument(format!(
            "boundary vector has {} strata, dataset has {}",
            tau.n_strata(),
            data.n_strata()
        )));
    }
    let mut total = 0.0;
    for (g, stratum) in data.strata.iter().enumerate() {
        let (lo, hi) = tau.stratum_interval(g);
        for sample in &stratum.samples {
            let (mu, _) = robust::m_estimate_interval(&sample.obs, c.c, lo, hi)?;
            total -= robust::objective(&sample.obs, c.c, mu);
        }
    }
    Ok(total)
}

/// Result of the boundary search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleFit {
    pub tau_hat: BoundaryVector,
    /// Per stratum, per sample: profiled date estimate.
    pub mu_hat: Vec<Vec<f64>>,
    /// Truncation flag for each estimate in `mu_hat`.
    pub flags: Vec<Vec<Truncation>>,
    /// Criterion value at `tau_hat`.
    pub loglik: f64,
    /// Bounding box of the argmax plateau, per interior boundary.
    pub plateau: Vec<(f64, f64)>,
    /// Number of grid cells on the plateau (1 = unique maximizer).
    pub plateau_cells: usize,
}

/// Profile surface of one adjacent boundary pair, maximized over all other
/// boundaries. Only cells with `i ≤ j` are populated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSurface {
    /// Interior-boundary indices (0-based) of the pair.
    pub first: usize,
    pub second: usize,
    pub values: Vec<f64>,
    pub n: usize,
}

impl PairSurface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Per-boundary profiles and adjacent-pair surfaces over the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub grid: Grid,
    /// For each interior boundary: criterion maximized over the others.
    pub marginals: Vec<Vec<f64>>,
    pub surfaces: Vec<PairSurface>,
    /// Lexicographically smallest grid maximizer.
    pub argmax: Vec<usize>,
    pub max_value: f64,
}

/// Per-sample precomputation reused across boundary candidates: the
/// objective on the grid and the unconstrained M-estimate.
#[derive(Debug, Clone)]
pub(crate) struct SampleCurves {
    pub h_grid: Vec<f64>,
    pub h_star: f64,
    /// First grid index at or above the unconstrained estimate.
    pub split: usize,
}

pub(crate) fn sample_curves(obs: &[(f64, f64)], c: f64, grid: &Grid) -> Result<SampleCurves> {
    let mu_star = robust::m_estimate(obs, c)?;
    let h_grid = (0..grid.n).map(|i| robust::objective(obs, c, grid.value(i))).collect();
    let h_star = robust::objective(obs, c, mu_star);
    let split = (0..grid.n).find(|&i| grid.value(i) >= mu_star).unwrap_or(grid.n);
    Ok(SampleCurves { h_grid, h_star, split })
}

/// Stratum contribution table: `T[a·n + b] = Σ_m w_m · (−h_m(clamp(μ*_m,
/// grid[a], grid[b])))` for `a ≤ b`. Entries below the diagonal are unused.
pub(crate) fn stratum_profile_table(curves: &[(&SampleCurves, f64)], grid: &Grid) -> Vec<f64> {
    let n = grid.n;
    let mut table = vec![0.0f64; n * n];
    for &(sc, weight) in curves {
        for a in 0..n {
            let row = &mut table[a * n..(a + 1) * n];
            if a >= sc.split {
                // grid[a] >= mu*: clamps to the lower end for every b
                let v = weight * sc.h_grid[a];
                for item in row.iter_mut().skip(a) {
                    *item -= v;
                }
            } else {
                // b < split: clamps to the upper end; b >= split: interior
                for (b, item) in row.iter_mut().enumerate().skip(a) {
                    let h = if b < sc.split { sc.h_grid[b] } else { sc.h_star };
                    *item -= weight * h;
                }
            }
        }
    }
    table
}

/// Criterion of one monotone index tuple given the per-stratum tables.
#[inline]
pub(crate) fn tuple_value(tables: &[Vec<f64>], n: usize, tuple: &[usize]) -> f64 {
    let k = tuple.len();
    let mut v = tables[0][tuple[0]]; // first stratum starts at grid index 0
    for g in 1..k {
        v += tables[g][tuple[g - 1] * n + tuple[g]];
    }
    v + tables[k][tuple[k - 1] * n + (n - 1)]
}

struct ScanAcc {
    best: f64,
    arg: Vec<usize>,
    marginals: Vec<Vec<f64>>,
    surfaces: Vec<Vec<f64>>,
}

impl ScanAcc {
    fn new(k: usize, n: usize) -> Self {
        ScanAcc {
            best: f64::NEG_INFINITY,
            arg: vec![usize::MAX; k],
            marginals: vec![vec![f64::NEG_INFINITY; n]; k],
            surfaces: vec![vec![f64::NEG_INFINITY; n * n]; k.saturating_sub(1)],
        }
    }

    fn observe(&mut self, tuple: &[usize], v: f64) {
        if v > self.best || (v == self.best && tuple < self.arg.as_slice()) {
            self.best = v;
            self.arg.clear();
            self.arg.extend_from_slice(tuple);
        }
        for (d, m) in self.marginals.iter_mut().enumerate() {
            let idx = tuple[d];
            if v > m[idx] {
                m[idx] = v;
            }
        }
        let n = self.marginals[0].len();
        for (d, s) in self.surfaces.iter_mut().enumerate() {
            let idx = tuple[d] * n + tuple[d + 1];
            if v > s[idx] {
                s[idx] = v;
            }
        }
    }

    fn merge(mut self, other: ScanAcc) -> ScanAcc {
        if other.best > self.best || (other.best == self.best && other.arg < self.arg) {
            self.best = other.best;
            self.arg = other.arg;
        }
        for (m, om) in self.marginals.iter_mut().zip(other.marginals) {
            for (v, ov) in m.iter_mut().zip(om) {
                *v = v.max(ov);
            }
        }
        for (s, os) in self.surfaces.iter_mut().zip(other.surfaces) {
            for (v, ov) in s.iter_mut().zip(os) {
                *v = v.max(ov);
            }
        }
        self
    }
}

/// Exhaustive scan over monotone tuples, parallel over the first
/// coordinate; deterministic regardless of worker count.
fn exhaustive_scan(tables: &[Vec<f64>], grid: &Grid, k: usize) -> ScanAcc {
    let n = grid.n;
    (0..n)
        .into_par_iter()
        .map(|c0| {
            let mut acc = ScanAcc::new(k, n);
            let mut tuple = vec![c0; k];
            loop {
                acc.observe(&tuple, tuple_value(tables, n, &tuple));
                // lexicographic successor with the first coordinate fixed
                let mut d = k;
                let mut done = true;
                while d > 1 {
                    d -= 1;
                    if tuple[d] + 1 < n {
                        let val = tuple[d] + 1;
                        for x in tuple.iter_mut().skip(d) {
                            *x = val;
                        }
                        done = false;
                        break;
                    }
                }
                if done {
                    break;
                }
            }
            acc
        })
        .reduce(|| ScanAcc::new(k, n), ScanAcc::merge)
}

pub(crate) fn build_tables(
    data: &CalendarDataset,
    c: HuberSpec,
    grid: &Grid,
) -> Result<Vec<Vec<f64>>> {
    let mut tables = Vec::with_capacity(data.strata.len());
    for stratum in &data.strata {
        let mut curves = Vec::with_capacity(stratum.samples.len());
        for sample in &stratum.samples {
            curves.push(sample_curves(&sample.obs, c.c, grid)?);
        }
        let weighted: Vec<(&SampleCurves, f64)> = curves.iter().map(|sc| (sc, 1.0)).collect();
        tables.push(stratum_profile_table(&weighted, grid));
    }
    Ok(tables)
}

const PLATEAU_REL_TOL: f64 = 1e-9;

/// Exhaustive profile-likelihood maximization over the monotone boundary
/// grid. Flat argmax sets are reported as a bounding box whose centroid is
/// the point estimate.
pub fn maximize_boundaries(
    data: &CalendarDataset,
    c: HuberSpec,
    grid_step: f64,
) -> Result<(MleFit, ProfileGrid)> {
    let k = data.n_strata().saturating_sub(1);
    if k == 0 {
        return Err(Error::InvalidArgument("need at least two strata".into()));
    }
    data_nonempty(data)?;
    let grid = Grid::from_window(data.t_start, data.t_end, grid_step)?;
    let tables = build_tables(data, c, &grid)?;
    let acc = exhaustive_scan(&tables, &grid, k);

    // plateau: bounding box of cells within tolerance of the maximum
    let tol = PLATEAU_REL_TOL * (1.0 + acc.best.abs());
    let n = grid.n;
    let mut lo = vec![usize::MAX; k];
    let mut hi = vec![0usize; k];
    let mut cells = 0usize;
    for_each_monotone_tuple(n, k, |tuple| {
        if tuple_value(&tables, n, tuple) >= acc.best - tol {
            cells += 1;
            for (d, &i) in tuple.iter().enumerate() {
                lo[d] = lo[d].min(i);
                hi[d] = hi[d].max(i);
            }
        }
    });
    let plateau: Vec<(f64, f64)> =
        lo.iter().zip(&hi).map(|(&a, &b)| (grid.value(a), grid.value(b))).collect();
    let centroid: Vec<f64> = plateau.iter().map(|&(a, b)| 0.5 * (a + b)).collect();
    let tau_hat = BoundaryVector::new(centroid, data.t_start, data.t_end)?;

    let mut mu_hat = Vec::with_capacity(data.strata.len());
    let mut flags = Vec::with_capacity(data.strata.len());
    for (g, stratum) in data.strata.iter().enumerate() {
        let (slo, shi) = tau_hat.stratum_interval(g);
        let mut mus = Vec::with_capacity(stratum.samples.len());
        let mut fl = Vec::with_capacity(stratum.samples.len());
        for sample in &stratum.samples {
            let (mu, f) = robust::m_estimate_interval(&sample.obs, c.c, slo, shi)?;
            mus.push(mu);
            fl.push(f);
        }
        mu_hat.push(mus);
        flags.push(fl);
    }
    let loglik = profile_loglik(&tau_hat, data, c)?;
    let fit = MleFit { tau_hat, mu_hat, flags, loglik, plateau, plateau_cells: cells };
    let profile = ProfileGrid {
        grid,
        marginals: acc.marginals,
        surfaces: acc
            .surfaces
            .into_iter()
            .enumerate()
            .map(|(d, values)| PairSurface { first: d, second: d + 1, values, n })
            .collect(),
        argmax: acc.arg,
        max_value: acc.best,
    };
    Ok((fit, profile))
}

fn data_nonempty(data: &CalendarDataset) -> Result<()> {
    for s in &data.strata {
        for sample in &s.samples {
            if sample.obs.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "sample {} has no observations",
                    sample.id
                )));
            }
        }
    }
    Ok(())
}

/// Fast boundary refit for resampling: coarse exhaustive scan followed by
/// single-coordinate polish on the fine grid. The result satisfies "no
/// single-coordinate move improves the criterion".
pub(crate) fn fit_boundaries_fast(
    tables: &[Vec<f64>],
    grid: &Grid,
    k: usize,
    coarse: usize,
) -> Vec<usize> {
    let n = grid.n;
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![0usize; k];
    let coarse = coarse.max(1);
    let coarse_points: Vec<usize> = {
        let mut pts: Vec<usize> = (0..n).step_by(coarse).collect();
        if *pts.last().unwrap() != n - 1 {
            pts.push(n - 1);
        }
        pts
    };
    let mut tuple = vec![0usize; k];
    scan_coarse(tables, n, &coarse_points, k, 0, 0, &mut tuple, &mut best, &mut arg);
    let mut cur = arg;
    loop {
        let mut improved = false;
        for d in 0..k {
            let lo = if d == 0 { 0 } else { cur[d - 1] };
            let hi = if d == k - 1 { n - 1 } else { cur[d + 1] };
            let here = tuple_value(tables, n, &cur);
            let mut local = (here, cur[d]);
            let mut cand = cur.clone();
            for x in lo..=hi {
                cand[d] = x;
                let v = tuple_value(tables, n, &cand);
                if v > local.0 {
                    local = (v, x);
                }
            }
            if local.1 != cur[d] {
                cur[d] = local.1;
                improved = true;
            }
        }
        if !improved {
            return cur;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_coarse(
    tables: &[Vec<f64>],
    n: usize,
    points: &[usize],
    k: usize,
    depth: usize,
    min_pt: usize,
    tuple: &mut Vec<usize>,
    best: &mut f64,
    arg: &mut Vec<usize>,
) {
    if depth == k {
        let v = tuple_value(tables, n, tuple);
        if v > *best {
            *best = v;
            arg.clone_from(tuple);
        }
        return;
    }
    for (pi, &p) in points.iter().enumerate().skip(min_pt) {
        tuple[depth] = p;
        scan_coarse(tables, n, points, k, depth + 1, pi, tuple, best, arg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CalendarSample, CalendarStratum};
    use proptest::prelude::*;

    fn dataset(strata_obs: &[Vec<Vec<(f64, f64)>>], t_start: f64, t_end: f64) -> CalendarDataset {
        let strata = strata_obs
            .iter()
            .enumerate()
            .map(|(g, samples)| CalendarStratum {
                name: format!("S{g}"),
                samples: samples
                    .iter()
                    .enumerate()
                    .map(|(m, obs)| CalendarSample { id: format!("s{g}-{m}"), obs: obs.clone() })
                    .collect(),
            })
            .collect();
        CalendarDataset { strata, t_start, t_end }
    }

    #[test]
    fn pava_passes_monotone_input_through() {
        let y = [1.0, 2.0, 5.0, 9.0];
        let s = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(ordered_sequence_mle(&y, &s, -100.0, 100.0).unwrap(), y.to_vec());
    }

    #[test]
    fn pava_pools_single_violation() {
        let y = [10.0, 0.0];
        let s = [1.0, 1.0];
        assert_eq!(ordered_sequence_mle(&y, &s, -100.0, 100.0).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn box_constraint_saturates() {
        let y = [-10.0, -8.0, -9.0];
        let s = [1.0, 1.0, 1.0];
        let fit = ordered_sequence_mle(&y, &s, 0.0, 100.0).unwrap();
        assert_eq!(fit, vec![0.0, 0.0, 0.0]);
    }

    /// Dynamic-programming oracle: exact isotonic + box optimum on a value
    /// grid, independent of the pool-adjacent-violators path.
    fn grid_oracle(y: &[f64], w: &[f64], t_s: f64, t_e: f64, step: f64) -> Vec<f64> {
        let n = ((t_e - t_s) / step).round() as usize + 1;
        let m = y.len();
        let val = |j: usize| t_s + j as f64 * step;
        // best[i][j] = (min cost of fitting 0..=i with mu_i = val(j'), j' <= j
        //               realized at argmin index)
        let mut cost = vec![0.0f64; n];
        let mut arg = vec![vec![0usize; n]; m];
        for j in 0..n {
            cost[j] = w[0] * (y[0] - val(j)).powi(2);
            arg[0][j] = j;
        }
        let mut run_cost = vec![0.0f64; n];
        let mut run_arg = vec![0usize; n];
        for i in 1..m {
            let mut rmin = f64::INFINITY;
            let mut rarg = 0usize;
            for j in 0..n {
                if cost[j] < rmin {
                    rmin = cost[j];
                    rarg = j;
                }
                run_cost[j] = rmin;
                run_arg[j] = rarg;
            }
            for j in 0..n {
                cost[j] = run_cost[j] + w[i] * (y[i] - val(j)).powi(2);
                arg[i][j] = run_arg[j];
            }
        }
        let mut j = (0..n).min_by(|&a, &b| cost[a].total_cmp(&cost[b])).unwrap();
        let mut out = vec![0.0; m];
        for i in (0..m).rev() {
            out[i] = val(j);
            if i > 0 {
                j = arg[i][j];
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pava_matches_grid_oracle(
            ys in proptest::collection::vec(-5.0f64..5.0, 1..5),
            ss in proptest::collection::vec(0.5f64..3.0, 4),
        ) {
            let m = ys.len();
            let sigma: Vec<f64> = ss[..m].to_vec();
            let w: Vec<f64> = sigma.iter().map(|s| 1.0/(s*s)).collect();
            let fit = ordered_sequence_mle(&ys, &sigma, -6.0, 6.0).unwrap();
            let oracle = grid_oracle(&ys, &w, -6.0, 6.0, 0.01);
            for (a, b) in fit.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 0.011, "fit {a} oracle {b}");
            }
        }
    }

    #[test]
    fn profile_single_sample_perfect_fit_is_zero() {
        let ds = dataset(&[vec![vec![(-950.0, 10.0)]]], -1000.0, -900.0);
        let tau = BoundaryVector::new(vec![], -1000.0, -900.0).unwrap();
        let v = profile_loglik(&tau, &ds, HuberSpec::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn profile_invariant_to_sample_relabeling() {
        let ds1 = dataset(
            &[vec![vec![(-950.0, 10.0)], vec![(-940.0, 8.0)]], vec![vec![(-920.0, 10.0)]]],
            -1000.0,
            -900.0,
        );
        let ds2 = dataset(
            &[vec![vec![(-940.0, 8.0)], vec![(-950.0, 10.0)]], vec![vec![(-920.0, 10.0)]]],
            -1000.0,
            -900.0,
        );
        let tau = BoundaryVector::new(vec![-930.0], -1000.0, -900.0).unwrap();
        let a = profile_loglik(&tau, &ds1, HuberSpec::default()).unwrap();
        let b = profile_loglik(&tau, &ds2, HuberSpec::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moving_boundary_past_data_decreases_criterion() {
        let ds = dataset(
            &[vec![vec![(-980.0, 10.0)]], vec![vec![(-920.0, 10.0)]]],
            -1050.0,
            -850.0,
        );
        let c = HuberSpec::default();
        let mut last = f64::INFINITY;
        for b in [-912.0, -908.0, -904.0, -900.0] {
            let tau = BoundaryVector::new(vec![b], -1050.0, -850.0).unwrap();
            let v = profile_loglik(&tau, &ds, c).unwrap();
            assert!(v < last, "criterion should fall as the boundary passes the data");
            last = v;
        }
    }

    #[test]
    fn gap_between_strata_gives_plateau_with_midpoint_estimate() {
        let ds = dataset(
            &[vec![vec![(-1000.0, 5.0)]], vec![vec![(-900.0, 5.0)]]],
            -1050.0,
            -850.0,
        );
        let (fit, profile) = maximize_boundaries(&ds, HuberSpec::default(), 1.0).unwrap();
        assert!(fit.plateau_cells > 50, "wide flat argmax, got {}", fit.plateau_cells);
        let (lo, hi) = fit.plateau[0];
        assert!(lo > -1000.0 && hi < -900.0);
        let mid = fit.tau_hat.interior()[0];
        assert!((mid - 0.5 * (lo + hi)).abs() < 1e-9);
        assert_eq!(profile.marginals.len(), 1);
    }

    #[test]
    fn argmax_has_no_improving_single_coordinate_move() {
        let ds = dataset(
            &[
                vec![vec![(-1000.0, 12.0)], vec![(-985.0, 15.0)]],
                vec![vec![(-950.0, 10.0)], vec![(-945.0, 14.0)]],
                vec![vec![(-915.0, 9.0)], vec![(-905.0, 11.0)]],
            ],
            -1040.0,
            -880.0,
        );
        let c = HuberSpec::default();
        let (_, profile) = maximize_boundaries(&ds, c, 1.0).unwrap();
        let grid = profile.grid;
        let tables = build_tables(&ds, c, &grid).unwrap();
        let arg = &profile.argmax;
        let base = tuple_value(&tables, grid.n, arg);
        for d in 0..arg.len() {
            for delta in [-1isize, 1] {
                let x = arg[d] as isize + delta;
                if x < 0 || x as usize >= grid.n {
                    continue;
                }
                let mut cand = arg.clone();
                cand[d] = x as usize;
                if cand.windows(2).all(|w| w[0] <= w[1]) {
                    assert!(tuple_value(&tables, grid.n, &cand) <= base + 1e-9);
                }
            }
        }
    }

    #[test]
    fn truncation_flags_match_unconstrained_location() {
        let ds = dataset(
            &[vec![vec![(-990.0, 5.0)], vec![(-930.0, 5.0)]], vec![vec![(-920.0, 5.0)]]],
            -1020.0,
            -880.0,
        );
        let c = HuberSpec::default();
        let (fit, _) = maximize_boundaries(&ds, c, 1.0).unwrap();
        for (g, stratum) in ds.strata.iter().enumerate() {
            let (lo, hi) = fit.tau_hat.stratum_interval(g);
            for (m, sample) in stratum.samples.iter().enumerate() {
                let free = robust::m_estimate(&sample.obs, c.c).unwrap();
                let expect = if free < lo {
                    Truncation::Lower
                } else if free > hi {
                    Truncation::Upper
                } else {
                    Truncation::None
                };
                assert_eq!(fit.flags[g][m], expect, "stratum {g} sample {m}");
                assert!(fit.mu_hat[g][m] >= lo - 1e-9 && fit.mu_hat[g][m] <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn profile_continuity_under_small_perturbation() {
        let ds = dataset(
            &[vec![vec![(-980.0, 10.0)]], vec![vec![(-930.0, 10.0)]]],
            -1020.0,
            -880.0,
        );
        let c = HuberSpec::default();
        let tau = BoundaryVector::new(vec![-955.0], -1020.0, -880.0).unwrap();
        let v0 = profile_loglik(&tau, &ds, c).unwrap();
        for eps in [1e-3, 1e-2, 0.1] {
            let tau2 = BoundaryVector::new(vec![-955.0 + eps], -1020.0, -880.0).unwrap();
            let v1 = profile_loglik(&tau2, &ds, c).unwrap();
            assert!((v1 - v0).abs() < 0.5 * eps + 1e-6, "eps {eps}: {v0} -> {v1}");
        }
    }

    #[test]
    fn fast_fit_agrees_with_exhaustive_on_small_instance() {
        let ds = dataset(
            &[
                vec![vec![(-1005.0, 8.0)], vec![(-990.0, 12.0)]],
                vec![vec![(-955.0, 9.0)]],
                vec![vec![(-910.0, 10.0)], vec![(-902.0, 8.0)]],
            ],
            -1040.0,
            -880.0,
        );
        let c = HuberSpec::default();
        let (_, profile) = maximize_boundaries(&ds, c, 1.0).unwrap();
        let tables = build_tables(&ds, c, &profile.grid).unwrap();
        let fast = fit_boundaries_fast(&tables, &profile.grid, 2, 5);
        let v_fast = tuple_value(&tables, profile.grid.n, &fast);
        assert!((v_fast - profile.max_value).abs() <= 1e-9, "{v_fast} vs {}", profile.max_value);
    }

    #[test]
    fn step_larger_than_window_rejected() {
        let ds = dataset(&[vec![vec![(-980.0, 10.0)]], vec![vec![(-930.0, 10.0)]]], -1000.0, -900.0);
        assert!(maximize_boundaries(&ds, HuberSpec::default(), 150.0).is_err());
    }
}
