//! Proximal map of the weighted mean absolute error
//!
//! For sorted data `d_1 <= ... <= d_N` with weights `w_i >= 0` the function
//! `f(y) = sum_i w_i |y - d_i|` is convex and piecewise linear. Its proximal
//! map `prox_{gamma f}(x) = argmin_y gamma f(y) + (y - x)^2 / 2` is a
//! staircase: one plateau per data point, joined by affine pieces of slope 1.
//!
//! Evaluation locates the smallest index `k` with
//! `gamma (W_k - V_{k+1}) + d_k - x >= 0` (the quantity is monotone in `k`,
//! so a binary search suffices) and returns
//! `min(d_k, x - gamma (W_{k-1} - V_k))`, where `W` and `V` are the forward
//! and reverse cumulative weights.
//!
//! Indices in this module follow the 1-based convention of the cumulative
//! weights: `k = N + 1` means "to the right of every data point".

use rayon::prelude::*;

use crate::error::{Error, Result};

/// One sorted, weighted data set together with its prox parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxInstance {
    data: Vec<f64>,
    weights: Vec<f64>,
    gamma: f64,
}

/// Closed interval `[lo, hi]` of subgradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SubgradientInterval {
    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lo - tol && value <= self.hi + tol
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }
}

/// Forward and reverse cumulative weights with their sentinel extensions.
///
/// `fwd` stores `W_0 ..= W_{N+1}` and `rev` stores `V_1 ..= V_{N+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeWeights {
    fwd: Vec<f64>,
    rev: Vec<f64>,
}

impl CumulativeWeights {
    pub fn from_weights(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut fwd = vec![0.0; n + 2];
        let mut rev = vec![0.0; n + 2];
        fill_cumulative(weights, &mut fwd, &mut rev);
        CumulativeWeights { fwd, rev }
    }

    /// Number of data points `N`.
    pub fn len(&self) -> usize {
        self.fwd.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `W_i` for `0 <= i <= N + 1`.
    pub fn fwd(&self, i: usize) -> f64 {
        self.fwd[i]
    }

    /// `V_i` for `1 <= i <= N + 2`.
    pub fn rev(&self, i: usize) -> f64 {
        self.rev[i - 1]
    }

    pub fn fwd_slice(&self) -> &[f64] {
        &self.fwd
    }

    pub fn rev_slice(&self) -> &[f64] {
        &self.rev
    }

    /// Total weight `W_N`.
    pub fn total(&self) -> f64 {
        self.fwd[self.len()]
    }
}

/// Plain left-to-right prefix sums into `fwd` (length `N + 2`, holding
/// `W_0..=W_{N+1}`) and right-to-left suffix sums into `rev` (length `N + 2`,
/// holding `V_1..=V_{N+2}`).
fn fill_cumulative(weights: &[f64], fwd: &mut [f64], rev: &mut [f64]) {
    let n = weights.len();
    debug_assert!(fwd.len() >= n + 2 && rev.len() >= n + 2);
    let mut acc = 0.0;
    fwd[0] = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        fwd[i + 1] = acc;
    }
    fwd[n + 1] = acc;

    let mut acc = 0.0;
    rev[n] = 0.0;
    rev[n + 1] = 0.0;
    for i in (0..n).rev() {
        acc += weights[i];
        rev[i] = acc;
    }
}

/// Index search condition `gamma (W_k - V_{k+1}) + d_k - x` for `1 <= k <= N`.
#[inline]
fn condition(data: &[f64], fwd: &[f64], rev: &[f64], gamma: f64, x: f64, k: usize) -> f64 {
    // rev[k] holds V_{k+1}
    gamma * (fwd[k] - rev[k]) + data[k - 1] - x
}

/// Smallest `k` in `1..=N+1` whose condition is nonnegative, by bisection.
#[inline]
fn search_index(data: &[f64], fwd: &[f64], rev: &[f64], gamma: f64, x: f64) -> usize {
    let n = data.len();
    let (mut lo, mut hi) = (1usize, n + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if condition(data, fwd, rev, gamma, x, mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

#[inline]
fn evaluate(data: &[f64], fwd: &[f64], rev: &[f64], gamma: f64, x: f64) -> f64 {
    let k = search_index(data, fwd, rev, gamma, x);
    // rev[k - 1] holds V_k
    let candidate = x - gamma * (fwd[k - 1] - rev[k - 1]);
    if k <= data.len() {
        data[k - 1].min(candidate)
    } else {
        candidate
    }
}

fn check_finite(x: f64, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn validate_row(data: &[f64], weights: &[f64], gamma: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} data points but {} weights",
            data.len(),
            weights.len()
        )));
    }
    if gamma.is_nan() || gamma.is_infinite() {
        return Err(Error::NonFinite("gamma"));
    }
    if gamma <= 0.0 {
        return Err(Error::NonpositiveGamma(gamma));
    }
    for (i, (&d, &w)) in data.iter().zip(weights).enumerate() {
        check_finite(d, "data")?;
        check_finite(w, "weights")?;
        if w < 0.0 {
            return Err(Error::NegativeWeight { index: i, value: w });
        }
        if i > 0 && d < data[i - 1] {
            return Err(Error::Unsorted(i));
        }
    }
    Ok(())
}

impl ProxInstance {
    /// Wraps already sorted data without merging duplicates.
    pub fn new(data: Vec<f64>, weights: Vec<f64>, gamma: f64) -> Result<Self> {
        validate_row(&data, &weights, gamma)?;
        Ok(ProxInstance { data, weights, gamma })
    }

    /// Sorts the data and merges duplicate points by adding their weights.
    pub fn prepare(raw_data: &[f64], raw_weights: &[f64], gamma: f64) -> Result<Self> {
        if raw_data.is_empty() {
            return Err(Error::EmptyData);
        }
        if raw_data.len() != raw_weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} data points but {} weights",
                raw_data.len(),
                raw_weights.len()
            )));
        }
        for (i, (&d, &w)) in raw_data.iter().zip(raw_weights).enumerate() {
            check_finite(d, "data")?;
            check_finite(w, "weights")?;
            if w < 0.0 {
                return Err(Error::NegativeWeight { index: i, value: w });
            }
        }
        check_finite(gamma, "gamma")?;
        if gamma <= 0.0 {
            return Err(Error::NonpositiveGamma(gamma));
        }

        let mut pairs: Vec<(f64, f64)> = raw_data.iter().copied().zip(raw_weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut data: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (d, w) in pairs {
            match data.last() {
                Some(&last) if last == d => *weights.last_mut().unwrap() += w,
                _ => {
                    data.push(d);
                    weights.push(w);
                }
            }
        }
        Ok(ProxInstance { data, weights, gamma })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data and weights with another prox parameter.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        ProxInstance::new(self.data.clone(), self.weights.clone(), gamma)
    }

    pub fn cumulative_weights(&self) -> CumulativeWeights {
        CumulativeWeights::from_weights(&self.weights)
    }

    /// `f(x) = sum_i w_i |x - d_i|`.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        check_finite(x, "x")?;
        Ok(self.data.iter().zip(&self.weights).map(|(d, w)| w * (x - d).abs()).sum())
    }

    /// `Phi(y) = gamma f(y) + (y - x)^2 / 2`.
    pub fn eval_objective(&self, x: f64, y: f64) -> Result<f64> {
        check_finite(x, "x")?;
        let f = self.eval_f(y)?;
        Ok(self.gamma * f + 0.5 * (y - x) * (y - x))
    }

    /// Subdifferential of `f` at `y`. At a data point (including a run of
    /// duplicates) this is `[W_{i-1} - V_i, W_j - V_{j+1}]` for the first and
    /// last index `i..=j` of the run; elsewhere it is the derivative.
    pub fn subdifferential_f(&self, y: f64) -> SubgradientInterval {
        let cw = self.cumulative_weights();
        let below = self.data.partition_point(|&d| d < y);
        let upto = self.data.partition_point(|&d| d <= y);
        // slope on the open interval right of `m` data points: W_m - V_{m+1}
        let slope = |m: usize| cw.fwd(m) - cw.rev(m + 1);
        SubgradientInterval { lo: slope(below), hi: slope(upto) }
    }

    /// Smallest `k` in `1..=N+1` with `gamma (W_k - V_{k+1}) + d_k - x >= 0`,
    /// where `d_{N+1} = +inf`.
    pub fn find_index(&self, x: f64) -> Result<usize> {
        check_finite(x, "x")?;
        let cw = self.cumulative_weights();
        Ok(search_index(&self.data, &cw.fwd, &cw.rev, self.gamma, x))
    }

    /// Index search by evaluating every condition and taking the first
    /// nonnegative entry. Agrees with [`ProxInstance::find_index`].
    pub fn find_index_scan(&self, x: f64) -> Result<usize> {
        check_finite(x, "x")?;
        let cw = self.cumulative_weights();
        let n = self.len();
        Ok((1..=n)
            .find(|&k| condition(&self.data, &cw.fwd, &cw.rev, self.gamma, x, k) >= 0.0)
            .unwrap_or(n + 1))
    }

    /// The index-search quantities for `k = 1..=N`.
    pub fn conditions(&self, x: f64) -> Vec<f64> {
        let cw = self.cumulative_weights();
        (1..=self.len())
            .map(|k| condition(&self.data, &cw.fwd, &cw.rev, self.gamma, x, k))
            .collect()
    }

    /// `prox_{gamma f}(x)`.
    pub fn prox(&self, x: f64) -> Result<f64> {
        check_finite(x, "x")?;
        let cw = self.cumulative_weights();
        Ok(evaluate(&self.data, &cw.fwd, &cw.rev, self.gamma, x))
    }

    /// Range of `x` on which `prox(x) == d_k`:
    /// `gamma (W_{k-1} - V_{k+1}) + d_k + [-gamma w_k, gamma w_k]`.
    pub fn plateau_interval(&self, k: usize) -> Result<(f64, f64)> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::IndexOutOfRange { index: k, max: n });
        }
        let cw = self.cumulative_weights();
        let lo = self.gamma * (cw.fwd(k - 1) - cw.rev(k)) + self.data[k - 1];
        let hi = self.gamma * (cw.fwd(k) - cw.rev(k + 1)) + self.data[k - 1];
        Ok((lo, hi))
    }

    /// Range of `x` on which `prox` is affine with slope 1 and lands strictly
    /// between `d_k` and `d_{k+1}`, for `0 <= k <= N` (open ends are infinite).
    pub fn affine_regime(&self, k: usize) -> Result<(f64, f64)> {
        let n = self.len();
        if k > n {
            return Err(Error::IndexOutOfRange { index: k, max: n });
        }
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.plateau_interval(k)?.1 };
        let hi = if k == n { f64::INFINITY } else { self.plateau_interval(k + 1)?.0 };
        Ok((lo, hi))
    }
}

/// Reference evaluation by enumeration.
///
/// `Phi` is quadratic on every interval between consecutive data points, so
/// its minimizer is one of the data points or one of the per-piece stationary
/// points clipped to its piece. All `2N + 1` candidates are scored with
/// `Phi`. A stationary point that needed no clipping is a critical point of
/// the convex `Phi` and wins any tie that is within rounding of the best score.
pub fn oracle_prox(inst: &ProxInstance, x: f64) -> f64 {
    let n = inst.len();
    let d = inst.data();
    let w = inst.weights();
    let gamma = inst.gamma();
    let phi = |y: f64| -> f64 {
        let mut f = 0.0;
        for i in 0..n {
            f += w[i] * (y - d[i]).abs();
        }
        gamma * f + 0.5 * (y - x) * (y - x)
    };
    // (score, value, unclipped stationary point)
    let mut candidates: Vec<(f64, f64, bool)> = Vec::with_capacity(2 * n + 1);
    for &dk in d {
        candidates.push((phi(dk), dk, false));
    }
    for k in 1..=n + 1 {
        let left: f64 = w[..k - 1].iter().sum();
        let right: f64 = w[k - 1..].iter().rev().sum();
        let stationary = x - gamma * (left - right);
        let lo = if k == 1 { f64::NEG_INFINITY } else { d[k - 2] };
        let hi = if k == n + 1 { f64::INFINITY } else { d[k - 1] };
        let clipped = stationary.clamp(lo, hi);
        let inside = stationary > lo && stationary < hi;
        candidates.push((phi(clipped), clipped, inside));
    }
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * (1.0 + best.abs());
    candidates
        .iter()
        .filter(|c| c.2 && c.0 <= best + slack)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .or_else(|| candidates.iter().min_by(|a, b| a.0.total_cmp(&b.0)))
        .map(|c| c.1)
        .expect("at least one candidate")
}

/// Many independent instances padded to a common length with zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxBatch {
    width: usize,
    data: Vec<f64>,
    weights: Vec<f64>,
    gamma: Vec<f64>,
    x: Vec<f64>,
}

impl ProxBatch {
    /// Row-major `data` and `weights` of shape `x.len() x width`.
    pub fn new(width: usize, data: Vec<f64>, weights: Vec<f64>, gamma: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let rows = x.len();
        if gamma.len() != rows || data.len() != rows * width || weights.len() != rows * width {
            return Err(Error::ShapeMismatch(format!(
                "{} evaluation points, {} gammas, {} data and {} weights for width {}",
                rows,
                gamma.len(),
                data.len(),
                weights.len(),
                width
            )));
        }
        if rows > 0 && width == 0 {
            return Err(Error::EmptyData);
        }
        for r in 0..rows {
            let span = r * width..(r + 1) * width;
            validate_row(&data[span.clone()], &weights[span], gamma[r])?;
            check_finite(x[r], "x")?;
        }
        Ok(ProxBatch { width, data, weights, gamma, x })
    }

    /// Builds a batch from instances of possibly different lengths. Short rows
    /// are padded at the end with copies of their largest data point carrying
    /// weight zero.
    pub fn from_instances(instances: &[ProxInstance], x: &[f64]) -> Result<Self> {
        if instances.len() != x.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} instances but {} evaluation points",
                instances.len(),
                x.len()
            )));
        }
        let width = instances.iter().map(ProxInstance::len).max().unwrap_or(0);
        let mut data = Vec::with_capacity(width * x.len());
        let mut weights = Vec::with_capacity(width * x.len());
        for inst in instances {
            let last = *inst.data().last().expect("instances are nonempty");
            data.extend_from_slice(inst.data());
            weights.extend_from_slice(inst.weights());
            for _ in inst.len()..width {
                data.push(last);
                weights.push(0.0);
            }
        }
        let gamma = instances.iter().map(ProxInstance::gamma).collect();
        ProxBatch::new(width, data, weights, gamma, x.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.x.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, r: usize) -> ProxInstance {
        let span = r * self.width..(r + 1) * self.width;
        ProxInstance {
            data: self.data[span.clone()].to_vec(),
            weights: self.weights[span].to_vec(),
            gamma: self.gamma[r],
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Evaluates every row of `batch`; the result is bitwise identical to calling
/// [`ProxInstance::prox`] row by row, independent of the thread count.
pub fn prox_batch(batch: &ProxBatch) -> Vec<f64> {
    let mut out = vec![0.0; batch.rows()];
    prox_rows_into(batch.width, &batch.data, &batch.weights, &batch.gamma, &batch.x, &mut out);
    out
}

/// Unchecked batched kernel over row-major slices. Callers must uphold the
/// row invariants (sorted data, nonnegative weights, positive gamma).
pub(crate) fn prox_rows_into(
    width: usize,
    data: &[f64],
    weights: &[f64],
    gamma: &[f64],
    x: &[f64],
    out: &mut [f64],
) {
    const CHUNK: usize = 1024;
    if width == 0 {
        return;
    }
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut fwd = vec![0.0; width + 2];
        let mut rev = vec![0.0; width + 2];
        for (i, y) in chunk.iter_mut().enumerate() {
            let r = c * CHUNK + i;
            let span = r * width..(r + 1) * width;
            fill_cumulative(&weights[span.clone()], &mut fwd, &mut rev);
            *y = evaluate(&data[span], &fwd, &rev, gamma[r], x[r]);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ProxInstance {
        ProxInstance::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, 1.0], 0.5).unwrap()
    }

    #[test]
    fn prepare_sorts_and_merges() {
        let inst = ProxInstance::prepare(&[3.0, 1.0, 1.0], &[1.0, 2.0, 0.5], 1.0).unwrap();
        assert_eq!(inst.data(), &[1.0, 3.0]);
        assert_eq!(inst.weights(), &[2.5, 1.0]);

        let single = ProxInstance::prepare(&[0.0], &[1.0], 0.5).unwrap();
        assert_eq!(single.data(), &[0.0]);
        assert_eq!(single.weights(), &[1.0]);
    }

    #[test]
    fn prepare_rejects_bad_input() {
        assert!(matches!(
            ProxInstance::prepare(&[1.0, 2.0], &[1.0, -1.0], 1.0),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(ProxInstance::prepare(&[], &[], 1.0), Err(Error::EmptyData)));
        assert!(matches!(ProxInstance::prepare(&[1.0], &[1.0], 0.0), Err(Error::NonpositiveGamma(_))));
        assert!(matches!(ProxInstance::prepare(&[f64::NAN], &[1.0], 1.0), Err(Error::NonFinite(_))));
        assert!(matches!(ProxInstance::new(vec![2.0, 1.0], vec![1.0, 1.0], 1.0), Err(Error::Unsorted(1))));
    }

    #[test]
    fn cumulative_weights_with_sentinels() {
        let cw = CumulativeWeights::from_weights(&[1.0, 2.0, 1.0]);
        assert_eq!(cw.fwd_slice(), &[0.0, 1.0, 3.0, 4.0, 4.0]);
        assert_eq!(cw.rev_slice(), &[4.0, 3.0, 1.0, 0.0, 0.0]);

        let cw = CumulativeWeights::from_weights(&[1.0]);
        assert_eq!(cw.fwd_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(cw.rev_slice(), &[1.0, 0.0, 0.0]);

        let cw = CumulativeWeights::from_weights(&[0.0, 1.0]);
        assert_eq!(cw.fwd_slice(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(cw.rev_slice(), &[1.0, 1.0, 0.0, 0.0]);
        for i in 1..=4 {
            assert_eq!(cw.rev(i), cw.total() - cw.fwd(i - 1));
        }
    }

    #[test]
    fn f_and_objective() {
        let inst = sample();
        assert_eq!(inst.eval_f(2.0).unwrap(), 5.0);
        assert_eq!(inst.eval_f(1.0).unwrap(), 3.0);
        assert!((inst.eval_objective(2.2, 1.2).unwrap() - 2.2).abs() < 1e-15);
        assert!(matches!(inst.eval_f(f64::INFINITY), Err(Error::NonFinite(_))));

        let point = ProxInstance::new(vec![0.0], vec![1.0], 1.0).unwrap();
        assert_eq!(point.eval_f(0.0).unwrap(), 0.0);
        assert_eq!(point.eval_objective(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(point.eval_objective(2.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn subdifferential_at_and_between_points() {
        let inst = sample();
        assert_eq!(inst.subdifferential_f(1.0), SubgradientInterval { lo: -2.0, hi: 2.0 });
        let between = inst.subdifferential_f(2.0);
        assert!(between.is_degenerate());
        assert_eq!(between.lo, 2.0);
        assert_eq!(inst.subdifferential_f(-5.0), SubgradientInterval { lo: -4.0, hi: -4.0 });

        let dup = ProxInstance::new(vec![0.0, 1.0, 1.0, 3.0], vec![1.0, 1.5, 0.5, 1.0], 1.0).unwrap();
        assert_eq!(dup.subdifferential_f(1.0), SubgradientInterval { lo: -2.0, hi: 2.0 });
    }

    #[test]
    fn index_search() {
        let inst = sample();
        assert_eq!(inst.conditions(2.2).len(), 3);
        let c = inst.conditions(2.2);
        assert!((c[0] + 3.2).abs() < 1e-15 && (c[1] + 0.2).abs() < 1e-15 && (c[2] - 2.8).abs() < 1e-15);
        assert_eq!(inst.find_index(2.2).unwrap(), 3);
        assert_eq!(inst.find_index(0.5).unwrap(), 2);
        assert_eq!(inst.find_index(-10.0).unwrap(), 1);
        assert_eq!(inst.find_index(100.0).unwrap(), 4);
        for x in [-10.0, 0.5, 2.2, 100.0] {
            assert_eq!(inst.find_index(x).unwrap(), inst.find_index_scan(x).unwrap());
        }
    }

    #[test]
    fn exact_zero_condition_takes_smallest_index() {
        // condition at k = 1 is 0.5 * (1 - 3) + 0 - x, zero for x = -1
        let inst = sample();
        assert_eq!(inst.find_index(-1.0).unwrap(), 1);
        assert_eq!(inst.prox(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn prox_examples() {
        let soft = ProxInstance::new(vec![0.0], vec![1.0], 0.5).unwrap();
        assert_eq!(soft.prox(2.0).unwrap(), 1.5);
        let sym = ProxInstance::new(vec![-1.0, 1.0], vec![1.0, 1.0], 0.3).unwrap();
        assert_eq!(sym.prox(0.0).unwrap(), 0.0);
        let inst = sample();
        assert!((inst.prox(2.2).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(inst.prox(0.5).unwrap(), 1.0);
        assert!(matches!(inst.prox(f64::NAN), Err(Error::NonFinite(_))));
    }

    #[test]
    fn oracle_examples() {
        let inst = sample();
        assert!((oracle_prox(&inst, 2.2) - 1.2).abs() < 1e-15);
        assert_eq!(oracle_prox(&inst, 0.5), 1.0);
        let soft = ProxInstance::new(vec![0.0], vec![1.0], 0.5).unwrap();
        assert_eq!(oracle_prox(&soft, 2.0), 1.5);
        assert_eq!(oracle_prox(&soft, 0.25), 0.0);
        assert_eq!(oracle_prox(&soft, -3.0), -2.5);
    }

    #[test]
    fn plateau_examples() {
        let inst = sample();
        assert_eq!(inst.plateau_interval(2).unwrap(), (0.0, 2.0));
        assert!(matches!(inst.plateau_interval(0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(inst.plateau_interval(4), Err(Error::IndexOutOfRange { .. })));
        let gamma = 0.7;
        let soft = ProxInstance::new(vec![0.0], vec![1.0], gamma).unwrap();
        assert_eq!(soft.plateau_interval(1).unwrap(), (-gamma, gamma));
        let (lo, hi) = inst.plateau_interval(2).unwrap();
        assert_eq!(inst.prox(lo).unwrap(), 1.0);
        assert_eq!(inst.prox(hi).unwrap(), 1.0);
    }

    #[test]
    fn batch_examples() {
        let rows = vec![
            ProxInstance::new(vec![0.0], vec![1.0], 0.5).unwrap(),
            ProxInstance::new(vec![-1.0, 1.0], vec![1.0, 1.0], 0.3).unwrap(),
            sample(),
        ];
        let batch = ProxBatch::from_instances(&rows, &[2.0, 0.0, 2.2]).unwrap();
        assert_eq!(batch.width(), 3);
        let y = prox_batch(&batch);
        assert_eq!(y[0], 1.5);
        assert_eq!(y[1], 0.0);
        assert!((y[2] - 1.2).abs() < 1e-15);

        let empty = ProxBatch::new(4, vec![], vec![], vec![], vec![]).unwrap();
        assert!(prox_batch(&empty).is_empty());

        assert!(matches!(
            ProxBatch::new(2, vec![0.0, 1.0, 2.0], vec![1.0, 1.0], vec![1.0], vec![0.0]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn padding_is_inert() {
        let plain = ProxInstance::new(vec![0.0, 1.0], vec![1.0, 1.0], 0.4).unwrap();
        let padded = ProxInstance::new(vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0], 0.4).unwrap();
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            assert_eq!(plain.prox(x).unwrap().to_bits(), padded.prox(x).unwrap().to_bits());
        }
    }
}
