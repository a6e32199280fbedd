//! Histogram estimate of P(w), its complementary CDF Q(w), the modal
//! wealth, and least-squares tail fits.

use thiserror::Error;

use crate::probit::inverse_normal_cdf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("wealth value {0} is negative or not finite")]
    InvalidObservation(f64),
    #[error("histogram holds no observations")]
    Empty,
    #[error("histograms have different binning ({0} vs {1})")]
    BinningMismatch(String, String),
    #[error("need at least 3 usable points for a fit, got {0}")]
    InsufficientData(usize),
    #[error("fit abscissae are all equal")]
    DegenerateFit,
}

/// Uniform bins over `[0, n_bins * bin_width)` plus an overflow counter.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthHistogram {
    bin_width: f64,
    counts: Vec<u64>,
    overflow: u64,
    total: u64,
}

impl WealthHistogram {
    pub fn new(bin_width: f64, n_bins: usize) -> Result<Self, StatsError> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(StatsError::InvalidBinWidth(bin_width));
        }
        if n_bins < 2 {
            return Err(StatsError::TooFewBins(n_bins));
        }
        Ok(Self {
            bin_width,
            counts: vec![0; n_bins],
            overflow: 0,
            total: 0,
        })
    }

    /// Rebuilds a histogram from stored counts.
    pub fn from_counts(bin_width: f64, counts: Vec<u64>, overflow: u64) -> Result<Self, StatsError> {
        let mut h = Self::new(bin_width, counts.len())?;
        h.total = counts.iter().sum::<u64>() + overflow;
        h.counts = counts;
        h.overflow = overflow;
        Ok(h)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total_observations(&self) -> u64 {
        self.total
    }

    /// Upper end of the regular bins.
    pub fn upper_edge(&self) -> f64 {
        self.counts.len() as f64 * self.bin_width
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width
    }

    pub fn record(&mut self, w: f64) -> Result<(), StatsError> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(StatsError::InvalidObservation(w));
        }
        let bin = (w / self.bin_width) as usize;
        match self.counts.get_mut(bin) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
        self.total += 1;
        Ok(())
    }

    /// Adds every value of a wealth snapshot. Nothing is recorded if any
    /// value is invalid.
    pub fn add_snapshot(&mut self, snapshot: &[f64]) -> Result<(), StatsError> {
        if let Some(&bad) = snapshot.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(StatsError::InvalidObservation(bad));
        }
        for &w in snapshot {
            self.record(w)?;
        }
        Ok(())
    }

    fn same_binning(&self, other: &Self) -> Result<(), StatsError> {
        if self.bin_width.to_bits() != other.bin_width.to_bits() || self.n_bins() != other.n_bins() {
            return Err(StatsError::BinningMismatch(
                format!("{}x{}", self.n_bins(), self.bin_width),
                format!("{}x{}", other.n_bins(), other.bin_width),
            ));
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<(), StatsError> {
        self.same_binning(other)?;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.total += other.total;
        Ok(())
    }

    pub fn density(&self, bin: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts[bin] as f64 / (self.total as f64 * self.bin_width)
    }

    /// `(bin center, density)` for every regular bin.
    pub fn density_series(&self) -> Vec<(f64, f64)> {
        (0..self.n_bins())
            .map(|b| (self.bin_center(b), self.density(b)))
            .collect()
    }

    /// Share of observations that fell in the overflow bin.
    pub fn overflow_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.overflow as f64 / self.total as f64
        }
    }

    /// L1 distance between the two probability mass vectors, overflow
    /// included. 0 for identical shapes, 2 for disjoint supports.
    pub fn l1_distance(&self, other: &Self) -> Result<f64, StatsError> {
        self.same_binning(other)?;
        if self.total == 0 || other.total == 0 {
            return Err(StatsError::Empty);
        }
        let (na, nb) = (self.total as f64, other.total as f64);
        let bins: f64 = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| (a as f64 / na - b as f64 / nb).abs())
            .sum();
        Ok(bins + (self.overflow as f64 / na - other.overflow as f64 / nb).abs())
    }
}

/// Q(w) sampled at the histogram bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCcdf {
    points: Vec<(f64, f64)>,
}

impl EmpiricalCcdf {
    /// Wraps externally obtained `(w, Q)` pairs, e.g. read back from disk.
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Q at each edge `k * bin_width`, `k = 0..=n_bins`, counting the overflow
/// bin as mass above the last edge.
pub fn empirical_ccdf(hist: &WealthHistogram) -> Result<EmpiricalCcdf, StatsError> {
    if hist.total == 0 {
        return Err(StatsError::Empty);
    }
    let total = hist.total as f64;
    let mut above = hist.total;
    let mut points = Vec::with_capacity(hist.n_bins() + 1);
    for (k, &c) in hist.counts.iter().enumerate() {
        points.push((k as f64 * hist.bin_width, above as f64 / total));
        above -= c;
    }
    points.push((hist.upper_edge(), above as f64 / total));
    Ok(EmpiricalCcdf { points })
}

/// Center of the densest bin, lowest bin on ties.
pub fn modal_wealth(hist: &WealthHistogram) -> Result<f64, StatsError> {
    if hist.total == 0 {
        return Err(StatsError::Empty);
    }
    let mut best = 0;
    for (b, &c) in hist.counts.iter().enumerate() {
        if c > hist.counts[best] {
            best = b;
        }
    }
    Ok(hist.bin_center(best))
}

/// Same rule as [`modal_wealth`] applied to a `(bin center, density)` series.
pub fn mode_of_series(series: &[(f64, f64)]) -> Result<f64, StatsError> {
    let mut best: Option<(f64, f64)> = None;
    for &(w, d) in series {
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((w, d));
        }
    }
    match best {
        Some((w, d)) if d > 0.0 => Ok(w),
        _ => Err(StatsError::Empty),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl TailFit {
    /// `-1 / slope`; meaningful for exponential fits of ln Q against w.
    pub fn temperature(&self) -> f64 {
        -1.0 / self.slope
    }
}

/// Unweighted ordinary least squares of `y` on `x`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<TailFit, StatsError> {
    let n = points.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(n));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(TailFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

/// Smallest `Q` a tail fit uses. Edges further out hold too few samples:
/// their scatter dominates an unweighted fit through sheer leverage, and
/// dropping empty edges biases what is left.
pub const MIN_TAIL_MASS: f64 = 1e-4;

/// Probit fit of the after-mode tail: `Phi^-1(1 - Q(w))` against `ln w`
/// for edges with `w > w_mode` and `MIN_TAIL_MASS <= Q < 1`. For an exact
/// log-normal law with shape `sigma` the slope is `1 / sigma`.
pub fn fit_lognormal_slope(ccdf: &EmpiricalCcdf, w_mode: f64) -> Result<TailFit, StatsError> {
    let points: Vec<(f64, f64)> = ccdf
        .points
        .iter()
        .filter(|&&(w, q)| w > w_mode && w > 0.0 && (MIN_TAIL_MASS..1.0).contains(&q))
        .filter_map(|&(w, q)| inverse_normal_cdf(1.0 - q).ok().map(|z| (w.ln(), z)))
        .collect();
    least_squares(&points)
}

/// `ln Q(w)` against `w` over edges with `MIN_TAIL_MASS <= Q < 1`. The
/// temperature of a Gibbs law `Q = exp(-w / T)` is `-1 / slope`.
pub fn fit_exponential(ccdf: &EmpiricalCcdf) -> Result<TailFit, StatsError> {
    let points: Vec<(f64, f64)> = ccdf
        .points
        .iter()
        .filter(|&&(_, q)| (MIN_TAIL_MASS..1.0).contains(&q))
        .map(|&(w, q)| (w, q.ln()))
        .collect();
    least_squares(&points)
}
