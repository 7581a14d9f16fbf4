//! Summary statistics and significance tests for experiment results.

use std::fmt;

use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("episodes.csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Describes [`percentile`] in emitted reports.
pub const PERCENTILE_METHOD: &str = "linear interpolation between order statistics";

/// Percentile `q` in [0, 1] of an ascending slice, interpolating linearly
/// between the order statistics at positions `q·(n−1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    percentile(&sorted(values), 0.5)
}

/// 1-based midranks of `values` (ties share their average rank).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Number of arrangements of `m` + `n` items with each U value, i.e.
/// `counts[u]` for u in 0..=m·n.
fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // f[j][u]: arrangements of i first-sample and j second-sample items
    let max = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n)
        .map(|_| {
            let mut v = vec![0.0; max + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for _ in 1..=m {
        let mut cur = vec![vec![0.0; max + 1]; n + 1];
        cur[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=max {
                // the largest item is either from the second sample (adds nothing)
                // or from the first, beating all j second-sample items
                let mut c = cur[j - 1][u];
                if u >= j {
                    c += prev[j][u - j];
                }
                cur[j][u] = c;
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

/// Two-sided Mann-Whitney U test. Exact when the smaller sample has at
/// most 8 values and there are no ties; otherwise the normal approximation
/// with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> MannWhitney {
    assert!(!a.is_empty() && !b.is_empty(), "Mann-Whitney U needs two non-empty samples");
    let (m, n) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum: f64 = ranks[..m].iter().sum();
    let u = rank_sum - (m * (m + 1)) as f64 / 2.0;

    let mut sorted_pool = pooled.clone();
    sorted_pool.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted_pool.len() {
        let mut j = i;
        while j + 1 < sorted_pool.len() && sorted_pool[j + 1] == sorted_pool[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    if m.min(n) <= 8 && tie_term == 0.0 {
        let counts = u_distribution(m, n);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let lower: f64 = counts[..=k].iter().sum::<f64>() / total;
        let upper: f64 = counts[k..].iter().sum::<f64>() / total;
        return MannWhitney {
            u,
            p_two_sided: (2.0 * lower.min(upper)).min(1.0),
            exact: true,
        };
    }

    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mean = mf * nf / 2.0;
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    MannWhitney {
        u,
        p_two_sided: p,
        exact: false,
    }
}

/// Spearman rank correlation (Pearson correlation of midranks). Returns 0
/// when either variable is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let rx = midranks(x);
    let ry = midranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Share of the intact robot's performance a method retains, in percent.
pub fn recovered_capabilities(intact_median: f64, method_median: f64) -> f64 {
    100.0 * intact_median / method_median
}

/// Significance stars for thresholds 0.05 / 0.01 / 0.001 / 0.0001.
pub fn stars(p: f64) -> usize {
    [0.05, 0.01, 0.001, 0.0001].iter().filter(|&&t| p < t).count()
}

/// Per-target episode counts of one experiment, indexed `[replicate][target]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub episodes: Vec<Vec<usize>>,
    pub failed: Vec<Vec<bool>>,
    /// Median over replicates of the mean episodes per target.
    pub median: f64,
    pub percentile25: f64,
    pub percentile75: f64,
    pub failures: usize,
}

impl RunStats {
    pub fn new(episodes: Vec<Vec<usize>>, failed: Vec<Vec<bool>>) -> Result<Self, StatsError> {
        if episodes.is_empty() || episodes[0].is_empty() {
            return Err(StatsError::Empty);
        }
        let targets = episodes[0].len();
        if episodes.iter().any(|r| r.len() != targets)
            || failed.len() != episodes.len()
            || failed.iter().any(|r| r.len() != targets)
        {
            return Err(StatsError::Shape(
                "every replicate needs the same number of targets".into(),
            ));
        }
        let means = sorted(
            &episodes
                .iter()
                .map(|r| r.iter().sum::<usize>() as f64 / targets as f64)
                .collect::<Vec<_>>(),
        );
        let failures = failed.iter().flatten().filter(|&&f| f).count();
        Ok(Self {
            median: percentile(&means, 0.5),
            percentile25: percentile(&means, 0.25),
            percentile75: percentile(&means, 0.75),
            episodes,
            failed,
            failures,
        })
    }

    pub fn replicates(&self) -> usize {
        self.episodes.len()
    }

    pub fn targets(&self) -> usize {
        self.episodes[0].len()
    }

    pub fn replicate_means(&self) -> Vec<f64> {
        let t = self.targets() as f64;
        self.episodes
            .iter()
            .map(|r| r.iter().sum::<usize>() as f64 / t)
            .collect()
    }

    /// Every per-target count across replicates.
    pub fn pooled(&self) -> Vec<f64> {
        self.episodes.iter().flatten().map(|&e| e as f64).collect()
    }

    /// Median over replicates and the given 0-based target indices.
    pub fn target_range_median(&self, targets: std::ops::Range<usize>) -> f64 {
        let v: Vec<f64> = self
            .episodes
            .iter()
            .flat_map(|r| r[targets.clone()].iter().map(|&e| e as f64))
            .collect();
        median(&v)
    }

    /// Spearman correlation between target index and episode count.
    pub fn index_correlation(&self) -> f64 {
        let mut idx = Vec::new();
        let mut eps = Vec::new();
        for r in &self.episodes {
            for (t, &e) in r.iter().enumerate() {
                idx.push(t as f64);
                eps.push(e as f64);
            }
        }
        spearman(&idx, &eps)
    }

    /// `replicate,target,episodes,failed` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,target,episodes,failed\n");
        for (r, (eps, fails)) in self.episodes.iter().zip(&self.failed).enumerate() {
            for (t, (e, f)) in eps.iter().zip(fails).enumerate() {
                out.push_str(&format!("{r},{t},{e},{}\n", u8::from(*f)));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "replicate,target,episodes,failed" => {}
            _ => {
                return Err(StatsError::Parse {
                    line: 1,
                    reason: "missing header `replicate,target,episodes,failed`".into(),
                })
            }
        }
        let mut episodes: Vec<Vec<usize>> = Vec::new();
        let mut failed: Vec<Vec<bool>> = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| StatsError::Parse { line, reason };
            let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", fields.len())));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
            let (r, t, e) = (num(fields[0])?, num(fields[1])?, num(fields[2])?);
            let f = match fields[3] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("failed flag `{other}` is not 0 or 1"))),
            };
            if r > episodes.len() || (r == episodes.len() && t != 0) {
                return Err(bad(format!("replicate {r} out of order")));
            }
            if r == episodes.len() {
                episodes.push(Vec::new());
                failed.push(Vec::new());
            }
            if t != episodes[r].len() || r + 1 != episodes.len() {
                return Err(bad(format!("target {t} of replicate {r} out of order")));
            }
            episodes[r].push(e);
            failed[r].push(f);
        }
        Self::new(episodes, failed)
    }
}

/// How two experiments are compared for significance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComparisonMode {
    /// All per-target counts pooled across replicates.
    #[default]
    PooledTargets,
    /// One mean episodes/target value per replicate.
    ReplicateMeans,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub median_a: f64,
    pub interval_a: (f64, f64),
    pub median_b: f64,
    pub interval_b: (f64, f64),
    pub test: MannWhitney,
    pub stars: usize,
    pub mode: ComparisonMode,
}

pub fn compare(a: &RunStats, b: &RunStats, mode: ComparisonMode) -> Result<Comparison, StatsError> {
    if a.targets() != b.targets() {
        return Err(StatsError::Shape(format!(
            "target counts differ ({} vs {})",
            a.targets(),
            b.targets()
        )));
    }
    let test = match mode {
        ComparisonMode::PooledTargets => mann_whitney_u(&a.pooled(), &b.pooled()),
        ComparisonMode::ReplicateMeans => mann_whitney_u(&a.replicate_means(), &b.replicate_means()),
    };
    Ok(Comparison {
        median_a: a.median,
        interval_a: (a.percentile25, a.percentile75),
        median_b: b.median,
        interval_b: (b.percentile25, b.percentile75),
        stars: stars(test.p_two_sided),
        test,
        mode,
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "a: median {:.4} [{:.4}, {:.4}]",
            self.median_a, self.interval_a.0, self.interval_a.1
        )?;
        writeln!(
            f,
            "b: median {:.4} [{:.4}, {:.4}]",
            self.median_b, self.interval_b.0, self.interval_b.1
        )?;
        let mode = match self.mode {
            ComparisonMode::PooledTargets => "pooled per-target counts",
            ComparisonMode::ReplicateMeans => "per-replicate means",
        };
        writeln!(
            f,
            "mann-whitney ({mode}, {}): U = {}, p = {:.6e}",
            if self.test.exact { "exact" } else { "normal approximation" },
            self.test.u,
            self.test.p_two_sided
        )?;
        write!(f, "significance: {}", "*".repeat(self.stars))
    }
}
