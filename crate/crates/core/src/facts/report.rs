//! Side-by-side stylized-fact statistics with pass/fail verdicts.
//!
//! Every matrix is canonicalised before any statistic is computed, so the
//! report on a set is bitwise identical to the report on any reordering of
//! the assets in its matrices (for matrices without exact value ties).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::canonical::canonicalize;
use crate::error::{CorrError, Result};
use crate::facts::hierarchy::hierarchy_score;
use crate::facts::mst::mst;
use crate::facts::power_law::{power_law_fit, PowerLawFit, PowerLawOptions};
use crate::facts::spectrum::{eigen_spectrum, perron_frobenius_check};
use crate::facts::stats::{ks_two_sample, pairwise_stats, Histogram, PairwiseStats};
use crate::ingest::TRADING_YEAR;
use crate::matrix::CorrelationMatrix;

/// Pass/fail limits for each fact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub mean_diff_max: f64,
    pub std_diff_max: f64,
    /// Two-sample KS statistic between the sets' largest eigenvalues.
    pub lambda1_ks_max: f64,
    pub pf_rate_diff_max: f64,
    /// Two-sample KS statistic between hierarchy-score distributions.
    pub hierarchy_ks_max: f64,
    /// Chi-square homogeneity statistic of the pooled MST degree
    /// distributions divided by the number of degree observations.
    pub degree_chi2_per_obs_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            mean_diff_max: 0.05,
            std_diff_max: 0.05,
            lambda1_ks_max: 0.2,
            pf_rate_diff_max: 0.05,
            hierarchy_ks_max: 0.2,
            degree_chi2_per_obs_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    pub thresholds: Thresholds,
    /// Observations per estimated matrix; sets the Marchenko–Pastur ratio.
    pub n_obs: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            thresholds: Thresholds::default(),
            n_obs: TRADING_YEAR,
        }
    }
}

/// Statistics of one set of matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFacts {
    pub count: usize,
    pub pairwise: PairwiseStats,
    /// Largest eigenvalue of each matrix, ascending.
    pub lambda1: Vec<f64>,
    pub mean_lambda1_share: f64,
    pub mean_outlier_count: f64,
    pub mp_lambda_plus_mean: f64,
    /// All eigenvalues pooled, on `[0, n]`.
    pub eigen_histogram: Histogram,
    pub pf_pass_rate: f64,
    pub pf_degenerate: usize,
    /// Defined hierarchy scores, ascending.
    pub hierarchy_scores: Vec<f64>,
    pub hierarchy_undefined: usize,
    /// `degree_counts[k]` = MST nodes of degree `k`, pooled over the set.
    pub degree_counts: Vec<u64>,
    pub degree_fit: PowerLawFit,
    pub max_degree: usize,
    /// Largest `|Σλ - n|` over the set.
    pub max_trace_error: f64,
    /// Every MST had `n - 1` edges and degree sum `2(n - 1)`.
    pub mst_invariants_hold: bool,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    crate::linalg::order_free_sum(&mut v) / v.len() as f64
}

fn set_facts(set: &[CorrelationMatrix], n_obs: usize) -> Result<SetFacts> {
    let canonical: Vec<CorrelationMatrix> = set.iter().map(canonicalize).collect();
    let n = canonical[0].n();
    let pairwise = pairwise_stats(&canonical)?;
    let mut lambda1 = Vec::with_capacity(set.len());
    let mut shares = Vec::with_capacity(set.len());
    let mut outliers = Vec::with_capacity(set.len());
    let mut edges_plus = Vec::with_capacity(set.len());
    let mut eigen_pool = Vec::with_capacity(set.len() * n);
    let mut pf_pass = 0usize;
    let mut pf_degenerate = 0usize;
    let mut hierarchy_scores = Vec::new();
    let mut hierarchy_undefined = 0usize;
    let mut degrees_pool = Vec::with_capacity(set.len() * n);
    let mut max_trace_error = 0.0f64;
    let mut mst_invariants_hold = true;
    for m in &canonical {
        let s = eigen_spectrum(m, n_obs)?;
        max_trace_error = max_trace_error.max(s.trace_error());
        lambda1.push(s.lambda1());
        shares.push(s.lambda1_share);
        outliers.push(s.outlier_count as f64);
        edges_plus.push(s.bulk.lambda_plus);
        eigen_pool.extend_from_slice(&s.eigenvalues);
        let pf = perron_frobenius_check(m);
        pf_pass += pf.holds as usize;
        pf_degenerate += pf.degenerate as usize;
        match hierarchy_score(m) {
            Some(h) => hierarchy_scores.push(h),
            None => hierarchy_undefined += 1,
        }
        let tree = mst(m);
        mst_invariants_hold &= tree.edges.len() + 1 == n
            && tree.degrees.iter().sum::<usize>() == 2 * (n - 1);
        degrees_pool.extend_from_slice(&tree.degrees);
    }
    lambda1.sort_by(f64::total_cmp);
    hierarchy_scores.sort_by(f64::total_cmp);
    let max_degree = degrees_pool.iter().copied().max().unwrap_or(0);
    let mut degree_counts = vec![0u64; max_degree + 1];
    for &k in &degrees_pool {
        degree_counts[k] += 1;
    }
    Ok(SetFacts {
        count: set.len(),
        pairwise,
        mean_lambda1_share: mean(&shares),
        mean_outlier_count: mean(&outliers),
        mp_lambda_plus_mean: mean(&edges_plus),
        lambda1,
        eigen_histogram: Histogram::new(0.0, n as f64, 50, &eigen_pool),
        pf_pass_rate: pf_pass as f64 / set.len() as f64,
        pf_degenerate,
        hierarchy_scores,
        hierarchy_undefined,
        degree_fit: power_law_fit(&degrees_pool, &PowerLawOptions::default()),
        degree_counts,
        max_degree,
        max_trace_error,
        mst_invariants_hold,
    })
}

/// Chi-square homogeneity of two degree-count vectors. Adjacent degrees are
/// pooled until every bin expects at least 5 observations in both sets.
/// Returns `(statistic, degrees of freedom)`.
pub fn degree_chi_square(a: &[u64], b: &[u64]) -> (f64, usize) {
    let len = a.len().max(b.len());
    let get = |v: &[u64], k: usize| v.get(k).copied().unwrap_or(0) as f64;
    let (ta, tb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if ta == 0.0 || tb == 0.0 {
        return (0.0, 0);
    }
    let total = ta + tb;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut cur = (0.0, 0.0);
    for k in 0..len {
        cur.0 += get(a, k);
        cur.1 += get(b, k);
        let pooled = cur.0 + cur.1;
        if pooled * ta / total >= 5.0 && pooled * tb / total >= 5.0 {
            bins.push(cur);
            cur = (0.0, 0.0);
        }
    }
    if cur.0 + cur.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => bins.push(cur),
        }
    }
    let mut chi2 = 0.0;
    for &(oa, ob) in &bins {
        let pooled = oa + ob;
        let ea = pooled * ta / total;
        let eb = pooled * tb / total;
        if ea > 0.0 {
            chi2 += (oa - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            chi2 += (ob - eb).powi(2) / eb;
        }
    }
    (chi2, bins.len().saturating_sub(1))
}

/// How the sets' MST hubs compare: the hub level is the reference's 99th
/// percentile degree (at least 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCaveat {
    pub hub_degree: usize,
    pub reference_hub_fraction: f64,
    pub candidate_hub_fraction: f64,
    pub reference_max_degree: usize,
    pub candidate_max_degree: usize,
    pub candidate_underrepresents_hubs: bool,
}

fn tail_caveat(reference: &SetFacts, candidate: &SetFacts) -> TailCaveat {
    let total: u64 = reference.degree_counts.iter().sum();
    let mut hub_degree = reference.max_degree.max(3);
    let mut above = 0u64;
    for k in (0..reference.degree_counts.len()).rev() {
        above += reference.degree_counts[k];
        if above as f64 >= 0.01 * total as f64 {
            hub_degree = k.max(3);
            break;
        }
    }
    let frac = |counts: &[u64]| {
        let t: u64 = counts.iter().sum();
        let hubs: u64 = counts.iter().skip(hub_degree).sum();
        if t == 0 {
            0.0
        } else {
            hubs as f64 / t as f64
        }
    };
    let rf = frac(&reference.degree_counts);
    let cf = frac(&candidate.degree_counts);
    TailCaveat {
        hub_degree,
        reference_hub_fraction: rf,
        candidate_hub_fraction: cf,
        reference_max_degree: reference.max_degree,
        candidate_max_degree: candidate.max_degree,
        candidate_underrepresents_hubs: cf < rf
            || candidate.max_degree < reference.max_degree,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub mean_diff: f64,
    pub std_diff: f64,
    pub lambda1_ks: f64,
    pub pf_rate_diff: f64,
    pub hierarchy_ks: f64,
    pub degree_chi2: f64,
    pub degree_dof: usize,
    pub degree_chi2_per_obs: f64,
    pub tail: TailCaveat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    pub pairwise: bool,
    pub spectrum: bool,
    pub perron_frobenius: bool,
    pub hierarchy: bool,
    pub mst: bool,
}

impl Verdicts {
    /// Verdicts follow from the comparison statistics alone.
    pub fn evaluate(c: &Comparison, t: &Thresholds) -> Self {
        Verdicts {
            pairwise: c.mean_diff.abs() <= t.mean_diff_max && c.std_diff.abs() <= t.std_diff_max,
            spectrum: c.lambda1_ks <= t.lambda1_ks_max,
            perron_frobenius: c.pf_rate_diff.abs() <= t.pf_rate_diff_max,
            hierarchy: c.hierarchy_ks <= t.hierarchy_ks_max,
            mst: c.degree_chi2_per_obs <= t.degree_chi2_per_obs_max,
        }
    }

    pub fn all(&self) -> bool {
        self.pairwise && self.spectrum && self.perron_frobenius && self.hierarchy && self.mst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StylizedFactsReport {
    pub n: usize,
    pub n_obs: usize,
    pub thresholds: Thresholds,
    pub reference: SetFacts,
    pub candidate: SetFacts,
    pub comparison: Comparison,
    pub verdicts: Verdicts,
}

/// Computes every stylized fact on both sets and compares them.
pub fn stylized_report(
    reference: &[CorrelationMatrix],
    candidate: &[CorrelationMatrix],
    cfg: &ReportConfig,
) -> Result<StylizedFactsReport> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(CorrError::Structure("report needs two non-empty sets".into()));
    }
    let n = reference[0].n();
    if let Some(bad) = reference.iter().chain(candidate).find(|m| m.n() != n) {
        return Err(CorrError::Structure(format!(
            "dimension mismatch: {}x{} among {n}x{n} matrices",
            bad.n(),
            bad.n()
        )));
    }
    let r = set_facts(reference, cfg.n_obs)?;
    let c = set_facts(candidate, cfg.n_obs)?;
    let (degree_chi2, degree_dof) = degree_chi_square(&r.degree_counts, &c.degree_counts);
    let obs = (r.degree_counts.iter().sum::<u64>() + c.degree_counts.iter().sum::<u64>()) as f64;
    let comparison = Comparison {
        mean_diff: c.pairwise.mean - r.pairwise.mean,
        std_diff: c.pairwise.std - r.pairwise.std,
        lambda1_ks: ks_two_sample(&r.lambda1, &c.lambda1).statistic,
        pf_rate_diff: c.pf_pass_rate - r.pf_pass_rate,
        hierarchy_ks: ks_two_sample(&r.hierarchy_scores, &c.hierarchy_scores).statistic,
        degree_chi2,
        degree_dof,
        degree_chi2_per_obs: degree_chi2 / obs,
        tail: tail_caveat(&r, &c),
    };
    Ok(StylizedFactsReport {
        n,
        n_obs: cfg.n_obs,
        thresholds: cfg.thresholds,
        verdicts: Verdicts::evaluate(&comparison, &cfg.thresholds),
        reference: r,
        candidate: c,
        comparison,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn fit_text(f: &PowerLawFit) -> String {
    match (f.exponent, f.r_squared, f.fit_range) {
        (Some(a), Some(r2), Some((lo, hi))) => format!("{a:.6} (r2={r2:.4}, degrees {lo}..{hi})"),
        _ => "degenerate".to_string(),
    }
}

impl StylizedFactsReport {
    /// Line-oriented `key=value` text with one `[section]` per fact.
    pub fn to_text(&self) -> String {
        let (r, c, d, t) = (&self.reference, &self.candidate, &self.comparison, &self.thresholds);
        let mut s = String::new();
        let _ = writeln!(s, "n={}\nn_obs={}", self.n, self.n_obs);
        let _ = writeln!(s, "reference.count={}\ncandidate.count={}", r.count, c.count);
        let _ = writeln!(s, "all_pass={}", self.verdicts.all());

        let _ = writeln!(s, "\n[pairwise]");
        for (name, f) in [("reference", r), ("candidate", c)] {
            let _ = writeln!(s, "{name}.mean={:.6}\n{name}.std={:.6}", f.pairwise.mean, f.pairwise.std);
        }
        let _ = writeln!(s, "mean_diff={:.6}\nstd_diff={:.6}", d.mean_diff, d.std_diff);
        let _ = writeln!(s, "threshold.mean_diff_max={}\nthreshold.std_diff_max={}", t.mean_diff_max, t.std_diff_max);
        let _ = writeln!(s, "verdict={}", verdict(self.verdicts.pairwise));

        let _ = writeln!(s, "\n[spectrum]");
        for (name, f) in [("reference", r), ("candidate", c)] {
            let _ = writeln!(s, "{name}.lambda1_mean={:.6}", mean(&f.lambda1));
            let _ = writeln!(s, "{name}.lambda1_share_mean={:.6}", f.mean_lambda1_share);
            let _ = writeln!(s, "{name}.outliers_above_mp_mean={:.4}", f.mean_outlier_count);
            let _ = writeln!(s, "{name}.mp_lambda_plus_mean={:.6}", f.mp_lambda_plus_mean);
        }
        let _ = writeln!(s, "mp.bulk_variance=1 - lambda1/n");
        let _ = writeln!(s, "lambda1_ks={:.6}\nthreshold.lambda1_ks_max={}", d.lambda1_ks, t.lambda1_ks_max);
        let _ = writeln!(s, "verdict={}", verdict(self.verdicts.spectrum));

        let _ = writeln!(s, "\n[perron_frobenius]");
        for (name, f) in [("reference", r), ("candidate", c)] {
            let _ = writeln!(s, "{name}.pass_rate={:.6}\n{name}.degenerate={}", f.pf_pass_rate, f.pf_degenerate);
        }
        let _ = writeln!(s, "pass_rate_diff={:.6}\nthreshold.pf_rate_diff_max={}", d.pf_rate_diff, t.pf_rate_diff_max);
        let _ = writeln!(s, "verdict={}", verdict(self.verdicts.perron_frobenius));

        let _ = writeln!(s, "\n[hierarchy]");
        for (name, f) in [("reference", r), ("candidate", c)] {
            let _ = writeln!(s, "{name}.score_mean={:.6}\n{name}.undefined={}", mean(&f.hierarchy_scores), f.hierarchy_undefined);
        }
        let _ = writeln!(s, "score_ks={:.6}\nthreshold.hierarchy_ks_max={}", d.hierarchy_ks, t.hierarchy_ks_max);
        let _ = writeln!(s, "verdict={}", verdict(self.verdicts.hierarchy));

        let _ = writeln!(s, "\n[mst]");
        for (name, f) in [("reference", r), ("candidate", c)] {
            let counts: Vec<String> = f.degree_counts.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "{name}.degree_counts={}", counts.join(","));
            let _ = writeln!(s, "{name}.power_law_exponent={}", fit_text(&f.degree_fit));
            let _ = writeln!(s, "{name}.max_degree={}", f.max_degree);
            let _ = writeln!(s, "{name}.tree_invariants={}", f.mst_invariants_hold);
        }
        let _ = writeln!(s, "degree_chi2={:.6}\ndegree_dof={}\ndegree_chi2_per_obs={:.6}", d.degree_chi2, d.degree_dof, d.degree_chi2_per_obs);
        let _ = writeln!(s, "threshold.degree_chi2_per_obs_max={}", t.degree_chi2_per_obs_max);
        let tail = &d.tail;
        let _ = writeln!(
            s,
            "tail.hub_degree={}\ntail.reference_hub_fraction={:.6}\ntail.candidate_hub_fraction={:.6}",
            tail.hub_degree, tail.reference_hub_fraction, tail.candidate_hub_fraction
        );
        let _ = writeln!(s, "tail_caveat={}", if tail.candidate_underrepresents_hubs {
            "candidate under-represents high-degree hubs"
        } else {
            "none"
        });
        let _ = writeln!(s, "verdict={}", verdict(self.verdicts.mst));

        let _ = writeln!(s, "\n[conservation]");
        let _ = writeln!(s, "reference.max_trace_error={:e}\ncandidate.max_trace_error={:e}", r.max_trace_error, c.max_trace_error);
        s
    }

    /// Writes `pairwise_hist.csv`, `eigen_hist.csv` and `degree_hist.csv`
    /// for external plotting.
    pub fn write_histograms(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CorrError::io(dir, e))?;
        let hist_csv = |a: &Histogram, b: &Histogram| {
            let (da, db) = (a.density(), b.density());
            let mut s = String::from("bin_lo,bin_hi,reference_density,candidate_density\n");
            for k in 0..a.counts.len() {
                let (lo, hi) = a.bin_edges(k);
                let _ = writeln!(s, "{lo},{hi},{},{}", da[k], db[k]);
            }
            s
        };
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| CorrError::io(&p, e))
        };
        write(
            "pairwise_hist.csv",
            hist_csv(&self.reference.pairwise.histogram, &self.candidate.pairwise.histogram),
        )?;
        write(
            "eigen_hist.csv",
            hist_csv(&self.reference.eigen_histogram, &self.candidate.eigen_histogram),
        )?;
        let len = self.reference.degree_counts.len().max(self.candidate.degree_counts.len());
        let mut s = String::from("degree,reference_count,candidate_count\n");
        for k in 1..len {
            let g = |v: &[u64]| v.get(k).copied().unwrap_or(0);
            let _ = writeln!(s, "{k},{},{}", g(&self.reference.degree_counts), g(&self.candidate.degree_counts));
        }
        write("degree_hist.csv", s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_factor_market, FactorMarketParams};
    use crate::matrix::Permutation;
    use crate::returns::estimate_correlation;
    use crate::rng;
    use crate::sampling::{sample_onion, SamplerConfig};
    use rand::seq::SliceRandom;

    fn factor_set(count: u64) -> Vec<CorrelationMatrix> {
        (0..count)
            .map(|seed| {
                estimate_correlation(
                    &synth_factor_market(&FactorMarketParams { seed, ..Default::default() }).unwrap(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn reference_against_itself_passes() {
        let set = factor_set(30);
        let rep = stylized_report(&set, &set, &ReportConfig::default()).unwrap();
        assert!(rep.verdicts.all());
        let c = rep.comparison;
        assert_eq!(
            (c.mean_diff, c.std_diff, c.lambda1_ks, c.pf_rate_diff, c.hierarchy_ks, c.degree_chi2),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert!(rep.reference.max_trace_error < 1e-8);
        assert!(rep.reference.mst_invariants_hold);
    }

    #[test]
    fn uniform_elliptope_fails_pairwise() {
        let set = factor_set(30);
        let onion = sample_onion(&SamplerConfig { n: 20, count: 30, seed: 1 }).unwrap();
        let rep = stylized_report(&set, &onion, &ReportConfig::default()).unwrap();
        assert!(!rep.verdicts.pairwise);
        assert!(rep.comparison.mean_diff < -0.2);
    }

    #[test]
    fn report_is_permutation_invariant() {
        let set = factor_set(10);
        let mut r = rng::seeded(3, 0);
        let shuffled: Vec<CorrelationMatrix> = set
            .iter()
            .map(|m| {
                let mut p: Vec<usize> = (0..m.n()).collect();
                p.shuffle(&mut r);
                m.permute(&Permutation::new(p).unwrap()).unwrap()
            })
            .collect();
        let cfg = ReportConfig::default();
        let a = stylized_report(&set, &set, &cfg).unwrap();
        let b = stylized_report(&shuffled, &shuffled, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn verdicts_recompute_from_stats() {
        let set = factor_set(10);
        let other = factor_set(20)[10..].to_vec();
        let rep = stylized_report(&set, &other, &ReportConfig::default()).unwrap();
        assert_eq!(Verdicts::evaluate(&rep.comparison, &rep.thresholds), rep.verdicts);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = vec![CorrelationMatrix::identity(3)];
        let b = vec![CorrelationMatrix::identity(4)];
        assert!(stylized_report(&a, &b, &ReportConfig::default()).is_err());
        assert!(stylized_report(&a, &[], &ReportConfig::default()).is_err());
    }

    #[test]
    fn chi_square_pools_sparse_bins() {
        let (chi2, dof) = degree_chi_square(&[0, 50, 30, 15, 4, 1], &[0, 50, 30, 15, 4, 1]);
        assert_eq!(chi2, 0.0);
        assert_eq!(dof, 3);
        let (chi2, _) = degree_chi_square(&[0, 80, 20], &[0, 20, 80]);
        assert!(chi2 > 50.0);
    }

    #[test]
    fn text_has_every_section() {
        let set = factor_set(5);
        let text = stylized_report(&set, &set, &ReportConfig::default()).unwrap().to_text();
        for section in ["[pairwise]", "[spectrum]", "[perron_frobenius]", "[hierarchy]", "[mst]", "[conservation]"] {
            assert!(text.contains(section), "{section}");
        }
        let dir = tempfile::tempdir().unwrap();
        stylized_report(&set, &set, &ReportConfig::default())
            .unwrap()
            .write_histograms(dir.path())
            .unwrap();
        assert!(dir.path().join("degree_hist.csv").exists());
    }
}
