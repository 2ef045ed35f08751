//! Return panels from CSV, windowing, random sub-universes, a synthetic
//! factor market, and canonicalised training datasets.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::canonical::canonicalize;
use crate::error::{CorrError, Result};
use crate::io;
use crate::matrix::CorrelationMatrix;
use crate::returns::{estimate_correlation, ReturnKind, ReturnsPanel};
use crate::rng::{self, CorrRng};

/// Default estimation window: one trading year.
pub const TRADING_YEAR: usize = 252;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    /// Rows discarded because at least one value was missing.
    pub drop_count: usize,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty()
        || f.eq_ignore_ascii_case("nan")
        || f.eq_ignore_ascii_case("na")
        || f.eq_ignore_ascii_case("null")
}

/// Reads a wide CSV: header `date,<ticker1>,…,<tickerN>`, then one row per
/// ISO date. Rows with any missing value are dropped, not the ticker.
pub fn load_returns_csv(path: &Path, kind: ReturnKind) -> Result<(ReturnsPanel, LoadReport)> {
    let parse_err = |msg: String| CorrError::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if header.len() < 3 || !header[0].eq_ignore_ascii_case("date") {
        return Err(parse_err(
            "header must be `date,<ticker1>,...` with at least two tickers".into(),
        ));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() {
            return Err(parse_err("empty ticker name in header".into()));
        }
        if !seen.insert(t.as_str()) {
            return Err(parse_err(format!("duplicate ticker {t}")));
        }
    }
    let n = tickers.len();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut report = LoadReport {
        rows_read: 0,
        drop_count: 0,
    };
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        if record.len() != n + 1 {
            return Err(parse_err(format!(
                "line {line}: {} fields, expected {}",
                record.len(),
                n + 1
            )));
        }
        report.rows_read += 1;
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("line {line}: bad date {:?}: {e}", &record[0])))?;
        if record.iter().skip(1).any(is_missing) {
            report.drop_count += 1;
            continue;
        }
        let mut row = Vec::with_capacity(n);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|e| parse_err(format!("line {line}: bad number {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("line {line}: non-finite value {field:?}")));
            }
            row.push(v);
        }
        dates.push(date);
        values.extend(row);
    }
    if dates.len() < 2 {
        return Err(parse_err(format!(
            "{} usable rows, need at least 2",
            dates.len()
        )));
    }
    let returns = DMatrix::from_row_slice(dates.len(), n, &values);
    Ok((ReturnsPanel::new(tickers, dates, returns, kind)?, report))
}

/// Windows of exactly `window` consecutive rows starting at `0, stride, …`.
pub fn rolling_windows(p: &ReturnsPanel, window: usize, stride: usize) -> Result<Vec<ReturnsPanel>> {
    window_starts(p.n_days(), window, stride)?
        .into_iter()
        .map(|s| p.rows(s, window))
        .collect()
}

fn window_starts(t: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 {
        return Err(CorrError::Config("stride must be >= 1".into()));
    }
    if window < 2 {
        return Err(CorrError::Config("window must be >= 2".into()));
    }
    if window > t {
        return Err(CorrError::Config(format!(
            "window of {window} rows exceeds the {t} available"
        )));
    }
    Ok((0..=t - window).step_by(stride).collect())
}

/// `k` distinct tickers chosen uniformly without replacement, in draw order.
pub fn random_subuniverse(p: &ReturnsPanel, k: usize, seed: u64) -> Result<ReturnsPanel> {
    let mut rng = rng::seeded(seed, rng::stream::DATASET);
    subuniverse_with(p, k, &mut rng)
}

fn subuniverse_with(p: &ReturnsPanel, k: usize, rng: &mut CorrRng) -> Result<ReturnsPanel> {
    let n = p.n_assets();
    if k < 2 || k > n {
        return Err(CorrError::Config(format!(
            "sub-universe size {k} outside [2, {n}]"
        )));
    }
    let cols = index::sample(rng, n, k).into_vec();
    p.select_columns(&cols)
}

/// Parameters of the synthetic market
/// `r_it = beta_i m_t + sector_loading * s_{sector(i), t} + e_it`
/// with `m ~ N(0, market_vol²)`, `s ~ N(0, 1)`, `e ~ N(0, idio_vol²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorMarketParams {
    pub n_assets: usize,
    pub n_days: usize,
    pub n_sectors: usize,
    pub market_vol: f64,
    /// Betas are drawn uniformly from `[low, high]`.
    pub market_beta_range: (f64, f64),
    pub sector_loading: f64,
    pub idio_vol: f64,
    pub seed: u64,
}

impl Default for FactorMarketParams {
    /// 20 assets over one trading year in 4 sectors. `market_vol` and
    /// `sector_loading` were chosen by sweeping both (see the ingest tests)
    /// so the mean pairwise correlation is about 0.36 with a spread of
    /// about 0.13.
    fn default() -> Self {
        FactorMarketParams {
            n_assets: 20,
            n_days: TRADING_YEAR,
            n_sectors: 4,
            market_vol: 0.013,
            market_beta_range: (0.5, 1.5),
            sector_loading: 0.010,
            idio_vol: 0.015,
            seed: 0,
        }
    }
}

impl FactorMarketParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorrError::Config(m));
        if self.n_assets < 2 || self.n_days < 2 {
            return bad("need at least 2 assets and 2 days".into());
        }
        if self.n_sectors == 0 || self.n_sectors > self.n_assets {
            return bad(format!("n_sectors must be in [1, {}]", self.n_assets));
        }
        if !(self.market_vol > 0.0 && self.idio_vol > 0.0) {
            return bad("market_vol and idio_vol must be > 0".into());
        }
        if !(self.sector_loading >= 0.0) {
            return bad("sector_loading must be >= 0".into());
        }
        let (lo, hi) = self.market_beta_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("beta range [{lo}, {hi}] must satisfy low <= high"));
        }
        Ok(())
    }
}

fn business_days(count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Simulates a return panel from the factor model. Asset `i` belongs to
/// sector `i mod n_sectors`.
pub fn synth_factor_market(params: &FactorMarketParams) -> Result<ReturnsPanel> {
    params.validate()?;
    let FactorMarketParams {
        n_assets: n,
        n_days: t,
        n_sectors,
        ..
    } = *params;
    let mut rng = rng::seeded(params.seed, rng::stream::MARKET);
    let (lo, hi) = params.market_beta_range;
    let betas: Vec<f64> = (0..n)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect();
    let market = Normal::new(0.0, params.market_vol)
        .map_err(|e| CorrError::Config(e.to_string()))?;
    let idio = Normal::new(0.0, params.idio_vol).map_err(|e| CorrError::Config(e.to_string()))?;
    let mut returns = DMatrix::zeros(t, n);
    for day in 0..t {
        let m = market.sample(&mut rng);
        let sectors: Vec<f64> = (0..n_sectors)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for i in 0..n {
            returns[(day, i)] = betas[i] * m
                + params.sector_loading * sectors[i % n_sectors]
                + idio.sample(&mut rng);
        }
    }
    let tickers = (0..n).map(|i| format!("S{i:04}")).collect();
    ReturnsPanel::new(tickers, business_days(t), returns, ReturnKind::Simple)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Real,
    Synthetic,
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataSource::Real => "real",
            DataSource::Synthetic => "synthetic",
        })
    }
}

impl FromStr for DataSource {
    type Err = CorrError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(DataSource::Real),
            "synthetic" => Ok(DataSource::Synthetic),
            other => Err(CorrError::Config(format!("unknown data source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSpec {
    pub window: usize,
    pub stride: usize,
    pub universe_size: usize,
    pub target_count: usize,
    pub seed: u64,
}

/// Describes a dataset directory. Serialised as `key=value` lines followed
/// by one `file=` line per matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub source: DataSource,
    pub window_days: usize,
    pub stride: usize,
    pub universe_size: usize,
    pub matrix_count: usize,
    pub canonicalized: bool,
    pub seed: u64,
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest";

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "source={}\nwindow_days={}\nstride={}\nuniverse_size={}\nmatrix_count={}\ncanonicalized={}\nseed={}\n",
            self.source,
            self.window_days,
            self.stride,
            self.universe_size,
            self.matrix_count,
            self.canonicalized,
            self.seed
        );
        for f in &self.files {
            s.push_str("file=");
            s.push_str(f);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |msg: String| CorrError::Parse {
            path: origin.to_path_buf(),
            msg,
        };
        let mut fields = std::collections::HashMap::new();
        let mut files = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("not a key=value line: {line:?}")))?;
            if k == "file" {
                files.push(v.to_string());
            } else {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| err(format!("missing key {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|e| err(format!("{k}: {e}")))
        };
        let manifest = DatasetManifest {
            source: get("source")?.parse()?,
            window_days: num("window_days")?,
            stride: num("stride")?,
            universe_size: num("universe_size")?,
            matrix_count: num("matrix_count")?,
            canonicalized: get("canonicalized")?
                .parse()
                .map_err(|e| err(format!("canonicalized: {e}")))?,
            seed: get("seed")?.parse().map_err(|e| err(format!("seed: {e}")))?,
            files,
        };
        if manifest.matrix_count != manifest.files.len() {
            return Err(err(format!(
                "matrix_count {} but {} files listed",
                manifest.matrix_count,
                manifest.files.len()
            )));
        }
        Ok(manifest)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CorrError::io(&path, e))?;
        Self::parse(&text, &path)
    }
}

fn binomial_saturating(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Estimates `spec.target_count` canonicalised correlation matrices, each
/// from a randomly chosen window and random sub-universe of `p`.
///
/// Matrix `i` draws from its own random stream, so the output does not
/// depend on how the work is scheduled.
pub fn build_matrices(p: &ReturnsPanel, spec: &DatasetSpec) -> Result<Vec<CorrelationMatrix>> {
    let starts = window_starts(p.n_days(), spec.window, spec.stride)?;
    if spec.universe_size < 2 || spec.universe_size > p.n_assets() {
        return Err(CorrError::Config(format!(
            "universe size {} outside [2, {}]",
            spec.universe_size,
            p.n_assets()
        )));
    }
    let combos = starts
        .len()
        .saturating_mul(binomial_saturating(p.n_assets(), spec.universe_size));
    if spec.target_count == 0 || spec.target_count > combos {
        return Err(CorrError::Config(format!(
            "target of {} matrices infeasible: {} windows x C({}, {}) = {combos} distinct draws",
            spec.target_count,
            starts.len(),
            p.n_assets(),
            spec.universe_size
        )));
    }
    (0..spec.target_count)
        .map(|i| {
            let mut rng = rng::chunked(spec.seed, rng::stream::DATASET, i as u64);
            let start = starts[rng.random_range(0..starts.len())];
            let window = p.rows(start, spec.window)?;
            let sub = subuniverse_with(&window, spec.universe_size, &mut rng)?;
            Ok(canonicalize(&estimate_correlation(&sub)?))
        })
        .collect()
}

/// File name of the `i`-th dataset matrix.
pub fn matrix_file_name(i: usize) -> String {
    format!("matrix_{i:06}.csv")
}

/// Writes matrices as corrmat-csv files plus a manifest into `dir`.
pub fn write_dataset(
    dir: &Path,
    matrices: &[CorrelationMatrix],
    source: DataSource,
    spec: &DatasetSpec,
) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| CorrError::io(dir, e))?;
    let mut files = Vec::with_capacity(matrices.len());
    for (i, m) in matrices.iter().enumerate() {
        let name = matrix_file_name(i);
        io::write_matrix(&dir.join(&name), m.values())?;
        files.push(name);
    }
    let manifest = DatasetManifest {
        source,
        window_days: spec.window,
        stride: spec.stride,
        universe_size: spec.universe_size,
        matrix_count: matrices.len(),
        canonicalized: true,
        seed: spec.seed,
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_text()).map_err(|e| CorrError::io(&path, e))?;
    Ok(manifest)
}

/// [`build_matrices`] followed by [`write_dataset`].
pub fn build_dataset(
    p: &ReturnsPanel,
    spec: &DatasetSpec,
    source: DataSource,
    dir: &Path,
) -> Result<DatasetManifest> {
    let matrices = build_matrices(p, spec)?;
    write_dataset(dir, &matrices, source, spec)
}
