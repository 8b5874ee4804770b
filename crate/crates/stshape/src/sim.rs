//! Scenario configuration, deterministic sweep orchestration, and
//! machine-readable output.
//!
//! A scenario is a flat `key=value` text file with dotted keys (documented
//! in the repository README). A sweep runs `trials` independent channel and
//! interferer draws, holds each trial's draws fixed across the whole axis,
//! shapes every configured variant at every axis point, and records one
//! result row per (axis point, variant, trial). Output is fully determined
//! by (config, sweep, seed).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{linear_to_db, ChannelMatrix, Chip, CodeVector, LinkConfig, ModulationOrder,
    BeamWeights, OccupancyMatrix, PulseMeta};
use crate::occupancy::{auto_loading, default_snapshot_count, estimate_occupancy,
    occupancy_snapshot, true_occupancy_with_dim, InterfererKind, InterfererSpec, SnapshotBatch};
use crate::rng::{chacha, derive_seed};
use crate::shaper::{shape, EnergyPolicy, ShapingResult, ShapingVariant, VariantTag};

use nalgebra::DVector;
use num_complex::Complex64;

/// Exact CSV header emitted by [`emit_csv`].
pub const CSV_HEADER: &str = "axis,variant,trial,sinr_db,et_opt,transmitting,gamma_max_db,metric";

// ---------------------------------------------------------------------------
// Configuration types
// ---------------------------------------------------------------------------

/// Diagonal-loading policy for estimated occupancy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loading {
    /// `1e-6 · trace(Ô)/(N·L)` derived from the batch itself.
    Auto,
    Fixed(f64),
}

/// Whether a sweep senses the band analytically or from finite snapshots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OccupancyMode {
    Analytic,
    Estimated { snapshots: usize, loading: Loading },
}

/// Interferer template; channels/weights/codes are drawn per trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfererTemplate {
    pub kind: InterfererKind,
    pub e_i_db: f64,
    pub m_i: usize,
}

/// Where the fixed code of the code-fixed variants comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum FixedCodeSpec {
    /// The documented deterministic default (all `+1/√L`).
    Default,
    /// A random quaternary code drawn from the trial seed and held constant
    /// across the whole sweep axis.
    PerTrial,
    Explicit(CodeVector),
}

/// Where the fixed weights of the weight-fixed variants come from.
#[derive(Clone, Debug, PartialEq)]
pub enum FixedWeightsSpec {
    /// The documented deterministic default (all-ones).
    Default,
    /// A random complex direction drawn from the trial seed, scaled onto
    /// the norm constraint and held constant across the whole sweep axis.
    PerTrial,
    Explicit(BeamWeights),
}

/// Full scenario description.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub link: LinkConfig,
    pub sigma2: f64,
    pub interferers: Vec<InterfererTemplate>,
    pub occupancy_mode: OccupancyMode,
    pub policy: EnergyPolicy,
    pub variants: Vec<VariantTag>,
    pub fixed_code: FixedCodeSpec,
    pub fixed_weights: FixedWeightsSpec,
    pub trials: u64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "at least one variant is required"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::config("noise.sigma2", "must be positive"));
        }
        for (i, t) in self.interferers.iter().enumerate() {
            if t.m_i == 0 || t.m_i > self.link.n_rx {
                return Err(Error::config(
                    format!("interferer.{}.m_i", i + 1),
                    format!("must be in 1..={}", self.link.n_rx),
                ));
            }
            if !t.e_i_db.is_finite() {
                return Err(Error::config(
                    format!("interferer.{}.e_i_db", i + 1),
                    "must be finite",
                ));
            }
        }
        if let FixedCodeSpec::Explicit(code) = &self.fixed_code {
            if code.len() != self.link.code_len {
                return Err(Error::config(
                    "fixed.code",
                    format!("length {} does not match link.code_len {}", code.len(),
                        self.link.code_len),
                ));
            }
        }
        if let FixedWeightsSpec::Explicit(w) = &self.fixed_weights {
            if w.m_tx() != self.link.m_tx {
                return Err(Error::config(
                    "fixed.weights",
                    format!("length {} does not match link.m_tx {}", w.m_tx(), self.link.m_tx),
                ));
            }
        }
        if let OccupancyMode::Estimated { snapshots, loading } = self.occupancy_mode {
            if snapshots == 0 {
                return Err(Error::config("occupancy.snapshots", "must be at least 1"));
            }
            if let Loading::Fixed(v) = loading {
                if !(v >= 0.0) {
                    return Err(Error::config("occupancy.loading", "must be non-negative"));
                }
            }
        }
        Ok(())
    }
}

/// Swept axis of a figure-style experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    EtMax,
    EiDb,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::EtMax => "et_max",
            SweepAxis::EiDb => "e_i_db",
        }
    }
}

/// Ordered axis points for a sweep.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("sweep.values", "must be nonempty"));
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::config(
                    "sweep.values",
                    "must be strictly increasing",
                ));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", "must be finite"));
        }
        if axis == SweepAxis::EtMax && values[0] <= 0.0 {
            return Err(Error::config("sweep.values", "et_max values must be positive"));
        }
        Ok(SweepSpec { axis, values })
    }
}

/// One (axis point, variant, trial) outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub axis_value: f64,
    pub variant: VariantTag,
    pub trial: u64,
    /// Attained SINR in dB; `None` when the transceiver refrains.
    pub sinr_db: Option<f64>,
    pub e_t_opt: f64,
    pub transmitting: bool,
    pub gamma_max_achieved_db: f64,
    pub metric: f64,
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// Channel draw for one trial, keyed by (seed, "trial", index) then
/// ("channel", attempt); rank-deficient draws are re-attempted.
pub fn trial_channel(cfg: &ScenarioConfig, trial: u64) -> Result<ChannelMatrix> {
    let tseed = derive_seed(cfg.seed, "trial", trial);
    let mut last_err = None;
    for attempt in 0..16 {
        let mut rng = chacha(derive_seed(tseed, "channel", attempt));
        match ChannelMatrix::draw(cfg.link.m_tx, cfg.link.n_rx, &mut rng) {
            Ok(h) => return Ok(h),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Interferer draws for one trial.
pub fn trial_interferers(cfg: &ScenarioConfig, trial: u64) -> Result<Vec<InterfererSpec>> {
    let tseed = derive_seed(cfg.seed, "trial", trial);
    cfg.interferers
        .iter()
        .enumerate()
        .map(|(i, t)| {
            InterfererSpec::draw(
                t.kind,
                t.e_i_db,
                t.m_i,
                cfg.link.n_rx,
                cfg.link.code_len,
                derive_seed(tseed, "interferer", i as u64),
            )
        })
        .collect()
}

/// Builds the occupancy matrix for one (trial, axis point), either the
/// analytic autocorrelation or a seeded finite-snapshot estimate.
pub fn build_occupancy(
    cfg: &ScenarioConfig,
    specs: &[InterfererSpec],
    trial: u64,
    axis_index: usize,
) -> Result<OccupancyMatrix> {
    let dim = cfg.link.dim();
    match cfg.occupancy_mode {
        OccupancyMode::Analytic => true_occupancy_with_dim(specs, dim, cfg.sigma2),
        OccupancyMode::Estimated { snapshots, loading } => {
            let tseed = derive_seed(cfg.seed, "trial", trial);
            let mut rng = chacha(derive_seed(tseed, "sense", axis_index as u64));
            let snaps: Result<Vec<DVector<Complex64>>> = (0..snapshots)
                .map(|_| {
                    occupancy_snapshot(specs, cfg.link.n_rx, cfg.link.code_len, cfg.sigma2,
                        &mut rng)
                })
                .collect();
            let batch = SnapshotBatch::new(snaps?)?;
            let loading = match loading {
                Loading::Auto => auto_loading(&batch),
                Loading::Fixed(v) => v,
            };
            estimate_occupancy(&batch, loading)
        }
    }
}

/// Resolves the scenario's fixed components for one trial; per-trial draws
/// are keyed by the trial seed and shared across the whole axis.
pub fn trial_fixed_components(
    cfg: &ScenarioConfig,
    trial: u64,
) -> Result<(Option<CodeVector>, Option<BeamWeights>)> {
    let tseed = derive_seed(cfg.seed, "trial", trial);
    let code = match &cfg.fixed_code {
        FixedCodeSpec::Default => None,
        FixedCodeSpec::Explicit(c) => Some(c.clone()),
        FixedCodeSpec::PerTrial => Some(CodeVector::random(
            cfg.link.code_len,
            &mut chacha(derive_seed(tseed, "fixed-code", 0)),
        )?),
    };
    let weights = match &cfg.fixed_weights {
        FixedWeightsSpec::Default => None,
        FixedWeightsSpec::Explicit(w) => Some(w.clone()),
        FixedWeightsSpec::PerTrial => {
            let mut rng = chacha(derive_seed(tseed, "fixed-weights", 0));
            let raw = DVector::from_fn(cfg.link.m_tx, |_, _| {
                crate::rng::complex_normal(&mut rng, 1.0)
            });
            Some(BeamWeights::from_unnormalized(&raw)?)
        }
    };
    Ok((code, weights))
}

fn shape_variants_at(
    cfg: &ScenarioConfig,
    h: &ChannelMatrix,
    o: &OccupancyMatrix,
    link: &LinkConfig,
    fixed: &(Option<CodeVector>, Option<BeamWeights>),
    axis_value: f64,
    trial: u64,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::with_capacity(cfg.variants.len());
    for &tag in &cfg.variants {
        let variant = ShapingVariant::with_defaults(
            tag,
            fixed.0.clone(),
            fixed.1.clone(),
            link.code_len,
            link.m_tx,
        )?;
        let res = shape(&variant, h, o, link, cfg.policy)?;
        rows.push(result_row(axis_value, tag, trial, &res));
    }
    Ok(rows)
}

fn result_row(axis_value: f64, variant: VariantTag, trial: u64, res: &ShapingResult) -> ResultRow {
    ResultRow {
        axis_value,
        variant,
        trial,
        sinr_db: if res.transmitting && res.sinr_at_cap > 0.0 {
            Some(linear_to_db(res.sinr_at_cap))
        } else {
            None
        },
        e_t_opt: res.e_t_opt,
        transmitting: res.transmitting,
        gamma_max_achieved_db: linear_to_db(res.gamma_max_achieved),
        metric: res.metric,
    }
}

fn run_trial(cfg: &ScenarioConfig, sweep: &SweepSpec, trial: u64) -> Result<Vec<ResultRow>> {
    let h = trial_channel(cfg, trial)?;
    let base_specs = trial_interferers(cfg, trial)?;
    let fixed = trial_fixed_components(cfg, trial)?;
    let mut rows = Vec::with_capacity(sweep.values.len() * cfg.variants.len());
    for (axis_index, &axis_value) in sweep.values.iter().enumerate() {
        let (link, specs) = match sweep.axis {
            SweepAxis::EtMax => (cfg.link.with_et_max(axis_value)?, base_specs.clone()),
            SweepAxis::EiDb => (
                cfg.link.clone(),
                base_specs.iter().map(|s| s.with_e_i_db(axis_value)).collect(),
            ),
        };
        let o = build_occupancy(cfg, &specs, trial, axis_index)?;
        rows.extend(shape_variants_at(cfg, &h, &o, &link, &fixed, axis_value, trial)?);
    }
    Ok(rows)
}

/// Runs the full sweep grid. Each trial's channel and interferer draws are
/// held fixed across the whole axis; trials execute in parallel and rows
/// merge in deterministic trial order.
pub fn run_sweep(cfg: &ScenarioConfig, sweep: &SweepSpec) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let per_trial: Result<Vec<Vec<ResultRow>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, sweep, t))
        .collect();
    Ok(per_trial?.into_iter().flatten().collect())
}

/// Shapes every configured variant on a single trial's scenario (no sweep);
/// the single-shot entry point behind the CLI `shape` subcommand.
pub fn shape_scenario(
    cfg: &ScenarioConfig,
    trial: u64,
) -> Result<Vec<(VariantTag, ShapingResult)>> {
    cfg.validate()?;
    let h = trial_channel(cfg, trial)?;
    let specs = trial_interferers(cfg, trial)?;
    let fixed = trial_fixed_components(cfg, trial)?;
    let o = build_occupancy(cfg, &specs, trial, 0)?;
    let mut out = Vec::with_capacity(cfg.variants.len());
    for &tag in &cfg.variants {
        let variant = ShapingVariant::with_defaults(
            tag,
            fixed.0.clone(),
            fixed.1.clone(),
            cfg.link.code_len,
            cfg.link.m_tx,
        )?;
        out.push((tag, shape(&variant, &h, &o, &cfg.link, cfg.policy)?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV and plot data
// ---------------------------------------------------------------------------

/// Formats with 6 significant digits, plain notation for moderate
/// magnitudes and scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:e}", x.abs());
    let exp: i32 = sci.split('e').nth(1).expect("scientific form").parse().expect("exponent");
    if !(-5..15).contains(&exp) {
        format!("{x:.5e}")
    } else {
        let prec = (5 - exp).max(0) as usize;
        format!("{x:.prec$}")
    }
}

fn csv_line(row: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        format_sig(row.axis_value),
        row.variant.label(),
        row.trial,
        row.sinr_db.map(format_sig).unwrap_or_default(),
        format_sig(row.e_t_opt),
        row.transmitting,
        format_sig(row.gamma_max_achieved_db),
        format_sig(row.metric),
    )
}

fn sorted_rows(rows: &[ResultRow]) -> Vec<&ResultRow> {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.axis_value
            .total_cmp(&b.axis_value)
            .then(a.variant.cmp(&b.variant))
            .then(a.trial.cmp(&b.trial))
    });
    sorted
}

/// Writes the UTF-8 CSV, rows sorted by (axis, variant, trial).
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Contract("no rows to emit".to_string()));
    }
    let mut out = String::with_capacity(rows.len() * 64 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in sorted_rows(rows) {
        out.push_str(&csv_line(row));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes per-variant two-column `axis value` text files next to `out`;
/// the value column is the mean attained SINR (dB) for `et_max` sweeps and
/// the mean selected energy for `e_i_db` sweeps. Returns the paths written.
pub fn emit_plotdata(rows: &[ResultRow], axis: SweepAxis, out: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Contract("no rows to emit".to_string()));
    }
    let summary = summarize(rows, f64::NAN);
    let stem = out.with_extension("");
    let mut written = Vec::new();
    for &tag in &VariantTag::ALL {
        let mut body = String::new();
        for agg in summary.rows.iter().filter(|r| r.variant == tag) {
            let y = match axis {
                SweepAxis::EtMax => agg.mean_sinr_db,
                SweepAxis::EiDb => Some(agg.mean_e_t),
            };
            if let Some(y) = y {
                body.push_str(&format!("{} {}\n", format_sig(agg.axis_value), format_sig(y)));
            }
        }
        if body.is_empty() {
            continue;
        }
        let path = PathBuf::from(format!("{}_{}.dat", stem.display(), tag.label()));
        fs::write(&path, body).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Per-(axis point, variant) aggregate; SINR statistics are over
/// transmitting rows only.
#[derive(Clone, Debug)]
pub struct AggregateRow {
    pub axis_value: f64,
    pub variant: VariantTag,
    pub mean_sinr_db: Option<f64>,
    pub std_sinr_db: Option<f64>,
    pub mean_e_t: f64,
    pub std_e_t: f64,
    pub transmit_fraction: f64,
}

/// Aggregates plus the per-variant threshold crossings.
#[derive(Clone, Debug)]
pub struct SummaryTable {
    pub rows: Vec<AggregateRow>,
    /// Smallest axis value whose mean SINR reaches `γ_dB − 0.05`, per
    /// variant.
    pub crossings: Vec<(VariantTag, Option<f64>)>,
}

impl SummaryTable {
    pub fn crossing(&self, tag: VariantTag) -> Option<f64> {
        self.crossings
            .iter()
            .find(|(t, _)| *t == tag)
            .and_then(|(_, v)| *v)
    }

    /// Mean SINR difference `a − b` (dB) at a swept axis value.
    pub fn gain_at(&self, axis_value: f64, a: VariantTag, b: VariantTag) -> Option<f64> {
        let find = |tag| {
            self.rows
                .iter()
                .find(|r| r.variant == tag && (r.axis_value - axis_value).abs() < 1e-9)
                .and_then(|r| r.mean_sinr_db)
        };
        Some(find(a)? - find(b)?)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates rows per (axis point, variant) and locates threshold
/// crossings against `gamma_db`.
pub fn summarize(rows: &[ResultRow], gamma_db: f64) -> SummaryTable {
    let mut grid: BTreeMap<(u64, VariantTag), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        grid.entry((row.axis_value.to_bits(), row.variant))
            .or_default()
            .push(row);
    }
    let mut agg = Vec::with_capacity(grid.len());
    for ((axis_bits, variant), bucket) in &grid {
        let axis_value = f64::from_bits(*axis_bits);
        let sinrs: Vec<f64> = bucket.iter().filter_map(|r| r.sinr_db).collect();
        let energies: Vec<f64> = bucket.iter().map(|r| r.e_t_opt).collect();
        let (mean_e_t, std_e_t) = mean_std(&energies);
        let (mean_sinr_db, std_sinr_db) = if sinrs.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&sinrs);
            (Some(m), Some(s))
        };
        agg.push(AggregateRow {
            axis_value,
            variant: *variant,
            mean_sinr_db,
            std_sinr_db,
            mean_e_t,
            std_e_t,
            transmit_fraction: bucket.iter().filter(|r| r.transmitting).count() as f64
                / bucket.len() as f64,
        });
    }
    // bit-pattern grouping keys misorder negative axis values; re-sort
    agg.sort_by(|a, b| {
        a.axis_value
            .total_cmp(&b.axis_value)
            .then(a.variant.cmp(&b.variant))
    });
    let mut crossings = Vec::new();
    for &tag in &VariantTag::ALL {
        let cross = agg
            .iter()
            .filter(|r| r.variant == tag)
            .find(|r| r.mean_sinr_db.is_some_and(|m| m >= gamma_db - 0.05))
            .map(|r| r.axis_value);
        crossings.push((tag, cross));
    }
    SummaryTable {
        rows: agg,
        crossings,
    }
}

// ---------------------------------------------------------------------------
// Config file parsing
// ---------------------------------------------------------------------------

fn parse_complex(field: &str, tok: &str) -> Result<Complex64> {
    let s = tok.trim();
    if s.is_empty() {
        return Err(Error::config(field, "empty complex literal"));
    }
    let has_imag = s.ends_with('i') || s.ends_with('j');
    if !has_imag {
        let re: f64 = s
            .parse()
            .map_err(|_| Error::config(field, format!("invalid number `{s}`")))?;
        return Ok(Complex64::new(re, 0.0));
    }
    let body = &s[..s.len() - 1];
    // split at the last +/- that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k] as char;
        if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
            split = Some(k);
            break;
        }
    }
    let (re_str, im_str) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let re: f64 = re_str
        .parse()
        .map_err(|_| Error::config(field, format!("invalid real part in `{s}`")))?;
    let im: f64 = match im_str {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other
            .parse()
            .map_err(|_| Error::config(field, format!("invalid imaginary part in `{s}`")))?,
    };
    Ok(Complex64::new(re, im))
}

struct KeyMap {
    entries: BTreeMap<String, String>,
}

impl KeyMap {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key=value`, got `{line}`"),
                )
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::config(key, "duplicate key"));
            }
        }
        Ok(KeyMap { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config(key, format!("invalid value `{v}`"))),
        }
    }

    fn require_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.take_parsed(key)?
            .ok_or_else(|| Error::config(key, "missing required key"))
    }
}

/// Parses a scenario (and optional sweep) from the flat dotted-key format.
pub fn parse_config(text: &str) -> Result<(ScenarioConfig, Option<SweepSpec>)> {
    let mut map = KeyMap::parse(text)?;

    let m_tx: usize = map.require_parsed("link.m_tx")?;
    let n_rx: usize = map.require_parsed("link.n_rx")?;
    let code_len: usize = map.require_parsed("link.code_len")?;
    let order: usize = map.take_parsed("link.constellation_order")?.unwrap_or(64);
    let gamma_db: f64 = map.require_parsed("link.gamma_db")?;
    let et_max: f64 = map.require_parsed("link.et_max")?;
    let pulse = PulseMeta {
        roll_off: map.take_parsed("link.roll_off")?.unwrap_or(PulseMeta::default().roll_off),
        chip_duration_s: map
            .take_parsed("link.chip_duration_s")?
            .unwrap_or(PulseMeta::default().chip_duration_s),
        carrier_hz: map
            .take_parsed("link.carrier_hz")?
            .unwrap_or(PulseMeta::default().carrier_hz),
    };
    let link = LinkConfig::new(
        m_tx,
        n_rx,
        code_len,
        ModulationOrder::from_order(order)
            .map_err(|e| Error::config("link.constellation_order", e.to_string()))?,
        gamma_db,
        et_max,
        pulse,
    )
    .map_err(|e| Error::config("link", e.to_string()))?;

    let sigma2: f64 = map.take_parsed("noise.sigma2")?.unwrap_or(1.0);

    let occupancy_mode = match map.take("occupancy.mode").as_deref().unwrap_or("analytic") {
        "analytic" => OccupancyMode::Analytic,
        "estimated" => {
            let snapshots: usize = map
                .take_parsed("occupancy.snapshots")?
                .unwrap_or_else(|| default_snapshot_count(link.dim()));
            let loading = match map.take("occupancy.loading").as_deref() {
                None | Some("auto") => Loading::Auto,
                Some(v) => Loading::Fixed(v.parse().map_err(|_| {
                    Error::config("occupancy.loading", format!("invalid value `{v}`"))
                })?),
            };
            OccupancyMode::Estimated { snapshots, loading }
        }
        other => {
            return Err(Error::config(
                "occupancy.mode",
                format!("expected `analytic` or `estimated`, got `{other}`"),
            ))
        }
    };

    let policy = match map.take("policy").as_deref().unwrap_or("cap") {
        "cap" => EnergyPolicy::Cap,
        "refrain" => EnergyPolicy::Refrain,
        other => {
            return Err(Error::config(
                "policy",
                format!("expected `cap` or `refrain`, got `{other}`"),
            ))
        }
    };

    let variants = match map.take("variants") {
        None => VariantTag::ALL.to_vec(),
        Some(list) => {
            let tags: Result<Vec<VariantTag>> = list
                .split(',')
                .map(|t| VariantTag::parse(t).map_err(|e| Error::config("variants", e.to_string())))
                .collect();
            tags?
        }
    };

    let fixed_code = match map.take("fixed.code").as_deref() {
        None => FixedCodeSpec::Default,
        Some("random") => FixedCodeSpec::PerTrial,
        Some(list) => {
            let chips: Result<Vec<Chip>> = list
                .split(',')
                .map(|t| Chip::parse(t).map_err(|e| Error::config("fixed.code", e.to_string())))
                .collect();
            FixedCodeSpec::Explicit(
                CodeVector::new(chips?).map_err(|e| Error::config("fixed.code", e.to_string()))?,
            )
        }
    };

    let fixed_weights = match map.take("fixed.weights").as_deref() {
        None => FixedWeightsSpec::Default,
        Some("random") => FixedWeightsSpec::PerTrial,
        Some(list) => {
            let parts: Result<Vec<Complex64>> = list
                .split(',')
                .map(|t| parse_complex("fixed.weights", t))
                .collect();
            let raw = DVector::from_vec(parts?);
            // scenario weights are scaled onto the ‖w‖² = M constraint
            FixedWeightsSpec::Explicit(
                BeamWeights::from_unnormalized(&raw)
                    .map_err(|e| Error::config("fixed.weights", e.to_string()))?,
            )
        }
    };

    let trials: u64 = map.take_parsed("trials")?.unwrap_or(100);
    let seed: u64 = map.take_parsed("seed")?.unwrap_or(0);

    // interferer.<k>.{kind,e_i_db,m_i}, 1-based contiguous indices
    let mut interferers = Vec::new();
    for k in 1.. {
        let kind_key = format!("interferer.{k}.kind");
        let Some(kind_str) = map.take(&kind_key) else { break };
        let kind = match kind_str.as_str() {
            "narrowband" => InterfererKind::Narrowband,
            "spread_spectrum" => InterfererKind::SpreadSpectrum,
            other => {
                return Err(Error::config(
                    kind_key,
                    format!("expected `narrowband` or `spread_spectrum`, got `{other}`"),
                ))
            }
        };
        let e_i_db: f64 = map.require_parsed(&format!("interferer.{k}.e_i_db"))?;
        let m_i: usize = map.require_parsed(&format!("interferer.{k}.m_i"))?;
        interferers.push(InterfererTemplate { kind, e_i_db, m_i });
    }

    let sweep = match map.take("sweep.axis") {
        None => {
            if map.take("sweep.values").is_some() {
                return Err(Error::config("sweep.axis", "missing (sweep.values present)"));
            }
            None
        }
        Some(axis_str) => {
            let axis = match axis_str.as_str() {
                "et_max" => SweepAxis::EtMax,
                "e_i_db" => SweepAxis::EiDb,
                other => {
                    return Err(Error::config(
                        "sweep.axis",
                        format!("expected `et_max` or `e_i_db`, got `{other}`"),
                    ))
                }
            };
            let values_str = map
                .take("sweep.values")
                .ok_or_else(|| Error::config("sweep.values", "missing required key"))?;
            let values: Result<Vec<f64>> = values_str
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config("sweep.values", format!("invalid value `{t}`")))
                })
                .collect();
            Some(SweepSpec::new(axis, values?)?)
        }
    };

    if let Some((key, _)) = map.entries.iter().next() {
        return Err(Error::config(key.clone(), "unknown key"));
    }

    let cfg = ScenarioConfig {
        link,
        sigma2,
        interferers,
        occupancy_mode,
        policy,
        variants,
        fixed_code,
        fixed_weights,
        trials,
        seed,
    };
    cfg.validate()?;
    Ok((cfg, sweep))
}

/// Reads and parses a scenario file.
pub fn load_config(path: &Path) -> Result<(ScenarioConfig, Option<SweepSpec>)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1A_STYLE: &str = "\
# SINR vs transmit-energy cap, lightly congested band
link.m_tx=4
link.n_rx=4
link.code_len=4
link.constellation_order=64
link.gamma_db=18
link.et_max=20
noise.sigma2=1.0
policy=cap
trials=3
seed=7
interferer.1.kind=narrowband
interferer.1.e_i_db=10
interferer.1.m_i=4
interferer.2.kind=spread_spectrum
interferer.2.e_i_db=10
interferer.2.m_i=4
sweep.axis=et_max
sweep.values=2,6,10,14,18,22,26,30
";

    fn fig1a_cfg() -> (ScenarioConfig, SweepSpec) {
        let (cfg, sweep) = parse_config(FIG1A_STYLE).unwrap();
        (cfg, sweep.unwrap())
    }

    // -- config parsing ------------------------------------------------------

    #[test]
    fn parses_full_scenario() {
        let (cfg, sweep) = fig1a_cfg();
        assert_eq!(cfg.link.m_tx, 4);
        assert_eq!(cfg.link.code_len, 4);
        assert_eq!(cfg.interferers.len(), 2);
        assert_eq!(cfg.interferers[0].kind, InterfererKind::Narrowband);
        assert_eq!(cfg.policy, EnergyPolicy::Cap);
        assert_eq!(cfg.trials, 3);
        assert_eq!(sweep.axis, SweepAxis::EtMax);
        assert_eq!(sweep.values.len(), 8);
    }

    #[test]
    fn unknown_key_is_field_level_error() {
        let text = format!("{FIG1A_STYLE}link.m_rx=4\n");
        match parse_config(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "link.m_rx"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_key_is_reported() {
        let text = "link.m_tx=4\n";
        match parse_config(text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "link.n_rx"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn non_increasing_sweep_rejected() {
        let text = FIG1A_STYLE.replace("2,6,10,14,18,22,26,30", "2,6,6,14");
        assert!(matches!(parse_config(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn parses_fixed_components() {
        let text = format!(
            "{FIG1A_STYLE}fixed.code=+1,-j,+j,-1\nfixed.weights=1, 0.5-0.5i, -1i, 2\n"
        );
        let (cfg, _) = parse_config(&text).unwrap();
        let FixedCodeSpec::Explicit(code) = cfg.fixed_code else {
            panic!("expected explicit code");
        };
        assert_eq!(code.chips()[1], Chip::MinusJ);
        let FixedWeightsSpec::Explicit(w) = cfg.fixed_weights else {
            panic!("expected explicit weights");
        };
        assert!((w.vector().norm_squared() - 4.0).abs() < 1e-12);

        let random = format!("{FIG1A_STYLE}fixed.code=random\nfixed.weights=random\n");
        let (cfg, _) = parse_config(&random).unwrap();
        assert_eq!(cfg.fixed_code, FixedCodeSpec::PerTrial);
        assert_eq!(cfg.fixed_weights, FixedWeightsSpec::PerTrial);
        let (code, weights) = trial_fixed_components(&cfg, 0).unwrap();
        assert_eq!(code.as_ref().unwrap().len(), 4);
        assert!((weights.as_ref().unwrap().vector().norm_squared() - 4.0).abs() < 1e-10);
        // held fixed per trial, different across trials
        let (code_b, _) = trial_fixed_components(&cfg, 0).unwrap();
        assert_eq!(code, code_b);
        let (code_c, _) = trial_fixed_components(&cfg, 1).unwrap();
        assert_ne!(code, code_c);
    }

    #[test]
    fn complex_literals() {
        let z = parse_complex("t", "0.3+0.4i").unwrap();
        assert_eq!(z, Complex64::new(0.3, 0.4));
        assert_eq!(parse_complex("t", "-2").unwrap(), Complex64::new(-2.0, 0.0));
        assert_eq!(parse_complex("t", "1.5j").unwrap(), Complex64::new(0.0, 1.5));
        assert_eq!(parse_complex("t", "-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("t", "1e-2+2e-3i").unwrap(), Complex64::new(0.01, 0.002));
        assert_eq!(parse_complex("t", "1-i").unwrap(), Complex64::new(1.0, -1.0));
        assert!(parse_complex("t", "abc").is_err());
    }

    // -- formatting -----------------------------------------------------------

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(17.81234567), "17.8123");
        assert_eq!(format_sig(0.0012345678), "0.00123457");
        assert_eq!(format_sig(-123456.49), "-123456");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1.00000");
        assert_eq!(format_sig(2.0e-7), "2.00000e-7");
    }

    // -- sweeps -----------------------------------------------------------------

    #[test]
    fn sweep_curves_behave_like_the_energy_axis_figure() {
        let (cfg, sweep) = fig1a_cfg();
        let rows = run_sweep(&cfg, &sweep).unwrap();
        assert_eq!(
            rows.len(),
            sweep.values.len() * cfg.variants.len() * cfg.trials as usize
        );
        // per (variant, trial): SINR non-decreasing along the axis and
        // clipped at the 18 dB target for the adaptive variants
        for &tag in &VariantTag::ALL {
            for trial in 0..cfg.trials {
                let mut curve: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.variant == tag && r.trial == trial)
                    .map(|r| (r.axis_value, r.sinr_db.unwrap()))
                    .collect();
                curve.sort_by(|a, b| a.0.total_cmp(&b.0));
                for w in curve.windows(2) {
                    assert!(w[1].1 >= w[0].1 - 1e-9, "{tag:?} trial {trial} not monotone");
                }
                if tag != VariantTag::NonAdaptive {
                    for (_, sinr) in &curve {
                        assert!(*sinr <= 18.0 + 1e-6, "{tag:?} exceeded the target");
                    }
                }
            }
        }
        // joint reaches the target at the smallest cap among the adaptive
        // variants, in every trial
        for trial in 0..cfg.trials {
            let crossing = |tag: VariantTag| {
                rows.iter()
                    .filter(|r| r.variant == tag && r.trial == trial)
                    .filter(|r| r.sinr_db.unwrap() >= 18.0 - 1e-6)
                    .map(|r| r.axis_value)
                    .fold(f64::INFINITY, f64::min)
            };
            let joint = crossing(VariantTag::Joint);
            for tag in [VariantTag::SpaceOnly, VariantTag::TimeOnly, VariantTag::Arbitrary] {
                assert!(joint <= crossing(tag) + 1e-9, "joint crossed after {tag:?}");
            }
        }
    }

    #[test]
    fn sweep_over_interference_energy_is_monotone_and_capped() {
        let (mut cfg, _) = fig1a_cfg();
        cfg.trials = 3;
        let sweep = SweepSpec::new(SweepAxis::EiDb, vec![0.0, 5.0, 10.0, 15.0, 20.0]).unwrap();
        let rows = run_sweep(&cfg, &sweep).unwrap();
        for &tag in &VariantTag::ALL {
            for trial in 0..cfg.trials {
                let mut curve: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.variant == tag && r.trial == trial)
                    .map(|r| (r.axis_value, r.e_t_opt))
                    .collect();
                curve.sort_by(|a, b| a.0.total_cmp(&b.0));
                for w in curve.windows(2) {
                    assert!(
                        w[1].1 >= w[0].1 - 1e-9,
                        "{tag:?} trial {trial}: energy decreased along E_i"
                    );
                }
                if tag == VariantTag::NonAdaptive {
                    for (_, e) in &curve {
                        assert_eq!(*e, 20.0);
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_byte_for_byte() {
        let (mut cfg, mut sweep) = fig1a_cfg();
        cfg.trials = 1;
        sweep.values.truncate(3);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        emit_csv(&run_sweep(&cfg, &sweep).unwrap(), &p1).unwrap();
        emit_csv(&run_sweep(&cfg, &sweep).unwrap(), &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    // -- CSV -----------------------------------------------------------------

    #[test]
    fn csv_single_row_roundtrip() {
        let row = ResultRow {
            axis_value: 5.4,
            variant: VariantTag::Joint,
            trial: 3,
            sinr_db: Some(17.812345),
            e_t_opt: 4.219876,
            transmitting: true,
            gamma_max_achieved_db: 21.5,
            metric: 44.25,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("row.csv");
        emit_csv(std::slice::from_ref(&row), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), 5.4);
        assert_eq!(fields[1], "joint");
        assert_eq!(fields[2].parse::<u64>().unwrap(), 3);
        assert!((fields[3].parse::<f64>().unwrap() - 17.812345).abs() < 1e-3);
        assert!((fields[4].parse::<f64>().unwrap() - 4.219876).abs() < 1e-3);
        assert_eq!(fields[5], "true");
        assert_eq!(fields[7].parse::<f64>().unwrap(), 44.25);
    }

    #[test]
    fn csv_rows_are_sorted() {
        let mut rows = Vec::new();
        for trial in (0..10u64).rev() {
            for &tag in VariantTag::ALL.iter().rev() {
                for axis in [30.0, 20.0, 10.0] {
                    rows.push(ResultRow {
                        axis_value: axis,
                        variant: tag,
                        trial,
                        sinr_db: Some(1.0),
                        e_t_opt: 1.0,
                        transmitting: true,
                        gamma_max_achieved_db: 0.0,
                        metric: 1.0,
                    });
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sorted.csv");
        emit_csv(&rows, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut prev: Option<(f64, String, u64)> = None;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let key = (
                f[0].parse::<f64>().unwrap(),
                f[1].to_string(),
                f[2].parse::<u64>().unwrap(),
            );
            if let Some(p) = &prev {
                let axis_ord = p.0.partial_cmp(&key.0).unwrap();
                assert!(axis_ord != std::cmp::Ordering::Greater, "axis out of order");
            }
            prev = Some(key);
        }
    }

    #[test]
    fn refrain_rows_encode_null_sinr() {
        let row = ResultRow {
            axis_value: 1.0,
            variant: VariantTag::Joint,
            trial: 0,
            sinr_db: None,
            e_t_opt: 0.0,
            transmitting: false,
            gamma_max_achieved_db: 3.0,
            metric: 2.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("refrain.csv");
        emit_csv(std::slice::from_ref(&row), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[3], "");
        assert_eq!(fields[4], "0");
        assert_eq!(fields[5], "false");
    }

    // -- summarize ----------------------------------------------------------------

    #[test]
    fn constant_rows_have_zero_std() {
        let rows: Vec<ResultRow> = (0..5)
            .map(|trial| ResultRow {
                axis_value: 2.0,
                variant: VariantTag::Joint,
                trial,
                sinr_db: Some(18.0),
                e_t_opt: 5.0,
                transmitting: true,
                gamma_max_achieved_db: 20.0,
                metric: 50.0,
            })
            .collect();
        let summary = summarize(&rows, 18.0);
        let agg = &summary.rows[0];
        assert_eq!(agg.std_sinr_db, Some(0.0));
        assert_eq!(agg.std_e_t, 0.0);
        assert_eq!(agg.transmit_fraction, 1.0);
        assert_eq!(summary.crossing(VariantTag::Joint), Some(2.0));
    }

    #[test]
    fn summarize_recovers_known_means() {
        let mut rows = Vec::new();
        for (trial, (sinr, et)) in [(10.0, 2.0), (14.0, 4.0), (18.0, 6.0)].iter().enumerate() {
            rows.push(ResultRow {
                axis_value: 1.0,
                variant: VariantTag::Arbitrary,
                trial: trial as u64,
                sinr_db: Some(*sinr),
                e_t_opt: *et,
                transmitting: true,
                gamma_max_achieved_db: 0.0,
                metric: 1.0,
            });
        }
        let summary = summarize(&rows, 18.0);
        let agg = &summary.rows[0];
        assert!((agg.mean_sinr_db.unwrap() - 14.0).abs() < 1e-12);
        assert!((agg.mean_e_t - 4.0).abs() < 1e-12);
        // crossing needs mean ≥ 17.95; mean is 14 → none
        assert_eq!(summary.crossing(VariantTag::Arbitrary), None);
    }
}
