//! Experiment configuration: parsing, defaults and the resolved echo.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hybridlv::calibration::{CalibrationSettings, FixedPoint};
use hybridlv::models::{HullWhiteParams, LocalVolFunction, LocalVolSurface, TimeInterpolation};
use hybridlv::monte_carlo::{McConfig, RateScheme, SpotScheme};
use hybridlv::pde::{EvolveOptions, GridSpec, InitialCondition};
use hybridlv::HybridModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub mc: MonteCarloConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "one")]
    pub spot: f64,
    pub rho: f64,
    pub rates: RatesConfig,
    pub vol: VolConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub a: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub r0: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VolConfig {
    Constant {
        sigma1: f64,
    },
    Hyperbolic {
        nu: f64,
        beta: f64,
    },
    /// `T,K,sigma` CSV as written by `calibrate`.
    Surface {
        file: String,
        #[serde(default)]
        time_rule: TimeRule,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeRule {
    #[default]
    Linear,
    LeftContinuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Keyword {
    Auto,
}

/// `"auto"` or `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bounds {
    Range([f64; 2]),
    Keyword(Keyword),
}

impl Bounds {
    fn range(self) -> Option<(f64, f64)> {
        match self {
            Bounds::Range([lo, hi]) => Some((lo, hi)),
            Bounds::Keyword(Keyword::Auto) => None,
        }
    }
}

/// `"auto"` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Keyword(Keyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    ShortTime,
    Dirac,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_ds")]
    pub ds: f64,
    #[serde(default = "default_dr")]
    pub dr: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "auto_bounds")]
    pub s_bounds: Bounds,
    #[serde(default = "auto_bounds")]
    pub r_bounds: Bounds,
    #[serde(default = "default_initial")]
    pub initial: InitialKind,
    /// Spot cells covered by the short-time start.
    #[serde(default = "default_cells")]
    pub cells: f64,
    /// Kernel concentration N of the Dirac start.
    #[serde(default = "auto_value")]
    pub kernel_n: AutoOr,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default = "default_drift_warning")]
    pub drift_warning: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        toml::from_str("").expect("grid defaults")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_maturities")]
    pub maturities: Vec<f64>,
    /// Explicit strikes; when empty, `strike_range` is expanded.
    #[serde(default)]
    pub strikes: Vec<f64>,
    /// `[first, last, step]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike_range: Option<[f64; 3]>,
    /// Snapshot times for `solve-pde`; empty means the maturities.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("run defaults")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpotSchemeName {
    LogEuler,
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateSchemeName {
    Exact,
    Euler,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Independent draws; antithetic pairing doubles the paths simulated.
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default = "default_mc_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "yes")]
    pub antithetic: bool,
    #[serde(default = "default_spot_scheme")]
    pub spot_scheme: SpotSchemeName,
    #[serde(default = "default_rate_scheme")]
    pub rate_scheme: RateSchemeName,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        toml::from_str("").expect("mc defaults")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// `"analytic"` (closed-form surface of the model, constant vol only)
    /// or the path of a `T,K,price` CSV.
    #[serde(default = "default_market")]
    pub market: String,
    #[serde(default)]
    pub fixed_point: bool,
    #[serde(default = "default_fp_iter")]
    pub fixed_point_iterations: usize,
    #[serde(default = "default_fp_tol")]
    pub fixed_point_tolerance: f64,
    #[serde(default)]
    pub continuation: bool,
    #[serde(default = "default_floor")]
    pub c_kk_floor: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        toml::from_str("").expect("calibration defaults")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// `K,price,se` CSVs; relative paths are read from the output directory.
    #[serde(default = "default_left")]
    pub left: String,
    #[serde(default = "default_right")]
    pub right: String,
    /// A row passes when |diff| <= max(tolerance, 3·se).
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        toml::from_str("").expect("compare defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_ds() -> f64 {
    0.0156
}
fn default_dr() -> f64 {
    0.0026
}
fn default_dt() -> f64 {
    0.0099
}
fn auto_bounds() -> Bounds {
    Bounds::Keyword(Keyword::Auto)
}
fn auto_value() -> AutoOr {
    AutoOr::Keyword(Keyword::Auto)
}
fn default_initial() -> InitialKind {
    InitialKind::ShortTime
}
fn default_cells() -> f64 {
    2.0
}
fn default_drift_warning() -> f64 {
    0.2
}
fn default_maturities() -> Vec<f64> {
    vec![1.0]
}
fn default_paths() -> u64 {
    100_000
}
fn default_mc_dt() -> f64 {
    1.0 / 300.0
}
fn default_seed() -> u64 {
    42
}
fn default_spot_scheme() -> SpotSchemeName {
    SpotSchemeName::LogEuler
}
fn default_rate_scheme() -> RateSchemeName {
    RateSchemeName::Exact
}
fn default_batch() -> u64 {
    4096
}
fn default_market() -> String {
    "analytic".into()
}
fn default_fp_iter() -> usize {
    FixedPoint::default().max_iter
}
fn default_fp_tol() -> f64 {
    FixedPoint::default().tol
}
fn default_floor() -> f64 {
    hybridlv::calibration::C_KK_FLOOR
}
fn default_left() -> String {
    "prices_pde.csv".into()
}
fn default_right() -> String {
    "prices_analytic.csv".into()
}
fn default_tolerance() -> f64 {
    5e-4
}

const DEFAULT_STRIKE_RANGE: [f64; 3] = [0.5, 1.5, 0.01];

/// A parsed configuration with every default filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: Config,
    /// Directory of the config file; relative input paths start here.
    pub base: PathBuf,
    pub text: String,
    pub hash: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Expands strike ranges, fills snapshot times and checks ranges.
    pub fn resolve(mut self, base: &Path) -> Result<Resolved, CliError> {
        if self.run.strikes.is_empty() {
            let [lo, hi, step] = self.run.strike_range.unwrap_or(DEFAULT_STRIKE_RANGE);
            if !(step > 0.0 && hi >= lo) {
                return Err(CliError::Config(format!(
                    "run.strike_range: need first <= last and step > 0, got [{lo}, {hi}, {step}]"
                )));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            self.run.strikes = (0..=n).map(|i| round12(lo + step * i as f64)).collect();
        }
        self.run.strike_range = None;
        if self.run.snapshots.is_empty() {
            self.run.snapshots = self.run.maturities.clone();
        }
        check_increasing("run.maturities", &self.run.maturities)?;
        check_increasing("run.strikes", &self.run.strikes)?;
        check_increasing("run.snapshots", &self.run.snapshots)?;
        if self.run.maturities[0] <= 0.0 {
            return Err(CliError::Config("run.maturities: must be > 0".into()));
        }
        let text = toml::to_string(&self).map_err(|e| CliError::Config(e.to_string()))?;
        let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Resolved {
            config: self,
            base: base.to_path_buf(),
            text,
            hash,
        })
    }
}

/// Removes the last-bit noise of `lo + i·step`.
fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

fn check_increasing(field: &str, xs: &[f64]) -> Result<(), CliError> {
    if xs.is_empty() {
        return Err(CliError::Config(format!("{field}: must not be empty")));
    }
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!("{field}: values must be finite and strictly increasing")));
    }
    Ok(())
}

impl Resolved {
    pub fn path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn model(&self) -> Result<HybridModel, CliError> {
        let m = &self.config.model;
        let r = &m.rates;
        let rates = HullWhiteParams::constant(r.a, r.sigma2, r.theta, r.r0)?;
        let vol = match &m.vol {
            VolConfig::Constant { sigma1 } => LocalVolFunction::Constant { sigma1: *sigma1 },
            VolConfig::Hyperbolic { nu, beta } => LocalVolFunction::Hyperbolic { nu: *nu, beta: *beta },
            VolConfig::Surface { file, time_rule } => {
                let rule = match time_rule {
                    TimeRule::Linear => TimeInterpolation::Linear,
                    TimeRule::LeftContinuous => TimeInterpolation::LeftContinuous,
                };
                LocalVolFunction::Surface(Arc::new(read_surface(&self.path(file), rule)?))
            }
        };
        Ok(HybridModel::new(m.spot, rates, vol, m.rho)?)
    }

    pub fn grid_spec(&self) -> GridSpec {
        let g = &self.config.grid;
        GridSpec {
            ds: g.ds,
            dr: g.dr,
            dt: g.dt,
            s_bounds: g.s_bounds.range(),
            r_bounds: g.r_bounds.range(),
        }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let g = &self.config.grid;
        let initial = match g.initial {
            InitialKind::ShortTime => InitialCondition::ShortTime { cells: g.cells },
            InitialKind::Dirac => InitialCondition::Dirac {
                n_kernel: match g.kernel_n {
                    AutoOr::Value(n) => Some(n),
                    AutoOr::Keyword(Keyword::Auto) => None,
                },
            },
        };
        EvolveOptions {
            initial,
            normalize: g.normalize,
            drift_warning: g.drift_warning,
        }
    }

    pub fn mc(&self) -> McConfig {
        let c = &self.config.mc;
        let mut cfg = McConfig::new(c.paths, c.dt, c.seed);
        cfg.antithetic = c.antithetic;
        cfg.batch_size = c.batch_size;
        cfg.spot_scheme = match c.spot_scheme {
            SpotSchemeName::LogEuler => SpotScheme::LogEuler,
            SpotSchemeName::Euler => SpotScheme::Euler,
        };
        cfg.rate_scheme = match c.rate_scheme {
            RateSchemeName::Exact => RateScheme::Exact,
            RateSchemeName::Euler => RateScheme::Euler,
        };
        cfg
    }

    pub fn calibration_settings(&self) -> CalibrationSettings {
        let c = &self.config.calibration;
        let mut s = CalibrationSettings::new(self.grid_spec());
        s.evolve = self.evolve_options();
        s.fixed_point = c.fixed_point.then_some(FixedPoint {
            max_iter: c.fixed_point_iterations,
            tol: c.fixed_point_tolerance,
        });
        s.continuation = c.continuation;
        s.c_kk_floor = c.c_kk_floor;
        s
    }

    /// Comment lines that head every CSV.
    pub fn header(&self, command: &str) -> Vec<String> {
        vec![format!("config_sha256={} command={command}", self.hash)]
    }
}

/// Reads `#`-commented CSV rows with the expected header.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let where_ = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{where_}: {e}")))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{where_}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if found.len() < header.len() || found.iter().zip(header).any(|(a, b)| a != b) {
        return Err(CliError::Input(format!("{where_}: expected columns {}, found {}", header.join(","), found.join(","))));
    }
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{where_}: {e}")))?;
        let row = rec
            .iter()
            .take(header.len())
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("{where_}: data row {}: {e}", n + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Maturities, strikes and maturity-major values.
pub type Lattice = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Groups `(T, K, value)` rows into a maturity-major lattice.
pub fn lattice(rows: &[Vec<f64>], what: &str) -> Result<Lattice, CliError> {
    let mut ts: Vec<f64> = Vec::new();
    for r in rows {
        if ts.last() != Some(&r[0]) {
            ts.push(r[0]);
        }
    }
    if ts.is_empty() || !rows.len().is_multiple_of(ts.len()) {
        return Err(CliError::Input(format!("{what}: rows do not form a full (T, K) lattice")));
    }
    let nk = rows.len() / ts.len();
    let ks: Vec<f64> = rows[..nk].iter().map(|r| r[1]).collect();
    for (i, chunk) in rows.chunks(nk).enumerate() {
        if chunk.iter().any(|r| r[0] != ts[i]) || chunk.iter().zip(&ks).any(|(r, k)| r[1] != *k) {
            return Err(CliError::Input(format!("{what}: rows do not form a full (T, K) lattice")));
        }
    }
    Ok((ts, ks, rows.iter().map(|r| r[2]).collect()))
}

fn read_surface(path: &Path, rule: TimeInterpolation) -> Result<LocalVolSurface, CliError> {
    let rows = read_table(path, &["T", "K", "sigma"])?;
    let (ts, ks, v) = lattice(&rows, &path.display().to_string())?;
    Ok(LocalVolSurface::new(ts, ks, v, rule)?)
}
