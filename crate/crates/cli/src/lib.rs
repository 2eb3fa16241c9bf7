//! Run configuration, input resolution and output envelopes for the
//! `timeavg` command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use timeavg::autos::{self, MultiPolyMap};
use timeavg::polycore::fixtures;
use timeavg::{ComplexPoly, Error, C64};

pub mod commands;

pub const TOOL: &str = "timeavg";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_INCONCLUSIVE: i32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Img,
    Certify,
    RefuteGlobal,
    SiegelWeights,
    Green,
    Chart,
    ClassifyAuto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Orbit iterations for Green values and Hénon orbits.
    pub iterations: usize,
    pub resolution: usize,
    pub max_iter: usize,
    pub scan: usize,
    pub groups: usize,
    pub closure: usize,
    pub trials: usize,
    /// Largest iterate for degree growth and relation search.
    pub degree: usize,
    pub rays: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            iterations: 10_000,
            resolution: 512,
            max_iter: 400,
            scan: timeavg::averaging::DEFAULT_SCAN_HORIZON,
            groups: 5,
            closure: timeavg::permgroup::DEFAULT_CLOSURE_CAP,
            trials: 5,
            degree: 8,
            rays: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolConfig {
    pub green: f64,
    pub guard: usize,
    pub offset: f64,
}

impl Default for TolConfig {
    fn default() -> Self {
        TolConfig {
            green: 1e-12,
            guard: 2,
            offset: 0.05,
        }
    }
}

/// Everything a run depends on. Inputs are stored resolved, so the file
/// form replays without access to the original files or fixture names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub poly: Option<ComplexPoly>,
    pub map: Option<MultiPolyMap>,
    pub inverse: Option<MultiPolyMap>,
    pub point: Option<C64>,
    pub level: usize,
    pub seed: u64,
    pub radius: f64,
    pub chart_box: Option<[f64; 4]>,
    pub level_curve: Option<f64>,
    pub include_identity: bool,
    pub budgets: BudgetConfig,
    pub tolerances: TolConfig,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> RunConfig {
        RunConfig {
            command,
            poly: None,
            map: None,
            inverse: None,
            point: None,
            level: 2,
            seed: 0,
            radius: 1e-2,
            chart_box: None,
            level_curve: None,
            include_identity: false,
            budgets: BudgetConfig::default(),
            tolerances: TolConfig::default(),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let b = &self.budgets;
        let all = [
            b.iterations,
            b.resolution,
            b.max_iter,
            b.scan,
            b.groups,
            b.closure,
            b.trials,
            b.degree,
            b.rays,
        ];
        if all.iter().any(|&v| v == 0) {
            return Err(Error::InvalidInput("budgets must be positive".into()));
        }
        if !(self.tolerances.green > 0.0) || !(self.tolerances.offset > 0.0) || !(self.radius > 0.0)
        {
            return Err(Error::InvalidInput(
                "tolerances and radius must be positive".into(),
            ));
        }
        if self.level == 0 {
            return Err(Error::InvalidInput("level must be at least 1".into()));
        }
        let needs_poly = !matches!(self.command, CommandKind::ClassifyAuto);
        if needs_poly && self.poly.is_none() {
            return Err(Error::InvalidInput("--poly is required".into()));
        }
        if !needs_poly && self.map.is_none() {
            return Err(Error::InvalidInput("--map is required".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<RunConfig, Error> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }
}

fn read_source(arg: &str) -> Result<String, Error> {
    let t = arg.trim_start();
    if t.starts_with('[') || t.starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::InvalidInput(format!("{arg}: {e}")))
    }
}

/// Fixture name, inline JSON literal or path to a JSON file.
pub fn resolve_poly(arg: &str, seed: u64) -> Result<ComplexPoly, Error> {
    if let Some(p) = fixtures::by_name(arg, seed) {
        return Ok(p);
    }
    let text = read_source(arg)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("polynomial literal: {e}")))
}

pub fn resolve_map(arg: &str) -> Result<MultiPolyMap, Error> {
    if let Some(m) = autos::fixtures::by_name(arg) {
        return Ok(m);
    }
    let text = read_source(arg)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("map literal: {e}")))
}

pub fn parse_point(arg: &str) -> Result<C64, Error> {
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad number {s:?} in point")))
    };
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(Error::InvalidInput(format!("point must be re,im: {arg:?}"))),
    }
}

pub fn parse_box(arg: &str) -> Result<[f64; 4], Error> {
    let v: Vec<f64> = arg
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("bad box {arg:?}")))?;
    match v.as_slice() {
        [a, b, c, d] if a < b && c < d => Ok([*a, *b, *c, *d]),
        _ => Err(Error::InvalidInput(
            "box must be re_min,re_max,im_min,im_max".into(),
        )),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Precondition(_) => EXIT_INVALID,
        Error::CapExceeded { .. } | Error::Budget(_) | Error::NoNearReturn { .. } => EXIT_BUDGET,
        _ => EXIT_NUMERICAL,
    }
}

/// Wrapper written around every result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub result: T,
}

impl<T> Envelope<T> {
    pub fn new(config: &RunConfig, result: T) -> Envelope<T> {
        Envelope {
            tool: TOOL.into(),
            version: VERSION.into(),
            config_hash: config.hash(),
            seed: config.seed,
            config: config.clone(),
            result,
        }
    }
}

/// Header line for CSV and image side files.
pub fn provenance_line(config: &RunConfig) -> String {
    format!(
        "{TOOL} {VERSION} config {} seed {}",
        config.hash(),
        config.seed
    )
}

/// `out` with its extension replaced by `ext`.
pub fn side_path(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}
