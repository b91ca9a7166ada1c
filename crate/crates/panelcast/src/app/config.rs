//! TOML configuration for the `simulate` and `forecast` commands.
//!
//! Simulation grid:
//!
//! ```toml
//! seed = 42
//! reps = 1000
//! methods = ["individual", "pooled", "eb"]
//! kappa = "all"            # "0", "pm1" or "all"
//!
//! [gibbs]
//! n_iter = 1500
//! burn_in = 500
//!
//! [[cell]]
//! name = "high_T20"
//! setting = 3              # 0 = homogeneous, 1..3 = heterogeneity level
//! n_units = 100
//! n_periods = 20
//! rho = 0.5
//! # any DgpSpec field may be overridden, e.g. beta0 = 0.6
//! ```
//!
//! Rolling forecast:
//!
//! ```toml
//! [data]
//! path = "panel.csv"       # relative to the config file
//! y_lags = [1]
//! x_lag = 0
//!
//! [rolling]
//! window = 60
//! methods = ["individual", "pooled", "eb"]
//! benchmark = "individual"
//! c = 0.1
//!
//! [spatial]
//! edges = "edges.csv"      # unit_a,unit_b
//! regions = "regions.csv"  # unit_id,region
//! country = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::csv_io::CsvSchema;
use super::spatial::SpatialSpec;
use crate::error::{Error, Result};
use crate::methods::Method;
use crate::shrinkage::GibbsConfig;
use crate::simulation::{DgpSpec, ExperimentCell, KappaRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaChoice {
    Zero,
    PlusMinusOne,
    All,
}

impl KappaChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(Self::Zero),
            "pm1" => Ok(Self::PlusMinusOne),
            "all" => Ok(Self::All),
            _ => Err(Error::Config(format!("kappa must be 0, pm1 or all, got '{s}'"))),
        }
    }

    pub fn rules(self) -> Vec<KappaRule> {
        match self {
            Self::Zero => vec![KappaRule::Zero],
            Self::PlusMinusOne => vec![KappaRule::PlusMinusOne],
            Self::All => KappaRule::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    pub n_iter: Option<usize>,
    pub burn_in: Option<usize>,
}

impl GibbsSection {
    pub fn apply(&self, mut g: GibbsConfig) -> GibbsConfig {
        if let Some(v) = self.n_iter {
            g.n_iter = v;
        }
        if let Some(v) = self.burn_in {
            g.burn_in = v;
        }
        g
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub name: String,
    #[serde(default)]
    pub setting: usize,
    pub n_units: usize,
    pub n_periods: usize,
    #[serde(default)]
    pub rho: f64,
    pub beta0: Option<f64>,
    pub a_beta: Option<f64>,
    pub alpha_groups: Option<[f64; 2]>,
    pub sigma_alpha2: Option<f64>,
    pub gamma_groups: Option<[f64; 2]>,
    pub sigma_gamma2: Option<f64>,
    pub rho_gamma_x: Option<f64>,
    pub rho_alpha_x: Option<f64>,
}

impl CellConfig {
    pub fn to_cell(&self) -> Result<ExperimentCell> {
        let mut d = match self.setting {
            0 => DgpSpec::homogeneous(self.n_units, self.n_periods),
            s => DgpSpec::setting(s, self.n_units, self.n_periods, self.rho)?,
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { d.$f = v; } )* };
        }
        over!(
            beta0,
            a_beta,
            alpha_groups,
            sigma_alpha2,
            gamma_groups,
            sigma_gamma2,
            rho_gamma_x,
            rho_alpha_x
        );
        d.validate()?;
        Ok(ExperimentCell {
            name: self.name.clone(),
            dgp: d,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub kappa: Option<String>,
    #[serde(default)]
    pub gibbs: GibbsSection,
    pub cell: Vec<CellConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default)]
    pub y_lags: Vec<usize>,
    #[serde(default)]
    pub x_lag: usize,
    #[serde(default)]
    pub drop_x: bool,
}

impl DataSection {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            y_lags: self.y_lags.clone(),
            x_lag: self.x_lag,
            drop_x: self.drop_x,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingSection {
    pub window: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub benchmark: Option<String>,
    pub hac_lags: Option<usize>,
    pub c: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialSection {
    pub edges: PathBuf,
    pub regions: PathBuf,
    #[serde(default = "yes")]
    pub country: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    pub data: DataSection,
    #[serde(default)]
    pub rolling: RollingSection,
    pub spatial: Option<SpatialSection>,
    #[serde(default)]
    pub gibbs: GibbsSection,
}

/// Raw text plus its directory, for hashing and resolving relative paths.
#[derive(Debug, Clone)]
pub struct LoadedConfig<T> {
    pub value: T,
    pub text: String,
    pub base_dir: PathBuf,
}

impl<T> LoadedConfig<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<LoadedConfig<T>> {
    let text = std::fs::read_to_string(path)?;
    let value = parse_config(&text)?;
    Ok(LoadedConfig {
        value,
        text,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    Method::parse_list(&names.join(","))
}

fn read_pairs(path: &Path, header: [&str; 2]) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let h = rdr.headers()?.clone();
    if h.len() != 2 || h[0] != *header[0] || h[1] != *header[1] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("{} must have header {},{}", path.display(), header[0], header[1]),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

/// Reads the edge list and region map for the panel's units.
pub fn load_spatial(
    section: &SpatialSection,
    units: &[String],
    resolve: impl Fn(&Path) -> PathBuf,
) -> Result<SpatialSpec> {
    let edges = read_pairs(&resolve(&section.edges), ["unit_a", "unit_b"])?;
    let regions: BTreeMap<String, String> = read_pairs(&resolve(&section.regions), ["unit_id", "region"])?
        .into_iter()
        .collect();
    SpatialSpec::from_edges(units, &edges, &regions, section.country)
}
