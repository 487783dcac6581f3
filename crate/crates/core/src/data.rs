//! Input tables, scenario configuration, route pricing and route JSON files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{build_graph, NetworkError, RoadGraph, Route, DEFAULT_K_ROUTES, DEFAULT_SPACING_KM};
use crate::scenario::FreightDemand;
use crate::vehicle::{EmissionFactors, VehicleError, VehicleSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: expected header `{expected}`, found `{found}`", file.display())]
    Header {
        file: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}:{line}: field `{field}`: {message}", file.display())]
    Field {
        file: PathBuf,
        line: u64,
        field: String,
        message: String,
    },
    #[error("{}:{line}: {message}", file.display())]
    Record {
        file: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}:{line}: duplicate key `{key}`", file.display())]
    Duplicate { file: PathBuf, line: u64, key: String },
    #[error("{}: {message}", file.display())]
    Config { file: PathBuf, message: String },
    #[error("{}:{line}:{column}: {message}", file.display())]
    Json {
        file: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("route {route_id}: no tariff for {}", format_sites(sites))]
    MissingTariff {
        route_id: String,
        sites: Vec<(usize, String)>,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{}: {source}", file.display())]
    Vehicle {
        file: PathBuf,
        #[source]
        source: VehicleError,
    },
}

fn format_sites(sites: &[(usize, String)]) -> String {
    sites
        .iter()
        .map(|(k, id)| format!("site {k} (utility `{id}`)"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Flat energy rate per utility, USD/MWh.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TariffTable {
    pub rows: BTreeMap<String, f64>,
}

impl TariffTable {
    pub fn rate(&self, utility_id: &str) -> Option<f64> {
        self.rows.get(utility_id).copied()
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows.iter().map(|(k, v)| (k.clone(), v * factor)).collect(),
        }
    }
}

/// Diesel price per county; the `*` row applies to counties without their own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DieselPriceTable {
    pub rows: BTreeMap<String, f64>,
}

impl DieselPriceTable {
    pub const WILDCARD: &'static str = "*";

    pub fn price(&self, county: &str) -> Option<f64> {
        self.rows
            .get(county)
            .or_else(|| self.rows.get(Self::WILDCARD))
            .copied()
    }
}

struct Table {
    file: PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
    header: Vec<String>,
}

impl Table {
    fn field_err(&self, line: u64, field: &str, message: impl Into<String>) -> DataError {
        DataError::Field {
            file: self.file.clone(),
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn text<'a>(&self, line: u64, rec: &'a csv::StringRecord, col: usize) -> Result<&'a str, DataError> {
        let v = rec.get(col).unwrap_or("");
        if v.is_empty() {
            return Err(self.field_err(line, &self.header[col], "empty value"));
        }
        Ok(v)
    }

    fn non_negative(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64, DataError> {
        let raw = self.text(line, rec, col)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| self.field_err(line, &self.header[col], format!("`{raw}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.field_err(line, &self.header[col], format!("{v} is not finite")));
        }
        if v < 0.0 {
            return Err(self.field_err(line, &self.header[col], format!("negative value {v}")));
        }
        Ok(v)
    }
}

fn read_table(path: &Path, expected: &[&str]) -> Result<Table, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = path.to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let record_err = |line: u64, e: csv::Error| DataError::Record {
        file: file.clone(),
        line,
        message: e.to_string(),
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| record_err(1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != expected {
        return Err(DataError::Header {
            file,
            expected: expected.join(","),
            found: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            record_err(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(Table { file, rows, header })
}

/// Reads a two-column `key,value` table with unique keys and non-negative values.
fn keyed_values(path: &Path, header: &[&str]) -> Result<BTreeMap<String, f64>, DataError> {
    let table = read_table(path, header)?;
    let mut out = BTreeMap::new();
    for (line, rec) in &table.rows {
        let key = table.text(*line, rec, 0)?;
        let value = table.non_negative(*line, rec, 1)?;
        if out.insert(key.to_string(), value).is_some() {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                line: *line,
                key: key.to_string(),
            });
        }
    }
    Ok(out)
}

pub fn load_tariffs(path: impl AsRef<Path>) -> Result<TariffTable, DataError> {
    keyed_values(path.as_ref(), &["utility_id", "usd_per_mwh"]).map(|rows| TariffTable { rows })
}

pub fn load_diesel_prices(path: impl AsRef<Path>) -> Result<DieselPriceTable, DataError> {
    keyed_values(path.as_ref(), &["county", "usd_per_gallon"]).map(|rows| DieselPriceTable { rows })
}

pub fn load_emission_factors(path: impl AsRef<Path>) -> Result<EmissionFactors, DataError> {
    keyed_values(path.as_ref(), &["region_id", "gco2_per_kwh"]).map(EmissionFactors::new)
}

pub fn load_freight(path: impl AsRef<Path>) -> Result<Vec<FreightDemand>, DataError> {
    let table = read_table(path.as_ref(), &["origin", "destination", "tons_per_year"])?;
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let origin = table.text(*line, rec, 0)?.to_string();
        let destination = table.text(*line, rec, 1)?.to_string();
        let tons = table.non_negative(*line, rec, 2)?;
        if origin == destination && tons > 0.0 {
            return Err(table.field_err(*line, "destination", "origin and destination are the same city"));
        }
        if seen.insert((origin.clone(), destination.clone()), *line).is_some() {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                line: *line,
                key: format!("{origin},{destination}"),
            });
        }
        out.push(FreightDemand {
            origin,
            destination,
            tons_per_year: tons,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub network: PathBuf,
    pub freight: PathBuf,
    pub tariffs: PathBuf,
    pub diesel: PathBuf,
    pub carbon: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSettings {
    pub region: String,
    /// Restricts the run to pairs whose cities are both listed. `None` means all.
    pub cities: Option<Vec<String>>,
    pub bev_fraction: f64,
    pub days: u32,
    pub spacing_km: f64,
    pub k_routes: usize,
    pub sweep_steps: usize,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            region: String::new(),
            cities: None,
            bev_fraction: 0.5,
            days: 365,
            spacing_km: DEFAULT_SPACING_KM,
            k_routes: DEFAULT_K_ROUTES,
            sweep_steps: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub scenario: ScenarioSettings,
    #[serde(default)]
    pub vehicle: VehicleSpec,
}

impl ScenarioConfig {
    pub fn parse(text: &str, file: &Path) -> Result<Self, DataError> {
        let cfg: Self = toml::from_str(text).map_err(|e| DataError::Config {
            file: file.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.vehicle.validate().map_err(|source| DataError::Vehicle {
            file: file.to_path_buf(),
            source,
        })?;
        let s = &cfg.scenario;
        let bad = |message: String| DataError::Config {
            file: file.to_path_buf(),
            message,
        };
        if !(0.0..=1.0).contains(&s.bev_fraction) {
            return Err(bad(format!("bev_fraction {} outside [0, 1]", s.bev_fraction)));
        }
        if s.days == 0 {
            return Err(bad("days must be at least 1".into()));
        }
        if !(s.spacing_km > 0.0 && s.spacing_km.is_finite()) {
            return Err(bad(format!("spacing_km {} must be positive", s.spacing_km)));
        }
        if s.k_routes == 0 {
            return Err(bad("k_routes must be at least 1".into()));
        }
        if s.sweep_steps < 2 {
            return Err(bad("sweep_steps must be at least 2".into()));
        }
        Ok(cfg)
    }

    /// Rewrites relative table paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [&mut p.network, &mut p.freight, &mut p.tariffs, &mut p.diesel, &mut p.carbon] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Reads a scenario config. Relative table paths resolve against `data_dir`
/// when given, otherwise against the config file's directory.
pub fn load_config(path: impl AsRef<Path>, data_dir: Option<&Path>) -> Result<ScenarioConfig, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = ScenarioConfig::parse(&text, path)?;
    let base = data_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    cfg.resolve_paths(&base);
    Ok(cfg)
}

/// Everything a scenario needs about one region, validated and read-only.
#[derive(Debug, Clone)]
pub struct RegionData {
    pub graph: RoadGraph,
    pub tariffs: TariffTable,
    pub diesel: DieselPriceTable,
    pub factors: EmissionFactors,
    pub freight: Vec<FreightDemand>,
    pub config: ScenarioConfig,
}

impl RegionData {
    pub fn spec(&self) -> &VehicleSpec {
        &self.config.vehicle
    }

    pub fn name(&self) -> &str {
        &self.config.scenario.region
    }
}

pub fn load_tables(config: &ScenarioConfig) -> Result<RegionData, DataError> {
    let p = &config.paths;
    Ok(RegionData {
        graph: build_graph(&p.network)?,
        tariffs: load_tariffs(&p.tariffs)?,
        diesel: load_diesel_prices(&p.diesel)?,
        factors: load_emission_factors(&p.carbon)?,
        freight: load_freight(&p.freight)?,
        config: config.clone(),
    })
}

/// Fills every site's energy price from its utility's tariff.
pub fn price_route(route: &Route, tariffs: &TariffTable) -> Result<Route, DataError> {
    let mut priced = route.clone();
    let mut missing = Vec::new();
    for site in &mut priced.sites {
        match tariffs.rate(&site.utility_id) {
            Some(rate) => site.price = Some(rate),
            None => missing.push((site.k, site.utility_id.clone())),
        }
    }
    if !missing.is_empty() {
        return Err(DataError::MissingTariff {
            route_id: route.route_id.clone(),
            sites: missing,
        });
    }
    Ok(priced)
}

pub fn routes_to_json(routes: &[Route]) -> String {
    // Route contains only strings, numbers and sequences, which always serialize
    serde_json::to_string_pretty(routes).expect("route serialization")
}

pub fn save_routes(path: impl AsRef<Path>, routes: &[Route]) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut text = routes_to_json(routes);
    text.push('\n');
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_routes(path: impl AsRef<Path>) -> Result<Vec<Route>, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DataError::Json {
        file: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ChargingSite;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn duplicate_utility_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "utility_id,usd_per_mwh\nA,80\nB,90\nA,70\n");
        match load_tariffs(&p) {
            Err(DataError::Duplicate { key, line, .. }) => {
                assert_eq!(key, "A");
                assert_eq!(line, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_and_garbage_values_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "county,usd_per_gallon\n*,3.5\nX,-1\n");
        let err = load_diesel_prices(&p).unwrap_err();
        assert!(matches!(&err, DataError::Field { line: 3, field, .. } if field == "usd_per_gallon"));
        assert!(err.to_string().contains("d.csv:3"));
        let p = write(&dir, "c.csv", "region_id,gco2_per_kwh\nR,abc\n");
        assert!(matches!(load_emission_factors(&p), Err(DataError::Field { line: 2, .. })));
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "utility,rate\nA,80\n");
        assert!(matches!(load_tariffs(&p), Err(DataError::Header { .. })));
    }

    #[test]
    fn empty_freight_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "f.csv", "origin,destination,tons_per_year\n");
        assert!(load_freight(&p).unwrap().is_empty());
        let p = write(&dir, "g.csv", "origin,destination,tons_per_year\nA,A,5\n");
        assert!(load_freight(&p).is_err());
        let p = write(&dir, "h.csv", "origin,destination,tons_per_year\nA,A,0\n");
        assert_eq!(load_freight(&p).unwrap().len(), 1);
    }

    #[test]
    fn diesel_wildcard_fallback() {
        let t = DieselPriceTable {
            rows: [("*".to_string(), 3.6), ("Harris".to_string(), 3.5)].into(),
        };
        assert_eq!(t.price("Harris"), Some(3.5));
        assert_eq!(t.price("Travis"), Some(3.6));
        assert_eq!(DieselPriceTable::default().price("Travis"), None);
    }

    fn site(k: usize, utility: &str) -> ChargingSite {
        ChargingSite {
            k,
            node_id: k as u64,
            lat: 0.0,
            lon: 0.0,
            county: "C".into(),
            utility_id: utility.into(),
            cum_km: 10.0 * k as f64,
            price: None,
        }
    }

    fn route(utilities: &[&str]) -> Route {
        Route {
            route_id: "A-B-1".into(),
            origin_city: "A".into(),
            destination_city: "B".into(),
            total_distance_km: 0.0,
            total_duration_h: 0.0,
            highway_names: vec![],
            node_path: vec![],
            sites: utilities.iter().enumerate().map(|(k, u)| site(k, u)).collect(),
            segments: vec![],
        }
    }

    #[test]
    fn pricing_fills_rates_and_names_missing_sites() {
        let tariffs = TariffTable {
            rows: [("U".to_string(), 80.0)].into(),
        };
        let priced = price_route(&route(&["U", "U", "U"]), &tariffs).unwrap();
        let prices: Vec<_> = priced.sites.iter().map(|s| s.price).collect();
        assert_eq!(prices, vec![Some(80.0); 3]);
        assert_eq!(price_route(&priced, &tariffs).unwrap(), priced);
        match price_route(&route(&["U", "V", "U"]), &tariffs) {
            Err(DataError::MissingTariff { sites, .. }) => assert_eq!(sites, vec![(1, "V".to_string())]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_route_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        save_routes(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().trim(), "[]");
        assert!(load_routes(&p).unwrap().is_empty());
    }

    #[test]
    fn malformed_route_json_has_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.json", "[\n  {\"route_id\": 3}\n]");
        match load_routes(&p) {
            Err(DataError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_rejects_out_of_range_fraction() {
        let text = "[paths]\nnetwork='n'\nfreight='f'\ntariffs='t'\ndiesel='d'\ncarbon='c'\n[scenario]\nbev_fraction=1.5\n";
        assert!(ScenarioConfig::parse(text, Path::new("x.toml")).is_err());
        let ok = text.replace("1.5", "0.25");
        let mut cfg = ScenarioConfig::parse(&ok, Path::new("x.toml")).unwrap();
        cfg.resolve_paths(Path::new("/data"));
        assert_eq!(cfg.paths.tariffs, PathBuf::from("/data/t"));
        assert_eq!(cfg.scenario.days, 365);
    }
}
