//! Vehicle parameters, BEV discharge energy, ICEV diesel use and CO₂.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Route, Segment};

pub const KM_PER_MILE: f64 = 1.609344;
/// Energy content of one U.S. gallon of diesel.
pub const DIESEL_MWH_PER_GALLON: f64 = 0.0407;

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("vehicle parameter `{field}` = {value}: {reason}")]
    InvalidSpec {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("load {load} t exceeds vehicle capacity {capacity} t")]
    OverCapacity { load: f64, capacity: f64 },
    #[error("`{field}` must be non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("no grid carbon intensity for region(s): {}", .0.join(", "))]
    MissingFactor(Vec<String>),
}

/// Battery and drivetrain parameters of one truck type.
///
/// `eta_w2e_kwh_per_mile` is the energy drawn per mile at full load, so that
/// discharge power is `eta_w2e * speed_mph * load / capacity` in kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSpec {
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub eta_w2e_kwh_per_mile: f64,
    pub e_max_kwh: f64,
    pub e_min_kwh: f64,
    pub p_max_kw: f64,
    /// Carried for completeness; no constraint uses it.
    pub p_min_kw: f64,
    pub e0_kwh: f64,
    /// Required end-of-day state of charge. Defaults to `e0_kwh`.
    pub e_terminal_kwh: Option<f64>,
    pub capacity_tons: f64,
    pub charge_dwell_h: f64,
    pub diesel_mpg: f64,
    pub diesel_kgco2_per_gal: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            eta_charge: 0.95,
            eta_discharge: 0.95,
            eta_w2e_kwh_per_mile: 2.0,
            e_max_kwh: 1000.0,
            e_min_kwh: 100.0,
            p_max_kw: 1000.0,
            p_min_kw: 0.0,
            e0_kwh: 600.0,
            e_terminal_kwh: None,
            capacity_tons: 20.0,
            charge_dwell_h: 0.75,
            diesel_mpg: 6.5,
            diesel_kgco2_per_gal: 10.19,
        }
    }
}

impl VehicleSpec {
    pub fn e_terminal(&self) -> f64 {
        self.e_terminal_kwh.unwrap_or(self.e0_kwh)
    }

    /// Largest energy a single stop can draw from the grid.
    pub fn max_stop_energy_kwh(&self) -> f64 {
        self.p_max_kw * self.charge_dwell_h
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |field, value, reason| Err(VehicleError::InvalidSpec { field, value, reason });
        let unit = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !unit(self.eta_charge) {
            return bad("eta_charge", self.eta_charge, "must lie in (0, 1]");
        }
        if !unit(self.eta_discharge) {
            return bad("eta_discharge", self.eta_discharge, "must lie in (0, 1]");
        }
        if !pos(self.eta_w2e_kwh_per_mile) {
            return bad("eta_w2e_kwh_per_mile", self.eta_w2e_kwh_per_mile, "must be positive");
        }
        if !(self.e_min_kwh.is_finite() && self.e_min_kwh >= 0.0) {
            return bad("e_min_kwh", self.e_min_kwh, "must be non-negative");
        }
        if !(self.e_max_kwh.is_finite() && self.e_max_kwh > self.e_min_kwh) {
            return bad("e_max_kwh", self.e_max_kwh, "must exceed e_min_kwh");
        }
        if !(self.e_min_kwh..=self.e_max_kwh).contains(&self.e0_kwh) {
            return bad("e0_kwh", self.e0_kwh, "must lie in [e_min_kwh, e_max_kwh]");
        }
        let term = self.e_terminal();
        if !(self.e_min_kwh..=self.e_max_kwh).contains(&term) {
            return bad("e_terminal_kwh", term, "must lie in [e_min_kwh, e_max_kwh]");
        }
        if !(self.p_min_kw.is_finite() && self.p_min_kw >= 0.0) {
            return bad("p_min_kw", self.p_min_kw, "must be non-negative");
        }
        if !(self.p_max_kw.is_finite() && self.p_max_kw >= self.p_min_kw) {
            return bad("p_max_kw", self.p_max_kw, "must be at least p_min_kw");
        }
        if !pos(self.capacity_tons) {
            return bad("capacity_tons", self.capacity_tons, "must be positive");
        }
        if !pos(self.charge_dwell_h) {
            return bad("charge_dwell_h", self.charge_dwell_h, "must be positive");
        }
        if !pos(self.diesel_mpg) {
            return bad("diesel_mpg", self.diesel_mpg, "must be positive");
        }
        if !(self.diesel_kgco2_per_gal.is_finite() && self.diesel_kgco2_per_gal >= 0.0) {
            return bad("diesel_kgco2_per_gal", self.diesel_kgco2_per_gal, "must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentEnergy {
    pub k: usize,
    /// Battery discharge power on the segment, kW.
    pub p_discharge_kw: f64,
    /// Energy drawn on the segment, kWh.
    pub e_discharge_kwh: f64,
}

/// Discharge power and energy for one segment at load `load_tons`.
pub fn segment_discharge(
    spec: &VehicleSpec,
    segment: &Segment,
    load_tons: f64,
) -> Result<SegmentEnergy, VehicleError> {
    if !(load_tons >= 0.0) {
        return Err(VehicleError::Negative {
            field: "load_tons",
            value: load_tons,
        });
    }
    if load_tons > spec.capacity_tons {
        return Err(VehicleError::OverCapacity {
            load: load_tons,
            capacity: spec.capacity_tons,
        });
    }
    let speed_mph = segment.speed_kph / KM_PER_MILE;
    let p = spec.eta_w2e_kwh_per_mile * speed_mph * (load_tons / spec.capacity_tons);
    Ok(SegmentEnergy {
        k: segment.k,
        p_discharge_kw: p,
        e_discharge_kwh: p * segment.duration_h,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FuelUse {
    pub gallons_by_county: BTreeMap<String, f64>,
    pub total_gallons: f64,
    pub total_energy_mwh: f64,
}

/// Diesel burned by one ICEV trip along `route`. Each segment's fuel is booked
/// to the county of the site where the segment starts.
pub fn icev_fuel(spec: &VehicleSpec, route: &Route) -> FuelUse {
    let mut by_county: BTreeMap<String, f64> = BTreeMap::new();
    for seg in &route.segments {
        let gallons = seg.distance_km / KM_PER_MILE / spec.diesel_mpg;
        let county = &route.sites[seg.k].county;
        *by_county.entry(county.clone()).or_default() += gallons;
    }
    let total_gallons: f64 = by_county.values().sum();
    FuelUse {
        gallons_by_county: by_county,
        total_gallons,
        total_energy_mwh: total_gallons * DIESEL_MWH_PER_GALLON,
    }
}

/// Tailpipe CO₂ in kg for `total_gallons` of diesel.
pub fn icev_emissions(total_gallons: f64, spec: &VehicleSpec) -> Result<f64, VehicleError> {
    if !(total_gallons >= 0.0) {
        return Err(VehicleError::Negative {
            field: "total_gallons",
            value: total_gallons,
        });
    }
    Ok(total_gallons * spec.diesel_kgco2_per_gal)
}

/// Grid carbon intensity per region (utility id or county).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionFactors {
    pub grid_gco2_per_kwh: BTreeMap<String, f64>,
}

impl EmissionFactors {
    pub const DIESEL_MWH_PER_GAL: f64 = DIESEL_MWH_PER_GALLON;

    pub fn new(grid_gco2_per_kwh: BTreeMap<String, f64>) -> Self {
        Self { grid_gco2_per_kwh }
    }

    /// Intensity region for a charging site: its utility, falling back to its county.
    pub fn region_for<'a>(&self, utility_id: &'a str, county: &'a str) -> Option<&'a str> {
        if self.grid_gco2_per_kwh.contains_key(utility_id) {
            Some(utility_id)
        } else if self.grid_gco2_per_kwh.contains_key(county) {
            Some(county)
        } else {
            None
        }
    }

    pub fn intensity(&self, region: &str) -> Option<f64> {
        self.grid_gco2_per_kwh.get(region).copied()
    }
}

/// Grid CO₂ in kg for charging energy booked per region.
pub fn bev_emissions(
    charge_by_region: &BTreeMap<String, f64>,
    factors: &EmissionFactors,
) -> Result<f64, VehicleError> {
    let missing: Vec<String> = charge_by_region
        .keys()
        .filter(|r| !factors.grid_gco2_per_kwh.contains_key(*r))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(VehicleError::MissingFactor(missing));
    }
    Ok(charge_by_region
        .iter()
        .map(|(r, kwh)| kwh * factors.grid_gco2_per_kwh[r] / 1000.0)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ChargingSite;

    fn seg(v_kph: f64, t_h: f64) -> Segment {
        Segment {
            k: 0,
            distance_km: v_kph * t_h,
            speed_kph: v_kph,
            duration_h: t_h,
        }
    }

    fn spec(eta_w2e: f64) -> VehicleSpec {
        VehicleSpec {
            eta_w2e_kwh_per_mile: eta_w2e,
            ..VehicleSpec::default()
        }
    }

    #[test]
    fn zero_load_draws_nothing() {
        let e = segment_discharge(&spec(2.0), &seg(90.0, 1.5), 0.0).unwrap();
        assert_eq!(e.p_discharge_kw, 0.0);
        assert_eq!(e.e_discharge_kwh, 0.0);
    }

    #[test]
    fn full_load_fifty_mph() {
        let s = spec(2.0);
        let e = segment_discharge(&s, &seg(50.0 * KM_PER_MILE, 2.0), s.capacity_tons).unwrap();
        assert!((e.p_discharge_kw - 100.0).abs() < 1e-9);
        assert!((e.e_discharge_kwh - 200.0).abs() < 1e-9);
    }

    #[test]
    fn half_load_eighty_kph() {
        let s = spec(2.0);
        let e = segment_discharge(&s, &seg(80.0, 1.0), s.capacity_tons / 2.0).unwrap();
        // 80 / 1.609344 = 49.709695378986716...
        assert!((e.p_discharge_kw - 49.709_695_378_986_716).abs() < 1e-9);
        assert!((e.e_discharge_kwh - 49.709_695_378_986_716).abs() < 1e-9);
    }

    #[test]
    fn load_outside_domain() {
        let s = spec(2.0);
        assert!(matches!(
            segment_discharge(&s, &seg(80.0, 1.0), s.capacity_tons + 0.1),
            Err(VehicleError::OverCapacity { .. })
        ));
        assert!(matches!(
            segment_discharge(&s, &seg(80.0, 1.0), -1.0),
            Err(VehicleError::Negative { .. })
        ));
    }

    fn site(k: usize, county: &str) -> ChargingSite {
        ChargingSite {
            k,
            node_id: k as u64,
            lat: 0.0,
            lon: 0.0,
            county: county.into(),
            utility_id: "U".into(),
            cum_km: 0.0,
            price: None,
        }
    }

    fn route(segs_miles: &[f64], counties: &[&str]) -> Route {
        Route {
            route_id: "r".into(),
            origin_city: "a".into(),
            destination_city: "b".into(),
            total_distance_km: segs_miles.iter().sum::<f64>() * KM_PER_MILE,
            total_duration_h: 0.0,
            highway_names: vec![],
            node_path: vec![],
            sites: counties.iter().enumerate().map(|(k, c)| site(k, c)).collect(),
            segments: segs_miles
                .iter()
                .enumerate()
                .map(|(k, mi)| Segment {
                    k,
                    distance_km: mi * KM_PER_MILE,
                    speed_kph: 100.0,
                    duration_h: mi * KM_PER_MILE / 100.0,
                })
                .collect(),
        }
    }

    #[test]
    fn one_gallon_of_diesel() {
        let s = VehicleSpec {
            diesel_mpg: 6.5,
            ..VehicleSpec::default()
        };
        let fuel = icev_fuel(&s, &route(&[6.5], &["X", "Y"]));
        assert!((fuel.total_gallons - 1.0).abs() < 1e-12);
        assert_eq!(fuel.total_energy_mwh, fuel.total_gallons * 0.0407);
    }

    #[test]
    fn zero_length_route_burns_nothing() {
        let fuel = icev_fuel(&VehicleSpec::default(), &route(&[], &["X"]));
        assert_eq!(fuel.total_gallons, 0.0);
        assert_eq!(fuel.total_energy_mwh, 0.0);
        assert!(fuel.gallons_by_county.is_empty());
    }

    #[test]
    fn fuel_goes_to_segment_start_county() {
        let s = VehicleSpec {
            diesel_mpg: 5.0,
            ..VehicleSpec::default()
        };
        let fuel = icev_fuel(&s, &route(&[100.0, 100.0], &["X", "Y", "Z"]));
        assert_eq!(fuel.gallons_by_county.len(), 2);
        assert!((fuel.gallons_by_county["X"] - 20.0).abs() < 1e-9);
        assert!((fuel.gallons_by_county["Y"] - 20.0).abs() < 1e-9);
        assert_eq!(fuel.total_gallons, fuel.gallons_by_county.values().sum::<f64>());
    }

    #[test]
    fn diesel_emissions() {
        let s = VehicleSpec::default();
        assert_eq!(icev_emissions(0.0, &s).unwrap(), 0.0);
        assert!((icev_emissions(100.0, &s).unwrap() - 1019.0).abs() < 1e-9);
        assert!(icev_emissions(-1.0, &s).is_err());
    }

    #[test]
    fn grid_emissions() {
        let factors = EmissionFactors::new(BTreeMap::from([("R1".into(), 100.0), ("R2".into(), 50.0)]));
        assert_eq!(bev_emissions(&BTreeMap::new(), &factors).unwrap(), 0.0);
        let one = BTreeMap::from([("R1".to_string(), 1000.0)]);
        let f500 = EmissionFactors::new(BTreeMap::from([("R1".into(), 500.0)]));
        assert!((bev_emissions(&one, &f500).unwrap() - 500.0).abs() < 1e-12);
        let two = BTreeMap::from([("R1".to_string(), 1000.0), ("R2".to_string(), 2000.0)]);
        assert!((bev_emissions(&two, &factors).unwrap() - 200.0).abs() < 1e-12);
        let unknown = BTreeMap::from([("R9".to_string(), 1.0)]);
        assert_eq!(
            bev_emissions(&unknown, &factors),
            Err(VehicleError::MissingFactor(vec!["R9".into()]))
        );
    }

    #[test]
    fn region_falls_back_to_county() {
        let f = EmissionFactors::new(BTreeMap::from([("Travis".into(), 1.0), ("U".into(), 2.0)]));
        assert_eq!(f.region_for("U", "Travis"), Some("U"));
        assert_eq!(f.region_for("V", "Travis"), Some("Travis"));
        assert_eq!(f.region_for("V", "Hays"), None);
    }

    #[test]
    fn spec_validation() {
        assert!(VehicleSpec::default().validate().is_ok());
        let bad = VehicleSpec {
            e0_kwh: 5000.0,
            ..VehicleSpec::default()
        };
        assert!(matches!(bad.validate(), Err(VehicleError::InvalidSpec { field: "e0_kwh", .. })));
        let bad = VehicleSpec {
            eta_charge: 0.0,
            ..VehicleSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
