//! The California city/month demand instance.
//!
//! Each month becomes a measure on the city locations (raw longitude and
//! latitude) with mass proportional to population times the squared distance
//! of the average high temperature from 72 °F.

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, MeasureSet};
use crate::scalar::Scalar;

pub const COMFORT_TEMPERATURE: f64 = 72.0;

#[derive(Clone, Debug, PartialEq)]
pub struct City {
    pub name: String,
    pub longitude: f64,
    pub latitude: f64,
    pub population: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Month {
    pub name: String,
    /// Average high in °F, one per city.
    pub highs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoSpec {
    pub cities: Vec<City>,
    pub months: Vec<Month>,
    pub comfort: f64,
}

impl DemoSpec {
    pub fn new(cities: Vec<City>, months: Vec<Month>, comfort: f64) -> Result<Self> {
        if cities.is_empty() || months.is_empty() {
            return Err(Error::Validation("demo needs at least one city and one month".into()));
        }
        if let Some(c) = cities.iter().find(|c| !(c.population > 0.0)) {
            return Err(Error::Validation(format!("population of {} must be positive", c.name)));
        }
        if let Some(m) = months.iter().find(|m| m.highs.len() != cities.len()) {
            return Err(Error::Validation(format!(
                "month {} has {} temperatures for {} cities",
                m.name,
                m.highs.len(),
                cities.len()
            )));
        }
        Ok(Self { cities, months, comfort })
    }

    /// Nine California cities with 2010 census populations and climate-normal
    /// average highs for December, January, February, March, June, July,
    /// August and September.
    pub fn california() -> Self {
        const CITIES: [(&str, f64, f64, f64, [f64; 8]); 9] = [
            ("Bakersfield", -119.0187, 35.3733, 347483.0, [56.8, 57.4, 63.6, 69.0, 92.2, 98.1, 96.9, 90.5]),
            ("Eureka", -124.1637, 40.8021, 27191.0, [55.4, 55.2, 55.6, 56.0, 62.3, 63.4, 64.3, 64.8]),
            ("Fresno", -119.7871, 36.7378, 494665.0, [55.3, 55.4, 62.0, 67.6, 91.4, 98.0, 96.6, 90.1]),
            ("Los Angeles", -118.2437, 34.0522, 3792621.0, [68.3, 68.2, 69.6, 70.2, 78.1, 83.2, 84.4, 83.1]),
            ("Sacramento", -121.4944, 38.5816, 466488.0, [54.2, 54.5, 60.6, 65.6, 87.7, 92.4, 91.5, 87.6]),
            ("San Bernardino", -117.2898, 34.1083, 209924.0, [67.6, 67.7, 68.5, 71.6, 89.0, 95.6, 96.3, 92.4]),
            ("San Francisco", -122.4194, 37.7749, 805235.0, [57.6, 57.3, 60.4, 62.2, 67.7, 67.5, 68.7, 70.7]),
            ("San Jose", -121.8863, 37.3382, 945942.0, [58.6, 58.9, 62.8, 66.2, 80.6, 83.9, 83.8, 81.9]),
            ("South Lake Tahoe", -119.9843, 38.9399, 21403.0, [41.5, 41.6, 43.3, 47.4, 71.4, 79.6, 78.9, 72.3]),
        ];
        const MONTHS: [&str; 8] = ["dec", "jan", "feb", "mar", "jun", "jul", "aug", "sep"];
        let cities = CITIES
            .iter()
            .map(|&(name, longitude, latitude, population, _)| City {
                name: name.to_string(),
                longitude,
                latitude,
                population,
            })
            .collect();
        let months = MONTHS
            .iter()
            .enumerate()
            .map(|(m, name)| Month { name: name.to_string(), highs: CITIES.iter().map(|c| c.4[m]).collect() })
            .collect();
        Self::new(cities, months, COMFORT_TEMPERATURE).expect("bundled data is valid")
    }
}

/// One measure per month on the city locations.
///
/// Weights are computed exactly in rational arithmetic before conversion, so
/// each month's masses sum to one as closely as `T` allows.
pub fn generate_demo<T: Scalar>(spec: &DemoSpec) -> Result<MeasureSet<T>> {
    let points: Vec<Vec<T>> = spec
        .cities
        .iter()
        .map(|c| vec![T::from_f64(c.longitude), T::from_f64(c.latitude)])
        .collect();
    let comfort = crate::scalar::Rational::from_f64(spec.comfort);
    let measures = spec
        .months
        .iter()
        .map(|m| {
            let weights: Vec<crate::scalar::Rational> = spec
                .cities
                .iter()
                .zip(&m.highs)
                .map(|(c, &t)| {
                    let dev = crate::scalar::Rational::from_f64(t) - comfort.clone();
                    crate::scalar::Rational::from_f64(c.population) * dev.clone() * dev
                })
                .collect();
            let total = weights.iter().fold(crate::scalar::Rational::zero(), |a, b| a + b.clone());
            if total.is_zero() {
                return Err(Error::Validation(format!("every city in {} sits at the comfort temperature", m.name)));
            }
            let masses = weights
                .into_iter()
                .map(|w| {
                    let q = w / total.clone();
                    if T::EXACT {
                        T::parse_exact(&q.to_exact_string()).expect("rational literal")
                    } else {
                        T::from_f64(q.to_f64())
                    }
                })
                .collect();
            DiscreteMeasure::new(2, points.clone(), masses)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasureSet::new(measures)
}
