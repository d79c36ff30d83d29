//! Reprojection between EPSG:3857 (spherical Web Mercator), EPSG:3750
//! (UTM zone 4N on GRS80) and EPSG:4326 geographic coordinates.
//!
//! The transverse Mercator transform uses the Krüger series in the third
//! flattening `n`, truncated after the `n⁴` terms. Within a zone the
//! truncation error is far below a millimeter.

use crate::geom::{Coordinate, FeatureCollection};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub const EPSG_WGS84: u32 = 4326;
pub const EPSG_WEB_MERCATOR: u32 = 3857;
pub const EPSG_UTM_4N: u32 = 3750;

/// Web Mercator sphere radius in meters.
pub const MERCATOR_RADIUS: f64 = 6_378_137.0;
/// Half the Web Mercator world width (`R·π`).
pub const MERCATOR_HALF_WORLD: f64 = MERCATOR_RADIUS * PI;
/// Latitude limit accepted by [`geographic_to_mercator`].
pub const MERCATOR_MAX_LAT: f64 = 85.06;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("unsupported CRS EPSG:{0}")]
    UnsupportedCrs(u32),
    #[error("coordinate outside projection domain")]
    OutsideMercatorDomain,
    #[error("latitude outside Mercator domain")]
    LatitudeOutsideMercator,
    #[error("coordinate outside UTM zone domain")]
    OutsideUtmZone,
    #[error("no transform registered from EPSG:{from} to EPSG:{to}")]
    NoTransform { from: u32, to: u32 },
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMercator {
    pub central_meridian: f64,
    pub scale: f64,
    pub false_easting: f64,
    pub false_northing: f64,
    pub semi_major: f64,
    pub inverse_flattening: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionSpec {
    Geographic,
    WebMercator { radius: f64 },
    Utm(TransverseMercator),
}

impl ProjectionSpec {
    pub fn from_epsg(code: u32) -> Result<Self, ProjectionError> {
        match code {
            EPSG_WGS84 => Ok(ProjectionSpec::Geographic),
            EPSG_WEB_MERCATOR => Ok(ProjectionSpec::WebMercator {
                radius: MERCATOR_RADIUS,
            }),
            EPSG_UTM_4N => Ok(ProjectionSpec::Utm(TransverseMercator {
                central_meridian: -159.0,
                scale: 0.9996,
                false_easting: 500_000.0,
                false_northing: 0.0,
                semi_major: 6_378_137.0,
                inverse_flattening: 298.257_222_101,
            })),
            other => Err(ProjectionError::UnsupportedCrs(other)),
        }
    }

    pub fn code(&self) -> u32 {
        match self {
            ProjectionSpec::Geographic => EPSG_WGS84,
            ProjectionSpec::WebMercator { .. } => EPSG_WEB_MERCATOR,
            ProjectionSpec::Utm(_) => EPSG_UTM_4N,
        }
    }

    pub fn utm_zone_4n() -> Self {
        Self::from_epsg(EPSG_UTM_4N).unwrap()
    }

    /// Projected coordinate to (lon, lat) degrees.
    pub fn to_geographic(&self, x: f64, y: f64) -> Result<(f64, f64), ProjectionError> {
        match self {
            ProjectionSpec::Geographic => Ok((x, y)),
            ProjectionSpec::WebMercator { .. } => mercator_to_geographic(x, y),
            ProjectionSpec::Utm(_) => utm_to_geographic(x, y, self),
        }
    }

    /// (lon, lat) degrees to projected coordinate.
    pub fn from_geographic(&self, lon: f64, lat: f64) -> Result<(f64, f64), ProjectionError> {
        match self {
            ProjectionSpec::Geographic => Ok((lon, lat)),
            ProjectionSpec::WebMercator { .. } => geographic_to_mercator(lon, lat),
            ProjectionSpec::Utm(_) => geographic_to_utm(lon, lat, self),
        }
    }
}

pub fn mercator_to_geographic(x: f64, y: f64) -> Result<(f64, f64), ProjectionError> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    if x.abs() > MERCATOR_HALF_WORLD * (1.0 + 1e-9) {
        return Err(ProjectionError::OutsideMercatorDomain);
    }
    let lon = (x / MERCATOR_RADIUS).to_degrees();
    let lat = (2.0 * (y / MERCATOR_RADIUS).exp().atan() - FRAC_PI_2).to_degrees();
    Ok((lon.clamp(-180.0, 180.0), lat))
}

pub fn geographic_to_mercator(lon: f64, lat: f64) -> Result<(f64, f64), ProjectionError> {
    if !(lon.is_finite() && lat.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    if lat.abs() >= MERCATOR_MAX_LAT {
        return Err(ProjectionError::LatitudeOutsideMercator);
    }
    let x = MERCATOR_RADIUS * lon.to_radians();
    let y = MERCATOR_RADIUS * lat.to_radians().tan().asinh();
    Ok((x, y))
}

/// Series coefficients derived from the ellipsoid's third flattening.
struct KruegerSeries {
    /// Rectifying radius `A` scaled by `k0`.
    k0_a: f64,
    /// Forward (conformal → TM) coefficients α₁..α₄.
    alpha: [f64; 4],
    /// Inverse (TM → conformal) coefficients β₁..β₄.
    beta: [f64; 4],
    /// Conformal → geodetic latitude coefficients δ₁..δ₄.
    delta: [f64; 4],
    /// `2√n/(1+n)`, the first eccentricity.
    ecc: f64,
}

impl KruegerSeries {
    fn new(tm: &TransverseMercator) -> Self {
        let f = 1.0 / tm.inverse_flattening;
        let n = f / (2.0 - f);
        let (n2, n3, n4) = (n * n, n * n * n, n * n * n * n);
        let a = tm.semi_major / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0);
        KruegerSeries {
            k0_a: tm.scale * a,
            alpha: [
                n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0,
                13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0,
                61.0 * n3 / 240.0 - 103.0 * n4 / 140.0,
                49561.0 * n4 / 161280.0,
            ],
            beta: [
                n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0,
                n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0,
                17.0 * n3 / 480.0 - 37.0 * n4 / 840.0,
                4397.0 * n4 / 161280.0,
            ],
            delta: [
                2.0 * n - 2.0 * n2 / 3.0 - 2.0 * n3 + 116.0 * n4 / 45.0,
                7.0 * n2 / 3.0 - 8.0 * n3 / 5.0 - 227.0 * n4 / 45.0,
                56.0 * n3 / 15.0 - 136.0 * n4 / 35.0,
                4279.0 * n4 / 630.0,
            ],
            ecc: 2.0 * n.sqrt() / (1.0 + n),
        }
    }
}

fn transverse_mercator(spec: &ProjectionSpec) -> Result<&TransverseMercator, ProjectionError> {
    match spec {
        ProjectionSpec::Utm(tm) => Ok(tm),
        other => Err(ProjectionError::NoTransform {
            from: other.code(),
            to: EPSG_UTM_4N,
        }),
    }
}

/// Widest easting offset from the false easting accepted by the inverse.
///
/// Covers the forward image of ±6° of longitude at Hawaiian latitudes.
const UTM_EASTING_HALF_WIDTH: f64 = 700_000.0;
/// Widest longitude offset from the central meridian accepted by the forward transform.
const UTM_MAX_LON_OFFSET: f64 = 6.0;

pub fn geographic_to_utm(
    lon: f64,
    lat: f64,
    spec: &ProjectionSpec,
) -> Result<(f64, f64), ProjectionError> {
    let tm = transverse_mercator(spec)?;
    if !(lon.is_finite() && lat.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    let dlon = lon - tm.central_meridian;
    if dlon.abs() > UTM_MAX_LON_OFFSET || lat.abs() > 84.0 {
        return Err(ProjectionError::OutsideUtmZone);
    }
    let s = KruegerSeries::new(tm);
    let phi = lat.to_radians();
    let lam = dlon.to_radians();

    let t = (phi.sin().atanh() - s.ecc * (s.ecc * phi.sin()).atanh()).sinh();
    let xi_p = t.atan2(lam.cos());
    let eta_p = (lam.sin() / (1.0 + t * t).sqrt()).atanh();

    let (mut xi, mut eta) = (xi_p, eta_p);
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    Ok((
        tm.false_easting + s.k0_a * eta,
        tm.false_northing + s.k0_a * xi,
    ))
}

pub fn utm_to_geographic(
    easting: f64,
    northing: f64,
    spec: &ProjectionSpec,
) -> Result<(f64, f64), ProjectionError> {
    let tm = transverse_mercator(spec)?;
    if !(easting.is_finite() && northing.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    if (easting - tm.false_easting).abs() > UTM_EASTING_HALF_WIDTH {
        return Err(ProjectionError::OutsideUtmZone);
    }
    let s = KruegerSeries::new(tm);
    let xi = (northing - tm.false_northing) / s.k0_a;
    let eta = (easting - tm.false_easting) / s.k0_a;
    if xi.abs() > FRAC_PI_2 {
        return Err(ProjectionError::OutsideUtmZone);
    }

    let (mut xi_p, mut eta_p) = (xi, eta);
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let chi = (xi_p.sin() / eta_p.cosh()).asin();
    let phi = chi
        + s.delta
            .iter()
            .enumerate()
            .map(|(j, d)| d * (2.0 * (j + 1) as f64 * chi).sin())
            .sum::<f64>();
    let lam = eta_p.sinh().atan2(xi_p.cos());
    Ok((tm.central_meridian + lam.to_degrees(), phi.to_degrees()))
}

/// Transforms every coordinate of `fc` into `target` (only EPSG:4326 is supported).
pub fn reproject_collection(
    fc: &FeatureCollection,
    target: u32,
) -> Result<FeatureCollection, ProjectionError> {
    let no_transform = ProjectionError::NoTransform {
        from: fc.crs,
        to: target,
    };
    if target != EPSG_WGS84 {
        return Err(no_transform);
    }
    let source = ProjectionSpec::from_epsg(fc.crs).map_err(|_| no_transform)?;
    if source == ProjectionSpec::Geographic {
        return Ok(fc.clone());
    }
    let features = fc
        .features
        .iter()
        .map(|f| {
            let mut err = None;
            let geometry = f
                .geometry
                .map_coords(|c| match source.to_geographic(c.x, c.y) {
                    Ok((x, y)) => Coordinate::new(x, y),
                    Err(e) => {
                        err.get_or_insert(e);
                        c
                    }
                });
            match err {
                Some(e) => Err(e),
                None => Ok(crate::geom::Feature {
                    geometry,
                    attributes: f.attributes.clone(),
                    id: f.id.clone(),
                }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureCollection::new(target, features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Feature, Geometry};

    #[test]
    fn mercator_closed_forms() {
        assert_eq!(mercator_to_geographic(0.0, 0.0).unwrap(), (0.0, 0.0));
        let (lon, lat) = mercator_to_geographic(20037508.342789244, 0.0).unwrap();
        assert!((lon - 180.0).abs() < 1e-12 && lat.abs() < 1e-12);
        let (x, y) = geographic_to_mercator(180.0, 0.0).unwrap();
        assert!((x - 20037508.342789244).abs() < 1e-6 && y.abs() < 1e-9);
        assert_eq!(geographic_to_mercator(0.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn mercator_domain_errors() {
        assert_eq!(
            mercator_to_geographic(2.1e7, 0.0).unwrap_err().to_string(),
            "coordinate outside projection domain"
        );
        assert_eq!(
            geographic_to_mercator(0.0, 85.06).unwrap_err().to_string(),
            "latitude outside Mercator domain"
        );
    }

    #[test]
    fn utm_origin_and_central_meridian() {
        let spec = ProjectionSpec::utm_zone_4n();
        let (lon, lat) = utm_to_geographic(500_000.0, 0.0, &spec).unwrap();
        assert!((lon + 159.0).abs() < 1e-12 && lat.abs() < 1e-12);
        let (e, n) = geographic_to_utm(-159.0, 0.0, &spec).unwrap();
        assert!((e - 500_000.0).abs() < 1e-9 && n.abs() < 1e-9);
        for northing in [1.0e6, 2.3e6, 5.0e6] {
            let (lon, _) = utm_to_geographic(500_000.0, northing, &spec).unwrap();
            assert_eq!(lon, -159.0);
        }
    }

    #[test]
    fn utm_domain_errors() {
        let spec = ProjectionSpec::utm_zone_4n();
        assert_eq!(
            utm_to_geographic(1_300_000.0, 2e6, &spec)
                .unwrap_err()
                .to_string(),
            "coordinate outside UTM zone domain"
        );
        assert!(geographic_to_utm(-150.0, 20.0, &spec).is_err());
        assert!(utm_to_geographic(500_000.0, 0.0, &ProjectionSpec::Geographic).is_err());
    }

    #[test]
    fn only_three_codes_constructible() {
        for code in [4326, 3857, 3750] {
            assert_eq!(ProjectionSpec::from_epsg(code).unwrap().code(), code);
        }
        assert!(ProjectionSpec::from_epsg(32604).is_err());
    }

    #[test]
    fn reproject_identity_and_delegation() {
        let fc = FeatureCollection::new(
            4326,
            vec![Feature::new(Geometry::Point(Coordinate::new(-157.8, 21.3)))],
        );
        assert_eq!(reproject_collection(&fc, 4326).unwrap(), fc);

        let merc = FeatureCollection::new(
            3857,
            vec![
                Feature::new(Geometry::Point(Coordinate::new(-17570280.0, 2422420.0)))
                    .with_attribute("NAME", "Honolulu"),
            ],
        );
        let out = reproject_collection(&merc, 4326).unwrap();
        assert_eq!(out.crs, 4326);
        let (lon, lat) = mercator_to_geographic(-17570280.0, 2422420.0).unwrap();
        assert_eq!(
            out.features[0].geometry,
            Geometry::Point(Coordinate::new(lon, lat))
        );
        assert_eq!(out.features[0].attributes, merc.features[0].attributes);
    }

    #[test]
    fn reproject_rejects_unknown_pairs() {
        let fc = FeatureCollection::new(3857, vec![]);
        assert!(matches!(
            reproject_collection(&fc, 3750),
            Err(ProjectionError::NoTransform { .. })
        ));
        let fc = FeatureCollection::new(2000, vec![]);
        assert!(reproject_collection(&fc, 4326)
            .unwrap_err()
            .to_string()
            .starts_with("no transform registered"));
    }
}
