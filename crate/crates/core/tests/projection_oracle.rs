//! Reference values computed once with PROJ (GRS80 UTM zone 4N, spherical
//! Web Mercator) and frozen here.

use geovuln::projection::{
    geographic_to_mercator, geographic_to_utm, mercator_to_geographic, utm_to_geographic,
    ProjectionSpec,
};

/// `((input x, input y), (expected x, expected y))`
type Case = ((f64, f64), (f64, f64));

const FORWARD: &[Case] = &[
    ((-159.0, 21.0), (500000.0, 2322147.638283494)),
    ((-157.83, 21.31), (621350.1173104964, 2356907.1298605953)),
    ((-155.5, 19.7), (866984.4737394209, 2182065.638111157)),
    ((-160.5, 22.0), (345155.92149796605, 2433586.368687722)),
    ((-154.8, 19.5), (941021.5368998356, 2161555.4132714355)),
    ((-159.0, 18.0), (500000.0, 1990185.5420416784)),
    ((-159.0, 23.0), (500000.0, 2543519.7635206697)),
];

const INVERSE: &[Case] = &[
    (
        (621000.0, 2358000.0),
        (-157.83329714234907, 21.31989580639712),
    ),
    (
        (300000.0, 2000000.0),
        (-160.8898106670516, 18.079454749520732),
    ),
    (
        (850000.0, 2500000.0),
        (-155.5968411949057, 22.570785960654135),
    ),
];

#[test]
fn utm_forward_matches_reference() {
    let spec = ProjectionSpec::utm_zone_4n();
    for &((lon, lat), (e, n)) in FORWARD {
        let (x, y) = geographic_to_utm(lon, lat, &spec).unwrap();
        assert!((x - e).abs() < 1e-3, "easting at ({lon},{lat}): {x} vs {e}");
        assert!(
            (y - n).abs() < 1e-3,
            "northing at ({lon},{lat}): {y} vs {n}"
        );
    }
}

#[test]
fn utm_inverse_matches_reference() {
    let spec = ProjectionSpec::utm_zone_4n();
    for &((e, n), (lon, lat)) in INVERSE {
        let (x, y) = utm_to_geographic(e, n, &spec).unwrap();
        assert!((x - lon).abs() < 1e-9, "lon at ({e},{n}): {x} vs {lon}");
        assert!((y - lat).abs() < 1e-9, "lat at ({e},{n}): {y} vs {lat}");
    }
}

#[test]
fn mercator_matches_reference() {
    let (lon, lat) = mercator_to_geographic(-17570280.0, 2422420.0).unwrap();
    assert!((lon - -157.83651070259543).abs() < 1e-9);
    assert!((lat - 21.25591492623491).abs() < 1e-9);
    let (x, y) = geographic_to_mercator(-157.858, 21.310).unwrap();
    assert!((x - -17572672.17764458).abs() < 1e-6);
    assert!((y - 2428881.395263256).abs() < 1e-6);
}

#[test]
fn utm_origin_is_exact() {
    let spec = ProjectionSpec::utm_zone_4n();
    let (lon, lat) = utm_to_geographic(500000.0, 0.0, &spec).unwrap();
    assert!((lon - -159.0).abs() < 1e-9 && lat.abs() < 1e-9);
    let (e, n) = geographic_to_utm(-159.0, 0.0, &spec).unwrap();
    assert!((e - 500000.0).abs() < 1e-9 && n.abs() < 1e-9);
}
