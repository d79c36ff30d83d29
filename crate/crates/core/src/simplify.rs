//! Geometry cost reduction: Douglas–Peucker vertex elimination, coordinate
//! quantization, attribute pruning, tolerance sweeps and reduction reports.
//!
//! None of these steps deletes a feature or a ring. When simplification or
//! quantization would degrade a ring below 4 points (or to zero area) the
//! original ring is kept and a warning is counted instead.

use crate::geojson::write_geojson;
use crate::geom::{ring_area, vertex_count, Coordinate, Feature, FeatureCollection, Geometry};
use crate::precision::{round_half_away, PrecisionPolicy, MAX_DECIMALS};
use rayon::prelude::*;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplifyError {
    #[error("degenerate polyline")]
    DegeneratePolyline,
    #[error("tolerance must be a finite number ≥ 0, got {0}")]
    InvalidTolerance(f64),
    #[error("decimals must be between 0 and 15, got {0}")]
    InvalidDecimals(u32),
    #[error("attribute {0} not found")]
    AttributeNotFound(String),
    #[error("nothing to sweep")]
    NothingToSweep,
    #[error("tolerances must be sorted ascending")]
    UnsortedTolerances,
    #[error("empty layer")]
    EmptyLayer,
}

/// Maximum allowed perpendicular deviation, in CRS units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(value: f64) -> Result<Self, SimplifyError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Tolerance(value))
        } else {
            Err(SimplifyError::InvalidTolerance(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Euclidean distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Coordinate, a: Coordinate, b: Coordinate) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.x + t * dx, a.y + t * dy);
    (p.x - cx).hypot(p.y - cy)
}

/// Indices of the points Douglas–Peucker keeps. Endpoints are always kept;
/// an interior point survives iff its distance to the current chord is
/// strictly greater than `tol`.
fn douglas_peucker_indices(points: &[Coordinate], tol: f64) -> Vec<usize> {
    let n = points.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((start, end)) = stack.pop() {
        if end <= start + 1 {
            continue;
        }
        let (a, b) = (points[start], points[end]);
        let (far, dist) = (start + 1..end)
            .map(|i| (i, point_segment_distance(points[i], a, b)))
            .fold(
                (start, -1.0),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
        if dist > tol {
            keep[far] = true;
            stack.push((far, end));
            stack.push((start, far));
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

pub fn simplify_polyline(
    points: &[Coordinate],
    tol: Tolerance,
) -> Result<Vec<Coordinate>, SimplifyError> {
    if points.len() < 2 {
        return Err(SimplifyError::DegeneratePolyline);
    }
    Ok(douglas_peucker_indices(points, tol.0)
        .into_iter()
        .map(|i| points[i])
        .collect())
}

/// Result of simplifying one geometry plus the distance of the farthest
/// original vertex from the segment that replaced it.
struct Simplified {
    geometry: Geometry,
    max_deviation: f64,
}

/// Largest distance from a dropped point to the kept segment spanning it.
fn spanning_deviation(points: &[Coordinate], kept: &[usize]) -> f64 {
    kept.windows(2)
        .flat_map(|w| {
            let (a, b) = (points[w[0]], points[w[1]]);
            (w[0] + 1..w[1]).map(move |i| point_segment_distance(points[i], a, b))
        })
        .fold(0.0, f64::max)
}

fn simplify_seq(points: &[Coordinate], tol: f64, ring: bool) -> (Vec<Coordinate>, f64) {
    let idx = douglas_peucker_indices(points, tol);
    let out: Vec<Coordinate> = idx.iter().map(|&i| points[i]).collect();
    if ring && (out.len() < 4 || ring_area(&out) == 0.0) {
        return (points.to_vec(), 0.0);
    }
    let dev = spanning_deviation(points, &idx);
    (out, dev)
}

fn simplify_measured(g: &Geometry, tol: f64) -> Simplified {
    let mut max_deviation = 0.0f64;
    let mut ring = |r: &Vec<Coordinate>| {
        let (out, dev) = simplify_seq(r, tol, true);
        max_deviation = max_deviation.max(dev);
        out
    };
    let geometry = match g {
        Geometry::Point(_) | Geometry::MultiPoint(_) => g.clone(),
        Geometry::LineString(cs) => {
            let (out, dev) = simplify_seq(cs, tol, false);
            max_deviation = dev;
            Geometry::LineString(out)
        }
        Geometry::Polygon(rings) => Geometry::Polygon(rings.iter().map(&mut ring).collect()),
        Geometry::MultiPolygon(polys) => Geometry::MultiPolygon(
            polys
                .iter()
                .map(|p| p.iter().map(&mut ring).collect())
                .collect(),
        ),
    };
    Simplified {
        geometry,
        max_deviation,
    }
}

/// Points pass through unchanged; lines and rings are simplified, and a ring
/// that would degenerate is returned unsimplified.
pub fn simplify_geometry(g: &Geometry, tol: Tolerance) -> Geometry {
    simplify_measured(g, tol.0).geometry
}

pub fn simplify_collection(fc: &FeatureCollection, tol: Tolerance) -> FeatureCollection {
    let features = fc
        .features
        .par_iter()
        .map(|f| Feature {
            geometry: simplify_geometry(&f.geometry, tol),
            attributes: f.attributes.clone(),
            id: f.id.clone(),
        })
        .collect();
    FeatureCollection::new(fc.crs, features)
}

/// A quantized geometry and how many rings had to keep their original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub geometry: Geometry,
    pub warnings: usize,
}

fn round_coord(c: Coordinate, decimals: u32) -> Coordinate {
    Coordinate::new(
        round_half_away(c.x, decimals),
        round_half_away(c.y, decimals),
    )
}

fn quantize_seq(cs: &[Coordinate], decimals: u32) -> Vec<Coordinate> {
    let mut out: Vec<Coordinate> = Vec::with_capacity(cs.len());
    for &c in cs {
        let q = round_coord(c, decimals);
        if out.last() != Some(&q) {
            out.push(q);
        }
    }
    out
}

/// Rounds every coordinate half away from zero and collapses consecutive
/// duplicates. Rings that would drop below 4 points keep their originals.
pub fn quantize(g: &Geometry, decimals: u32) -> Result<Quantized, SimplifyError> {
    if decimals > MAX_DECIMALS {
        return Err(SimplifyError::InvalidDecimals(decimals));
    }
    let mut warnings = 0;
    let mut ring = |r: &Vec<Coordinate>| {
        let q = quantize_seq(r, decimals);
        if q.len() >= 4 {
            q
        } else {
            warnings += 1;
            r.clone()
        }
    };
    let geometry = match g {
        Geometry::Point(c) => Geometry::Point(round_coord(*c, decimals)),
        Geometry::MultiPoint(cs) => Geometry::MultiPoint(quantize_seq(cs, decimals)),
        Geometry::LineString(cs) => {
            let q = quantize_seq(cs, decimals);
            if q.len() >= 2 {
                Geometry::LineString(q)
            } else {
                warnings += 1;
                g.clone()
            }
        }
        Geometry::Polygon(rings) => Geometry::Polygon(rings.iter().map(&mut ring).collect()),
        Geometry::MultiPolygon(polys) => Geometry::MultiPolygon(
            polys
                .iter()
                .map(|p| p.iter().map(&mut ring).collect())
                .collect(),
        ),
    };
    Ok(Quantized { geometry, warnings })
}

/// Quantizes every feature; returns the new collection and the total warning count.
pub fn quantize_collection(
    fc: &FeatureCollection,
    decimals: u32,
) -> Result<(FeatureCollection, usize), SimplifyError> {
    let mut warnings = 0;
    let features = fc
        .features
        .iter()
        .map(|f| {
            let q = quantize(&f.geometry, decimals)?;
            warnings += q.warnings;
            Ok(Feature {
                geometry: q.geometry,
                attributes: f.attributes.clone(),
                id: f.id.clone(),
            })
        })
        .collect::<Result<Vec<_>, SimplifyError>>()?;
    Ok((FeatureCollection::new(fc.crs, features), warnings))
}

/// Keeps exactly the named attributes, in `keep` order.
pub fn prune_attributes(
    fc: &FeatureCollection,
    keep: &[&str],
) -> Result<FeatureCollection, SimplifyError> {
    for name in keep {
        let known = fc.features.iter().any(|f| f.attributes.contains_key(*name));
        if !known {
            return Err(SimplifyError::AttributeNotFound(name.to_string()));
        }
    }
    let features = fc
        .features
        .iter()
        .map(|f| Feature {
            geometry: f.geometry.clone(),
            attributes: keep
                .iter()
                .map(|k| {
                    let v = f
                        .attributes
                        .get(*k)
                        .cloned()
                        .unwrap_or(crate::geom::Value::Null);
                    (k.to_string(), v)
                })
                .collect(),
            id: f.id.clone(),
        })
        .collect();
    Ok(FeatureCollection::new(fc.crs, features))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tolerance: f64,
    pub vertex_count_after: usize,
    pub serialized_size_bytes: usize,
    pub max_deviation_observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub vertex_count_before: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "tolerance,vertex_count_after,serialized_size_bytes,max_deviation_observed\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.tolerance,
                r.vertex_count_after,
                r.serialized_size_bytes,
                r.max_deviation_observed
            ));
        }
        out
    }
}

/// Simplifies the whole collection at each tolerance and measures the result.
///
/// Size is the GeoJSON byte length at 5 decimals. The deviation is measured
/// from each dropped vertex to the simplified segment that replaced it, which
/// bounds its distance to the simplified geometry from above.
pub fn tolerance_sweep(
    fc: &FeatureCollection,
    tolerances: &[f64],
) -> Result<SweepReport, SimplifyError> {
    if tolerances.is_empty() {
        return Err(SimplifyError::NothingToSweep);
    }
    for &t in tolerances {
        Tolerance::new(t)?;
    }
    if tolerances.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimplifyError::UnsortedTolerances);
    }
    let rows = tolerances
        .iter()
        .map(|&tol| {
            let simplified: Vec<Simplified> = fc
                .features
                .par_iter()
                .map(|f| simplify_measured(&f.geometry, tol))
                .collect();
            let max_deviation_observed = simplified
                .iter()
                .map(|s| s.max_deviation)
                .fold(0.0, f64::max);
            let out = FeatureCollection::new(
                fc.crs,
                fc.features
                    .iter()
                    .zip(simplified)
                    .map(|(f, s)| Feature {
                        geometry: s.geometry,
                        attributes: f.attributes.clone(),
                        id: f.id.clone(),
                    })
                    .collect(),
            );
            let size = write_geojson_any_crs(&out);
            SweepRow {
                tolerance: tol,
                vertex_count_after: out.vertex_count(),
                serialized_size_bytes: size,
                max_deviation_observed,
            }
        })
        .collect();
    Ok(SweepReport {
        vertex_count_before: fc.vertex_count(),
        rows,
    })
}

/// Byte length of the 5-decimal GeoJSON encoding, measured regardless of CRS.
fn write_geojson_any_crs(fc: &FeatureCollection) -> usize {
    let tagged = FeatureCollection {
        crs: crate::projection::EPSG_WGS84,
        features: fc.features.clone(),
    };
    write_geojson(&tagged, PrecisionPolicy::default())
        .map(|b| b.len())
        .unwrap_or(0)
}

/// One line of a vertex-reduction table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionRow {
    pub layer_name: String,
    pub unfiltered: u64,
    pub filtered: u64,
    pub percent_removed: f64,
}

impl ReductionRow {
    pub fn from_counts(
        layer_name: &str,
        unfiltered: u64,
        filtered: u64,
    ) -> Result<Self, SimplifyError> {
        if unfiltered == 0 {
            return Err(SimplifyError::EmptyLayer);
        }
        let percent_removed = 100.0 * (unfiltered as f64 - filtered as f64) / unfiltered as f64;
        Ok(ReductionRow {
            layer_name: layer_name.to_string(),
            unfiltered,
            filtered,
            percent_removed,
        })
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.8}",
            csv_field(&self.layer_name),
            self.unfiltered,
            self.filtered,
            self.percent_removed
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const REDUCTION_CSV_HEADER: &str = "layer,unfiltered,filtered,percent_removed";

pub fn reduction_report(
    layer_name: &str,
    before: &FeatureCollection,
    after: &FeatureCollection,
) -> Result<ReductionRow, SimplifyError> {
    let unfiltered: usize = before
        .features
        .iter()
        .map(|f| vertex_count(&f.geometry))
        .sum();
    let filtered: usize = after
        .features
        .iter()
        .map(|f| vertex_count(&f.geometry))
        .sum();
    ReductionRow::from_counts(layer_name, unfiltered as u64, filtered as u64)
}

/// Reduction rows rendered as an aligned table with grouped counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReductionTable(pub Vec<ReductionRow>);

impl ReductionTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REDUCTION_CSV_HEADER}\n");
        for r in &self.0 {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ReductionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let headers = ["Layer name", "unfiltered", "filtered", "percent removed"];
        let cells: Vec<[String; 4]> = self
            .0
            .iter()
            .map(|r| {
                [
                    r.layer_name.clone(),
                    group_thousands(r.unfiltered),
                    group_thousands(r.filtered),
                    format!("{:.8}", r.percent_removed),
                ]
            })
            .collect();
        let mut widths = headers.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        writeln!(
            f,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
            headers[0],
            headers[1],
            headers[2],
            headers[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        )?;
        for row in &cells {
            writeln!(
                f,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                row[0],
                row[1],
                row[2],
                row[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            )?;
        }
        Ok(())
    }
}

fn group_thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Value;

    fn c(x: f64, y: f64) -> Coordinate {
        Coordinate::new(x, y)
    }

    fn tol(v: f64) -> Tolerance {
        Tolerance::new(v).unwrap()
    }

    #[test]
    fn three_point_examples() {
        let pts = [c(0., 0.), c(1., 0.1), c(2., 0.)];
        assert_eq!(
            simplify_polyline(&pts, tol(0.2)).unwrap(),
            vec![c(0., 0.), c(2., 0.)]
        );
        assert_eq!(simplify_polyline(&pts, tol(0.05)).unwrap(), pts.to_vec());
    }

    #[test]
    fn zero_tolerance_drops_only_exact_collinear() {
        let straight = [c(0., 0.), c(1., 0.), c(2., 0.)];
        assert_eq!(
            simplify_polyline(&straight, tol(0.0)).unwrap(),
            vec![c(0., 0.), c(2., 0.)]
        );
        let bent = [c(0., 0.), c(1., 1e-12), c(2., 0.)];
        assert_eq!(simplify_polyline(&bent, tol(0.0)).unwrap(), bent.to_vec());
    }

    #[test]
    fn degenerate_polyline() {
        assert_eq!(
            simplify_polyline(&[c(0., 0.)], tol(1.0))
                .unwrap_err()
                .to_string(),
            "degenerate polyline"
        );
    }

    #[test]
    fn negative_tolerance_rejected() {
        assert!(Tolerance::new(-0.1).is_err());
        assert!(Tolerance::new(f64::NAN).is_err());
    }

    #[test]
    fn point_passthrough() {
        let p = Geometry::Point(c(1., 2.));
        assert_eq!(simplify_geometry(&p, tol(10.0)), p);
    }

    #[test]
    fn tiny_triangle_kept_unsimplified() {
        let ring = vec![c(0., 0.), c(0.001, 0.), c(0., 0.001), c(0., 0.)];
        let g = Geometry::Polygon(vec![ring]);
        assert_eq!(simplify_geometry(&g, tol(1.0)), g);
    }

    #[test]
    fn dense_circle() {
        let mut ring: Vec<Coordinate> = (0..360)
            .map(|i| {
                let a = (i as f64).to_radians();
                c(a.cos(), a.sin())
            })
            .collect();
        ring.push(ring[0]);
        let g = Geometry::Polygon(vec![ring.clone()]);
        let out = simplify_geometry(&g, tol(0.01));
        let Geometry::Polygon(rings) = &out else {
            panic!()
        };
        let simplified = &rings[0];
        assert!(simplified.len() <= 40, "{} points", simplified.len());
        assert_eq!(simplified.first(), simplified.last());
        for p in &ring {
            let d = simplified
                .windows(2)
                .map(|w| point_segment_distance(*p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= 0.01, "deviation {d}");
        }
    }

    #[test]
    fn quantize_examples() {
        let q = quantize(&Geometry::Point(c(-157.123456789, 21.987654321)), 5).unwrap();
        assert_eq!(q.geometry, Geometry::Point(c(-157.12346, 21.98765)));

        let line = Geometry::LineString(vec![
            c(1.000001, 2.000004),
            c(1.000004, 2.000001),
            c(3., 3.),
        ]);
        let q = quantize(&line, 5).unwrap();
        assert_eq!(
            q.geometry,
            Geometry::LineString(vec![c(1.0, 2.0), c(3., 3.)])
        );

        let mp = Geometry::MultiPoint(vec![c(1.000001, 2.000004), c(1.000004, 2.000001)]);
        assert_eq!(
            quantize(&mp, 5).unwrap().geometry,
            Geometry::MultiPoint(vec![c(1.0, 2.0)])
        );

        let g = Geometry::LineString(vec![c(-157.858, 21.31), c(-157.0, 21.0)]);
        assert_eq!(quantize(&g, 15).unwrap().geometry, g);
    }

    #[test]
    fn quantize_collapse_keeps_original_ring() {
        let ring = vec![c(0., 0.), c(0.000001, 0.), c(0., 0.000001), c(0., 0.)];
        let g = Geometry::Polygon(vec![ring]);
        let q = quantize(&g, 5).unwrap();
        assert_eq!(q.warnings, 1);
        assert_eq!(q.geometry, g);
        assert!(quantize(&g, 16).is_err());
    }

    #[test]
    fn quantize_preserves_closure() {
        let ring = vec![c(0.123456, 0.), c(1., 0.), c(1., 1.), c(0.123456, 0.)];
        let q = quantize(&Geometry::Polygon(vec![ring]), 2).unwrap();
        let Geometry::Polygon(r) = q.geometry else {
            panic!()
        };
        assert_eq!(r[0].first(), r[0].last());
    }

    fn two_attr() -> FeatureCollection {
        FeatureCollection::new(
            4326,
            vec![Feature::new(Geometry::Point(c(0., 0.)))
                .with_attribute("NAME", "Hilo")
                .with_attribute("POP", 43263.0)],
        )
    }

    #[test]
    fn prune_examples() {
        let fc = two_attr();
        let pruned = prune_attributes(&fc, &["NAME"]).unwrap();
        assert_eq!(pruned.features[0].attributes.len(), 1);
        assert_eq!(
            pruned.features[0].attributes["NAME"],
            Value::Text("Hilo".into())
        );

        assert_eq!(prune_attributes(&fc, &["NAME", "POP"]).unwrap(), fc);
        let reordered = prune_attributes(&fc, &["POP", "NAME"]).unwrap();
        assert_eq!(
            reordered.features[0].attributes.keys().collect::<Vec<_>>(),
            ["POP", "NAME"]
        );
        assert_eq!(
            prune_attributes(&fc, &["BOGUS"]).unwrap_err().to_string(),
            "attribute BOGUS not found"
        );
    }

    #[test]
    fn sweep_zero_tolerance_keeps_count() {
        let fc = FeatureCollection::new(
            4326,
            vec![Feature::new(Geometry::LineString(vec![
                c(0., 0.),
                c(1., 0.5),
                c(2., 0.),
            ]))],
        );
        let r = tolerance_sweep(&fc, &[0.0]).unwrap();
        assert_eq!(r.rows[0].vertex_count_after, 3);
        assert_eq!(r.vertex_count_before, 3);
        assert_eq!(
            tolerance_sweep(&fc, &[]).unwrap_err().to_string(),
            "nothing to sweep"
        );
        assert!(tolerance_sweep(&fc, &[0.1, 0.01]).is_err());
    }

    #[test]
    fn reduction_examples() {
        let r = ReductionRow::from_counts("slr_Potent_fld_hws_3pt2ft", 3122, 1477).unwrap();
        assert!((r.percent_removed - 52.69058296).abs() < 1e-6);
        let r = ReductionRow::from_counts("slr_passive_fld_3pt2ft", 2948014, 259675).unwrap();
        assert!((r.percent_removed - 91.19152758).abs() < 1e-6);

        let fc = two_attr();
        assert_eq!(
            reduction_report("x", &fc, &fc).unwrap().percent_removed,
            0.0
        );
        let empty = FeatureCollection::new(4326, vec![]);
        assert_eq!(
            reduction_report("x", &empty, &empty)
                .unwrap_err()
                .to_string(),
            "empty layer"
        );
    }

    #[test]
    fn reduction_rendering() {
        let t = ReductionTable(vec![ReductionRow::from_counts(
            "slr_Potent_fld_hws_3pt2ft",
            3122,
            1477,
        )
        .unwrap()]);
        let text = t.to_string();
        assert!(text.contains("3,122"));
        assert!(text.contains("52.69058296"));
        assert_eq!(
            t.to_csv(),
            "layer,unfiltered,filtered,percent_removed\nslr_Potent_fld_hws_3pt2ft,3122,1477,52.69058296\n"
        );
        assert_eq!(group_thousands(2948014), "2,948,014");
        assert_eq!(group_thousands(986), "986");
    }
}
