use geovuln::geojson::{read_geojson, write_geojson};
use geovuln::precision::PrecisionPolicy;
use geovuln::raster::{read_pyramid, SampleFormat};
use geovuln::simplify::quantize_collection;
use geovuln::tabular::VulnerabilityStore;
use geovuln::testkit::geotiff::{write_geotiff, ByteOrder};
use geovuln::testkit::random::{coastline, random_collection, random_grid, Kind};
use geovuln::testkit::shapefile::write_shapefile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("geovuln").chain(args.iter().copied());
    let code = geovuln_cli::run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_shapefile_fixture(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fc = random_collection(&mut rng, Kind::Polygon, 12);
    let b = write_shapefile(&fc);
    std::fs::write(dir.join(format!("{name}.shx")), &b.shx).unwrap();
    std::fs::write(dir.join(format!("{name}.dbf")), &b.dbf).unwrap();
    let shp = dir.join(format!("{name}.shp"));
    std::fs::write(&shp, &b.shp).unwrap();
    shp
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = run(&[]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("convert"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["convert", "--bogus"]).code, 1);
    assert_eq!(run(&["report", "--counts", "nocounts"]).code, 1);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.geojson");
    let o = run(&[
        "convert",
        "--in",
        "/nonexistent/x.geojson",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.starts_with("error:"));
}

#[test]
fn shapefile_without_crs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let shp = write_shapefile_fixture(dir.path(), "parcels", 1);
    let o = run(&[
        "convert",
        "--in",
        p(&shp),
        "--out",
        p(&dir.path().join("o.geojson")),
    ]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("--crs"));
}

#[test]
fn report_prints_reduction_table() {
    let o = run(&["report", "--counts", "Census Tracts=3122:1477"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("52.69058296"));
    assert!(o.stdout.contains("3,122"));
    let o = run(&[
        "report",
        "--format",
        "csv",
        "--counts",
        "Census Tracts=3122:1477",
    ]);
    assert_eq!(
        o.stdout,
        "layer,unfiltered,filtered,percent_removed\nCensus Tracts,3122,1477,52.69058296\n"
    );
}

#[test]
fn convert_shapefile_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let shp = write_shapefile_fixture(dir.path(), "parcels", 3);
    let out = dir.path().join("web/parcels.geojson");
    let report = dir.path().join("reduction.csv");
    let o = run(&[
        "convert",
        "--in",
        p(&shp),
        "--crs",
        "4326",
        "--tol",
        "0.001",
        "--keep",
        "NAME,VALUE",
        "--out",
        p(&out),
        "--report",
        p(&report),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.starts_with("Layer name"));

    let fc = read_geojson(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(fc.features.len(), 12);
    for f in &fc.features {
        assert_eq!(f.attributes.keys().collect::<Vec<_>>(), ["NAME", "VALUE"]);
        for c in f.geometry.coords() {
            assert_eq!((c.x * 1e5).round() / 1e5, c.x);
        }
    }
    let (requantized, _) = quantize_collection(&fc, 5).unwrap();
    assert_eq!(requantized, fc);

    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("layer,unfiltered,filtered,percent_removed\nparcels,"));

    // A second run appends rather than overwrites.
    run(&[
        "convert",
        "--in",
        p(&shp),
        "--crs",
        "4326",
        "--out",
        p(&out),
        "--name",
        "again",
        "--report",
        p(&report),
    ]);
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let o = run(&["report", p(&report)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("again"));
}

#[test]
fn convert_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let shp = write_shapefile_fixture(dir.path(), "a", 9);
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("o{i}.geojson"));
            assert_eq!(
                run(&[
                    "convert",
                    "--in",
                    p(&shp),
                    "--crs",
                    "4326",
                    "--tol",
                    "0.0005",
                    "--out",
                    p(&out)
                ])
                .code,
                0
            );
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let shp = write_shapefile_fixture(dir.path(), "cfg", 5);
    let cfg = dir.path().join("pipeline.json");
    let outdir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"source_crs":4326,"decimals":3,"output_dir":{:?}}}"#,
            p(&outdir)
        ),
    )
    .unwrap();
    let o = run(&["--config", p(&cfg), "convert", "--in", p(&shp)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let fc = read_geojson(&std::fs::read(outdir.join("cfg.geojson")).unwrap()).unwrap();
    assert!(fc.features[0]
        .geometry
        .coords()
        .all(|c| (c.x * 1e3).round() / 1e3 == c.x));

    let o = run(&[
        "--config",
        p(&cfg),
        "convert",
        "--in",
        p(&shp),
        "--decimals",
        "5",
    ]);
    assert_eq!(o.code, 0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"tolerance":-1}"#).unwrap();
    assert_eq!(
        run(&["--config", p(&bad), "report", "--counts", "a=1:1"]).code,
        1
    );
}

#[test]
fn sweep_writes_csv_in_tolerance_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fc = coastline(&mut rng, 2, 2000);
    let input = dir.path().join("coast.geojson");
    std::fs::write(
        &input,
        write_geojson(&fc, PrecisionPolicy::new(15).unwrap()).unwrap(),
    )
    .unwrap();
    let o = run(&["sweep", "--in", p(&input), "--tol", "0.001,0.0001,0.0005"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines.len(), 4);
    let tols: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(tols, [0.0001, 0.0005, 0.001]);
    assert_eq!(run(&["sweep", "--in", p(&input), "--tol", "-1"]).code, 1);
}

#[test]
fn csv_builds_store_with_group_splits() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("income.csv"),
        "GEOID,Median_2019,Median_2019_MOE,Median_2020\n150010201001,\"52,000\",1200,54000\n150010201002,61000,900,\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("age.csv"),
        "GEOID,Over65_Total,Over65_Female,Under5_Total,Under5_Female\n150010201001,10,6,3,1\n",
    )
    .unwrap();
    let store_path = dir.path().join("vulnerability_store.json");
    let o = run(&["csv", "--in", p(dir.path()), "--out", p(&store_path)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let store = VulnerabilityStore::from_json(&std::fs::read(&store_path).unwrap()).unwrap();
    let ids: Vec<&str> = store.datasets.keys().map(String::as_str).collect();
    assert_eq!(
        ids,
        ["age.Female", "age.Total", "income.2019", "income.2020"]
    );
    assert_eq!(store.datasets["age.Female"].metrics, ["Over65", "Under5"]);
    assert_eq!(store.datasets["income.2019"].metrics, ["Median"]);
    let rec = &store.datasets["income.2019"].records["150010201001"];
    assert_eq!(rec[0].as_f64(), Some(52000.0));
    assert!(o.stdout.contains("income.2020: 2 records"));
}

#[test]
fn csv_reports_structural_errors() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("broken.csv");
    std::fs::write(&f, "GEOID,a\n1,2,3\n").unwrap();
    let o = run(&["csv", "--in", p(&f), "--out", p(&dir.path().join("s.json"))]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("broken.csv"));
}

#[test]
fn raster_builds_pyramid() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = random_grid(&mut rng, 64, 32, SampleFormat::F32, Some(-9999.0), 0.1);
    let tif = dir.path().join("flood.tif");
    std::fs::write(&tif, write_geotiff(&grid, ByteOrder::Big, 5)).unwrap();
    let out = dir.path().join("rasters/flood.pyramid");
    let o = run(&[
        "raster",
        "--in",
        p(&tif),
        "--out",
        p(&out),
        "--method",
        "nearest",
        "--levels",
        "3",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let pyr = read_pyramid(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(pyr.levels.len(), 4);
    assert_eq!(pyr.base(), &grid);
    assert!(o.stdout.contains("level 3: 8x4"));
    assert_eq!(
        run(&[
            "raster",
            "--in",
            p(&tif),
            "--out",
            p(&out),
            "--method",
            "cubic"
        ])
        .code,
        1
    );
}
