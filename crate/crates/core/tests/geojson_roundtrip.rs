use geovuln::geojson::{read_geojson, write_geojson};
use geovuln::precision::PrecisionPolicy;
use geovuln::simplify::quantize_collection;
use geovuln::testkit::random::{random_collection, KINDS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn read_of_write_equals_quantize() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let five = PrecisionPolicy::new(5).unwrap();
    let fifteen = PrecisionPolicy::new(15).unwrap();
    for &kind in KINDS.iter().cycle().take(25) {
        let fc = random_collection(&mut rng, kind, 12);
        let bytes = write_geojson(&fc, five).unwrap();
        let (expected, _) = quantize_collection(&fc, 5).unwrap();
        assert_eq!(read_geojson(&bytes).unwrap(), expected, "{kind:?}");
        let long = write_geojson(&fc, fifteen).unwrap();
        assert!(
            bytes.len() < long.len(),
            "{kind:?}: {} vs {}",
            bytes.len(),
            long.len()
        );
    }
}

#[test]
fn output_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fc = random_collection(&mut rng, KINDS[3], 10);
    let p = PrecisionPolicy::default();
    assert_eq!(
        write_geojson(&fc, p).unwrap(),
        write_geojson(&fc.clone(), p).unwrap()
    );
}
