use footprint_core::evaluation::expansion_metrics;
use footprint_core::propagation::{
    binarize, propagate_all_directions, propagate_footprints, single_frame_footprints,
    PropagationParams,
};
use footprint_core::synth::{coverage_check, generate_scene, SceneSpec};

#[test]
fn default_scene_expands_and_stays_on_walkable_ground() {
    let params = PropagationParams::default();
    let spec = SceneSpec::default();
    let (seq, masks) = generate_scene(&spec, &params).unwrap();
    let mid = seq.frames()[seq.frames().len() / 2].frame_index;
    let full = binarize(&propagate_footprints(&seq, mid, &params).unwrap()).count_ones();
    let best_single = seq
        .frames()
        .iter()
        .map(|f| binarize(&single_frame_footprints(&seq, f.frame_index, &params).unwrap()).count_ones())
        .max()
        .unwrap();
    println!("full {full}, best single {best_single}, ratio {:.2}", full as f64 / best_single as f64);
    assert!(best_single > 0);
    assert!(full as f64 >= 5.0 * best_single as f64);

    let report = coverage_check(&seq, &masks, &params).unwrap();
    assert!(report.checked > 0);
    assert!(report.is_clean(), "{:?}", report.violations);
}

#[test]
fn propagation_reduces_missing_ground() {
    let params = PropagationParams::default();
    for seed in [1, 2, 3] {
        let spec = SceneSpec {
            seed,
            ..SceneSpec::default()
        };
        let (seq, masks) = generate_scene(&spec, &params).unwrap();
        let mid = seq.frames().len() / 2;
        let gt = &masks[mid].mask;
        let r = seq.frames()[mid].frame_index;
        let full = expansion_metrics(&binarize(&propagate_footprints(&seq, r, &params).unwrap()), gt).unwrap();
        let single = expansion_metrics(&binarize(&single_frame_footprints(&seq, r, &params).unwrap()), gt).unwrap();
        assert!(full.missing_fn.unwrap() < single.missing_fn.unwrap(), "seed {seed}");
    }
}

#[test]
fn scene_direction_maps_are_unit() {
    let params = PropagationParams::default();
    let (seq, _) = generate_scene(&SceneSpec::default(), &params).unwrap();
    let mut present = 0;
    for map in propagate_all_directions(&seq, &params).unwrap() {
        for d in map.grid.as_slice().iter().flatten() {
            present += 1;
            assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-9);
        }
    }
    assert!(present > 0);
}
