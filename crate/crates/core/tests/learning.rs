use cip_core::learning::{
    learn_table, load_table_file, quantized_classify, reachable_slice, save_table_file, GridSpec, LearnSpec,
    SlicePlane,
};
use cip_core::validation::{order_independent, reconstruction_error};
use cip_core::{CipParams, EquilibriumIndex, MeasurementMap, SimSettings};

fn tiny() -> LearnSpec {
    let mut spec = LearnSpec::reference(2);
    spec.grid = GridSpec::uniform(vec![[-0.1, 0.3], [-2.0, 6.0], [-0.2, 0.2], [-2.0, 3.0]], 2).unwrap();
    spec.settings = SimSettings { horizon: 40.0, ..SimSettings::default() };
    spec
}

#[test]
fn learning_is_order_and_thread_independent() {
    assert!(order_independent(&tiny(), &CipParams::default()).unwrap());
}

#[test]
fn labels_partition_the_box() {
    let r = learn_table(&tiny(), &CipParams::default(), None).unwrap();
    let h = r.table.histogram();
    assert_eq!(h.iter().sum::<usize>(), 16);
    assert_eq!(r.infeasible + r.failed, 0);
    assert_eq!(h[0], r.unconverged);
}

#[test]
fn file_round_trip_and_lookup() {
    let p = CipParams::default();
    let t = learn_table(&tiny(), &p, None).unwrap().table;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    save_table_file(&t, &path).unwrap();
    let back = load_table_file(&path, &p).unwrap();
    assert_eq!(back, t);

    let map = MeasurementMap::four_dim(1.0, 0.3);
    for cell in t.grid().cells() {
        let y = t.grid().cell_center(&cell).unwrap();
        let s = map.reconstruct(&y).unwrap();
        assert_eq!(quantized_classify(&s, &back, &map), t.label(&cell).unwrap());
    }
    let outside = map.reconstruct(&cip_core::control::Measurement::new(&[1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
    assert_eq!(quantized_classify(&outside, &back, &map), EquilibriumIndex::UNCLASSIFIED);
}

#[test]
fn slice_cells_match_table_labels() {
    let t = learn_table(&tiny(), &CipParams::default(), None).unwrap().table;
    let s = reachable_slice(&t, &SlicePlane { free: [0, 2], fixed: vec![0.0, -1.0, 0.0, 1.0] }).unwrap();
    for r in 1..=2 {
        for c in 1..=2 {
            let mut i = s.anchor.clone();
            i.0[0] = r;
            i.0[2] = c;
            assert_eq!(s.label(r, c), t.label(&i).unwrap());
        }
    }
}

#[test]
fn reconstruction_is_rigid_over_the_reference_box() {
    assert!(reconstruction_error(&CipParams::default(), &GridSpec::reference(1), 2000, 3) < 1e-12);
}
