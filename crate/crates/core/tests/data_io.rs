use std::io::Write;

use rmtkd::data::{
    load_csv, planted_subspace_task, sample_noise_matrix, sample_spiked, split, write_csv,
    CsvSchema, PlantedTaskSpec, Spike, SplitSpec,
};
use rmtkd::Error;

#[test]
fn exported_dataset_loads_back_identically() {
    let task = planted_subspace_task(&PlantedTaskSpec {
        input_dim: 6,
        intrinsic_dim: 3,
        num_classes: 4,
        samples: 200,
        noise_sigma: 0.5,
        margin: 0.0,
        seed: 4,
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("planted.csv");
    write_csv(&task.dataset, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_csv(&path, &CsvSchema::default()).unwrap();
    assert_eq!(back.features(), task.dataset.features());
    assert_eq!(back.labels(), task.dataset.labels());
    assert_eq!(back.num_classes(), 4);
}

#[test]
fn file_errors_are_typed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "a,b,label\n1,2,x\n3,abc,y").unwrap();
    drop(f);
    match load_csv(&path, &CsvSchema::default()) {
        Err(Error::Parse { row, column, .. }) => {
            assert_eq!(row, 2);
            assert_eq!(column, "b");
        }
        other => panic!("{other:?}"),
    }
    let schema = CsvSchema { features: None, label: "class".into() };
    assert!(matches!(load_csv(&path, &schema), Err(Error::Schema(_))));
    assert!(matches!(
        load_csv(&dir.path().join("missing.csv"), &CsvSchema::default()),
        Err(Error::Io { .. })
    ));
}

#[test]
fn generators_are_pure_functions_of_their_seed() {
    assert_eq!(sample_noise_matrix(5, 7, 2.0, 3), sample_noise_matrix(5, 7, 2.0, 3));
    assert_ne!(sample_noise_matrix(5, 7, 2.0, 3), sample_noise_matrix(5, 7, 2.0, 4));
    let a = sample_spiked(8, 50, 1.0, &[Spike::new(4.0)], 9).unwrap();
    let b = sample_spiked(8, 50, 1.0, &[Spike::new(4.0)], 9).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn thousand_samples_give_eighty_calibration_examples() {
    let task = planted_subspace_task(&PlantedTaskSpec {
        input_dim: 10,
        intrinsic_dim: 4,
        num_classes: 5,
        samples: 1000,
        noise_sigma: 1.0,
        margin: 0.05,
        seed: 1,
    })
    .unwrap();
    let counts = task.dataset.class_counts();
    assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    let s = split(&task.dataset, &SplitSpec::new(0.8, 0.2, 5)).unwrap();
    assert_eq!(s.train.len(), 800);
    assert_eq!(s.calibration.len(), 80);
    let again = split(&task.dataset, &SplitSpec::new(0.8, 0.2, 5)).unwrap();
    assert_eq!(s.calibration_indices, again.calibration_indices);
    assert_eq!(s.val_indices, again.val_indices);
}
