use gaal_core::synthgen::{sweep_specs, SweepAxis};
use gaal_core::{gen_synthetic, load_csv, Family, SynthSpec};
use tempfile::TempDir;

#[test]
fn generated_csv_reloads_unchanged() {
    let dir = TempDir::new().unwrap();
    for family in Family::ALL {
        let spec = SynthSpec {
            irrelevant_ratio: 0.5,
            seed: 3,
            ..SynthSpec::new(family, 600, 4)
        };
        let ds = gen_synthetic(&spec).unwrap();
        let path = dir.path().join(format!("{family}.csv"));
        ds.write_csv(&path).unwrap();
        let back = load_csv(&path, Some("label")).unwrap();
        assert_eq!(back.features, ds.features, "{family}");
        assert_eq!(back.labels, ds.labels);
    }
}

#[test]
fn every_sweep_dataset_has_the_expected_shape() {
    let base = SynthSpec::new(Family::SingleCluster, 1000, 2);
    for axis in [SweepAxis::Dimension, SweepAxis::Irrelevant] {
        for spec in sweep_specs(axis, &base) {
            let ds = gen_synthetic(&spec).unwrap();
            assert_eq!((ds.n(), ds.d()), (1000, spec.d));
            assert_eq!(ds.outlier_count(), Some(20));
        }
    }
}

#[test]
fn normals_outnumber_outliers_in_the_dense_region() {
    let ds = gen_synthetic(&SynthSpec::new(Family::SingleCluster, 2000, 2)).unwrap();
    let labels = ds.labels.as_ref().unwrap();
    let center: Vec<f64> = (0..2)
        .map(|c| {
            let col = ds.features.column(c);
            let normal: Vec<f64> = col
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == 0)
                .map(|(v, _)| *v)
                .collect();
            normal.iter().sum::<f64>() / normal.len() as f64
        })
        .collect();
    let near = |i: usize| -> bool {
        let row = ds.features.row(i);
        row.iter()
            .zip(&center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            < 0.1
    };
    let normals_near = (0..ds.n()).filter(|&i| labels[i] == 0 && near(i)).count();
    let outliers_near = (0..ds.n()).filter(|&i| labels[i] == 1 && near(i)).count();
    assert!(normals_near > 900, "{normals_near}");
    assert!(outliers_near < 5, "{outliers_near}");
}
