use corrmine::cpois::{cp_pmf, CompoundPoisson, IncrementDist};
use corrmine::geometry::SimRng;
use corrmine::io::{read_data, read_matrix_csv, read_matrix_file, read_symmetric, write_matrix_file, write_pmf_csv};
use corrmine::scores::sample_correlation;
use corrmine::sim::sample_matrix_normal;
use corrmine::sparsity::make_diagonal;

#[test]
fn data_files_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = make_diagonal(&[1.0; 6]).unwrap();
    let x = sample_matrix_normal(&sigma, 9, &mut SimRng::new(1, 0)).unwrap();
    for name in ["data.csv", "data.cmx"] {
        let path = dir.path().join(name);
        write_matrix_file(x.values(), &path).unwrap();
        assert_eq!(read_data(&path).unwrap(), x, "{name}");
    }
    let binary = std::fs::read(dir.path().join("data.cmx")).unwrap();
    assert_eq!(&binary[..4], b"CMX1");
    assert_eq!(u32::from_le_bytes(binary[4..8].try_into().unwrap()), 9);
    assert_eq!(u32::from_le_bytes(binary[8..12].try_into().unwrap()), 6);
    assert_eq!(f64::from_le_bytes(binary[12..20].try_into().unwrap()), x.values()[(0, 0)]);
    assert_eq!(f64::from_le_bytes(binary[20..28].try_into().unwrap()), x.values()[(0, 1)]);
}

#[test]
fn symmetric_matrices_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = make_diagonal(&[1.0; 5]).unwrap();
    let r = sample_correlation(&sample_matrix_normal(&sigma, 12, &mut SimRng::new(2, 0)).unwrap()).unwrap();
    let path = dir.path().join("r.csv");
    write_matrix_file(r.as_matrix(), &path).unwrap();
    assert_eq!(read_symmetric(&path).unwrap(), r);

    std::fs::write(&path, "1,0.5\n0.4,1\n").unwrap();
    assert!(read_symmetric(&path).is_err());
}

#[test]
fn headered_csv_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "gene_a, gene_b\n1.5, 2\n-3, 4e-2\n").unwrap();
    let m = read_matrix_file(&path).unwrap();
    assert_eq!((m.nrows(), m.ncols()), (2, 2));
    assert_eq!(m[(1, 1)], 0.04);
    assert!(read_matrix_file(&dir.path().join("absent.csv")).is_err());
}

#[test]
fn pmf_export_parses_back() {
    let cp = CompoundPoisson::new(1.3, IncrementDist::new(vec![0.5, 0.2, 0.3]).unwrap()).unwrap();
    let d = cp_pmf(&cp, 1e-12).unwrap();
    let mut buf = Vec::new();
    write_pmf_csv(&d, &mut buf).unwrap();
    let table = read_matrix_csv(buf.as_slice()).unwrap();
    assert_eq!(table.nrows(), d.pmf().len());
    for (k, &p) in d.pmf().iter().enumerate() {
        assert_eq!(table[(k, 0)], k as f64);
        assert_eq!(table[(k, 1)], p);
    }
}
