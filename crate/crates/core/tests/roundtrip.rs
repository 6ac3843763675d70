use nekhoro_core::dynamics::{integrate, IntegratorConfig, State, Trajectory};
use nekhoro_core::harness::{benchmark_spec, emit_outputs, read_scan_csv, run_scan, InitialConditions, ScanConfig};
use nekhoro_core::model::SystemSpec;
use nekhoro_core::planner::{gevrey_exponents, Exact, GevreyPlan};
use nekhoro_core::resonance_lattice::{smith_normal_form, IntMatrix, SmithDecomposition};

#[test]
fn spec_json_roundtrip() {
    let spec = benchmark_spec(1e-3);
    let back = SystemSpec::from_json(&spec.to_json().unwrap()).unwrap();
    assert_eq!(spec, back);
}

#[test]
fn spec_requires_schema_version() {
    let mut doc: serde_json::Value = serde_json::from_str(&benchmark_spec(1e-3).to_json().unwrap()).unwrap();
    doc.as_object_mut().unwrap().remove("schema_version");
    assert!(SystemSpec::from_json(&doc.to_string()).is_err());
    doc["schema_version"] = 2.into();
    assert!(SystemSpec::from_json(&doc.to_string()).is_err());
}

#[test]
fn trajectory_csv_is_lossless() {
    let spec = benchmark_spec(1e-2);
    let initial = State::new(vec![0.1, 0.2, 0.3], vec![0.31, -0.2, 0.05], 0.0).unwrap();
    let config = IntegratorConfig { sample_stride: 7, ..Default::default() };
    let traj = integrate(&spec, &initial, 3.0, &config).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let back = Trajectory::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.samples, traj.samples);
}

#[test]
fn scan_csv_is_lossless() {
    let config = ScanConfig {
        eps_grid: vec![1e-2, 1e-3],
        initial_conditions: InitialConditions::Random { count: 2, seed: 11 },
        t_max: 2.0,
        ..ScanConfig::benchmark()
    };
    let result = run_scan(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&result, dir.path()).unwrap();
    assert_eq!(read_scan_csv(&dir.path().join("scan.csv")).unwrap(), result.records);
}

#[test]
fn plan_json_roundtrip() {
    let plan = gevrey_exponents(4, &Exact::integer(2), &"1/100".parse().unwrap()).unwrap();
    let back: GevreyPlan = serde_json::from_str(&serde_json::to_string(&plan).unwrap()).unwrap();
    assert_eq!(plan, back);
}

#[test]
fn smith_decomposition_json_roundtrip() {
    let l = IntMatrix::from_rows(vec![vec![4, 6, 2], vec![1, -3, 5]]).unwrap();
    let s = smith_normal_form(&l).unwrap();
    let back: SmithDecomposition = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert!(back.verify(&l));
}
