mod common;

use momtopo::operators::{build_mesh, load_operators, save_operators, AssemblyConfig, ExcitationSpec, OperatorSet, PlateSpec};
use momtopo::reanalysis::{LinearSystem, ReanalysisState};
use momtopo::C64;

/// Input impedance of a thin strip fed across its whole width at x = 0.
fn strip_impedance(nx: usize, ny: usize) -> C64 {
    let spec = PlateSpec { length_x: 1.0, length_y: 0.04, nx, ny, ka: 1.5 };
    let mesh = build_mesh(&spec).unwrap();
    let gap = mesh.dofs_on_vertical_line(0.0, 1e-9);
    assert_eq!(gap.len(), ny);
    let mut cfg = AssemblyConfig::for_plate(&spec, &mesh);
    cfg.excitation = ExcitationSpec::DeltaGap { dofs: gap.clone(), voltage: C64::new(1.0, 0.0) };
    let ops = OperatorSet::assemble(&mesh, &cfg).unwrap();
    let sys = LinearSystem::from_operators(&ops);
    let st = ReanalysisState::new(&sys, &(0..ops.n_dof()).collect::<Vec<_>>()).unwrap();
    let i = st.full_current();
    let feed: C64 = gap.iter().map(|&d| i[d]).sum();
    for &d in &gap {
        assert!(i[d].re * feed.re > 0.0, "gap edges must carry co-directed current");
    }
    C64::new(1.0, 0.0) / feed
}

#[test]
fn strip_dipole_impedance_converges() {
    let z: Vec<C64> = [(8, 1), (16, 2), (32, 4)].iter().map(|&(nx, ny)| strip_impedance(nx, ny)).collect();
    let steps = [(z[1] - z[0]).norm(), (z[2] - z[1]).norm()];
    assert!(steps[1] < steps[0], "impedances {z:?}");
    // near the first resonance of a thin half-wave strip
    assert!(z[2].re > 30.0 && z[2].re < 150.0, "{z:?}");
}

#[test]
fn container_round_trip_is_lossless() {
    let ops = common::plate(5, 3, 0.1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.momx");
    save_operators(&ops, &path).unwrap();
    let back = load_operators(&path).unwrap();
    assert_eq!(back, ops);
}
