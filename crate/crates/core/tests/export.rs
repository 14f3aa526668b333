mod common;

use tot_core::mesh::{load_mesh, MeshFormat};
use tot_core::pipeline::{trajectories_svg, tt_ot, write_frame_summary_csv, write_frames, write_psi_csv, MeasureConfig, TotConfig};

use common::two_blobs;

#[test]
fn frames_round_trip() {
    let m = two_blobs(8);
    let cfg = TotConfig { measure: MeasureConfig::Image { k: 2.0, delta: 0.1 }, ..Default::default() };
    let seq = tt_ot(&m, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_frames(&seq, dir.path(), MeshFormat::Obj).unwrap();
    assert_eq!(paths.len(), seq.frames.len());
    assert!(paths[0].ends_with("frame_0000.obj"));
    for (p, f) in paths.iter().zip(&seq.frames) {
        let back = load_mesh(p, MeshFormat::Obj).unwrap();
        assert_eq!(back.faces(), f.mesh.faces());
        for v in 0..back.num_vertices() {
            let (a, b) = (back.pos2(v), f.mesh.pos2(v));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    let mut csv = Vec::new();
    write_frame_summary_csv(&seq, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().count(), seq.frames.len() + 1);
    assert!(csv.starts_with("frame,t,iter,grad_norm,rho_max,flips,corrected\n"));

    let mut psi = Vec::new();
    write_psi_csv(&seq, &mut psi).unwrap();
    assert_eq!(String::from_utf8(psi).unwrap().lines().count(), 1 + seq.frames.len() * m.num_vertices());

    let svg = trajectories_svg(&seq, 400.0, 3);
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), m.num_vertices().div_ceil(3));
    assert_eq!(svg, trajectories_svg(&seq, 400.0, 3));
}
