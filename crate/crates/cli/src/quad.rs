use std::fmt::Write as _;

use anyhow::{bail, Result};
use tot_core::TriMesh;

/// OBJ text of the quad mesh obtained by merging each pair of triangles of
/// an `n x n` image grid back into its quad.
pub fn quad_obj(mesh: &TriMesh, n: usize) -> Result<String> {
    if n < 2 || mesh.num_vertices() != n * n || mesh.num_faces() != 2 * (n - 1) * (n - 1) {
        bail!("mesh is not an {n} x {n} image grid");
    }
    let mut out = String::new();
    for v in 0..mesh.num_vertices() {
        let p = mesh.pos2(v);
        let _ = writeln!(out, "v {} {} 0", p[0], p[1]);
    }
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let v = j * n + i;
            let q = 2 * (j * (n - 1) + i);
            let (a, b) = (mesh.faces()[q], mesh.faces()[q + 1]);
            if a != [v, v + 1, v + n + 1] || b != [v, v + n + 1, v + n] {
                bail!("faces {q} and {} do not form grid quad {v}", q + 1);
            }
            let _ = writeln!(out, "f {} {} {} {}", v + 1, v + 2, v + n + 2, v + n + 1);
        }
    }
    Ok(out)
}
