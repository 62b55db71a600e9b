//! Legacy ASCII VTK snapshots: `|ψ_h|²` and `A_h` as point data, `B_h` as
//! cell data.

use std::fmt::Write as _;
use std::path::Path;

use crate::fe::State;
use crate::tdgl::MagneticScheme;
use crate::Result;

const VERTEX_BARY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// `A_h` at each vertex, averaged over the adjacent triangles (the edge
/// field is discontinuous in its normal component).
pub fn vertex_average(scheme: &dyn MagneticScheme, a: &[f64]) -> Vec<[f64; 2]> {
    let mesh = &scheme.sys().mesh;
    let mut sum = vec![[0.0; 2]; mesh.vertices.len()];
    let mut count = vec![0usize; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for (k, &v) in tri.iter().enumerate() {
            let x = scheme.vector_at(a, t, &VERTEX_BARY[k]);
            sum[v][0] += x[0];
            sum[v][1] += x[1];
            count[v] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| if c == 0 { [0.0; 2] } else { [s[0] / c as f64, s[1] / c as f64] })
        .collect()
}

pub fn vtk_string(scheme: &dyn MagneticScheme, state: &State) -> String {
    let mesh = &scheme.sys().mesh;
    let nv = mesh.vertices.len();
    let nt = mesh.n_triangles();
    let mut s = String::new();
    // writing into a String cannot fail
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "tdgl {} step {} time {:.10e}", scheme.name(), state.step, state.time);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.10e} {:.10e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    let _ = writeln!(s, "SCALARS psi_sq double 1\nLOOKUP_TABLE default");
    for i in 0..nv {
        let _ = writeln!(s, "{:.10e}", state.psi_at(i).norm_sqr());
    }
    let _ = writeln!(s, "VECTORS A double");
    for a in vertex_average(scheme, &state.a) {
        let _ = writeln!(s, "{:.10e} {:.10e} 0", a[0], a[1]);
    }
    let _ = writeln!(s, "CELL_DATA {nt}");
    let _ = writeln!(s, "SCALARS B double 1\nLOOKUP_TABLE default");
    for t in 0..nt {
        let _ = writeln!(s, "{:.10e}", scheme.curl_at(&state.a, t));
    }
    s
}

pub fn write_vtk(path: &Path, scheme: &dyn MagneticScheme, state: &State) -> Result<()> {
    std::fs::write(path, vtk_string(scheme, state))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::FeSystem;
    use crate::forms::{assemble_static, Params};
    use crate::mesh::{build_domain, DomainSpec};
    use crate::tdgl::MixedScheme;
    use crate::Complex64;

    #[test]
    fn snapshot_layout_and_values() {
        let sys = FeSystem::new(build_domain(&DomainSpec::l_shape(0.5)).unwrap());
        let mats = assemble_static(&sys);
        let scheme = MixedScheme::new(&sys, &mats, Params { eta: 1.0, kappa: 1.0, tau: 0.1 }).unwrap();
        // A = (−y, x)/2 has curl 1 and is reproduced exactly by the edge space
        let a = sys.interpolate_edge(|x| [-0.5 * x[1], 0.5 * x[0]]);
        let psi = sys.interpolate_order(|x| Complex64::new(x[0], 2.0));
        let state = State { psi, phi: vec![0.0; sys.n_v()], a, step: 3, time: 0.3 };
        let text = vtk_string(&scheme, &state);
        let lines: Vec<&str> = text.lines().collect();
        let (nv, nt) = (sys.mesh.vertices.len(), sys.mesh.n_triangles());
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&format!("POINTS {nv} double").as_str()));
        assert!(lines.contains(&format!("CELLS {nt} {}", 4 * nt).as_str()));
        assert_eq!(lines.iter().filter(|l| **l == "5").count(), nt);
        assert_eq!(lines.len(), 4 + 1 + nv + 1 + nt + 1 + nt + 1 + 2 + nv + 1 + nv + 1 + 2 + nt);

        let at = |header: &str| lines.iter().position(|l| *l == header).unwrap();
        let psi0 = at("SCALARS psi_sq double 1") + 2;
        for (i, p) in sys.mesh.vertices.iter().enumerate() {
            let v: f64 = lines[psi0 + i].parse().unwrap();
            assert!((v - (p[0] * p[0] + 4.0)).abs() <= 1e-9);
        }
        let a0 = at("VECTORS A double") + 1;
        for (i, p) in sys.mesh.vertices.iter().enumerate() {
            let xs: Vec<f64> = lines[a0 + i].split(' ').map(|w| w.parse().unwrap()).collect();
            assert!((xs[0] + 0.5 * p[1]).abs() <= 1e-9 && (xs[1] - 0.5 * p[0]).abs() <= 1e-9);
        }
        let b0 = at("SCALARS B double 1") + 2;
        for t in 0..nt {
            let b: f64 = lines[b0 + t].parse().unwrap();
            assert!((b - 1.0).abs() <= 1e-9);
        }
    }
}
