//! Fixtures shared by the kernel benchmarks.

use monohom::Mesh;

/// A smooth non-polynomial nodal field on `mesh`.
pub fn smooth_field(mesh: &Mesh) -> Vec<f64> {
    mesh.interpolate(|x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[0] * x[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_matches_mesh() {
        let mesh = Mesh::periodic(16).unwrap();
        assert_eq!(smooth_field(&mesh).len(), mesh.n_nodes());
    }
}
