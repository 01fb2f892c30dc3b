use crate::error::{Error, Result};
use crate::grid::Grid;

/// Horn 3×3 gradients `(dz/dx, dz/dy)`; border cells copy the nearest interior value.
pub fn horn_gradients(elevation: &Grid<f64>, resolution: f64) -> Result<(Grid<f64>, Grid<f64>)> {
    let (w, h) = (elevation.width(), elevation.height());
    if w < 3 || h < 3 {
        return Err(Error::Data(format!(
            "Horn slope needs at least 3x3 cells, got {w}x{h}"
        )));
    }
    let z = |c: usize, r: usize| *elevation.get(c, r);
    let denom = 8.0 * resolution;
    let interior = |c: usize, r: usize| {
        let p = ((z(c + 1, r - 1) + 2.0 * z(c + 1, r) + z(c + 1, r + 1))
            - (z(c - 1, r - 1) + 2.0 * z(c - 1, r) + z(c - 1, r + 1)))
            / denom;
        let q = ((z(c - 1, r + 1) + 2.0 * z(c, r + 1) + z(c + 1, r + 1))
            - (z(c - 1, r - 1) + 2.0 * z(c, r - 1) + z(c + 1, r - 1)))
            / denom;
        (p, q)
    };
    let mut gx = Grid::filled(w, h, 0.0);
    let mut gy = Grid::filled(w, h, 0.0);
    for r in 0..h {
        let ri = r.clamp(1, h - 2);
        for c in 0..w {
            let ci = c.clamp(1, w - 2);
            let (p, q) = interior(ci, ri);
            *gx.get_mut(c, r) = p;
            *gy.get_mut(c, r) = q;
        }
    }
    Ok((gx, gy))
}

/// Inclination ψ = atan(√(p² + q²)) in radians from Horn gradients.
pub fn compute_slope_horn(elevation: &Grid<f64>, resolution: f64) -> Result<Grid<f64>> {
    let (gx, gy) = horn_gradients(elevation, resolution)?;
    Ok(Grid::from_fn(elevation.width(), elevation.height(), |c, r| {
        gx.get(c, r).hypot(*gy.get(c, r)).atan()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_raster_has_zero_slope() {
        let z = Grid::filled(6, 5, 3.25);
        let s = compute_slope_horn(&z, 0.5).unwrap();
        assert!(s.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn plane_along_x_gives_analytic_inclination() {
        let res = 0.5;
        let z = Grid::from_fn(10, 10, |c, _| 0.2 * (c as f64 * res));
        let s = compute_slope_horn(&z, res).unwrap();
        let expected = 0.2f64.atan();
        assert!((expected - 0.1974).abs() < 1e-4);
        for v in s.as_slice() {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_raster_is_rejected() {
        assert!(compute_slope_horn(&Grid::filled(2, 5, 0.0), 1.0).is_err());
    }

    #[test]
    fn smooth_surface_matches_central_differences() {
        let res = 0.25;
        let f = |x: f64, y: f64| 0.4 * (0.3 * x).sin() + 0.3 * (0.25 * y).cos() + 0.05 * x * y;
        let z = Grid::from_fn(40, 40, |c, r| f(c as f64 * res, r as f64 * res));
        let s = compute_slope_horn(&z, res).unwrap();
        for r in 1..39 {
            for c in 1..39 {
                let dx = (z.get(c + 1, r) - z.get(c - 1, r)) / (2.0 * res);
                let dy = (z.get(c, r + 1) - z.get(c, r - 1)) / (2.0 * res);
                let fd = dx.hypot(dy).atan();
                assert!((s.get(c, r) - fd).abs() < 1e-2);
            }
        }
    }

    proptest! {
        #[test]
        fn horn_is_exact_on_affine_planes(a in -2.0f64..2.0, b in -2.0f64..2.0, z0 in -5.0f64..5.0, res in 0.1f64..2.0) {
            let z = Grid::from_fn(7, 6, |c, r| z0 + a * c as f64 * res + b * r as f64 * res);
            let s = compute_slope_horn(&z, res).unwrap();
            let expected = a.hypot(b).atan();
            for v in s.as_slice() {
                prop_assert!((v - expected).abs() < 1e-9);
            }
        }
    }
}
