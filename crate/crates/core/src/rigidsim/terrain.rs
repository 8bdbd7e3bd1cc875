use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Regular grid of heights, bilinearly interpolated and clamped at the border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    /// World position of sample `(0, 0)`, m.
    pub origin: [f64; 2],
    /// m
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (`iy * nx + ix`), m.
    pub heights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TerrainShape {
    HeightField(HeightField),
    /// Infinite plane through the origin rising along +x.
    Ramp { slope_angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub shape: TerrainShape,
    pub friction_coefficient: f64,
}

/// Surface sample below (or around) a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    /// Signed distance of the query point above the surface along `normal`.
    pub distance: f64,
    pub normal: Vector3<f64>,
}

impl HeightField {
    fn at(&self, ix: usize, iy: usize) -> f64 {
        self.heights[iy * self.nx + ix]
    }

    /// Height and gradient at `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        if self.nx == 1 && self.ny == 1 {
            return (self.heights[0], [0.0, 0.0]);
        }
        let fx = ((x - self.origin[0]) / self.cell_size).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.origin[1]) / self.cell_size).clamp(0.0, (self.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let iy = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let ix1 = (ix + 1).min(self.nx - 1);
        let iy1 = (iy + 1).min(self.ny - 1);
        let h00 = self.at(ix, iy);
        let h10 = self.at(ix1, iy);
        let h01 = self.at(ix, iy1);
        let h11 = self.at(ix1, iy1);
        let h = h00 * (1.0 - tx) * (1.0 - ty) + h10 * tx * (1.0 - ty) + h01 * (1.0 - tx) * ty + h11 * tx * ty;
        let dhx = ((h10 - h00) * (1.0 - ty) + (h11 - h01) * ty) / self.cell_size;
        let dhy = ((h01 - h00) * (1.0 - tx) + (h11 - h10) * tx) / self.cell_size;
        (h, [dhx, dhy])
    }
}

impl Terrain {
    pub fn flat(friction_coefficient: f64) -> Self {
        Terrain {
            shape: TerrainShape::HeightField(HeightField {
                origin: [0.0, 0.0],
                cell_size: 1.0,
                nx: 1,
                ny: 1,
                heights: vec![0.0],
            }),
            friction_coefficient,
        }
    }

    pub fn ramp(slope_angle: f64, friction_coefficient: f64) -> Self {
        Terrain { shape: TerrainShape::Ramp { slope_angle }, friction_coefficient }
    }

    /// Square patch of i.i.d. uniform heights in `[0, amplitude]` centred on `centre`.
    pub fn rough<R: Rng + ?Sized>(
        rng: &mut R,
        centre: [f64; 2],
        half_size: f64,
        cell_size: f64,
        amplitude: f64,
        friction_coefficient: f64,
    ) -> Self {
        let n = (2.0 * half_size / cell_size).ceil() as usize + 1;
        let heights = (0..n * n)
            .map(|_| if amplitude > 0.0 { rng.random_range(0.0..=amplitude) } else { 0.0 })
            .collect();
        Terrain {
            shape: TerrainShape::HeightField(HeightField {
                origin: [centre[0] - half_size, centre[1] - half_size],
                cell_size,
                nx: n,
                ny: n,
                heights,
            }),
            friction_coefficient,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.friction_coefficient > 0.0) {
            return Err(SimError::InvalidInput("friction coefficient must be > 0".into()));
        }
        match &self.shape {
            TerrainShape::HeightField(hf) => {
                if hf.nx == 0 || hf.ny == 0 || hf.heights.len() != hf.nx * hf.ny {
                    return Err(SimError::InvalidInput("height field dimensions do not match data".into()));
                }
                if !(hf.cell_size > 0.0) || hf.heights.iter().any(|h| !h.is_finite()) {
                    return Err(SimError::InvalidInput("height field must be finite with cell_size > 0".into()));
                }
            }
            TerrainShape::Ramp { slope_angle } => {
                if !slope_angle.is_finite() || slope_angle.abs() >= std::f64::consts::FRAC_PI_2 {
                    return Err(SimError::InvalidInput("ramp angle must be finite and below 90 degrees".into()));
                }
            }
        }
        Ok(())
    }

    /// Ground height directly below `(x, y)`.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match &self.shape {
            TerrainShape::HeightField(hf) => hf.sample(x, y).0,
            TerrainShape::Ramp { slope_angle } => x * slope_angle.tan(),
        }
    }

    pub fn surface(&self, p: &Vector3<f64>) -> SurfacePoint {
        match &self.shape {
            TerrainShape::HeightField(hf) => {
                let (h, [gx, gy]) = hf.sample(p.x, p.y);
                let normal = Vector3::new(-gx, -gy, 1.0).normalize();
                SurfacePoint { distance: (p.z - h) * normal.z, normal }
            }
            TerrainShape::Ramp { slope_angle } => {
                let (s, c) = slope_angle.sin_cos();
                let normal = Vector3::new(-s, 0.0, c);
                SurfacePoint { distance: normal.dot(p), normal }
            }
        }
    }

    /// Unit vector along the uphill direction for ramps, +x otherwise.
    pub fn forward_axis(&self) -> Vector3<f64> {
        match &self.shape {
            TerrainShape::Ramp { slope_angle } => {
                let (s, c) = slope_angle.sin_cos();
                Vector3::new(c, 0.0, s)
            }
            TerrainShape::HeightField(_) => Vector3::x(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_ground_distance_is_height() {
        let t = Terrain::flat(0.5);
        let s = t.surface(&Vector3::new(3.0, -2.0, 0.25));
        assert_eq!(s.distance, 0.25);
        assert_eq!(s.normal, Vector3::z());
    }

    #[test]
    fn ramp_distance_matches_plane_geometry() {
        let angle = 10f64.to_radians();
        let t = Terrain::ramp(angle, 0.5);
        // point on the surface
        let on = Vector3::new(1.0, 0.0, angle.tan());
        assert!(t.surface(&on).distance.abs() < 1e-12);
        let above = on + t.surface(&on).normal * 0.05;
        assert!((t.surface(&above).distance - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rough_heights_stay_within_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Terrain::rough(&mut rng, [0.0, 0.0], 1.0, 0.1, 0.01, 0.5);
        t.validate().unwrap();
        let TerrainShape::HeightField(hf) = &t.shape else { unreachable!() };
        assert!(hf.heights.iter().all(|h| (0.0..=0.01).contains(h)));
        for i in 0..50 {
            let x = -1.2 + 0.05 * i as f64;
            let h = t.height(x, 0.3 * x);
            assert!((0.0..=0.01).contains(&h));
        }
    }

    #[test]
    fn bilinear_interpolates_between_samples() {
        let hf = HeightField { origin: [0.0, 0.0], cell_size: 1.0, nx: 2, ny: 2, heights: vec![0.0, 1.0, 0.0, 1.0] };
        let (h, g) = hf.sample(0.25, 0.5);
        assert!((h - 0.25).abs() < 1e-12);
        assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn invalid_friction_rejected() {
        assert!(Terrain::flat(0.0).validate().is_err());
    }
}
