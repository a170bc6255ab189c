//! Discrete paths of surfaces sampled at uniform times `t_k = k / (T - 1)`.

use crate::error::{Error, Result};
use crate::surface::{Grid, Surface, TangentField};

/// A sequence of at least two surfaces on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    frames: Vec<Surface>,
}

impl Path {
    pub fn new(frames: Vec<Surface>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a path needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let g = frames[0].grid();
        if let Some(k) = frames.iter().position(|f| f.grid() != g) {
            return Err(Error::NonUniformGrid { frame: k });
        }
        Ok(Path { frames })
    }

    /// Straight-line interpolation with `t` frames.
    pub fn linear(start: &Surface, end: &Surface, t: usize) -> Result<Self> {
        if t < 2 {
            return Err(Error::InvalidConfig(format!("a path needs at least 2 frames, got {t}")));
        }
        let frames = (0..t)
            .map(|k| start.lerp(end, k as f64 / (t - 1) as f64))
            .collect::<Result<Vec<_>>>()?;
        Path::new(frames)
    }

    /// Path through `waypoints` at evenly spaced times, linear between them.
    pub fn piecewise_linear(waypoints: &[Surface], t: usize) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidConfig("need at least two waypoints".into()));
        }
        if t < waypoints.len() {
            return Err(Error::InvalidConfig(format!(
                "{t} frames cannot pass through {} waypoints",
                waypoints.len()
            )));
        }
        let segments = (waypoints.len() - 1) as f64;
        let frames = (0..t)
            .map(|k| {
                let s = k as f64 / (t - 1) as f64 * segments;
                let seg = (s.floor() as usize).min(waypoints.len() - 2);
                waypoints[seg].lerp(&waypoints[seg + 1], s - seg as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Path::new(frames)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> Grid {
        self.frames[0].grid()
    }

    pub fn frames(&self) -> &[Surface] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &Surface {
        &self.frames[k]
    }

    pub fn into_frames(self) -> Vec<Surface> {
        self.frames
    }

    /// Time step `1 / (T - 1)`.
    pub fn dt(&self) -> f64 {
        1.0 / (self.frames.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.frames.len()).map(|k| k as f64 * dt).collect()
    }

    /// Forward-difference velocity attached to frame `k < T - 1`.
    pub fn velocity(&self, k: usize) -> TangentField {
        let t = (self.frames.len() - 1) as f64;
        let a = self.frames[k].points();
        let b = self.frames[k + 1].points();
        let values = a.iter().zip(b).map(|(p, q)| (q - p) * t).collect();
        TangentField::new(self.grid(), values).expect("velocity of finite frames")
    }

    /// Apply `f` to every frame.
    pub fn map_frames(&self, f: impl Fn(usize, &Surface) -> Result<Surface>) -> Result<Path> {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(k, s)| f(k, s))
            .collect::<Result<Vec<_>>>()?;
        Path::new(frames)
    }

    /// Surface at time `t` by linear interpolation between neighboring frames.
    pub fn sample(&self, t: f64) -> Result<Surface> {
        let last = self.frames.len() - 1;
        let s = (t.clamp(0.0, 1.0) * last as f64).min(last as f64);
        let k = (s.floor() as usize).min(last - 1);
        self.frames[k].lerp(&self.frames[k + 1], s - k as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Vec3;

    fn sphere(r: f64) -> Surface {
        let g = Grid::square(12).unwrap();
        Surface::from_fn(g, |u, v| Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos()) * r).unwrap()
    }

    #[test]
    fn rejects_short_and_mixed_paths() {
        assert!(Path::new(vec![sphere(1.0)]).is_err());
        let other = Surface::from_fn(Grid::new(12, 14).unwrap(), |_, _| Vec3::zeros()).unwrap();
        match Path::new(vec![sphere(1.0), sphere(2.0), other]) {
            Err(Error::NonUniformGrid { frame }) => assert_eq!(frame, 2),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn linear_path_velocity_is_constant() {
        let p = Path::linear(&sphere(1.0), &sphere(2.5), 4).unwrap();
        assert_eq!(p.times(), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let v = p.velocity(1);
        for (x, q) in v.values().iter().zip(sphere(1.5).points()) {
            assert!((x - q).norm() < 1e-12);
        }
        assert_eq!(p.frame(0), &sphere(1.0));
        assert_eq!(p.frame(3), &sphere(2.5));
    }

    #[test]
    fn piecewise_path_hits_waypoints() {
        let w = [sphere(1.0), sphere(2.0), sphere(1.0)];
        let p = Path::piecewise_linear(&w, 5).unwrap();
        assert_eq!(p.frame(2), &w[1]);
        assert_eq!(p.frame(4), &w[2]);
    }
}
