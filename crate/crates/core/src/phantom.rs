//! Synthetic dynamic phantoms built from anti-aliased ellipses, and smooth
//! simulated coil sensitivities.
//!
//! Coordinates are normalized: the field of view spans `[-1, 1]` along both
//! axes, with pixel `i` centered at `(2i + 1)/N - 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{Dims, DynamicSequence};
use crate::sensing::CoilMaps;

const SUBSAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Semi-axes before rotation.
    pub axes: [f64; 2],
    /// Counter-clockwise rotation in degrees.
    #[serde(default)]
    pub angle: f64,
    pub intensity: f64,
}

/// Sinusoidal center motion `center + amplitude * sin(2 pi t / period + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub amplitude: [f64; 2],
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicEllipse {
    pub ellipse: Ellipse,
    #[serde(default)]
    pub motion: Option<Motion>,
    /// Relative change of both semi-axes, `1 + pulsation * sin(2 pi t / period)`
    /// using the motion period.
    #[serde(default)]
    pub pulsation: f64,
    /// Adds `bolus.peak * g(t)` times the intensity, `g` being the bolus curve.
    #[serde(default)]
    pub enhances: bool,
}

/// Gamma-variate enhancement curve, peaking at 1 at frame `onset + alpha*beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bolus {
    pub onset: f64,
    pub alpha: f64,
    pub beta: f64,
    pub peak: f64,
}

impl Bolus {
    pub fn curve(&self, t: f64) -> f64 {
        let s = t - self.onset;
        if s <= 0.0 {
            return 0.0;
        }
        let tp = self.alpha * self.beta;
        (s / tp).powf(self.alpha) * (self.alpha - s / self.beta).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// `[Nx, Ny, Nt]`.
    pub shape: [usize; 3],
    #[serde(default)]
    pub static_ellipses: Vec<Ellipse>,
    #[serde(default)]
    pub dynamic_ellipses: Vec<DynamicEllipse>,
    #[serde(default)]
    pub bolus: Option<Bolus>,
    /// Standard deviation of complex white noise, relative to unit peak.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    pub fn empty(nx: usize, ny: usize, nt: usize) -> Self {
        PhantomSpec {
            shape: [nx, ny, nt],
            static_ellipses: Vec::new(),
            dynamic_ellipses: Vec::new(),
            bolus: None,
            noise: 0.0,
            seed: 0,
        }
    }

    /// 64x64x16 torso-like scene: a static body and spine, a beating and
    /// contrast-enhancing "heart", and a drifting bright insert.
    pub fn acceptance() -> Self {
        PhantomSpec {
            shape: [64, 64, 16],
            static_ellipses: vec![
                Ellipse { center: [0.0, 0.0], axes: [0.82, 0.66], angle: 0.0, intensity: 0.35 },
                Ellipse { center: [0.05, -0.45], axes: [0.14, 0.11], angle: 20.0, intensity: 0.4 },
            ],
            dynamic_ellipses: vec![
                DynamicEllipse {
                    ellipse: Ellipse { center: [-0.2, 0.12], axes: [0.26, 0.2], angle: -30.0, intensity: 0.25 },
                    motion: Some(Motion { amplitude: [0.05, 0.03], period: 8.0, phase: 0.0 }),
                    pulsation: 0.12,
                    enhances: true,
                },
                DynamicEllipse {
                    ellipse: Ellipse { center: [0.38, 0.18], axes: [0.1, 0.13], angle: 0.0, intensity: 0.5 },
                    motion: Some(Motion { amplitude: [0.0, 0.1], period: 16.0, phase: 0.5 }),
                    pulsation: 0.0,
                    enhances: false,
                },
            ],
            bolus: Some(Bolus { onset: 2.0, alpha: 2.5, beta: 1.6, peak: 1.5 }),
            noise: 0.0,
            seed: 0,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.shape[0], self.shape[1], self.shape[2])
    }

    fn validate(&self) -> Result<()> {
        if self.shape.contains(&0) {
            return Err(Error::shape(format!("phantom shape {:?} has a zero dimension", self.shape)));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::param("noise level must be nonnegative"));
        }
        if let Some(b) = &self.bolus {
            if !(b.alpha > 0.0 && b.beta > 0.0) {
                return Err(Error::param("bolus alpha and beta must be positive"));
            }
        }
        for (i, e) in self.static_ellipses.iter().enumerate() {
            check_ellipse(e, &format!("static ellipse {i}"))?;
        }
        for (i, d) in self.dynamic_ellipses.iter().enumerate() {
            if let Some(m) = &d.motion {
                if !(m.period > 0.0) {
                    return Err(Error::param(format!("dynamic ellipse {i}: motion period must be positive")));
                }
            }
            for t in 0..self.shape[2] {
                check_ellipse(&self.frame_ellipse(d, t), &format!("dynamic ellipse {i} at frame {t}"))?;
            }
        }
        Ok(())
    }

    fn frame_ellipse(&self, d: &DynamicEllipse, t: usize) -> Ellipse {
        let mut e = d.ellipse.clone();
        let tf = t as f64;
        if let Some(m) = &d.motion {
            let arg = 2.0 * std::f64::consts::PI * tf / m.period;
            let s = (arg + m.phase).sin();
            e.center[0] += m.amplitude[0] * s;
            e.center[1] += m.amplitude[1] * s;
            let scale = 1.0 + d.pulsation * arg.sin();
            e.axes[0] *= scale;
            e.axes[1] *= scale;
        }
        if d.enhances {
            if let Some(b) = &self.bolus {
                e.intensity *= 1.0 + b.peak * b.curve(tf);
            }
        }
        e
    }
}

fn check_ellipse(e: &Ellipse, what: &str) -> Result<()> {
    if !(e.axes[0] > 0.0 && e.axes[1] > 0.0) {
        return Err(Error::param(format!("{what}: semi-axes must be positive")));
    }
    let th = e.angle.to_radians();
    let (c, s) = (th.cos(), th.sin());
    let hx = ((e.axes[0] * c).powi(2) + (e.axes[1] * s).powi(2)).sqrt();
    let hy = ((e.axes[0] * s).powi(2) + (e.axes[1] * c).powi(2)).sqrt();
    let eps = 1e-12;
    if e.center[0] - hx < -1.0 - eps
        || e.center[0] + hx > 1.0 + eps
        || e.center[1] - hy < -1.0 - eps
        || e.center[1] + hy > 1.0 + eps
    {
        return Err(Error::param(format!("{what} extends outside the field of view")));
    }
    Ok(())
}

fn pixel_center(i: usize, n: usize) -> f64 {
    (2 * i + 1) as f64 / n as f64 - 1.0
}

/// Adds `intensity * coverage` of `e` into `frame`. Pixels whose center lies
/// far from the boundary get coverage 0 or 1; the rest are supersampled.
fn rasterize(e: &Ellipse, nx: usize, ny: usize, frame: &mut [f64]) {
    let th = e.angle.to_radians();
    let (c, s) = (th.cos(), th.sin());
    let level = |x: f64, y: f64| {
        let dx = x - e.center[0];
        let dy = y - e.center[1];
        let u = (dx * c + dy * s) / e.axes[0];
        let v = (-dx * s + dy * c) / e.axes[1];
        u * u + v * v
    };
    let hx = 1.0 / nx as f64;
    let hy = 1.0 / ny as f64;
    // Half-diagonal of a pixel in units of the smallest semi-axis.
    let reach = (hx * hx + hy * hy).sqrt() / e.axes[0].min(e.axes[1]);
    for iy in 0..ny {
        let y = pixel_center(iy, ny);
        for ix in 0..nx {
            let x = pixel_center(ix, nx);
            let r = level(x, y).sqrt();
            let cover = if r + reach < 1.0 {
                1.0
            } else if r - reach > 1.0 {
                0.0
            } else {
                let mut inside = 0usize;
                for sy in 0..SUBSAMPLES {
                    let yy = y + hy * ((2 * sy + 1) as f64 / SUBSAMPLES as f64 - 1.0);
                    for sx in 0..SUBSAMPLES {
                        let xx = x + hx * ((2 * sx + 1) as f64 / SUBSAMPLES as f64 - 1.0);
                        if level(xx, yy) <= 1.0 {
                            inside += 1;
                        }
                    }
                }
                inside as f64 / (SUBSAMPLES * SUBSAMPLES) as f64
            };
            if cover > 0.0 {
                frame[ix + nx * iy] += e.intensity * cover;
            }
        }
    }
}

/// Renders the phantom, adds noise and scales to unit peak magnitude.
/// An empty scene yields the zero sequence.
pub fn make_phantom(spec: &PhantomSpec) -> Result<DynamicSequence> {
    spec.validate()?;
    let dims = spec.dims();
    let (nx, ny) = (dims.nx, dims.ny);
    let mut statics = vec![0.0; dims.frame_len()];
    for e in &spec.static_ellipses {
        rasterize(e, nx, ny, &mut statics);
    }
    let mut data = Vec::with_capacity(dims.len());
    for t in 0..dims.nt {
        let mut frame = statics.clone();
        for d in &spec.dynamic_ellipses {
            rasterize(&spec.frame_ellipse(d, t), nx, ny, &mut frame);
        }
        data.extend(frame.into_iter().map(|v| C64::new(v, 0.0)));
    }
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let sd = spec.noise / std::f64::consts::SQRT_2;
        for z in &mut data {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += C64::new(sd * re, sd * im);
        }
    }
    let peak = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        data.iter_mut().for_each(|z| *z /= peak);
    }
    DynamicSequence::from_vec(dims, data)
}

/// Smooth coil sensitivities: Gaussian magnitude profiles centered just
/// outside the field of view at evenly spread (seed-jittered) angles, times a
/// seeded linear phase ramp, normalized so `sum_c |S_c|^2 = 1` per pixel.
/// A single coil is the all-ones map.
pub fn make_coil_maps(nx: usize, ny: usize, nc: usize, seed: u64) -> Result<CoilMaps> {
    if nc == 0 || nx == 0 || ny == 0 {
        return Err(Error::param("coil maps need at least one coil and a nonempty grid"));
    }
    let n = nx * ny;
    if nc == 1 {
        return CoilMaps::new(1, nx, ny, vec![C64::new(1.0, 0.0); n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = 0.9;
    let mut data = vec![C64::new(0.0, 0.0); nc * n];
    for c in 0..nc {
        let angle = 2.0 * std::f64::consts::PI * (c as f64 + 0.25 * (rng.random::<f64>() - 0.5)) / nc as f64;
        let (cx, cy) = (1.2 * angle.cos(), 1.2 * angle.sin());
        let kx = std::f64::consts::FRAC_PI_2 * (2.0 * rng.random::<f64>() - 1.0);
        let ky = std::f64::consts::FRAC_PI_2 * (2.0 * rng.random::<f64>() - 1.0);
        for iy in 0..ny {
            let y = pixel_center(iy, ny);
            for ix in 0..nx {
                let x = pixel_center(ix, nx);
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                let mag = (-r2 / (2.0 * width * width)).exp();
                data[c * n + ix + nx * iy] = C64::from_polar(mag, kx * x + ky * y);
            }
        }
    }
    for p in 0..n {
        let power: f64 = (0..nc).map(|c| data[c * n + p].norm_sqr()).sum();
        let inv = 1.0 / power.sqrt();
        for c in 0..nc {
            data[c * n + p] *= inv;
        }
    }
    CoilMaps::new(nc, nx, ny, data)
}
