use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent generator for one trajectory: the ChaCha8 key is derived from
/// `seed`, the 64-bit stream id is `trajectory_index`. ChaCha is
/// counter-based, so streams never overlap.
pub fn substream(seed: u64, trajectory_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory_index);
    rng
}

/// Standard normals by the Marsaglia polar method; the second variate of
/// each accepted pair is cached.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, trajectory_index: u64) -> Self {
        Self {
            rng: substream(seed, trajectory_index),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.gen::<f64>() - 1.0;
            let v = 2.0 * self.rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let k = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * k);
                return u * k;
            }
        }
    }
}

/// Noise for `steps` steps of `s` Wiener processes, stored row-major by step.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    pub h: f64,
    pub s: usize,
    xi: Vec<f64>,
    dw: Vec<f64>,
    w: Vec<f64>,
}

impl WienerPath {
    pub fn steps(&self) -> usize {
        self.xi.len() / self.s
    }

    /// Standard normals `ξ_k`.
    pub fn xi(&self, k: usize) -> &[f64] {
        &self.xi[k * self.s..(k + 1) * self.s]
    }

    /// `ΔW_k = √h ξ_k`.
    pub fn dw(&self, k: usize) -> &[f64] {
        &self.dw[k * self.s..(k + 1) * self.s]
    }

    /// `W(t_k)`, `k = 0 … N`.
    pub fn w(&self, k: usize) -> &[f64] {
        &self.w[k * self.s..(k + 1) * self.s]
    }

    pub fn increments(&self) -> &[f64] {
        &self.dw
    }
}

pub fn wiener_increments(seed: u64, trajectory_index: u64, steps: usize, s: usize, h: f64) -> WienerPath {
    let mut normals = NormalStream::new(seed, trajectory_index);
    let sh = h.sqrt();
    let xi: Vec<f64> = (0..steps * s).map(|_| normals.next_normal()).collect();
    let dw: Vec<f64> = xi.iter().map(|z| sh * z).collect();
    let mut w = vec![0.0; (steps + 1) * s];
    for k in 0..steps {
        for l in 0..s {
            w[(k + 1) * s + l] = w[k * s + l] + dw[k * s + l];
        }
    }
    WienerPath { h, s, xi, dw, w }
}
