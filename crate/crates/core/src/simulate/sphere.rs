use nalgebra::{Matrix3, Vector3};

use crate::synthesis::{Interpretation, SdeSystem};

/// Diffusion matrix of the linear sphere system `dX = S X ∘ dW`.
pub const SPHERE_S: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, 1.0, 0.0]];

fn s_matrix() -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| SPHERE_S[i][j])
}

/// `exp(S W)`. Since `S³ = −2S`,
/// `exp(SW) = E + (sin √2W / √2) S + ((1 − cos √2W) / 2) S²`.
pub fn sphere_rotation(w: f64) -> Matrix3<f64> {
    let s = s_matrix();
    let r = std::f64::consts::SQRT_2 * w;
    Matrix3::identity() + s * (r.sin() / std::f64::consts::SQRT_2) + s * s * ((1.0 - r.cos()) / 2.0)
}

/// States `exp(S W(t_k)) x0` along a scalar Wiener path.
pub fn sphere_analytic(x0: &[f64; 3], path: &super::WienerPath) -> Vec<[f64; 3]> {
    let x = Vector3::from_column_slice(x0);
    (0..=path.steps())
        .map(|k| {
            let y = sphere_rotation(path.w(k)[0]) * x;
            [y[0], y[1], y[2]]
        })
        .collect()
}

/// Checks at probe points that the system is `dX = S X ∘ dW` (Stratonovich
/// drift zero, one noise column equal to `S x`).
pub fn is_sphere_system(system: &SdeSystem) -> bool {
    if system.n() != 3 || system.s() != 1 {
        return false;
    }
    let s = s_matrix();
    let probes = [[0.3, -0.7, 1.1], [1.0, 0.5, -0.25], [-0.8, 0.2, 0.6]];
    probes.iter().all(|x| {
        let t = 0.37;
        let Ok(sigma) = system.diffusion(t, x) else { return false };
        let expected = s * Vector3::from_column_slice(x);
        let drift = match system.interpretation() {
            Interpretation::Stratonovich => system.drift(t, x),
            Interpretation::Ito => system.drift(t, x).and_then(|f| {
                let c = system.sigma_correction_given(t, x, &sigma)?;
                Ok(f.iter().zip(c).map(|(f, c)| f - c).collect())
            }),
        };
        let Ok(a) = drift else { return false };
        (0..3).all(|i| (sigma[0][i] - expected[i]).abs() <= 1e-12 && a[i].abs() <= 1e-12)
    })
}
