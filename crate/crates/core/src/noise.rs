//! Additive Gaussian corruption of exchanged messages.

use rand::Rng;
use rand_distr::StandardNormal;

/// Adds `N(0, comm_sigma² I)` to `message` in place. A zero sigma leaves the
/// message untouched and draws nothing from `rng`.
pub fn inject_noise<R: Rng + ?Sized>(message: &mut [f64], comm_sigma: f64, rng: &mut R) {
    if comm_sigma == 0.0 {
        return;
    }
    for v in message.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += comm_sigma * z;
    }
}
