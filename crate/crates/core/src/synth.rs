//! Synthetic data: a heteroscedastic regression with known quantiles and a
//! GEFCom-shaped wind-power zone.

use chrono::{Duration, NaiveDate};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::baselines::normal_inverse_cdf;
use crate::data::{RawRecord, ZoneRecords};
use crate::error::Result;

/// Scale of the noise relative to the signal in [`hetero_dataset`].
pub const HETERO_NOISE: f64 = 0.2;

/// Draws `x ~ U(0.1, 1)` and `y = x + 0.2 x eps` with standard normal `eps`.
pub fn hetero_dataset(n: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ux = Uniform::new(0.1, 1.0).expect("valid range");
    let mut x = Array2::zeros((n, 1));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let xi: f64 = ux.sample(&mut rng);
        let eps: f64 = StandardNormal.sample(&mut rng);
        x[[i, 0]] = xi;
        y[i] = xi + HETERO_NOISE * xi * eps;
    }
    (x, y)
}

/// Conditional `tau`-quantile of [`hetero_dataset`] at `x`.
pub fn hetero_quantile(x: f64, tau: f64) -> Result<f64> {
    Ok(x * (1.0 + HETERO_NOISE * normal_inverse_cdf(tau)?))
}

/// Hourly records from January 1 of `start_year` for `years` years.
///
/// Wind components follow a seasonal AR(1) process; power is a saturating
/// function of the 100 m speed plus multiplicative noise, clipped to `[0, 1]`.
pub fn synthetic_zone(start_year: i32, years: u32, seed: u64) -> ZoneRecords {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(start_year, 1, 1)
        .expect("valid year")
        .and_hms_opt(0, 0, 0)
        .expect("midnight");
    let end = NaiveDate::from_ymd_opt(start_year + years as i32, 1, 1)
        .expect("valid year")
        .and_hms_opt(0, 0, 0)
        .expect("midnight");
    let hours = (end - start).num_hours() as usize;
    let phi: f64 = 0.97;
    let innov = (1.0 - phi * phi).sqrt();
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut records = Vec::with_capacity(hours);
    for h in 0..hours {
        let timestamp = start + Duration::hours(h as i64);
        let season = 1.0 + 0.3 * (2.0 * std::f64::consts::PI * h as f64 / 8766.0).cos();
        let za: f64 = StandardNormal.sample(&mut rng);
        let zb: f64 = StandardNormal.sample(&mut rng);
        a = phi * a + innov * za;
        b = phi * b + innov * zb;
        let u100 = season * (3.0 + 4.0 * a);
        let v100 = season * 4.0 * b;
        let n10: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        let u10 = 0.7 * u100 + 0.3 * n10[0];
        let v10 = 0.7 * v100 + 0.3 * n10[1];
        let speed = u100.hypot(v100);
        let curve = 1.0 - (-(speed / 7.0).powi(3)).exp();
        let eps: f64 = StandardNormal.sample(&mut rng);
        let power = (curve * (1.0 + 0.15 * eps) + 0.02 * rng.random::<f64>()).clamp(0.0, 1.0);
        records.push(RawRecord {
            timestamp,
            u10,
            v10,
            u100,
            v100,
            power: Some(power),
        });
    }
    ZoneRecords { records, gaps: 0 }
}
