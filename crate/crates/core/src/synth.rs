//! Synthetic order-book generation with controllable anticipation,
//! sparsity, and scale.
//!
//! Per item, a latent demand level follows a mean-reverting AR(1) walk
//! around the configured base volume. Each period's demand splits into an
//! anticipated part (booked in advance, share `rho`, low noise) and a
//! same-period walk-in part (share `1 - rho`, heavy independent noise).
//! The advance part spreads over delivery dates 1.. with the one-period
//! slot dominant. This keeps gross volumes strongly anticipatory — the
//! revealed `q[t+1][1]` tracks the final `q[t+1][0]` — while net
//! same-period bookings stay nearly unpredictable, which is exactly the
//! asymmetry the evaluation pipeline is supposed to detect.
//!
//! All noise is drawn unconditionally in a fixed per-period order from a
//! per-item derived seed, so changing `rho` or `sparsity` rescales the
//! same underlying stream instead of consuming a different one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::orderbook::{CubeData, DemandCube, Semantics};
use crate::{derive_seed, Error, Result};

fn default_items() -> usize {
    50
}
fn default_periods() -> usize {
    45
}
fn default_horizon() -> usize {
    4
}
fn default_rho() -> f64 {
    0.9
}
fn default_sparsity() -> f64 {
    0.1
}
fn default_base_volume() -> f64 {
    100.0
}
fn default_ar() -> f64 {
    0.6
}
fn default_noise() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(default = "default_items")]
    pub n_items: usize,
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Fraction of a period's final gross volume already booked at least
    /// one period ahead.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Probability that a period's demand is zero.
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default = "default_base_volume")]
    pub base_volume: f64,
    /// AR(1) persistence of the latent demand level.
    #[serde(default = "default_ar")]
    pub ar_coefficient: f64,
    /// Innovation scale relative to the item's level.
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_items: default_items(),
            periods: default_periods(),
            horizon: default_horizon(),
            rho: default_rho(),
            sparsity: default_sparsity(),
            base_volume: default_base_volume(),
            ar_coefficient: default_ar(),
            noise_scale: default_noise(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_items == 0 {
            return invalid("n_items must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return invalid(format!("rho must be in [0, 1], got {}", self.rho));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return invalid(format!("sparsity must be in [0, 1], got {}", self.sparsity));
        }
        if self.periods <= self.horizon + 2 {
            return invalid(format!(
                "periods must exceed horizon + 2 ({} <= {})",
                self.periods,
                self.horizon + 2
            ));
        }
        if self.base_volume <= 0.0 {
            return invalid("base_volume must be positive".into());
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return invalid("ar_coefficient must be in [0, 1)".into());
        }
        if self.noise_scale < 0.0 {
            return invalid("noise_scale must be non-negative".into());
        }
        Ok(())
    }
}

// Walk-in log-noise scale; mean-one lognormal so the configured base
// volume stays the marginal mean for every rho.
const WALKIN_SIGMA: f64 = 1.4;
// Relative noise on the total advance volume; small, so the revealed
// one-period-ahead cell stays a tight anchor for the final volume.
const ADVANCE_SIGMA: f64 = 0.05;
// Relative noise on the per-delivery-date split of the advance volume;
// large, so deeper pre-order cells reveal progressively less about their
// period's earlier volumes.
const SHARE_SIGMA: f64 = 0.5;
// Geometric decay of the advance profile beyond the one-period slot.
const PROFILE_DECAY: f64 = 0.25;

/// Splits an integer total over non-negative weights so the parts sum to
/// the total exactly: floor the quotas, then hand out the remainder by
/// largest fractional part (lowest index on ties).
fn largest_remainder(total: i64, weights: &[f64]) -> Vec<i64> {
    let sum: f64 = weights.iter().sum();
    let mut parts = vec![0i64; weights.len()];
    if total <= 0 || sum <= 0.0 {
        return parts;
    }
    let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    let mut assigned = 0i64;
    for (h, &w) in weights.iter().enumerate() {
        let quota = total as f64 * w / sum;
        let floor = quota.floor() as i64;
        parts[h] = floor;
        assigned += floor;
        fractions.push((quota - floor as f64, h));
    }
    fractions.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut remaining = total - assigned;
    let mut i = 0;
    while remaining > 0 {
        parts[fractions[i].1] += 1;
        remaining -= 1;
        i += 1;
    }
    parts
}

/// Generates a gross demand cube; identical config and seed give a
/// bitwise-identical cube.
pub fn generate(config: &SynthConfig) -> Result<DemandCube> {
    config.validate()?;
    let h = config.horizon;
    let items: Vec<String> = (0..config.n_items)
        .map(|i| format!("item{:04}", i + 1))
        .collect();
    let mut data = CubeData::new(items, 0, config.periods, h);

    // advance profile over delivery dates 1..H-1, one-period slot dominant
    let profile: Vec<f64> = (0..h.saturating_sub(1))
        .map(|k| PROFILE_DECAY.powi(k as i32))
        .collect();

    let unit_normal = Normal::new(0.0, 1.0).expect("valid normal");
    for item in 0..config.n_items {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, item as u64));
        // item scale, log-uniform on [0.5, 2]
        let scale = (rng.gen_range(0.5f64.ln()..2.0f64.ln())).exp();
        let level = config.base_volume * scale;
        let innovation_sd = config.noise_scale * level;
        let mut latent = level;

        for t in 0..config.periods as i64 {
            // fixed draw order per period, independent of parameters
            let eps = unit_normal.sample(&mut rng) * innovation_sd;
            let zero_draw: f64 = rng.gen();
            let advance_noise = unit_normal.sample(&mut rng) * ADVANCE_SIGMA;
            let walkin_log = unit_normal.sample(&mut rng) * WALKIN_SIGMA;
            let share_noise: Vec<f64> = (0..profile.len())
                .map(|_| unit_normal.sample(&mut rng) * SHARE_SIGMA)
                .collect();

            latent = level + config.ar_coefficient * (latent - level) + eps;
            let demand_level = latent.max(0.0);
            if zero_draw < config.sparsity {
                continue; // zero-demand period, all cells stay 0
            }

            let advance = demand_level * config.rho * (1.0 + advance_noise).max(0.01);
            // walk-ins hang off the item's static level with heavy mean-one
            // lognormal noise: same-period orders have their own drivers and
            // do not track the anticipated demand path
            let walkin = level
                * (1.0 - config.rho)
                * (walkin_log - WALKIN_SIGMA * WALKIN_SIGMA / 2.0).exp();

            let total = (advance + walkin).round() as i64;
            if total <= 0 {
                continue;
            }

            // weights over delivery dates: walk-in at h=0, advance spread
            // over h >= 1
            let mut weights = Vec::with_capacity(h);
            weights.push(walkin);
            for (k, &p) in profile.iter().enumerate() {
                weights.push(advance * p * (1.0 + share_noise[k]).max(0.01));
            }
            let net = largest_remainder(total, &weights);

            // gross cells are suffix sums of the net bookings
            let mut acc = 0i64;
            for delivery in (0..h).rev() {
                acc += net[delivery];
                data.set(item, t, delivery, acc);
            }
        }
    }

    Ok(DemandCube {
        data,
        semantics: Semantics::Gross,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagonal::{build_frontiers, difference, pool_frontiers, Layout};
    use crate::stats::spearman;

    fn config(rho: f64, sparsity: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n_items: 40,
            periods: 45,
            rho,
            sparsity,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn full_sparsity_gives_an_all_zero_cube() {
        let cube = generate(&config(0.9, 1.0, 3)).unwrap();
        assert_eq!(cube.data.total(), 0);
    }

    #[test]
    fn generated_cubes_are_gross_monotone() {
        for seed in 0..5 {
            let cube = generate(&config(0.7, 0.3, seed)).unwrap();
            assert_eq!(cube.monotonicity_violations(), 0);
        }
    }

    #[test]
    fn same_config_is_bitwise_identical() {
        let a = generate(&config(0.9, 0.3, 42)).unwrap();
        let b = generate(&config(0.9, 0.3, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_nonzero_demand_tracks_the_base_volume() {
        let cfg = SynthConfig {
            n_items: 350,
            periods: 45,
            sparsity: 0.3,
            seed: 9,
            ..SynthConfig::default()
        };
        let cube = generate(&cfg).unwrap();
        let mut totals = Vec::new();
        for item in 0..cube.data.items().len() {
            for t in cube.data.periods() {
                let demand = cube.data.get(item, t, 0);
                if demand > 0 {
                    totals.push(demand as f64);
                }
            }
        }
        assert!(totals.len() > 10_000, "want 10^4 nonzero draws");
        let mean = totals.iter().sum::<f64>() / totals.len() as f64;
        assert!(
            (mean - cfg.base_volume).abs() <= 0.2 * cfg.base_volume,
            "mean nonzero demand {mean} vs base {}",
            cfg.base_volume
        );
    }

    fn pooled_anticipation_entry(rho: f64, seed: u64, differenced: bool) -> f64 {
        let cfg = SynthConfig {
            n_items: 200,
            periods: 45,
            rho,
            seed,
            ..SynthConfig::default()
        };
        let cube = generate(&cfg).unwrap();
        let working = if differenced {
            difference(&cube).unwrap().data
        } else {
            cube.data.clone()
        };
        let layout = Layout::new(4, 0);
        let groups: Vec<_> = (0..working.items().len())
            .map(|i| {
                (
                    working.items()[i].clone(),
                    build_frontiers(&working, i, 0),
                )
            })
            .collect();
        let dataset = pool_frontiers(&groups, &layout).unwrap();
        // x slot (offset 1, delivery 1) is x4; y slot (offset 1, delivery 0) is y0
        let revealed = dataset.x.column(4);
        let target = dataset.y.column(0);
        spearman(&revealed, &target).unwrap().unwrap()
    }

    #[test]
    fn high_anticipation_pairs_revealed_and_final_volumes() {
        let gross = pooled_anticipation_entry(0.9, 7, false);
        assert!(gross >= 0.9, "gross anticipation entry {gross}");
        let net = pooled_anticipation_entry(0.9, 7, true);
        assert!(net <= 0.5, "net anticipation entry {net}");
        assert!(gross - net > 0.3, "expected a dramatic drop, got {gross} -> {net}");
    }

    #[test]
    fn anticipation_entry_is_monotone_in_rho() {
        let low = pooled_anticipation_entry(0.1, 13, false);
        let mid = pooled_anticipation_entry(0.5, 13, false);
        let high = pooled_anticipation_entry(0.9, 13, false);
        assert!(low <= mid + 1e-9, "{low} > {mid}");
        assert!(mid <= high + 1e-9, "{mid} > {high}");
    }

    #[test]
    fn largest_remainder_is_exact_and_deterministic() {
        let parts = largest_remainder(10, &[0.5, 0.25, 0.25]);
        assert_eq!(parts.iter().sum::<i64>(), 10);
        assert_eq!(parts, vec![5, 3, 2]);
        let parts = largest_remainder(7, &[1.0, 1.0, 1.0]);
        assert_eq!(parts, vec![3, 2, 2]);
        assert_eq!(largest_remainder(0, &[1.0, 2.0]), vec![0, 0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = SynthConfig {
            rho: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
        let cfg = SynthConfig {
            periods: 5,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
