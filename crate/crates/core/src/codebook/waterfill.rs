//! Sum-rate power allocation for ZF precoding.
//!
//! With `W = H (H^H H)^-1 P^1/2`, user k spends `pbar_k = p_k * u_k` of the
//! transmit budget to obtain received power `p_k`, where `u_k` is the k-th
//! diagonal entry of `(H^H H)^-1`. Maximizing `sum log2(1 + pbar_k / (u_k s_k))`
//! under `sum pbar_k = P_d` is classic water-filling over the floors
//! `u_k s_k`.

/// Allocation together with the common water level `1 / eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling {
    pub powers: Vec<f64>,
    pub water_level: f64,
}

/// Exact water-filling: sort floors, find the largest feasible active set and
/// compute the level in closed form.
pub fn water_fill(u_diag: &[f64], noise: &[f64], p_d: f64) -> WaterFilling {
    assert_eq!(u_diag.len(), noise.len(), "one noise power per user");
    assert!(!u_diag.is_empty(), "need at least one user");
    debug_assert!(u_diag.iter().all(|&u| u > 0.0));
    debug_assert!(p_d >= 0.0);

    let floors: Vec<f64> = u_diag.iter().zip(noise).map(|(u, s)| u * s).collect();
    let mut order: Vec<usize> = (0..floors.len()).collect();
    order.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]));

    let mut prefix = 0.0;
    let mut level = p_d + floors[order[0]];
    for (count, &k) in order.iter().enumerate() {
        prefix += floors[k];
        let candidate = (p_d + prefix) / (count + 1) as f64;
        if candidate >= floors[k] {
            level = candidate;
        } else {
            break;
        }
    }
    let powers = floors.iter().map(|&f| (level - f).max(0.0)).collect();
    WaterFilling {
        powers,
        water_level: level,
    }
}

/// Transmit powers `pbar_k` per user; some users may get nothing.
pub fn waterfill(u_diag: &[f64], noise: &[f64], p_d: f64) -> Vec<f64> {
    water_fill(u_diag, noise, p_d).powers
}

/// Received powers `p_k = pbar_k / u_k`.
pub fn received_powers_from_allocation(u_diag: &[f64], allocation: &[f64]) -> Vec<f64> {
    u_diag.iter().zip(allocation).map(|(u, p)| p / u).collect()
}

/// `sum log2(1 + p_k / s_k)` for received powers `p_k`.
pub fn zf_sum_rate(received: &[f64], noise: &[f64]) -> f64 {
    received.iter().zip(noise).map(|(p, s)| (1.0 + p / s).log2()).sum()
}
