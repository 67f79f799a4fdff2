/// A-priori error bound for the Lanczos approximation of `e^{−TA} g`.
///
/// `rho_t` is the spectral radius of `T·A`, `g_norm = ‖g‖₂`. Returns
/// `+∞` when `k < √ρ`, where no bound is available. When both branches apply
/// (`k = ρ/2`) the smaller value is returned.
pub fn hochbruck_lubich_bound(rho_t: f64, k: usize, g_norm: f64) -> f64 {
    let k = k as f64;
    let rho = rho_t;
    let mut best = f64::INFINITY;
    if k >= rho.sqrt() && k <= rho / 2.0 {
        best = 10.0 * g_norm * (-4.0 * k * k / (5.0 * rho)).exp();
    }
    if k >= rho / 2.0 {
        // Log-space keeps (eρ/4k)^k finite for large k.
        let log = (40.0 / rho).ln() - rho / 4.0 + k * (std::f64::consts::E * rho / (4.0 * k)).ln();
        best = best.min(g_norm * log.exp());
    }
    best
}

/// Krylov dimension `⌈√c_d · T / (2h)⌉` clamped to `[2, n]` (or `n` when
/// `n < 2`).
pub fn choose_k(h: f64, t: f64, c_d: f64, n: usize) -> usize {
    let k = (c_d.sqrt() * t / (2.0 * h)).ceil();
    let k = if k.is_finite() { k.max(2.0) as usize } else { 2 };
    k.min(n)
}
