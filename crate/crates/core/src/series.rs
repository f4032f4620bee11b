//! Tail sums of the power series that appear in bulk-arrival remainders.

/// Hurwitz-type tail `sum_{j >= from} j^(-exponent)` for `exponent > 1`.
///
/// Summed directly up to a cut-off and closed with an Euler-Maclaurin tail
/// (five Bernoulli corrections), which is accurate to machine precision for
/// the cut-off used here.
pub fn power_tail(exponent: f64, from: usize) -> Option<f64> {
    if !(exponent > 1.0) || !exponent.is_finite() {
        return None;
    }
    let from = from.max(1);
    let cut = from.max(32 + exponent.ceil() as usize);
    let mut head = 0.0;
    // Sum small terms first.
    for j in (from..cut).rev() {
        head += (j as f64).powf(-exponent);
    }
    let m = cut as f64;
    let s = exponent;
    let mut tail = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s);
    // B_{2k} / (2k)!
    const COEFFS: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let mut rising = s; // (s)_{2k-1}
    let mut power = m.powf(-s - 1.0);
    for (k, c) in COEFFS.iter().enumerate() {
        tail += c * rising * power;
        let next = (2 * k + 1) as f64;
        rising *= (s + next) * (s + next + 1.0);
        power /= m * m;
    }
    Some(head + tail)
}

/// `sum_{j >= from} ratio^j` for `0 <= ratio < 1`.
pub fn geometric_tail(ratio: f64, from: usize) -> Option<f64> {
    if !(0.0..1.0).contains(&ratio) {
        return None;
    }
    if ratio == 0.0 {
        return Some(if from == 0 { 1.0 } else { 0.0 });
    }
    Some(ratio.powi(from as i32) / (1.0 - ratio))
}

/// `sum_{j >= from} j * ratio^j` for `0 <= ratio < 1`.
pub fn geometric_moment_tail(ratio: f64, from: usize) -> Option<f64> {
    if !(0.0..1.0).contains(&ratio) {
        return None;
    }
    if ratio == 0.0 {
        return Some(0.0);
    }
    let m = from as f64;
    let q = ratio;
    Some(q.powi(from as i32) * (m / (1.0 - q) + q / ((1.0 - q) * (1.0 - q))))
}
