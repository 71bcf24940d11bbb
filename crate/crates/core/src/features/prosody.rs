//! Amplitude-envelope summaries.

/// Least-squares slope of `ys` sampled every `dt` seconds; zero for fewer than two points.
pub fn regression_slope(ys: &[f64], dt: f64) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean_x = (nf - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    sxy / sxx / dt
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Maps a signed slope onto `[0, 1]` with zero at 0.5.
pub fn signed_unit(slope: f64, scale: f64) -> f64 {
    0.5 + 0.5 * (slope / scale).tanh()
}

/// Level in dBFS mapped linearly from `[floor_db, 0]` onto `[0, 1]`.
pub fn level_unit(level: f64, floor_db: f64) -> f64 {
    if level <= 0.0 {
        return 0.0;
    }
    ((20.0 * level.log10() - floor_db) / -floor_db).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        let ys: Vec<f64> = (0..10).map(|i| 2.0 + 0.5 * i as f64).collect();
        assert!((regression_slope(&ys, 0.01) - 50.0).abs() < 1e-9);
        assert_eq!(regression_slope(&[1.0], 0.01), 0.0);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn unit_maps() {
        assert_eq!(signed_unit(0.0, 4.0), 0.5);
        assert_eq!(level_unit(1.0, -60.0), 1.0);
        assert_eq!(level_unit(0.001, -60.0), 0.0);
        assert!((level_unit(0.1, -60.0) - 2.0 / 3.0).abs() < 1e-12);
    }
}
