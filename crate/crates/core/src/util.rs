//! Small shared numeric helpers.

use std::collections::VecDeque;

/// `data[t] = extremum over the index window [t - radius, t + radius]`
/// (clamped to the array), computed with a monotone deque in O(n).
fn sliding_window_extremum(data: &mut [f64], radius: usize, keep: impl Fn(f64, f64) -> bool) {
    let n = data.len();
    if radius == 0 || n == 0 {
        return;
    }
    let mut out = vec![0.0f64; n];
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut inserted = 0usize;
    for t in 0..n {
        let hi = (t + radius).min(n - 1);
        while inserted <= hi {
            while let Some(&back) = deque.back() {
                if keep(data[inserted], data[back]) {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(inserted);
            inserted += 1;
        }
        while let Some(&front) = deque.front() {
            if front + radius < t {
                deque.pop_front();
            } else {
                break;
            }
        }
        out[t] = data[*deque.front().expect("window never empty")];
    }
    data.copy_from_slice(&out);
}

pub(crate) fn sliding_window_max(data: &mut [f64], radius: usize) {
    sliding_window_extremum(data, radius, |new, back| back <= new);
}

pub(crate) fn sliding_window_min(data: &mut [f64], radius: usize) {
    sliding_window_extremum(data, radius, |new, back| back >= new);
}

/// Least-squares line through `(x_i, y_i)`; returns `(slope, intercept)`.
pub(crate) fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (0.0, sy / n.max(1.0));
    }
    let slope = (n * sxy - sx * sy) / denom;
    (slope, (sy - slope * sx) / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_max_matches_brute_force() {
        let data = vec![1.0, 5.0, 2.0, 4.0, 3.0, 0.0, 6.0];
        for radius in 0..4 {
            let mut fast = data.clone();
            sliding_window_max(&mut fast, radius);
            for t in 0..data.len() {
                let lo = t.saturating_sub(radius);
                let hi = (t + radius).min(data.len() - 1);
                let slow = data[lo..=hi].iter().copied().fold(f64::MIN, f64::max);
                assert_eq!(fast[t], slow, "t={t} radius={radius}");
            }
        }
    }

    #[test]
    fn window_min_matches_brute_force() {
        let data = vec![1.0, -5.0, 2.0, 4.0, -3.0, 0.0, 6.0];
        let mut fast = data.clone();
        sliding_window_min(&mut fast, 2);
        for t in 0..data.len() {
            let lo = t.saturating_sub(2);
            let hi = (t + 2).min(data.len() - 1);
            let slow = data[lo..=hi].iter().copied().fold(f64::MAX, f64::min);
            assert_eq!(fast[t], slow);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (slope, intercept) = linear_fit(&pts);
        assert!((slope + 0.5).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
    }
}
