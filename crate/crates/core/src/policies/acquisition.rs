use crate::linalg::dot;
use crate::optimize::{coordinate_search, FitOptions};

pub(crate) fn bounding_box(points: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let d = points.first().map_or(0, |p| p.len());
    (0..d)
        .map(|j| {
            points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])))
        })
        .collect()
}

/// Row of the candidate closest to `x` in Euclidean distance; ties go to the
/// lowest row.
pub fn nearest_candidate(x: &[f64], candidates: &[Vec<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let diff: Vec<f64> = c.iter().zip(x).map(|(a, b)| a - b).collect();
        let d2 = dot(&diff, &diff);
        if best.map_or(true, |(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, _)| i)
}

/// Maximizes `acq` over the box by coordinate search from each start point,
/// snaps every local optimum to its nearest candidate and returns the row
/// with the largest acquisition value. `None` if no value was finite.
pub fn maximize_acquisition_projected<F>(
    acq: F,
    bounds: &[(f64, f64)],
    candidates: &[Vec<f64>],
    starts: &[Vec<f64>],
) -> Option<usize>
where
    F: Fn(&[f64]) -> f64,
{
    let width: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let to_x = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .zip(&width)
            .map(|((u, (lo, _)), w)| lo + u * w)
            .collect()
    };
    let opts = FitOptions {
        restarts: 1,
        max_sweeps: 40,
        initial_step: 0.25,
        min_step: 1e-3,
        max_evals: 400,
        ..FitOptions::default()
    };
    let mut best: Option<(usize, f64)> = None;
    for s in starts {
        let u0: Vec<f64> = s
            .iter()
            .zip(bounds)
            .zip(&width)
            .map(|((x, (lo, _)), w)| if *w > 0.0 { (x - lo) / w } else { 0.0 })
            .collect();
        let res = coordinate_search(|u| acq(&to_x(u)), &u0, 0.0, 1.0, &opts);
        let Some(row) = nearest_candidate(&to_x(&res.point), candidates) else {
            continue;
        };
        let v = acq(&candidates[row]);
        if v.is_finite() && best.map_or(true, |(r, b)| v > b || (v == b && row < r)) {
            best = Some((row, v));
        }
    }
    best.map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_lowest_row_on_ties() {
        let c = vec![vec![0.0], vec![2.0], vec![1.0]];
        assert_eq!(nearest_candidate(&[1.0], &c), Some(2));
        assert_eq!(nearest_candidate(&[0.5], &c), Some(0));
        assert_eq!(nearest_candidate(&[1.5], &c), Some(1));
    }

    #[test]
    fn projected_maximum_finds_peak_candidate() {
        let cands: Vec<Vec<f64>> = (0..=20)
            .flat_map(|i| (0..=20).map(move |j| vec![i as f64 / 20.0, j as f64 / 20.0]))
            .collect();
        let acq = |x: &[f64]| -((x[0] - 0.7).powi(2) + (x[1] - 0.2).powi(2));
        let row = maximize_acquisition_projected(acq, &bounding_box(&cands), &cands, &[vec![0.1, 0.9]]).unwrap();
        assert_eq!(cands[row], vec![0.7, 0.2]);
    }
}
