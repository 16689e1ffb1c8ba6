use crate::error::{Error, Result};

/// Shannon entropy in bits of a class-count histogram.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Best binary split of `labels` by thresholding `distances`.
///
/// Thresholds are midpoints between consecutive distinct sorted distances and
/// items with `distance <= δ` form the near side. Returns `(gain, δ)` with the
/// gain in bits; equal gains keep the smallest threshold.
pub fn information_gain(distances: &[f64], labels: &[usize], num_classes: usize) -> Result<(f64, f64)> {
    if distances.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} distances for {} labels",
            distances.len(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Shape(format!("label {y} out of range for {num_classes} classes")));
    }
    if labels.len() < 2 || labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::Degenerate(
            "information gain needs at least two distinct labels".into(),
        ));
    }

    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));

    let mut total = vec![0usize; num_classes];
    for &y in labels {
        total[y] += 1;
    }
    let n = labels.len() as f64;
    let parent = entropy(&total);

    let mut near = vec![0usize; num_classes];
    let mut far = total;
    let mut best = (0.0, distances[order[0]]);
    let mut found = false;
    for w in 0..order.len() - 1 {
        let y = labels[order[w]];
        near[y] += 1;
        far[y] -= 1;
        let (lo, hi) = (distances[order[w]], distances[order[w + 1]]);
        if lo >= hi {
            continue;
        }
        let near_n = (w + 1) as f64;
        let gain = parent - (near_n / n) * entropy(&near) - ((n - near_n) / n) * entropy(&far);
        if !found || gain > best.0 {
            best = (gain, lo + (hi - lo) / 2.0);
            found = true;
        }
    }
    Ok((best.0.max(0.0), best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive oracle: recount the partition from scratch at every midpoint.
    fn brute_force(d: &[f64], y: &[usize], v: usize) -> (f64, f64) {
        let mut sorted: Vec<f64> = d.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut all = vec![0; v];
        y.iter().for_each(|&c| all[c] += 1);
        let h = entropy(&all);
        let mut best: Option<(f64, f64)> = None;
        for pair in sorted.windows(2) {
            let t = pair[0] + (pair[1] - pair[0]) / 2.0;
            let (mut a, mut b) = (vec![0; v], vec![0; v]);
            for (&di, &yi) in d.iter().zip(y) {
                if di <= t {
                    a[yi] += 1
                } else {
                    b[yi] += 1
                }
            }
            let na: usize = a.iter().sum();
            let n = d.len() as f64;
            let g = h - na as f64 / n * entropy(&a) - (n - na as f64) / n * entropy(&b);
            if best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, t));
            }
        }
        best.unwrap_or((0.0, sorted[0]))
    }

    #[test]
    fn perfect_binary_split() {
        let (ig, t) = information_gain(&[0.1, 0.2, 0.9, 1.0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(ig, 1.0);
        assert!((t - 0.55).abs() < 1e-12);
    }

    #[test]
    fn interleaved_labels_match_exhaustive_sweep() {
        // No threshold isolates a class, but an end split still gains a little:
        // H(1/2) - 3/4 H(1/3) = 0.311 bits, first reached at δ = 1.5.
        let d = [1.0, 2.0, 3.0, 4.0];
        let y = [0, 1, 0, 1];
        let (ig, t) = information_gain(&d, &y, 2).unwrap();
        let (bg, bt) = brute_force(&d, &y, 2);
        assert!((ig - bg).abs() < 1e-12);
        assert_eq!(t, bt);
        assert_eq!(t, 1.5);
        assert!((ig - 0.311_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn three_class_split_isolates_one_class() {
        let (ig, t) = information_gain(&[0.0, 0.0, 1.0, 1.0, 2.0, 2.0], &[0, 0, 1, 1, 2, 2], 3).unwrap();
        let expected = 3f64.log2() - 2.0 / 3.0;
        assert!((ig - expected).abs() < 1e-12);
        assert!((ig - 0.918).abs() < 1e-3);
        assert_eq!(t, 0.5);
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(information_gain(&[0.0, 1.0], &[1, 1], 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn all_equal_distances_gain_nothing() {
        assert_eq!(information_gain(&[2.0; 4], &[0, 1, 0, 1], 2).unwrap(), (0.0, 2.0));
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force_and_stays_in_bounds(
            items in proptest::collection::vec((0u8..6, 0usize..3), 2..25),
        ) {
            let d: Vec<f64> = items.iter().map(|(q, _)| *q as f64 * 0.5).collect();
            let y: Vec<usize> = items.iter().map(|(_, c)| *c).collect();
            prop_assume!(y.iter().any(|&c| c != y[0]));
            let (ig, t) = information_gain(&d, &y, 3).unwrap();
            let (bg, bt) = brute_force(&d, &y, 3);
            prop_assert!((ig - bg.max(0.0)).abs() < 1e-12);
            if bg > 1e-12 {
                prop_assert_eq!(t, bt);
            }
            prop_assert!(ig >= 0.0 && ig <= 3f64.log2() + 1e-12);
        }
    }
}
