use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantize, Dataset, TimeSeries};
use crate::error::{Error, Result};

/// Channels whose standard deviation falls below this are mapped to zeros.
pub const MIN_STD: f64 = 1e-8;

/// Balances classes by appending seeded duplicates of existing members until
/// every class matches the majority count. Original items keep their order.
pub fn oversample_balance(d: &Dataset, seed: u64) -> Dataset {
    let members = d.class_members();
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..d.len()).collect();
    for class_members in &members {
        if class_members.is_empty() {
            continue;
        }
        for _ in class_members.len()..target {
            indices.push(class_members[rng.random_range(0..class_members.len())]);
        }
    }
    d.subset(&indices)
        .expect("indices drawn from a valid dataset form a valid dataset")
}

/// Per-channel z-normalization (population standard deviation), quantized
/// like every stored value.
pub fn znormalize_series(s: &TimeSeries) -> TimeSeries {
    let len = s.len();
    let mut out = Vec::with_capacity(s.values().len());
    for c in 0..s.channels() {
        let x = s.channel(c);
        let mean = x.iter().sum::<f64>() / len as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64;
        let std = var.sqrt();
        if std < MIN_STD {
            out.extend(std::iter::repeat_n(0.0, len));
        } else {
            out.extend(x.iter().map(|v| quantize((v - mean) / std)));
        }
    }
    TimeSeries::new(out, s.channels()).expect("normalization keeps values finite")
}

pub fn znormalize(d: &Dataset) -> Dataset {
    d.map_series(znormalize_series)
}

/// Splits each class independently, sending `round(fraction * count)` of its
/// members (seeded shuffle) to the second dataset. Every class keeps at least
/// one member in the first split.
pub fn stratified_split(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::Config(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for mut members in d.class_members() {
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * fraction).round() as usize).min(members.len().saturating_sub(1));
        second.extend_from_slice(&members[..take]);
        first.extend_from_slice(&members[take..]);
    }
    if second.is_empty() {
        return Err(Error::Insufficient("split leaves the second part empty".into()));
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((d.subset(&first)?, d.subset(&second)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset_with_counts(counts: &[usize]) -> Dataset {
        let mut series = Vec::new();
        let mut labels = Vec::new();
        let mut k = 0.0;
        for (class, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                series.push(TimeSeries::univariate(vec![k, k + 1.0, -k]).unwrap());
                labels.push(class);
                k += 1.0;
            }
        }
        Dataset::new(series, labels, counts.len(), vec![]).unwrap()
    }

    #[test]
    fn oversampling_fills_minority_classes() {
        let d = dataset_with_counts(&[10, 4]);
        let b = oversample_balance(&d, 0);
        assert_eq!(b.class_counts(), vec![10, 10]);
        assert_eq!(&b.series()[..14], d.series());
    }

    #[test]
    fn oversampling_balanced_input_is_identity() {
        let d = dataset_with_counts(&[5, 5]);
        assert_eq!(oversample_balance(&d, 1), d);
    }

    #[test]
    fn oversampling_is_seed_reproducible() {
        let d = dataset_with_counts(&[3, 1, 2]);
        let a = oversample_balance(&d, 7);
        let b = oversample_balance(&d, 7);
        assert_eq!(a.class_counts(), vec![3, 3, 3]);
        assert_eq!(a, b);
        // Every appended item duplicates a member of its own class.
        for (s, y) in a.iter().skip(d.len()) {
            assert!(d.iter().any(|(orig, oy)| oy == y && orig == s));
        }
    }

    #[test]
    fn znorm_degenerate_and_two_point() {
        let c = znormalize_series(&TimeSeries::univariate(vec![5.0; 4]).unwrap());
        assert_eq!(c.values(), &[0.0; 4]);
        let t = znormalize_series(&TimeSeries::univariate(vec![0.0, 2.0]).unwrap());
        assert_eq!(t.values(), &[-1.0, 1.0]);
    }

    #[test]
    fn znorm_moments_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let v: Vec<f64> = (0..64)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    3.0 + 2.5 * z
                })
                .collect();
            let z = znormalize_series(&TimeSeries::univariate(v).unwrap());
            let n = z.len() as f64;
            let mean = z.values().iter().sum::<f64>() / n;
            let var = z.values().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            assert!((var.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn split_is_stratified() {
        let d = dataset_with_counts(&[10, 20]);
        let (a, b) = stratified_split(&d, 0.3, 4).unwrap();
        assert_eq!(b.class_counts(), vec![3, 6]);
        assert_eq!(a.class_counts(), vec![7, 14]);
    }

    proptest! {
        #[test]
        fn znorm_is_idempotent(values in proptest::collection::vec(-50.0f64..50.0, 2..40)) {
            let s = TimeSeries::univariate(values).unwrap();
            let once = znormalize_series(&s);
            let twice = znormalize_series(&once);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn oversampling_never_removes_and_is_idempotent(
            counts in proptest::collection::vec(1usize..6, 1..4),
            seed in 0u64..1000,
        ) {
            let d = dataset_with_counts(&counts);
            let b = oversample_balance(&d, seed);
            prop_assert_eq!(&b.series()[..d.len()], d.series());
            prop_assert_eq!(oversample_balance(&b, seed + 1), b);
        }
    }
}
