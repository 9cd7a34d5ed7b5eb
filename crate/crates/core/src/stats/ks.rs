use serde::Serialize;

use super::exact::ExactLaw;

/// Asymptotic Kolmogorov critical value at the 1% level.
pub const KS_CRIT_1PCT: f64 = 1.6276;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub distance: f64,
    pub critical: f64,
    pub pass: bool,
}

/// One-sample KS distance between samples and a discrete exact law.
/// Samples within `tol` (relative) of an atom are counted at that atom.
pub fn ks_one_sample(samples: &[f64], law: &ExactLaw, tol: f64) -> KsReport {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut cum = 0.0;
    for &(v, p) in law.atoms() {
        let slack = tol * v.abs().max(1.0);
        let before = sorted.partition_point(|&x| x < v - slack) as f64 / n;
        d = d.max((before - cum).abs());
        cum += p;
        let upto = sorted.partition_point(|&x| x <= v + slack) as f64 / n;
        d = d.max((upto - cum).abs());
    }
    let critical = KS_CRIT_1PCT / n.sqrt();
    KsReport {
        distance: d,
        critical,
        pass: d < critical,
    }
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsReport {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let critical = KS_CRIT_1PCT * ((n + m) / (n * m)).sqrt();
    KsReport {
        distance: d,
        critical,
        pass: d < critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = [1.0, 2.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).distance, 0.0);
    }

    #[test]
    fn exact_atoms_match() {
        let law = ExactLaw::from_atoms(vec![(1.0, 0.5), (3.0, 0.5)]);
        let s = [1.0, 3.0, 1.0, 3.0];
        assert_eq!(ks_one_sample(&s, &law, 1e-12).distance, 0.0);
        let skewed = [1.0, 1.0, 1.0, 3.0];
        assert!((ks_one_sample(&skewed, &law, 1e-12).distance - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_sampling_passes() {
        let law = ExactLaw::from_atoms(vec![(0.0, 0.3), (1.0, 0.7)]);
        let mut st = Stream::new(5);
        let s: Vec<f64> = (0..100_000)
            .map(|_| if st.open01() < 0.3 { 0.0 } else { 1.0 })
            .collect();
        assert!(ks_one_sample(&s, &law, 1e-12).pass);
    }

    #[test]
    fn shifted_samples_fail() {
        let a: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..2000).map(|i| i as f64 + 500.0).collect();
        assert!(!ks_two_sample(&a, &b).pass);
    }
}
