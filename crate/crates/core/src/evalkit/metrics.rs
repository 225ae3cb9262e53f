use std::collections::HashSet;

/// Default cutoffs.
pub const MAP_K: usize = 100;
pub const NDCG_K: usize = 10;

/// 1 when the top-ranked item is relevant.
pub fn hit_at_1(order: &[usize], positives: &HashSet<usize>) -> f64 {
    match order.first() {
        Some(top) if positives.contains(top) => 1.0,
        _ => 0.0,
    }
}

/// Average precision over the first `k` ranks, normalized by
/// `min(|positives|, k)`.
pub fn average_precision_at_k(order: &[usize], positives: &HashSet<usize>, k: usize) -> f64 {
    let denom = positives.len().min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in order.iter().take(k).enumerate() {
        if positives.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// Binary-gain NDCG over the first `k` ranks.
pub fn ndcg_at_k(order: &[usize], positives: &HashSet<usize>, k: usize) -> f64 {
    let ideal: f64 = (0..positives.len().min(k))
        .map(|i| 1.0 / ((i + 2) as f64).log2())
        .sum();
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = order
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| positives.contains(item))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    dcg / ideal
}

/// Mean of per-query values; 0 for no queries.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> HashSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn hit_cases() {
        assert_eq!(hit_at_1(&[3, 1, 2], &set(&[3])), 1.0);
        assert_eq!(hit_at_1(&[1, 3, 2], &set(&[3])), 0.0);
        assert_eq!(hit_at_1(&[2, 0, 1], &set(&[0, 1, 2])), 1.0);
    }

    #[test]
    fn ap_cases() {
        let ap = average_precision_at_k(&[7, 0, 8, 1], &set(&[7, 8]), 100);
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision_at_k(&[4, 1], &set(&[4]), 100), 1.0);
        assert_eq!(average_precision_at_k(&[0, 1, 2], &set(&[2]), 2), 0.0);
    }

    #[test]
    fn ndcg_cases() {
        assert!((ndcg_at_k(&[0, 1, 2], &set(&[2]), 10) - 0.5).abs() < 1e-15);
        let order: Vec<usize> = (0..20).collect();
        assert_eq!(ndcg_at_k(&order, &(0..15).collect(), 10), 1.0);
        assert_eq!(ndcg_at_k(&order, &set(&[10]), 10), 0.0);
    }

    #[test]
    fn adjacent_upward_swap_never_hurts() {
        let pos = set(&[2, 5]);
        let before = [0, 1, 2, 3, 4, 5];
        let after = [0, 2, 1, 3, 4, 5];
        assert!(average_precision_at_k(&after, &pos, 100) >= average_precision_at_k(&before, &pos, 100));
        assert!(ndcg_at_k(&after, &pos, 10) >= ndcg_at_k(&before, &pos, 10));
    }

    #[test]
    fn spread() {
        assert_eq!(std_dev(&[1.0]), 0.0);
        assert!((std_dev(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
