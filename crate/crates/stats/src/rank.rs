use crate::{Result, StatsError};

/// Ascending midranks (1-based); tied values share the average of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            groups.push(j - i);
        }
        i = j;
    }
    groups
}

/// Kendall's coefficient of concordance for `m` judges ranking the same `n`
/// items. Each row holds one judge's scores or ranks (lower = ranked first);
/// rows are converted to midranks and the standard tie correction is applied.
pub fn kendall_w(rankings: &[Vec<f64>]) -> Result<f64> {
    let m = rankings.len();
    if m == 0 {
        return Err(StatsError::EmptyInput);
    }
    let n = rankings[0].len();
    if n < 2 {
        return Err(StatsError::DegenerateInput("fewer than two items".into()));
    }
    if let Some(row) = rankings.iter().find(|r| r.len() != n) {
        return Err(StatsError::LengthMismatch { left: n, right: row.len() });
    }

    let mut rank_sums = vec![0.0; n];
    let mut tie_correction = 0.0;
    for row in rankings {
        for (sum, r) in rank_sums.iter_mut().zip(midranks(row)) {
            *sum += r;
        }
        tie_correction += tie_groups(row)
            .into_iter()
            .map(|t| (t * t * t - t) as f64)
            .sum::<f64>();
    }
    let mean_sum = rank_sums.iter().sum::<f64>() / n as f64;
    let s: f64 = rank_sums.iter().map(|r| (r - mean_sum).powi(2)).sum();

    let (mf, nf) = (m as f64, n as f64);
    let denom = mf * mf * (nf.powi(3) - nf) - mf * tie_correction;
    if denom <= 0.0 {
        return Err(StatsError::DegenerateInput("all judges tie every item".into()));
    }
    Ok(12.0 * s / denom)
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::DegenerateInput("fewer than two observations".into()));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n * (n - 1) / 2) as i64;
    let count_ties = |eq: &dyn Fn(usize, usize) -> bool| -> i64 {
        let mut total = 0i64;
        let mut run = 1i64;
        for i in 1..n {
            if eq(i - 1, i) {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let n1 = count_ties(&|a, b| pairs[a].0 == pairs[b].0);
    let n3 = count_ties(&|a, b| pairs[a].0 == pairs[b].0 && pairs[a].1 == pairs[b].1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys);
    // ys is now sorted
    let n2 = {
        let mut total = 0i64;
        let mut run = 1i64;
        for i in 1..n {
            if ys[i] == ys[i - 1] {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };

    let denom = (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt();
    if denom == 0.0 {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    let numer = (n0 - n1 - n2 + n3 - 2 * swaps) as f64;
    Ok(numer / denom)
}

// Stable merge sort returning the number of strict inversions.
fn merge_count(v: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as i64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::DegenerateInput("fewer than two observations".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rho: Pearson correlation of midranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    pearson(&midranks(x), &midranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn w_identical_and_balanced() {
        let same = vec![vec![1.0, 2.0, 3.0, 4.0]; 5];
        assert!((kendall_w(&same).unwrap() - 1.0).abs() < 1e-12);
        // Latin square: every item's rank sum is 6.
        let balanced = vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 1.0], vec![3.0, 1.0, 2.0]];
        assert_eq!(kendall_w(&balanced).unwrap(), 0.0);
    }

    #[test]
    fn w_single_item_is_degenerate() {
        assert!(matches!(kendall_w(&[vec![1.0]]), Err(StatsError::DegenerateInput(_))));
    }

    #[test]
    fn tau_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((kendall_tau(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((kendall_tau(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(kendall_tau(&a, &[1.0; 5]), Err(StatsError::DegenerateInput(_))));
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman_rho(&a, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }
}
