use crate::{Result, StatsError};

fn check(p_values: &[f64]) -> Result<()> {
    match p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(StatsError::InvalidPValue(*p)),
        None => Ok(()),
    }
}

/// Holm-Bonferroni step-down procedure. Returns rejection flags in input order.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    check(p_values)?;
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut flags = vec![false; m];
    for (step, &idx) in order.iter().enumerate() {
        if p_values[idx] <= alpha / (m - step) as f64 {
            flags[idx] = true;
        } else {
            break;
        }
    }
    Ok(flags)
}

/// Holm-adjusted p-values (monotone, capped at 1), in input order.
pub fn holm_adjusted(p_values: &[f64]) -> Result<Vec<f64>> {
    check(p_values)?;
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (step, &idx) in order.iter().enumerate() {
        running = running.max(((m - step) as f64 * p_values[idx]).min(1.0));
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

/// Plain Bonferroni, used as the lower bound Holm must dominate.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    check(p_values)?;
    let m = p_values.len() as f64;
    Ok(p_values.iter().map(|p| *p <= alpha / m).collect())
}
