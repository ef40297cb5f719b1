//! Test-set metrics.

use crate::error::{Error, Result};
use crate::loss::sigmoid;

fn check(y: &[f64], pred: &[f64]) -> Result<()> {
    if y.len() != pred.len() {
        return Err(Error::data(format!("{} labels for {} predictions", y.len(), pred.len())));
    }
    if y.is_empty() {
        return Err(Error::data("metric over an empty set"));
    }
    Ok(())
}

/// Mean of `(y − ŷ)²`.
pub fn mse(y: &[f64], pred: &[f64]) -> Result<f64> {
    check(y, pred)?;
    Ok(y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Area under the ROC curve from scores of any monotone scale. Tied scores
/// get their average rank.
pub fn auc(y: &[f64], score: &[f64]) -> Result<f64> {
    check(y, score)?;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && score[order[j + 1]] == score[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if y[idx] == 1.0 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let pos = y.iter().filter(|&&v| v == 1.0).count() as f64;
    let neg = y.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::data("AUC needs both classes"));
    }
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Mean binary cross-entropy for raw scores `g` (probabilities `sigmoid(g)`).
pub fn logloss(y: &[f64], g: &[f64]) -> Result<f64> {
    check(y, g)?;
    let total: f64 = y
        .iter()
        .zip(g)
        .map(|(&y, &g)| {
            let p = sigmoid(g).clamp(1e-15, 1.0 - 1e-15);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_basic() {
        assert_eq!(mse(&[1.0, 2.0], &[0.0, 4.0]).unwrap(), 2.5);
        assert!(mse(&[1.0], &[]).is_err());
    }

    #[test]
    fn auc_against_pair_count() {
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let s = [0.1, 0.4, 0.4, 0.9, 0.2, 0.3];
        // fraction of (pos, neg) pairs ordered correctly, ties count half
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if y[i] == 1.0 && y[j] == 0.0 {
                    pairs += 1.0;
                    wins += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        assert!((auc(&y, &s).unwrap() - wins / pairs).abs() < 1e-12);
        assert!(auc(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn logloss_at_zero_score() {
        let v = logloss(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
