use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};
use crate::pointset::IGNORED;

/// Class-averaged cross-entropy with a one-hot target: per point
/// `-(1/C) · log softmax(logits)[label]`, averaged over non-ignored points.
///
/// Returns the loss and its gradient with respect to the logits; ignored rows
/// get an exactly zero gradient.
pub fn cross_entropy(logits: &FeatureMatrix, labels: &[u8], ignore: u8) -> Result<(f64, FeatureMatrix)> {
    let (n, c) = logits.shape();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != ignore && l as usize >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {c} classes")));
    }
    let valid = labels.iter().filter(|&&l| l != ignore).count();
    if valid == 0 {
        return Err(Error::EmptySupervision);
    }
    let cf = c as f64;
    let norm = 1.0 / (cf * valid as f64);
    let mut loss = 0.0;
    let mut grad = FeatureMatrix::zeros(n, c);
    for (i, &label) in labels.iter().enumerate() {
        if label == ignore {
            continue;
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[label as usize];
        let g = grad.row_mut(i);
        for (gj, &z) in g.iter_mut().zip(row) {
            *gj = (z - log_z).exp() * norm;
        }
        g[label as usize] -= norm;
    }
    Ok((loss * norm, grad))
}

/// [`cross_entropy`] with the standard ignore value.
pub fn cross_entropy_default(logits: &FeatureMatrix, labels: &[u8]) -> Result<(f64, FeatureMatrix)> {
    cross_entropy(logits, labels, IGNORED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_zero() {
        let logits = FeatureMatrix::from_rows(&[vec![0.0, 800.0, 0.0, 0.0]]).unwrap();
        let (loss, _) = cross_entropy_default(&logits, &[1]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn uniform_logits() {
        for c in [2usize, 4, 7] {
            let logits = FeatureMatrix::zeros(3, c);
            let (loss, _) = cross_entropy_default(&logits, &[0, 1, 255]).unwrap();
            assert!((loss - (c as f64).ln() / c as f64).abs() <= 1e-12);
        }
        let (loss, _) = cross_entropy_default(&FeatureMatrix::zeros(1, 4), &[2]).unwrap();
        assert!((loss - 0.346_573_590_279_972_65).abs() <= 1e-15);
    }

    #[test]
    fn peaked_logits_match_high_precision() {
        let logits = FeatureMatrix::from_rows(&[vec![2.0, 0.0, 0.0, 0.0]]).unwrap();
        let (loss, _) = cross_entropy_default(&logits, &[0]).unwrap();
        // -(1/4) ln(e²/(e²+3)) evaluated at 40 digits
        assert!((loss - 0.085_188_238_478_282_79).abs() <= 1e-15);
    }

    #[test]
    fn ignored_rows_have_zero_gradient() {
        let logits = FeatureMatrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 1.0], vec![0.1, 0.3]]).unwrap();
        let (_, g) = cross_entropy_default(&logits, &[1, 255, 0]).unwrap();
        assert_eq!(g.row(1), &[0.0, 0.0]);
        assert!(g.row(0).iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn all_ignored_is_an_error() {
        let logits = FeatureMatrix::zeros(2, 4);
        assert!(matches!(cross_entropy_default(&logits, &[255, 255]), Err(Error::EmptySupervision)));
        assert!(cross_entropy_default(&logits, &[4, 0]).is_err());
    }
}
