//! Regression metrics shared by the surrogate crates.

/// Mean squared error.
pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    assert!(!pred.is_empty());
    pred.iter()
        .zip(truth)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / pred.len() as f64
}

/// Coefficient of determination, R^2 = 1 - SS_res / SS_tot.
pub fn r2(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    assert!(!pred.is_empty());
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).sum();
    let ss_tot: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            return 1.0;
        }
        return f64::NEG_INFINITY;
    }
    1.0 - ss_res / ss_tot
}

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    assert!(!pred.is_empty());
    100.0
        * pred
            .iter()
            .zip(truth)
            .map(|(p, y)| ((p - y) / y).abs())
            .sum::<f64>()
        / pred.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_of_constant_mean_predictor_is_zero() {
        let truth = [1.0, 2.0, 3.0, 4.0];
        let mean = 2.5;
        let pred = [mean; 4];
        assert!(r2(&pred, &truth).abs() < 1e-12);
    }

    #[test]
    fn r2_perfect_prediction_is_one() {
        let truth = [1.0, -2.0, 0.5];
        assert_eq!(r2(&truth, &truth), 1.0);
    }

    #[test]
    fn mape_simple() {
        let truth = [2.0, 4.0];
        let pred = [1.8, 4.4];
        assert!((mape(&pred, &truth) - 10.0).abs() < 1e-12);
    }
}
