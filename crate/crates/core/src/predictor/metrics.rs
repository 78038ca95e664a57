use crate::domain::DemandVector;
use crate::error::{Error, Result};

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions",
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2Report {
    /// `None` where the region's actual counts have zero variance.
    pub per_region: Vec<Option<f64>>,
    /// All (video, region) pairs pooled into one series.
    pub pooled: f64,
}

pub fn r_squared_report(actual: &[DemandVector], predicted: &[Vec<f64>]) -> Result<R2Report> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions",
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let n = actual.first().map_or(0, DemandVector::len);
    let mut per_region = Vec::with_capacity(n);
    for r in 0..n {
        let a: Vec<f64> = actual.iter().map(|d| d.get(r) as f64).collect();
        let p: Vec<f64> = predicted.iter().map(|p| p[r]).collect();
        per_region.push(match r_squared(&a, &p) {
            Ok(v) => Some(v),
            Err(Error::ZeroVariance) => None,
            Err(e) => return Err(e),
        });
    }
    let a: Vec<f64> = actual
        .iter()
        .flat_map(|d| d.counts().iter().map(|&c| c as f64))
        .collect();
    let p: Vec<f64> = predicted.iter().flatten().copied().collect();
    Ok(R2Report {
        per_region,
        pooled: r_squared(&a, &p)?,
    })
}
