//! Shapiro-Wilk normality test (Royston's AS R94 algorithm), valid for
//! sample sizes 3..=50 as used here.

use crate::error::{Error, Result};

use super::special::{norm_ppf, norm_sf};

/// Ascending-coefficient polynomial evaluation.
fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Shapiro-Wilk statistic and p-value.
///
/// `W ∈ (0, 1]` measures agreement between the sample's order
/// statistics and expected normal scores; the p-value comes from
/// Royston's normalizing transformation (exact for n = 3).
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if !(3..=50).contains(&n) {
        return Err(Error::Numeric(format!(
            "shapiro_wilk: sample size must be in 3..=50, got {n}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("shapiro_wilk: non-finite sample value".into()));
    }
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    if x[n - 1] - x[0] <= 0.0 {
        return Err(Error::Numeric(
            "shapiro_wilk: sample has zero range".into(),
        ));
    }

    let nn2 = n / 2;
    let mut weights = vec![0.0f64; nn2];
    if n == 3 {
        weights[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        // Blom normal scores for the lower half (all negative).
        let m: Vec<f64> = (1..=nn2)
            .map(|i| norm_ppf((i as f64 - 0.375) / (n as f64 + 0.25)).expect("p in (0,0.5)"))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / (n as f64).sqrt();
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first_free, fac) = if n > 5 {
            let a2 = poly(&C2, rsn) - m[1] / ssumm2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            weights[0] = a1;
            weights[1] = a2;
            (2usize, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            weights[0] = a1;
            (1usize, fac)
        };
        for i in first_free..nn2 {
            weights[i] = -m[i] / fac;
        }
    }

    let mean = x.iter().sum::<f64>() / n as f64;
    let ssq: f64 = x.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let num: f64 = weights
        .iter()
        .enumerate()
        .map(|(i, &a)| a * (x[n - 1 - i] - x[i]))
        .sum();
    let w = (num * num / ssq).min(1.0);

    let p = if n == 3 {
        let p = 6.0 / std::f64::consts::PI
            * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        p.clamp(0.0, 1.0)
    } else {
        let z = if n <= 11 {
            let nf = n as f64;
            let g = poly(&[-2.273, 0.459], nf);
            let inner = g - (1.0 - w).ln();
            if inner <= 0.0 {
                // W so small the transform saturates: decisively non-normal.
                return Ok((w, 0.0));
            }
            let y = -inner.ln();
            let mu = poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf);
            let sigma = poly(&[1.3822, -0.77857, 0.062767, -2.0322e-3], nf).exp();
            (y - mu) / sigma
        } else {
            let ln_n = (n as f64).ln();
            let y = (1.0 - w).ln();
            let mu = poly(&[-1.5861, -0.31082, -0.083751, 3.8915e-3], ln_n);
            let sigma = poly(&[-0.4803, -0.082676, 3.0302e-3], ln_n).exp();
            (y - mu) / sigma
        };
        if !z.is_finite() {
            if z < 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            norm_sf(z).clamp(0.0, 1.0)
        }
    };
    Ok((w, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (|diff| = {:.3e})",
            (got - want).abs()
        );
    }

    #[test]
    fn reference_sample_n11() {
        // The n=11 body-weight sample used to exercise the published
        // algorithm; reference (W, p) from an independent
        // implementation of AS R94.
        let x = [148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0];
        let (w, p) = shapiro_wilk(&x).unwrap();
        close(w, 0.7888146948631716, 1e-9);
        close(p, 0.006703814061898823, 5e-9);
    }

    #[test]
    fn linear_ramp_is_near_normal() {
        let x: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let (w, p) = shapiro_wilk(&x).unwrap();
        assert!(w > 0.95, "W = {w}");
        close(w, 0.9701646110856056, 1e-9);
        close(p, 0.8923673061902978, 5e-9);
    }

    #[test]
    fn exact_small_n3() {
        let (w, p) = shapiro_wilk(&[2.1, 3.4, 1.9]).unwrap();
        close(w, 0.8479899497487435, 1e-12);
        close(p, 0.23508923424205008, 1e-12);
    }

    #[test]
    fn n12_uses_log_branch() {
        let x = [35.0, 23.0, 12.0, 10.0, 18.0, 41.0, 27.0, 8.0, 31.0, 22.0, 15.0, 29.0];
        let (w, p) = shapiro_wilk(&x).unwrap();
        close(w, 0.9694977951116115, 1e-9);
        close(p, 0.9054723188098259, 5e-9);
    }

    #[test]
    fn skewed_sample_rejected_as_non_normal() {
        let x = [
            1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 4.0, 5.0, 6.0, 7.0, 9.0, 12.0, 15.0, 20.0,
            26.0, 35.0, 47.0, 60.0, 80.0,
        ];
        let (w, p) = shapiro_wilk(&x).unwrap();
        close(w, 0.738578796641868, 1e-9);
        close(p, 0.00011979325040630312, 5e-9);
    }

    #[test]
    fn sample_size_bounds() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        let too_big: Vec<f64> = (0..51).map(f64::from).collect();
        assert!(shapiro_wilk(&too_big).is_err());
        let ok: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.01).collect();
        assert!(shapiro_wilk(&ok).is_ok());
    }

    #[test]
    fn zero_range_rejected() {
        assert!(shapiro_wilk(&[5.0, 5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn location_and_scale_invariant() {
        let x = [0.3, -1.2, 0.8, 2.1, -0.4, 0.9, 1.5, -0.7];
        let (w0, p0) = shapiro_wilk(&x).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| 3.0 * v + 17.0).collect();
        let (w1, p1) = shapiro_wilk(&shifted).unwrap();
        close(w0, w1, 1e-12);
        close(p0, p1, 1e-12);
    }
}
