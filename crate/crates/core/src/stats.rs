//! Statistical test utilities shared by the samplers, the CLI and the
//! acceptance battery, plus the master-seed splitting scheme.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn binomial_stderr(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("dof > 0");
    1.0 - dist.cdf(statistic)
}

/// Merge adjacent cells until every expected count reaches `min_expected`.
fn merge_bins(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut o_acc = 0.0;
    let mut e_acc = 0.0;
    for (&o, &e) in observed.iter().zip(expected.iter()) {
        o_acc += o;
        e_acc += e;
        if e_acc >= min_expected {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            *o += o_acc;
            *e += e_acc;
        } else {
            obs.push(o_acc);
            exp.push(e_acc);
        }
    }
    (obs, exp)
}

/// Goodness of fit of independent Poisson counts against known means.
/// The statistic is Pearson's with one degree of freedom per merged cell.
pub fn chi_square_poisson_gof(observed: &[f64], expected: &[f64], min_expected: f64) -> ChiSquare {
    let (obs, exp) = merge_bins(observed, expected, min_expected);
    let statistic: f64 = obs
        .iter()
        .zip(exp.iter())
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = obs.len();
    ChiSquare {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Two-sample homogeneity test on a pair of count histograms. Cells are
/// merged on the combined counts until each holds `min_expected`.
pub fn chi_square_two_sample(a: &[f64], b: &[f64], min_expected: f64) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let combined: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
    let (ca, _) = merge_bins(a, &combined, min_expected);
    let (cb, _) = merge_bins(b, &combined, min_expected);
    let ta: f64 = ca.iter().sum();
    let tb: f64 = cb.iter().sum();
    let total = ta + tb;
    if total == 0.0 || ta == 0.0 || tb == 0.0 {
        return ChiSquare {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let mut statistic = 0.0;
    for (&oa, &ob) in ca.iter().zip(cb.iter()) {
        let col = oa + ob;
        if col == 0.0 {
            continue;
        }
        let ea = col * ta / total;
        let eb = col * tb / total;
        statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = ca.len().saturating_sub(1);
    ChiSquare {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Seed-splitting scheme: all randomness flows from one master seed. Stream
/// `replica * 16 + purpose` of a ChaCha8 generator seeded by the master
/// keys each independent replica, with up to 16 independent sub-streams per
/// replica for distinct sampling purposes.
pub fn replica_rng(master: u64, replica: u64, purpose: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replica * 16 + purpose as u64);
    rng
}

/// Outcome of one statistical check.
#[derive(Debug, Clone, Serialize)]
pub struct StatReport {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z_score: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub runtime_s: f64,
    pub detail: String,
}

impl StatReport {
    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let p = match self.p_value {
            Some(p) => format!(" p={p:.4}"),
            None => String::new(),
        };
        format!(
            "[{status}] {}: estimate={:.6} stderr={:.2e} target={:.6} z={:+.2}{} ({:.1}s) {}",
            self.name, self.estimate, self.stderr, self.target, self.z_score, p, self.runtime_s, self.detail
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mean_and_stderr_basic() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_agreement_and_disagreement() {
        let expected: Vec<f64> = (0..20).map(|k| 50.0 + k as f64).collect();
        let close: Vec<f64> = expected.iter().map(|e| e + e.sqrt() * 0.3).collect();
        let far: Vec<f64> = expected.iter().map(|e| e * 1.8).collect();
        assert!(chi_square_poisson_gof(&close, &expected, 5.0).p_value > 0.05);
        assert!(chi_square_poisson_gof(&far, &expected, 5.0).p_value < 1e-6);
    }

    #[test]
    fn two_sample_on_identical_histograms() {
        let a = vec![100.0, 80.0, 60.0, 40.0, 20.0];
        let res = chi_square_two_sample(&a, &a, 5.0);
        assert!(res.p_value > 0.999);
    }

    #[test]
    fn replica_streams_differ_and_reproduce() {
        let mut a = replica_rng(7, 0, 0);
        let mut a2 = replica_rng(7, 0, 0);
        let mut b = replica_rng(7, 1, 0);
        let xa: f64 = a.gen();
        assert_eq!(xa, a2.gen::<f64>());
        assert_ne!(xa, b.gen::<f64>());
    }
}
