#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0_f64;
    for (k, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    let en = n.sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Pearson chi-square test that two count vectors share one distribution.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> (f64, f64) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let total = (x + y) as f64;
        if total == 0.0 {
            continue;
        }
        cells += 1;
        let ea = total * na / (na + nb);
        let eb = total * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let df = (cells - 1).max(1) as f64;
    (stat, ChiSquared::new(df).unwrap().sf(stat))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

use influnet::diffusion::{DiffusionParams, SimilarityMatrix, Stance};
use influnet::graph::DirectedNetwork;

/// Six individuals in mixed stances with five competing transitions: one
/// inform jump and four influence jumps with distinct rates.
pub fn six_vertex_fixture() -> (DiffusionParams, Vec<Stance>) {
    use Stance::*;
    let edges = [
        (0, 1),
        (0, 2),
        (1, 2),
        (2, 3),
        (3, 4),
        (4, 5),
        (5, 0),
        (3, 0),
        (1, 4),
        (5, 2),
    ];
    let net = DirectedNetwork::new(6, edges).unwrap();
    let mut tau = vec![0.0; 36];
    let pairs = [
        ((0, 2), 0.8),
        ((3, 4), -0.6),
        ((0, 3), 0.3),
        ((4, 5), -0.9),
        ((1, 5), 0.5),
        ((2, 5), 0.1),
    ];
    for ((i, j), v) in pairs {
        tau[i * 6 + j] = v;
        tau[j * 6 + i] = v;
    }
    let params = DiffusionParams::new(
        vec![-0.5, 0.2, 0.0, 0.4, -0.3, 0.1],
        vec![1.2, 0.5, 2.0, 0.0, 1.5, 0.8],
        SimilarityMatrix::new(6, tau).unwrap(),
        net,
    )
    .unwrap();
    (
        params,
        vec![Support, Unknown, Undecided, Reject, Support, Undecided],
    )
}
