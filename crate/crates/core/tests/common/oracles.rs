//! Brute-force references for the rank statistics.

use rand::Rng;

/// AUC by counting every positive/negative pair, ties worth one half.
pub fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

fn u_stat(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for a in x {
        for b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided Mann–Whitney p-value by enumerating every relabelling of the
/// pooled sample: twice the smaller tail, capped at one.
pub fn enumerated_mwu_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let k = x.len();
    let observed = u_stat(x, y);
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, v) in pooled.iter().enumerate() {
            if mask & (1 << i) != 0 {
                a.push(*v);
            } else {
                b.push(*v);
            }
        }
        let u = u_stat(&a, &b);
        total += 1;
        if u <= observed + 1e-9 {
            le += 1;
        }
        if u >= observed - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

/// Two-sided p-value of an AUC difference whose standard deviation is
/// estimated by a class-stratified bootstrap.
pub fn bootstrap_delong_p<R: Rng>(a: &[f64], b: &[f64], labels: &[bool], draws: usize, rng: &mut R) -> f64 {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let diff = pair_count_auc(a, labels) - pair_count_auc(b, labels);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut sa = Vec::with_capacity(labels.len());
    let mut sb = Vec::with_capacity(labels.len());
    let mut sl = Vec::with_capacity(labels.len());
    for _ in 0..draws {
        sa.clear();
        sb.clear();
        sl.clear();
        for (group, label) in [(&pos, true), (&neg, false)] {
            for _ in 0..group.len() {
                let i = group[rng.random_range(0..group.len())];
                sa.push(a[i]);
                sb.push(b[i]);
                sl.push(label);
            }
        }
        let d = pair_count_auc(&sa, &sl) - pair_count_auc(&sb, &sl);
        sum += d;
        sum_sq += d * d;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean) * draws as f64 / (draws - 1) as f64;
    if var <= 0.0 {
        return if diff == 0.0 { 1.0 } else { 0.0 };
    }
    let z = diff.abs() / var.sqrt();
    2.0 * normal_upper(z)
}

/// Upper normal tail by adaptive Simpson integration of the density.
pub fn normal_upper(z: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let hi = z.max(0.0) + 12.0;
    let lo = z.max(0.0);
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let mut s = pdf(lo) + pdf(hi);
    for i in 1..steps {
        let t = lo + h * i as f64;
        s += if i % 2 == 1 { 4.0 * pdf(t) } else { 2.0 * pdf(t) };
    }
    let upper = s * h / 3.0;
    if z >= 0.0 {
        upper
    } else {
        1.0 - upper
    }
}

/// `C(n, i) p^i (1-p)^(n-i)` with the coefficient built by products.
pub fn binomial_pmf(n: u64, i: u64, p: f64) -> f64 {
    let mut c = 1.0f64;
    let i_small = i.min(n - i);
    for j in 0..i_small {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32)
}

pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    (k..=n).map(|i| binomial_pmf(n, i, p)).sum()
}

pub fn binomial_lower_tail(k: u64, n: u64, p: f64) -> f64 {
    (0..=k).map(|i| binomial_pmf(n, i, p)).sum()
}
