use cpqsd_core::edge::CanonicalKey;
use cpqsd_core::spectral::{build_generator, point_mass, solve, transient, Policy, TruncatedGenerator};

/// Dense transient generator (index = key >> 1) plus the absorption column,
/// written directly from the particle rules on a boolean occupancy vector.
fn dense(depth: usize, lambda: f64, policy: Policy) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = 1 << (depth - 1);
    let mut q = vec![vec![0.0; n]; n];
    let mut absorb = vec![0.0; n];
    for i in 0..n {
        let key = (i << 1) | 1;
        // occ[j] ⇔ site −j infected; extra slots on both sides for moves.
        let occ: Vec<bool> = (0..depth).map(|j| key >> j & 1 == 1).collect();
        // `new` is indexed from the highest possible site downwards.
        let mut apply = |new: Vec<bool>, rate: f64| {
            let mut top = None;
            for (j, &b) in new.iter().enumerate() {
                if b {
                    top = Some(j);
                    break;
                }
            }
            let Some(top) = top else {
                absorb[i] += rate;
                return;
            };
            let rel: Vec<usize> = new.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j - top).collect();
            if rel.iter().any(|&d| d >= depth) {
                match policy {
                    Policy::Kill => {
                        absorb[i] += rate;
                        return;
                    }
                    Policy::Clip => {}
                }
            }
            let k: usize = rel.iter().filter(|&&d| d < depth).map(|&d| 1usize << d).sum();
            let j = k >> 1;
            if j != i {
                q[i][j] += rate;
            }
        };
        for x in 0..depth {
            if !occ[x] {
                continue;
            }
            let mut rec = occ.clone();
            rec[x] = false;
            apply(rec, 1.0);
            // Neighbour deeper down (index x + 1) and higher up (x − 1).
            let mut ext: Vec<bool> = std::iter::once(false).chain(occ.iter().copied()).chain(std::iter::once(false)).collect();
            // ext index e ⇔ depth e − 1.
            for e in [x, x + 2] {
                if !ext[e] {
                    ext[e] = true;
                    apply(ext.clone(), lambda);
                    ext[e] = false;
                }
            }
        }
    }
    for i in 0..n {
        let out: f64 = q[i].iter().sum::<f64>() + absorb[i];
        q[i][i] = -out;
    }
    (q, absorb)
}

fn assert_matches(gen: &TruncatedGenerator, q: &[Vec<f64>], absorb: &[f64]) {
    for i in 0..gen.state_count() {
        let (cols, rates) = gen.row(i);
        let mut row = vec![0.0; gen.state_count()];
        for (&j, &r) in cols.iter().zip(rates) {
            row[j as usize] = r;
        }
        for (j, &r) in row.iter().enumerate() {
            let expect = if i == j { 0.0 } else { q[i][j] };
            assert!((r - expect).abs() < 1e-12, "state {i} → {j}: {r} vs {expect}");
        }
        assert!((gen.absorption(i) - absorb[i]).abs() < 1e-12, "absorption of {i}");
        assert!((gen.exit_rate(i) + q[i][i]).abs() < 1e-12, "exit rate of {i}");
    }
}

#[test]
fn generator_equals_dense_rules() {
    for depth in 1..=7 {
        for lambda in [0.1, 0.5, 1.3] {
            for policy in [Policy::Clip, Policy::Kill] {
                let gen = build_generator(depth as u32, lambda, policy).unwrap();
                let (q, a) = dense(depth, lambda, policy);
                assert_matches(&gen, &q, &a);
            }
        }
    }
}

#[test]
fn depth_two_alpha_closed_form() {
    for lambda in [0.1, 0.5, 1.0, 2.0] {
        // Q = [[−1−2λ, 2λ], [2, −2]]; α = −(top eigenvalue).
        let tr: f64 = -3.0 - 2.0 * lambda;
        let det = 2.0f64;
        let top = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        let alpha = solve(&build_generator(2, lambda, Policy::Clip).unwrap()).unwrap().alpha;
        assert!((alpha + top).abs() < 1e-10, "λ = {lambda}: {alpha} vs {}", -top);
    }
    let alpha = solve(&build_generator(2, 0.5, Policy::Clip).unwrap()).unwrap().alpha;
    assert!((alpha - (2.0 - 2f64.sqrt())).abs() < 1e-10);
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] != 0.0 {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    c
}

/// e^{Qt} by scaling and squaring of a 30-term Taylor series.
fn expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
    let h = t / 2f64.powi(squarings as i32);
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| x * h).collect()).collect();
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = mat_mul(&term, &a).into_iter().map(|r| r.into_iter().map(|x| x / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

#[test]
fn transient_matches_dense_exponential() {
    let depth = 5;
    let gen = build_generator(depth, 0.5, Policy::Clip).unwrap();
    let (q, _) = dense(depth as usize, 0.5, Policy::Clip);
    for t in [0.5, 3.0, 10.0] {
        let e = expm(&q, t);
        for start in [1u64, 0b1011, 0b11111] {
            let v = transient(&gen, &point_mass(&gen, CanonicalKey { key: start, depth }).unwrap(), t).unwrap();
            let row = &e[(start >> 1) as usize];
            for (a, b) in v.iter().zip(row) {
                assert!((a - b).abs() < 1e-10, "t = {t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn eigenpair_satisfies_dense_equations() {
    let depth = 7;
    let gen = build_generator(depth, 0.5, Policy::Kill).unwrap();
    let (q, _) = dense(depth as usize, 0.5, Policy::Kill);
    let s = solve(&gen).unwrap();
    let n = q.len();
    for j in 0..n {
        let left: f64 = (0..n).map(|i| s.nu[i] * q[i][j]).sum();
        assert!((left + s.alpha * s.nu[j]).abs() < 1e-8);
        let right: f64 = (0..n).map(|k| q[j][k] * s.h[k]).sum();
        assert!((right + s.alpha * s.h[j]).abs() < 1e-8);
    }
    assert!(s.nu.iter().all(|&x| x > 0.0) && s.h.iter().all(|&x| x > 0.0));
    assert!((s.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn alpha_converges_in_depth_and_policies_bracket() {
    let alphas: Vec<(f64, f64)> = (8..=16)
        .step_by(2)
        .map(|l| {
            let c = solve(&build_generator(l, 0.5, Policy::Clip).unwrap()).unwrap().alpha;
            let k = solve(&build_generator(l, 0.5, Policy::Kill).unwrap()).unwrap().alpha;
            (c, k)
        })
        .collect();
    for &(c, k) in &alphas {
        assert!(k >= c, "kill {k} < clip {c}");
    }
    let gaps: Vec<f64> = alphas.iter().map(|(c, k)| k - c).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let steps: Vec<f64> = alphas.windows(2).map(|w| (w[1].0 - w[0].0).abs()).collect();
    assert!(steps.windows(2).all(|w| w[1] < w[0]), "{steps:?}");
    assert!(*steps.last().unwrap() < 1e-3);
}
