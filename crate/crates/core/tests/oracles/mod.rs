//! Reference implementations written independently of the library code. They
//! favour the most literal reading of each definition over speed.
#![allow(dead_code, clippy::needless_range_loop)]

/// Literal n-gram list of `tokens`.
fn grams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].iter().map(|t| t.to_string()).collect())
        .collect()
}

/// Clipped match count by sorting both multisets and merging.
fn clipped_matches(mut hyp: Vec<Vec<String>>, mut reference: Vec<Vec<String>>) -> usize {
    hyp.sort();
    reference.sort();
    let (mut i, mut j, mut m) = (0, 0, 0);
    while i < hyp.len() && j < reference.len() {
        match hyp[i].cmp(&reference[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                m += 1;
                i += 1;
                j += 1;
            }
        }
    }
    m
}

/// Smoothed sentence BLEU over whitespace tokens.
pub fn bleu(hyp: &[&str], reference: &[&str], max_order: usize, epsilon: f64) -> f64 {
    assert!(!hyp.is_empty() && !reference.is_empty());
    let mut product = 1.0f64;
    let mut orders = 0;
    for n in 1..=max_order {
        let h = grams(hyp, n);
        if h.is_empty() {
            break;
        }
        let total = h.len() as f64;
        let m = clipped_matches(h, grams(reference, n));
        product *= if m == 0 { epsilon / total } else { m as f64 / total };
        orders += 1;
    }
    let bp = if hyp.len() < reference.len() {
        (1.0 - reference.len() as f64 / hyp.len() as f64).exp()
    } else {
        1.0
    };
    product.powf(1.0 / orders as f64) * bp
}

pub fn bleu_str(hyp: &str, reference: &str) -> f64 {
    let h: Vec<&str> = hyp.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    bleu(&h, &r, 4, 0.1)
}

/// Pearson as the mean product of z-scores.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sx = (xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n).sqrt();
    xs.iter()
        .zip(ys)
        .map(|(x, y)| ((x - mx) / sx) * ((y - my) / sy))
        .sum::<f64>()
        / n
}

/// Gaussian elimination with partial pivoting on an augmented copy.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

/// Ridge weights (intercept first, intercept unpenalized) via the normal
/// equations and [`gauss_solve`].
pub fn ridge(features: &[Vec<f64>], scores: &[f64], lambda: f64) -> Vec<f64> {
    let p = features[0].len() + 1;
    let design: Vec<Vec<f64>> = features
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &y) in design.iter().zip(scores) {
        for i in 0..p {
            xty[i] += row[i] * y;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, row) in xtx.iter_mut().enumerate().skip(1) {
        row[i] += lambda;
    }
    gauss_solve(&xtx, &xty)
}

/// Consensus decision by sorting every pair: `(excluded, best pair names,
/// best agreement)`. Engines are `(name, priority, translation)`.
pub fn consensus(engines: &[(&str, u32, &str)], threshold: f64) -> (bool, (String, String), f64) {
    let mut pairs = Vec::new();
    for i in 0..engines.len() {
        for j in i + 1..engines.len() {
            let (a, b) = if (engines[i].1, engines[i].0) <= (engines[j].1, engines[j].0) {
                (engines[i], engines[j])
            } else {
                (engines[j], engines[i])
            };
            let agreement = (bleu_str(a.2, b.2) + bleu_str(b.2, a.2)) / 2.0;
            pairs.push((agreement, a.1 + b.1, a.0.to_owned(), b.0.to_owned()));
        }
    }
    pairs.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let best = &pairs[0];
    (best.0 < threshold, (best.2.clone(), best.3.clone()), best.0)
}

/// Every distinct permutation of `tokens`, by brute-force recursion.
pub fn all_permutations(tokens: &[String]) -> std::collections::BTreeSet<Vec<String>> {
    let mut out = std::collections::BTreeSet::new();
    fn rec(rest: &mut Vec<String>, cur: &mut Vec<String>, out: &mut std::collections::BTreeSet<Vec<String>>) {
        if rest.is_empty() {
            out.insert(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let t = rest.remove(i);
            cur.push(t.clone());
            rec(rest, cur, out);
            cur.pop();
            rest.insert(i, t);
        }
    }
    rec(&mut tokens.to_vec(), &mut Vec::new(), &mut out);
    out
}

/// A hand-enumerated BLEU case over whitespace tokens.
pub struct PinnedBleu {
    pub hyp: &'static str,
    pub reference: &'static str,
    pub max_order: usize,
    pub epsilon: f64,
    /// Modified n-gram precision per order, smoothing already applied.
    pub precisions: Vec<f64>,
    pub brevity: f64,
}

impl PinnedBleu {
    pub fn expected(&self) -> f64 {
        let k = self.precisions.len() as f64;
        self.precisions.iter().product::<f64>().powf(1.0 / k) * self.brevity
    }
}

pub fn pinned_bleu() -> Vec<PinnedBleu> {
    let e = std::f64::consts::E;
    let case = |hyp, reference, max_order, epsilon, precisions: Vec<f64>, brevity| PinnedBleu {
        hyp,
        reference,
        max_order,
        epsilon,
        precisions,
        brevity,
    };
    vec![
        case(
            "a b c e",
            "a b c d",
            4,
            0.1,
            vec![3.0 / 4.0, 2.0 / 3.0, 1.0 / 2.0, 0.1 / 1.0],
            1.0,
        ),
        case("the cat sat", "the cat sat", 4, 0.1, vec![1.0, 1.0, 1.0], 1.0),
        case("x y", "a b c d", 4, 0.1, vec![0.1 / 2.0, 0.1 / 1.0], 1.0 / e),
        case(
            "the the the the",
            "the cat",
            4,
            0.1,
            vec![1.0 / 4.0, 0.1 / 3.0, 0.1 / 2.0, 0.1 / 1.0],
            1.0,
        ),
        case("a b", "a b c d e f", 4, 0.1, vec![1.0, 1.0], (-2.0f64).exp()),
        case("a", "a", 4, 0.1, vec![1.0], 1.0),
        case("a", "b c", 4, 0.1, vec![0.1], 1.0 / e),
        case("c b a", "a b c", 4, 0.1, vec![1.0, 0.1 / 2.0, 0.1 / 1.0], 1.0),
        case("a b a b", "a b", 2, 0.1, vec![2.0 / 4.0, 1.0 / 3.0], 1.0),
        case(
            "p q r s t",
            "p q x s t",
            4,
            0.5,
            vec![4.0 / 5.0, 2.0 / 4.0, 0.5 / 3.0, 0.5 / 2.0],
            1.0,
        ),
        case(
            "a b c d e",
            "a b c",
            4,
            0.1,
            vec![3.0 / 5.0, 2.0 / 4.0, 1.0 / 3.0, 0.1 / 2.0],
            1.0,
        ),
        case(
            "a b c d",
            "a b c d e",
            4,
            0.1,
            vec![1.0, 1.0, 1.0, 1.0],
            (-0.25f64).exp(),
        ),
    ]
}
