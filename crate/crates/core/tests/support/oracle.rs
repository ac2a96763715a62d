//! Direct, unoptimised evaluation of the income model on nested vectors.
//! Shares no code with the library so it can serve as an independent check.
#![allow(clippy::needless_range_loop)]

pub type Mat = Vec<Vec<f64>>;

#[derive(Clone, Debug)]
pub struct Params {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub m: Mat,
}

fn col_sum(mat: &Mat, j: usize) -> f64 {
    mat.iter().map(|row| row[j]).sum()
}

pub fn params(mat: &Mat) -> Params {
    let n = mat.len();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d = col_sum(mat, i);
        let o: f64 = mat[i].iter().sum();
        if d == 0.0 && o == 0.0 {
            alpha[i] = 1.0;
        } else if d >= o {
            alpha[i] = o / d;
        } else {
            alpha[i] = 1.0;
            beta[i] = o - d;
        }
        if o > 0.0 {
            for j in 0..n {
                m[i][j] = mat[i][j] / o;
            }
        }
    }
    Params { alpha, beta, m }
}

pub fn income(mat: &Mat, p: &Params) -> Vec<f64> {
    (0..mat.len()).map(|j| p.alpha[j] * col_sum(mat, j) + p.beta[j]).collect()
}

/// Returns (I_k, M_k) after k income updates starting from `shocked`.
pub fn run(shocked: &Mat, p: &Params, k: usize) -> (Vec<f64>, Mat) {
    let n = shocked.len();
    let mut mat = shocked.clone();
    let mut inc = income(&mat, p);
    for _ in 1..k {
        mat = (0..n).map(|i| (0..n).map(|j| inc[i] * p.m[i][j]).collect()).collect();
        inc = income(&mat, p);
    }
    (inc, mat)
}

fn renormalize_all(m: &mut Mat) {
    for row in m.iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
    }
}

pub fn delete_node(mat: &Mat, p: &Params, i: usize) -> (Mat, Params) {
    let n = mat.len();
    let mut mat = mat.clone();
    let mut q = p.clone();
    for r in 0..n {
        mat[i][r] = 0.0;
        mat[r][i] = 0.0;
        q.m[i][r] = 0.0;
        q.m[r][i] = 0.0;
    }
    renormalize_all(&mut q.m);
    q.alpha[i] = 0.0;
    q.beta[i] = 0.0;
    (mat, q)
}

pub fn delete_link(mat: &Mat, p: &Params, i: usize, j: usize) -> (Mat, Params) {
    let mut mat = mat.clone();
    let mut q = p.clone();
    mat[i][j] = 0.0;
    mat[j][i] = 0.0;
    q.m[i][j] = 0.0;
    q.m[j][i] = 0.0;
    renormalize_all(&mut q.m);
    (mat, q)
}

pub fn perturb_node(mat: &Mat, p: &Params, i: usize, a: f64, b: f64) -> (Mat, Params) {
    if a == 0.0 && b == 0.0 {
        return delete_node(mat, p, i);
    }
    let n = mat.len();
    let mut mat = mat.clone();
    let mut q = p.clone();
    for r in 0..n {
        mat[i][r] *= a;
        q.m[i][r] *= a;
    }
    for r in 0..n {
        mat[r][i] *= b;
        q.m[r][i] *= b;
    }
    renormalize_all(&mut q.m);
    q.alpha[i] *= b / a;
    (mat, q)
}

pub fn total(v: &[f64]) -> f64 {
    v.iter().sum()
}

pub fn power(mat: &Mat, p: &Params, i: usize, k: usize) -> f64 {
    let base = total(&income(mat, p));
    let (shocked, q) = delete_node(mat, p, i);
    1.0 - total(&run(&shocked, &q, k).0) / base
}

pub struct MeaOutcome {
    pub order: Vec<usize>,
    pub robustness: f64,
    pub fractions: Vec<f64>,
}

pub fn mea(mat0: &Mat, k: usize, stop: f64) -> MeaOutcome {
    let n = mat0.len();
    let mut p = params(mat0);
    let original = income(mat0, &p);
    let grand = total(&original);
    let mut mat = mat0.clone();
    let mut current = grand;
    let mut deleted: Vec<usize> = Vec::new();
    let mut fractions = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !deleted.contains(i)) {
            let (shocked, q) = delete_node(&mat, &p, i);
            let pow = 1.0 - total(&run(&shocked, &q, k).0) / current;
            if best.is_none_or(|(_, b)| pow > b) {
                best = Some((i, pow));
            }
        }
        let (j, _) = best.expect("live node");
        let (shocked, q) = delete_node(&mat, &p, j);
        let (inc, next) = run(&shocked, &q, k);
        deleted.push(j);
        let frac = total(&inc) / grand;
        fractions.push(frac);
        if frac < stop {
            break;
        }
        mat = next;
        p = q;
        current = total(&inc);
    }
    let robustness = deleted.iter().map(|&j| original[j]).sum::<f64>() / grand;
    MeaOutcome { order: deleted, robustness, fractions }
}

pub fn link_impact(mat: &Mat, i: usize, j: usize, k: usize) -> f64 {
    let p = params(mat);
    let base = total(&income(mat, &p));
    let (shocked, q) = delete_link(mat, &p, i, j);
    100.0 * (total(&run(&shocked, &q, k).0) - base) / base
}

/// dropped[i][j]: perturbing i pushes j below (1 - threshold) of baseline.
pub fn drop_matrix(mat: &Mat, a: f64, b: f64, k: usize, threshold: f64) -> Vec<Vec<bool>> {
    let n = mat.len();
    let p = params(mat);
    let base = income(mat, &p);
    (0..n)
        .map(|i| {
            let (shocked, q) = perturb_node(mat, &p, i, a, b);
            let after = run(&shocked, &q, k).0;
            (0..n).map(|j| j != i && base[j] > 0.0 && after[j] < (1.0 - threshold) * base[j]).collect()
        })
        .collect()
}
