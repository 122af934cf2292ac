//! Finite-difference kernels: Fornberg stencil weights and the symmetric
//! central stencils used by the Taylor-jet extraction.

/// Fornberg weights on arbitrary nodes: returns `w` with `w[k][j]` such that
/// `f^(k)(z) ≈ Σ_j w[k][j]·f(xs[j])` for `k = 0..=m`. Nodes must be distinct.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len() - 1;
    let mut d = vec![vec![0.0f64; m + 1]; n + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    d[0][0] = 1.0;
    for i in 1..=n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    d[i][k] = c1 * (k as f64 * d[i - 1][k - 1] - c5 * d[i - 1][k]) / c2;
                }
                d[i][0] = -c1 * c5 * d[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                d[j][k] = (c4 * d[j][k] - k as f64 * d[j][k - 1]) / c3;
            }
            d[j][0] = c4 * d[j][0] / c3;
        }
        c1 = c2;
    }
    (0..=m).map(|k| (0..=n).map(|j| d[j][k]).collect()).collect()
}

/// Symmetric integer offsets `-L..=L` giving at least 4th-order accuracy for
/// an order-`m` central derivative stencil.
pub fn central_offsets(m: usize) -> Vec<f64> {
    let l = (m + 3) / 2;
    (-(l as i64)..=l as i64).map(|k| k as f64).collect()
}

/// Weights for the order-`m` derivative on [`central_offsets`] scaled by `h`:
/// `f^(m)(x) ≈ Σ_j w[j]·f(x + offs[j]·h)`.
pub fn central_weights(m: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let offs = central_offsets(m);
    let nodes: Vec<f64> = offs.iter().map(|o| o * h).collect();
    let w = fornberg_weights(0.0, &nodes, m).pop().expect("order m row");
    (nodes, w)
}
