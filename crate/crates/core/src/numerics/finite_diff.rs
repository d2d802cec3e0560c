/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian of `f` at `x` with step `h`, row-major.
pub fn central_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut probe = x.to_vec();
    let mut eval = |di: usize, si: f64, dj: usize, sj: f64| {
        probe.copy_from_slice(x);
        probe[di] += si * h;
        probe[dj] += sj * h;
        f(&probe)
    };
    let mut hess = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = (eval(i, 1.0, j, 1.0) - eval(i, 1.0, j, -1.0) - eval(i, -1.0, j, 1.0)
                + eval(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}
