//! Fixed-grid quadrature rules shared by the mode, source and detector code.

use num_complex::Complex64;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * x * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            // p1 = P_n(x), p2 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Points per panel of the composite Gauss–Legendre rule.
pub const GL_ORDER: usize = 8;

/// Composite Gauss–Legendre integral of a complex function over [a, b].
///
/// `n_points` is the total evaluation budget; it is split into panels of
/// [`GL_ORDER`] points each.
pub fn composite_gauss_legendre<F>(f: F, a: f64, b: f64, n_points: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let (x, w) = gauss_legendre(GL_ORDER);
    let panels = (n_points / GL_ORDER).max(1);
    let h = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut acc = Complex64::new(0.0, 0.0);
        for (xi, wi) in x.iter().zip(&w) {
            acc += f(mid + 0.5 * h * xi) * *wi;
        }
        total += acc * (0.5 * h);
    }
    total
}

/// Composite Simpson integral of uniformly spaced samples. `samples.len()`
/// must be odd (an even number of intervals).
pub fn simpson(samples: &[Complex64], h: f64) -> Complex64 {
    debug_assert!(samples.len() % 2 == 1 && samples.len() >= 3);
    let n = samples.len() - 1;
    let mut acc = samples[0] + samples[n];
    for (i, s) in samples.iter().enumerate().take(n).skip(1) {
        acc += *s * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// Running trapezoid integral: `out[i] = ∫_{t_0}^{t_i} y dt`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        out.push(acc);
    }
    out
}

/// Locate `t` in a strictly increasing grid: returns `(i, frac)` such that
/// `t = grid[i] + frac * (grid[i+1] - grid[i])`. Caller guarantees
/// `grid[0] <= t <= grid[last]`.
pub fn bracket(grid: &[f64], t: f64) -> (usize, f64) {
    let last = grid.len() - 1;
    if t >= grid[last] {
        return (last.saturating_sub(1), if last == 0 { 0.0 } else { 1.0 });
    }
    let i = grid.partition_point(|&g| g <= t).saturating_sub(1);
    let frac = (t - grid[i]) / (grid[i + 1] - grid[i]);
    (i, frac)
}
