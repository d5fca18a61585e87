#![allow(dead_code)]

use geoequiv::tensor::ChartMetric;

/// Γ^i_{jk} from central differences of the metric values, layout
/// `(i*n+j)*n+k`.
pub fn fd_christoffel(metric: &ChartMetric, x: &[f64], h: f64) -> Vec<f64> {
    let n = metric.dim();
    let g = metric.values(x).unwrap();
    let dg: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            let gp = metric.values(&p).unwrap();
            let gm = metric.values(&m).unwrap();
            gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let ginv = nalgebra::DMatrix::from_row_slice(n, n, &g).try_inverse().unwrap();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(i, l)] * (dg[j][l * n + k] + dg[k][l * n + j] - dg[l][j * n + k]);
                }
                out[(i * n + j) * n + k] = 0.5 * acc;
            }
        }
    }
    out
}

/// R^i_{jkl} = ∂_kΓ^i_{jl} − ∂_lΓ^i_{jk} + Γ^i_{kp}Γ^p_{lj} − Γ^i_{lp}Γ^p_{kj},
/// with every derivative a central difference.
pub fn fd_riemann(metric: &ChartMetric, x: &[f64], h: f64) -> Vec<f64> {
    let n = metric.dim();
    let gam = fd_christoffel(metric, x, h);
    let dgam: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            let a = fd_christoffel(metric, &p, h);
            let b = fd_christoffel(metric, &m, h);
            a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect()
        })
        .collect();
    let c = |i: usize, j: usize, k: usize| gam[(i * n + j) * n + k];
    let mut out = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgam[k][(i * n + j) * n + l] - dgam[l][(i * n + j) * n + k];
                    for p in 0..n {
                        v += c(i, k, p) * c(p, l, j) - c(i, l, p) * c(p, k, j);
                    }
                    out[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    out
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Observed order `log2(e(h) / e(h/2))`.
pub fn observed_order(err: impl Fn(f64) -> f64, h: f64) -> f64 {
    (err(h) / err(h / 2.0)).log2()
}
