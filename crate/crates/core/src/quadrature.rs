//! Globally adaptive Gauss-Kronrod (G7/K15) quadrature for vector-valued
//! integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub value: Vec<f64>,
    /// Sum of per-interval error estimates, max-norm over components.
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &mut F, dim: usize, a: f64, b: f64, buf: &mut [f64]) -> Segment
where
    F: FnMut(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];

    f(c, buf);
    for i in 0..dim {
        k[i] = WGK[7] * buf[i];
        g[i] = WG[3] * buf[i];
    }
    for j in 0..7 {
        let x = h * XGK[j];
        for t in [c - x, c + x] {
            f(t, buf);
            for i in 0..dim {
                k[i] += WGK[j] * buf[i];
                if j % 2 == 1 {
                    g[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..dim {
        k[i] *= h;
        g[i] *= h;
        error = error.max((k[i] - g[i]).abs());
    }
    Segment { a, b, value: k, error }
}

/// Integrates `f` over `[a, b]`; `f(t, out)` fills the `dim` components at `t`.
///
/// Converges when the summed error estimate is below
/// `max(abs_tol, rel_tol * max_i |I_i|)`.
pub fn integrate<F>(mut f: F, dim: usize, a: f64, b: f64, opts: QuadratureOptions) -> Result<QuadratureResult>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    if b == a {
        return Ok(QuadratureResult { value: vec![0.0; dim], error: 0.0, intervals: 0 });
    }
    let first = kronrod(&mut f, dim, a, b, &mut buf);
    let mut total = first.value.clone();
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    loop {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if err <= target {
            // re-sum to shed drift from the running updates
            let mut value = vec![0.0; dim];
            for s in heap.iter() {
                for i in 0..dim {
                    value[i] += s.value[i];
                }
            }
            return Ok(QuadratureResult { value, error: err, intervals: heap.len() });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence { error: err, intervals: heap.len() });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureNonConvergence { error: err, intervals: heap.len() + 1 });
        }
        let left = kronrod(&mut f, dim, worst.a, mid, &mut buf);
        let right = kronrod(&mut f, dim, mid, worst.b, &mut buf);
        for i in 0..dim {
            total[i] += left.value[i] + right.value[i] - worst.value[i];
        }
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(
            |t, out| {
                out[0] = t.powi(10);
                out[1] = 1.0;
            },
            2,
            0.0,
            2.0,
            QuadratureOptions::default(),
        )
        .unwrap();
        assert!((r.value[0] - 2f64.powi(11) / 11.0).abs() < 1e-12);
        assert!((r.value[1] - 2.0).abs() < 1e-15);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn oscillatory_damped_integrand() {
        let r =
            integrate(|t, out| out[0] = (-2.0 * t).exp() * (40.0 * t).cos(), 1, 0.0, 7.0, QuadratureOptions::default())
                .unwrap();
        // Re[(e^{(40i-2)7} - 1) / (40i - 2)]
        let z = num_complex::Complex::new(-2.0, 40.0);
        let want = (((z * 7.0).exp() - 1.0) / z).re;
        assert!((r.value[0] - want).abs() < 1e-13);
    }

    #[test]
    fn reports_nonconvergence() {
        let opts = QuadratureOptions { abs_tol: 0.0, rel_tol: 1e-15, max_intervals: 4 };
        let r = integrate(|t, out| out[0] = (1.0 / (t + 1e-9)).sin(), 1, 0.0, 1.0, opts);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
