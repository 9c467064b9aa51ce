//! Small numerical utilities: adaptive quadrature, bisection, isotonic
//! regression and table interpolation.

/// 15-point Kronrod nodes on [0, 1] (symmetric half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// 7-point Gauss weights, aligned with the odd Kronrod nodes.
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `tol` (absolute). Returns the integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total_err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if total_err <= tol {
            break;
        }
        let (idx, _) = parts.iter().enumerate().max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1)).unwrap();
        let (lo, hi, est) = parts.swap_remove(idx);
        if hi - lo < 1e-12 * (b - a).abs() {
            // Integrable endpoint singularity: accept the piece as is.
            parts.push((lo, hi, (est.0, 0.0)));
            continue;
        }
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// Integrates over `[a, b]` after splitting at the given interior breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    let pieces = breaks.len().saturating_sub(1).max(1);
    breaks.windows(2).map(|w| integrate(&f, w[0], w[1], tol / pieces as f64)).sum()
}

/// Bisection for a root of `f` on `[lo, hi]`, assuming a sign change.
/// Stops when the bracket is narrower than `xtol` or after `max_iter` steps.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> f64 {
    let flo = f(lo);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pool-adjacent-violators: least-squares non-decreasing fit with weights.
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let k = blocks.len();
            if blocks[k - 2].0 <= blocks[k - 1].0 {
                break;
            }
            let (v2, w2, c2) = blocks.pop().unwrap();
            let (v1, w1, c1) = blocks.pop().unwrap();
            let w = w1 + w2;
            let v = if w > 0.0 { (v1 * w1 + v2 * w2) / w } else { 0.5 * (v1 + v2) };
            blocks.push((v, w, c1 + c2));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (v, _, c) in blocks {
        out.extend(std::iter::repeat(v).take(c));
    }
    out
}

/// Piecewise-linear interpolation on a sorted abscissa; clamps outside.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// Piecewise-linear interpolation on a uniform grid `x0 + i*dx`.
#[inline]
pub fn interp_uniform(x0: f64, dx: f64, ys: &[f64], x: f64) -> f64 {
    let p = (x - x0) / dx;
    if p <= 0.0 {
        return ys[0];
    }
    let last = ys.len() - 1;
    if p >= last as f64 {
        return ys[last];
    }
    let k = p as usize;
    let w = p - k as f64;
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
///
/// `xs` strictly increasing; monotone data give a monotone interpolant with a
/// continuous derivative. Evaluation clamps outside the data range.
#[derive(Clone, Debug)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = vec![0.0; n];
        for i in 1..n - 1 {
            if del[i - 1] * del[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if d * d0 <= 0.0 {
                0.0
            } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                d
            }
        };
        if n == 2 {
            ds[0] = del[0];
            ds[1] = del[0];
        } else {
            ds[0] = end(h[0], h[1], del[0], del[1]);
            ds[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Self { xs, ys, ds }
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return None;
        }
        Some(self.xs.partition_point(|&v| v <= x) - 1)
    }

    /// Value and derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let Some(k) = self.locate(x) else {
            return if x <= self.xs[0] { (self.ys[0], self.ds[0]) } else { (self.ys[n - 1], self.ds[n - 1]) };
        };
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let (y0, y1, d0, d1) = (self.ys[k], self.ys[k + 1], self.ds[k] * h, self.ds[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v =
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1;
        let dv = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1;
        (v, dv / h)
    }
}

/// Binary entropy in bits of a probability `p`.
#[inline]
pub fn h2(p: f64) -> f64 {
    let q = 1.0 - p;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if q > 0.0 {
        h -= q * q.log2();
    }
    h
}

/// Binary entropy of the message with L-value `l`, numerically stable for large |l|.
#[inline]
pub fn h_of_l(l: f64) -> f64 {
    let a = l.abs();
    if a.is_infinite() {
        return 0.0;
    }
    // p = 1/(1+e^{-a}) is the larger component.
    let e = (-a).exp();
    let ln1pe = e.ln_1p();
    // H = ln(1+e)/ln2 + a e/(1+e)/ln2
    (ln1pe + a * e / (1.0 + e)) * std::f64::consts::LOG2_E
}
