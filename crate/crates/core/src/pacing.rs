//! Decimation pace: schedules, DP and continuous optimization, delta-area
//! accounting and the MSE estimate.
//!
//! A pace is a table `x(l)` of target `I_bc` values for `l = 0..L`. The
//! quantizer asks it for `Delta+(x) = x(l(x) + 1) - x`, the increase of `I_bc`
//! required in the next iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate, interp};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PaceSchedule {
    /// `x[0] = 0 < x[1] < ... < x[L] = 1`.
    pub x: Vec<f64>,
}

impl PaceSchedule {
    /// `x(l) = l / L`.
    pub fn uniform(l: usize) -> Self {
        let l = l.max(1);
        Self { x: (0..=l).map(|i| i as f64 / l as f64).collect() }
    }

    /// `x(l) = 1 - (1 - l/L)^{2(d_b-1)/d_b}`.
    pub fn approx(d_b: usize, l: usize) -> Self {
        let l = l.max(1);
        let e = 2.0 * (d_b as f64 - 1.0) / d_b as f64;
        let mut x: Vec<f64> = (0..=l).map(|i| 1.0 - (1.0 - i as f64 / l as f64).powf(e)).collect();
        x[l] = 1.0;
        Self { x }
    }

    /// Validates and wraps a table.
    pub fn from_table(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x[0] != 0.0 || (x[x.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("pace table must run from 0 to 1".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("pace table must be strictly increasing".into()));
        }
        let mut x = x;
        let last = x.len() - 1;
        x[last] = 1.0;
        Ok(Self { x })
    }

    /// Number of iterations `L`.
    pub fn len(&self) -> usize {
        self.x.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.x.len() < 2
    }

    /// `x(l)` by linear interpolation; `l` beyond `L` gives 1.
    pub fn x_of_l(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        if l >= self.len() as f64 {
            return 1.0;
        }
        let k = l.floor() as usize;
        let w = l - k as f64;
        self.x[k] + w * (self.x[k + 1] - self.x[k])
    }

    /// Inverse of [`Self::x_of_l`].
    pub fn l_of_x(&self, x: f64) -> f64 {
        let ls: Vec<f64> = (0..self.x.len()).map(|i| i as f64).collect();
        interp(&self.x, &ls, x)
    }

    /// Required increase of `I_bc` in the next iteration when it is at `x`.
    pub fn delta_plus(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        (self.x_of_l(self.l_of_x(x) + 1.0) - x).max(0.0)
    }
}

/// The EXIT functions `f`, `g`, `h` and their derivatives.
///
/// `I_cb = I_c f(I_bc)`, `I_bc' = 1 - (1 - I_b) g(1 - I_cb)`,
/// `I_b^ext = 1 - h(1 - I_cb)`.
pub trait ExitModel {
    fn f(&self, x: f64) -> f64;
    fn f_prime(&self, x: f64) -> f64;
    fn g(&self, y: f64) -> f64;
    fn g_prime(&self, y: f64) -> f64;
    fn h(&self, y: f64) -> f64;
    fn h_prime(&self, y: f64) -> f64;
}

/// EA curves of a binary distribution: `f = sum v_d x^{d-1}`,
/// `g = y^{d_b-1}`, `h = y^{d_b}`.
pub struct EaModel<'a> {
    pub dist: &'a crate::codes::DegreeDistribution,
}

impl ExitModel for EaModel<'_> {
    fn f(&self, x: f64) -> f64 {
        self.dist.poly(x)
    }
    fn f_prime(&self, x: f64) -> f64 {
        self.dist.poly_deriv(x)
    }
    fn g(&self, y: f64) -> f64 {
        y.powi(self.dist.d_b as i32 - 1)
    }
    fn g_prime(&self, y: f64) -> f64 {
        let db = self.dist.d_b as i32;
        (db - 1) as f64 * y.powi(db - 2)
    }
    fn h(&self, y: f64) -> f64 {
        y.powi(self.dist.d_b as i32)
    }
    fn h_prime(&self, y: f64) -> f64 {
        let db = self.dist.d_b as i32;
        db as f64 * y.powi(db - 1)
    }
}

/// Output of [`dp_optimal_pace`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DpPace {
    pub schedule: PaceSchedule,
    /// Area below the actual curve.
    pub a_d: f64,
    /// Whether the monotonicity of `I_b` had to be imposed.
    pub constrained: bool,
}

/// Number of `I_bc` grid points in the DP.
pub const DP_GRID: usize = 1024;

/// MIs reached in one iteration from `I_bc = x` to target `I_bc = x'`.
struct Step {
    ib: f64,
    ibext: f64,
}

fn step<M: ExitModel + ?Sized>(m: &M, ic: f64, x: f64, x_next: f64) -> Step {
    let y = 1.0 - ic * m.f(x);
    let g = m.g(y).max(1e-300);
    Step { ib: 1.0 - (1.0 - x_next) / g, ibext: 1.0 - m.h(y) }
}

/// Maximizes the area below the actual curve over `I_bc^{(1..L-1)}` by
/// dynamic programming on a uniform grid of `DP_GRID` points.
///
/// If the unconstrained optimum violates `I_b^{(l)} <= I_b^{(l+1)}`, the
/// constraint is imposed greedily during the recursion.
pub fn dp_optimal_pace<M: ExitModel + ?Sized>(m: &M, ic: f64, l: usize) -> DpPace {
    let l = l.max(1);
    let first = 1.0 - m.h(1.0 - ic * m.f(0.0));
    if l == 1 {
        return DpPace { schedule: PaceSchedule::uniform(1), a_d: first, constrained: false };
    }
    let run = |constrained: bool| {
        let np = DP_GRID;
        let xs: Vec<f64> = (0..np).map(|i| i as f64 / (np - 1) as f64).collect();
        // Per grid node: y, g(y), h(y).
        let gy: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                let y = 1.0 - ic * m.f(x);
                (m.g(y).max(1e-300), m.h(y))
            })
            .collect();
        // a_next[i] = A^{(l+1)}(x_i), ib_next[i] = I_b^{(l+1)} chosen at x_i.
        let mut a_next = vec![0.0; np];
        let mut ib_next = vec![1.0; np];
        // A^{(L)} = 0 with I_bc^{(L)} = 1; I_b^{(L)} = 1 at every x.
        let mut choices: Vec<Vec<u32>> = Vec::with_capacity(l);
        // At stage l (1..L-1) the variable is I_bc^{(l)} = x_k given I_bc^{(l-1)} = x_i.
        // Term: (1 - I_b^{(l)}) (I_bext^{(l+1)} - I_bext^{(l)}) with
        // I_b^{(l)} = 1 - (1 - x_k)/g(y(x_i)), I_bext^{(l)} = 1 - h(y(x_i)).
        for stage in (1..l).rev() {
            let mut a_cur = vec![f64::NEG_INFINITY; np];
            let mut ib_cur = vec![1.0; np];
            let mut ch = vec![0u32; np];
            for i in 0..np {
                let (g_i, h_i) = gy[i];
                for k in i..np {
                    let ib = 1.0 - (1.0 - xs[k]) / g_i;
                    if constrained && ib > ib_next[k] + 1e-12 {
                        continue;
                    }
                    let (_, h_k) = gy[k];
                    // (1 - I_b^{(l)}) = (1 - x_k)/g_i; Delta I_bext = h_i - h_k.
                    let v = (1.0 - xs[k]) / g_i * (h_i - h_k) + a_next[k];
                    if v > a_cur[i] {
                        a_cur[i] = v;
                        ib_cur[i] = ib;
                        ch[i] = k as u32;
                    }
                }
                if a_cur[i] == f64::NEG_INFINITY {
                    a_cur[i] = a_next[np - 1];
                    ch[i] = (np - 1) as u32;
                    ib_cur[i] = 1.0;
                }
            }
            let _ = stage;
            choices.push(ch);
            a_next = a_cur;
            ib_next = ib_cur;
        }
        choices.reverse();
        let mut x = vec![0.0];
        let mut idx = 0usize;
        let mut violated = false;
        let mut prev_ib = 0.0;
        for ch in &choices {
            let k = ch[idx] as usize;
            let ib = 1.0 - (1.0 - xs[k]) / gy[idx].0;
            if ib < prev_ib - 1e-9 {
                violated = true;
            }
            prev_ib = ib;
            idx = k;
            x.push(xs[k]);
        }
        x.push(1.0);
        (x, a_next[0], violated)
    };
    let (x, a, violated) = run(false);
    let (x, a, constrained) = if violated {
        let (x, a, _) = run(true);
        (x, a, true)
    } else {
        (x, a, false)
    };
    // Repeated grid points make the schedule non-strict; nudge them apart.
    let mut x = x;
    for i in 1..x.len() {
        if x[i] <= x[i - 1] {
            x[i] = (x[i - 1] + 1e-9).min(1.0);
        }
    }
    let last = x.len() - 1;
    x[last] = 1.0;
    for i in (1..last).rev() {
        if x[i] >= x[i + 1] {
            x[i] = x[i + 1] - 1e-9;
        }
    }
    DpPace { schedule: PaceSchedule { x }, a_d: a + first, constrained }
}

/// Area below the actual curve for a given schedule, from the EXIT model.
pub fn schedule_area<M: ExitModel + ?Sized>(m: &M, ic: f64, pace: &PaceSchedule) -> f64 {
    let mut a = 0.0;
    let mut prev_ib = 0.0;
    let mut prev_ext = 0.0;
    for w in pace.x.windows(2) {
        let s = step(m, ic, w[0], w[1]);
        a += (1.0 - prev_ib) * (s.ibext - prev_ext);
        prev_ib = s.ib;
        prev_ext = s.ibext;
    }
    a
}

/// `L A_i` for the optimal continuous pace:
/// `(int_0^1 sqrt(I_c f'(x) h'(y) / g(y)) dx)^2`.
pub fn lai_continuous<M: ExitModel + ?Sized>(m: &M, ic: f64) -> f64 {
    let v = integrate(
        |x| {
            let y = 1.0 - ic * m.f(x);
            (ic * m.f_prime(x) * m.h_prime(y) / m.g(y).max(1e-300)).max(0.0).sqrt()
        },
        0.0,
        1.0,
        1e-10,
    );
    v * v
}

/// `L A_i` for uniform pacing: `int_0^1 I_c f'(x) h'(y) / g(y) dx`.
pub fn lai_uniform<M: ExitModel + ?Sized>(m: &M, ic: f64) -> f64 {
    integrate(
        |x| {
            let y = 1.0 - ic * m.f(x);
            ic * m.f_prime(x) * m.h_prime(y) / m.g(y).max(1e-300)
        },
        0.0,
        1.0,
        1e-10,
    )
}

/// `L A_i` for a pace given as `dx/dl = L^{-1} rate(x)`:
/// `A_i = int Delta I_b(x) I_c f'(x) h'(y) dx` with `Delta I_b = (dx/dl)/g(y)`,
/// normalized so that `int dl/dx dx = L`.
pub fn lai_for_rate<M: ExitModel + ?Sized, F: Fn(f64) -> f64>(m: &M, ic: f64, rate: F) -> f64 {
    // L = int dx / (dx/dl); with dx/dl = rate(x)/L this is int dx / rate(x) = 1.
    let norm = integrate(|x| 1.0 / rate(x).max(1e-300), 0.0, 1.0, 1e-10);
    integrate(
        |x| {
            let y = 1.0 - ic * m.f(x);
            rate(x) * norm / m.g(y).max(1e-300) * ic * m.f_prime(x) * m.h_prime(y)
        },
        0.0,
        1.0,
        1e-10,
    )
}

/// `L A_i` for the closed-form pace `dx/dl ~ (1-x)^{(d_b-2)/(2(d_b-1))}`.
pub fn lai_approx<M: ExitModel + ?Sized>(m: &M, ic: f64, d_b: usize) -> f64 {
    let a = (d_b as f64 - 2.0) / (2.0 * (d_b as f64 - 1.0));
    lai_for_rate(m, ic, |x| (1.0 - x).max(0.0).powf(a))
}

/// Closed-form `L A_i` under EA with the close-fit approximation.
pub fn lai_ea_close_fit(d_b: usize) -> f64 {
    4.0 * (d_b as f64 - 1.0) / d_b as f64
}

/// The close-fit model: EBP curve with `I_b^* = 0`, i.e. `x = 1 - g(y)`,
/// under EA forms. `f` is defined implicitly by `I_c f'(x) g'(y) = 1`.
pub struct CloseFitEa {
    pub d_b: usize,
}

impl CloseFitEa {
    /// `L A_i` from the continuous optimum applied to this model:
    /// `(int sqrt(I_c f' h'/g) dx)^2` with `I_c f' = 1/g'(y)` and
    /// `dx = -g'(y) dy`, i.e. `(int_0^1 sqrt(g'(y) h'(y)/g(y)) dy)^2`.
    pub fn lai(&self) -> f64 {
        let db = self.d_b as i32;
        let v = integrate(
            |y: f64| {
                let g = y.powi(db - 1);
                let gp = (db - 1) as f64 * y.powi(db - 2);
                let hp = db as f64 * y.powi(db - 1);
                if g <= 0.0 {
                    return ((db - 1) as f64 * db as f64).sqrt() * y.powf((db as f64 - 2.0) / 2.0);
                }
                (gp * hp / g).sqrt()
            },
            0.0,
            1.0,
            1e-12,
        );
        v * v
    }
}

/// Continuous optimal pace as a schedule of `L` steps.
///
/// `dx/dl proportional to g(y) Delta I_b(x)`, `Delta I_b proportional to
/// (I_c f' g h')^{-1/2}`; the table is obtained by integrating `dl/dx`.
pub fn continuous_optimal_pace<M: ExitModel + ?Sized>(m: &M, ic: f64, l: usize) -> PaceSchedule {
    let rate = |x: f64| {
        let y = 1.0 - ic * m.f(x);
        let g = m.g(y).max(1e-300);
        let denom = (ic * m.f_prime(x) * g * m.h_prime(y)).max(1e-300);
        g / denom.sqrt()
    };
    schedule_from_rate(rate, l)
}

/// Builds an `L`-step schedule whose `dx/dl` is proportional to `rate(x)`.
pub fn schedule_from_rate<F: Fn(f64) -> f64>(rate: F, l: usize) -> PaceSchedule {
    let l = l.max(1);
    let np = 8192;
    let xs: Vec<f64> = (0..=np).map(|i| i as f64 / np as f64).collect();
    // Cumulative l(x) by the midpoint rule on dl/dx = 1/rate.
    let mut cum = vec![0.0; np + 1];
    for i in 0..np {
        let mid = 0.5 * (xs[i] + xs[i + 1]);
        cum[i + 1] = cum[i] + (xs[i + 1] - xs[i]) / rate(mid).max(1e-300);
    }
    let total = cum[np];
    let ls: Vec<f64> = cum.iter().map(|c| c / total * l as f64).collect();
    let mut x: Vec<f64> = (0..=l).map(|i| interp(&ls, &xs, i as f64)).collect();
    x[0] = 0.0;
    x[l] = 1.0;
    for i in 1..l {
        if x[i] <= x[i - 1] {
            x[i] = x[i - 1] + 1e-12;
        }
    }
    PaceSchedule { x }
}

/// Area below the actual curve from a trajectory of decimation events:
/// `(1/n_b) sum over decimated bits of (1 - H(extrinsic at decimation))`.
pub fn area_from_trajectory(traj: &crate::bp::Trajectory) -> f64 {
    traj.a_d
}

/// Area below the EBP curve of an EXIT model at `ic`:
/// `I_b^ext(0) + int_0^1 (1 - x)/g(y) h'(y) I_c f'(x) dx`. Under EA this is
/// `K I_c / R`.
pub fn ebp_area_model<M: ExitModel + ?Sized>(m: &M, ic: f64) -> f64 {
    let first = 1.0 - m.h(1.0 - ic * m.f(0.0));
    first
        + integrate(
            |x| {
                let y = 1.0 - ic * m.f(x);
                (1.0 - x) / m.g(y).max(1e-300) * m.h_prime(y) * ic * m.f_prime(x)
            },
            0.0,
            1.0,
            1e-10,
        )
}

/// Delta-area `A_i = A_ne - A_d`.
pub fn delta_area(traj: &crate::bp::Trajectory, a_ne: f64) -> f64 {
    a_ne - traj.a_d
}

/// `sigma^2 = (1 - a) P_t + a P_0` with `a = A_i / (K I_c / R)`, clipped to `[0, 1]`.
pub fn mse_estimate(a_i: f64, ic: f64, rate: f64, t: f64, k: u32) -> f64 {
    let model = crate::bounds::SourceModel { k, t };
    let pt = crate::bounds::power_pt(&model);
    let m = model.m() as f64;
    let p0 = m * m / 12.0;
    let a = (a_i / (k as f64 * ic / rate)).clamp(0.0, 1.0);
    (1.0 - a) * pt + a * p0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::DegreeDistribution;

    #[test]
    fn schedules_hit_endpoints() {
        let p = PaceSchedule::approx(12, 100);
        assert_eq!(p.x[0], 0.0);
        assert_eq!(p.x[100], 1.0);
        let d0 = p.delta_plus(0.0);
        assert!((d0 - (1.0 - (0.99f64).powf(22.0 / 12.0))).abs() < 1e-12);
        let u = PaceSchedule::uniform(10);
        assert!((u.delta_plus(0.35) - 0.1).abs() < 1e-12);
        assert!((u.delta_plus(0.95) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn close_fit_constant() {
        for db in [3, 6, 12] {
            assert!((CloseFitEa { d_b: db }.lai() - lai_ea_close_fit(db)).abs() < 1e-3);
        }
    }

    #[test]
    fn dp_beats_uniform() {
        let d = DegreeDistribution::regular(5, 3);
        let m = EaModel { dist: &d };
        let ic = 0.4;
        let dp = dp_optimal_pace(&m, ic, 20);
        let uni = schedule_area(&m, ic, &PaceSchedule::uniform(20));
        assert!(dp.a_d >= uni - 1e-9, "{} < {}", dp.a_d, uni);
        let one = dp_optimal_pace(&m, ic, 1);
        assert!((one.a_d - (1.0 - (1.0 - ic * m.f(0.0)).powi(5))).abs() < 1e-15);
    }
}
