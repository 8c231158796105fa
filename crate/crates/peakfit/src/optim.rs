//! Bounded quasi-Newton maximizer for the two-parameter truncated
//! likelihoods. BFGS with backtracking line search, projected onto a
//! box; coordinates pressed against an active bound are frozen out of
//! the search direction.

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoxBounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl BoxBounds {
    pub fn clamp(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0].clamp(self.lo[0], self.hi[0]),
            x[1].clamp(self.lo[1], self.hi[1]),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Optimum {
    pub x: [f64; 2],
    pub value: f64,
}

const MAX_ITER: usize = 200;
/// Relative gradient-norm tolerance: converged when the free-coordinate
/// gradient norm drops below `GRAD_TOL * max(1, |f|)`.
const GRAD_TOL: f64 = 1e-8;

/// Central-difference gradient with per-coordinate steps scaled to the
/// coordinate magnitude.
pub(crate) fn numerical_gradient<F: Fn([f64; 2]) -> f64>(f: &F, x: [f64; 2]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for i in 0..2 {
        let h = 6e-6 * (1.0 + x[i].abs());
        let mut hi = x;
        let mut lo = x;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (f(hi) - f(lo)) / (2.0 * h);
    }
    g
}

fn free_grad_norm(x: [f64; 2], g: [f64; 2], bounds: &BoxBounds) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..2 {
        let at_lo = x[i] <= bounds.lo[i] && g[i] < 0.0;
        let at_hi = x[i] >= bounds.hi[i] && g[i] > 0.0;
        if !(at_lo || at_hi) {
            norm = norm.max(g[i].abs());
        }
    }
    norm
}

/// Maximize `f` over the box from a single start (assumed in-box).
/// Returns `None` when `f` is not finite at the start.
fn maximize_from<F, G>(f: &F, grad: &G, start: [f64; 2], bounds: &BoxBounds) -> Option<Optimum>
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> [f64; 2],
{
    let mut x = bounds.clamp(start);
    let mut fx = f(x);
    if !fx.is_finite() {
        return None;
    }
    let mut g = grad(x);
    // Inverse Hessian approximation of the negated objective.
    let mut h = [[1.0, 0.0], [0.0, 1.0]];

    for _ in 0..MAX_ITER {
        if !g[0].is_finite() || !g[1].is_finite() {
            break;
        }
        if free_grad_norm(x, g, bounds) <= GRAD_TOL * fx.abs().max(1.0) {
            break;
        }
        // Ascent direction d = H g, with bound-active coordinates frozen.
        let mut d = [
            h[0][0] * g[0] + h[0][1] * g[1],
            h[1][0] * g[0] + h[1][1] * g[1],
        ];
        for i in 0..2 {
            let at_lo = x[i] <= bounds.lo[i] && g[i] < 0.0;
            let at_hi = x[i] >= bounds.hi[i] && g[i] > 0.0;
            if at_lo || at_hi {
                d[i] = 0.0;
            }
        }
        let mut slope = d[0] * g[0] + d[1] * g[1];
        if slope <= 0.0 {
            // Quasi-Newton direction unusable; fall back to the gradient.
            d = g;
            for i in 0..2 {
                let at_lo = x[i] <= bounds.lo[i] && g[i] < 0.0;
                let at_hi = x[i] >= bounds.hi[i] && g[i] > 0.0;
                if at_lo || at_hi {
                    d[i] = 0.0;
                }
            }
            h = [[1.0, 0.0], [0.0, 1.0]];
            slope = d[0] * g[0] + d[1] * g[1];
            if slope <= 0.0 {
                break;
            }
        }
        // Keep the first trial step from leaving the trust scale.
        let d_norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let mut t = (4.0 / d_norm).min(1.0);
        let mut x_new = x;
        let mut f_new = fx;
        let mut improved = false;
        for _ in 0..60 {
            let cand = bounds.clamp([x[0] + t * d[0], x[1] + t * d[1]]);
            let fc = f(cand);
            if fc.is_finite() && fc >= fx + 1e-4 * t * slope {
                x_new = cand;
                f_new = fc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
        let g_new = grad(x_new);
        let s = [x_new[0] - x[0], x_new[1] - x[1]];
        // y is the change of the *negated* gradient.
        let y = [g[0] - g_new[0], g[1] - g_new[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        if sy > 1e-12 * (s[0].hypot(s[1])) * (y[0].hypot(y[1])) {
            // BFGS update of the inverse Hessian (minimization form).
            let rho = 1.0 / sy;
            let hy = [
                h[0][0] * y[0] + h[0][1] * y[1],
                h[1][0] * y[0] + h[1][1] * y[1],
            ];
            let yhy = y[0] * hy[0] + y[1] * hy[1];
            let c = (1.0 + rho * yhy) * rho;
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        } else {
            h = [[1.0, 0.0], [0.0, 1.0]];
        }
        let step = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let gain = f_new - fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        if step < 1e-13 && gain < 1e-12 * fx.abs().max(1.0) {
            break;
        }
    }
    Some(Optimum { x, value: fx })
}

/// Maximize `f` over the box from several starts, keeping the best
/// finite outcome.
pub(crate) fn maximize_2d<F, G>(
    f: &F,
    grad: &G,
    starts: &[[f64; 2]],
    bounds: &BoxBounds,
) -> Option<Optimum>
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> [f64; 2],
{
    let mut best: Option<Optimum> = None;
    for &start in starts {
        if let Some(opt) = maximize_from(f, grad, start, bounds) {
            if best.is_none_or(|b| opt.value > b.value) {
                best = Some(opt);
            }
        }
    }
    best
}
