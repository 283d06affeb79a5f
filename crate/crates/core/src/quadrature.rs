//! One-dimensional numerical helpers: a 15-point Gauss–Kronrod rule and a
//! golden-section maximizer with bracket expansion.

#![allow(clippy::excessive_precision)]

/// Kronrod abscissae on [-1, 1] (nonnegative half; `XGK[7] = 0`).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the 7-point rule embedded at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of one Gauss–Kronrod panel.
#[derive(Debug, Clone, Copy)]
pub struct GkPanel {
    /// Kronrod estimate of `∫ f`.
    pub integral: f64,
    /// Kronrod estimate of `∫ (x − shift) f`.
    pub first_moment: f64,
    /// `|K15 − G7|` for `∫ f`.
    pub error: f64,
    /// Largest deviation of `f` at the nodes from the quadratic that matches
    /// `f(a)`, `f(b)` and the panel integral.
    pub quad_dev: f64,
}

/// Nodes of the 15-point rule mapped to `[a, b]`, ascending.
pub fn gk15_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut out = [0.0; 15];
    for i in 0..7 {
        out[i] = c - r * XGK[i];
        out[14 - i] = c + r * XGK[i];
    }
    out[7] = c;
    out
}

/// Integrate `f` and `(x − shift) f` over `[a, b]`; `fa`, `fb` are the
/// endpoint values used for the quadratic-deviation diagnostic.
pub fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, shift: f64) -> GkPanel {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let nodes = gk15_nodes(a, b);
    let mut vals = [0.0; 15];
    for (v, &x) in vals.iter_mut().zip(&nodes) {
        *v = f(x);
    }
    let mut k = 0.0;
    let mut k1 = 0.0;
    let mut g = 0.0;
    for i in 0..7 {
        let s = vals[i] + vals[14 - i];
        k += WGK[i] * s;
        k1 += WGK[i] * ((nodes[i] - shift) * vals[i] + (nodes[14 - i] - shift) * vals[14 - i]);
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    k += WGK[7] * vals[7];
    k1 += WGK[7] * (c - shift) * vals[7];
    g += WG[3] * vals[7];
    let integral = k * r;
    let h = b - a;
    let mean = integral / h;
    let curv = 6.0 * (mean - 0.5 * (fa + fb));
    let mut quad_dev: f64 = 0.0;
    for (&x, &v) in nodes.iter().zip(&vals) {
        let t = (x - a) / h;
        let q = fa * (1.0 - t) + fb * t + curv * t * (1.0 - t);
        quad_dev = quad_dev.max((v - q).abs());
    }
    GkPanel {
        integral,
        first_moment: k1 * r,
        error: ((k - g) * r).abs(),
        quad_dev,
    }
}

/// Outcome of [`maximize_unimodal`].
#[derive(Debug, Clone, Copy)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximize a unimodal function: expand a bracket from `start` with doubling
/// steps, then refine by golden-section search. `None` if no bracket is found
/// within `max_expansions` doublings or the function is not finite.
pub fn maximize_unimodal<F: FnMut(f64) -> f64>(f: &mut F, start: f64, max_expansions: usize) -> Option<Maximum> {
    let mut evaluations = 0usize;
    let mut eval = |x: f64| {
        evaluations += 1;
        f(x)
    };

    let f0 = eval(start);
    let fr = eval(start + 1.0);
    let fl = eval(start - 1.0);
    if !(f0.is_finite() && fr.is_finite() && fl.is_finite()) {
        return None;
    }
    let (lo, hi) = if fr > f0 || fl > f0 {
        let dir = if fr > f0 { 1.0 } else { -1.0 };
        let (mut prev, mut cur, mut f_cur) = (start, start + dir, fr.max(fl));
        let mut step = 1.0;
        let mut bracket = None;
        for _ in 0..max_expansions {
            step *= 2.0;
            let next = cur + dir * step;
            let f_next = eval(next);
            if !f_next.is_finite() {
                return None;
            }
            if f_next <= f_cur {
                bracket = Some((prev.min(next), prev.max(next)));
                break;
            }
            prev = cur;
            cur = next;
            f_cur = f_next;
        }
        bracket?
    } else {
        (start - 1.0, start + 1.0)
    };
    let (x, value) = golden(&mut eval, lo, hi);
    Some(Maximum { x, value, evaluations })
}

fn golden<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-10 * (1.0 + c.abs().max(d.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_integrates_polynomials_exactly() {
        let f = |x: f64| 3.0 * x.powi(5) - x.powi(2) + 2.0;
        let p = gk15_panel(&f, -1.0, 2.0, f(-1.0), f(2.0), 0.0);
        let exact = 0.5 * (64.0 - 1.0) - (8.0 + 1.0) / 3.0 + 6.0;
        assert!((p.integral - exact).abs() < 1e-12);
        assert!(p.error < 1e-12);
    }

    #[test]
    fn gk15_gaussian_moment() {
        let f = |x: f64| (-0.5 * (x - 0.3) * (x - 0.3)).exp();
        let mut total = 0.0;
        let mut moment = 0.0;
        for i in 0..40 {
            let a = -10.0 + 0.5 * i as f64;
            let b = a + 0.5;
            let p = gk15_panel(&f, a, b, f(a), f(b), 0.3);
            total += p.integral;
            moment += p.first_moment;
        }
        let s = (2.0 * std::f64::consts::PI).sqrt();
        assert!((total - s).abs() < 1e-13);
        assert!(moment.abs() < 1e-13);
    }

    #[test]
    fn quadratic_has_no_deviation() {
        let f = |x: f64| 1.0 + x - 0.25 * x * x;
        let p = gk15_panel(&f, 0.0, 1.0, f(0.0), f(1.0), 0.0);
        assert!(p.quad_dev < 1e-14);
    }

    #[test]
    fn golden_section_finds_far_mode() {
        let mut f = |x: f64| -(x - 37.25) * (x - 37.25);
        let m = maximize_unimodal(&mut f, 0.0, 60).unwrap();
        assert!((m.x - 37.25).abs() < 1e-6);
        let mut g = |x: f64| -(x + 5.5).abs();
        let m = maximize_unimodal(&mut g, 0.0, 60).unwrap();
        assert!((m.x + 5.5).abs() < 1e-6);
        let mut h = |x: f64| -(x - 0.2) * (x - 0.2);
        let m = maximize_unimodal(&mut h, 0.0, 60).unwrap();
        assert!((m.x - 0.2).abs() < 1e-6);
    }

    #[test]
    fn unbounded_function_fails() {
        let mut f = |x: f64| x;
        assert!(maximize_unimodal(&mut f, 0.0, 30).is_none());
    }
}
