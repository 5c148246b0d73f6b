//! The constant c_a: an upper bound on E[sup_k S_k / (a + k - S_k)] for a
//! fair Bernoulli walk S_k, obtained by enumerating the first k0 steps and
//! integrating an exponential-martingale tail bound for the rest.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

pub const DEFAULT_K0: u32 = 10;
const PATH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaBound {
    pub a: f64,
    pub k0: u32,
    pub value: f64,
}

/// Positive root of e^θ + e^{-tθ} = 2, or 0 when t ≤ 1.
///
/// This is the Θ/(1+t) rescaling of the root of
/// e^{Θ/(1+t)} + e^{-Θt/(1+t)} = 2, solved directly in θ so the bracket
/// does not grow with t.
pub fn theta_root(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::BracketFailure(t));
    }
    if t <= 1.0 {
        return Ok(0.0);
    }
    let f = |th: f64| th.exp_m1() + (-t * th).exp_m1();
    let (mut lo, mut hi) = (1e-12, 100.0);
    if f(lo) >= 0.0 || f(hi) <= 0.0 {
        return Err(Error::BracketFailure(t));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// ((2-u)ln(2-u) + u ln u) / ln²(2-u), with its limits at both ends.
fn bracket(u: f64) -> f64 {
    if u <= 0.0 {
        return 2.0 / std::f64::consts::LN_2;
    }
    let e = 1.0 - u;
    if e.abs() < 1e-3 {
        return 1.0 + e + e * e / 4.0 + e * e * e / 6.0;
    }
    let l = (2.0 - u).ln();
    ((2.0 - u) * l + u * u.ln()) / (l * l)
}

const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule. Nodes are interior, so the endpoints are never evaluated.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut total = 0.0;
    let mut worst = 0.0f64;
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        if err <= t || depth >= 50 {
            if err > t {
                worst = worst.max(err);
            }
            total += v;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, 0.5 * t, depth + 1));
        stack.push((mid, hi, 0.5 * t, depth + 1));
    }
    if worst > tol {
        return Err(Error::QuadratureFailure(worst));
    }
    Ok(total)
}

/// Tail integral for one path: ∫₀^{u*} u^{e-1}(2-u)^{P-1}B(u) du with
/// e = a + k0 - P, computed after substituting v = u^e.
///
/// The exponent on (2-u) is P-1: converting the θ-form of the bound via
/// u = 2 - e^θ contributes a Jacobian of 1/(2-u).
fn path_integral(r: f64, p: u32, e: f64) -> Result<f64> {
    let ustar = if r > 1.0 { (-r * theta_root(r)?).exp() } else { 1.0 };
    let vmax = ustar.powf(e);
    if vmax <= 0.0 {
        return Ok(0.0);
    }
    let pm1 = p as f64 - 1.0;
    let g = |v: f64| {
        let u = v.powf(1.0 / e);
        (2.0 - u).powf(pm1) * bracket(u)
    };
    Ok(adaptive(&g, 0.0, vmax, PATH_TOL * e)? / e)
}

fn cache() -> &'static Mutex<HashMap<(u64, u32), f64>> {
    static C: OnceLock<Mutex<HashMap<(u64, u32), f64>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Bound on E[sup_k S_k/(a + k - S_k)] by enumeration of 2^k0 prefixes.
pub fn compute_ca(a: f64, k0: u32) -> Result<CaBound> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("a must be positive, got {a}")));
    }
    if !(1..=20).contains(&k0) {
        return Err(Error::InvalidArgument(format!("k0 must be in 1..=20, got {k0}")));
    }
    let key = (a.to_bits(), k0);
    if let Some(v) = cache().lock().unwrap().get(&key) {
        return Ok(CaBound { a, k0, value: *v });
    }

    // Paths sharing (max(R,1), P) share their integral.
    let mut groups: HashMap<(u64, u32), u64> = HashMap::new();
    for bits in 0u32..(1u32 << k0) {
        let (mut s, mut r) = (0u32, 0.0f64);
        for k in 1..=k0 {
            s += (bits >> (k - 1)) & 1;
            r = r.max(s as f64 / (a + (k - s) as f64));
        }
        *groups.entry((r.max(1.0).to_bits(), s)).or_insert(0) += 1;
    }
    let mut keys: Vec<_> = groups.into_iter().collect();
    keys.sort_unstable();

    let mut total = 0.0;
    for ((rbits, p), count) in keys {
        let r = f64::from_bits(rbits);
        let e = a + (k0 - p) as f64;
        total += count as f64 * (r + path_integral(r, p, e)?);
    }
    let value = total / (1u64 << k0) as f64;
    cache().lock().unwrap().insert(key, value);
    Ok(CaBound { a, k0, value })
}
