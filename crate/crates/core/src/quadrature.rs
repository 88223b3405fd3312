//! One-dimensional quadrature: globally adaptive Gauss–Kronrod (21-point)
//! over a caller-supplied initial partition, and Gauss–Legendre node
//! generation for fixed product rules.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 21-point Kronrod abscissae (non-negative half) and weights, with the
// embedded 10-point Gauss weights on the odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_626_368_682,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and budget for [`integrate_adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_intervals: 50_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Returns (Kronrod estimate, |Kronrod − Gauss|).
fn gk21(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for k in 0..10 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
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

/// Globally adaptive Gauss–Kronrod integration of `f` over the union of the
/// consecutive intervals given by `breakpoints` (sorted, at least two).
///
/// The segment with the largest error estimate is bisected until the summed
/// error meets `max(abs_tol, rel_tol·|value|)`. Running out of budget yields
/// [`Error::NumericAccuracy`] carrying the achieved estimate.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least two breakpoints".into(),
        ));
    }
    let mut heap = BinaryHeap::with_capacity(breakpoints.len() * 2);
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.partial_cmp(&a) != Some(Ordering::Greater) {
            return Err(Error::InvalidArgument(format!(
                "breakpoints not increasing at {a}, {b}"
            )));
        }
        let (value, error) = gk21(&f, a, b);
        heap.push(Segment { a, b, value, error });
    }

    let exact_sums = |heap: &BinaryHeap<Segment>| -> (f64, f64) {
        (
            heap.iter().map(|s| s.value).sum(),
            heap.iter().map(|s| s.error).sum(),
        )
    };
    let (mut value, mut error) = exact_sums(&heap);
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::NumericAccuracy {
                estimate: value,
                error,
                tolerance: opts.abs_tol,
            });
        }
        let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tolerance {
            // Running sums drift; confirm against a fresh summation.
            (value, error) = exact_sums(&heap);
            let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
            if error <= tolerance {
                return Ok(QuadResult {
                    value,
                    error,
                    intervals: heap.len(),
                });
            }
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NumericAccuracy {
                estimate: value,
                error,
                tolerance,
            });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NumericAccuracy {
                estimate: value,
                error,
                tolerance,
            });
        }
        value -= worst.value;
        error -= worst.error;
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk21(&f, a, b);
            value += v;
            error += e;
            heap.push(Segment {
                a,
                b,
                value: v,
                error: e,
            });
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / dp;
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
