//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature for vector-valued
//! integrands on a finite interval split into caller-chosen panels.
//!
//! All components share one subdivision; a panel's error is the largest
//! component error. The panel with the largest error is bisected until the
//! summed error meets `max(abs_tol, rel_tol * max|I_i|)`.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, ..., 9)
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone)]
pub struct Integral {
    pub values: Vec<f64>,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F>(f: &mut F, a: f64, b: f64, dim: usize, scratch: &mut [f64]) -> (Vec<f64>, f64)
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    let (lo, hi) = scratch.split_at_mut(dim);
    f(center, lo);
    for d in 0..dim {
        kronrod[d] = WGK[10] * lo[d];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        f(center - dx, lo);
        f(center + dx, hi);
        for d in 0..dim {
            let sum = lo[d] + hi[d];
            kronrod[d] += WGK[j] * sum;
            if j % 2 == 1 {
                gauss[d] += WG[j / 2] * sum;
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        kronrod[d] *= half;
        gauss[d] *= half;
        err = err.max((kronrod[d] - gauss[d]).abs());
    }
    (kronrod, err)
}

/// Integrate `f` over `[breaks[0], breaks.last()]`, starting from the panels
/// given by consecutive breakpoints. `f(x, out)` writes `dim` values.
pub fn integrate<F>(mut f: F, breaks: &[f64], dim: usize, tol: Tolerance) -> Integral
where
    F: FnMut(f64, &mut [f64]),
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut scratch = vec![0.0; 2 * dim];
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (values, error) = gk21(&mut f, w[0], w[1], dim, &mut scratch);
            evaluations += 21;
            heap.push(Panel { a: w[0], b: w[1], values, error });
        }
    }

    let totals = |heap: &BinaryHeap<Panel>| -> (Vec<f64>, f64) {
        let mut v = vec![0.0; dim];
        let mut e = 0.0;
        for p in heap.iter() {
            for (acc, x) in v.iter_mut().zip(&p.values) {
                *acc += x;
            }
            e += p.error;
        }
        (v, e)
    };

    let (mut values, mut error) = totals(&heap);
    let mut subdivisions = heap.len();
    let target = |values: &[f64]| {
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        tol.abs_tol.max(tol.rel_tol * scale)
    };
    while error > target(&values) && subdivisions < tol.max_subdivisions {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in f64
            heap.push(worst);
            break;
        }
        let (lv, le) = gk21(&mut f, worst.a, mid, dim, &mut scratch);
        let (rv, re) = gk21(&mut f, mid, worst.b, dim, &mut scratch);
        evaluations += 42;
        for d in 0..dim {
            values[d] += lv[d] + rv[d] - worst.values[d];
        }
        error += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, values: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, values: rv, error: re });
        subdivisions += 1;
        // refresh running sums now and then to shed accumulated rounding
        if subdivisions % 256 == 0 {
            let (v, e) = totals(&heap);
            values = v;
            error = e;
        }
    }
    let (values, error) = totals(&heap);
    let converged = error <= target(&values);
    Integral { values, abs_error: error, evaluations, converged }
}
