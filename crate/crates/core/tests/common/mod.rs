//! Shared fixtures for the integration suites: the sequence corpus and an
//! independent brute-force window oracle.

use shiftsim::weights::{parse_sequence, WeightSequence};

/// A corpus sequence plus the structure facts the fixtures were built with:
/// the longest pattern period and how far from index 0 the irregularities
/// (overrides, splice point) reach. Tests use these to size finite models.
pub struct Entry {
    pub spec: &'static str,
    pub seq: WeightSequence,
    pub period: usize,
    pub extent: i64,
}

/// The test corpus: 35 sequences spanning periods 1 through 6 with weight
/// moduli inside [1/4, 4]. Nineteen periodic (including complex phases and
/// both modulus extremes), six modified-periodic with overrides at negative
/// indices (phase-only overrides where the base has constant modulus, so the
/// shift's normality stays readable from any full forward window), and ten
/// splices (five with matching side rates, five with side rates at least a
/// factor 1.25 apart so escapes are visible to a short brute-force scan).
/// Every pattern with non-constant modulus jumps by at least 0.5 between some
/// adjacent pair, which keeps non-normality loud in finite models.
pub fn corpus() -> Vec<Entry> {
    let specs: [(&'static str, usize, i64); 35] = [
        // Periodic, periods 1-6.
        ("periodic:1", 1, 0),
        ("periodic:2", 1, 0),
        ("periodic:0.25", 1, 0),
        ("periodic:4", 1, 0),
        ("periodic:2i", 1, 0),
        ("periodic:1,2", 2, 0),
        ("periodic:2,1", 2, 0),
        ("periodic:0.5,2", 2, 0),
        ("periodic:1,4", 2, 0),
        ("periodic:0.25,4", 2, 0),
        ("periodic:1,2,4", 3, 0),
        ("periodic:1,3,0.5", 3, 0),
        ("periodic:i,1,-1,2", 4, 0),
        ("periodic:1,1,2,2", 4, 0),
        ("periodic:2,0.5,1,1,1", 5, 0),
        ("periodic:1,2,1,0.5,1", 5, 0),
        ("periodic:3,1,0.5,1,2,1", 6, 0),
        ("periodic:0.5,0.5,1,2,2,1", 6, 0),
        ("periodic:1.5i,-1.5", 2, 0),
        // Modified periodic; overrides sit at negative indices.
        ("modified:periodic:1,2;-3=4", 2, 3),
        ("modified:periodic:1,2;-1=0.25,-5=3", 2, 5),
        ("modified:periodic:2i;-4=2", 1, 4),
        ("modified:periodic:1;-2=i,-7=-1", 1, 7),
        ("modified:periodic:0.5,2;-6=1,-2=0.5", 2, 6),
        ("modified:periodic:1,4;-8=2,-3=0.5,-1=1", 2, 8),
        // Splices with matching side rates (similar).
        ("split:2|4,1@0", 2, 0),
        ("split:1,2|2,1@-2", 2, 2),
        ("split:0.5,2|2,0.5@-4", 2, 4),
        ("split:1|2,0.5@0", 2, 0),
        ("split:2i|-2,2i@-1", 2, 1),
        // Splices with mismatched side rates (not similar).
        ("split:1|2@0", 1, 0),
        ("split:2|1@3", 1, 3),
        ("split:1,2|4,2@0", 2, 0),
        ("split:0.25|0.5,1@-3", 2, 3),
        ("split:4|1,2@2", 2, 2),
    ];
    specs
        .iter()
        .map(|&(spec, period, extent)| Entry {
            spec,
            seq: parse_sequence(spec).unwrap_or_else(|e| panic!("corpus spec {spec}: {e}")),
            period,
            extent,
        })
        .collect()
}

/// Log-domain extrema of the scaled windows `cⁿ·P(k, n)` over the brute grid
/// `k ∈ [-200, 200]`, `n ∈ [1, 400]`: returns `(sup_ln, inf_ln)`. Scans raw
/// weights directly and shares nothing with the exact reduction.
pub fn brute_scaled_extrema(seq: &WeightSequence, c: f64) -> (f64, f64) {
    let ln_c = c.ln();
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for k in -200i64..=200 {
        let mut acc = 0.0f64;
        for n in 1..=400i64 {
            acc += ln_c + seq.weight_at(k + n).norm().ln();
            sup = sup.max(acc);
            inf = inf.min(acc);
        }
    }
    (sup, inf)
}

pub fn assert_rel(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE),
        "{what}: {a} vs {b}"
    );
}
