//! Seeded generator for an 11-variable monthly dataset shaped like the FRED
//! housing panel: a positive target, completions cointegrated with it,
//! interest rates, and smoothly growing nominal aggregates.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use tsecon::{Table, YearMonth};

use crate::dataset::{Dataset, SourceMeta};

pub const SYNTH_VARIABLES: [&str; 11] = [
    "hous_st",
    "CPI",
    "mortgR",
    "fed_fundsR",
    "income",
    "pvt_house_comp",
    "sec_conL",
    "real_estL",
    "yield_sp",
    "unempR",
    "house_supply",
];

pub fn synth_start() -> YearMonth {
    YearMonth::new(1976, 6).unwrap()
}

/// Months from June 1976 to December 2018 inclusive.
pub const SYNTH_MONTHS: usize = 511;

struct Gen<R: Rng> {
    rng: R,
}

impl<R: Rng> Gen<R> {
    fn z(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Mean-reverting AR(1) around `mean`.
    fn ar1(&mut self, n: usize, mean: f64, phi: f64, sd: f64) -> Vec<f64> {
        let mut x = mean;
        (0..n)
            .map(|_| {
                x = mean + phi * (x - mean) + sd * self.z();
                x
            })
            .collect()
    }

    /// Exponential of a doubly integrated process: growth rates wander as a
    /// persistent AR(1) around `growth`.
    fn growth_level(&mut self, n: usize, start: f64, growth: f64, sd: f64) -> Vec<f64> {
        let rates = self.ar1(n, growth, 0.97, sd);
        let mut log = start.ln();
        rates
            .into_iter()
            .map(|g| {
                log += g;
                log.exp()
            })
            .collect()
    }
}

/// Generates `months` rows starting June 1976.
pub fn synth_table(seed: u64, months: usize) -> Table {
    let mut g = Gen { rng: tsecon::sim::rng(seed) };
    let n = months;
    let lead = 12;
    let total = n + lead;

    let mut mortg = Vec::with_capacity(total);
    let mut m = 9.0f64;
    for _ in 0..total {
        m += 0.18 * g.z() - 0.002 * (m - 7.0);
        m = m.abs().max(2.5);
        mortg.push(m);
    }
    let ff_gap = g.ar1(total, 2.0, 0.9, 0.25);
    let fed: Vec<f64> = mortg.iter().zip(&ff_gap).map(|(m, gap)| (m - gap).max(0.1)).collect();

    let drift = g.ar1(total, 0.0, 0.995, 22.0);
    let noise = g.ar1(total, 0.0, 0.6, 55.0);
    let starts: Vec<f64> = (0..total)
        .map(|t| (1450.0 + drift[t] - 45.0 * (mortg[t] - 7.0) + noise[t]).max(250.0))
        .collect();
    let comp_noise = g.ar1(total, 0.0, 0.7, 30.0);
    let completions: Vec<f64> = (0..total)
        .map(|t| {
            let lagged = (1..=6).map(|l| starts[t.saturating_sub(l)]).sum::<f64>() / 6.0;
            (0.97 * lagged + comp_noise[t]).max(200.0)
        })
        .collect();
    let supply: Vec<f64> = g
        .ar1(total, 0.0, 0.9, 0.3)
        .into_iter()
        .enumerate()
        .map(|(t, e)| (6.0 - 0.002 * (starts[t] - 1300.0) + e).max(2.0))
        .collect();

    let cpi = g.growth_level(total, 56.0, 0.0033, 0.0006);
    let income = g.growth_level(total, 1400.0, 0.0048, 0.0008);
    let sec = g.growth_level(total, 20.0, 0.0065, 0.002);
    let real = g.growth_level(total, 180.0, 0.006, 0.0012);
    let spread = g.ar1(total, 1.5, 0.92, 0.25);
    let unemp: Vec<f64> = g.ar1(total, 6.2, 0.985, 0.17).into_iter().map(|u| u.max(3.0)).collect();

    let cut = |v: Vec<f64>| v[lead..].to_vec();
    let columns = vec![
        cut(starts),
        cut(cpi),
        cut(mortg),
        cut(fed),
        cut(income),
        cut(completions),
        cut(sec),
        cut(real),
        cut(spread),
        cut(unemp),
        cut(supply),
    ];
    let names = SYNTH_VARIABLES.iter().map(|s| s.to_string()).collect();
    Table::new(synth_start(), names, columns).expect("generated columns have equal length")
}

pub fn synth_dataset(seed: u64, months: usize) -> Dataset {
    let table = synth_table(seed, months);
    let sources = table
        .names()
        .iter()
        .map(|v| SourceMeta { variable: v.clone(), origin: format!("synthetic(seed={seed})"), retrieved_utc: None })
        .collect();
    Dataset { table, sources }
}
