//! Machine-readable analysis products: pooled spectrum, value histogram and
//! the cumulative energy curve.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use para_core::{GlobalSpectrum, LayerType};

/// spectrum.json: every pooled singular value with its provenance, in the
/// global descending order.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub b_init: usize,
    pub e_total: f64,
    pub entries: Vec<SpectrumEntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrumEntryJson {
    pub value: f64,
    pub layer_index: usize,
    pub layer_type: LayerType,
    pub module_path: String,
    pub position: usize,
}

pub fn spectrum_json(spectrum: &GlobalSpectrum) -> SpectrumJson {
    SpectrumJson {
        b_init: spectrum.len(),
        e_total: spectrum.total_energy(),
        entries: spectrum
            .entries()
            .iter()
            .map(|e| SpectrumEntryJson {
                value: e.value,
                layer_index: e.key.layer_index,
                layer_type: e.key.layer_type,
                module_path: e.key.module_path.clone(),
                position: e.position,
            })
            .collect(),
    }
}

/// histogram.csv: equal-width bins over [0, max value]; the top edge is
/// inclusive so the maximum lands in the last bin.
pub fn histogram_csv(spectrum: &GlobalSpectrum, bins: usize) -> String {
    let bins = bins.max(1);
    let max = spectrum.entries().first().map_or(0.0, |e| e.value);
    let mut counts = vec![0usize; bins];
    if max > 0.0 {
        let width = max / bins as f64;
        for e in spectrum.entries() {
            let idx = ((e.value / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    } else {
        counts[0] = spectrum.len();
    }

    let mut out = String::from("bin_start,bin_end,count\n");
    let width = if max > 0.0 { max / bins as f64 } else { 0.0 };
    for (i, count) in counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            i as f64 * width,
            (i + 1) as f64 * width,
            count
        );
    }
    out
}

/// energy_curve.csv: cumulative retained energy fraction against the number
/// of retained ranks, one row per k in 0..=B_init.
pub fn energy_curve_csv(spectrum: &GlobalSpectrum) -> String {
    let total = spectrum.total_energy();
    let mut out = String::from("retained_rank,energy_fraction\n");
    let mut acc = 0.0;
    let fraction = |acc: f64| if total > 0.0 { acc / total } else { 1.0 };
    let _ = writeln!(out, "0,{}", fraction(0.0));
    for (k, e) in spectrum.entries().iter().enumerate() {
        acc += e.value * e.value;
        let _ = writeln!(out, "{},{}", k + 1, fraction(acc));
    }
    out
}
