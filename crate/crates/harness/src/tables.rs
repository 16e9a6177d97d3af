//! Potential table export.

use mcboost::potential::PotentialTable;
use mcboost::Label;

use crate::error::{HarnessError, Result};

/// Fills the memo for `φ¹_n(0)` and renders every stored state as
/// `k, gamma, i, gap1..gap{k-1}, value`. Gaps are `s[r] − s[l]`, sorted
/// and clipped to `±(i + 1)`.
pub fn potential_csv(k: usize, gamma: f64, n: usize, cap: usize) -> Result<String> {
    let table = PotentialTable::with_cap(k, gamma, cap)?;
    table.exact(Label::from_index(0), n, &vec![0; k])?;
    let mut header: Vec<String> = vec!["k".into(), "gamma".into(), "i".into()];
    header.extend((1..k).map(|j| format!("gap{j}")));
    header.push("value".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| HarnessError::Data(format!("csv encoding: {e}"));
    w.write_record(&header).map_err(enc)?;
    for (key, value) in table.entries() {
        let mut row = vec![k.to_string(), gamma.to_string(), key.i.to_string()];
        row.extend(key.gaps.iter().map(i32::to_string));
        // shortest representation that round-trips
        row.push(format!("{value:?}"));
        w.write_record(&row).map_err(enc)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Data(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
