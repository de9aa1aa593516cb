//! Dotted version comparison for detected library versions.

use std::cmp::Ordering;

/// Compares dotted versions component-wise; numeric components compare as
/// numbers, anything else lexicographically, and missing trailing
/// components count as zero (`1.8` == `1.8.0`).
pub fn compare_versions(a: &str, b: &str) -> Ordering {
    let pa: Vec<&str> = a.trim().split(['.', '-', '+']).collect();
    let pb: Vec<&str> = b.trim().split(['.', '-', '+']).collect();
    for i in 0..pa.len().max(pb.len()) {
        let x = pa.get(i).copied().unwrap_or("0");
        let y = pb.get(i).copied().unwrap_or("0");
        let ord = match (x.parse::<u64>(), y.parse::<u64>()) {
            (Ok(nx), Ok(ny)) => nx.cmp(&ny),
            _ => x.cmp(y),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

pub fn is_outdated(detected: &str, latest: &str) -> bool {
    compare_versions(detected, latest) == Ordering::Less
}
