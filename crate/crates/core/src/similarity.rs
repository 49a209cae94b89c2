//! Word similarity and the statement-level understanding verdict.

use crate::error::{Error, Result};
use crate::modulation::ModulatedItem;
use crate::text::casefold;

pub const DEFAULT_THRESHOLD: f64 = 0.95;

/// `1 - levenshtein / max(len_a, len_b, 1)` over case-folded characters.
pub fn similarity(a: &str, b: &str) -> f64 {
    let a = casefold(a.trim());
    let b = casefold(b.trim());
    let len = a.chars().count().max(b.chars().count()).max(1);
    1.0 - strsim::levenshtein(&a, &b) as f64 / len as f64
}

/// Mean per-word similarity between originals and reconstructions.
pub fn mean_similarity(modulated: &ModulatedItem, reconstructions: &[String]) -> Result<f64> {
    let subs = &modulated.substitutions;
    if subs.len() != reconstructions.len() {
        return Err(Error::invalid(format!(
            "{}: {} reconstructions for {} substitutions",
            modulated.key(),
            reconstructions.len(),
            subs.len()
        )));
    }
    if subs.is_empty() {
        return Err(Error::invalid(format!("{} has no substitutions", modulated.key())));
    }
    let total: f64 = subs
        .iter()
        .zip(reconstructions)
        .map(|(s, r)| similarity(&s.original, r))
        .sum();
    Ok(total / subs.len() as f64)
}

/// Understood iff the mean similarity reaches `threshold` (inclusive).
pub fn understanding_verdict(modulated: &ModulatedItem, reconstructions: &[String], threshold: f64) -> Result<bool> {
    Ok(mean_similarity(modulated, reconstructions)? >= threshold)
}
