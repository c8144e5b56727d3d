use super::ParsedName;

/// Surnames further apart than this (normalized edit distance) never match.
pub const SURNAME_CUTOFF: f64 = 0.25;

/// Levenshtein distance over characters divided by the longer length.
pub fn normalized_surname_distance(a: &str, b: &str) -> f64 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / len as f64
}

/// True when one initials list is a prefix of the other.
pub fn initials_compatible(a: &[char], b: &[char]) -> bool {
    a.iter().zip(b).all(|(x, y)| x == y)
}

/// Distance in `[0, 1]` between two parsed names.
///
/// Conflicting initials or surnames beyond [`SURNAME_CUTOFF`] give 1;
/// otherwise the normalized surname edit distance (0 for equal surnames).
pub fn name_distance(a: &ParsedName, b: &ParsedName) -> f64 {
    if !initials_compatible(&a.initials, &b.initials) {
        return 1.0;
    }
    let d = normalized_surname_distance(&a.surname, &b.surname);
    if d > SURNAME_CUTOFF {
        1.0
    } else {
        d
    }
}
