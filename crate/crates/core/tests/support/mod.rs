//! Fixtures, independent oracles and random inputs shared by the
//! integration test targets.

#![allow(dead_code)]

pub mod oracle;
pub mod properties;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn worked_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/zika_hutchison.tsv")
}

/// Worked-example rows as (record_id, recorded_by, record_number, institution).
pub fn worked_rows() -> Vec<[String; 4]> {
    let text = std::fs::read_to_string(worked_path()).expect("fixture");
    text.lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            [c[0], c[1], c[2], c[8]].map(str::to_string)
        })
        .collect()
}

pub const DWC_HEADER: [&str; 13] = [
    "occurrenceID",
    "recordedBy",
    "recordNumber",
    "eventDate",
    "countryCode",
    "order",
    "family",
    "scientificName",
    "institutionCode",
    "typeStatus",
    "decimalLatitude",
    "decimalLongitude",
    "associatedMedia",
];

const COLLECTORS: [&str; 16] = [
    "P. F. Zika",
    "Zika, P.F.",
    "Zika, Peter F.",
    "Peter F. Zika",
    "A. B. Zikas",
    "P. C. Hutchison & J. K. Wright",
    "Hutchison, P.C.",
    "Paul C. Hutchison|J. Kenneth Wright",
    "S. Knapp",
    "Knapp, S.",
    "Knapp, Sandra",
    "J. Wright",
    "Wright, J.K.",
    "anon.",
    "",
    "de la Cruz, M.",
];
const NUMBERS: [&str; 10] = ["1", "2", "3", "Zika 1", "ZK-2", "3a", "s.n.", "", "12", "Knapp 12"];
const DATES: [&str; 6] = ["2001-05-01", "2001-05-02", "20010501", "2001", "2001-05-01T10:00:00", "2002-02-30"];
const COUNTRIES: [&str; 5] = ["US", "us", "PE", " ", ""];
const ORDERS: [&str; 4] = ["Solanales", "solanales", "Saxifragales", ""];
const FAMILIES: [&str; 3] = ["Solanaceae", "Crassulaceae", ""];
const NAMES: [&str; 4] = ["Sedum citrinum", "sedum  citrinum", "Solanum aligerum", ""];
const INSTITUTIONS: [&str; 7] = ["K", "NY", "MO", "US", "F", "CAS", ""];
const TYPES: [&str; 6] = ["", "Isotype", "HOLOTYPE", "Not a type", "voucher", "type"];
const COORDS: [(&str, &str); 6] =
    [("", ""), ("0", "0"), ("41.5", "-123.1"), ("95", "10"), ("-6.3", "-77.8"), ("abc", "1")];
const MEDIA: [&str; 4] = ["", "http://a/1.jpg", "http://a/1.jpg|http://a/2.jpg", " | "];

/// A messy Darwin Core occurrence table of `n` rows drawn from small pools,
/// so that groups, conflicts, missing values and ineligible rows all occur.
pub fn random_corpus(seed: u64, n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DWC_HEADER.join("\t");
    out.push('\n');
    for i in 0..n {
        let pick = |rng: &mut ChaCha8Rng, pool: &[&'static str]| *pool.choose(rng).unwrap();
        let id = if rng.random_bool(0.02) { "dup".to_string() } else { format!("r{i}") };
        let (lat, lon) = *COORDS.choose(&mut rng).unwrap();
        let row = [
            id.as_str(),
            pick(&mut rng, &COLLECTORS),
            pick(&mut rng, &NUMBERS),
            pick(&mut rng, &DATES),
            pick(&mut rng, &COUNTRIES),
            pick(&mut rng, &ORDERS),
            pick(&mut rng, &FAMILIES),
            pick(&mut rng, &NAMES),
            pick(&mut rng, &INSTITUTIONS),
            pick(&mut rng, &TYPES),
            lat,
            lon,
            pick(&mut rng, &MEDIA),
        ];
        let _ = writeln!(out, "{}", row.join("\t"));
    }
    out
}

/// Writes `text` to `dir/name` and returns the path.
pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).expect("write input");
    p
}

pub fn random_range(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}
