//! Seeded synthetic occurrence corpora with known duplicate structure, and
//! scoring of a detected grouping against the generated truth.
//!
//! Each collector gets a unique surname and a fixed set of initials; every
//! collecting event produces a group of rows at distinct or repeated
//! institutions, each row writing the collector name, record number and
//! date in one of several styles.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Field;

/// Probability of each group size; `weights[i]` is the weight of size `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    weights: Vec<f64>,
}

impl SizeDistribution {
    pub fn fixed(size: usize) -> Result<Self> {
        Self::weighted((1..=size).map(|s| (s, if s == size { 1.0 } else { 0.0 })))
    }

    pub fn uniform(min: usize, max: usize) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidParameter(format!("empty size range {min}-{max}")));
        }
        Self::weighted((min..=max).map(|s| (s, 1.0)))
    }

    pub fn weighted(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut weights = Vec::new();
        for (size, w) in pairs {
            if size == 0 || !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad size weight {size}:{w}")));
            }
            if weights.len() < size {
                weights.resize(size, 0.0);
            }
            weights[size - 1] += w;
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("size distribution has no weight".into()));
        }
        Ok(SizeDistribution { weights })
    }

    pub fn max_size(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum::<f64>() / total
    }
}

impl Default for SizeDistribution {
    fn default() -> Self {
        SizeDistribution { weights: vec![1.0; 6] }
    }
}

/// `5` (fixed), `1-6` (uniform) or `1:0.4,2:0.3,3:0.3` (weighted).
impl FromStr for SizeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse size distribution `{s}`"));
        let s = s.trim();
        if s.contains(':') {
            let pairs = s
                .split(',')
                .map(|p| {
                    let (k, w) = p.split_once(':').ok_or_else(bad)?;
                    Ok((k.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
                })
                .collect::<Result<Vec<_>>>()?;
            Self::weighted(pairs)
        } else if let Some((lo, hi)) = s.split_once('-') {
            Self::uniform(lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)
        } else {
            Self::fixed(s.parse().map_err(|_| bad())?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParams {
    pub collectors: usize,
    pub events_per_collector: usize,
    pub sizes: SizeDistribution,
    /// Ineligible rows added per generated row.
    pub noise_rate: f64,
    /// Chance that one sheet of a group disagrees on family.
    pub discord_rate: f64,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            collectors: 100,
            events_per_collector: 20,
            sizes: SizeDistribution::default(),
            noise_rate: 0.0,
            discord_rate: 0.0,
            seed: 0,
        }
    }
}

impl CorpusParams {
    fn validate(&self) -> Result<()> {
        if self.collectors == 0 || self.events_per_collector == 0 {
            return Err(Error::InvalidParameter("collector and event counts must be positive".into()));
        }
        for (name, p) in [("noise rate", self.noise_rate), ("discord rate", self.discord_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Generated rows keyed by record id to their true event, `None` for
/// ineligible noise rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub rows: Vec<(String, Option<u64>)>,
}

impl GroundTruth {
    /// True groups as sets of record ids, in event order.
    pub fn groups(&self) -> Vec<Vec<&str>> {
        let mut by_event: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
        for (id, event) in &self.rows {
            if let Some(e) = event {
                by_event.entry(*e).or_default().push(id);
            }
        }
        by_event.into_values().collect()
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
        w.write_record(["record_id", "event_id"])?;
        for (id, event) in &self.rows {
            w.write_record([id.clone(), event.map(|e| e.to_string()).unwrap_or_default()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let event = match rec.get(1).unwrap_or("").trim() {
                "" => None,
                e => Some(e.parse().map_err(|_| Error::format("ground truth", format!("bad event id `{e}`")))?),
            };
            rows.push((rec[0].to_string(), event));
        }
        Ok(GroundTruth { rows })
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    /// Darwin Core header then rows, tab-delimited and unquoted.
    pub rows: Vec<[String; 13]>,
    pub truth: GroundTruth,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes the occurrence table with Darwin Core column names.
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').quote_style(csv::QuoteStyle::Never).from_writer(out);
        w.write_record(Field::ALL.iter().map(|f| f.dwc_term()))?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

const SYLLABLES: [&str; 32] = [
    "ba", "ber", "ca", "dor", "el", "fa", "gan", "hal", "ir", "jo", "ka", "lin", "mar", "nes", "ol", "pe", "qui",
    "ros", "sa", "tur", "ul", "van", "wel", "xi", "yor", "zan", "bro", "stel", "dun", "mo", "ti", "gre",
];
const GIVEN: [&str; 24] = [
    "Anna", "Boris", "Clara", "David", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Karl", "Lucia", "Marta",
    "Nils", "Oscar", "Paula", "Rosa", "Simon", "Tomas", "Ursula", "Victor", "Walter", "Yara", "Zoe",
];
const INSTITUTIONS: [&str; 40] = [
    "A", "B", "BM", "BR", "C", "CAS", "CHSC", "E", "F", "G", "GH", "H", "HUH", "K", "L", "LE", "M", "MA", "MEXU",
    "MICH", "MO", "NSW", "NY", "P", "PE", "PH", "PRE", "RSA", "S", "SI", "TEX", "U", "UC", "UPS", "US", "W", "WAG",
    "WIS", "WU", "Z",
];
const TAXA: [(&str, &str, &str); 8] = [
    ("Saxifragales", "Crassulaceae", "Sedum"),
    ("Solanales", "Solanaceae", "Solanum"),
    ("Asterales", "Asteraceae", "Senecio"),
    ("Fabales", "Fabaceae", "Astragalus"),
    ("Poales", "Poaceae", "Festuca"),
    ("Lamiales", "Lamiaceae", "Salvia"),
    ("Rosales", "Rosaceae", "Rubus"),
    ("Ericales", "Ericaceae", "Erica"),
];
const EPITHETS: [&str; 8] = ["alba", "montana", "minor", "repens", "villosa", "glabra", "major", "nana"];
const COUNTRIES: [&str; 8] = ["US", "PE", "MX", "BR", "ZA", "AU", "FR", "CN"];
const TYPE_STATUS: [&str; 4] = ["Isotype", "Holotype", "isolectotype of X", "Type"];

struct Person {
    surname: String,
    given: &'static str,
    middle: Option<char>,
}

impl Person {
    fn initials(&self) -> String {
        let first = self.given.chars().next().unwrap_or('X');
        match self.middle {
            Some(m) => format!("{first}.{m}."),
            None => format!("{first}."),
        }
    }

    fn spaced_initials(&self) -> String {
        self.initials().replace('.', ". ").trim_end().to_string()
    }

    /// One written form of the name; `typo` swaps one inner letter.
    fn render(&self, style: usize, typo: Option<(usize, char)>) -> String {
        let mut surname = self.surname.clone();
        if let Some((pos, c)) = typo {
            let mut chars: Vec<char> = surname.chars().collect();
            chars[pos] = c;
            surname = chars.into_iter().collect();
        }
        let middle = self.middle.map(|m| format!(" {m}.")).unwrap_or_default();
        match style {
            0 => format!("{surname}, {}", self.initials()),
            1 => format!("{} {surname}", self.spaced_initials()),
            2 => format!("{}{middle} {surname}", self.given),
            3 => format!("{surname}, {}{middle}", self.given),
            _ => format!("{surname} {}", self.initials().replace('.', "")),
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn unique_surnames(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let parts = rng.random_range(3..=4);
        let s: String = (0..parts).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        if seen.insert(s.clone()) {
            out.push(capitalize(&s));
        }
    }
    out
}

fn render_date(d: NaiveDate, style: u32) -> String {
    match style {
        0 => d.format("%Y-%m-%d").to_string(),
        1 => d.format("%Y-%m-%dT10:00:00").to_string(),
        _ => d.format("%Y%m%d").to_string(),
    }
}

fn noise_row(rng: &mut ChaCha8Rng, people: &[Person], id: String) -> [String; 13] {
    let p = people.choose(rng).expect("non-empty");
    let mut row: [String; 13] = Default::default();
    row[0] = id;
    row[1] = p.render(1, None);
    row[2] = rng.random_range(1..9999).to_string();
    row[3] = format!("19{:02}-05-0{}", rng.random_range(10..99), rng.random_range(1..9));
    match rng.random_range(0..3) {
        0 => row[2] = "s.n.".into(),
        1 => row[3] = format!("19{:02}", rng.random_range(10..99)),
        _ => row[1] = String::new(),
    }
    row[8] = INSTITUTIONS.choose(rng).expect("non-empty").to_string();
    row
}

/// Generates a corpus deterministically from `params.seed`.
pub fn generate_corpus(params: &CorpusParams) -> Result<Corpus> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let people: Vec<Person> = unique_surnames(params.collectors, &mut rng)
        .into_iter()
        .map(|surname| Person {
            surname,
            given: GIVEN.choose(&mut rng).expect("non-empty"),
            middle: rng.random_bool(0.6).then(|| rng.random_range(b'A'..=b'Z') as char),
        })
        .collect();
    let sizes = WeightedIndex::new(&params.sizes.weights)
        .map_err(|e| Error::InvalidParameter(format!("size distribution: {e}")))?;
    let epoch = NaiveDate::from_ymd_opt(1950, 1, 1).expect("valid date");

    let mut corpus = Corpus { rows: Vec::new(), truth: GroundTruth::default() };
    let mut event_id = 0u64;
    for (ci, person) in people.iter().enumerate() {
        let mut number = rng.random_range(1..5000u32);
        let mut date = epoch + Duration::days(rng.random_range(0..20_000));
        for _ in 0..params.events_per_collector {
            event_id += 1;
            number += rng.random_range(1..40);
            date += Duration::days(rng.random_range(1..30));
            let size = sizes.sample(&mut rng) + 1;
            let (order, family, genus) = *TAXA.choose(&mut rng).expect("non-empty");
            let epithet = EPITHETS.choose(&mut rng).expect("non-empty");
            let country = COUNTRIES.choose(&mut rng).expect("non-empty");
            let discord = size > 1 && rng.random_bool(params.discord_rate);
            for sheet in 0..size {
                let typo = (person.surname.len() >= 8 && rng.random_bool(0.02))
                    .then(|| (rng.random_range(2..person.surname.len() - 1), rng.random_range(b'a'..=b'z') as char));
                let mut name = person.render(rng.random_range(0..5), typo);
                if rng.random_bool(0.2) {
                    let partner = &people[(ci + rng.random_range(1..people.len().max(2))) % people.len()];
                    let sep = [" & ", "|", "; ", " and ", " with "].choose(&mut rng).expect("non-empty");
                    name = format!("{name}{sep}{}", partner.render(1, None));
                }
                let record_number = match rng.random_range(0..6) {
                    0 => format!("{} {number}", person.surname),
                    1 => format!("{}-{number}", person.surname.to_uppercase()),
                    _ => number.to_string(),
                };
                let mut row: [String; 13] = Default::default();
                let id = format!("occ-{}", corpus.rows.len() + 1);
                row[0] = id.clone();
                row[1] = name;
                row[2] = record_number;
                row[3] = render_date(date, rng.random_range(0..3));
                row[4] = country.to_string();
                row[5] = order.to_string();
                row[6] = if discord && sheet == size - 1 { "Incertae sedis".into() } else { family.to_string() };
                row[7] = if rng.random_bool(0.1) {
                    format!("{genus} {}", EPITHETS.choose(&mut rng).expect("non-empty"))
                } else {
                    format!("{genus} {epithet}")
                };
                row[8] = INSTITUTIONS.choose(&mut rng).expect("non-empty").to_string();
                if rng.random_bool(0.15) {
                    row[9] = TYPE_STATUS.choose(&mut rng).expect("non-empty").to_string();
                }
                if rng.random_bool(0.5) {
                    row[10] = format!("{:.4}", rng.random_range(-60.0..70.0));
                    row[11] = format!("{:.4}", rng.random_range(-170.0..170.0));
                }
                if rng.random_bool(0.4) {
                    row[12] = format!("https://img.example.org/{id}.jpg");
                }
                corpus.rows.push(row);
                corpus.truth.rows.push((id, Some(event_id)));
            }
            while rng.random_bool(params.noise_rate) {
                let id = format!("occ-{}", corpus.rows.len() + 1);
                corpus.rows.push(noise_row(&mut rng, &people, id.clone()));
                corpus.truth.rows.push((id, None));
            }
        }
    }
    Ok(corpus)
}

/// Agreement between detected groups and the generated truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub truth_groups: u64,
    pub truth_duplicate_groups: u64,
    pub detected_groups: u64,
    /// Truth groups reproduced exactly by one detected group.
    pub recovered_groups: u64,
    pub recovered_duplicate_groups: u64,
    /// Recovered share of truth groups of size ≥ 2.
    pub duplicate_recovery: f64,
    pub pair_precision: f64,
    pub pair_recall: f64,
    /// Truth records with no detected group.
    pub missing_records: u64,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores `detected` (record id → detected group id) against `truth`.
/// Only records with a true event are scored.
pub fn score_grouping<'a>(truth: &GroundTruth, detected: impl IntoIterator<Item = (&'a str, u64)>) -> RecoveryScore {
    let detected: HashMap<&str, u64> = detected.into_iter().collect();
    let truth_groups = truth.groups();
    let mut detected_sizes: HashMap<u64, u64> = HashMap::new();
    let mut cells: HashMap<(u64, u64), u64> = HashMap::new();
    let mut missing = 0;
    for (id, event) in &truth.rows {
        let Some(event) = event else { continue };
        match detected.get(id.as_str()) {
            Some(&d) => {
                *detected_sizes.entry(d).or_default() += 1;
                *cells.entry((*event, d)).or_default() += 1;
            }
            None => missing += 1,
        }
    }
    // a detected group also containing unscored records is not an exact match
    let mut full_sizes: HashMap<u64, u64> = HashMap::new();
    for d in detected.values() {
        *full_sizes.entry(*d).or_default() += 1;
    }

    let mut recovered = 0;
    let mut recovered_dup = 0;
    let mut truth_dup = 0;
    for members in &truth_groups {
        let n = members.len() as u64;
        if n >= 2 {
            truth_dup += 1;
        }
        let Some(&d) = detected.get(members[0]) else { continue };
        if members.iter().all(|m| detected.get(m) == Some(&d)) && full_sizes[&d] == n {
            recovered += 1;
            if n >= 2 {
                recovered_dup += 1;
            }
        }
    }
    let tp: u64 = cells.values().map(|&c| pairs(c)).sum();
    let truth_pairs: u64 = truth_groups.iter().map(|g| pairs(g.len() as u64)).sum();
    let detected_pairs: u64 = detected_sizes.values().map(|&c| pairs(c)).sum();
    RecoveryScore {
        truth_groups: truth_groups.len() as u64,
        truth_duplicate_groups: truth_dup,
        detected_groups: full_sizes.len() as u64,
        recovered_groups: recovered,
        recovered_duplicate_groups: recovered_dup,
        duplicate_recovery: ratio(recovered_dup, truth_dup),
        pair_precision: ratio(tp, detected_pairs),
        pair_recall: ratio(tp, truth_pairs),
        missing_records: missing,
    }
}
