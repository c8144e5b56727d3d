use deunicode::deunicode;

/// A collector name reduced to comparable parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParsedName {
    /// Lowercase ASCII surname, particles included ("van der werff").
    pub surname: String,
    /// First letters of the given names, in written order.
    pub initials: Vec<char>,
    pub raw: String,
}

impl ParsedName {
    pub fn new(surname: &str, initials: &str) -> Self {
        ParsedName { surname: surname.to_string(), initials: initials.chars().collect(), raw: String::new() }
    }
}

const WORD_SEPARATORS: [&str; 3] = [" and ", " with ", " et "];

/// First collector of a team string.
///
/// Separators are applied in priority order: `|`, `;`, `&`, then the
/// word-bounded ` and `, ` with `, ` et `.
pub fn extract_primary(recorded_by: &str) -> String {
    let mut s = recorded_by;
    for sep in ['|', ';', '&'] {
        s = first_piece(s.split(sep));
    }
    for sep in WORD_SEPARATORS {
        // ascii lowercasing preserves byte offsets
        let lower = s.to_ascii_lowercase();
        if let Some(pos) = lower.find(sep) {
            let head = &s[..pos];
            if !head.trim().is_empty() {
                s = head;
            }
        }
    }
    s.trim().trim_end_matches(',').trim().to_string()
}

fn first_piece<'a>(mut parts: impl Iterator<Item = &'a str>) -> &'a str {
    let first = parts.next().unwrap_or("");
    if !first.trim().is_empty() {
        return first;
    }
    parts.find(|p| !p.trim().is_empty()).unwrap_or(first)
}

const PARTICLES: [&str; 16] =
    ["van", "von", "der", "den", "de", "da", "du", "del", "della", "di", "la", "le", "dos", "das", "ten", "ter"];
const TITLES: [&str; 6] = ["dr", "prof", "mr", "mrs", "ms", "rev"];
const SUFFIXES: [&str; 5] = ["jr", "sr", "ii", "iii", "iv"];

#[derive(Debug, Clone)]
struct Token {
    text: String,
    /// written with a trailing period ("F.")
    abbreviated: bool,
}

fn tokenize(part: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for word in part.split_whitespace() {
        let pieces: Vec<&str> = word.split('.').collect();
        let n = pieces.len();
        for (i, piece) in pieces.into_iter().enumerate() {
            let t = piece.trim_matches(|c: char| !c.is_ascii_alphabetic());
            if t.is_empty() || t.bytes().any(|b| b.is_ascii_digit()) {
                continue;
            }
            out.push(Token { text: t.to_string(), abbreviated: i + 1 < n });
        }
    }
    out
}

fn strip_parenthetical(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn is_title(t: &Token) -> bool {
    TITLES.contains(&t.text.to_ascii_lowercase().as_str())
}

fn is_suffix(t: &Token) -> bool {
    SUFFIXES.contains(&t.text.to_ascii_lowercase().as_str())
}

fn is_particle(t: &Token) -> bool {
    t.text.starts_with(|c: char| c.is_ascii_lowercase()) && PARTICLES.contains(&t.text.as_str())
}

/// "PF" written without periods is a run of initials.
fn is_initial_run(t: &Token) -> bool {
    t.text.len() <= 3 && t.text.bytes().all(|b| b.is_ascii_uppercase())
}

fn initials_of(tokens: &[Token]) -> Vec<char> {
    let mut out = Vec::new();
    for t in tokens {
        if is_initial_run(t) && !t.abbreviated && t.text.len() > 1 {
            out.extend(t.text.chars().map(|c| c.to_ascii_lowercase()));
        } else if let Some(c) = t.text.chars().next() {
            out.push(c.to_ascii_lowercase());
        }
    }
    out
}

fn normalize_surname(tokens: &[Token]) -> Option<String> {
    let joined = tokens.iter().map(|t| t.text.to_ascii_lowercase()).collect::<Vec<_>>().join(" ");
    let cleaned: String = joined.chars().filter(|c| c.is_ascii_alphabetic() || *c == '-' || *c == ' ').collect();
    let cleaned = cleaned.trim().to_string();
    cleaned.chars().any(|c| c.is_ascii_alphabetic()).then_some(cleaned)
}

/// Parses "Surname, Initials" or "Given(s) Surname" forms.
pub fn parse_name(primary: &str) -> Option<ParsedName> {
    let ascii = strip_parenthetical(&deunicode(primary));
    let (surname_tokens, given_tokens) = match ascii.split_once(',') {
        Some((before, after)) => {
            let mut given: Vec<Token> = tokenize(after);
            given.retain(|t| !is_suffix(t) && !is_title(t));
            if given.is_empty() {
                split_given_surname(tokenize(before))?
            } else {
                let mut sur = tokenize(before);
                sur.retain(|t| !is_title(t));
                (sur, given)
            }
        }
        None => split_given_surname(tokenize(&ascii))?,
    };
    let surname = normalize_surname(&surname_tokens)?;
    Some(ParsedName { surname, initials: initials_of(&given_tokens), raw: primary.to_string() })
}

fn split_given_surname(mut tokens: Vec<Token>) -> Option<(Vec<Token>, Vec<Token>)> {
    tokens.retain(|t| !is_title(t));
    while tokens.len() > 1 && tokens.last().is_some_and(is_suffix) {
        tokens.pop();
    }
    if tokens.is_empty() {
        return None;
    }
    let n = tokens.len();
    // "Zika PF" / "Zika P." : trailing initials after a surname
    if n >= 2 {
        let last = &tokens[n - 1];
        let first = &tokens[0];
        let trailing_initials = (is_initial_run(last) || (last.abbreviated && last.text.len() == 1))
            && first.text.len() >= 2
            && !first.abbreviated
            && !first.text.bytes().all(|b| b.is_ascii_uppercase());
        if trailing_initials {
            let split = tokens
                .iter()
                .rposition(|t| !(is_initial_run(t) || (t.abbreviated && t.text.len() == 1)))
                .map_or(1, |i| i + 1);
            let given = tokens.split_off(split);
            return Some((tokens, given));
        }
    }
    let mut start = n - 1;
    while start > 0 && is_particle(&tokens[start - 1]) {
        start -= 1;
    }
    let surname = tokens.split_off(start);
    Some((surname, tokens))
}
