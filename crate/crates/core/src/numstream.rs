//! Token codec for program text.
//!
//! In float mode each numeric literal becomes one `[NUM]` token plus a real
//! value carried next to the id stream; in char mode literals are spelled out
//! with digit, point and sign tokens.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::dsl::{self, ProgramText};
use crate::scene::AttributeCatalog;

pub const PAD: &str = "[PAD]";
pub const BOS: &str = "[BOS]";
pub const EOS: &str = "[EOS]";
pub const NUM: &str = "[NUM]";

const STRUCTURAL: [&str; 8] = ["add", "(", ")", ",", " ", "=", "'", "\n"];
const NUMERIC_CHARS: [&str; 12] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", ".", "-"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumstreamError {
    #[error("cannot tokenize text at byte {offset}: `{snippet}`")]
    UnencodableText { offset: usize, snippet: String },
    #[error("expected {expected} numbers for the [NUM] slots, got {found}")]
    SlotMismatch { expected: usize, found: usize },
    #[error("token id {0} is outside the vocabulary")]
    UnknownId(u32),
    #[error("non-finite slot value {0}")]
    NonFinite(f64),
    #[error("vocabulary: {0}")]
    InvalidVocabulary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumMode {
    Float,
    Char,
}

impl NumMode {
    pub fn name(self) -> &'static str {
        match self {
            NumMode::Float => "float",
            NumMode::Char => "char",
        }
    }
}

impl fmt::Display for NumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NumMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "float" => Ok(NumMode::Float),
            "char" => Ok(NumMode::Char),
            _ => Err(format!("unknown numeric mode `{s}` (expected float or char)")),
        }
    }
}

/// Dense, ordered token list. Serializes as a JSON array of strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    mode: NumMode,
    max_len: usize,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = NumstreamError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || index.insert(t.clone(), i as u32).is_some() {
                return Err(NumstreamError::InvalidVocabulary(format!("bad or duplicate token `{t}`")));
            }
        }
        for special in [PAD, BOS, EOS] {
            if !index.contains_key(special) {
                return Err(NumstreamError::InvalidVocabulary(format!("missing {special}")));
            }
        }
        let mode = if index.contains_key(NUM) {
            NumMode::Float
        } else {
            NumMode::Char
        };
        let max_len = tokens.iter().map(|t| t.len()).max().unwrap_or(1);
        Ok(Self {
            tokens,
            index,
            mode,
            max_len,
        })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn mode(&self) -> NumMode {
        self.mode
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn pad(&self) -> u32 {
        self.index[PAD]
    }

    pub fn bos(&self) -> u32 {
        self.index[BOS]
    }

    pub fn eos(&self) -> u32 {
        self.index[EOS]
    }

    /// `[NUM]` id; `None` in char mode.
    pub fn num(&self) -> Option<u32> {
        self.id(NUM)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    // Longest vocabulary token that prefixes `s`.
    fn longest_match(&self, s: &str) -> Option<(u32, usize)> {
        let mut len = self.max_len.min(s.len());
        while len > 0 {
            if s.is_char_boundary(len) {
                if let Some(&id) = self.index.get(&s[..len]) {
                    return Some((id, len));
                }
            }
            len -= 1;
        }
        None
    }
}

/// Special tokens first, then the remaining tokens sorted.
pub fn build_vocabulary(catalog: &AttributeCatalog, mode: NumMode) -> Vocabulary {
    build_vocabulary_multi(&[catalog], mode)
}

pub fn build_vocabulary_multi(catalogs: &[&AttributeCatalog], mode: NumMode) -> Vocabulary {
    let mut rest: Vec<String> = STRUCTURAL
        .iter()
        .chain(dsl::KEYS.iter())
        .map(|s| s.to_string())
        .collect();
    if mode == NumMode::Char {
        rest.extend(NUMERIC_CHARS.iter().map(|s| s.to_string()));
    }
    for c in catalogs {
        rest.extend(c.all_terms().into_iter().map(str::to_string));
    }
    rest.sort();
    rest.dedup();
    let mut tokens: Vec<String> = [PAD, BOS, EOS].iter().map(|s| s.to_string()).collect();
    if mode == NumMode::Float {
        tokens.push(NUM.to_string());
    }
    tokens.extend(rest);
    Vocabulary::try_from(tokens).expect("generated vocabulary is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSlot {
    /// Index into `ids` of the `[NUM]` token.
    pub position: usize,
    pub value: f64,
    /// Key plus tuple index, e.g. `loc.0` or `x`.
    pub family: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStream {
    pub ids: Vec<u32>,
    #[serde(default)]
    pub slots: Vec<NumericSlot>,
    pub mode: NumMode,
}

impl TokenStream {
    pub fn values(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.value).collect()
    }
}

// Numeric literal at the start of `s`: optional sign, digits, optional fraction.
fn number_len(s: &[u8]) -> usize {
    let mut i = usize::from(s.first() == Some(&b'-'));
    let start = i;
    while s.get(i).is_some_and(u8::is_ascii_digit) {
        i += 1;
    }
    if i == start {
        return 0;
    }
    if s.get(i) == Some(&b'.') && s.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        while s.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
    }
    i
}

// Tracks which key and tuple index the next number belongs to.
#[derive(Default)]
struct FamilyTracker {
    key: Option<String>,
    tuple: Option<usize>,
    after_eq: bool,
}

impl FamilyTracker {
    fn observe(&mut self, token: &str) {
        match token {
            "=" => self.after_eq = true,
            "(" if self.after_eq => {
                self.tuple = Some(0);
                self.after_eq = false;
            }
            "," => {
                if let Some(t) = self.tuple.as_mut() {
                    *t += 1;
                }
            }
            ")" => {
                self.tuple = None;
            }
            " " | "'" => {}
            t if dsl::KEYS.contains(&t) && self.tuple.is_none() => {
                self.key = Some(t.to_string());
                self.after_eq = false;
            }
            _ => self.after_eq = false,
        }
    }

    fn family(&mut self) -> String {
        self.after_eq = false;
        let key = self.key.as_deref().unwrap_or("?");
        match self.tuple {
            Some(i) => format!("{key}.{i}"),
            None => key.to_string(),
        }
    }
}

/// Numeric literals of a program with their slot families, read straight
/// from the text (quoted words are skipped).
pub fn numeric_fields(text: &str) -> Vec<(String, f64)> {
    let b = text.as_bytes();
    let mut fam = FamilyTracker::default();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'\'' {
            fam.observe("'");
            i += 1 + text[i + 1..].find('\'').map_or(text.len() - i - 1, |k| k + 1);
            continue;
        }
        let n = number_len(&b[i..]);
        if n > 0 {
            if let Ok(v) = text[i..i + n].parse() {
                out.push((fam.family(), v));
            }
            i += n;
            continue;
        }
        let start = i;
        if b[i].is_ascii_alphabetic() || b[i] == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
        } else {
            i += text[i..].chars().next().map_or(1, char::len_utf8);
        }
        fam.observe(&text[start..i]);
    }
    out
}

/// Slot family of every `[NUM]` in a token sequence.
pub fn slot_families(ids: &[u32], vocab: &Vocabulary) -> Vec<String> {
    let num = vocab.num();
    let text: String = content_ids(ids, vocab)
        .iter()
        .map(|&id| if Some(id) == num { "0" } else { vocab.token(id).unwrap_or("") })
        .collect();
    numeric_fields(&text).into_iter().map(|(f, _)| f).collect()
}

pub fn encode(text: &ProgramText, vocab: &Vocabulary, mode: NumMode) -> Result<TokenStream, NumstreamError> {
    let s = text.as_str();
    let bytes = s.as_bytes();
    let unencodable = |offset: usize| NumstreamError::UnencodableText {
        offset,
        snippet: s[offset..].chars().take(24).collect(),
    };
    let id_of = |tok: &str, offset: usize| vocab.id(tok).ok_or_else(|| unencodable(offset));
    let mut ids = Vec::new();
    let mut slots = Vec::new();
    let mut fam = FamilyTracker::default();
    let mut pos = 0;
    while pos < s.len() {
        if bytes[pos] == b'\'' {
            // Quoted attribute word(s): tokenized without number detection.
            ids.push(id_of("'", pos)?);
            let close = s[pos + 1..]
                .find('\'')
                .map(|k| pos + 1 + k)
                .ok_or_else(|| unencodable(pos))?;
            let mut p = pos + 1;
            while p < close {
                let (id, len) = vocab
                    .longest_match(&s[p..close])
                    .ok_or_else(|| unencodable(p))?;
                ids.push(id);
                p += len;
            }
            ids.push(id_of("'", close)?);
            pos = close + 1;
            continue;
        }
        let nlen = number_len(&bytes[pos..]);
        if nlen > 0 {
            let lit = &s[pos..pos + nlen];
            let family = fam.family();
            match mode {
                NumMode::Float => {
                    let value: f64 = lit.parse().map_err(|_| unencodable(pos))?;
                    slots.push(NumericSlot {
                        position: ids.len(),
                        value,
                        family,
                    });
                    ids.push(id_of(NUM, pos)?);
                }
                NumMode::Char => {
                    for (k, ch) in lit.char_indices() {
                        ids.push(id_of(&lit[k..k + ch.len_utf8()], pos + k)?);
                    }
                }
            }
            pos += nlen;
            continue;
        }
        let (id, len) = vocab.longest_match(&s[pos..]).ok_or_else(|| unencodable(pos))?;
        fam.observe(&s[pos..pos + len]);
        ids.push(id);
        pos += len;
    }
    Ok(TokenStream { ids, slots, mode })
}

/// Structure pass, then substitution of `numbers` into the `[NUM]`
/// positions in order. A leading `[BOS]` is skipped and decoding stops at
/// `[EOS]`; `[PAD]` is ignored.
pub fn decode_two_pass(ids: &[u32], numbers: &[f64], vocab: &Vocabulary) -> Result<ProgramText, NumstreamError> {
    let content = content_ids(ids, vocab);
    let num = vocab.num();
    let expected = content.iter().filter(|&&i| Some(i) == num).count();
    if expected != numbers.len() {
        return Err(NumstreamError::SlotMismatch {
            expected,
            found: numbers.len(),
        });
    }
    let mut pieces: Vec<std::borrow::Cow<'_, str>> = Vec::with_capacity(content.len());
    for &id in &content {
        let tok = vocab.token(id).ok_or(NumstreamError::UnknownId(id))?;
        pieces.push(tok.into());
    }
    let mut values = numbers.iter();
    for (piece, &id) in pieces.iter_mut().zip(&content) {
        if Some(id) == num {
            let v = *values.next().expect("slot count checked");
            *piece = dsl::format_number(v)
                .map_err(|_| NumstreamError::NonFinite(v))?
                .into();
        }
    }
    Ok(ProgramText::from(pieces.concat().as_str()))
}

/// `ids` without a leading `[BOS]`, truncated at `[EOS]`, with `[PAD]` removed.
pub fn content_ids(ids: &[u32], vocab: &Vocabulary) -> Vec<u32> {
    let start = usize::from(ids.first() == Some(&vocab.bos()));
    ids[start..]
        .iter()
        .copied()
        .take_while(|&i| i != vocab.eos())
        .filter(|&i| i != vocab.pad())
        .collect()
}

/// Writes streams as JSONL `{ids, slots, mode}` lines.
pub fn write_streams(path: &std::path::Path, streams: &[TokenStream]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in streams {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_streams(path: &std::path::Path) -> std::io::Result<Vec<TokenStream>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clevr(mode: NumMode) -> Vocabulary {
        build_vocabulary(AttributeCatalog::clevr(), mode)
    }

    #[test]
    fn fig_s4_float_mode() {
        let v = clevr(NumMode::Float);
        let t = ProgramText::from("add(x=0.292, y=0.266)");
        let s = encode(&t, &v, NumMode::Float).unwrap();
        assert_eq!(s.ids.iter().filter(|&&i| Some(i) == v.num()).count(), 2);
        assert_eq!(s.values(), vec![0.292, 0.266]);
        assert_eq!(s.slots[0].family, "x");
        assert_eq!(s.slots[1].family, "y");
        assert_eq!(decode_two_pass(&s.ids, &s.values(), &v).unwrap(), t);
    }

    #[test]
    fn fig_s4_char_mode() {
        let v = clevr(NumMode::Char);
        let t = ProgramText::from("add(x=0.292, y=0.266)");
        let s = encode(&t, &v, NumMode::Char).unwrap();
        assert!(s.slots.is_empty() && v.num().is_none());
        let toks: Vec<&str> = s.ids.iter().map(|&i| v.token(i).unwrap()).collect();
        assert!(toks.windows(5).any(|w| w == ["0", ".", "2", "9", "2"]));
        assert_eq!(decode_two_pass(&s.ids, &[], &v).unwrap(), t);
    }

    #[test]
    fn substitution_formats_numbers() {
        let v = clevr(NumMode::Float);
        let n = NUM;
        let ids: Vec<u32> = ["add", "(", "x", "=", n, ",", " ", "y", "=", n, ")"]
            .iter()
            .map(|t| v.id(t).unwrap())
            .collect();
        let out = decode_two_pass(&ids, &[0.5, 0.25], &v).unwrap();
        assert_eq!(out.as_str(), "add(x=0.500, y=0.250)");
        assert!(matches!(
            decode_two_pass(&ids, &[0.5], &v),
            Err(NumstreamError::SlotMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn tuple_families() {
        let v = clevr(NumMode::Float);
        let t = ProgramText::from("add(shape='cube', loc=(1.000, -2.000, 0.350), rotation=0.500)\n");
        let s = encode(&t, &v, NumMode::Float).unwrap();
        let fams: Vec<&str> = s.slots.iter().map(|x| x.family.as_str()).collect();
        assert_eq!(fams, ["loc.0", "loc.1", "loc.2", "rotation"]);
        assert_eq!(s.values(), vec![1.0, -2.0, 0.35, 0.5]);
    }

    #[test]
    fn fields_from_text_match_encoder_families() {
        let v = build_vocabulary(AttributeCatalog::furniture(), NumMode::Float);
        let t = ProgramText::from(
            "add(shape='chairs_0055', color='olive green', loc=(1.000, -2.000, 0.500), rotation=(1.000, 0.000, 0.000, 0.000, 1.000, 0.000))\n",
        );
        let s = encode(&t, &v, NumMode::Float).unwrap();
        let fields = numeric_fields(t.as_str());
        assert_eq!(fields.len(), 9);
        let fams: Vec<String> = s.slots.iter().map(|x| x.family.clone()).collect();
        assert_eq!(fields.iter().map(|f| f.0.clone()).collect::<Vec<_>>(), fams);
        assert_eq!(slot_families(&s.ids, &v), fams);
        assert_eq!(fields.iter().map(|f| f.1).collect::<Vec<_>>(), s.values());
    }

    #[test]
    fn unknown_word_is_unencodable() {
        let v = clevr(NumMode::Float);
        let t = ProgramText::from("add(shape='teapot', x=0.100)");
        assert!(matches!(encode(&t, &v, NumMode::Float), Err(NumstreamError::UnencodableText { .. })));
        // digits are not tokens in float mode
        let c = clevr(NumMode::Char);
        assert!(encode(&t, &c, NumMode::Float).is_err());
    }

    #[test]
    fn markers_are_stripped() {
        let v = clevr(NumMode::Char);
        let t = ProgramText::from("add(x=1.000, y=0.000)\n");
        let mut ids = vec![v.bos()];
        ids.extend(encode(&t, &v, NumMode::Char).unwrap().ids);
        ids.extend([v.eos(), v.pad(), v.pad()]);
        assert_eq!(decode_two_pass(&ids, &[], &v).unwrap(), t);
    }

    #[test]
    fn vocabulary_json_is_a_list() {
        let v = clevr(NumMode::Float);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.starts_with("[\"[PAD]\",\"[BOS]\",\"[EOS]\",\"[NUM]\""));
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocabulary>("[\"a\",\"a\"]").is_err());
    }

    #[test]
    fn furniture_words_with_digits_and_spaces() {
        let cat = AttributeCatalog::furniture();
        let v = build_vocabulary(cat, NumMode::Float);
        let t = ProgramText::from("add(shape='chairs_0055', color='olive green', loc=(1.000, 2.000, 0.500))\n");
        let s = encode(&t, &v, NumMode::Float).unwrap();
        assert_eq!(s.slots.len(), 3);
        assert!(s.ids.contains(&v.id("chairs_0055").unwrap()));
        assert_eq!(decode_two_pass(&s.ids, &s.values(), &v).unwrap(), t);
    }
}
