//! The `add(...)` scene-program language.
//!
//! A program is one `add(key=value, ...)` statement per line. Values are
//! single-quoted attribute words, numbers, or parenthesized number tuples.
//! Emission orders statements front-to-back from the camera, shuffles the
//! attribute order of each statement with a seeded RNG, and prints every
//! number with exactly three decimals.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::rotation::{geodesic_deg, EulerOrder, Rotation, RotationError, RotationRepr};
use crate::scene::{
    AttributeCatalog, AttributeKind, CameraRecord, Location, ObjectRecord, SceneError,
    SceneProgram,
};

/// Keys the grammar accepts.
pub const KEYS: [&str; 8] = ["shape", "size", "color", "material", "loc", "rotation", "x", "y"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: {source}")]
    UnknownAttribute { line: usize, source: SceneError },
    #[error("line {line}: `{key}` expects {expected}, found {found}")]
    Arity {
        line: usize,
        key: String,
        expected: String,
        found: usize,
    },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid rotation: {source}")]
    Rotation { line: usize, source: RotationError },
    #[error("cannot format non-finite number {0}")]
    NonFinite(f64),
    #[error("rotation cannot be written as {0}")]
    UnserializableRotation(String),
}

/// Program text: one statement per line, LF-terminated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProgramText(pub String);

impl ProgramText {
    pub fn from_lines<I: IntoIterator<Item = String>>(lines: I) -> Self {
        let mut s = String::new();
        for line in lines {
            s.push_str(&line);
            s.push('\n');
        }
        ProgramText(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.0.lines().filter(|l| !l.trim().is_empty())
    }
}

impl fmt::Display for ProgramText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProgramText {
    fn from(s: &str) -> Self {
        ProgramText(s.to_string())
    }
}

/// Three fraction digits, half away from zero, no sign on zero.
pub fn format_number(x: f64) -> Result<String, DslError> {
    if !x.is_finite() {
        return Err(DslError::NonFinite(x));
    }
    // Decide the rounding on the exact decimal expansion of `x`.
    let mag = x.abs();
    let exact = format!("{mag:.40}");
    let (int_part, frac) = exact.split_once('.').unwrap_or((&exact, ""));
    let mut digits: Vec<u8> = int_part.bytes().chain(frac.bytes().take(3)).map(|b| b - b'0').collect();
    let round_up = frac.as_bytes().get(3).is_some_and(|&b| b >= b'5');
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - 3;
    let int_digits: String = digits[..split].iter().map(|d| char::from(b'0' + d)).collect();
    let int_digits = int_digits.trim_start_matches('0');
    let int_digits = if int_digits.is_empty() { "0" } else { int_digits };
    let frac_digits: String = digits[split..].iter().map(|d| char::from(b'0' + d)).collect();
    let zero = int_digits == "0" && frac_digits == "000";
    let sign = if x < 0.0 && !zero { "-" } else { "" };
    Ok(format!("{sign}{int_digits}.{frac_digits}"))
}

/// The value a number takes after a print/parse cycle.
pub fn quantize(x: f64) -> f64 {
    format_number(x)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    #[default]
    FrontToBack,
    AsGiven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitOptions {
    pub shuffle_seed: u64,
    pub ordering: Ordering,
    pub rotation_repr: RotationRepr,
    pub euler_order: EulerOrder,
    /// Replace attribute words with a random catalog synonym (or the word itself).
    pub apply_synonyms: bool,
    /// With `scalar_z`, only cubes carry a rotation key.
    pub scalar_z_on_cubes_only: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self {
            shuffle_seed: 0,
            ordering: Ordering::FrontToBack,
            rotation_repr: RotationRepr::ExtEuler,
            euler_order: EulerOrder::XYZ,
            apply_synonyms: false,
            scalar_z_on_cubes_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOptions {
    /// How 3-component rotations are read; 1 and 6 components are always
    /// `scalar_z` and `sixd`.
    pub three_component: RotationRepr,
    pub euler_order: EulerOrder,
    pub camera: CameraRecord,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            three_component: RotationRepr::ExtEuler,
            euler_order: EulerOrder::XYZ,
            camera: CameraRecord::default(),
        }
    }
}

impl ParseOptions {
    pub fn for_emit(opts: &EmitOptions, camera: CameraRecord) -> Self {
        let three_component = match opts.rotation_repr {
            r @ (RotationRepr::ExtEuler | RotationRepr::IntEuler | RotationRepr::AxisAngle) => r,
            _ => RotationRepr::ExtEuler,
        };
        Self {
            three_component,
            euler_order: opts.euler_order,
            camera,
        }
    }
}

/// Parses with default options.
pub fn parse_program(text: &ProgramText, catalog: &AttributeCatalog) -> Result<SceneProgram, DslError> {
    parse_program_with(text, catalog, &ParseOptions::default())
}

pub fn parse_program_with(
    text: &ProgramText,
    catalog: &AttributeCatalog,
    opts: &ParseOptions,
) -> Result<SceneProgram, DslError> {
    let mut objects = Vec::new();
    for (i, line) in text.0.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let call = Lexer::new(line, i + 1).call()?;
        objects.push(build_object(&call, i + 1, catalog, opts)?);
    }
    Ok(SceneProgram::new(objects, opts.camera))
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Num(f64),
    Tuple(Vec<f64>),
}

impl Value {
    fn numbers(&self) -> Option<Vec<f64>> {
        match self {
            Value::Str(_) => None,
            Value::Num(v) => Some(vec![*v]),
            Value::Tuple(v) => Some(v.clone()),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
            line,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::Syntax {
            line: self.line,
            col: self.pos + 1,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), DslError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<f64, DslError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let int_start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == int_start {
            return self.err("expected number");
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let frac_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return self.err("expected digits after `.`");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("bad number `{text}`")),
        }
    }

    fn value(&mut self) -> Result<Value, DslError> {
        self.skip_ws();
        match self.peek() {
            Some(b'\'') => {
                self.pos += 1;
                let start = self.pos;
                while self.peek().is_some_and(|c| c != b'\'') {
                    self.pos += 1;
                }
                if self.peek().is_none() {
                    return self.err("unterminated string");
                }
                let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                self.pos += 1;
                Ok(Value::Str(s))
            }
            Some(b'(') => {
                self.pos += 1;
                let mut items = vec![self.number()?];
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                            items.push(self.number()?);
                        }
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return self.err("expected `,` or `)` in tuple"),
                    }
                }
                Ok(Value::Tuple(items))
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => Ok(Value::Num(self.number()?)),
            _ => self.err("expected string, number or tuple"),
        }
    }

    /// `add(key=value, ...)`; returns the keyword arguments in source order.
    fn call(&mut self) -> Result<Vec<(String, Value)>, DslError> {
        let name = self.ident()?;
        if name != "add" {
            self.pos = 0;
            return self.err(format!("unknown function `{name}`"));
        }
        self.expect(b'(')?;
        let mut args: Vec<(String, Value)> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
        } else {
            loop {
                let key_pos = self.pos;
                let key = self.ident()?;
                if !KEYS.contains(&key.as_str()) {
                    self.pos = key_pos;
                    return self.err(format!("unknown key `{key}`"));
                }
                self.expect(b'=')?;
                let value = self.value()?;
                if args.iter().any(|(k, _)| *k == key) {
                    return Err(DslError::DuplicateKey {
                        line: self.line,
                        key,
                    });
                }
                args.push((key, value));
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return self.err("expected `,` or `)`"),
                }
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.err("trailing characters after statement");
        }
        Ok(args)
    }
}

fn build_object(
    args: &[(String, Value)],
    line: usize,
    catalog: &AttributeCatalog,
    opts: &ParseOptions,
) -> Result<ObjectRecord, DslError> {
    let get = |k: &str| args.iter().find(|(key, _)| key == k).map(|(_, v)| v);
    let arity = |key: &str, expected: &str, found: usize| DslError::Arity {
        line,
        key: key.to_string(),
        expected: expected.to_string(),
        found,
    };
    let mut obj = ObjectRecord {
        shape: None,
        size: None,
        color: None,
        material: None,
        location: Location::Fixed,
        rotation: None,
    };
    for kind in AttributeKind::ALL {
        if let Some(v) = get(kind.key()) {
            let Value::Str(term) = v else {
                return Err(arity(kind.key(), "a quoted word", v.numbers().map_or(0, |n| n.len())));
            };
            let name = catalog
                .resolve_kind(kind, term)
                .map_err(|source| DslError::UnknownAttribute { line, source })?;
            *obj.attribute_mut(kind) = Some(name);
        }
    }
    let scalar = |key: &str| -> Result<Option<f64>, DslError> {
        match get(key) {
            None => Ok(None),
            Some(Value::Num(v)) => Ok(Some(*v)),
            Some(other) => Err(arity(key, "a single number", other.numbers().map_or(0, |n| n.len()))),
        }
    };
    let (x, y) = (scalar("x")?, scalar("y")?);
    obj.location = match (get("loc"), x, y) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(DslError::Syntax {
                line,
                col: 1,
                msg: "`loc` cannot be combined with `x`/`y`".into(),
            })
        }
        (Some(v), None, None) => match v.numbers() {
            Some(n) if n.len() == 3 => Location::Point([n[0], n[1], n[2]]),
            n => return Err(arity("loc", "a 3-tuple", n.map_or(0, |n| n.len()))),
        },
        (None, Some(x), Some(y)) => Location::Planar([x, y]),
        (None, Some(_), None) => return Err(arity("y", "a number alongside `x`", 0)),
        (None, None, Some(_)) => return Err(arity("x", "a number alongside `y`", 0)),
        (None, None, None) => Location::Fixed,
    };
    if let Some(v) = get("rotation") {
        let values = v
            .numbers()
            .ok_or_else(|| arity("rotation", "1, 3 or 6 numbers", 0))?;
        let repr = match values.len() {
            1 => RotationRepr::ScalarZ,
            3 => opts.three_component,
            6 => RotationRepr::Sixd,
            n => return Err(arity("rotation", "1, 3 or 6 numbers", n)),
        };
        let rot = Rotation::from_components(repr, opts.euler_order, &values)
            .map_err(|source| DslError::Rotation { line, source })?;
        obj.rotation = Some(rot);
    }
    Ok(obj)
}

/// Renders a scene as program text.
pub fn emit_program(
    scene: &SceneProgram,
    catalog: &AttributeCatalog,
    opts: &EmitOptions,
) -> Result<ProgramText, DslError> {
    let order: Vec<usize> = match opts.ordering {
        Ordering::FrontToBack => scene.front_to_back_order(),
        Ordering::AsGiven => (0..scene.objects.len()).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed);
    let mut lines = Vec::with_capacity(order.len());
    for idx in order {
        lines.push(emit_statement(&scene.objects[idx], catalog, opts, &mut rng)?);
    }
    Ok(ProgramText::from_lines(lines))
}

fn emit_statement(
    obj: &ObjectRecord,
    catalog: &AttributeCatalog,
    opts: &EmitOptions,
    rng: &mut ChaCha8Rng,
) -> Result<String, DslError> {
    let mut parts: Vec<String> = Vec::new();
    for kind in AttributeKind::ALL {
        if let Some(name) = obj.attribute(kind) {
            let word = if opts.apply_synonyms {
                let aliases = catalog.aliases(name);
                let pick = rng.random_range(0..=aliases.len());
                if pick == 0 {
                    name
                } else {
                    aliases[pick - 1].as_str()
                }
            } else {
                name
            };
            parts.push(format!("{}='{}'", kind.key(), word));
        }
    }
    match obj.location {
        Location::Point(p) => parts.push(format!("loc={}", tuple(&p)?)),
        Location::Planar([x, y]) => {
            parts.push(format!("x={}, y={}", format_number(x)?, format_number(y)?))
        }
        Location::Fixed => {}
    }
    if let Some(rot) = obj.rotation {
        let skip = opts.rotation_repr == RotationRepr::ScalarZ
            && opts.scalar_z_on_cubes_only
            && obj.shape.as_deref() != Some("cube");
        if !skip {
            let values = rot
                .components(opts.rotation_repr, opts.euler_order)
                .ok_or_else(|| DslError::UnserializableRotation(opts.rotation_repr.to_string()))?;
            let text = if values.len() == 1 {
                format_number(values[0])?
            } else {
                tuple(&values)?
            };
            parts.push(format!("rotation={text}"));
        }
    }
    parts.shuffle(rng);
    Ok(format!("add({})", parts.join(", ")))
}

fn tuple(values: &[f64]) -> Result<String, DslError> {
    let items: Result<Vec<String>, DslError> = values.iter().map(|v| format_number(*v)).collect();
    Ok(format!("({})", items?.join(", ")))
}

/// Scene as it should come back from `parse(emit(scene))`: emission order
/// applied and locations rounded to three decimals. Rotations are left as is.
pub fn canonicalize(scene: &SceneProgram, ordering: Ordering) -> SceneProgram {
    let order: Vec<usize> = match ordering {
        Ordering::FrontToBack => scene.front_to_back_order(),
        Ordering::AsGiven => (0..scene.objects.len()).collect(),
    };
    let objects = order
        .into_iter()
        .map(|i| {
            let mut o = scene.objects[i].clone();
            o.location = o.location.map(quantize);
            o
        })
        .collect();
    SceneProgram::new(objects, scene.camera)
}

/// Structural equality with rotations compared up to `rot_tol_deg`.
pub fn scenes_match(a: &SceneProgram, b: &SceneProgram, rot_tol_deg: f64) -> bool {
    a.camera == b.camera
        && a.objects.len() == b.objects.len()
        && a.objects.iter().zip(&b.objects).all(|(x, y)| {
            x.shape == y.shape
                && x.size == y.size
                && x.color == y.color
                && x.material == y.material
                && x.location == y.location
                && match (x.rotation, y.rotation) {
                    (None, None) => true,
                    (Some(r), Some(s)) => geodesic_deg(&r, &s) <= rot_tol_deg,
                    _ => false,
                }
        })
}
