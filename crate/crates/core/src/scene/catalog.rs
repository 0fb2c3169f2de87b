use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use super::SceneError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Shape,
    Size,
    Color,
    Material,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 4] = [
        AttributeKind::Shape,
        AttributeKind::Size,
        AttributeKind::Color,
        AttributeKind::Material,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AttributeKind::Shape => "shape",
            AttributeKind::Size => "size",
            AttributeKind::Color => "color",
            AttributeKind::Material => "material",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A resolved attribute: its kind and canonical name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeId {
    pub kind: AttributeKind,
    pub name: String,
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub name: String,
    /// Object half-extent in world units.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorEntry {
    pub name: String,
    pub rgb: [f64; 3],
}

/// On-disk catalog layout.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogFile {
    pub shapes: Vec<String>,
    pub sizes: Vec<SizeEntry>,
    pub colors: Vec<ColorEntry>,
    pub materials: Vec<String>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct AttributeCatalog {
    file: CatalogFile,
    lookup: HashMap<String, AttributeId>,
}

impl AttributeCatalog {
    pub fn new(file: CatalogFile) -> Result<Self, SceneError> {
        let mut lookup = HashMap::new();
        let canon = file
            .shapes
            .iter()
            .map(|s| (AttributeKind::Shape, s.as_str()))
            .chain(file.sizes.iter().map(|s| (AttributeKind::Size, s.name.as_str())))
            .chain(file.colors.iter().map(|c| (AttributeKind::Color, c.name.as_str())))
            .chain(file.materials.iter().map(|m| (AttributeKind::Material, m.as_str())));
        for (kind, name) in canon {
            if name.is_empty() || name != name.to_lowercase() || name.contains('\'') {
                return Err(SceneError::InvalidCatalog(format!(
                    "canonical name `{name}` must be nonempty lowercase without quotes"
                )));
            }
            let id = AttributeId {
                kind,
                name: name.to_string(),
            };
            if lookup.insert(name.to_string(), id).is_some() {
                return Err(SceneError::InvalidCatalog(format!(
                    "duplicate canonical name `{name}`"
                )));
            }
        }
        let mut aliases = Vec::new();
        for (canonical, list) in &file.synonyms {
            let id = lookup.get(canonical).cloned().ok_or_else(|| {
                SceneError::InvalidCatalog(format!("synonyms for unknown name `{canonical}`"))
            })?;
            for alias in list {
                let key = alias.to_lowercase();
                if key.contains('\'') || key.is_empty() {
                    return Err(SceneError::InvalidCatalog(format!("bad alias `{alias}`")));
                }
                aliases.push((key, id.clone()));
            }
        }
        for (key, id) in aliases {
            match lookup.get(&key) {
                Some(existing) if *existing == id => {}
                Some(existing) => {
                    return Err(SceneError::InvalidCatalog(format!(
                        "alias `{key}` maps to both {existing} and {id}"
                    )))
                }
                None => {
                    lookup.insert(key, id);
                }
            }
        }
        Ok(Self { file, lookup })
    }

    pub fn from_json(json: &str) -> Result<Self, SceneError> {
        let file: CatalogFile =
            serde_json::from_str(json).map_err(|e| SceneError::InvalidCatalog(e.to_string()))?;
        Self::new(file)
    }

    /// Catalog with its colors replaced by a palette file (JSON list of `{name, rgb}`).
    pub fn with_palette_json(mut file: CatalogFile, palette: &str) -> Result<Self, SceneError> {
        let colors: Vec<ColorEntry> =
            serde_json::from_str(palette).map_err(|e| SceneError::InvalidCatalog(e.to_string()))?;
        let colors = colors
            .into_iter()
            .map(|c| ColorEntry {
                name: c.name.to_lowercase(),
                rgb: c.rgb,
            })
            .collect();
        file.colors = colors;
        Self::new(file)
    }

    /// CLEVR attributes: three shapes, two sizes, eight colors, two materials.
    pub fn clevr() -> &'static AttributeCatalog {
        static CAT: OnceLock<AttributeCatalog> = OnceLock::new();
        CAT.get_or_init(|| {
            AttributeCatalog::from_json(include_str!("../../data/clevr.json"))
                .expect("bundled clevr catalog")
        })
    }

    /// Five airplane proxies with CLEVR sizes, colors and materials.
    pub fn airplanes() -> &'static AttributeCatalog {
        static CAT: OnceLock<AttributeCatalog> = OnceLock::new();
        CAT.get_or_init(|| {
            AttributeCatalog::from_json(include_str!("../../data/airplanes.json"))
                .expect("bundled airplane catalog")
        })
    }

    /// 138 furniture proxies (chairs, sofas, tables) over the 133-color palette.
    pub fn furniture() -> &'static AttributeCatalog {
        static CAT: OnceLock<AttributeCatalog> = OnceLock::new();
        CAT.get_or_init(|| {
            let file: CatalogFile =
                serde_json::from_str(include_str!("../../data/furniture.json"))
                    .expect("bundled furniture catalog");
            AttributeCatalog::with_palette_json(file, palette_json()).expect("bundled palette")
        })
    }

    pub fn file(&self) -> &CatalogFile {
        &self.file
    }

    pub fn shapes(&self) -> &[String] {
        &self.file.shapes
    }

    pub fn sizes(&self) -> &[SizeEntry] {
        &self.file.sizes
    }

    pub fn colors(&self) -> &[ColorEntry] {
        &self.file.colors
    }

    pub fn materials(&self) -> &[String] {
        &self.file.materials
    }

    pub fn names(&self, kind: AttributeKind) -> Vec<&str> {
        match kind {
            AttributeKind::Shape => self.file.shapes.iter().map(String::as_str).collect(),
            AttributeKind::Size => self.file.sizes.iter().map(|s| s.name.as_str()).collect(),
            AttributeKind::Color => self.file.colors.iter().map(|c| c.name.as_str()).collect(),
            AttributeKind::Material => self.file.materials.iter().map(String::as_str).collect(),
        }
    }

    pub fn size_scale(&self, name: &str) -> Option<f64> {
        self.file
            .sizes
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.scale)
    }

    /// Aliases of a canonical name, excluding the name itself.
    pub fn aliases(&self, canonical: &str) -> &[String] {
        self.file
            .synonyms
            .get(canonical)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Every word a program may use for an attribute: canonical names and aliases.
    pub fn all_terms(&self) -> Vec<&str> {
        let mut terms: Vec<&str> = self.lookup.keys().map(String::as_str).collect();
        terms.sort_unstable();
        terms
    }

    pub fn resolve(&self, term: &str) -> Result<AttributeId, SceneError> {
        if term.is_empty() {
            return Err(SceneError::UnknownAttribute(String::new()));
        }
        self.lookup
            .get(&term.to_lowercase())
            .cloned()
            .ok_or_else(|| SceneError::UnknownAttribute(term.to_string()))
    }

    /// Resolves a term that must belong to `kind`.
    pub fn resolve_kind(&self, kind: AttributeKind, term: &str) -> Result<String, SceneError> {
        let id = self.resolve(term)?;
        if id.kind != kind {
            return Err(SceneError::UnknownAttribute(format!("{kind}={term}")));
        }
        Ok(id.name)
    }

    pub fn contains(&self, kind: AttributeKind, canonical: &str) -> bool {
        matches!(self.lookup.get(canonical), Some(id) if id.kind == kind && id.name == canonical)
    }
}

/// The bundled 133-entry color palette as JSON.
pub fn palette_json() -> &'static str {
    include_str!("../../data/palette133.json")
}

/// Resolves `term` to its canonical attribute id, case-insensitively.
pub fn resolve_attribute(term: &str, catalog: &AttributeCatalog) -> Result<AttributeId, SceneError> {
    catalog.resolve(term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clevr_cardinalities() {
        let c = AttributeCatalog::clevr();
        assert_eq!(c.shapes(), ["sphere", "cube", "cylinder"]);
        assert_eq!(c.names(AttributeKind::Size), ["large", "small"]);
        assert_eq!(c.materials(), ["rubber", "metal"]);
        assert_eq!(c.colors().len(), 8);
        assert_eq!(c.size_scale("large"), Some(0.7));
        assert_eq!(c.size_scale("small"), Some(0.35));
    }

    #[test]
    fn extended_palette_and_furniture() {
        let f = AttributeCatalog::furniture();
        assert_eq!(f.colors().len(), 133);
        let count = |p: &str| f.shapes().iter().filter(|s| s.starts_with(p)).count();
        assert_eq!(count("chairs_"), 56);
        assert_eq!(count("sofas_"), 35);
        assert_eq!(count("tables_"), 47);
        assert!(f.contains(AttributeKind::Shape, "chairs_0055"));
        assert!(f
            .colors()
            .iter()
            .all(|c| c.rgb.iter().all(|v| (0.0..=1.0).contains(v))));
        assert_eq!(AttributeCatalog::airplanes().shapes().len(), 5);
    }

    #[test]
    fn resolves_synonyms() {
        let c = AttributeCatalog::clevr();
        let metal = AttributeId {
            kind: AttributeKind::Material,
            name: "metal".into(),
        };
        assert_eq!(resolve_attribute("metal", c).unwrap(), metal);
        assert_eq!(resolve_attribute("shiny", c).unwrap(), metal);
        assert_eq!(resolve_attribute("Shiny", c).unwrap(), metal);
        assert_eq!(
            resolve_attribute("tiny", c).unwrap(),
            AttributeId {
                kind: AttributeKind::Size,
                name: "small".into()
            }
        );
        assert!(matches!(
            resolve_attribute("glossy", c),
            Err(SceneError::UnknownAttribute(_))
        ));
        assert!(resolve_attribute("", c).is_err());
        assert!(c.resolve_kind(AttributeKind::Shape, "metal").is_err());
    }

    #[test]
    fn every_alias_resolves_to_its_canonical() {
        for cat in [
            AttributeCatalog::clevr(),
            AttributeCatalog::airplanes(),
            AttributeCatalog::furniture(),
        ] {
            for kind in AttributeKind::ALL {
                for name in cat.names(kind) {
                    for alias in cat.aliases(name) {
                        let id = cat.resolve(alias).unwrap();
                        assert_eq!((id.kind, id.name.as_str()), (kind, name));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_catalogs() {
        let dup = r#"{"shapes":["cube"],"sizes":[],"colors":[{"name":"cube","rgb":[0,0,0]}],"materials":[]}"#;
        assert!(AttributeCatalog::from_json(dup).is_err());
        let upper = r#"{"shapes":["Cube"],"sizes":[],"colors":[],"materials":[]}"#;
        assert!(AttributeCatalog::from_json(upper).is_err());
        let clash = r#"{"shapes":["cube","sphere"],"sizes":[],"colors":[],"materials":[],
            "synonyms":{"cube":["thing"],"sphere":["thing"]}}"#;
        assert!(AttributeCatalog::from_json(clash).is_err());
    }
}
