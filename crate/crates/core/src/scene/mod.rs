//! Scene data model: attribute catalogs, object records, cameras and
//! analytic surface primitives.

mod catalog;
mod primitive;

pub use catalog::{
    palette_json, resolve_attribute, AttributeCatalog, AttributeId, AttributeKind, CatalogFile,
    ColorEntry, SizeEntry,
};
pub use primitive::{sample_surface_points, Primitive};

use serde::{Deserialize, Serialize};

use crate::rotation::{Rotation, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("no surface primitive registered for shape `{0}`")]
    UnknownShape(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Where an object sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// Full 3D position, serialized as `loc=(x, y, z)`.
    Point(Vec3),
    /// A point in the unit square, serialized as `x=..., y=...`.
    Planar([f64; 2]),
    /// Task-fixed position at the world origin; not serialized.
    Fixed,
}

impl Location {
    pub fn position(&self) -> Vec3 {
        match *self {
            Location::Point(p) => p,
            Location::Planar([x, y]) => [x, y, 0.0],
            Location::Fixed => [0.0; 3],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Location {
        match *self {
            Location::Point(p) => Location::Point(p.map(f)),
            Location::Planar(p) => Location::Planar(p.map(f)),
            Location::Fixed => Location::Fixed,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    /// `None` marks a fixed-scale object (unit scale).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    pub location: Location,
    /// `None` means unspecified, which is the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Rotation>,
}

impl ObjectRecord {
    pub fn dot(x: f64, y: f64) -> Self {
        Self {
            shape: None,
            size: None,
            color: None,
            material: None,
            location: Location::Planar([x, y]),
            rotation: None,
        }
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation.unwrap_or(Rotation::IDENTITY)
    }

    pub fn position(&self) -> Vec3 {
        self.location.position()
    }

    pub fn attribute(&self, kind: AttributeKind) -> Option<&str> {
        match kind {
            AttributeKind::Shape => self.shape.as_deref(),
            AttributeKind::Size => self.size.as_deref(),
            AttributeKind::Color => self.color.as_deref(),
            AttributeKind::Material => self.material.as_deref(),
        }
    }

    pub fn attribute_mut(&mut self, kind: AttributeKind) -> &mut Option<String> {
        match kind {
            AttributeKind::Shape => &mut self.shape,
            AttributeKind::Size => &mut self.size,
            AttributeKind::Color => &mut self.color,
            AttributeKind::Material => &mut self.material,
        }
    }

    /// Scale factor from the size attribute; 1 for fixed-scale objects.
    pub fn scale(&self, catalog: &AttributeCatalog) -> f64 {
        self.size
            .as_deref()
            .and_then(|s| catalog.size_scale(s))
            .unwrap_or(1.0)
    }

    pub fn validate(&self, catalog: &AttributeCatalog) -> Result<(), SceneError> {
        for kind in AttributeKind::ALL {
            if let Some(name) = self.attribute(kind) {
                if !catalog.contains(kind, name) {
                    return Err(SceneError::UnknownAttribute(format!("{kind}={name}")));
                }
            }
        }
        if !self.location.is_finite() {
            return Err(SceneError::InvalidScene("non-finite location".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub position: Vec3,
    pub look_at: Vec3,
    pub pitch: f64,
    pub radius: f64,
}

impl CameraRecord {
    /// Camera on a vertical arc behind the look-at point (along -y), raised by `pitch`.
    pub fn orbit(pitch: f64, radius: f64, look_at: Vec3) -> Self {
        let (s, c) = pitch.sin_cos();
        Self {
            position: [
                look_at[0],
                look_at[1] - radius * c,
                look_at[2] + radius * s,
            ],
            look_at,
            pitch,
            radius,
        }
    }

    /// The fixed CLEVR-style camera.
    pub fn clevr() -> Self {
        let position = [7.358, -6.925, 4.958];
        let radius = crate::rotation::norm(position);
        Self {
            position,
            look_at: [0.0; 3],
            pitch: (position[2] / radius).asin(),
            radius,
        }
    }

    pub fn distance_to(&self, p: Vec3) -> f64 {
        let d = [
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        ];
        crate::rotation::norm(d)
    }

    /// True when `position` lies at `radius` from `look_at` with elevation `pitch`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let d = [
            self.position[0] - self.look_at[0],
            self.position[1] - self.look_at[1],
            self.position[2] - self.look_at[2],
        ];
        let r = crate::rotation::norm(d);
        self.radius > 0.0 && (r - self.radius).abs() <= tol && ((d[2] / r).asin() - self.pitch).abs() <= tol
    }
}

impl Default for CameraRecord {
    fn default() -> Self {
        Self::clevr()
    }
}

/// Bound on the matrix-entry change caused by re-emitting a parsed rotation
/// at three decimals (6D columns are re-normalized after rounding).
pub const ROTATION_TEXT_TOL: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneProgram {
    pub objects: Vec<ObjectRecord>,
    pub camera: CameraRecord,
}

impl SceneProgram {
    pub fn new(objects: Vec<ObjectRecord>, camera: CameraRecord) -> Self {
        Self { objects, camera }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), CameraRecord::default())
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn validate(
        &self,
        catalog: &AttributeCatalog,
        count_range: Option<std::ops::RangeInclusive<usize>>,
    ) -> Result<(), SceneError> {
        if let Some(range) = count_range {
            if !range.contains(&self.objects.len()) {
                return Err(SceneError::InvalidScene(format!(
                    "{} objects outside {range:?}",
                    self.objects.len()
                )));
            }
        }
        if !(self.camera.radius > 0.0) {
            return Err(SceneError::InvalidScene("camera radius must be positive".into()));
        }
        self.objects.iter().try_for_each(|o| o.validate(catalog))
    }

    /// Equality with rotations compared entrywise within `rotation_tol`;
    /// everything else must match exactly.
    pub fn approx_eq(&self, other: &SceneProgram, rotation_tol: f64) -> bool {
        self.camera == other.camera
            && self.objects.len() == other.objects.len()
            && self.objects.iter().zip(&other.objects).all(|(a, b)| {
                a.shape == b.shape
                    && a.size == b.size
                    && a.color == b.color
                    && a.material == b.material
                    && a.location == b.location
                    && a.rotation.is_some() == b.rotation.is_some()
                    && a.rotation().max_abs_diff(&b.rotation()) <= rotation_tol
            })
    }

    /// Object indices sorted by ascending camera distance, ties by index.
    pub fn front_to_back_order(&self) -> Vec<usize> {
        let dist: Vec<f64> = self
            .objects
            .iter()
            .map(|o| self.camera.distance_to(o.position()))
            .collect();
        let mut idx: Vec<usize> = (0..self.objects.len()).collect();
        idx.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_at(p: Vec3) -> ObjectRecord {
        ObjectRecord {
            shape: Some("cube".into()),
            size: Some("large".into()),
            color: Some("red".into()),
            material: Some("metal".into()),
            location: Location::Point(p),
            rotation: None,
        }
    }

    #[test]
    fn validation() {
        let cat = AttributeCatalog::clevr();
        let mut scene = SceneProgram::new(vec![cube_at([0.0, 0.0, 0.7])], CameraRecord::clevr());
        scene.validate(cat, Some(1..=3)).unwrap();
        assert!(scene.validate(cat, Some(3..=10)).is_err());
        scene.objects[0].color = Some("mahogany".into());
        assert!(matches!(
            scene.validate(cat, None),
            Err(SceneError::UnknownAttribute(_))
        ));
        scene.objects[0] = cube_at([f64::NAN, 0.0, 0.0]);
        assert!(scene.validate(cat, None).is_err());
    }

    #[test]
    fn orbit_camera_is_consistent() {
        let cam = CameraRecord::orbit(0.5, 12.0, [0.0; 3]);
        assert!(cam.is_consistent(1e-12));
        assert!((cam.distance_to([0.0; 3]) - 12.0).abs() < 1e-12);
        assert!(CameraRecord::clevr().is_consistent(1e-12));
    }

    #[test]
    fn front_to_back_ties_by_index() {
        let cam = CameraRecord::orbit(0.0, 10.0, [0.0; 3]);
        let scene = SceneProgram::new(
            vec![
                cube_at([0.0, 2.0, 0.0]),
                cube_at([1.0, -5.0, 0.0]),
                cube_at([-1.0, -5.0, 0.0]),
            ],
            cam,
        );
        assert_eq!(scene.front_to_back_order(), vec![1, 2, 0]);
    }
}
