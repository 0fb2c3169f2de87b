//! Scene-level metrics: optimal matching, attribute accuracy, counting,
//! pose error, chamfer distance and the value-memorization ratio.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

use crate::datagen::CoGenTCondition;
use crate::exec::{self, Parallelism};
use crate::rotation::{geodesic_deg, Vec3};
use crate::scene::{sample_surface_points, AttributeCatalog, AttributeKind, SceneError, SceneProgram};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{preds} predictions for {gts} ground-truth scenes")]
    LengthMismatch { preds: usize, gts: usize },
    #[error("scene has no objects")]
    EmptyScene,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// (pred index, gt index), sorted by pred index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-cost assignment of `min(rows, cols)` pairs on a dense row-major
/// cost matrix (Hungarian method with potentials, O(n²m)).
pub fn assign(cost: &[f64], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    // the solver wants n <= m
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transposed { cost[j * cols + i] } else { cost[i * cols + j] };
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| if transposed { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .collect();
    pairs.sort_unstable();
    pairs
}

fn distance(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn match_objects(pred: &SceneProgram, gt: &SceneProgram) -> Assignment {
    let (m, n) = (pred.len(), gt.len());
    let cost: Vec<f64> = pred
        .objects
        .iter()
        .flat_map(|p| gt.objects.iter().map(move |g| distance(p.position(), g.position())))
        .collect();
    let pairs = assign(&cost, m, n);
    let total_cost = pairs.iter().map(|&(i, j)| cost[i * n + j]).sum();
    let unmatched_pred = (0..m).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
    let unmatched_gt = (0..n).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect();
    Assignment {
        pairs,
        unmatched_pred,
        unmatched_gt,
        total_cost,
    }
}

/// Attribute compared for accuracy; `Category` is the shape-name prefix
/// before `_` (the whole name when there is none).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricAttr {
    Size,
    Color,
    Material,
    Shape,
    Category,
}

impl MetricAttr {
    pub const ALL: [MetricAttr; 5] = [
        MetricAttr::Size,
        MetricAttr::Color,
        MetricAttr::Material,
        MetricAttr::Shape,
        MetricAttr::Category,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricAttr::Size => "size",
            MetricAttr::Color => "color",
            MetricAttr::Material => "material",
            MetricAttr::Shape => "shape",
            MetricAttr::Category => "category",
        }
    }

    fn kind(self) -> AttributeKind {
        match self {
            MetricAttr::Size => AttributeKind::Size,
            MetricAttr::Color => AttributeKind::Color,
            MetricAttr::Material => AttributeKind::Material,
            MetricAttr::Shape | MetricAttr::Category => AttributeKind::Shape,
        }
    }
}

fn canonical(raw: &str, kind: AttributeKind, catalog: &AttributeCatalog) -> String {
    catalog.resolve_kind(kind, raw).unwrap_or_else(|_| raw.to_string())
}

fn attr_value(obj: &crate::scene::ObjectRecord, attr: MetricAttr, catalog: &AttributeCatalog) -> Option<String> {
    let v = canonical(obj.attribute(attr.kind())?, attr.kind(), catalog);
    Some(match attr {
        MetricAttr::Category => v.split_once('_').map_or(v.clone(), |(p, _)| p.to_string()),
        _ => v,
    })
}

/// (correct, compared) per attribute over matched pairs whose gt object
/// carries the attribute.
fn attribute_counts(
    assign: &Assignment,
    pred: &SceneProgram,
    gt: &SceneProgram,
    attrs: &[MetricAttr],
    catalog: &AttributeCatalog,
) -> BTreeMap<MetricAttr, (usize, usize)> {
    let mut out = BTreeMap::new();
    for &a in attrs {
        let mut hit = (0, 0);
        for &(i, j) in &assign.pairs {
            if let Some(g) = attr_value(&gt.objects[j], a, catalog) {
                hit.1 += 1;
                if attr_value(&pred.objects[i], a, catalog).as_deref() == Some(g.as_str()) {
                    hit.0 += 1;
                }
            }
        }
        out.insert(a, hit);
    }
    out
}

/// Percent of matched pairs with equal canonical values; attributes with
/// nothing to compare are omitted.
pub fn attribute_metrics(
    assign: &Assignment,
    pred: &SceneProgram,
    gt: &SceneProgram,
    attrs: &[MetricAttr],
    catalog: &AttributeCatalog,
) -> BTreeMap<MetricAttr, f64> {
    attribute_counts(assign, pred, gt, attrs, catalog)
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(a, (k, n))| (a, 100.0 * k as f64 / n as f64))
        .collect()
}

pub fn count_error(preds: &[SceneProgram], gts: &[SceneProgram]) -> Result<f64, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            gts: gts.len(),
        });
    }
    if gts.is_empty() {
        return Err(EvalError::EmptyInput("no scenes".into()));
    }
    let sum: f64 = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| (p.len() as f64 - g.len() as f64).abs())
        .sum();
    Ok(sum / gts.len() as f64)
}

/// Sums of matched location distances and rotation angles, with the pair count.
fn pose_sums(assign: &Assignment, pred: &SceneProgram, gt: &SceneProgram) -> (f64, f64, usize) {
    let (mut l2, mut geo) = (0.0, 0.0);
    for &(i, j) in &assign.pairs {
        let (p, g) = (&pred.objects[i], &gt.objects[j]);
        l2 += distance(p.position(), g.position());
        geo += geodesic_deg(&p.rotation(), &g.rotation());
    }
    (l2, geo, assign.pairs.len())
}

/// Mean matched location distance and mean geodesic angle in degrees
/// (objects without a rotation count as identity). `None` without pairs.
pub fn pose_metrics(assign: &Assignment, pred: &SceneProgram, gt: &SceneProgram) -> Option<(f64, f64)> {
    let (l2, geo, n) = pose_sums(assign, pred, gt);
    (n > 0).then(|| (l2 / n as f64, geo / n as f64))
}

pub const DEFAULT_POINTS_PER_OBJECT: usize = 1024;

fn scene_points(
    scene: &SceneProgram,
    catalog: &AttributeCatalog,
    points_per_object: usize,
    seed: u64,
) -> Result<Vec<Vec3>, EvalError> {
    let mut pts = Vec::with_capacity(scene.len() * points_per_object);
    for (i, obj) in scene.objects.iter().enumerate() {
        let s = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        pts.extend(sample_surface_points(obj, catalog, points_per_object, s)?);
    }
    Ok(pts)
}

fn mean_nearest_sq(from: &[Vec3], to: &[Vec3]) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|a| {
            to.iter()
                .map(|b| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    sum / from.len() as f64
}

/// Sum of the two directional mean squared nearest-neighbour distances
/// between surface samples of both scenes (exact brute force).
pub fn chamfer_scene(
    pred: &SceneProgram,
    gt: &SceneProgram,
    catalog: &AttributeCatalog,
    points_per_object: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if pred.is_empty() || gt.is_empty() || points_per_object == 0 {
        return Err(EvalError::EmptyScene);
    }
    let p = scene_points(pred, catalog, points_per_object, seed)?;
    let g = scene_points(gt, catalog, points_per_object, seed)?;
    Ok(chamfer_points(&p, &g))
}

pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> f64 {
    mean_nearest_sq(a, b) + mean_nearest_sq(b, a)
}

/// How much more often predictions land on values seen in training than on
/// unseen values of the same domain.
pub fn memorization_ratio(
    predicted: &[String],
    train_values: &HashSet<String>,
    value_domain: usize,
) -> Result<f64, EvalError> {
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput("no predictions".into()));
    }
    if train_values.is_empty() || value_domain <= train_values.len() {
        return Err(EvalError::EmptyInput(format!(
            "need 0 < |train values| ({}) < domain ({value_domain})",
            train_values.len()
        )));
    }
    let inside = predicted.iter().filter(|v| train_values.contains(*v)).count();
    let outside = predicted.len() - inside;
    if outside == 0 {
        return Ok(f64::INFINITY);
    }
    let rate_in = inside as f64 / train_values.len() as f64;
    let rate_out = outside as f64 / (value_domain - train_values.len()) as f64;
    Ok(rate_in / rate_out)
}

/// Number of 3-decimal values in `[lo, hi]`.
pub fn three_decimal_domain(lo: f64, hi: f64) -> usize {
    ((hi * 1000.0).round() - (lo * 1000.0).round()) as usize + 1
}

/// Objects whose (shape, color) breaks the condition's pairing rule.
pub fn cogent_violations(scene: &SceneProgram, cond: CoGenTCondition, catalog: &AttributeCatalog) -> usize {
    scene
        .objects
        .iter()
        .filter(|o| {
            let (Some(shape), Some(color)) = (o.shape.as_deref(), o.color.as_deref()) else {
                return false;
            };
            let shape = canonical(shape, AttributeKind::Shape, catalog);
            let color = canonical(color, AttributeKind::Color, catalog);
            match cond.allowed_colors(&shape) {
                Some(allowed) => !allowed.contains(&color.as_str()),
                None => false,
            }
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub attrs: Vec<MetricAttr>,
    /// Compare rotations (skip for rotationless tasks).
    pub rotations: bool,
    pub chamfer: bool,
    pub points_per_object: usize,
    pub seed: u64,
    /// Chamfer value used when one side is empty. Non-finite penalties are
    /// left out of the chamfer mean and counted as malformed instead.
    pub empty_penalty: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            attrs: MetricAttr::ALL.to_vec(),
            rotations: true,
            chamfer: true,
            points_per_object: DEFAULT_POINTS_PER_OBJECT,
            seed: 0,
            empty_penalty: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenes: usize,
    pub matched_pairs: usize,
    pub l2: Option<f64>,
    pub geodesic_deg: Option<f64>,
    pub count_error: f64,
    pub accuracies: BTreeMap<MetricAttr, f64>,
    pub chamfer: Option<f64>,
    pub malformed_rate: f64,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "l2",
    "geodesic_deg",
    "count",
    "size_acc",
    "color_acc",
    "material_acc",
    "shape_acc",
    "category_acc",
    "chamfer",
    "malformed_rate",
];

impl MetricReport {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    /// Not-applicable metrics are empty cells.
    pub fn csv_row(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let acc = |a| cell(self.accuracies.get(&a).copied());
        [
            cell(self.l2),
            cell(self.geodesic_deg),
            self.count_error.to_string(),
            acc(MetricAttr::Size),
            acc(MetricAttr::Color),
            acc(MetricAttr::Material),
            acc(MetricAttr::Shape),
            acc(MetricAttr::Category),
            cell(self.chamfer),
            self.malformed_rate.to_string(),
        ]
        .join(",")
    }
}

struct SceneStats {
    pairs: usize,
    l2: f64,
    geo: f64,
    attrs: BTreeMap<MetricAttr, (usize, usize)>,
    count: f64,
    chamfer: Option<f64>,
    malformed: bool,
}

/// Evaluates predictions (`None` = unparseable generation, scored as an
/// empty scene) against ground truth. Means are pooled over all matched
/// pairs; per-scene work runs in parallel and is reduced in index order.
pub fn evaluate(
    preds: &[Option<SceneProgram>],
    gts: &[SceneProgram],
    catalog: &AttributeCatalog,
    opts: &EvalOptions,
    par: Parallelism,
) -> Result<MetricReport, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            gts: gts.len(),
        });
    }
    if gts.is_empty() {
        return Err(EvalError::EmptyInput("no scenes".into()));
    }
    let empty = SceneProgram::empty();
    let per_scene = exec::map_indexed(gts.len(), par, |k| -> Result<SceneStats, EvalError> {
        let gt = &gts[k];
        let pred = preds[k].as_ref().unwrap_or(&empty);
        let a = match_objects(pred, gt);
        let (l2, geo, pairs) = pose_sums(&a, pred, gt);
        let mut malformed = preds[k].is_none();
        let chamfer = if opts.chamfer {
            match chamfer_scene(pred, gt, catalog, opts.points_per_object, opts.seed) {
                Ok(v) => Some(v),
                Err(EvalError::EmptyScene) if opts.empty_penalty.is_finite() => Some(opts.empty_penalty),
                Err(EvalError::EmptyScene) => {
                    malformed = true;
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(SceneStats {
            pairs,
            l2,
            geo,
            attrs: attribute_counts(&a, pred, gt, &opts.attrs, catalog),
            count: (pred.len() as f64 - gt.len() as f64).abs(),
            chamfer,
            malformed,
        })
    });
    let (mut pairs, mut l2, mut geo, mut count, mut malformed) = (0, 0.0, 0.0, 0.0, 0usize);
    let (mut ch_sum, mut ch_n) = (0.0, 0usize);
    let mut attrs: BTreeMap<MetricAttr, (usize, usize)> = BTreeMap::new();
    for s in per_scene {
        let s = s?;
        pairs += s.pairs;
        l2 += s.l2;
        geo += s.geo;
        count += s.count;
        malformed += usize::from(s.malformed);
        if let Some(c) = s.chamfer {
            ch_sum += c;
            ch_n += 1;
        }
        for (a, (k, n)) in s.attrs {
            let e = attrs.entry(a).or_default();
            e.0 += k;
            e.1 += n;
        }
    }
    let n = gts.len() as f64;
    let mean = |s: f64| (pairs > 0).then(|| s / pairs as f64);
    Ok(MetricReport {
        scenes: gts.len(),
        matched_pairs: pairs,
        l2: mean(l2),
        geodesic_deg: if opts.rotations { mean(geo) } else { None },
        count_error: count / n,
        accuracies: attrs
            .into_iter()
            .filter(|(_, (_, t))| *t > 0)
            .map(|(a, (k, t))| (a, 100.0 * k as f64 / t as f64))
            .collect(),
        chamfer: (ch_n > 0).then(|| ch_sum / ch_n as f64),
        malformed_rate: malformed as f64 / n,
    })
}

/// Root mean squared 2D position error; a missing prediction counts as
/// `fallback`.
pub fn position_rmse(preds: &[Option<[f64; 2]>], gts: &[[f64; 2]], fallback: [f64; 2]) -> Result<f64, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            gts: gts.len(),
        });
    }
    if gts.is_empty() {
        return Err(EvalError::EmptyInput("no positions".into()));
    }
    let sq: f64 = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| {
            let p = p.unwrap_or(fallback);
            (p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)
        })
        .sum();
    Ok((sq / gts.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::Rotation;
    use crate::scene::{CameraRecord, Location, ObjectRecord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obj(shape: &str, color: &str, p: Vec3) -> ObjectRecord {
        ObjectRecord {
            shape: Some(shape.into()),
            size: Some("small".into()),
            color: Some(color.into()),
            material: Some("rubber".into()),
            location: Location::Point(p),
            rotation: None,
        }
    }

    fn scene(objs: Vec<ObjectRecord>) -> SceneProgram {
        SceneProgram::new(objs, CameraRecord::clevr())
    }

    fn brute(cost: &[f64], rows: usize, cols: usize) -> f64 {
        fn go(cost: &[f64], cols: usize, i: usize, rows: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if i == rows {
                *best = best.min(acc);
                return;
            }
            for j in 0..cols {
                if !used[j] {
                    used[j] = true;
                    go(cost, cols, i + 1, rows, used, acc + cost[i * cols + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        if rows <= cols {
            go(cost, cols, 0, rows, &mut vec![false; cols], 0.0, &mut best);
        } else {
            let t: Vec<f64> = (0..cols * rows).map(|k| cost[(k % rows) * cols + k / rows]).collect();
            go(&t, rows, 0, cols, &mut vec![false; rows], 0.0, &mut best);
        }
        best
    }

    #[test]
    fn assignment_small_cases() {
        assert_eq!(assign(&[0.0, 1.0, 1.0, 0.0], 2, 2), vec![(0, 0), (1, 1)]);
        assert_eq!(assign(&[5.0], 1, 1), vec![(0, 0)]);
        assert!(assign(&[], 0, 3).is_empty());
        assert_eq!(assign(&[3.0, 1.0, 2.0], 1, 3), vec![(0, 1)]);
        assert_eq!(assign(&[3.0, 1.0, 2.0], 3, 1), vec![(1, 0)]);
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let (r, c) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let cost: Vec<f64> = (0..r * c).map(|_| rng.random_range(0.0..10.0)).collect();
            let pairs = assign(&cost, r, c);
            assert_eq!(pairs.len(), r.min(c));
            let total: f64 = pairs.iter().map(|&(i, j)| cost[i * c + j]).sum();
            assert!((total - brute(&cost, r, c)).abs() < 1e-9);
        }
    }

    #[test]
    fn unmatched_objects_are_reported() {
        let p = scene(vec![obj("cube", "red", [0.0; 3]), obj("cube", "red", [5.0, 0.0, 0.0])]);
        let g = scene(vec![obj("cube", "red", [4.9, 0.0, 0.0])]);
        let a = match_objects(&p, &g);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.unmatched_pred, vec![0]);
        assert!(a.unmatched_gt.is_empty());
        assert!((a.total_cost - 0.1).abs() < 1e-12);
    }

    #[test]
    fn attribute_accuracy_counts_synonyms() {
        let cat = AttributeCatalog::clevr();
        let g = scene(vec![obj("cube", "red", [0.0; 3]), obj("sphere", "blue", [3.0, 0.0, 0.0])]);
        let mut p = g.clone();
        p.objects[1].color = Some("red".into());
        p.objects[0].size = cat.aliases("small").first().cloned().or(Some("small".into()));
        let acc = attribute_metrics(&match_objects(&p, &g), &p, &g, &MetricAttr::ALL, cat);
        assert_eq!(acc[&MetricAttr::Color], 50.0);
        assert_eq!(acc[&MetricAttr::Size], 100.0);
        assert_eq!(acc[&MetricAttr::Shape], 100.0);
    }

    #[test]
    fn category_uses_shape_prefix() {
        let cat = AttributeCatalog::furniture();
        let mut a = obj("chairs_0001", "red", [0.0; 3]);
        a.size = None;
        a.color = None;
        a.material = None;
        let mut b = a.clone();
        b.shape = Some("chairs_0002".into());
        let (p, g) = (scene(vec![b]), scene(vec![a]));
        let acc = attribute_metrics(&match_objects(&p, &g), &p, &g, &MetricAttr::ALL, cat);
        assert_eq!(acc[&MetricAttr::Shape], 0.0);
        assert_eq!(acc[&MetricAttr::Category], 100.0);
        assert!(!acc.contains_key(&MetricAttr::Color));
    }

    #[test]
    fn count_error_cases() {
        let four = scene(vec![obj("cube", "red", [0.0; 3]); 4]);
        let five = scene(vec![obj("cube", "red", [0.0; 3]); 5]);
        assert_eq!(count_error(&[four.clone()], &[five.clone()]).unwrap(), 1.0);
        assert_eq!(count_error(&[five.clone()], &[five]).unwrap(), 0.0);
        assert!(matches!(count_error(&[four], &[]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn pose_shift_and_rotation() {
        let g = scene(vec![obj("cube", "red", [0.0; 3]), obj("cube", "red", [3.0, 0.0, 0.0])]);
        let mut p = g.clone();
        for o in &mut p.objects {
            o.location = o.location.map(|v| v);
            if let Location::Point(q) = &mut o.location {
                q[0] += 0.3;
            }
            o.rotation = Some(Rotation::rz(0.5));
        }
        let (l2, geo) = pose_metrics(&match_objects(&p, &g), &p, &g).unwrap();
        assert!((l2 - 0.3).abs() < 1e-12);
        assert!((geo - 0.5f64.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn chamfer_conventions() {
        assert_eq!(chamfer_points(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]), 2.0);
        let cat = AttributeCatalog::clevr();
        let s = scene(vec![obj("cube", "red", [0.0; 3]), obj("sphere", "red", [2.0, 1.0, 0.0])]);
        assert_eq!(chamfer_scene(&s, &s, cat, 128, 9).unwrap(), 0.0);
        let t = scene(vec![obj("cylinder", "red", [0.5, 0.0, 0.0])]);
        assert_eq!(
            chamfer_scene(&s, &t, cat, 128, 9).unwrap(),
            chamfer_scene(&t, &s, cat, 128, 9).unwrap()
        );
        assert!(matches!(
            chamfer_scene(&SceneProgram::empty(), &s, cat, 128, 9),
            Err(EvalError::EmptyScene)
        ));
    }

    #[test]
    fn memorization_cases() {
        let train: HashSet<String> = ["0.100", "0.200"].iter().map(|s| s.to_string()).collect();
        let all_in: Vec<String> = vec!["0.100".into(); 5];
        assert_eq!(memorization_ratio(&all_in, &train, 10).unwrap(), f64::INFINITY);
        // one hit per value across a domain of ten
        let uniform: Vec<String> = (0..10).map(|k| format!("{:.3}", k as f64 / 10.0)).collect();
        assert!((memorization_ratio(&uniform, &train, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!(memorization_ratio(&[], &train, 10).is_err());
        assert!(memorization_ratio(&all_in, &train, 2).is_err());
        assert_eq!(three_decimal_domain(0.0, 1.0), 1001);
    }

    #[test]
    fn malformed_predictions_score_as_empty() {
        let cat = AttributeCatalog::clevr();
        let g = vec![scene(vec![obj("cube", "red", [0.0; 3])]); 2];
        let preds = vec![Some(g[0].clone()), None];
        let r = evaluate(&preds, &g, cat, &EvalOptions::default(), Parallelism::Sequential).unwrap();
        assert_eq!(r.malformed_rate, 0.5);
        assert_eq!(r.count_error, 0.5);
        assert_eq!(r.l2, Some(0.0));
        assert_eq!(r.chamfer, Some(0.0));
        assert_eq!(MetricReport::csv_header().split(',').count(), r.csv_row().split(',').count());
    }

    #[test]
    fn rmse_with_fallback() {
        let r = position_rmse(&[Some([0.0, 0.0]), None], &[[0.0, 0.0], [0.5, 1.0]], [0.5, 0.5]).unwrap();
        assert!((r - (0.25f64 / 2.0).sqrt()).abs() < 1e-15);
    }
}
