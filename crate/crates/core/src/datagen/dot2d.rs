use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{finish_record, quantized_uniform, record_rng, DatagenError, DatasetRecord, Split, Task};
use crate::dsl::EmitOptions;
use crate::exec::{self, Parallelism};
use crate::scene::{CameraRecord, ObjectRecord, SceneProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckerboardLayout {
    pub cells_per_side: u32,
    pub id_parity: Parity,
}

impl Default for CheckerboardLayout {
    fn default() -> Self {
        Self {
            cells_per_side: 8,
            id_parity: Parity::Even,
        }
    }
}

impl CheckerboardLayout {
    /// Cell indices of `p`; intervals are half-open except the last, which includes 1.
    pub fn cell(&self, p: [f64; 2]) -> (u32, u32) {
        let n = self.cells_per_side;
        let idx = |v: f64| ((v * f64::from(n)).floor().max(0.0) as u32).min(n - 1);
        (idx(p[0]), idx(p[1]))
    }
}

pub fn in_checkerboard(p: [f64; 2], layout: &CheckerboardLayout) -> bool {
    let (i, j) = layout.cell(p);
    let even = (i + j) % 2 == 0;
    even == (layout.id_parity == Parity::Even)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DotDistribution {
    Checkerboard,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dot2dConfig {
    pub layout: CheckerboardLayout,
    pub image_size: u32,
    pub radius: f64,
}

impl Default for Dot2dConfig {
    fn default() -> Self {
        Self {
            layout: CheckerboardLayout::default(),
            image_size: 64,
            radius: 4.0,
        }
    }
}

impl Dot2dConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.layout.cells_per_side < 2 {
            return Err(DatagenError::InvalidConfig("cells_per_side must be at least 2".into()));
        }
        if self.image_size < 8 || !(self.radius >= 1.0) {
            return Err(DatagenError::InvalidConfig(
                "image_size must be at least 8 and radius at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub size: u32,
    pub rgb: Vec<u8>,
}

impl Raster {
    pub fn pixel(&self, col: u32, row: u32) -> [u8; 3] {
        let i = 3 * (row * self.size + col) as usize;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Per-pixel redness `1 - g/255`, row-major.
    pub fn deficit(&self) -> Vec<f32> {
        self.rgb
            .chunks_exact(3)
            .map(|px| 1.0 - f32::from(px[1]) / 255.0)
            .collect()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, DatagenError> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.size, self.size);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| DatagenError::Png(e.to_string()))?;
        w.write_image_data(&self.rgb)
            .map_err(|e| DatagenError::Png(e.to_string()))?;
        w.finish().map_err(|e| DatagenError::Png(e.to_string()))?;
        Ok(out)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, DatagenError> {
        let png_err = |e: png::DecodingError| DatagenError::Png(e.to_string());
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes))
            .read_info()
            .map_err(png_err)?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(png_err)?;
        if info.color_type != png::ColorType::Rgb
            || info.bit_depth != png::BitDepth::Eight
            || info.width != info.height
        {
            return Err(DatagenError::Png("expected a square 8-bit RGB image".into()));
        }
        buf.truncate(info.buffer_size());
        Ok(Self {
            size: info.width,
            rgb: buf,
        })
    }

    pub fn write_png(&self, path: &Path) -> Result<(), DatagenError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self, DatagenError> {
        Self::decode_png(&std::fs::read(path)?)
    }
}

/// White image with an anti-aliased red disc centered at `p * size`
/// (x to the right, y downward).
pub fn rasterize_dot(p: [f64; 2], size: u32, radius: f64) -> Result<Raster, DatagenError> {
    if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
        return Err(DatagenError::OutOfBounds(p[0], p[1]));
    }
    let (cx, cy) = (p[0] * f64::from(size), p[1] * f64::from(size));
    let mut rgb = vec![255u8; 3 * (size * size) as usize];
    for row in 0..size {
        for col in 0..size {
            let d = (f64::from(col) + 0.5 - cx).hypot(f64::from(row) + 0.5 - cy);
            let cover = (radius + 0.5 - d).clamp(0.0, 1.0);
            if cover > 0.0 {
                let v = (255.0 * (1.0 - cover)).round() as u8;
                let i = 3 * (row * size + col) as usize;
                rgb[i + 1] = v;
                rgb[i + 2] = v;
            }
        }
    }
    Ok(Raster { size, rgb })
}

/// Image path recorded for dot record `index`.
pub fn dot_image_path(index: u64) -> String {
    format!("images/{index:06}.png")
}

pub fn dot_position(rec: &DatasetRecord) -> Option<[f64; 2]> {
    match rec.scene.objects.first()?.location {
        crate::scene::Location::Planar(p) => Some(p),
        _ => None,
    }
}

pub fn gen_dot2d(
    n: usize,
    dist: DotDistribution,
    seed: u64,
    cfg: &Dot2dConfig,
    par: Parallelism,
) -> Result<Vec<DatasetRecord>, DatagenError> {
    cfg.validate()?;
    exec::map_indexed(n, par, |i| {
        let index = i as u64;
        let mut rng = record_rng(seed, index);
        let p = loop {
            let p = [quantized_uniform(&mut rng, 0.0, 1.0), quantized_uniform(&mut rng, 0.0, 1.0)];
            if dist == DotDistribution::Uniform || in_checkerboard(p, &cfg.layout) {
                break p;
            }
        };
        let split = match dist {
            DotDistribution::Checkerboard => Split::Train,
            DotDistribution::Uniform if in_checkerboard(p, &cfg.layout) => Split::ValId,
            DotDistribution::Uniform => Split::ValOod,
        };
        let scene = SceneProgram::new(vec![ObjectRecord::dot(p[0], p[1])], CameraRecord::default());
        let opts = EmitOptions {
            shuffle_seed: rng.random(),
            ..EmitOptions::default()
        };
        let mut rec = finish_record(index, Task::Dot2d, split, &scene, &opts)?;
        rec.image = Some(dot_image_path(index));
        Ok(rec)
    })
    .into_iter()
    .collect()
}

pub fn render_dot_record(rec: &DatasetRecord, cfg: &Dot2dConfig) -> Result<Raster, DatagenError> {
    let p = dot_position(rec).ok_or_else(|| DatagenError::Format {
        line: rec.index as usize,
        msg: "record has no planar dot".into(),
    })?;
    rasterize_dot(p, cfg.image_size, cfg.radius)
}

/// Writes each record's PNG under `root` at its recorded image path.
pub fn write_dot_images(
    root: &Path,
    records: &[DatasetRecord],
    cfg: &Dot2dConfig,
    par: Parallelism,
) -> Result<(), DatagenError> {
    std::fs::create_dir_all(root.join("images"))?;
    exec::map_slice(records, par, |rec| {
        let rel = rec.image.clone().unwrap_or_else(|| dot_image_path(rec.index));
        render_dot_record(rec, cfg)?.write_png(&root.join(rel))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centroid(r: &Raster) -> [f64; 2] {
        let d = r.deficit();
        let (mut sx, mut sy, mut w) = (0.0, 0.0, 0.0);
        for row in 0..r.size {
            for col in 0..r.size {
                let v = f64::from(d[(row * r.size + col) as usize]);
                sx += v * (f64::from(col) + 0.5);
                sy += v * (f64::from(row) + 0.5);
                w += v;
            }
        }
        [sx / w, sy / w]
    }

    #[test]
    fn checkerboard_cells() {
        let l = CheckerboardLayout::default();
        assert!(in_checkerboard([0.05, 0.05], &l));
        assert!(!in_checkerboard([0.05, 0.20], &l));
        assert!(in_checkerboard([1.0, 1.0], &l));
        assert!(!in_checkerboard([0.125, 0.0], &l));
        assert!(in_checkerboard([0.1249, 0.0], &l));
        let odd = CheckerboardLayout {
            id_parity: Parity::Odd,
            ..l
        };
        assert!(!in_checkerboard([0.05, 0.05], &odd));
    }

    #[test]
    fn id_area_fraction_is_half() {
        // midpoint rule on a fine grid
        let l = CheckerboardLayout::default();
        let m = 400;
        let inside = (0..m)
            .flat_map(|i| (0..m).map(move |j| [(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64]))
            .filter(|p| in_checkerboard(*p, &l))
            .count();
        assert_eq!(inside * 2, m * m);
    }

    #[test]
    fn centered_dot() {
        let r = rasterize_dot([0.5, 0.5], 64, 4.0).unwrap();
        let c = centroid(&r);
        assert!((c[0] - 32.0).abs() < 0.5 && (c[1] - 32.0).abs() < 0.5);
        assert_eq!(r.pixel(0, 0), [255, 255, 255]);
        assert_eq!(r.pixel(32, 32), [255, 0, 0]);
    }

    #[test]
    fn corner_dot_is_clipped() {
        let r = rasterize_dot([0.0, 0.0], 64, 4.0).unwrap();
        assert!(r.deficit().iter().any(|&v| v > 0.5));
        assert!(matches!(rasterize_dot([1.01, 0.5], 64, 4.0), Err(DatagenError::OutOfBounds(..))));
    }

    #[test]
    fn deficit_centroid_tracks_position() {
        let mut rng = record_rng(99, 0);
        for _ in 0..200 {
            let p = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
            let c = centroid(&rasterize_dot(p, 64, 4.0).unwrap());
            assert!((c[0] - p[0] * 64.0).abs() < 0.5, "{p:?} {c:?}");
            assert!((c[1] - p[1] * 64.0).abs() < 0.5, "{p:?} {c:?}");
        }
    }

    #[test]
    fn png_round_trip() {
        let r = rasterize_dot([0.3, 0.7], 64, 4.0).unwrap();
        assert_eq!(Raster::decode_png(&r.encode_png().unwrap()).unwrap(), r);
    }

    #[test]
    fn generation() {
        let cfg = Dot2dConfig::default();
        let recs = gen_dot2d(300, DotDistribution::Checkerboard, 4, &cfg, Parallelism::Sequential).unwrap();
        for r in &recs {
            assert!(in_checkerboard(dot_position(r).unwrap(), &cfg.layout));
            assert_eq!(r.reparse().unwrap(), r.scene);
        }
        let uni = gen_dot2d(2000, DotDistribution::Uniform, 4, &cfg, Parallelism::Sequential).unwrap();
        let id = uni.iter().filter(|r| r.split == Split::ValId).count();
        assert!((id as f64 / 2000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn fig_s4_text() {
        let scene = SceneProgram::new(vec![ObjectRecord::dot(0.292, 0.266)], CameraRecord::default());
        let rec = finish_record(0, Task::Dot2d, Split::Train, &scene, &EmitOptions::default()).unwrap();
        assert_eq!(rec.program.as_str(), "add(x=0.292, y=0.266)\n");
    }
}
