//! Scene of placed image fragments, its rasterization and the per-sequence
//! utility over the composed image.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PALETTE_BINS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    id: String,
    width: u32,
    height: u32,
    /// Straight (non-premultiplied) RGBA in `[0, 1]`, row-major.
    pixels: Vec<[f64; 4]>,
}

impl Fragment {
    pub fn new(id: impl Into<String>, width: u32, height: u32, pixels: Vec<[f64; 4]>) -> Result<Self> {
        let id = id.into();
        let bad = |msg: String| Error::InvalidFragment { id: id.clone(), msg };
        if width == 0 || height == 0 {
            return Err(bad("fragment has zero area".into()));
        }
        if pixels.len() != (width * height) as usize {
            return Err(bad(format!("expected {} pixels, got {}", width * height, pixels.len())));
        }
        if pixels.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(bad("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { id, width, height, pixels })
    }

    pub fn solid(id: impl Into<String>, width: u32, height: u32, rgba: [f64; 4]) -> Result<Self> {
        Self::new(id, width, height, vec![rgba; (width * height) as usize])
    }

    /// Linear blend from `from` to `to`, left to right or top to bottom.
    pub fn gradient(
        id: impl Into<String>,
        width: u32,
        height: u32,
        from: [f64; 4],
        to: [f64; 4],
        vertical: bool,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                let (i, n) = if vertical { (y, height) } else { (x, width) };
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                pixels.push(std::array::from_fn(|c| from[c] + (to[c] - from[c]) * t));
            }
        }
        Self::new(id, width, height, pixels)
    }

    pub fn from_png(id: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
            .to_rgba8();
        let pixels = img
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect();
        Self::new(id, img.width(), img.height(), pixels)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 4] {
        self.pixels[(y * self.width + x) as usize]
    }
}

/// Where an agent's fragment sits. Draw order is the owning agent's id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub opacity: f64,
}

impl Placement {
    pub fn at(x: f64, y: f64) -> Self {
        Self { x, y, scale: 1.0, opacity: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::InvalidPlacement("position must be finite".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidPlacement(format!("scale {} must be positive", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::InvalidPlacement(format!("opacity {} outside [0, 1]", self.opacity)));
        }
        Ok(())
    }
}

/// One candidate move of a fragment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    Translate { dx: f64, dy: f64 },
    /// Uniform scale about the fragment's center.
    Scale { factor: f64 },
    Opacity { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneItem {
    pub fragment: Arc<Fragment>,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    width: u32,
    height: u32,
    background: [f64; 3],
    items: BTreeMap<usize, SceneItem>,
}

impl Scene {
    pub fn new(width: u32, height: u32, background: [f64; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidScript("canvas must have nonzero area".into()));
        }
        if background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidScript("background channels must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, background, items: BTreeMap::new() })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn background(&self) -> [f64; 3] {
        self.background
    }

    pub fn insert(&mut self, agent: usize, fragment: Arc<Fragment>, placement: Placement) -> Result<()> {
        placement.validate()?;
        self.items.insert(agent, SceneItem { fragment, placement });
        Ok(())
    }

    pub fn get(&self, agent: usize) -> Option<&SceneItem> {
        self.items.get(&agent)
    }

    /// Items in draw order.
    pub fn items(&self) -> impl Iterator<Item = (usize, &SceneItem)> {
        self.items.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn set_placement(&mut self, agent: usize, placement: Placement) -> Result<()> {
        placement.validate()?;
        let item = self.items.get_mut(&agent).ok_or(Error::UnknownAgent(agent))?;
        item.placement = placement;
        Ok(())
    }

    pub fn graph(&self) -> SceneGraph {
        SceneGraph {
            canvas: CanvasSize { width: self.width, height: self.height },
            background: self.background,
            items: self
                .items()
                .map(|(agent, item)| SceneGraphItem {
                    agent,
                    fragment: item.fragment.id().to_string(),
                    x: item.placement.x,
                    y: item.placement.y,
                    scale: item.placement.scale,
                    opacity: item.placement.opacity,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanvasSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphItem {
    pub agent: usize,
    pub fragment: String,
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub opacity: f64,
}

/// Serializable scene: `{canvas, background, items:[{agent, fragment, x, y, scale, opacity}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub canvas: CanvasSize,
    pub background: [f64; 3],
    pub items: Vec<SceneGraphItem>,
}

pub fn apply_action(scene: &Scene, agent: usize, action: Perturbation) -> Result<Scene> {
    let item = scene.get(agent).ok_or(Error::UnknownAgent(agent))?;
    let mut p = item.placement;
    match action {
        Perturbation::Translate { dx, dy } => {
            p.x += dx;
            p.y += dy;
        }
        Perturbation::Scale { factor } => {
            let scale = p.scale * factor;
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidPlacement(format!("scale {scale} must be positive")));
            }
            let (w, h) = (item.fragment.width() as f64, item.fragment.height() as f64);
            p.x += 0.5 * w * (p.scale - scale);
            p.y += 0.5 * h * (p.scale - scale);
            p.scale = scale;
        }
        Perturbation::Opacity { delta } => {
            p.opacity = (p.opacity + delta).clamp(0.0, 1.0);
        }
    }
    let mut out = scene.clone();
    out.set_placement(agent, p)?;
    Ok(out)
}

/// 8-bit RGBA raster plus the per-pixel paint bookkeeping the observer needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub rgba: Vec<u8>,
    /// Number of fragments with nonzero alpha covering each pixel.
    pub paint_count: Vec<u16>,
    /// Accumulated ink alpha `1 - Π(1 - α)` per pixel.
    pub ink: Vec<f64>,
}

impl Raster {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = 4 * (y * self.width + x) as usize;
        [self.rgba[i], self.rgba[i + 1], self.rgba[i + 2], self.rgba[i + 3]]
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(path, &self.rgba, self.width, self.height, image::ExtendedColorType::Rgba8)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    /// Binary PPM (P6), alpha dropped.
    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let rgb: Vec<u8> = self.rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
        out.write_all(&rgb)
    }
}

fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Back-to-front "over" compositing in agent-id order with nearest-neighbour
/// sampling at pixel centers. Color math runs in f64 and is quantized once.
pub fn render(scene: &Scene) -> Raster {
    let (w, h) = (scene.width as usize, scene.height as usize);
    let mut color = vec![scene.background; w * h];
    let mut paint_count = vec![0u16; w * h];
    let mut ink = vec![0.0f64; w * h];
    for (_, item) in scene.items() {
        let p = item.placement;
        let frag = &item.fragment;
        let (fw, fh) = (frag.width() as f64 * p.scale, frag.height() as f64 * p.scale);
        let x0 = p.x.floor().max(0.0) as usize;
        let y0 = p.y.floor().max(0.0) as usize;
        let x1 = ((p.x + fw).ceil().max(0.0) as usize).min(w);
        let y1 = ((p.y + fh).ceil().max(0.0) as usize).min(h);
        for py in y0..y1 {
            let cy = py as f64 + 0.5;
            if cy < p.y || cy >= p.y + fh {
                continue;
            }
            let v = (((cy - p.y) / p.scale) as u32).min(frag.height() - 1);
            for px in x0..x1 {
                let cx = px as f64 + 0.5;
                if cx < p.x || cx >= p.x + fw {
                    continue;
                }
                let u = (((cx - p.x) / p.scale) as u32).min(frag.width() - 1);
                let src = frag.pixel(u, v);
                let alpha = src[3] * p.opacity;
                if alpha <= 0.0 {
                    continue;
                }
                let i = py * w + px;
                for c in 0..3 {
                    color[i][c] = src[c] * alpha + color[i][c] * (1.0 - alpha);
                }
                paint_count[i] += 1;
                ink[i] += alpha * (1.0 - ink[i]);
            }
        }
    }
    let rgba = color
        .iter()
        .flat_map(|c| [quantize(c[0]), quantize(c[1]), quantize(c[2]), 255])
        .collect();
    Raster { width: scene.width, height: scene.height, rgba, paint_count, ink }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub coverage: f64,
    pub balance: f64,
    pub palette: f64,
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub rgb: [u8; 3],
    pub weight: f64,
}

/// Image-utility parameters for one sequence of the play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub weights: UtilityWeights,
    #[serde(default)]
    pub target_palette: Vec<PaletteEntry>,
    /// Target ink centroid in canvas-relative coordinates, `[0, 1]^2`.
    pub target_centroid: [f64; 2],
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
}

impl SequenceConfig {
    pub fn with_weights(weights: UtilityWeights) -> Self {
        Self {
            weights,
            target_palette: Vec::new(),
            target_centroid: [0.5, 0.5],
            values: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights;
        let all = [w.coverage, w.balance, w.palette, w.overlap];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidSequenceConfig("utility weights must be finite and non-negative".into()));
        }
        if all.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidSequenceConfig("at least one utility weight must be positive".into()));
        }
        if self.target_centroid.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidSequenceConfig("target centroid must lie in [0, 1]^2".into()));
        }
        if self.target_palette.iter().any(|e| !(e.weight.is_finite() && e.weight >= 0.0)) {
            return Err(Error::InvalidSequenceConfig("palette weights must be non-negative".into()));
        }
        if w.palette > 0.0 && self.target_palette.iter().all(|e| e.weight == 0.0) {
            return Err(Error::InvalidSequenceConfig("palette weight set without a target palette".into()));
        }
        if self.values.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSequenceConfig("sequence values must be finite".into()));
        }
        Ok(())
    }

    /// Normalized 512-bin target histogram, or `None` for an empty palette.
    pub fn target_histogram(&self) -> Option<Vec<f64>> {
        let mut hist = vec![0.0; PALETTE_BINS];
        for e in &self.target_palette {
            hist[palette_bin(e.rgb)] += e.weight;
        }
        let total: f64 = hist.iter().sum();
        (total > 0.0).then(|| hist.iter().map(|h| h / total).collect())
    }
}

/// Joint 8-bins-per-channel color bin.
pub fn palette_bin(rgb: [u8; 3]) -> usize {
    ((rgb[0] >> 5) as usize) * 64 + ((rgb[1] >> 5) as usize) * 8 + (rgb[2] >> 5) as usize
}

pub fn color_histogram(raster: &Raster) -> Vec<f64> {
    let mut hist = vec![0.0; PALETTE_BINS];
    for p in raster.rgba.chunks_exact(4) {
        hist[palette_bin([p[0], p[1], p[2]])] += 1.0;
    }
    let n = (raster.width * raster.height) as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    hist
}

/// The observer's view of the composed image; every component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityVector {
    pub coverage: f64,
    pub balance: f64,
    pub palette_match: f64,
    pub overlap_penalty: f64,
}

/// * coverage: fraction of pixels painted by at least one fragment;
/// * balance: `1 - |ink centroid - target| / canvas diagonal`, 0 with no ink;
/// * palette_match: `1 - 0.5 * L1(histogram, target)`, 0 with no target;
/// * overlap_penalty: fraction of pixels painted by two or more fragments.
pub fn metrics(raster: &Raster, cfg: &SequenceConfig) -> QualityVector {
    let (w, h) = (raster.width as usize, raster.height as usize);
    let n = (w * h) as f64;
    let (mut painted, mut overlapped) = (0usize, 0usize);
    let (mut mass, mut mx, mut my) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let count = raster.paint_count[i];
            if count >= 1 {
                painted += 1;
            }
            if count >= 2 {
                overlapped += 1;
            }
            let a = raster.ink[i];
            mass += a;
            mx += a * (x as f64 + 0.5);
            my += a * (y as f64 + 0.5);
        }
    }
    let balance = if mass > 0.0 {
        let tx = cfg.target_centroid[0] * w as f64;
        let ty = cfg.target_centroid[1] * h as f64;
        let dist = ((mx / mass - tx).powi(2) + (my / mass - ty).powi(2)).sqrt();
        let diag = ((w * w + h * h) as f64).sqrt();
        (1.0 - dist / diag).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let palette_match = match cfg.target_histogram() {
        Some(target) => {
            let hist = color_histogram(raster);
            let l1: f64 = hist.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum();
            (1.0 - 0.5 * l1).clamp(0.0, 1.0)
        }
        None => 0.0,
    };
    QualityVector {
        coverage: painted as f64 / n,
        balance,
        palette_match,
        overlap_penalty: overlapped as f64 / n,
    }
}

pub fn utility_from_metrics(q: &QualityVector, weights: &UtilityWeights) -> f64 {
    weights.coverage * q.coverage + weights.balance * q.balance + weights.palette * q.palette_match
        - weights.overlap * q.overlap_penalty
}

pub fn utility(scene: &Scene, cfg: &SequenceConfig) -> f64 {
    utility_from_metrics(&metrics(&render(scene), cfg), &cfg.weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RED: [f64; 4] = [1.0, 0.0, 0.0, 1.0];

    fn scene_with(items: &[(usize, Fragment, Placement)]) -> Scene {
        let mut s = Scene::new(16, 8, [0.0, 0.0, 0.0]).unwrap();
        for (id, f, p) in items {
            s.insert(*id, Arc::new(f.clone()), *p).unwrap();
        }
        s
    }

    #[test]
    fn identity_clamp_and_inverse_actions() {
        let f = Fragment::solid("a", 4, 4, RED).unwrap();
        let mut p = Placement::at(3.0, 2.0);
        p.opacity = 0.95;
        let s = scene_with(&[(0, f, p)]);
        assert_eq!(apply_action(&s, 0, Perturbation::Translate { dx: 0.0, dy: 0.0 }).unwrap(), s);
        let o = apply_action(&s, 0, Perturbation::Opacity { delta: 0.1 }).unwrap();
        assert_eq!(o.get(0).unwrap().placement.opacity, 1.0);
        let t = apply_action(&s, 0, Perturbation::Translate { dx: 7.0, dy: -3.0 }).unwrap();
        let back = apply_action(&t, 0, Perturbation::Translate { dx: -7.0, dy: 3.0 }).unwrap();
        assert_eq!(back, s);
        assert!(matches!(
            apply_action(&s, 3, Perturbation::Opacity { delta: 0.1 }),
            Err(Error::UnknownAgent(3))
        ));
        assert!(apply_action(&s, 0, Perturbation::Scale { factor: 0.0 }).is_err());
    }

    #[test]
    fn scale_keeps_center() {
        let f = Fragment::solid("a", 4, 4, RED).unwrap();
        let s = scene_with(&[(0, f, Placement::at(4.0, 2.0))]);
        let t = apply_action(&s, 0, Perturbation::Scale { factor: 1.5 }).unwrap();
        let p = t.get(0).unwrap().placement;
        assert_eq!((p.x + 3.0, p.y + 3.0), (6.0, 4.0));
    }

    #[test]
    fn empty_scene_renders_background() {
        let s = Scene::new(5, 3, [0.2, 0.4, 0.6]).unwrap();
        let r = render(&s);
        let bg = [51, 102, 153, 255];
        assert!(r.rgba.chunks_exact(4).all(|p| p == bg));
        let q = metrics(&r, &SequenceConfig::with_weights(UtilityWeights { coverage: 1.0, balance: 0.0, palette: 0.0, overlap: 0.0 }));
        assert_eq!(q.coverage, 0.0);
        assert_eq!(q.overlap_penalty, 0.0);
    }

    #[test]
    fn opaque_fragment_overwrites() {
        let f = Fragment::gradient("g", 4, 2, [0.0, 0.0, 0.0, 1.0], [1.0, 1.0, 1.0, 1.0], false).unwrap();
        let s = scene_with(&[(0, f.clone(), Placement::at(0.0, 0.0))]);
        let r = render(&s);
        for x in 0..4 {
            let c = quantize(f.pixel(x, 0)[0]);
            assert_eq!(r.pixel(x, 0), [c, c, c, 255]);
            assert_eq!(r.pixel(x, 1), [c, c, c, 255]);
        }
        assert_eq!(r.pixel(4, 0), [0, 0, 0, 255]);
    }

    #[test]
    fn ppm_header() {
        let r = render(&Scene::new(2, 1, [1.0, 1.0, 1.0]).unwrap());
        let mut buf = Vec::new();
        r.write_ppm(&mut buf).unwrap();
        assert_eq!(&buf[..11], b"P6\n2 1\n255\n");
        assert_eq!(&buf[11..], &[255; 6]);
    }

    #[test]
    fn fragment_validation() {
        assert!(Fragment::solid("z", 0, 3, RED).is_err());
        assert!(Fragment::new("p", 1, 1, vec![[1.2, 0.0, 0.0, 1.0]]).is_err());
        assert!(Fragment::new("p", 2, 1, vec![RED]).is_err());
    }

    #[test]
    fn sequence_config_validation() {
        let zero = UtilityWeights { coverage: 0.0, balance: 0.0, palette: 0.0, overlap: 0.0 };
        assert!(SequenceConfig::with_weights(zero).validate().is_err());
        let pal = UtilityWeights { palette: 1.0, ..zero };
        assert!(SequenceConfig::with_weights(pal).validate().is_err());
        let neg = UtilityWeights { coverage: -1.0, balance: 1.0, ..zero };
        assert!(SequenceConfig::with_weights(neg).validate().is_err());
    }

    #[test]
    fn scene_graph_lists_items_in_draw_order() {
        let f = Fragment::solid("a", 2, 2, RED).unwrap();
        let s = scene_with(&[(2, f.clone(), Placement::at(1.0, 1.0)), (0, f, Placement::at(0.0, 0.0))]);
        let g = s.graph();
        assert_eq!(g.items.iter().map(|i| i.agent).collect::<Vec<_>>(), vec![0, 2]);
        let json = serde_json::to_value(&g).unwrap();
        assert_eq!(json["canvas"]["width"], 16);
        assert_eq!(json["items"][0]["fragment"], "a");
    }
}
