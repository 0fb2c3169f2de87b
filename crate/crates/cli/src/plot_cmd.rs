use clap::{Args, ValueEnum};
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::manifest::write_atomic;
use crate::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Ground-truth (red) and predicted (blue) dot positions from positions.csv.
    Scatter2d,
    /// Position RMSE per split from one or more eval report.json files.
    IdOodBars,
    /// Validation metric against step from one or more metrics.csv files.
    Dynamics,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub kind: PlotKind,
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Series labels, one per input (default: the input's parent directory name).
    #[arg(long = "label")]
    pub labels: Vec<String>,
    /// scatter2d: only rows of this split.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f4fd8", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(e).context(path.display()))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str, path: &Path) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data(anyhow::anyhow!("{}: missing column {name:?}", path.display())))
    }
}

fn parse(cell: &str) -> Option<f64> {
    cell.trim().parse().ok().filter(|v: &f64| v.is_finite())
}

struct Frame {
    svg: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(title: &str, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{title}</text>"#, W / 2.0);
        let _ = writeln!(
            svg,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let mut f = Self { svg, x, y };
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = x.0 + t * (x.1 - x.0);
            let yv = y.0 + t * (y.1 - y.0);
            let (px, py) = (f.px(xv), f.py(yv));
            let _ = writeln!(
                f.svg,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                H - PAD + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                f.svg,
                r#"<text x="{:.2}" y="{py:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                PAD - 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(f.svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 10.0);
        let _ = writeln!(
            f.svg,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
            H / 2.0,
            H / 2.0
        );
        f
    }

    fn px(&self, v: f64) -> f64 {
        PAD + (v - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, v: f64) -> f64 {
        H - PAD - (v - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn label_for(a: &PlotArgs, k: usize) -> String {
    a.labels.get(k).cloned().unwrap_or_else(|| {
        a.inputs[k]
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("series{k}"))
    })
}

fn scatter(a: &PlotArgs) -> Result<(String, String), CliError> {
    let mut frame = Frame::new("positions", (0.0, 1.0), (0.0, 1.0), "x", "y");
    let mut side = String::from("source,gt_x,gt_y,pred_x,pred_y\n");
    let mut dots = String::new();
    for (k, path) in a.inputs.iter().enumerate() {
        let t = Table::read(path)?;
        let c: Vec<usize> = ["gt_x", "gt_y", "pred_x", "pred_y"]
            .iter()
            .map(|n| t.col(n, path))
            .collect::<Result<_, _>>()?;
        let split = t.col("split", path).ok();
        let label = label_for(a, k);
        for row in &t.rows {
            if let (Some(want), Some(s)) = (&a.split, split) {
                if row.get(s) != Some(want) {
                    continue;
                }
            }
            let v: Vec<Option<f64>> = c.iter().map(|&i| row.get(i).and_then(|s| parse(s))).collect();
            let cell = |o: Option<f64>| o.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(side, "{label},{},{},{},{}", cell(v[0]), cell(v[1]), cell(v[2]), cell(v[3]));
            if let (Some(x), Some(y)) = (v[0], v[1]) {
                let _ = writeln!(
                    frame.svg,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#d62728" fill-opacity="0.7"/>"##,
                    frame.px(x),
                    frame.py(y)
                );
            }
            if let (Some(x), Some(y)) = (v[2], v[3]) {
                let _ = writeln!(
                    dots,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f4fd8" fill-opacity="0.7"/>"##,
                    frame.px(x),
                    frame.py(y)
                );
            }
        }
    }
    frame.svg.push_str(&dots);
    Ok((frame.finish(), side))
}

fn bars(a: &PlotArgs) -> Result<(String, String), CliError> {
    let mut series: Vec<(String, BTreeMap<String, f64>)> = Vec::new();
    for (k, path) in a.inputs.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(e).context(path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let m = v
            .get("position_rmse")
            .and_then(|m| m.as_object())
            .ok_or_else(|| CliError::data(anyhow::anyhow!("{}: missing column \"position_rmse\"", path.display())))?;
        let vals = ["val_id", "val_ood"]
            .iter()
            .filter_map(|s| m.get(*s).and_then(|x| x.as_f64()).map(|x| (s.to_string(), x)))
            .collect();
        series.push((label_for(a, k), vals));
    }
    let top = series
        .iter()
        .flat_map(|(_, m)| m.values().copied())
        .fold(0.0f64, f64::max)
        .max(1e-3)
        * 1.1;
    let mut frame = Frame::new("position RMSE", (0.0, 1.0), (0.0, top), "split", "RMSE");
    let mut side = String::from("series,split,rmse\n");
    let groups = ["val_id", "val_ood"];
    let n = series.len().max(1) as f64;
    for (g, split) in groups.iter().enumerate() {
        let x0 = (g as f64 + 0.15) / groups.len() as f64;
        let width = 0.7 / groups.len() as f64 / n;
        let _ = writeln!(
            frame.svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{split}</text>"#,
            frame.px(x0 + 0.35 / groups.len() as f64),
            H - PAD - 6.0
        );
        for (s, (label, vals)) in series.iter().enumerate() {
            if let Some(v) = vals.get(*split) {
                let _ = writeln!(side, "{label},{split},{v}");
                let x = x0 + s as f64 * width;
                let _ = writeln!(
                    frame.svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    frame.px(x),
                    frame.py(*v),
                    frame.px(x + width) - frame.px(x),
                    frame.py(0.0) - frame.py(*v),
                    PALETTE[s % PALETTE.len()]
                );
            }
        }
    }
    legend(&mut frame, series.iter().map(|s| s.0.as_str()));
    Ok((frame.finish(), side))
}

fn legend<'a>(frame: &mut Frame, labels: impl Iterator<Item = &'a str>) {
    for (s, label) in labels.enumerate() {
        let y = PAD + 14.0 + 14.0 * s as f64;
        let _ = writeln!(
            frame.svg,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            W - PAD - 110.0,
            y - 9.0,
            PALETTE[s % PALETTE.len()],
            W - PAD - 96.0,
            y
        );
    }
}

fn dynamics(a: &PlotArgs) -> Result<(String, String), CliError> {
    let mut series = Vec::new();
    for (k, path) in a.inputs.iter().enumerate() {
        let t = Table::read(path)?;
        let (cs, cv) = (t.col("step", path)?, t.col("val_metric", path)?);
        let pts: Vec<(f64, f64)> = t
            .rows
            .iter()
            .filter_map(|r| Some((parse(r.get(cs)?)?, parse(r.get(cv)?)?)))
            .collect();
        series.push((label_for(a, k), pts));
    }
    let all = || series.iter().flat_map(|(_, p)| p.iter());
    let xmax = all().map(|p| p.0).fold(1.0f64, f64::max);
    let ymax = all().map(|p| p.1).fold(1e-6f64, f64::max) * 1.1;
    let mut frame = Frame::new("validation MSE", (0.0, xmax), (0.0, ymax), "step", "val_metric");
    let mut side = String::from("series,step,val_metric\n");
    for (s, (label, pts)) in series.iter().enumerate() {
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let _ = writeln!(side, "{label},{x},{y}");
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, frame.px(*x), frame.py(*y));
        }
        if !pts.is_empty() {
            let _ = writeln!(
                frame.svg,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                d.trim_end(),
                PALETTE[s % PALETTE.len()]
            );
        }
    }
    legend(&mut frame, series.iter().map(|s| s.0.as_str()));
    Ok((frame.finish(), side))
}

pub fn run(ctx: &Ctx, a: &PlotArgs) -> Result<(), CliError> {
    let (svg, side) = match a.kind {
        PlotKind::Scatter2d => scatter(a)?,
        PlotKind::IdOodBars => bars(a)?,
        PlotKind::Dynamics => dynamics(a)?,
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let sidecar = a.out.with_extension("csv");
    write_atomic(&a.out, svg.as_bytes())?;
    write_atomic(&sidecar, side.as_bytes())?;
    let manifest = serde_json::json!({
        "command_line": ctx.argv,
        "kind": format!("{:?}", a.kind),
        "inputs": a.inputs,
        "outputs": [&a.out, &sidecar],
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let mut mpath = a.out.as_os_str().to_owned();
    mpath.push(".manifest.json");
    write_atomic(Path::new(&mpath), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}
