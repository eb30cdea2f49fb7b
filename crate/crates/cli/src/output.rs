//! Result persistence: a JSON document per run with the config digest and
//! tool version, CSV tables with '.' decimals and mandatory headers, and
//! optional SVG line plots. Output writing is single threaded and ordered so
//! reruns are byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct OutputSink {
    dir: PathBuf,
    pub config_sha256: String,
    pub plots: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_sha256: &'a str,
    seed_used: Option<u64>,
    #[serde(flatten)]
    payload: T,
}

impl OutputSink {
    pub fn new(dir: &str, config_bytes: &[u8], plots: bool) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let digest = Sha256::digest(config_bytes);
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(OutputSink { dir: PathBuf::from(dir), config_sha256, plots })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(
        &self,
        subcommand: &str,
        seed_used: Option<u64>,
        payload: T,
    ) -> std::io::Result<PathBuf> {
        let envelope = Envelope {
            tool: "thermogap",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_sha256: &self.config_sha256,
            seed_used,
            payload,
        };
        let path = self.path(&format!("{subcommand}.json"));
        let mut text = serde_json::to_string_pretty(&envelope).expect("serializable payload");
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &str,
        rows: impl Iterator<Item = String>,
    ) -> std::io::Result<PathBuf> {
        let path = self.path(name);
        let mut file = fs::File::create(&path)?;
        writeln!(file, "{header}")?;
        for row in rows {
            writeln!(file, "{row}")?;
        }
        Ok(path)
    }

    /// Minimal SVG polyline plot; y may be drawn on a log10 scale.
    pub fn write_plot(
        &self,
        name: &str,
        title: &str,
        points: &[(f64, f64)],
        log_y: bool,
    ) -> std::io::Result<Option<PathBuf>> {
        if !self.plots {
            return Ok(None);
        }
        let path = self.path(name);
        write_svg(&path, title, points, log_y)?;
        Ok(Some(path))
    }
}

fn write_svg(path: &Path, title: &str, points: &[(f64, f64)], log_y: bool) -> std::io::Result<()> {
    let (w, h, ml, mb) = (640.0_f64, 400.0_f64, 60.0_f64, 40.0_f64);
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, y)| !log_y || y > 0.0)
        .map(|&(x, y)| (x, if log_y { y.log10() } else { y }))
        .collect();
    let mut file = fs::File::create(path)?;
    writeln!(
        file,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )?;
    writeln!(file, r#"<rect width="{w}" height="{h}" fill="white"/>"#)?;
    writeln!(
        file,
        r#"<text x="{}" y="20" font-family="monospace" font-size="14">{title}</text>"#,
        ml
    )?;
    if pts.len() >= 2 {
        let (x0, x1) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(x, _)| (a.min(x), b.max(x)));
        let (y0, y1) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, y)| (a.min(y), b.max(y)));
        let xspan = (x1 - x0).max(1e-300);
        let yspan = (y1 - y0).max(1e-300);
        let project = |x: f64, y: f64| {
            (
                ml + (x - x0) / xspan * (w - ml - 20.0),
                h - mb - (y - y0) / yspan * (h - mb - 40.0),
            )
        };
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = project(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        writeln!(
            file,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            coords.join(" ")
        )?;
        let ylabel = if log_y { "log10" } else { "value" };
        writeln!(
            file,
            r#"<text x="5" y="{}" font-family="monospace" font-size="11">{ylabel} [{y0:.3e}, {y1:.3e}]</text>"#,
            h / 2.0
        )?;
        writeln!(
            file,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="11">x [{x0}, {x1}]</text>"#,
            ml,
            h - 10.0
        )?;
    }
    writeln!(file, "</svg>")?;
    Ok(())
}
