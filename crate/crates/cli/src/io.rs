//! Point files, JSON documents, SVG figures and PPM rasters.

use std::fmt::Write as _;
use std::path::Path;

use bvd_core::diagram::{PlanarDiagram, RasterLabels, NO_LABEL};
use bvd_core::planar::{Point2, Rect};
use bvd_core::triangulation::Triangulation;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Version tag carried by every JSON document.
pub const SCHEMA_VERSION: &str = "bvd-1";

/// Fill colors, indexed by site (or cell) index modulo 12.
pub const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    "#86bcb6", "#d37295",
];

/// Width of the SVG viewBox; the height follows the clip's aspect ratio.
pub const SVG_WIDTH: f64 = 1000.0;

/// Parses one point per line. Blank lines and lines starting with `#` are skipped.
pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::parse(i + 1, format!("expected comma-separated finite reals, got `{line}`")))?;
        if let Some(first) = out.first() {
            if first.len() != row.len() {
                return Err(CliError::parse(i + 1, format!("expected {} values, got {}", first.len(), row.len())));
            }
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(CliError::parse(0, "no points found".to_string()));
    }
    Ok(out)
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_points_csv(&text).map_err(|e| e.in_file(path))
}

pub fn to_planar(points: &[Vec<f64>]) -> Result<Vec<Point2>, CliError> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| match p.as_slice() {
            [x, y] => Ok([*x, *y]),
            _ => Err(CliError::Validation(format!("point {i} has {} coordinates; expected 2", p.len()))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramJson {
    pub version: String,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub diagram: PlanarDiagram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurve {
    pub edge: [usize; 2],
    pub points: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangulationJson {
    pub version: String,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub triangulation: Triangulation,
    pub edge_curves: Vec<EdgeCurve>,
}

/// Pretty JSON with shortest round-trip floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(format!("cli_io: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Maps clip coordinates to the viewBox with y pointing down.
struct Frame {
    clip: Rect,
    h: f64,
}

impl Frame {
    fn new(clip: Rect) -> Self {
        Self { clip, h: SVG_WIDTH * clip.height() / clip.width() }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        (
            (p[0] - self.clip.x0) / self.clip.width() * SVG_WIDTH,
            (self.clip.y1 - p[1]) / self.clip.height() * self.h,
        )
    }

    fn path(&self, rings: &[&[Point2]]) -> String {
        let mut d = String::new();
        for ring in rings.iter().filter(|r| r.len() >= 2) {
            for (i, &p) in ring.iter().enumerate() {
                let (x, y) = self.map(p);
                let _ = write!(d, "{}{x:.6},{y:.6} ", if i == 0 { "M" } else { "L" });
            }
            d.push_str("Z ");
        }
        d.trim_end().to_string()
    }

    fn polyline(&self, pts: &[Point2]) -> String {
        pts.iter().map(|&p| self.map(p)).map(|(x, y)| format!("{x:.6},{y:.6}")).collect::<Vec<_>>().join(" ")
    }
}

/// Optional layers of an SVG figure.
#[derive(Default)]
pub struct Figure<'a> {
    pub diagram: Option<&'a PlanarDiagram>,
    pub curves: Option<&'a [EdgeCurve]>,
    pub sites: &'a [Point2],
}

pub fn render_svg(clip: Rect, fig: &Figure) -> String {
    let frame = Frame::new(clip);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.6} {:.6}\" width=\"{:.0}\" height=\"{:.0}\">",
        SVG_WIDTH, frame.h, SVG_WIDTH, frame.h
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{:.6}\" height=\"{:.6}\" fill=\"#ffffff\"/>", SVG_WIDTH, frame.h);
    if let Some(d) = fig.diagram {
        for (i, cell) in d.cells.iter().enumerate() {
            let mut rings: Vec<&[Point2]> = vec![&cell.polygon];
            rings.extend(cell.extra_rings.iter().map(|r| r.as_slice()));
            if rings.iter().all(|r| r.len() < 3) {
                continue;
            }
            let color = PALETTE[if cell.sites.len() == 1 { cell.sites[0] } else { i } % PALETTE.len()];
            let _ = writeln!(
                s,
                "<path class=\"cell\" d=\"{}\" fill=\"{color}\" fill-rule=\"evenodd\" stroke=\"#000000\" stroke-width=\"1\"/>",
                frame.path(&rings)
            );
        }
    }
    if let Some(curves) = fig.curves {
        for c in curves {
            let _ = writeln!(
                s,
                "<polyline class=\"edge\" points=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"/>",
                frame.polyline(&c.points)
            );
        }
    }
    for &p in fig.sites {
        let (x, y) = frame.map(p);
        let _ = writeln!(s, "<circle class=\"site\" cx=\"{x:.6}\" cy=\"{y:.6}\" r=\"4\" fill=\"#000000\"/>");
    }
    s.push_str("</svg>\n");
    s
}

fn hex_rgb(hex: &str) -> [u8; 3] {
    let v = u32::from_str_radix(hex.trim_start_matches('#'), 16).unwrap_or(0);
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

/// Binary PPM of the labels in palette colors; unlabeled pixels are white.
/// The first pixel written is the clip's top-left corner.
pub fn render_ppm(r: &RasterLabels) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", r.width, r.height).into_bytes();
    for &l in &r.labels {
        let rgb = if l == NO_LABEL { [255, 255, 255] } else { hex_rgb(PALETTE[l as usize % PALETTE.len()]) };
        out.extend_from_slice(&rgb);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_parsing() {
        let pts = parse_points_csv("# x,y\n0.1, 0.2\n\n0.3,0.4\n").unwrap();
        assert_eq!(pts, vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        assert!(matches!(parse_points_csv(""), Err(CliError::Parse { .. })));
        match parse_points_csv("0.1,0.2\n0.3,abc\n") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_points_csv("1,2\n3\n").is_err());
    }

    #[test]
    fn ppm_starts_at_the_top_left() {
        let clip = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let r = RasterLabels { width: 2, height: 2, clip, labels: vec![1, 0, 0, NO_LABEL] };
        let ppm = render_ppm(&r);
        let header = b"P6\n2 2\n255\n".len();
        assert_eq!(&ppm[header..header + 3], &hex_rgb(PALETTE[1]));
        assert_eq!(&ppm[ppm.len() - 3..], &[255, 255, 255]);
    }

    #[test]
    fn svg_maps_clip_corners_to_the_viewbox() {
        let frame = Frame::new(Rect::new(0.0, 0.0, 2.0, 1.0).unwrap());
        assert_eq!(frame.map([0.0, 1.0]), (0.0, 0.0));
        assert_eq!(frame.map([2.0, 0.0]), (1000.0, 500.0));
    }
}
