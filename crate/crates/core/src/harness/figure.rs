//! Static SVG drawings of partitions, each with a CSV twin.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hp::Library;
use crate::param::ParamBox;
use crate::proximity::ProximityTree;

/// Grid resolution for rasterized proximity regions.
pub const RASTER_RESOLUTION: usize = 200;
const CANVAS: f64 = 600.0;
const MARGIN: f64 = 20.0;

pub enum FigureSource<'a> {
    Tree(&'a Library),
    Proximity(&'a ProximityTree),
}

/// Maps the two free axes of `root` onto the canvas, second axis upward.
struct Frame {
    axes: [usize; 2],
    lower: [f64; 2],
    scale: [f64; 2],
}

impl Frame {
    fn new(root: &ParamBox) -> Result<Self> {
        let free = root.free_axes();
        if free.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "partition figures need two free parameters, this domain has {}",
                free.len()
            )));
        }
        let (a0, b0) = root.interval(free[0]);
        let (a1, b1) = root.interval(free[1]);
        let unit = CANVAS / (b0 - a0).max(b1 - a1);
        Ok(Self {
            axes: [free[0], free[1]],
            lower: [a0, a1],
            scale: [unit, unit],
        })
    }

    fn width(&self, root: &ParamBox) -> f64 {
        let (a, b) = root.interval(self.axes[0]);
        (b - a) * self.scale[0]
    }

    fn height(&self, root: &ParamBox) -> f64 {
        let (a, b) = root.interval(self.axes[1]);
        (b - a) * self.scale[1]
    }

    /// Canvas rectangle `(x, y, w, h)` of a parameter rectangle.
    fn rect(&self, root: &ParamBox, x: (f64, f64), y: (f64, f64)) -> (f64, f64, f64, f64) {
        let h = self.height(root);
        let px = MARGIN + (x.0 - self.lower[0]) * self.scale[0];
        let py = MARGIN + h - (y.1 - self.lower[1]) * self.scale[1];
        (px, py, (x.1 - x.0) * self.scale[0], (y.1 - y.0) * self.scale[1])
    }
}

fn svg_open(out: &mut String, width: f64, height: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#,
        w = width + 2.0 * MARGIN,
        h = height + 2.0 * MARGIN
    )
    .unwrap();
}

/// Distinct-ish fill for leaf `k`.
fn color(k: usize) -> String {
    let hue = (k as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},55%,70%)")
}

/// Leaf rectangles of a tensor-product partition.
pub fn library_svg(library: &Library) -> Result<String> {
    let root = library.root_box();
    let frame = Frame::new(root)?;
    let mut out = String::new();
    svg_open(&mut out, frame.width(root), frame.height(root));
    for (k, leaf) in library.leaves().iter().enumerate() {
        let (x, y, w, h) = frame.rect(
            root,
            leaf.region.interval(frame.axes[0]),
            leaf.region.interval(frame.axes[1]),
        );
        writeln!(
            out,
            r##"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" fill="{}" stroke="#222" stroke-width="0.5"/>"##,
            color(k)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Raster of proximity regions; each row of equal cells becomes one rect.
pub fn proximity_svg(tree: &ProximityTree, res: usize) -> Result<String> {
    let root = tree.root_box();
    let frame = Frame::new(&root)?;
    let grid = tree.raster(res)?;
    let (a0, b0) = root.interval(frame.axes[0]);
    let (a1, b1) = root.interval(frame.axes[1]);
    let dx = (b0 - a0) / res as f64;
    let dy = (b1 - a1) / res as f64;
    let mut out = String::new();
    svg_open(&mut out, frame.width(&root), frame.height(&root));
    for (i, column) in grid.iter().enumerate() {
        let mut j = 0;
        while j < res {
            let k = column[j];
            let start = j;
            while j < res && column[j] == k {
                j += 1;
            }
            let x = (a0 + i as f64 * dx, a0 + (i + 1) as f64 * dx);
            let y = (a1 + start as f64 * dy, a1 + j as f64 * dy);
            let (px, py, w, h) = frame.rect(&root, x, y);
            writeln!(
                out,
                r#"<rect x="{px:.3}" y="{py:.3}" width="{w:.3}" height="{h:.3}" fill="{}" stroke="none"/>"#,
                color(k)
            )
            .unwrap();
        }
    }
    for leaf in tree.leaves() {
        let (px, py, _, _) = frame.rect(
            &root,
            (leaf.anchor[frame.axes[0]], 0.0),
            (0.0, leaf.anchor[frame.axes[1]]),
        );
        writeln!(out, r##"<circle cx="{px:.3}" cy="{py:.3}" r="2" fill="#000"/>"##).unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// `i, j, mu_a, mu_b, k` for every raster cell centre (1-based `k`).
pub fn proximity_raster_csv(tree: &ProximityTree, res: usize) -> Result<String> {
    let root = tree.root_box();
    let free = root.free_axes();
    let grid = tree.raster(res)?;
    let (a0, b0) = root.interval(free[0]);
    let (a1, b1) = root.interval(free[1]);
    let mut out = format!("i,j,mu_{},mu_{},k\n", free[0] + 1, free[1] + 1);
    for (i, column) in grid.iter().enumerate() {
        for (j, &k) in column.iter().enumerate() {
            let x = a0 + (b0 - a0) * (i as f64 + 0.5) / res as f64;
            let y = a1 + (b1 - a1) * (j as f64 + 0.5) / res as f64;
            writeln!(out, "{i},{j},{x},{y},{}", k + 1).unwrap();
        }
    }
    Ok(out)
}

/// Writes `<stem>.csv` and, for two free parameters, `<stem>.svg`.
/// Returns the files written.
pub fn export_partition_figure(source: FigureSource<'_>, stem: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let stem = stem.as_ref();
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    let two_free = |root: &ParamBox| root.effective_dim() == 2;
    let (csv, svg) = match source {
        FigureSource::Tree(lib) => {
            let svg = if two_free(lib.root_box()) {
                Some(library_svg(lib)?)
            } else {
                None
            };
            (lib.partition_csv(), svg)
        }
        FigureSource::Proximity(tree) => {
            if two_free(&tree.root_box()) {
                (
                    proximity_raster_csv(tree, RASTER_RESOLUTION)?,
                    Some(proximity_svg(tree, RASTER_RESOLUTION)?),
                )
            } else {
                (tree.partition_csv(), None)
            }
        }
    };
    fs::write(&csv_path, csv)?;
    let mut written = vec![csv_path];
    if let Some(svg) = svg {
        fs::write(&svg_path, svg)?;
        written.push(svg_path);
    }
    Ok(written)
}
