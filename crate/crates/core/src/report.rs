//! Final verdict, the text report, and the SVG region plot.
//!
//! The text output reproduces the established report format line for line
//! (including the legacy backend-configuration notice), so existing output
//! scrapers keep working; floats are printed with six decimals.

use std::io::{self, Write};
use std::path::Path;

use crate::dp::KStepGraph;
use crate::graph::OneStepGraph;
use crate::grid::{grid_box, grids_overlapping_interior, GridSet};
use crate::model::Model;
use crate::scalar::Scalar;

/// Safety verdict for the initial box.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<S> {
    /// Measure of the initial box itself.
    pub initial_area: S,
    /// Measure of the part of the initial box covered by safe grids.
    pub intersection_area: S,
    /// True iff every grid the (closed) initial box touches is safe and the
    /// box does not leave the safe set.
    pub safe: bool,
}

/// Checks the initial box against the safe grid set.
///
/// The covering uses proper (interior) overlap: a state on a shared grid
/// face is contained in the face's properly-overlapping neighbor cell, so
/// the verdict stays sound while boxes whose boundary coincides with grid
/// lines are not penalized for measure-zero contact.
pub fn check_initial<S: Scalar>(model: &Model<S>, gamma_i: &GridSet) -> Verdict<S> {
    let covering = grids_overlapping_interior(model, &model.initial_box);
    let outside = !model.safe_box.contains(&model.initial_box);
    let safe = !outside && covering.is_subset_of(gamma_i);

    let initial_area = model
        .initial_box
        .iter()
        .fold(S::one(), |acc, iv| acc * iv.width());

    let mut inside = covering;
    inside.intersect_with(gamma_i);
    let mut intersection_area = S::zero();
    for g in inside.iter() {
        let cell = grid_box(model, g);
        let mut piece = S::one();
        for j in 0..model.state_dim {
            let lo = cell[j].lo.max(model.initial_box[j].lo);
            let hi = cell[j].hi.min(model.initial_box[j].hi);
            piece = piece * (hi - lo).max(S::zero());
        }
        intersection_area = intersection_area + piece;
    }

    Verdict {
        initial_area,
        intersection_area,
        safe,
    }
}

/// Everything the text report needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub one_step_edges: u64,
    pub start_region: usize,
    pub end_region: usize,
    pub k_step_edges: u64,
    pub safe_region: usize,
    pub initial_area: f64,
    pub intersection_area: f64,
    pub safe: bool,
}

impl RunStats {
    pub fn new<S: Scalar>(
        g1: &OneStepGraph,
        gk: &KStepGraph,
        gamma_i: &GridSet,
        verdict: &Verdict<S>,
    ) -> Self {
        RunStats {
            one_step_edges: g1.edge_count(),
            start_region: gk.start_size,
            end_region: gk.end_size,
            k_step_edges: gk.edge_count,
            safe_region: gamma_i.count(),
            initial_area: verdict.initial_area.to_f64().unwrap_or(f64::NAN),
            intersection_area: verdict.intersection_area.to_f64().unwrap_or(f64::NAN),
            safe: verdict.safe,
        }
    }
}

pub const LINE_PARSING: &str = "[Info] Parsing model.";
pub const LINE_CONFIG: &str = "[Info] Building FLOW* configuration.";
pub const LINE_GRIDS: &str = "[Info] Building grids.";
pub const LINE_ONE_STEP: &str = "[Info] Building one-step graph.";
pub const LINE_K_STEP: &str = "[Info] Building K-step graph.";
pub const LINE_CLOSED: &str = "[Info] Finding the largest closed subgraph.";
pub const LINE_AREA: &str = "[Info] Calculating area.";

pub fn progress_line(done: usize, total: usize) -> String {
    let pct = 100.0 * done as f64 / total.max(1) as f64;
    format!("       Process: {pct:6.2}%")
}

pub fn edges_line(edges: u64) -> String {
    format!("[Success] Number of edges: {edges}")
}

pub fn k_step_lines(start_region: usize, end_region: usize, edges: u64) -> [String; 3] {
    [
        format!("[Success] Start Region Size: {start_region}"),
        format!("          End Region: {end_region}"),
        format!("          Number of Edges: {edges}"),
    ]
}

pub fn safe_region_line(size: usize) -> String {
    format!("[Success] Safe Initial Region Size: {size}")
}

pub fn area_lines(initial_area: f64, intersection_area: f64, safe: bool) -> [String; 3] {
    [
        format!("       Initial state region: {initial_area:.6}"),
        format!("       Grids Intersection:   {intersection_area:.6}"),
        format!("       Result: {}", if safe { "safe" } else { "unsafe" }),
    ]
}

/// The full report block, exactly as the pipeline streams it.
pub fn render_text(stats: &RunStats, total_grids: usize) -> String {
    let mut out = String::new();
    for line in [LINE_PARSING, LINE_CONFIG, LINE_GRIDS, LINE_ONE_STEP] {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&progress_line(total_grids, total_grids));
    out.push('\n');
    out.push_str(&edges_line(stats.one_step_edges));
    out.push('\n');
    out.push_str(LINE_K_STEP);
    out.push('\n');
    for line in k_step_lines(stats.start_region, stats.end_region, stats.k_step_edges) {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(LINE_CLOSED);
    out.push('\n');
    out.push_str(&safe_region_line(stats.safe_region));
    out.push('\n');
    out.push_str(LINE_AREA);
    out.push('\n');
    for line in area_lines(stats.initial_area, stats.intersection_area, stats.safe) {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn fmt_coord(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

/// Renders the region plot: locally safe grids hatched, safe initial grids
/// solid green, the initial box as a blue outline. One dimension draws as a
/// horizontal bar. Supported for 1- and 2-dimensional state spaces.
pub fn render_svg<S: Scalar>(
    model: &Model<S>,
    gamma_s: &GridSet,
    gamma_i: &GridSet,
    path: &Path,
) -> io::Result<()> {
    assert!(model.state_dim <= 2, "svg rendering supports d <= 2");
    let width = 640.0;
    let height = if model.state_dim == 2 { 640.0 } else { 220.0 };
    let (ml, mr, mt, mb) = (70.0, 25.0, 25.0, 60.0);
    let pw = width - ml - mr;
    let ph = height - mt - mb;

    let x_axis = &model.safe_box[0];
    let x_lo = x_axis.lo.to_f64().unwrap();
    let x_hi = x_axis.hi.to_f64().unwrap();
    let sx = move |x: f64| ml + (x - x_lo) / (x_hi - x_lo) * pw;

    // For d = 1 the vertical extent is a fixed band.
    let (y_lo, y_hi) = if model.state_dim == 2 {
        (
            model.safe_box[1].lo.to_f64().unwrap(),
            model.safe_box[1].hi.to_f64().unwrap(),
        )
    } else {
        (0.0, 1.0)
    };
    let sy = move |y: f64| mt + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(
        "  <defs>\n    <pattern id=\"hatch\" width=\"6\" height=\"6\" \
         patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">\n      \
         <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#777777\" stroke-width=\"1.5\"/>\n    \
         </pattern>\n  </defs>\n",
    );
    svg.push_str(&format!(
        "  <rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"white\" \
         stroke=\"black\" stroke-width=\"1\"/>\n"
    ));

    let band = if model.state_dim == 2 {
        None
    } else {
        Some((0.3, 0.7))
    };
    for v in gamma_s.iter() {
        let cell = grid_box(model, v);
        let cx0 = sx(cell[0].lo.to_f64().unwrap());
        let cx1 = sx(cell[0].hi.to_f64().unwrap());
        let (cy0, cy1) = match band {
            None => (
                sy(cell[1].hi.to_f64().unwrap()),
                sy(cell[1].lo.to_f64().unwrap()),
            ),
            Some((lo, hi)) => (sy(hi), sy(lo)),
        };
        let fill = if gamma_i.contains(v) {
            "#3cb054"
        } else {
            "url(#hatch)"
        };
        svg.push_str(&format!(
            "  <rect class=\"cell\" x=\"{cx0:.2}\" y=\"{cy0:.2}\" width=\"{:.2}\" \
             height=\"{:.2}\" fill=\"{fill}\"/>\n",
            cx1 - cx0,
            cy1 - cy0
        ));
    }

    // Initial box outline.
    let ix0 = sx(model.initial_box[0].lo.to_f64().unwrap());
    let ix1 = sx(model.initial_box[0].hi.to_f64().unwrap());
    let (iy0, iy1) = match band {
        None => (
            sy(model.initial_box[1].hi.to_f64().unwrap()),
            sy(model.initial_box[1].lo.to_f64().unwrap()),
        ),
        Some((lo, hi)) => (sy(hi), sy(lo)),
    };
    svg.push_str(&format!(
        "  <rect class=\"initial\" x=\"{ix0:.2}\" y=\"{iy0:.2}\" width=\"{:.2}\" \
         height=\"{:.2}\" fill=\"none\" stroke=\"#1040c0\" stroke-width=\"2\"/>\n",
        ix1 - ix0,
        iy1 - iy0
    ));

    // Axis labels: variable names plus the extreme coordinates.
    let x_name = &model.state_names[0];
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"16\">{x_name}</text>\n",
        ml + pw / 2.0,
        height - 14.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{ml:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        height - 34.0,
        fmt_coord(x_lo)
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        ml + pw,
        height - 34.0,
        fmt_coord(x_hi)
    ));
    if model.state_dim == 2 {
        let y_name = &model.state_names[1];
        svg.push_str(&format!(
            "  <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"16\" \
             transform=\"rotate(-90 18 {:.1})\">{y_name}</text>\n",
            mt + ph / 2.0,
            mt + ph / 2.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
            ml - 6.0,
            mt + ph,
            fmt_coord(y_lo)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
            ml - 6.0,
            mt + 10.0,
            fmt_coord(y_hi)
        ));
    }
    svg.push_str("</svg>\n");

    let mut file = std::fs::File::create(path)?;
    file.write_all(svg.as_bytes())?;
    Ok(())
}
