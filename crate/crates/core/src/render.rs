//! Icicle dendrograms of a cluster hierarchy, annotated with matched classes.
//!
//! The vertical axis is λ = 1/ε, growing downwards. Each node is drawn as a
//! stack of rectangles whose widths follow its member count as points are
//! shed. Nodes born at ε = ∞ start at λ = 0 and nodes that survive to ε = 0
//! stop at the λ cap.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_io::DivisionKind;
use crate::hierarchy::{ClusterHierarchy, ClusterNode};
use crate::matching::{LimitingFactor, MatchPair, MatchReport};

pub const DEFAULT_DISPLAY_SIZE_THRESHOLD: usize = 800;
pub const DEFAULT_MIN_DISPLAY: f64 = 0.25;
/// The cap sits this far beyond the largest finite λ.
pub const LAMBDA_CAP_FACTOR: f64 = 1.05;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
    "#7f7f7f",
];

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("hierarchy has no nodes")]
    EmptyHierarchy,
    #[error("report does not belong to this hierarchy: {0}")]
    Mismatch(String),
    #[error("invalid render settings: {0}")]
    Settings(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    /// Nodes with at most this many members are hidden (the root never is).
    pub display_size_threshold: usize,
    /// Pairs scoring below this get no label.
    pub min_display: f64,
    /// Explicit λ cap; derived from the hierarchy when `None`.
    pub lambda_cap: Option<f64>,
    pub width: f64,
    pub height: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            display_size_threshold: DEFAULT_DISPLAY_SIZE_THRESHOLD,
            min_display: DEFAULT_MIN_DISPLAY,
            lambda_cap: None,
            width: 1200.0,
            height: 800.0,
        }
    }
}

/// Stable 64-bit FNV-1a; `std`'s hasher makes no cross-version promise.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn class_color(class: &str) -> &'static str {
    PALETTE[(fnv1a(class) % PALETTE.len() as u64) as usize]
}

/// `pre: 0.65` / `rec: 0.96`, the value being the limiting score.
pub fn annotation_label(pair: &MatchPair) -> String {
    let prefix = match pair.limiting_factor {
        LimitingFactor::Precision => "pre",
        LimitingFactor::Recall => "rec",
        LimitingFactor::Balanced => "pre/rec",
    };
    format!("{prefix}: {:.2}", pair.l_score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub size: usize,
    /// Horizontal center in member units, the root spanning `[0, n_root]`.
    pub x_center: f64,
    /// `(λ, width)` breakpoints; each width holds until the next λ. The last
    /// breakpoint is the node's death and carries its remaining width.
    pub profile: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub cluster_id: usize,
    pub rank: usize,
    pub class: String,
    pub kind: DivisionKind,
    pub label: String,
    pub score: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramLayout {
    pub n: usize,
    pub lambda_cap: f64,
    pub display_size_threshold: usize,
    pub min_display: f64,
    pub nodes: Vec<NodeLayout>,
    pub annotations: Vec<Annotation>,
}

impl DendrogramLayout {
    pub fn node(&self, id: usize) -> Option<&NodeLayout> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn lambda_of(eps: f64, cap: f64) -> f64 {
    if eps == f64::INFINITY {
        0.0
    } else if eps <= 0.0 {
        cap
    } else {
        (1.0 / eps).min(cap)
    }
}

fn max_finite_lambda(h: &ClusterHierarchy) -> Option<f64> {
    h.nodes
        .values()
        .flat_map(|n| {
            [n.birth_eps, n.death_eps]
                .into_iter()
                .chain(n.shed.iter().map(|s| s.eps))
        })
        .filter(|e| e.is_finite() && *e > 0.0)
        .map(|e| 1.0 / e)
        .max_by(f64::total_cmp)
}

fn profile(node: &ClusterNode, cap: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = node
        .width_steps()
        .into_iter()
        .map(|(eps, w)| (lambda_of(eps, cap), w))
        .collect();
    let last = *out.last().expect("width_steps is never empty");
    if node.shed.last().map(|s| s.eps) != Some(node.death_eps) {
        out.push((lambda_of(node.death_eps, cap), last.1));
    }
    out
}

/// Lays out the display-pruned hierarchy and collects label records.
pub fn layout(
    h: &ClusterHierarchy,
    report: &MatchReport,
    spec: &RenderSpec,
) -> Result<DendrogramLayout, RenderError> {
    if h.is_empty() || h.node(h.root).is_none() {
        return Err(RenderError::EmptyHierarchy);
    }
    if report.n != h.n {
        return Err(RenderError::Mismatch(format!(
            "report covers {} points, hierarchy {}",
            report.n, h.n
        )));
    }
    if let Some(p) = report.pairs.iter().find(|p| h.node(p.cluster_id).is_none()) {
        return Err(RenderError::Mismatch(format!("unknown cluster id {}", p.cluster_id)));
    }
    if !(spec.min_display >= 0.0) {
        return Err(RenderError::Settings("min_display must be non-negative".into()));
    }
    let shown = h.prune_for_display(spec.display_size_threshold);
    let max_lambda = max_finite_lambda(&shown);
    let cap = match (spec.lambda_cap, max_lambda) {
        (Some(c), Some(m)) if !(c > m) => {
            return Err(RenderError::Settings(format!("λ cap {c} must exceed the largest finite λ {m}")))
        }
        (Some(c), _) if !(c.is_finite() && c > 0.0) => {
            return Err(RenderError::Settings("λ cap must be positive and finite".into()))
        }
        (Some(c), _) => c,
        (None, Some(m)) => LAMBDA_CAP_FACTOR * m,
        (None, None) => 1.0,
    };

    let mut centers = BTreeMap::new();
    let root = shown.node(shown.root).expect("pruning keeps the root");
    let mut stack = vec![(root.id, root.size as f64 / 2.0)];
    while let Some((id, center)) = stack.pop() {
        centers.insert(id, center);
        let node = &shown.nodes[&id];
        let total: usize = node.children.iter().map(|c| shown.nodes[c].size).sum();
        let mut left = center - total as f64 / 2.0;
        for c in &node.children {
            let size = shown.nodes[c].size as f64;
            stack.push((*c, left + size / 2.0));
            left += size;
        }
    }

    let nodes = shown
        .nodes
        .values()
        .map(|node| NodeLayout {
            id: node.id,
            parent: node.parent,
            children: node.children.clone(),
            size: node.size,
            x_center: centers[&node.id],
            profile: profile(node, cap),
        })
        .collect();

    let annotations = report
        .pairs
        .iter()
        .filter(|p| p.score >= spec.min_display && shown.node(p.cluster_id).is_some())
        .map(|p| Annotation {
            cluster_id: p.cluster_id,
            rank: p.rank,
            class: p.class.clone(),
            kind: p.kind,
            label: annotation_label(p),
            score: p.score,
            color: class_color(&p.class).to_string(),
        })
        .collect();

    Ok(DendrogramLayout {
        n: h.n,
        lambda_cap: cap,
        display_size_threshold: spec.display_size_threshold,
        min_display: spec.min_display,
        nodes,
        annotations,
    })
}

pub fn render_json(
    h: &ClusterHierarchy,
    report: &MatchReport,
    spec: &RenderSpec,
) -> Result<String, RenderError> {
    layout(h, report, spec)?
        .to_json()
        .map_err(|e| RenderError::Settings(e.to_string()))
}

fn escape_xml(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_svg(
    h: &ClusterHierarchy,
    report: &MatchReport,
    spec: &RenderSpec,
) -> Result<String, RenderError> {
    let lay = layout(h, report, spec)?;
    let (margin_left, margin_top, margin_right, margin_bottom) = (70.0, 40.0, 260.0, 30.0);
    let plot_w = (spec.width - margin_left - margin_right).max(1.0);
    let plot_h = (spec.height - margin_top - margin_bottom).max(1.0);
    let root_size = lay.node(h.root).map_or(1, |n| n.size).max(1) as f64;
    let sx = plot_w / root_size;
    let y = |lambda: f64| margin_top + lambda / lay.lambda_cap * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#,
        w = spec.width,
        h = spec.height
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{:.0}" height="{:.0}" fill="white"/>"#, spec.width, spec.height);

    // λ axis
    let _ = writeln!(
        svg,
        r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/>"#,
        x = margin_left - 10.0,
        y0 = y(0.0),
        y1 = y(lay.lambda_cap)
    );
    for t in 0..=5 {
        let lambda = lay.lambda_cap * t as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="end">{lambda:.3}</text>"#,
            x = margin_left - 14.0,
            y = y(lambda) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle">λ = 1/ε</text>"#,
        x = margin_left - 10.0,
        y = margin_top - 16.0
    );

    for node in &lay.nodes {
        let _ = writeln!(svg, r#"<g class="node" data-id="{}">"#, node.id);
        for step in node.profile.windows(2) {
            let ((l0, w), (l1, _)) = (step[0], step[1]);
            let height = y(l1) - y(l0);
            if w == 0 || height <= 0.0 {
                continue;
            }
            let width = w as f64 * sx;
            let _ = writeln!(
                svg,
                r##"<rect x="{x:.3}" y="{y:.3}" width="{width:.3}" height="{height:.3}" fill="#b0c4de" stroke="#4a5a70" stroke-width="0.5"/>"##,
                x = margin_left + node.x_center * sx - width / 2.0,
                y = y(l0),
            );
        }
        let _ = writeln!(svg, "</g>");
    }

    let mut stacked: BTreeMap<usize, usize> = BTreeMap::new();
    for a in &lay.annotations {
        let Some(node) = lay.node(a.cluster_id) else { continue };
        let line = stacked.entry(a.cluster_id).or_insert(0);
        let width = node.profile[0].1 as f64 * sx;
        let _ = writeln!(
            svg,
            r#"<text class="annotation" x="{x:.3}" y="{y:.3}" fill="{color}">{class} {label}</text>"#,
            x = margin_left + node.x_center * sx + width / 2.0 + 4.0,
            y = y(node.profile[0].0) + 12.0 * (*line as f64 + 1.0),
            color = a.color,
            class = escape_xml(&a.class),
            label = escape_xml(&a.label),
        );
        *line += 1;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
