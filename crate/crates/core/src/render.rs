//! SVG rendering of layouts with one community highlighted.
//!
//! Nodes are dots; members of the highlighted community are black and all
//! others gray. 3D layouts are projected orthographically onto a coordinate
//! plane. Edges are left out unless asked for.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::io::{format_path, Layout};

pub const HIGHLIGHT_FILL: &str = "#000000";
pub const BACKGROUND_FILL: &str = "#a0a0a0";
const EDGE_STROKE: &str = "#d0d0d0";
/// Long side of the drawing, in SVG user units.
const CANVAS: f64 = 1000.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("layout and community files disagree on {count} labels, first: {}", .first.join(", "))]
    LabelMismatch { count: usize, first: Vec<String> },
    #[error("no community {0:?} in the community file")]
    UnknownCommunity(String),
    #[error("highlighting needs a community file")]
    MissingCommunities,
    #[error("plane {plane} needs a 3-dimensional layout, got {dim}D")]
    PlaneNeeds3d { plane: Plane, dim: usize },
    #[error("unknown plane {0:?}; use xy, xz or yz")]
    BadPlane(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Plane {
    #[default]
    Xy,
    Xz,
    Yz,
}

impl Plane {
    fn axes(self) -> (usize, usize) {
        match self {
            Plane::Xy => (0, 1),
            Plane::Xz => (0, 2),
            Plane::Yz => (1, 2),
        }
    }
}

impl std::fmt::Display for Plane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Plane::Xy => "xy",
            Plane::Xz => "xz",
            Plane::Yz => "yz",
        })
    }
}

impl FromStr for Plane {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xy" => Ok(Plane::Xy),
            "xz" => Ok(Plane::Xz),
            "yz" => Ok(Plane::Yz),
            other => Err(RenderError::BadPlane(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub plane: Plane,
    /// Community path (e.g. `3` or `3.1`); every node whose path starts
    /// with it is drawn black.
    pub highlight: Option<String>,
    /// Dot radius in SVG user units (the long side spans 1000).
    pub dot_size: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            plane: Plane::Xy,
            highlight: None,
            dot_size: 2.0,
        }
    }
}

fn in_community(path: &str, prefix: &str) -> bool {
    path == prefix
        || path
            .strip_prefix(prefix)
            .is_some_and(|rest| rest.starts_with('.'))
}

/// Draws `layout` as SVG 1.1. `communities` maps labels to paths and must
/// cover exactly the layout's labels. `edges` are label pairs; pairs with
/// an endpoint outside the layout are skipped.
pub fn render_svg(
    layout: &Layout,
    communities: Option<&[(String, Vec<usize>)]>,
    edges: Option<&[(String, String)]>,
    opts: &RenderOptions,
) -> Result<String, RenderError> {
    let (a, b) = opts.plane.axes();
    if layout.dim < 3 && opts.plane != Plane::Xy {
        return Err(RenderError::PlaneNeeds3d {
            plane: opts.plane,
            dim: layout.dim,
        });
    }

    let paths: Option<HashMap<&str, String>> = communities.map(|rows| {
        rows.iter()
            .map(|(l, p)| (l.as_str(), format_path(p)))
            .collect()
    });
    if let Some(paths) = &paths {
        let layout_labels: HashSet<&str> = layout.labels.iter().map(String::as_str).collect();
        let mut offenders: Vec<&str> = layout
            .labels
            .iter()
            .map(String::as_str)
            .filter(|l| !paths.contains_key(l))
            .collect();
        offenders.extend(
            communities
                .into_iter()
                .flatten()
                .map(|(l, _)| l.as_str())
                .filter(|l| !layout_labels.contains(l)),
        );
        if !offenders.is_empty() {
            return Err(RenderError::LabelMismatch {
                count: offenders.len(),
                first: offenders.iter().take(10).map(|s| s.to_string()).collect(),
            });
        }
    }

    let highlighted: Vec<bool> = match (&opts.highlight, &paths) {
        (None, _) => vec![true; layout.labels.len()],
        (Some(_), None) => return Err(RenderError::MissingCommunities),
        (Some(h), Some(paths)) => {
            let marks: Vec<bool> = layout
                .labels
                .iter()
                .map(|l| in_community(&paths[l.as_str()], h))
                .collect();
            if !marks.contains(&true) {
                return Err(RenderError::UnknownCommunity(h.clone()));
            }
            marks
        }
    };

    // Screen coordinates: first axis to the right, second axis up.
    let projected: Vec<(f64, f64)> = layout
        .coords
        .iter()
        .map(|c| (c[a], -c.get(b).copied().unwrap_or(0.0)))
        .collect();
    let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(u, v) in &projected {
        lo_u = lo_u.min(u);
        hi_u = hi_u.max(u);
        lo_v = lo_v.min(v);
        hi_v = hi_v.max(v);
    }
    let span = (hi_u - lo_u).max(hi_v - lo_v);
    let span = if span > 0.0 { span } else { 1.0 };
    let margin = 0.05 * span;
    let scale = CANVAS / (span + 2.0 * margin);
    let width = (hi_u - lo_u + 2.0 * margin) * scale;
    let height = (hi_v - lo_v + 2.0 * margin) * scale;
    let screen = |(u, v): (f64, f64)| ((u - lo_u + margin) * scale, (v - lo_v + margin) * scale);

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         viewBox=\"0 0 {width:.2} {height:.2}\" width=\"{width:.0}\" height=\"{height:.0}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>"
    );

    if let Some(edges) = edges {
        let index: HashMap<&str, usize> = layout
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let _ = writeln!(svg, "<g stroke=\"{EDGE_STROKE}\" stroke-width=\"0.5\">");
        for (u, v) in edges {
            if let (Some(&i), Some(&j)) = (index.get(u.as_str()), index.get(v.as_str())) {
                let (x1, y1) = screen(projected[i]);
                let (x2, y2) = screen(projected[j]);
                let _ = writeln!(
                    svg,
                    "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>"
                );
            }
        }
        svg.push_str("</g>\n");
    }

    // Gray dots first so highlighted ones stay on top.
    for pass in [false, true] {
        let fill = if pass {
            HIGHLIGHT_FILL
        } else {
            BACKGROUND_FILL
        };
        for (i, &p) in projected.iter().enumerate() {
            if highlighted[i] == pass {
                let (x, y) = screen(p);
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\" fill=\"{fill}\"/>",
                    opts.dot_size
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
