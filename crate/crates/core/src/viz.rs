//! SVG scatter renderings of 2-D projections with class colors, highlight
//! strokes, and optional centroid markers.

use crate::dataio::LabelVector;
use crate::error::{Error, Result};
use crate::projection::Projection2D;

/// Everything needed to render one scatter plot.
#[derive(Debug, Clone)]
pub struct PlotSpec<'a> {
    pub points: &'a Projection2D,
    pub labels: &'a LabelVector,
    /// Indices drawn with a highlight stroke (e.g. flipped examples).
    pub highlight: Vec<usize>,
    /// One hex color per class; must cover `labels.num_classes()`.
    pub palette: Vec<String>,
    pub width: u32,
    pub height: u32,
    pub legend: bool,
    /// Extra cross markers in data coordinates (e.g. subcluster centroids).
    pub centroids: Vec<[f64; 2]>,
}

impl<'a> PlotSpec<'a> {
    pub fn new(points: &'a Projection2D, labels: &'a LabelVector) -> Self {
        Self {
            points,
            labels,
            highlight: Vec::new(),
            palette: default_palette(labels.num_classes()),
            width: 800,
            height: 600,
            legend: false,
            centroids: Vec::new(),
        }
    }
}

/// Tab-10 style palette cycled out to `num_classes` entries.
pub fn default_palette(num_classes: usize) -> Vec<String> {
    const BASE: [&str; 10] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf",
    ];
    (0..num_classes)
        .map(|c| BASE[c % BASE.len()].to_string())
        .collect()
}

/// Affine map from data coordinates into the viewport (y flipped), with a 5%
/// margin on each side. Degenerate ranges collapse to the viewport center.
#[derive(Debug, Clone, Copy)]
pub struct ViewTransform {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub margin: [f64; 2],
    pub inner: [f64; 2],
}

impl ViewTransform {
    fn fit(points: &Projection2D, width: u32, height: u32) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points.points() {
            for axis in 0..2 {
                min[axis] = min[axis].min(p[axis]);
                max[axis] = max[axis].max(p[axis]);
            }
        }
        Self {
            min,
            max,
            margin: [0.05 * f64::from(width), 0.05 * f64::from(height)],
            inner: [0.9 * f64::from(width), 0.9 * f64::from(height)],
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let map = |axis: usize, flip: bool| {
            let range = self.max[axis] - self.min[axis];
            if range == 0.0 {
                return self.margin[axis] + self.inner[axis] / 2.0;
            }
            let t = (p[axis] - self.min[axis]) / range;
            let t = if flip { 1.0 - t } else { t };
            self.margin[axis] + t * self.inner[axis]
        };
        [map(0, false), map(1, true)]
    }

    /// Uniform scale factors (pixels per data unit) per axis.
    pub fn scale(&self) -> [f64; 2] {
        [
            if self.max[0] > self.min[0] {
                self.inner[0] / (self.max[0] - self.min[0])
            } else {
                0.0
            },
            if self.max[1] > self.min[1] {
                self.inner[1] / (self.max[1] - self.min[1])
            } else {
                0.0
            },
        ]
    }
}

/// Renders the scatter as a standalone SVG 1.1 document. Output text is a
/// pure function of the spec.
pub fn render_scatter(spec: &PlotSpec) -> Result<String> {
    let n = spec.points.len();
    if n == 0 {
        return Err(Error::Argument("cannot render an empty point set".into()));
    }
    if spec.labels.len() != n {
        return Err(Error::Argument(format!(
            "labels have length {} but projection has {n} points",
            spec.labels.len()
        )));
    }
    let c = spec.labels.num_classes();
    if spec.palette.len() < c {
        return Err(Error::Argument(format!(
            "palette has {} colors for {c} classes",
            spec.palette.len()
        )));
    }
    if let Some(&bad) = spec.highlight.iter().find(|&&i| i >= n) {
        return Err(Error::Argument(format!(
            "highlight index {bad} outside [0, {n})"
        )));
    }

    let highlighted: std::collections::HashSet<usize> = spec.highlight.iter().copied().collect();
    let view = ViewTransform::fit(spec.points, spec.width, spec.height);

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = spec.width,
        h = spec.height
    ));
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        spec.width, spec.height
    ));

    for i in 0..n {
        let [x, y] = view.apply(spec.points.point(i));
        let color = &spec.palette[spec.labels.get(i)];
        if highlighted.contains(&i) {
            svg.push_str(&format!(
                "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{color}\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n"
            ));
        } else {
            svg.push_str(&format!(
                "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
        }
    }

    for &centroid in &spec.centroids {
        let [x, y] = view.apply(centroid);
        svg.push_str(&format!(
            "<path d=\"M {x0:.3} {y:.3} L {x1:.3} {y:.3} M {x:.3} {y0:.3} L {x:.3} {y1:.3}\" \
             stroke=\"#000000\" stroke-width=\"2\" fill=\"none\"/>\n",
            x0 = x - 5.0,
            x1 = x + 5.0,
            y0 = y - 5.0,
            y1 = y + 5.0,
        ));
    }

    if spec.legend {
        for class in 0..c {
            let y = 12.0 + class as f64 * 18.0;
            svg.push_str(&format!(
                "<rect class=\"legend-swatch\" x=\"8\" y=\"{y:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                spec.palette[class]
            ));
            svg.push_str(&format!(
                "<text x=\"24\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">class {class}</text>\n",
                y + 10.0
            ));
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
