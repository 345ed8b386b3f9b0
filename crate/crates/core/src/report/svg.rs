use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::kde::KdeCurve;
use super::table::Table;
use crate::corpus::PromptRecord;
use crate::error::{Error, Result};
use crate::reduce::Embedding2D;
use crate::scalar::Scalar;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScatterFiles {
    pub plot: PathBuf,
    pub table: PathBuf,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                (l.min(v), h.max(v))
            });
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <title>{}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        escape(title)
    )
}

fn legend(s: &mut String, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>",
            WIDTH - 160.0,
            y,
            PALETTE[i % PALETTE.len()],
            WIDTH - 145.0,
            y + 9.0,
            escape(name)
        );
    }
}

/// Writes a scatter of the layout coloured by corpus, with one text anchor
/// per labeled cluster at the cluster mean, and a sidecar table
/// (`id,x,y,cluster,label,corpus`) next to it with a `.csv` extension.
pub fn emit_scatter<T: Scalar>(
    layout: &Embedding2D<T>,
    assignments: &[usize],
    labels: &BTreeMap<usize, String>,
    records: &[PromptRecord],
    path: &Path,
) -> Result<ScatterFiles> {
    let n = layout.len();
    if assignments.len() != n || records.len() != n {
        return Err(Error::Shape(format!(
            "{n} layout rows, {} assignments, {} records",
            assignments.len(),
            records.len()
        )));
    }
    if let Some((id, r)) = layout
        .row_ids
        .iter()
        .zip(records)
        .find(|(id, r)| **id != r.id)
    {
        return Err(Error::IdMismatch(format!(
            "layout row {id} is paired with record {}",
            r.id
        )));
    }
    let xy: Vec<(f64, f64)> = layout
        .coords
        .iter_rows()
        .map(|r| (r[0].as_f64(), r[1].as_f64()))
        .collect();
    let corpora: Vec<String> = records
        .iter()
        .map(|r| r.corpus_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let colour: BTreeMap<&str, &str> = corpora
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), PALETTE[i % PALETTE.len()]))
        .collect();
    let frame = Frame::fit(xy.iter().map(|p| p.0), xy.iter().map(|p| p.1));

    let mut s = header(&format!("{} layout", layout.params.tag()));
    s.push_str("<g class=\"points\" fill-opacity=\"0.7\">\n");
    for (&(x, y), r) in xy.iter().zip(records) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>",
            frame.px(x),
            frame.py(y),
            colour[r.corpus_id.as_str()]
        );
    }
    s.push_str("</g>\n<g class=\"labels\" font-family=\"sans-serif\" font-size=\"14\" font-weight=\"bold\" text-anchor=\"middle\" stroke=\"white\" stroke-width=\"3\" paint-order=\"stroke\">\n");
    let mut sums: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for (&(x, y), &c) in xy.iter().zip(assignments) {
        let e = sums.entry(c).or_default();
        e.0 += x;
        e.1 += y;
        e.2 += 1;
    }
    for (c, (sx, sy, m)) in &sums {
        if let Some(label) = labels.get(c) {
            let (mx, my) = (sx / *m as f64, sy / *m as f64);
            let _ = writeln!(
                s,
                "<text class=\"label-anchor\" data-cluster=\"{c}\" x=\"{:.2}\" y=\"{:.2}\">{}</text>",
                frame.px(mx),
                frame.py(my),
                escape(label)
            );
        }
    }
    s.push_str("</g>\n");
    legend(&mut s, &corpora);
    s.push_str("</svg>\n");
    std::fs::write(path, s).map_err(|e| Error::io(path, e))?;

    let mut t = Table::new(&["id", "x", "y", "cluster", "label", "corpus"]);
    for (i, r) in records.iter().enumerate() {
        t.push(vec![
            r.id.clone(),
            xy[i].0.to_string(),
            xy[i].1.to_string(),
            assignments[i].to_string(),
            labels.get(&assignments[i]).cloned().unwrap_or_default(),
            r.corpus_id.clone(),
        ]);
    }
    let table = path.with_extension("csv");
    t.write(&table)?;
    Ok(ScatterFiles {
        plot: path.to_path_buf(),
        table,
    })
}

/// Line plot of one or more density curves.
pub fn emit_kde_plot(curves: &[KdeCurve], path: &Path) -> Result<()> {
    let frame = Frame::fit(
        curves.iter().flat_map(|c| c.grid.iter().copied()),
        curves
            .iter()
            .flat_map(|c| c.density.iter().copied())
            .chain([0.0]),
    );
    let mut s = header("prompt length density");
    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c
            .grid
            .iter()
            .zip(&c.density)
            .map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline class=\"kde\" data-name=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            escape(&c.name),
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    legend(
        &mut s,
        &curves.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">prompt length (characters)</text>",
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    s.push_str("</svg>\n");
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
