use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "step,eval_return_mean,eval_return_std,log_alpha,q_loss,pi_loss,traj_entropy_rate,state_entropy";

/// One evaluation point. Losses are averaged over the updates since the
/// previous row and are NaN when there were none.
#[derive(Clone, Copy, Debug)]
pub struct RunRow {
    pub step: usize,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    pub log_alpha: f64,
    pub q_loss: f64,
    pub pi_loss: f64,
    pub traj_entropy_rate: f64,
    pub state_entropy: f64,
}

impl RunRow {
    fn values(&self) -> [f64; 7] {
        [
            self.eval_return_mean,
            self.eval_return_std,
            self.log_alpha,
            self.q_loss,
            self.pi_loss,
            self.traj_entropy_rate,
            self.state_entropy,
        ]
    }
}

/// Bitwise equality, so rows holding NaN compare equal to themselves.
impl PartialEq for RunRow {
    fn eq(&self, other: &Self) -> bool {
        self.step == other.step
            && self
                .values()
                .iter()
                .zip(other.values().iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    rows: Vec<RunRow>,
}

impl RunLog {
    pub fn new() -> Self {
        RunLog::default()
    }

    /// Appends a row; steps must strictly increase.
    pub fn push(&mut self, row: RunRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::Structure(format!(
                    "log step {} does not follow {}",
                    row.step, last.step
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[RunRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval_return_mean).collect()
    }

    /// Mean evaluation return over the last `window` rows.
    pub fn final_window_mean(&self, window: usize) -> Option<f64> {
        if self.rows.is_empty() || window == 0 {
            return None;
        }
        let tail = &self.rows[self.rows.len().saturating_sub(window)..];
        Some(tail.iter().map(|r| r.eval_return_mean).sum::<f64>() / tail.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            write!(out, "{}", r.step).unwrap();
            for v in r.values() {
                write!(out, ",{}", fmt_value(v)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == CSV_HEADER => {}
            _ => return Err(Error::Parse("missing or unexpected CSV header".into())),
        }
        let mut log = RunLog::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Parse(format!("row {}: expected 8 fields, got {}", n + 1, fields.len())));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number `{}`", n + 1, fields[i])))
            };
            let step = fields[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad step `{}`", n + 1, fields[0])))?;
            log.push(RunRow {
                step,
                eval_return_mean: num(1)?,
                eval_return_std: num(2)?,
                log_alpha: num(3)?,
                q_loss: num(4)?,
                pi_loss: num(5)?,
                traj_entropy_rate: num(6)?,
                state_entropy: num(7)?,
            })?;
        }
        Ok(log)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Seventeen significant digits: enough to read every value back exactly.
pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Trailing moving average: entry `i` is the mean of the last `window`
/// values up to and including `i`.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Minimal SVG line chart of several named series over shared x values.
pub fn svg_chart(title: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLOURS: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = bounds(x.iter().filter(finite).copied());
    let (y0, y1) = bounds(series.iter().flat_map(|(_, ys)| ys.iter().filter(finite).copied()));
    let sx = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">"#).unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title)).unwrap();
    writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    )
    .unwrap();
    for (v, y) in [(y0, H - PAD), (y1, PAD)] {
        writeln!(out, r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{v:.3}</text>"#, PAD - 4.0).unwrap();
    }
    for (v, xx) in [(x0, PAD), (x1, W - PAD)] {
        writeln!(out, r#"<text x="{xx}" y="{}" font-size="10" text-anchor="middle">{v}</text>"#, H - PAD + 14.0).unwrap();
    }
    for (i, (name, ys)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", sx(a), sy(b)))
            .collect();
        writeln!(out, r#"<polyline points="{}" stroke="{colour}" fill="none"/>"#, pts.join(" ")).unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{colour}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 12.0 * i as f64,
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
