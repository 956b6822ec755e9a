//! Text summaries and standalone SVG plots of persisted runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::table_from_csv;
use crate::run::load_summary;

/// Columns of a persisted `series.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("series.csv");
        let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let (header, rows) = table_from_csv(&text)?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("series has no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    fn pairs(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        Ok(self.column(x)?.into_iter().zip(self.column(y)?).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub curves: Vec<Curve>,
    pub annotation: Option<String>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn axis_value(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else {
        format!("{v:.3}")
    }
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let mapped: Vec<Vec<(f64, f64)>> = self
            .curves
            .iter()
            .map(|c| {
                c.points
                    .iter()
                    .filter_map(|&(x, y)| Some((axis_value(x, self.log_x)?, axis_value(y, self.log_y)?)))
                    .collect()
            })
            .collect();
        let all = mapped.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-300 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let (ml, mr, mt, mb) = MARGIN;
        let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title)).unwrap();
        writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let (px, py) = (sx(fx), sy(fy));
            writeln!(s, r##"<line x1="{px:.1}" y1="{mt}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/>"##, mt + ph).unwrap();
            writeln!(s, r##"<line x1="{ml}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/>"##, ml + pw).unwrap();
            writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, mt + ph + 16.0, tick_label(fx, self.log_x)).unwrap();
            writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, py + 4.0, tick_label(fy, self.log_y)).unwrap();
        }
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, HEIGHT - 10.0, escape(&self.x_label)).unwrap();
        writeln!(
            s,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            mt + ph / 2.0,
            mt + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();
        for (i, (curve, pts)) in self.curves.iter().zip(&mapped).enumerate() {
            let color = COLORS[i % COLORS.len()];
            if !pts.is_empty() {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
            }
            let ly = mt + 16.0 + 16.0 * i as f64;
            writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, ml + 10.0, ml + 30.0).unwrap();
            writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, ml + 36.0, ly + 4.0, escape(&curve.label)).unwrap();
        }
        if let Some(a) = &self.annotation {
            writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ml + pw - 8.0, mt + ph - 8.0, escape(a)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub plots: Vec<(String, Plot)>,
}

impl Report {
    /// Writes every plot as `<name>.svg` into `dir`.
    pub fn write_svgs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, plot) in &self.plots {
            let p = dir.join(format!("{name}.svg"));
            fs::write(&p, plot.to_svg())?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn fmt_num(v: &serde_json::Value) -> String {
    v.as_f64().map_or_else(|| "n/a".to_string(), |x| format!("{x:.5e}"))
}

fn slope_text(fit: &serde_json::Value) -> String {
    if fit == "Converged" {
        return "converged".into();
    }
    fmt_num(&fit["Fitted"]["slope"])
}

pub fn report(dir: &Path) -> Result<Report> {
    let summary = load_summary(dir)?;
    let series = SeriesTable::load(dir)?;
    let mut text = String::new();
    writeln!(text, "run        {}", summary["run_id"].as_str().unwrap_or("?")).unwrap();
    writeln!(text, "scenario   {}", summary["name"].as_str().unwrap_or("")).unwrap();
    writeln!(text, "completed  {}", summary["completed"]).unwrap();
    if let Some(f) = summary["failure"].as_str() {
        writeln!(text, "failure    {f}").unwrap();
    }
    writeln!(text, "samples    {}", summary["samples"]).unwrap();
    writeln!(text, "mass drift {}", fmt_num(&summary["mass_drift"])).unwrap();
    writeln!(text, "pseudo-energy drift {}", fmt_num(&summary["pseudo_energy_drift"])).unwrap();
    if !summary["decay"].is_null() {
        writeln!(
            text,
            "decay slope vs t {}, vs (1+|ζ₂|) {}",
            fmt_num(&summary["decay"]["vs_t"]["slope"]),
            fmt_num(&summary["decay"]["vs_zeta2"]["slope"])
        )
        .unwrap();
    }
    for key in ["cauchy_l2", "cauchy_linf"] {
        let c = &summary[key];
        if !c.is_null() {
            writeln!(
                text,
                "{key}: corrected {}, uncorrected {}",
                slope_text(&c["corrected"]),
                slope_text(&c["uncorrected"])
            )
            .unwrap();
        }
    }
    if let Some(outcomes) = summary["expectations"].as_array() {
        for o in outcomes {
            let mark = if o["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            writeln!(text, "{mark} {}: {}", o["expectation"].as_str().unwrap_or("?"), o["detail"].as_str().unwrap_or("")).unwrap();
        }
    }
    writeln!(text, "overall    {}", if summary["passed"].as_bool() == Some(true) { "pass" } else { "fail" }).unwrap();

    let t = series.column("t")?;
    let linf = series.column("linf")?;
    let mut plots = vec![(
        "decay".to_string(),
        Plot {
            title: "Amplitude decay".into(),
            x_label: "t".into(),
            y_label: "‖u(t)‖∞".into(),
            log_x: true,
            log_y: true,
            curves: vec![Curve { label: "‖u‖∞".into(), points: t.iter().copied().zip(linf.iter().copied()).collect() }],
            annotation: None,
        },
    )];
    let corrected = series.pairs("t", "cauchy_linf")?;
    if corrected.iter().any(|p| p.1.is_finite()) {
        let uncorrected = uncorrected_differences(dir, &series)?;
        let mut curves = vec![Curve { label: "corrected ‖ŵ(t) − ŵ(T)‖∞".into(), points: corrected }];
        if let Some(u) = uncorrected {
            curves.push(Curve { label: "uncorrected ‖v̂(t) − v̂(T)‖∞".into(), points: u });
        }
        plots.push((
            "cauchy".to_string(),
            Plot {
                title: "Profile Cauchy differences".into(),
                x_label: "t".into(),
                y_label: "difference".into(),
                log_x: true,
                log_y: true,
                curves,
                annotation: None,
            },
        ));
    }
    let pe = series.column("pseudo_energy")?;
    if let Some(&p0) = pe.first() {
        let drift: Vec<(f64, f64)> = t.iter().zip(&pe).map(|(&t, &p)| (t, p / p0 - 1.0)).collect();
        plots.push((
            "pseudo_energy".to_string(),
            Plot {
                title: "Pseudo-energy drift".into(),
                x_label: "t".into(),
                y_label: "E(t)/E(t₀) − 1".into(),
                log_x: false,
                log_y: false,
                curves: vec![Curve { label: "relative drift".into(), points: drift }],
                annotation: None,
            },
        ));
    }
    Ok(Report { text, plots })
}

/// Uncorrected differences live in `cauchy.csv`, written when both Cauchy
/// tables were computed.
fn uncorrected_differences(dir: &Path, series: &SeriesTable) -> Result<Option<Vec<(f64, f64)>>> {
    let path = dir.join("cauchy.csv");
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let (header, rows) = table_from_csv(&text)?;
    let k = header.iter().position(|h| h == "uncorrected_linf");
    let t = series.column("t")?;
    Ok(k.map(|k| t.iter().copied().zip(rows.iter().map(|r| r[k])).collect()))
}

/// Overlays `‖u‖∞` of two runs and annotates their largest relative difference.
pub fn compare(a: &Path, b: &Path) -> Result<Report> {
    let (sa, sb) = (SeriesTable::load(a)?, SeriesTable::load(b)?);
    let (ta, la) = (sa.column("t")?, sa.column("linf")?);
    let (tb, lb) = (sb.column("t")?, sb.column("linf")?);
    let mut max_rel = 0.0f64;
    let mut common = 0usize;
    for (t, x) in ta.iter().zip(&la) {
        if let Some(k) = tb.iter().position(|s| s == t) {
            common += 1;
            max_rel = max_rel.max(((x - lb[k]) / x).abs());
        }
    }
    let name = |d: &Path| d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned());
    let (na, nb) = (name(a), name(b));
    let annotation = if common > 0 {
        format!("max relative difference {max_rel:.3e} over {common} common times")
    } else {
        "no common sample times".to_string()
    };
    let mut text = String::new();
    writeln!(text, "compare {na} vs {nb}").unwrap();
    writeln!(text, "{annotation}").unwrap();
    let plot = Plot {
        title: "Amplitude decay comparison".into(),
        x_label: "t".into(),
        y_label: "‖u(t)‖∞".into(),
        log_x: true,
        log_y: true,
        curves: vec![
            Curve { label: na, points: ta.into_iter().zip(la).collect() },
            Curve { label: nb, points: tb.into_iter().zip(lb).collect() },
        ],
        annotation: Some(annotation),
    };
    Ok(Report { text, plots: vec![("compare".to_string(), plot)] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_skips_nonpositive_on_log_axes() {
        let p = Plot {
            title: "a<b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            log_y: true,
            curves: vec![Curve { label: "c".into(), points: vec![(1.0, 1.0), (10.0, 0.0), (100.0, 0.01)] }],
            annotation: Some("note".into()),
        };
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("a&lt;b"));
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
    }
}
