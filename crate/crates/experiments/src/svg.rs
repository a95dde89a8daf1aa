//! Minimal deterministic SVG line plots: fixed canvas, numeric formatting
//! pinned to six significant digits, optional log axes, and a text
//! annotation block (used for fitted slopes). No external renderer; the
//! output is a pure function of the plot value.

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub annotations: Vec<String>,
}

const W: f64 = 800.0;
const H: f64 = 560.0;
const ML: f64 = 78.0;
const MR: f64 = 24.0;
const MT: f64 = 44.0;
const MB: f64 = 58.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn fmt(v: f64) -> String {
    format!("{:.6}", v)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{:.4}", v);
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{:.2e}", v)
    }
}

impl Plot {
    pub fn render(&self) -> String {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for (x, y) in &s.points {
                let (x, y) = (self.tx(*x), self.ty(*y));
                if x.is_finite() && y.is_finite() {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        let (x_lo, x_hi) = span(&xs);
        let (y_lo, y_hi) = span(&ys);
        let sx = |x: f64| ML + (self.tx(x) - x_lo) / (x_hi - x_lo) * (W - ML - MR);
        let sy = |y: f64| H - MB - (self.ty(y) - y_lo) / (y_hi - y_lo) * (H - MT - MB);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"13\">\n"
        ));
        out.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            W / 2.0,
            xml_escape(&self.title)
        ));
        // axes
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB,
            W - MR,
            H - MB
        ));
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB
        ));
        // ticks
        for i in 0..=4 {
            let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
            let px = ML + (W - ML - MR) * i as f64 / 4.0;
            let label = fmt_tick(self.inv_tx(fx));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
                fmt(px),
                H - MB,
                fmt(px),
                H - MB + 5.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                fmt(px),
                H - MB + 20.0,
                label
            ));
            let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
            let py = H - MB - (H - MT - MB) * i as f64 / 4.0;
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
                ML - 5.0,
                fmt(py),
                fmt(py)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                ML - 8.0,
                fmt(py + 4.0),
                fmt_tick(self.inv_ty(fy))
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            (ML + W - MR) / 2.0,
            H - 14.0,
            xml_escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MT + H - MB) / 2.0,
            (MT + H - MB) / 2.0,
            xml_escape(&self.y_label)
        ));
        // series
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| self.tx(*x).is_finite() && self.ty(*y).is_finite())
                .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(sy(*y))))
                .collect();
            if pts.len() > 1 {
                let dash = if s.dashed { " stroke-dasharray=\"6,4\"" } else { "" };
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{dash}/>\n",
                    pts.join(" ")
                ));
            }
            for p in &pts {
                let mut it = p.split(',');
                let (px, py) = (it.next().unwrap(), it.next().unwrap());
                out.push_str(&format!(
                    "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.4\" fill=\"{color}\"/>\n"
                ));
            }
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
                W - MR - 240.0,
                MT + 18.0 * i as f64 + 6.0,
                xml_escape(&s.name)
            ));
        }
        for (i, a) in self.annotations.iter().enumerate() {
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" fill=\"#444444\">{}</text>\n",
                ML + 10.0,
                MT + 18.0 * i as f64 + 6.0,
                xml_escape(a)
            ));
        }
        out.push_str("</svg>\n");
        out
    }

    fn tx(&self, x: f64) -> f64 {
        if self.log_x {
            x.log10()
        } else {
            x
        }
    }

    fn ty(&self, y: f64) -> f64 {
        if self.log_y {
            y.log10()
        } else {
            y
        }
    }

    fn inv_tx(&self, x: f64) -> f64 {
        if self.log_x {
            10f64.powf(x)
        } else {
            x
        }
    }

    fn inv_ty(&self, y: f64) -> f64 {
        if self.log_y {
            10f64.powf(y)
        } else {
            y
        }
    }
}

fn span(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
