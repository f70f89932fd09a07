//! Standalone SVG rendering for the confusion-matrix heatmap and the
//! ground-truth / predicted scatter panels. No plotting runtime; the files
//! are plain vector graphics built from the numbers.

use std::fmt::Write as _;

/// Distinguishable fills for up to ten classes.
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#ff9da7",
    "#9c755f", "#bab0ac",
];

pub fn class_color(class: usize) -> &'static str {
    PALETTE[class % PALETTE.len()]
}

fn heat_fill(value: f64) -> String {
    // white → deep blue
    let t = value.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "rgb({},{},{})",
        lerp(255.0, 38.0),
        lerp(255.0, 70.0),
        lerp(255.0, 120.0)
    )
}

/// Heatmap of a truth × predicted count matrix.
pub fn confusion_heatmap_svg(
    confusion: &[Vec<usize>],
    class_names: &[String],
    title: &str,
) -> String {
    let c = confusion.len();
    let cell = 70.0;
    let left = 110.0;
    let top = 60.0;
    let width = left + c as f64 * cell + 40.0;
    let height = top + c as f64 * cell + 70.0;
    let max = confusion
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        width / 2.0,
        xml_escape(title)
    );
    for (t, row) in confusion.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            let x = left + p as f64 * cell;
            let y = top + t as f64 * cell;
            let fill = heat_fill(count as f64 / max);
            let _ = writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" \
                 stroke=\"#666\" stroke-width=\"1\"/>"
            );
            let text_fill = if count as f64 / max > 0.55 {
                "#fff"
            } else {
                "#222"
            };
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"central\" \
                 font-size=\"15\" fill=\"{text_fill}\">{count}</text>",
                x + cell / 2.0,
                y + cell / 2.0
            );
        }
    }
    for (i, name) in class_names.iter().take(c).enumerate() {
        // row label (truth)
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" dominant-baseline=\"central\" \
             font-size=\"12\">{}</text>",
            left - 8.0,
            top + i as f64 * cell + cell / 2.0,
            xml_escape(name)
        );
        // column label (predicted)
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            left + i as f64 * cell + cell / 2.0,
            top + c as f64 * cell + 18.0,
            xml_escape(name)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">predicted</text>",
        left + c as f64 * cell / 2.0,
        top + c as f64 * cell + 44.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 16 {})\">truth</text>",
        top + c as f64 * cell / 2.0,
        top + c as f64 * cell / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Two scatter panels over one feature pair: ground truth on the left,
/// predicted labels on the right.
#[allow(clippy::too_many_arguments)]
pub fn scatter_panels_svg(
    points: &[(f64, f64)],
    truth: &[usize],
    predicted: &[usize],
    class_names: &[String],
    x_label: &str,
    y_label: &str,
    title: &str,
) -> String {
    let panel = 320.0;
    let margin = 56.0;
    let gap = 46.0;
    let width = margin * 2.0 + panel * 2.0 + gap;
    let height = margin * 2.0 + panel + 30.0;

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = (*hi - *lo).max(1e-9);
        *lo -= 0.05 * span;
        *hi += 0.05 * span;
    };
    pad(&mut x_min, &mut x_max);
    pad(&mut y_min, &mut y_max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        width / 2.0,
        xml_escape(title)
    );

    let draw_panel = |x0: f64, labels: &[usize], caption: &str, svg: &mut String| {
        let y0 = margin + 10.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{panel}\" height=\"{panel}\" fill=\"none\" \
             stroke=\"#444\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            x0 + panel / 2.0,
            y0 - 8.0,
            xml_escape(caption)
        );
        for (&(x, y), &label) in points.iter().zip(labels) {
            let px = x0 + (x - x_min) / (x_max - x_min) * panel;
            let py = y0 + panel - (y - y_min) / (y_max - y_min) * panel;
            let _ = writeln!(
                svg,
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3.4\" fill=\"{}\" fill-opacity=\"0.8\"/>",
                class_color(label)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            x0 + panel / 2.0,
            y0 + panel + 30.0,
            xml_escape(x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
             transform=\"rotate(-90 {} {})\">{}</text>",
            x0 - 34.0,
            y0 + panel / 2.0,
            x0 - 34.0,
            y0 + panel / 2.0,
            xml_escape(y_label)
        );
    };
    draw_panel(margin, truth, "ground truth", &mut svg);
    draw_panel(margin + panel + gap, predicted, "predicted", &mut svg);

    // legend from the truth-side class names
    let legend_y = margin + 10.0 + panel + 44.0;
    let mut lx = margin;
    for (i, name) in class_names.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<circle cx=\"{lx}\" cy=\"{legend_y}\" r=\"5\" fill=\"{}\"/>\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" dominant-baseline=\"central\">{}</text>",
            class_color(i),
            lx + 10.0,
            legend_y,
            xml_escape(name)
        );
        lx += 24.0 + name.len() as f64 * 7.0;
    }
    svg.push_str("</svg>\n");
    svg
}

/// Delimited companion file for the heatmap.
pub fn confusion_tsv(confusion: &[Vec<usize>], class_names: &[String]) -> String {
    let mut out = String::from("truth\\predicted");
    for name in class_names {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    for (t, row) in confusion.iter().enumerate() {
        let _ = write!(out, "{}", class_names[t]);
        for count in row {
            let _ = write!(out, "\t{count}");
        }
        out.push('\n');
    }
    out
}

/// Delimited companion file for the scatter panels.
pub fn scatter_tsv(
    points: &[(f64, f64)],
    truth: &[usize],
    predicted: &[usize],
    x_label: &str,
    y_label: &str,
) -> String {
    let mut out = format!("{x_label}\t{y_label}\ttruth\tpredicted\n");
    for ((&(x, y), &t), &p) in points.iter().zip(truth).zip(predicted) {
        let _ = writeln!(out, "{x}\t{y}\t{t}\t{p}");
    }
    out
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
