use std::fmt::Write as _;

use anyhow::{bail, Result};
use stged::graph::{hops_from_connectivity, label_connectivity, HopMatrix};

use crate::{load, out_path, provenance, write, AnalyzeArgs};

/// Per-step connectivity summary.
pub struct StepSummary {
    pub t: usize,
    pub links: usize,
    pub density: f64,
    pub reachable: f64,
    pub mean_hops: f64,
    pub max_hops: u32,
}

pub fn summarize(t: usize, n: usize, links: usize, hops: &HopMatrix) -> StepSummary {
    let pairs = (n * n.saturating_sub(1)).max(1) as f64;
    let reach: Vec<u32> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| hops.get(i, j))
        .filter(|&h| h > 0)
        .collect();
    StepSummary {
        t,
        links,
        density: links as f64 / pairs,
        reachable: reach.len() as f64 / pairs,
        mean_hops: if reach.is_empty() { 0.0 } else { reach.iter().sum::<u32>() as f64 / reach.len() as f64 },
        max_hops: hops.max(),
    }
}

fn hop_csv(h: &HopMatrix, header: &str) -> String {
    let mut s = header.to_string();
    let n = h.n();
    s.push_str(&(0..n).map(|j| format!("n{j}")).collect::<Vec<_>>().join(","));
    s.push('\n');
    for i in 0..n {
        s.push_str(&h.row(i).iter().map(u32::to_string).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn svg_comment(prov: &str) -> String {
    format!("<!--\n{}\n-->\n", prov.replace("--", "- -"))
}

/// Grey-scale heatmap; unreachable cells are drawn in a separate colour.
fn hop_svg(h: &HopMatrix, title: &str, prov: &str) -> String {
    let n = h.n();
    let cell = 16;
    let margin = 30;
    let size = margin + n * cell + 10;
    let max = h.max().max(1) as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\">\n{}",
        svg_comment(prov)
    );
    let _ = writeln!(s, "<text x=\"{margin}\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\">{title}</text>");
    for i in 0..n {
        for j in 0..n {
            let v = h.get(i, j);
            let fill = if i == j {
                "#ffffff".to_string()
            } else if v == 0 {
                "#f4d6d6".to_string()
            } else {
                let g = (230.0 - 200.0 * (v as f64 - 1.0) / (max - 1.0).max(1.0)).round() as u8;
                format!("#{g:02x}{g:02x}{g:02x}")
            };
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\"><title>{i}->{j}: {v}</title></rect>",
                margin + j * cell,
                margin + i * cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn series_svg(summary: &[StepSummary], prov: &str) -> String {
    let (w, h, m) = (640.0, 240.0, 30.0);
    let last = summary.last().map_or(1, |s| s.t.max(1)) as f64;
    let first = summary.first().map_or(0, |s| s.t) as f64;
    let span = (last - first).max(1.0);
    let line = |f: &dyn Fn(&StepSummary) -> f64| {
        summary
            .iter()
            .map(|s| {
                format!(
                    "{:.1},{:.1}",
                    m + (s.t as f64 - first) / span * (w - 2.0 * m),
                    h - m - f(s).clamp(0.0, 1.0) * (h - 2.0 * m)
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n{}", svg_comment(prov));
    let _ = writeln!(
        s,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"#1f5fa8\" points=\"{}\"/>", line(&|x| x.density));
    let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"#c0392b\" points=\"{}\"/>", line(&|x| x.reachable));
    let _ = writeln!(
        s,
        "<text x=\"{m}\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\">link density (blue), reachable fraction (red)</text>"
    );
    s.push_str("</svg>\n");
    s
}

pub fn run(a: AnalyzeArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let dir = out_path(&a.out);
    let prov = provenance(0);
    let header: String = prov.lines().map(|l| format!("# {l}\n")).collect();
    let n = ds.header.n_nodes;
    let mut summary = Vec::with_capacity(ds.snapshots.len());
    let mut matrices = Vec::new();
    let steps = if a.steps.is_empty() {
        ds.snapshots.first().map(|s| vec![s.t]).unwrap_or_default()
    } else {
        a.steps.clone()
    };
    for s in &ds.snapshots {
        let conn = label_connectivity(s, a.threshold);
        let hops = hops_from_connectivity(&conn);
        summary.push(summarize(s.t, n, conn.count_ones(), &hops));
        if a.hops && steps.contains(&s.t) {
            matrices.push((s.t, hops));
        }
    }
    if a.hops {
        for &t in &steps {
            if !matrices.iter().any(|(m, _)| *m == t) {
                bail!("dataset has no step {t}");
            }
        }
    }

    let mut csv = header.clone();
    csv.push_str("t,links,density,reachable_fraction,mean_hops,max_hops\n");
    for s in &summary {
        let _ = writeln!(
            csv,
            "{},{},{:.6},{:.6},{:.6},{}",
            s.t, s.links, s.density, s.reachable, s.mean_hops, s.max_hops
        );
    }
    write(&dir.join("connectivity.csv"), csv)?;
    if a.svg {
        write(&dir.join("connectivity.svg"), series_svg(&summary, &prov))?;
    }
    for (t, h) in &matrices {
        write(&dir.join(format!("hops_t{t}.csv")), hop_csv(h, &header))?;
        if a.svg {
            write(&dir.join(format!("hops_t{t}.svg")), hop_svg(h, &format!("hop counts, step {t}"), &prov))?;
        }
        println!("step {t}: max hops {}", h.max());
    }
    let mean = |f: fn(&StepSummary) -> f64| summary.iter().map(f).sum::<f64>() / summary.len().max(1) as f64;
    println!(
        "{} steps, mean density {:.4}, mean reachable fraction {:.4}",
        summary.len(),
        mean(|s| s.density),
        mean(|s| s.reachable)
    );
    Ok(())
}
