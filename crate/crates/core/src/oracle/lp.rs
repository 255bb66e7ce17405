//! CPLEX LP-format export of the mixed-integer model.
//!
//! Nonlinear definitions are written as comment lines
//! `\ NONLINEAR: <name> := <expression>` so the file stays loadable by LP
//! readers while carrying the whole formulation.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::Result;

use super::mio::{build_mio_model, MioModel};

const LINE_WIDTH: usize = 78;

fn number(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Appends `terms` to `out`, wrapping lines at a fixed width.
fn push_terms(out: &mut String, head: &str, model: &MioModel, terms: &[(usize, f64)]) {
    let mut line = head.to_string();
    if terms.is_empty() {
        line.push_str(" 0");
    }
    for (k, &(v, coef)) in terms.iter().enumerate() {
        let name = &model.variables[v].name;
        let sign = if coef < 0.0 { "-" } else { "+" };
        let mag = coef.abs();
        let body = if mag == 1.0 { name.clone() } else { format!("{} {name}", number(mag)) };
        let piece = if k == 0 && coef >= 0.0 { format!(" {body}") } else { format!(" {sign} {body}") };
        if line.len() + piece.len() > LINE_WIDTH && line.trim().len() > head.trim().len() {
            out.push_str(&line);
            out.push('\n');
            line = "   ".to_string();
        }
        line.push_str(&piece);
    }
    out.push_str(&line);
}

/// Renders the model as LP-format text.
pub fn write_lp(model: &MioModel) -> String {
    let meta = &model.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "\\ Clustering-tree model: n = {}, p = {}, depth = {}", meta.n, meta.p, meta.depth);
    let _ = writeln!(out, "\\ min_bucket = {}", meta.min_bucket);
    let _ = writeln!(
        out,
        "\\ big_M = {}{}",
        number(meta.big_m),
        if meta.big_m_is_default { " (twice the largest pairwise distance)" } else { "" }
    );
    let eps: Vec<String> = meta.eps.iter().map(|e| number(*e)).collect();
    let _ = writeln!(out, "\\ eps = [{}], eps_max = {}", eps.join(", "), number(meta.eps_max));
    out.push_str("Maximize\n");
    push_terms(&mut out, " obj:", model, &model.objective);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        push_terms(&mut out, &format!(" {}:", row.name), model, &row.terms);
        let _ = writeln!(out, " {} {}", row.sense.symbol(), number(row.rhs));
    }
    for def in &model.nonlinear {
        let _ = writeln!(out, "\\ NONLINEAR: {} := {}", def.name, def.expression);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == super::mio::VarKind::Binary {
            continue;
        }
        let _ = writeln!(out, " {} <= {} <= {}", number(v.lower), v.name, number(v.upper));
    }
    out.push_str("Binaries\n");
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == super::mio::VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    let mut line = String::new();
    for name in binaries {
        if !line.is_empty() && line.len() + name.len() + 1 > LINE_WIDTH {
            let _ = writeln!(out, "{line}");
            line.clear();
        }
        line.push(' ');
        line.push_str(name);
    }
    if !line.is_empty() {
        let _ = writeln!(out, "{line}");
    }
    out.push_str("End\n");
    out
}

/// Builds the model for `data` and writes it to `path`.
pub fn export_lp(
    data: &Dataset,
    depth: usize,
    min_bucket: usize,
    big_m: Option<f64>,
    path: impl AsRef<Path>,
) -> Result<MioModel> {
    let model = build_mio_model(data, depth, min_bucket, big_m)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(write_lp(&model).as_bytes())?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::from_rows(&[vec![0.0], vec![0.1], vec![0.9], vec![1.0]]).unwrap()
    }

    #[test]
    fn sections_in_order() {
        let model = build_mio_model(&small(), 1, 2, None).unwrap();
        let text = write_lp(&model);
        let pos = |s: &str| text.find(s).unwrap_or_else(|| panic!("missing {s}"));
        assert!(pos("Maximize") < pos("Subject To"));
        assert!(pos("Subject To") < pos("Bounds"));
        assert!(pos("Bounds") < pos("Binaries"));
        assert!(text.ends_with("End\n"));
        assert!(text.contains(" obj: S\n"));
        assert!(text.contains("\\ big_M = 2 (twice"));
        assert!(text.contains("\\ eps = [0.09999999999999998], eps_max = 0.09999999999999998"));
        assert!(text.contains("\\ NONLINEAR: cohesion_1 := r_1 = "));
        assert!(text.contains(" feature_choice_1: a_1_1 - d_1 = 0\n"));
        assert!(text.lines().all(|l| l.len() <= LINE_WIDTH + 40 || l.starts_with('\\')));
    }

    #[test]
    fn deterministic_and_writes_file() {
        let data = small();
        let a = write_lp(&build_mio_model(&data, 2, 1, Some(3.0)).unwrap());
        let b = write_lp(&build_mio_model(&data, 2, 1, Some(3.0)).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("\\ big_M = 3\n"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lp");
        export_lp(&data, 2, 1, Some(3.0), &path).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), a);
    }
}
