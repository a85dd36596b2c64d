//! Line-oriented problem files and the built-in registry.
//!
//! ```text
//! manifold log_orthant 2
//! box 0.5:1.5,0.5:1.5
//! objective phi1 lower=ln(p1) + 3 upper=ln(p1) + 5
//! constraint psi1 -ln(p1)
//! candidate (1,1)
//! certificate theorem=T32a lamL=1 lamU=1 mu=1
//! ```

pub mod registry;

use std::path::Path;

use thiserror::Error;

use crate::calculus::{Anchor, CalculusError, IntervalFn, ScalarFn};
use crate::expr::ExprError;
use crate::kkt::{Certificate, Constraint, Objective, ProbeScope, ProblemSpec};
use crate::manifold::{CoordBox, ManifoldKind, Point};
use crate::sampling::Sampler;

/// Sample count of the load-time `lower ≤ upper` check.
pub const LOAD_CHECK_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("unknown problem `{0}` (not a built-in name or a readable file)")]
    Unknown(String),
}

impl ProblemError {
    pub fn location(&self) -> Option<(usize, usize)> {
        match self {
            ProblemError::Parse { line, column, .. } => Some((*line, *column)),
            _ => None,
        }
    }
}

/// A loaded problem with its optional candidate and certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub name: String,
    pub spec: ProblemSpec,
    pub candidate: Option<Point>,
    pub certificates: Vec<Certificate>,
}

impl ProblemFile {
    pub fn certificate_for(&self, theorem: crate::kkt::Theorem) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.theorem == theorem)
    }
}

/// Loads a built-in by name, otherwise reads a file.
pub fn load(name_or_path: &str) -> Result<ProblemFile, ProblemError> {
    if let Some(text) = registry::source(name_or_path) {
        return parse_problem(name_or_path, text);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(ProblemError::Unknown(name_or_path.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io {
        path: name_or_path.to_string(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name_or_path.to_string());
    parse_problem(&name, &text)
}

struct Ctx {
    line: usize,
}

impl Ctx {
    fn err(&self, column: usize, message: impl Into<String>) -> ProblemError {
        ProblemError::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }
}

/// One-based column of byte offset `at` in `line`.
fn column(line: &str, at: usize) -> usize {
    line[..at.min(line.len())].chars().count() + 1
}

/// Byte offset of `part` inside `whole`; `part` must be a subslice.
fn offset_in(whole: &str, part: &str) -> usize {
    part.as_ptr() as usize - whole.as_ptr() as usize
}

/// Splits `key=value` arguments, where values may contain spaces, at
/// occurrences of the given keys that start a word outside brackets.
fn keyed_args<'a>(s: &'a str, keys: &[&'a str]) -> Result<Vec<(&'a str, &'a str)>, (usize, String)> {
    let bytes = s.as_bytes();
    let mut starts = Vec::new();
    let mut depth = 0i32;
    for i in 0..bytes.len() {
        match bytes[i] {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            _ => {}
        }
        if depth != 0 || (i > 0 && !bytes[i - 1].is_ascii_whitespace()) {
            continue;
        }
        for &k in keys {
            if s[i..].starts_with(k) && bytes.get(i + k.len()) == Some(&b'=') {
                starts.push((i, k));
            }
        }
    }
    let lead = s[..starts.first().map_or(s.len(), |x| x.0)].trim();
    if !lead.is_empty() {
        return Err((offset_in(s, lead), format!("unexpected `{lead}`; expected {}", expected(keys))));
    }
    let mut out = Vec::new();
    for (n, &(i, k)) in starts.iter().enumerate() {
        let end = starts.get(n + 1).map_or(s.len(), |x| x.0);
        let value = s[i + k.len() + 1..end].trim();
        if out.iter().any(|(seen, _): &(&str, &str)| *seen == k) {
            return Err((i, format!("`{k}` given twice")));
        }
        if value.is_empty() {
            return Err((i, format!("`{k}` has no value")));
        }
        out.push((k, value));
    }
    Ok(out)
}

fn expected(keys: &[&str]) -> String {
    keys.iter().map(|k| format!("`{k}=`")).collect::<Vec<_>>().join(", ")
}

/// Column offset of an expression error inside the expression text.
fn expr_offset(e: &CalculusError) -> usize {
    match e {
        CalculusError::Expr(ExprError::Syntax { offset, .. })
        | CalculusError::Expr(ExprError::UnknownFunction { offset, .. }) => *offset,
        _ => 0,
    }
}

/// Parses problem text; `name` labels the result.
pub fn parse_problem(name: &str, text: &str) -> Result<ProblemFile, ProblemError> {
    let mut manifold: Option<ManifoldKind> = None;
    let mut sample_box: Option<CoordBox> = None;
    let mut probe_scope = ProbeScope::default();
    let mut objectives: Vec<(Objective, usize)> = Vec::new();
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut candidate: Option<(Point, usize)> = None;
    let mut certificates: Vec<(Certificate, usize, usize)> = Vec::new();
    let mut anchors = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let ctx = Ctx { line: idx + 1 };
        last_line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let stmt = content.trim();
        if stmt.is_empty() {
            continue;
        }
        let stmt_at = offset_in(raw, stmt);
        let (keyword, rest) = match stmt.find(char::is_whitespace) {
            Some(i) => (&stmt[..i], stmt[i..].trim()),
            None => (stmt, ""),
        };
        let rest_col = if rest.is_empty() {
            column(raw, stmt_at + stmt.len())
        } else {
            column(raw, offset_in(raw, rest))
        };
        let rest_at = |part: &str| column(raw, offset_in(raw, part));
        let need_manifold = || {
            manifold.ok_or_else(|| ctx.err(column(raw, stmt_at), format!("`{keyword}` before the `manifold` line")))
        };
        if rest.is_empty() {
            return Err(ctx.err(rest_col, format!("`{keyword}` needs an argument")));
        }

        match keyword {
            "manifold" => {
                if manifold.is_some() {
                    return Err(ctx.err(column(raw, stmt_at), "duplicate `manifold` line"));
                }
                manifold = Some(rest.parse().map_err(|e| ctx.err(rest_col, format!("{e}")))?);
            }
            "box" => {
                let m = need_manifold()?;
                let b: CoordBox = rest.parse().map_err(|e| ctx.err(rest_col, format!("{e}")))?;
                if b.dim() != m.coord_dim() {
                    return Err(ctx.err(
                        rest_col,
                        format!("{m} needs {} box ranges, got {}", m.coord_dim(), b.dim()),
                    ));
                }
                sample_box = Some(b);
            }
            "probes" => {
                probe_scope = rest.parse().map_err(|e: String| ctx.err(rest_col, e))?;
            }
            "objective" => {
                let m = need_manifold()?;
                let (oname, args) = split_name(rest);
                let args = keyed_args(args, &["lower", "upper"]).map_err(|(at, msg)| {
                    ctx.err(column(raw, offset_in(raw, rest) + oname.len()) + at, msg)
                })?;
                let get = |k: &str| {
                    args.iter()
                        .find(|(key, _)| *key == k)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| ctx.err(rest_col, format!("objective `{oname}` is missing `{k}=`")))
                };
                let (lo, hi) = (get("lower")?, get("upper")?);
                let lower = ScalarFn::parse(lo, m).map_err(|e| ctx.err(rest_at(lo) + expr_offset(&e), format!("{e}")))?;
                let upper = ScalarFn::parse(hi, m).map_err(|e| ctx.err(rest_at(hi) + expr_offset(&e), format!("{e}")))?;
                let f = IntervalFn::new(lower, upper).map_err(|e| ctx.err(rest_col, format!("{e}")))?;
                objectives.push((
                    Objective {
                        name: oname.to_string(),
                        f,
                    },
                    ctx.line,
                ));
            }
            "constraint" => {
                let m = need_manifold()?;
                let (cname, src) = split_name(rest);
                if src.is_empty() {
                    return Err(ctx.err(rest_col, format!("constraint `{cname}` has no expression")));
                }
                let f = ScalarFn::parse(src, m).map_err(|e| ctx.err(rest_at(src) + expr_offset(&e), format!("{e}")))?;
                constraints.push(Constraint {
                    name: cname.to_string(),
                    f,
                });
            }
            "candidate" => {
                let m = need_manifold()?;
                if candidate.is_some() {
                    return Err(ctx.err(column(raw, stmt_at), "duplicate `candidate` line"));
                }
                let p: Point = rest.parse().map_err(|e| ctx.err(rest_col, format!("{e}")))?;
                m.check_point(&p).map_err(|e| ctx.err(rest_col, format!("{e}")))?;
                candidate = Some((p, ctx.line));
            }
            "certificate" => {
                let cert: Certificate = rest.parse().map_err(|e| ctx.err(rest_col, format!("{e}")))?;
                certificates.push((cert, ctx.line, rest_col));
            }
            "anchor" => {
                let m = need_manifold()?;
                let args = keyed_args(rest, &["p", "q", "alpha"])
                    .map_err(|(at, msg)| ctx.err(rest_col + at, msg))?;
                let get = |k: &str| {
                    args.iter()
                        .find(|(key, _)| *key == k)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| ctx.err(rest_col, format!("anchor is missing `{k}=`")))
                };
                let point = |k: &str| -> Result<Point, ProblemError> {
                    let src = get(k)?;
                    let p: Point = src.parse().map_err(|e| ctx.err(rest_at(src), format!("{e}")))?;
                    m.check_point(&p).map_err(|e| ctx.err(rest_at(src), format!("{e}")))?;
                    Ok(p)
                };
                let alpha_src = get("alpha")?;
                let alpha = crate::expr::eval_constant(alpha_src)
                    .ok()
                    .filter(|a| (0.0..=1.0).contains(a))
                    .ok_or_else(|| ctx.err(rest_at(alpha_src), "alpha must be a number in [0, 1]"))?;
                anchors.push(Anchor {
                    p: point("p")?,
                    q: point("q")?,
                    alpha,
                });
            }
            other => {
                return Err(ctx.err(
                    column(raw, stmt_at),
                    format!("unknown statement `{other}`"),
                ))
            }
        }
    }

    let end = Ctx { line: last_line + 1 };
    let manifold = manifold.ok_or_else(|| end.err(1, "missing `manifold` line"))?;
    let sample_box = sample_box.ok_or_else(|| end.err(1, "missing `box` line"))?;
    if objectives.is_empty() {
        return Err(end.err(1, "at least one `objective` is required"));
    }

    // Lower bounds must not exceed upper bounds where both evaluate.
    let sampler = Sampler::new(manifold, sample_box.clone(), 0);
    let samples = sampler.points(LOAD_CHECK_SAMPLES, |_| true);
    for (obj, line) in &objectives {
        let probe_points = samples.iter().chain(candidate.iter().map(|(p, _)| p));
        for p in probe_points {
            if let Err(CalculusError::Inverted { lower, upper }) = obj.f.eval(p) {
                return Err(Ctx { line: *line }.err(
                    1,
                    format!(
                        "objective `{}` has lower {lower} > upper {upper} at {p}",
                        obj.name
                    ),
                ));
            }
        }
    }

    let spec = ProblemSpec {
        manifold,
        objectives: objectives.into_iter().map(|(o, _)| o).collect(),
        constraints,
        sample_box,
        probe_scope,
        anchors,
    };
    let (l, t) = (spec.l(), spec.t());
    for (cert, line, col) in &certificates {
        cert.check_shape(l, t)
            .map_err(|e| Ctx { line: *line }.err(*col, format!("{e}")))?;
    }
    Ok(ProblemFile {
        name: name.to_string(),
        spec,
        candidate: candidate.map(|(p, _)| p),
        certificates: certificates.into_iter().map(|(c, _, _)| c).collect(),
    })
}

fn split_name(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# comment line
manifold euclidean 1
box -1:1
objective f lower=p1 upper=p1 + 1   # trailing comment
constraint c -p1
candidate (0)
certificate theorem=T32a lamL=1 lamU=1 mu=0
";

    #[test]
    fn parses_small_file() {
        let pf = parse_problem("small", SMALL).unwrap();
        assert_eq!(pf.spec.l(), 1);
        assert_eq!(pf.spec.t(), 1);
        assert_eq!(pf.candidate, Some(Point::Vector(vec![0.0])));
        assert_eq!(pf.certificates.len(), 1);
        assert_eq!(pf.spec.probe_scope, ProbeScope::Feasible);
    }

    #[test]
    fn missing_manifold_has_location() {
        let err = parse_problem("x", "box -1:1\n").unwrap_err();
        assert_eq!(err.location(), Some((1, 1)));
        let err = parse_problem("x", "# nothing\n").unwrap_err();
        assert_eq!(err.location(), Some((2, 1)));
        assert!(err.to_string().contains("manifold"));
    }

    #[test]
    fn expression_errors_point_into_the_line() {
        let text = "manifold euclidean 1\nbox -1:1\nobjective f lower=p1 upper=p1 +* 2\n";
        let err = parse_problem("x", text).unwrap_err();
        let (line, col) = err.location().unwrap();
        assert_eq!(line, 3);
        assert!(col > 28, "column {col}");
    }

    #[test]
    fn unknown_feature_is_rejected() {
        let text = "manifold euclidean 1\nbox -1:1\nobjective f lower=p2 upper=p2\n";
        let err = parse_problem("x", text).unwrap_err();
        assert!(err.to_string().contains("p2"), "{err}");
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let text = "manifold euclidean 1\nbox -1:1\nobjective f lower=p1 upper=2*p1\n";
        let err = parse_problem("x", text).unwrap_err();
        assert_eq!(err.location().map(|l| l.0), Some(3));
    }

    #[test]
    fn certificate_shape_is_checked() {
        let text = SMALL.replace("mu=0", "mu=0,1");
        assert!(parse_problem("x", &text).is_err());
    }

    #[test]
    fn keyed_args_keep_spaces() {
        let args = keyed_args("lower=ln(p1) + 3 upper=ln(p1) + 5", &["lower", "upper"]).unwrap();
        assert_eq!(args, vec![("lower", "ln(p1) + 3"), ("upper", "ln(p1) + 5")]);
        assert!(keyed_args("junk lower=1", &["lower"]).is_err());
    }
}
