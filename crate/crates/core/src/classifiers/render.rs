//! Text readout of decision trees and its inverse.
//!
//! ```text
//! 50440 <= 20.757143: 1 (772.0/22.0)
//! 50440 > 20.757143
//! | 50177 <= 25.923077: 0 (410.0/61.0)
//! | 50177 > 25.923077: 1 (97.0)
//! ```

use std::collections::HashMap;

use super::tree::TreeNode;
use super::ClassifierError;
use crate::dataset::Class;

/// Shortest of a fixed-decimal and the round-trip representation that
/// parses back to exactly `v`.
fn format_number(v: f64, decimals: usize) -> String {
    let fixed = format!("{v:.decimals$}");
    let fixed = if decimals > 1 && fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    };
    if fixed.parse::<f64>().ok() == Some(v) {
        fixed
    } else {
        format!("{v}")
    }
}

fn leaf_suffix(class: Class, total: f64, mis: f64) -> String {
    if mis == 0.0 {
        format!(": {class} ({})", format_number(total, 1))
    } else {
        format!(": {class} ({}/{})", format_number(total, 1), format_number(mis, 1))
    }
}

pub fn render_tree(tree: &TreeNode, names: &[String]) -> String {
    let mut out = String::new();
    match tree {
        TreeNode::Leaf { class, weight_total, weight_misclassified } => {
            out.push_str(&leaf_suffix(*class, *weight_total, *weight_misclassified));
            out.push('\n');
        }
        TreeNode::Split { .. } => render_split(tree, names, 0, &mut out),
    }
    out
}

fn render_split(node: &TreeNode, names: &[String], depth: usize, out: &mut String) {
    let TreeNode::Split { attribute, threshold, left, right } = node else { return };
    let name = &names[*attribute];
    let thr = format_number(*threshold, 6);
    for (child, op) in [(left, "<="), (right, ">")] {
        out.push_str(&"| ".repeat(depth));
        out.push_str(&format!("{name} {op} {thr}"));
        match &**child {
            TreeNode::Leaf { class, weight_total, weight_misclassified } => {
                out.push_str(&leaf_suffix(*class, *weight_total, *weight_misclassified));
                out.push('\n');
            }
            TreeNode::Split { .. } => {
                out.push('\n');
                render_split(child, names, depth + 1, out);
            }
        }
    }
}

struct Line<'a> {
    number: usize,
    depth: usize,
    name: &'a str,
    op: &'a str,
    threshold: f64,
    leaf: Option<(Class, f64, f64)>,
}

fn err(line: usize, message: impl Into<String>) -> ClassifierError {
    ClassifierError::TreeParse { line, message: message.into() }
}

fn parse_leaf(s: &str, line: usize) -> Result<(Class, f64, f64), ClassifierError> {
    let s = s.trim();
    let (class, rest) = s.split_once(' ').ok_or_else(|| err(line, "leaf needs class and weights"))?;
    let class = class
        .parse::<usize>()
        .ok()
        .and_then(Class::from_index)
        .ok_or_else(|| err(line, format!("bad class {class:?}")))?;
    let inner = rest
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| err(line, "weights must be parenthesized"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| err(line, format!("bad weight {t:?}")));
    let (total, mis) = match inner.split_once('/') {
        Some((t, m)) => (num(t)?, num(m)?),
        None => (num(inner)?, 0.0),
    };
    if !(0.0 <= mis && mis <= total) {
        return Err(err(line, "misclassified weight outside [0, total]"));
    }
    Ok((class, total, mis))
}

fn parse_line(raw: &str, number: usize) -> Result<Line<'_>, ClassifierError> {
    let mut depth = 0;
    let mut rest = raw;
    while let Some(r) = rest.strip_prefix("| ") {
        depth += 1;
        rest = r;
    }
    let (cond, leaf) = match rest.split_once(':') {
        Some((c, l)) => (c, Some(parse_leaf(l, number)?)),
        None => (rest, None),
    };
    let (name, op, thr) = if let Some((n, t)) = cond.split_once(" <= ") {
        (n, "<=", t)
    } else if let Some((n, t)) = cond.split_once(" > ") {
        (n, ">", t)
    } else {
        return Err(err(number, format!("expected a condition, found {cond:?}")));
    };
    let threshold = thr.trim().parse::<f64>().map_err(|_| err(number, format!("bad threshold {thr:?}")))?;
    Ok(Line { number, depth, name: name.trim(), op, threshold, leaf })
}

/// Parses text produced by [`render_tree`] back into a tree.
pub fn parse_tree(text: &str, names: &[String]) -> Result<TreeNode, ClassifierError> {
    let raw: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end())).filter(|(_, l)| !l.is_empty()).collect();
    if raw.is_empty() {
        return Err(err(0, "empty tree text"));
    }
    if raw.len() == 1 {
        if let Some(leaf) = raw[0].1.strip_prefix(':') {
            let (class, total, mis) = parse_leaf(leaf, raw[0].0)?;
            return Ok(TreeNode::Leaf { class, weight_total: total, weight_misclassified: mis });
        }
    }
    let lines = raw.iter().map(|&(n, l)| parse_line(l, n)).collect::<Result<Vec<_>, _>>()?;
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut pos = 0;
    let tree = parse_split(&lines, &mut pos, 0, &index)?;
    if pos != lines.len() {
        return Err(err(lines[pos].number, "unexpected trailing line"));
    }
    Ok(tree)
}

fn parse_branch(
    lines: &[Line],
    pos: &mut usize,
    depth: usize,
    op: &str,
    index: &HashMap<&str, usize>,
) -> Result<(usize, f64, TreeNode), ClassifierError> {
    let line = lines.get(*pos).ok_or_else(|| err(lines.last().map_or(0, |l| l.number), "truncated tree"))?;
    if line.depth != depth || line.op != op {
        return Err(err(line.number, format!("expected `{op}` branch at depth {depth}")));
    }
    let attribute = *index.get(line.name).ok_or_else(|| err(line.number, format!("unknown attribute {:?}", line.name)))?;
    *pos += 1;
    let child = match line.leaf {
        Some((class, total, mis)) => TreeNode::Leaf { class, weight_total: total, weight_misclassified: mis },
        None => parse_split(lines, pos, depth + 1, index)?,
    };
    Ok((attribute, line.threshold, child))
}

fn parse_split(lines: &[Line], pos: &mut usize, depth: usize, index: &HashMap<&str, usize>) -> Result<TreeNode, ClassifierError> {
    let (a, t, left) = parse_branch(lines, pos, depth, "<=", index)?;
    let number = lines[*pos - 1].number;
    let (b, u, right) = parse_branch(lines, pos, depth, ">", index)?;
    if a != b || t != u {
        return Err(err(number, "sibling branches test different conditions"));
    }
    Ok(TreeNode::Split { attribute: a, threshold: t, left: Box::new(left), right: Box::new(right) })
}
