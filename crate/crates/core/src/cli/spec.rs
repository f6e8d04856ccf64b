//! Problem files: `[section]` headers, `key = value` lines, `#` comments,
//! comma-separated lists and double-quoted expressions.
//!
//! ```text
//! [primal]
//! dimension = 1
//! range = -1:4
//! step = 0.01
//! f = "x1^2"
//! constraints = "1 - x1"
//!
//! [dual]
//! range = 0:4
//! step = 0.01
//!
//! [coupling]
//! kind = lagrangian
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::coupling::CouplingSpec;
use crate::error::Error;
use crate::expr::{Bindings, Block, Expression};
use crate::function::SampledFunction;
use crate::grid::{restrict_to_feasible, Axis, PointSet};
use crate::stability::Family;
use crate::tol::ToleranceConfig;
use crate::value::ExtendedValue;

use super::CliError;

#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    /// `φ(x, u)`, in `x` and `u`.
    pub phi: Expression,
    pub u: Arc<PointSet>,
    pub u_star: Arc<PointSet>,
}

#[derive(Clone, Debug)]
pub enum OperatorSource {
    /// CSV file with `y_1..y_n,v_1..v_n`.
    Graph(PathBuf),
    /// `T(y)` component expressions, sampled on `c`.
    Expressions { components: Vec<Expression>, c: Arc<PointSet> },
}

#[derive(Clone, Debug)]
pub struct GapSpec {
    pub operator: Option<OperatorSource>,
    /// `f(x, y)` on `A × A`.
    pub bifunction: Option<Expression>,
}

#[derive(Clone, Debug)]
pub struct StabilitySpec {
    pub family: Family,
    pub k_values: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub path: PathBuf,
    pub tolerances: ToleranceConfig,
    pub bounding: Arc<PointSet>,
    /// The bounding grid restricted to the constraints.
    pub a: Arc<PointSet>,
    pub f_expr: Expression,
    pub f: SampledFunction,
    pub constraints: Vec<Expression>,
    pub b: Arc<PointSet>,
    pub coupling: CouplingSpec,
    pub check_d2: bool,
    pub perturbation: Option<PerturbationSpec>,
    pub gap: Option<GapSpec>,
    pub stability: Option<StabilitySpec>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("primal", &["dimension", "range", "count", "step", "f", "constraints", "domain"]),
    ("dual", &["dimension", "range", "count", "step"]),
    ("coupling", &["kind", "expr", "params", "blocks", "check_d2"]),
    ("tolerances", &["zero_tol", "feasibility_tol", "convexity_tol"]),
    ("perturbation", &["phi", "u_range", "u_count", "u_step", "u_star_range", "u_star_count", "u_star_step"]),
    ("gap", &["graph", "operator", "c_range", "c_count", "c_step", "bifunction"]),
    ("stability", &["family", "a", "b", "k", "f_k", "g_k"]),
];

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: String,
}

type Section = BTreeMap<String, Entry>;

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Spec { line: Some(line), message: message.into() }
}

fn err_nl(message: impl Into<String>) -> CliError {
    CliError::Spec { line: None, message: message.into() }
}

/// Removes a trailing `#` comment outside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, CliError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(line_no, format!("malformed section header `{line}`")))?.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err(line_no, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(err(line_no, format!("section [{name}] appears twice")));
            }
            sections.insert(name.to_string(), Section::new());
            current = Some(name.to_string());
            continue;
        }
        let section = current.as_ref().ok_or_else(|| err(line_no, "key outside any section"))?;
        let (key, value) = line.split_once('=').ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let allowed = SECTIONS.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or_default();
        if !allowed.contains(&key) {
            return Err(err(line_no, format!("unknown key `{key}` in [{section}]")));
        }
        let entries = sections.get_mut(section).expect("section was inserted");
        if entries.contains_key(key) {
            return Err(err(line_no, format!("duplicate key `{key}` in [{section}]")));
        }
        entries.insert(key.to_string(), Entry { line: line_no, value: value.trim().to_string() });
    }
    Ok(sections)
}

/// Splits on commas outside quotes.
fn split_list(entry: &Entry) -> Result<Vec<String>, CliError> {
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in entry.value.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                cur.push(c);
            }
            ',' if !quoted => items.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    if quoted {
        return Err(err(entry.line, "unterminated quote"));
    }
    items.push(cur);
    let items: Vec<String> = items.into_iter().map(|s| s.trim().to_string()).collect();
    if items.iter().any(String::is_empty) {
        return Err(err(entry.line, "empty list item"));
    }
    Ok(items)
}

fn unquote(entry: &Entry, item: &str) -> Result<String, CliError> {
    item.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .map(str::to_string)
        .ok_or_else(|| err(entry.line, format!("expected a double-quoted expression, got `{item}`")))
}

fn number(entry: &Entry, item: &str) -> Result<f64, CliError> {
    let v: f64 = item.parse().map_err(|_| err(entry.line, format!("`{item}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(entry.line, format!("`{item}` is not finite")));
    }
    Ok(v)
}

fn integer(entry: &Entry, item: &str) -> Result<u64, CliError> {
    item.parse().map_err(|_| err(entry.line, format!("`{item}` is not a non-negative integer")))
}

struct Reader<'a> {
    name: &'static str,
    section: Option<&'a Section>,
}

impl<'a> Reader<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.section.and_then(|s| s.get(key))
    }

    fn require(&self, key: &str) -> Result<&'a Entry, CliError> {
        self.get(key).ok_or_else(|| err_nl(format!("missing required key `{key}` in [{}]", self.name)))
    }

    fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key).map(|e| split_list(e)?.iter().map(|i| number(e, i)).collect()).transpose()
    }

    fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|e| match split_list(e)?.as_slice() {
                [one] => number(e, one),
                _ => Err(err(e.line, format!("`{key}` takes a single number"))),
            })
            .transpose()
    }

    fn integers(&self, key: &str) -> Result<Option<Vec<u64>>, CliError> {
        self.get(key).map(|e| split_list(e)?.iter().map(|i| integer(e, i)).collect()).transpose()
    }

    fn word(&self, key: &str) -> Result<Option<(&'a Entry, String)>, CliError> {
        Ok(self.get(key).map(|e| (e, e.value.clone())))
    }

    fn expressions(&self, key: &str, vars: &[(Block, usize)]) -> Result<Option<Vec<Expression>>, CliError> {
        self.get(key)
            .map(|e| split_list(e)?.iter().map(|item| expression(e, &unquote(e, item)?, vars)).collect())
            .transpose()
    }

    fn expression(&self, key: &str, vars: &[(Block, usize)]) -> Result<Option<Expression>, CliError> {
        match self.expressions(key, vars)? {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(v.pop()),
            Some(_) => Err(err(self.get(key).expect("present").line, format!("`{key}` takes a single expression"))),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.get(key)
            .map(|e| match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(err(e.line, format!("`{other}` is not true or false"))),
            })
            .transpose()
    }

    /// Axes from `<prefix>range`, and `<prefix>count` or `<prefix>step`.
    fn grid(&self, prefix: &str, dimension: Option<usize>) -> Result<Option<Arc<PointSet>>, CliError> {
        let range_key = format!("{prefix}range");
        let Some(range) = self.get(&range_key) else {
            return Ok(None);
        };
        let ranges = split_list(range)?
            .iter()
            .map(|item| {
                let (lo, hi) = item.split_once(':').ok_or_else(|| err(range.line, format!("range `{item}` is not lo:hi")))?;
                Ok((number(range, lo.trim())?, number(range, hi.trim())?))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        if let Some(d) = dimension {
            if d != ranges.len() {
                return Err(err(range.line, format!("dimension is {d} but {} ranges are given", ranges.len())));
            }
        }
        let per_axis = |key: &str, values: &[f64]| -> Result<Vec<f64>, CliError> {
            let entry = self.get(key).expect("present");
            match values.len() {
                1 => Ok(vec![values[0]; ranges.len()]),
                n if n == ranges.len() => Ok(values.to_vec()),
                n => Err(err(entry.line, format!("{n} values for {} axes", ranges.len()))),
            }
        };
        let count_key = format!("{prefix}count");
        let step_key = format!("{prefix}step");
        let axes = match (self.integers(&count_key)?, self.numbers(&step_key)?) {
            (Some(_), Some(_)) => {
                return Err(err(self.get(&step_key).expect("present").line, format!("give `{count_key}` or `{step_key}`, not both")))
            }
            (Some(counts), None) => {
                let counts = per_axis(&count_key, &counts.iter().map(|&c| c as f64).collect::<Vec<_>>())?;
                let line = self.get(&count_key).expect("present").line;
                ranges
                    .iter()
                    .zip(counts)
                    .map(|(&(lo, hi), c)| Axis::new(lo, hi, c as usize).map_err(|e| err(line, e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?
            }
            (None, Some(steps)) => {
                let steps = per_axis(&step_key, &steps)?;
                let line = self.get(&step_key).expect("present").line;
                ranges
                    .iter()
                    .zip(steps)
                    .map(|(&(lo, hi), s)| Axis::with_step(lo, hi, s).map_err(|e| err(line, e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?
            }
            (None, None) => {
                let single = ranges.iter().all(|(lo, hi)| lo == hi);
                if !single {
                    return Err(err(range.line, format!("`{range_key}` needs `{count_key}` or `{step_key}`")));
                }
                ranges.iter().map(|&(lo, hi)| Axis::new(lo, hi, 1).map_err(|e| err(range.line, e.to_string()))).collect::<Result<Vec<_>, _>>()?
            }
        };
        Ok(Some(Arc::new(PointSet::cartesian(axes).map_err(|e| err(range.line, e.to_string()))?)))
    }
}

fn expression(entry: &Entry, text: &str, vars: &[(Block, usize)]) -> Result<Expression, CliError> {
    let e = Expression::parse(text).map_err(|p| err(entry.line, format!("in \"{text}\": {p}")))?;
    e.check_variables(vars).map_err(|v| err(entry.line, format!("variable `{v}` is out of range in \"{text}\"")))?;
    Ok(e)
}

fn core(line: Option<usize>, e: Error) -> CliError {
    CliError::Spec { line, message: e.to_string() }
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_spec(&text, path)
}

/// Parses and validates a problem file; `path` resolves relative file references.
pub fn parse_spec(text: &str, path: &Path) -> Result<ProblemSpec, CliError> {
    let sections = parse_sections(text)?;
    let reader = |name: &'static str| Reader { name, section: sections.get(name) };

    let tols = reader("tolerances");
    let mut tolerances = ToleranceConfig::default();
    if let Some(v) = tols.number("zero_tol")? {
        tolerances.zero_tol = v;
    }
    if let Some(v) = tols.number("feasibility_tol")? {
        tolerances.feasibility_tol = v;
    }
    if let Some(v) = tols.number("convexity_tol")? {
        tolerances.convexity_tol = v;
    }
    tolerances.validate().map_err(|e| core(None, e))?;

    let primal = reader("primal");
    if sections.get("primal").is_none() {
        return Err(err_nl("missing [primal] section"));
    }
    let dim_entry = primal.require("dimension")?;
    let n = integer(dim_entry, &dim_entry.value)? as usize;
    if n == 0 {
        return Err(err(dim_entry.line, "dimension must be positive"));
    }
    primal.require("range")?;
    let bounding = primal.grid("", Some(n))?.expect("range is present");
    let xs = [(Block::X, n)];
    let f_expr = primal.expression("f", &xs)?.ok_or_else(|| err_nl("missing required key `f` in [primal]"))?;
    let constraints = primal.expressions("constraints", &xs)?.unwrap_or_default();
    let domain = primal.expressions("domain", &xs)?.unwrap_or_default();

    let a = if constraints.is_empty() {
        bounding.clone()
    } else {
        let line = primal.get("constraints").map(|e| e.line);
        let sampled = constraints
            .iter()
            .enumerate()
            .map(|(k, h)| {
                SampledFunction::from_fn(bounding.clone(), format!("h{}", k + 1), |p| Ok(ExtendedValue::finite(h.eval_real(&Bindings::x(p))?)?))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| core(line, e))?;
        Arc::new(restrict_to_feasible(&bounding, &sampled, &tolerances).map_err(|e| core(line, e))?)
    };

    let f_line = primal.get("f").map(|e| e.line);
    let feas = tolerances.feasibility_tol;
    let f = SampledFunction::from_fn(a.clone(), "f", |p| {
        let env = Bindings::x(p);
        for d in &domain {
            if d.eval_real(&env)? > feas {
                return Ok(ExtendedValue::PLUS_INFINITY);
            }
        }
        Ok(ExtendedValue::finite(f_expr.eval_real(&env)?)?)
    })
    .map_err(|e| core(f_line, e))?;
    f.ensure_proper().map_err(|e| core(f_line, e))?;

    let dual = reader("dual");
    let m_decl = dual.get("dimension").map(|e| integer(e, &e.value).map(|v| v as usize)).transpose()?;
    let b = match dual.grid("", m_decl)? {
        Some(b) => b,
        None => {
            if dual.get("count").is_some() || dual.get("step").is_some() {
                return Err(err_nl("[dual] gives a count or step without `range`"));
            }
            let m = m_decl.unwrap_or(1);
            Arc::new(PointSet::cartesian(vec![Axis::new(0.0, 0.0, 1).expect("valid"); m]).expect("valid"))
        }
    };
    let m = b.dimension();

    let cpl = reader("coupling");
    let kind = cpl.word("kind")?;
    let kind_line = kind.as_ref().map(|(e, _)| e.line);
    let params = cpl.numbers("params")?.unwrap_or_default();
    let coupling = match kind.as_ref().map_or("zero", |(_, k)| k.as_str()) {
        "zero" => CouplingSpec::Zero,
        "norm" => CouplingSpec::Norm,
        "exp_gap" => CouplingSpec::ExpGap,
        "bilinear" => CouplingSpec::Bilinear,
        "lagrangian" => CouplingSpec::Lagrangian { constraints: constraints.clone() },
        "min_lagrangian" => {
            let blocks = cpl.integers("blocks")?.and_then(|v| v.first().copied()).unwrap_or(1) as usize;
            CouplingSpec::MinLagrangian { constraints: constraints.clone(), blocks }
        }
        "custom" => {
            let vars = [(Block::X, n), (Block::Y, m), (Block::W, params.len())];
            let expr = cpl.expression("expr", &vars)?.ok_or_else(|| err_nl("coupling kind custom needs `expr`"))?;
            CouplingSpec::Custom { expr, params }
        }
        other => return Err(err(kind_line.unwrap_or(0), format!("unknown coupling kind `{other}`"))),
    };
    coupling.check_dimensions(&a, &b).map_err(|e| core(kind_line, e))?;
    let check_d2 = cpl.bool("check_d2")?.unwrap_or(b.is_cartesian());

    let pert = reader("perturbation");
    let perturbation = if sections.contains_key("perturbation") {
        let u = pert.grid("u_", None)?.ok_or_else(|| err_nl("missing required key `u_range` in [perturbation]"))?;
        let u_star = pert.grid("u_star_", Some(u.dimension()))?.unwrap_or_else(|| u.clone());
        let phi = pert.expression("phi", &[(Block::X, n), (Block::U, u.dimension())])?.ok_or_else(|| err_nl("missing required key `phi` in [perturbation]"))?;
        Some(PerturbationSpec { phi, u, u_star })
    } else {
        None
    };

    let gap_reader = reader("gap");
    let gap = if sections.contains_key("gap") {
        let c = gap_reader.grid("c_", Some(n))?.unwrap_or_else(|| a.clone());
        let operator = match (gap_reader.get("graph"), gap_reader.expressions("operator", &[(Block::Y, n)])?) {
            (Some(_), Some(_)) => return Err(err(gap_reader.get("graph").expect("present").line, "give `graph` or `operator`, not both")),
            (Some(e), None) => {
                let rel = unquote(e, &e.value)?;
                let full = path.parent().map_or_else(|| PathBuf::from(&rel), |dir| dir.join(&rel));
                if !full.exists() {
                    return Err(err(e.line, format!("graph file {} does not exist", full.display())));
                }
                Some(OperatorSource::Graph(full))
            }
            (None, Some(components)) => {
                if components.len() != n {
                    return Err(err(gap_reader.get("operator").expect("present").line, format!("operator has {} components, expected {n}", components.len())));
                }
                Some(OperatorSource::Expressions { components, c })
            }
            (None, None) => None,
        };
        let bifunction = gap_reader.expression("bifunction", &[(Block::X, n), (Block::Y, n)])?;
        Some(GapSpec { operator, bifunction })
    } else {
        None
    };

    let stab = reader("stability");
    let stability = if sections.contains_key("stability") {
        let (fam_entry, fam) = stab.word("family")?.ok_or_else(|| err_nl("missing required key `family` in [stability]"))?;
        let family = match fam.as_str() {
            "shift" => Family::Shift { a: stab.number("a")?.unwrap_or(1.0) },
            "scale" => Family::Scale { b: stab.number("b")?.unwrap_or(1.0) },
            "custom" => Family::Custom {
                f: stab.expression("f_k", &[(Block::X, n), (Block::W, 1)])?,
                g: stab.expression("g_k", &[(Block::X, n), (Block::Y, m), (Block::W, 1)])?,
            },
            other => return Err(err(fam_entry.line, format!("unknown family `{other}`"))),
        };
        let k_values = stab.integers("k")?.unwrap_or_else(|| (0..7).map(|e| 1u64 << e).collect());
        if k_values.is_empty() || k_values.contains(&0) {
            return Err(err(stab.get("k").map_or(0, |e| e.line), "k values must be positive"));
        }
        Some(StabilitySpec { family, k_values })
    } else {
        None
    };

    Ok(ProblemSpec {
        path: path.to_path_buf(),
        tolerances,
        bounding,
        a,
        f_expr,
        f,
        constraints,
        b,
        coupling,
        check_d2,
        perturbation,
        gap,
        stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProblemSpec, CliError> {
        parse_spec(text, Path::new("inline.spec"))
    }

    const MINIMAL: &str = "[primal]\ndimension = 1\nrange = -1:1\ncount = 5\nf = \"x1^2\"\n";

    #[test]
    fn minimal_spec_defaults() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.coupling, CouplingSpec::Zero);
        assert_eq!(s.b.len(), 1);
        assert_eq!(s.b.point(0), &[0.0]);
        assert_eq!(s.tolerances, ToleranceConfig::default());
        assert_eq!(s.f.len(), 5);
        assert!(s.perturbation.is_none() && s.gap.is_none() && s.stability.is_none());
    }

    #[test]
    fn lagrangian_without_constraints() {
        let text = format!("{MINIMAL}[coupling]\nkind = lagrangian\n");
        let e = parse(&text).unwrap_err().to_string();
        assert!(e.contains("lagrangian requires constraints"), "{e}");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = format!("{MINIMAL}[dual]\nrange = 0:1\nsteps = 0.5\n");
        let e = parse(&text).unwrap_err();
        assert!(matches!(e, CliError::Spec { line: Some(8), .. }), "{e:?}");
        assert!(e.to_string().contains("steps"));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = parse("[primal]\ndimension = 1\nrange = -1:1\ncount = 5\nf = \"min(x1, \"\n").unwrap_err();
        assert!(matches!(e, CliError::Spec { line: Some(5), .. }), "{e:?}");
        let e = parse("[primal]\ndimension = 2\nrange = -1:1\ncount = 5\nf = \"x1\"\n").unwrap_err();
        assert!(matches!(e, CliError::Spec { line: Some(3), .. }), "{e:?}");
        let e = parse("[primal]\ndimension = 1\nrange = -1:1\ncount = 5\nf = \"x2\"\n").unwrap_err();
        assert!(e.to_string().contains("x2"));
        assert!(parse("dimension = 1\n").is_err());
        assert!(parse("[nowhere]\n").is_err());
    }

    #[test]
    fn constraints_and_domain() {
        let text = "[primal]\ndimension = 1\nrange = -1:4\nstep = 0.5\nf = \"x1^2\"  # objective\nconstraints = \"1 - x1\"\ndomain = \"x1 - 3\"\n\
                    [dual]\nrange = 0:4\nstep = 0.5\n[coupling]\nkind = lagrangian\n";
        let s = parse(text).unwrap();
        assert_eq!(s.a.len(), 7);
        assert_eq!(s.a.point(0), &[1.0]);
        assert!(s.f.value(6).is_plus_infinity());
        assert!(s.f.value(4).is_finite());
        assert_eq!(s.b.len(), 9);
    }

    #[test]
    fn custom_coupling_params() {
        let text = format!("{MINIMAL}[dual]\nrange = -1:1\ncount = 3\n[coupling]\nkind = custom\nexpr = \"w1 * max(y1, x1, 0)\"\nparams = 2\n");
        let s = parse(&text).unwrap();
        assert!(matches!(s.coupling, CouplingSpec::Custom { ref params, .. } if params == &[2.0]));
        let bad = format!("{MINIMAL}[coupling]\nkind = custom\nexpr = \"w2\"\nparams = 2\n");
        assert!(parse(&bad).is_err());
    }
}
