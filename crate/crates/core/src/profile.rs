//! Pen portraits (mean z-score per cluster and variable) and the boolean
//! at-risk rule evaluated over them.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

pub const DEFAULT_EPSILON: f64 = 0.1;

pub const DEFAULT_RISK_RULE: &str = "nvq3_plus < 0 AND (unemployed > 0 OR inactive > 0) AND \
     (mixed > 0.5 OR indian > 0.5 OR pakistani_bangladeshi > 0.5 OR black > 0.5 OR other_minority > 0.5)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Above,
    Near,
    Below,
}

impl Direction {
    pub fn of(mean_z: f64, epsilon: f64) -> Self {
        if mean_z > epsilon {
            Direction::Above
        } else if mean_z < -epsilon {
            Direction::Below
        } else {
            Direction::Near
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Above => "above",
            Direction::Near => "near",
            Direction::Below => "below",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableProfile {
    pub variable: String,
    pub mean_z: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub name: String,
    pub size: usize,
    pub variables: Vec<VariableProfile>,
    pub at_risk: bool,
    /// Rule atoms that held for this cluster.
    pub rationale: Vec<String>,
}

impl ClusterProfile {
    pub fn mean_z(&self, variable: &str) -> Option<f64> {
        self.variables.iter().find(|v| v.variable == variable).map(|v| v.mean_z)
    }
}

pub fn default_name(cluster: usize) -> String {
    format!("Cluster {}", cluster + 1)
}

/// Per-cluster mean z of every variable, tagged with a dead-band of `epsilon`.
pub fn pen_portrait(features: &FeatureMatrix, model: &ClusterModel, epsilon: f64) -> Result<Vec<ClusterProfile>> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!("dead-band must be >= 0, got {epsilon}")));
    }
    let z = &features.z;
    if model.assignments.len() != z.rows() {
        return Err(Error::DimensionMismatch { expected: z.rows(), got: model.assignments.len() });
    }
    let d = z.cols();
    let mut sums = vec![vec![0.0; d]; model.k];
    for (row, &a) in z.iter_rows().zip(&model.assignments) {
        for (s, x) in sums[a].iter_mut().zip(row) {
            *s += x;
        }
    }
    model
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(c, size)| {
            if size == 0 {
                return Err(Error::EmptyCluster(c));
            }
            let variables = features
                .variables
                .iter()
                .zip(&sums[c])
                .map(|(v, s)| {
                    let mean_z = s / size as f64;
                    VariableProfile { variable: v.name.clone(), mean_z, direction: Direction::of(mean_z, epsilon) }
                })
                .collect();
            Ok(ClusterProfile {
                cluster: c,
                name: default_name(c),
                size,
                variables,
                at_risk: false,
                rationale: Vec::new(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    fn holds(self, x: f64, t: f64) -> bool {
        match self {
            Comparator::Lt => x < t,
            Comparator::Le => x <= t,
            Comparator::Gt => x > t,
            Comparator::Ge => x >= t,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub variable: String,
    pub cmp: Comparator,
    pub threshold: f64,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.variable, self.cmp.symbol(), self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Atom(Atom),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    fn eval(&self, lookup: &dyn Fn(&str) -> f64) -> bool {
        match self {
            Expr::Atom(a) => a.cmp.holds(lookup(&a.variable), a.threshold),
            Expr::And(xs) => xs.iter().all(|x| x.eval(lookup)),
            Expr::Or(xs) => xs.iter().any(|x| x.eval(lookup)),
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Expr::Atom(a) => vec![a],
            Expr::And(xs) | Expr::Or(xs) => xs.iter().flat_map(|x| x.atoms()).collect(),
        }
    }

    pub fn atoms_mut(&mut self) -> Vec<&mut Atom> {
        match self {
            Expr::Atom(a) => vec![a],
            Expr::And(xs) | Expr::Or(xs) => xs.iter_mut().flat_map(|x| x.atoms_mut()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRule {
    pub expr: Expr,
    pub description: String,
}

impl Default for RiskRule {
    fn default() -> Self {
        Self::parse(DEFAULT_RISK_RULE).expect("default rule parses")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Cmp(Comparator),
    And,
    Or,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                toks.push(Tok::LParen);
                i += 1
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1
            }
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                toks.push(Tok::Cmp(match (c, eq) {
                    ('<', false) => Comparator::Lt,
                    ('<', true) => Comparator::Le,
                    ('>', false) => Comparator::Gt,
                    _ => Comparator::Ge,
                }));
                i += 1 + eq as usize;
            }
            '"' | '\'' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&x| x == c)
                    .ok_or_else(|| Error::RuleSyntax("unterminated quoted name".into()))?;
                toks.push(Tok::Ident(chars[i + 1..i + 1 + end].iter().collect()));
                i += end + 2;
            }
            _ if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '.'
                        || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| Error::RuleSyntax(format!("bad number {text:?}")))?;
                toks.push(Tok::Num(v));
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                toks.push(match word.to_ascii_uppercase().as_str() {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    _ => Tok::Ident(word),
                });
            }
            _ => return Err(Error::RuleSyntax(format!("unexpected character {c:?}"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn or(&mut self) -> Result<Expr> {
        let mut xs = vec![self.and()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            xs.push(self.and()?);
        }
        Ok(if xs.len() == 1 { xs.pop().unwrap() } else { Expr::Or(xs) })
    }

    fn and(&mut self) -> Result<Expr> {
        let mut xs = vec![self.primary()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            xs.push(self.primary()?);
        }
        Ok(if xs.len() == 1 { xs.pop().unwrap() } else { Expr::And(xs) })
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::LParen) => {
                let e = self.or()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(Error::RuleSyntax("missing `)`".into())),
                }
            }
            Some(Tok::Ident(variable)) => {
                let cmp = match self.next() {
                    Some(Tok::Cmp(c)) => c,
                    other => {
                        return Err(Error::RuleSyntax(format!("expected comparator after {variable}, found {other:?}")))
                    }
                };
                let threshold = match self.next() {
                    Some(Tok::Num(v)) => v,
                    other => {
                        return Err(Error::RuleSyntax(format!("expected number after {variable}, found {other:?}")))
                    }
                };
                Ok(Expr::Atom(Atom { variable, cmp, threshold }))
            }
            other => Err(Error::RuleSyntax(format!("unexpected token {other:?}"))),
        }
    }
}

impl RiskRule {
    /// Parses `var cmp number` atoms joined by AND / OR with parentheses.
    /// AND binds tighter than OR. Names may be quoted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { toks: tokenize(text)?, pos: 0 };
        if p.toks.is_empty() {
            return Err(Error::RuleSyntax("empty rule".into()));
        }
        let expr = p.or()?;
        if p.pos < p.toks.len() {
            return Err(Error::RuleSyntax(format!("trailing input at token {}", p.pos)));
        }
        Ok(Self { expr, description: text.trim().to_string() })
    }

    pub fn check_variables(&self, known: &[String]) -> Result<()> {
        match self.expr.atoms().into_iter().find(|a| !known.contains(&a.variable)) {
            Some(a) => Err(Error::UnknownVariableInRule(a.variable.clone())),
            None => Ok(()),
        }
    }

    /// Evaluates the rule against `profile`; returns the verdict and the atoms that held.
    pub fn evaluate(&self, profile: &ClusterProfile) -> Result<(bool, Vec<String>)> {
        let names: Vec<String> = profile.variables.iter().map(|v| v.variable.clone()).collect();
        self.check_variables(&names)?;
        let lookup = |name: &str| profile.mean_z(name).expect("checked");
        let verdict = self.expr.eval(&lookup);
        let held = self
            .expr
            .atoms()
            .into_iter()
            .filter(|a| a.cmp.holds(lookup(&a.variable), a.threshold))
            .map(|a| a.to_string())
            .collect();
        Ok((verdict, held))
    }
}

pub fn flag_risk(mut profiles: Vec<ClusterProfile>, rule: &RiskRule) -> Result<Vec<ClusterProfile>> {
    for p in &mut profiles {
        let (at_risk, rationale) = rule.evaluate(p)?;
        p.at_risk = at_risk;
        p.rationale = rationale;
    }
    Ok(profiles)
}

pub fn name_clusters(
    mut profiles: Vec<ClusterProfile>,
    names: &BTreeMap<usize, String>,
) -> Result<Vec<ClusterProfile>> {
    for (&id, name) in names {
        let p = profiles.iter_mut().find(|p| p.cluster == id).ok_or(Error::UnknownClusterId(id))?;
        p.name = name.clone();
    }
    Ok(profiles)
}

pub fn write_profiles_csv<W: Write>(profiles: &[ClusterProfile], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cluster", "name", "size", "at_risk", "variable", "mean_z", "direction"])?;
    for p in profiles {
        for v in &p.variables {
            out.write_record([
                p.cluster.to_string(),
                p.name.clone(),
                p.size.to_string(),
                p.at_risk.to_string(),
                v.variable.clone(),
                v.mean_z.to_string(),
                v.direction.as_str().to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("profiles.csv", e))?;
    Ok(())
}

/// Markdown report with one section per cluster.
pub fn portraits_markdown(profiles: &[ClusterProfile], rule: &RiskRule) -> String {
    let mut s = String::from("# Pen portraits\n\n");
    let _ = writeln!(s, "At-risk rule: `{}`\n", rule.description);
    let flagged: Vec<&ClusterProfile> = profiles.iter().filter(|p| p.at_risk).collect();
    let _ = writeln!(
        s,
        "{} of {} clusters flagged at risk, covering {} districts.\n",
        flagged.len(),
        profiles.len(),
        flagged.iter().map(|p| p.size).sum::<usize>()
    );
    for p in profiles {
        let _ = writeln!(s, "## {} (cluster {}, {} districts)\n", p.name, p.cluster, p.size);
        if p.at_risk {
            let _ = writeln!(s, "**At risk.** Held: {}.\n", p.rationale.join("; "));
        }
        let mut sorted: Vec<&VariableProfile> = p.variables.iter().collect();
        sorted.sort_by(|a, b| b.mean_z.abs().total_cmp(&a.mean_z.abs()).then_with(|| a.variable.cmp(&b.variable)));
        for dir in [Direction::Above, Direction::Below] {
            let list: Vec<String> = sorted
                .iter()
                .filter(|v| v.direction == dir)
                .map(|v| format!("{} ({:+.2})", v.variable, v.mean_z))
                .collect();
            if !list.is_empty() {
                let _ = writeln!(s, "- {} average: {}", dir.as_str(), list.join(", "));
            }
        }
        let near = sorted.iter().filter(|v| v.direction == Direction::Near).count();
        if near > 0 {
            let _ = writeln!(s, "- near average: {near} variable(s)");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(pairs: &[(&str, f64)]) -> ClusterProfile {
        ClusterProfile {
            cluster: 0,
            name: default_name(0),
            size: 1,
            variables: pairs
                .iter()
                .map(|&(n, z)| VariableProfile {
                    variable: n.into(),
                    mean_z: z,
                    direction: Direction::of(z, DEFAULT_EPSILON),
                })
                .collect(),
            at_risk: false,
            rationale: Vec::new(),
        }
    }

    const ALL: [&str; 11] = [
        "aged_16_24",
        "aged_25_34",
        "aged_35_44",
        "mixed",
        "indian",
        "pakistani_bangladeshi",
        "black",
        "other_minority",
        "nvq3_plus",
        "unemployed",
        "inactive",
    ];

    #[test]
    fn parses_precedence_and_quotes() {
        let r = RiskRule::parse("a < 1 OR \"b c\" >= -2.5e0 AND c > 0").unwrap();
        match &r.expr {
            Expr::Or(xs) => {
                assert_eq!(xs.len(), 2);
                assert!(matches!(&xs[1], Expr::And(ys) if ys.len() == 2));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(r.expr.atoms()[1].variable, "b c");
        assert_eq!(r.expr.atoms()[1].threshold, -2.5);
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "a <", "a 1", "(a < 1", "a < 1 b", "a < 1 AND", "a ! 1", "'a < 1"] {
            assert!(matches!(RiskRule::parse(bad), Err(Error::RuleSyntax(_))), "{bad}");
        }
    }

    #[test]
    fn default_rule_on_hand_profiles() {
        let rule = RiskRule::default();
        let zero = profile(&ALL.map(|n| (n, 0.0)));
        assert_eq!(rule.evaluate(&zero).unwrap(), (false, vec![]));

        let mut vals = ALL.map(|n| (n, 0.0));
        for (n, z) in vals.iter_mut() {
            *z = match *n {
                "nvq3_plus" => -0.8,
                "unemployed" => 0.6,
                "pakistani_bangladeshi" => 2.1,
                _ => 0.0,
            };
        }
        let (flag, why) = rule.evaluate(&profile(&vals)).unwrap();
        assert!(flag);
        assert_eq!(why, vec!["nvq3_plus < 0", "unemployed > 0", "pakistani_bangladeshi > 0.5"]);
    }

    #[test]
    fn unknown_variable_is_reported() {
        let rule = RiskRule::parse("nope > 0").unwrap();
        let p = profile(&[("a", 1.0)]);
        assert!(matches!(flag_risk(vec![p], &rule), Err(Error::UnknownVariableInRule(v)) if v == "nope"));
    }

    #[test]
    fn naming() {
        let ps = vec![profile(&[("a", 1.0)])];
        let same = name_clusters(ps.clone(), &BTreeMap::new()).unwrap();
        assert_eq!(same[0].name, "Cluster 1");
        let named = name_clusters(ps.clone(), &BTreeMap::from([(0, "Rural Retirees".to_string())])).unwrap();
        assert_eq!(named[0].name, "Rural Retirees");
        assert!(matches!(name_clusters(ps, &BTreeMap::from([(4, "x".to_string())])), Err(Error::UnknownClusterId(4))));
    }

    #[test]
    fn dead_band() {
        assert_eq!(Direction::of(0.1, 0.1), Direction::Near);
        assert_eq!(Direction::of(0.11, 0.1), Direction::Above);
        assert_eq!(Direction::of(-0.2, 0.1), Direction::Below);
    }
}
