//! Theorem tags, multiplier sets and their text form.
//!
//! Text form: whitespace-separated `key=value` items, e.g.
//! `theorem=T32a lamL=1,1 lamU=1,1 mu=1,7,0,0,4.5`. Vectors are comma
//! separated, the objective index `c` and decomposition blocks are 1-based,
//! blocks are separated by `|` (`blocks=1|2|3,4|5`).

use std::fmt;
use std::str::FromStr;

use crate::calculus::Bound;

use super::KktError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Theorem {
    T32a,
    T32b,
    T32c,
    T33,
    T34a,
    T34b,
    T35a,
    T35b,
    T35c,
    T36a,
    T36b,
    T37a,
    T37b,
    T38a,
    T38b,
    T41,
}

pub const ALL_THEOREMS: [Theorem; 16] = [
    Theorem::T32a,
    Theorem::T32b,
    Theorem::T32c,
    Theorem::T33,
    Theorem::T34a,
    Theorem::T34b,
    Theorem::T35a,
    Theorem::T35b,
    Theorem::T35c,
    Theorem::T36a,
    Theorem::T36b,
    Theorem::T37a,
    Theorem::T37b,
    Theorem::T38a,
    Theorem::T38b,
    Theorem::T41,
];

/// The six Pareto optimality notions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParetoClass {
    TypeI,
    StrongI,
    WeakI,
    TypeII,
    StrongII,
    WeakII,
}

pub const ALL_CLASSES: [ParetoClass; 6] = [
    ParetoClass::TypeI,
    ParetoClass::StrongI,
    ParetoClass::WeakI,
    ParetoClass::TypeII,
    ParetoClass::StrongII,
    ParetoClass::WeakII,
];

impl ParetoClass {
    pub fn name(self) -> &'static str {
        match self {
            ParetoClass::TypeI => "type-I",
            ParetoClass::StrongI => "strong-I",
            ParetoClass::WeakI => "weak-I",
            ParetoClass::TypeII => "type-II",
            ParetoClass::StrongII => "strong-II",
            ParetoClass::WeakII => "weak-II",
        }
    }

    /// True for the classes defined through the LU order.
    pub fn is_lu(self) -> bool {
        matches!(self, ParetoClass::TypeI | ParetoClass::StrongI | ParetoClass::WeakI)
    }
}

impl fmt::Display for ParetoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParetoClass {
    type Err = KktError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_CLASSES
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| KktError::Shape(format!("unknown Pareto class `{s}`")))
    }
}

/// Which verification routine a theorem belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Weighted,
    Split,
    Strong,
    GeneralizedHukuhara,
}

impl Theorem {
    pub fn tag(self) -> &'static str {
        match self {
            Theorem::T32a => "T32a",
            Theorem::T32b => "T32b",
            Theorem::T32c => "T32c",
            Theorem::T33 => "T33",
            Theorem::T34a => "T34a",
            Theorem::T34b => "T34b",
            Theorem::T35a => "T35a",
            Theorem::T35b => "T35b",
            Theorem::T35c => "T35c",
            Theorem::T36a => "T36a",
            Theorem::T36b => "T36b",
            Theorem::T37a => "T37a",
            Theorem::T37b => "T37b",
            Theorem::T38a => "T38a",
            Theorem::T38b => "T38b",
            Theorem::T41 => "T41",
        }
    }

    pub fn claimed_class(self) -> ParetoClass {
        use Theorem::*;
        match self {
            T32a | T33 | T34a | T41 => ParetoClass::TypeI,
            T32b | T32c | T34b => ParetoClass::TypeII,
            T35a | T36a => ParetoClass::WeakI,
            T35b | T35c | T36b => ParetoClass::WeakII,
            T37a | T38a => ParetoClass::StrongI,
            T37b | T38b => ParetoClass::StrongII,
        }
    }

    pub fn family(self) -> Family {
        use Theorem::*;
        match self {
            T32a | T32b | T32c | T35a | T35b | T35c => Family::Weighted,
            T33 | T34a | T34b | T36a | T36b => Family::Split,
            T37a | T37b | T38a | T38b => Family::Strong,
            T41 => Family::GeneralizedHukuhara,
        }
    }

    /// Whether the theorem selects a single objective `c`.
    pub fn uses_index(self) -> bool {
        use Theorem::*;
        matches!(self, T35a | T35b | T35c | T36a | T36b | T37a | T37b | T38a | T38b)
    }

    /// Admissible `bound=` values for the strong theorems.
    pub fn bounds(self) -> &'static [Bound] {
        match self {
            Theorem::T37a | Theorem::T38a => &[Bound::Lower, Bound::Upper],
            Theorem::T37b | Theorem::T38b => &[Bound::Center, Bound::HalfWidth],
            _ => &[],
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Theorem {
    type Err = KktError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_THEOREMS
            .into_iter()
            .find(|t| t.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| KktError::Shape(format!("unknown theorem tag `{s}`")))
    }
}

/// Multiplier vectors keyed by their role. Unused roles stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Multipliers {
    pub lam_l: Option<Vec<f64>>,
    pub lam_u: Option<Vec<f64>>,
    pub lam_c: Option<Vec<f64>>,
    pub lam_w: Option<Vec<f64>>,
    pub lam: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub mu_l: Option<Vec<f64>>,
    pub mu_u: Option<Vec<f64>>,
    pub mu_c: Option<Vec<f64>>,
    pub mu_w: Option<Vec<f64>>,
    /// Zero-based objective index.
    pub index: Option<usize>,
    pub bound: Option<Bound>,
    /// Zero-based constraint indices per block.
    pub blocks: Option<Vec<Vec<usize>>>,
}

/// Names of the multiplier vectors, in print order.
pub const VECTOR_KEYS: [&str; 10] = [
    "lamL", "lamU", "lamC", "lamW", "lam", "mu", "muL", "muU", "muC", "muW",
];

impl Multipliers {
    pub fn vector(&self, key: &str) -> Option<&Vec<f64>> {
        match key {
            "lamL" => self.lam_l.as_ref(),
            "lamU" => self.lam_u.as_ref(),
            "lamC" => self.lam_c.as_ref(),
            "lamW" => self.lam_w.as_ref(),
            "lam" => self.lam.as_ref(),
            "mu" => self.mu.as_ref(),
            "muL" => self.mu_l.as_ref(),
            "muU" => self.mu_u.as_ref(),
            "muC" => self.mu_c.as_ref(),
            "muW" => self.mu_w.as_ref(),
            _ => None,
        }
    }

    pub fn vector_mut(&mut self, key: &str) -> Option<&mut Option<Vec<f64>>> {
        Some(match key {
            "lamL" => &mut self.lam_l,
            "lamU" => &mut self.lam_u,
            "lamC" => &mut self.lam_c,
            "lamW" => &mut self.lam_w,
            "lam" => &mut self.lam,
            "mu" => &mut self.mu,
            "muL" => &mut self.mu_l,
            "muU" => &mut self.mu_u,
            "muC" => &mut self.mu_c,
            "muW" => &mut self.mu_w,
            _ => return None,
        })
    }

    /// All constraint multiplier vectors that are present.
    pub fn mu_vectors(&self) -> Vec<(&'static str, &Vec<f64>)> {
        ["mu", "muL", "muU", "muC", "muW"]
            .into_iter()
            .filter_map(|k| self.vector(k).map(|v| (k, v)))
            .collect()
    }

    /// Multiplies every vector by `k`.
    pub fn scaled(&self, k: f64) -> Multipliers {
        let mut out = self.clone();
        for key in VECTOR_KEYS {
            if let Some(Some(v)) = out.vector_mut(key) {
                v.iter_mut().for_each(|x| *x *= k);
            }
        }
        out
    }
}

/// Expected vector keys and lengths for a theorem with `l` objectives and `t` constraints.
pub fn expected_shape(theorem: Theorem, l: usize, t: usize) -> Vec<(&'static str, usize)> {
    use Theorem::*;
    match theorem {
        T32a | T32c => vec![("lamL", l), ("lamU", l), ("mu", t)],
        T32b => vec![("lamC", l), ("lamW", l), ("mu", t)],
        T33 => vec![("mu", t)],
        T34a => vec![("lamL", l), ("lamU", l), ("muL", t), ("muU", t)],
        T34b => vec![("lamC", l), ("lamW", l), ("muC", t), ("muW", t)],
        T35a | T35c => vec![("lamL", 1), ("lamU", 1), ("mu", t)],
        T35b => vec![("lamC", 1), ("lamW", 1), ("mu", t)],
        T36a => vec![("muL", t), ("muU", t)],
        T36b => vec![("muC", t), ("muW", t)],
        T37a | T37b | T38a | T38b => vec![("mu", t)],
        T41 => vec![("lam", l), ("mu", t)],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub theorem: Theorem,
    pub multipliers: Multipliers,
}

impl Certificate {
    pub fn claimed_class(&self) -> ParetoClass {
        self.theorem.claimed_class()
    }

    /// Checks vector presence and lengths, the index, bound and decomposition.
    ///
    /// Sign requirements are not shape: they are reported by verification.
    pub fn check_shape(&self, l: usize, t: usize) -> Result<(), KktError> {
        let th = self.theorem;
        let m = &self.multipliers;
        let shape = expected_shape(th, l, t);
        for (key, len) in &shape {
            match m.vector(key) {
                None if *len == 0 => {}
                None => return Err(KktError::Shape(format!("{th} requires `{key}` with {len} entries"))),
                Some(v) if v.len() != *len => {
                    return Err(KktError::Shape(format!(
                        "{th}: `{key}` has {} entries, expected {len}",
                        v.len()
                    )))
                }
                Some(v) if v.iter().any(|x| !x.is_finite()) => {
                    return Err(KktError::Shape(format!("{th}: `{key}` has non-finite entries")))
                }
                Some(_) => {}
            }
        }
        for key in VECTOR_KEYS {
            if m.vector(key).is_some() && !shape.iter().any(|(k, _)| *k == key) {
                return Err(KktError::Shape(format!("{th} does not take `{key}`")));
            }
        }
        if th.uses_index() {
            match m.index {
                None => return Err(KktError::Shape(format!("{th} requires an objective index `c`"))),
                Some(c) if c >= l => {
                    return Err(KktError::Shape(format!("objective index c={} out of range 1..={l}", c + 1)))
                }
                Some(_) => {}
            }
        } else if m.index.is_some() {
            return Err(KktError::Shape(format!("{th} does not take an objective index")));
        }
        let bounds = th.bounds();
        match m.bound {
            None if !bounds.is_empty() => {
                let names: Vec<_> = bounds.iter().map(|b| b.tag()).collect();
                return Err(KktError::Shape(format!("{th} requires bound={}", names.join("|"))));
            }
            Some(b) if !bounds.contains(&b) => {
                return Err(KktError::Shape(format!("{th} does not accept bound={b}")));
            }
            _ => {}
        }
        if th == Theorem::T33 {
            if t < 2 * l {
                return Err(KktError::Shape(format!(
                    "T33 needs at least 2l = {} constraints, problem has {t}",
                    2 * l
                )));
            }
            let blocks = m
                .blocks
                .as_ref()
                .ok_or_else(|| KktError::Shape("T33 requires `blocks`".into()))?;
            check_decomposition(blocks, t, 2 * l)?;
        } else if m.blocks.is_some() {
            return Err(KktError::Shape(format!("{th} does not take `blocks`")));
        }
        Ok(())
    }
}

/// `blocks` must be `count` disjoint nonempty sets covering `0..t`.
pub fn check_decomposition(blocks: &[Vec<usize>], t: usize, count: usize) -> Result<(), KktError> {
    if blocks.len() != count {
        return Err(KktError::Decomposition(format!(
            "expected {count} blocks, got {}",
            blocks.len()
        )));
    }
    let mut seen = vec![false; t];
    for (i, b) in blocks.iter().enumerate() {
        if b.is_empty() {
            return Err(KktError::Decomposition(format!("block {} is empty", i + 1)));
        }
        for &u in b {
            if u >= t {
                return Err(KktError::Decomposition(format!("constraint {} does not exist", u + 1)));
            }
            if seen[u] {
                return Err(KktError::Decomposition(format!("constraint {} appears twice", u + 1)));
            }
            seen[u] = true;
        }
    }
    if let Some(u) = seen.iter().position(|s| !s) {
        return Err(KktError::Decomposition(format!("constraint {} is not covered", u + 1)));
    }
    Ok(())
}

fn parse_vector(key: &str, s: &str) -> Result<Vec<f64>, KktError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            crate::expr::eval_constant(x.trim())
                .map_err(|_| KktError::Shape(format!("`{key}`: malformed number `{x}`")))
        })
        .collect()
}

fn parse_index(key: &str, s: &str) -> Result<usize, KktError> {
    match s.trim().parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v - 1),
        _ => Err(KktError::Shape(format!("`{key}` must be a positive integer, got `{s}`"))),
    }
}

impl FromStr for Certificate {
    type Err = KktError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut theorem = None;
        let mut m = Multipliers::default();
        for item in s.split_whitespace() {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| KktError::Shape(format!("expected key=value, got `{item}`")))?;
            match key {
                "theorem" => theorem = Some(value.parse::<Theorem>()?),
                "c" => m.index = Some(parse_index(key, value)?),
                "bound" => {
                    m.bound = Some(
                        Bound::from_tag(value)
                            .ok_or_else(|| KktError::Shape(format!("bound must be L, U, C or W, got `{value}`")))?,
                    )
                }
                "blocks" => {
                    let blocks = value
                        .split('|')
                        .map(|b| b.split(',').map(|u| parse_index("blocks", u)).collect())
                        .collect::<Result<Vec<Vec<usize>>, _>>()?;
                    m.blocks = Some(blocks);
                }
                other => {
                    let slot = m
                        .vector_mut(other)
                        .ok_or_else(|| KktError::Shape(format!("unknown certificate key `{other}`")))?;
                    if slot.is_some() {
                        return Err(KktError::Shape(format!("duplicate key `{other}`")));
                    }
                    *slot = Some(parse_vector(other, value)?);
                }
            }
        }
        let theorem = theorem.ok_or_else(|| KktError::Shape("certificate needs theorem=<tag>".into()))?;
        Ok(Certificate {
            theorem,
            multipliers: m,
        })
    }
}

fn write_vec(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

/// Round-trips through [`FromStr`]: values print with full precision.
impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.multipliers;
        write!(f, "theorem={}", self.theorem)?;
        if let Some(c) = m.index {
            write!(f, " c={}", c + 1)?;
        }
        if let Some(b) = m.bound {
            write!(f, " bound={b}")?;
        }
        for key in VECTOR_KEYS {
            if let Some(v) = m.vector(key) {
                write!(f, " {key}=")?;
                write_vec(f, v)?;
            }
        }
        if let Some(blocks) = &m.blocks {
            f.write_str(" blocks=")?;
            for (i, b) in blocks.iter().enumerate() {
                if i > 0 {
                    f.write_str("|")?;
                }
                let items: Vec<String> = b.iter().map(|u| (u + 1).to_string()).collect();
                f.write_str(&items.join(","))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let src = "theorem=T32a lamL=1,1 lamU=1,1 mu=1,7,0,0,4.5";
        let cert: Certificate = src.parse().unwrap();
        assert_eq!(cert.theorem, Theorem::T32a);
        assert_eq!(cert.multipliers.mu.as_deref(), Some(&[1.0, 7.0, 0.0, 0.0, 4.5][..]));
        assert_eq!(cert.to_string(), src);
        assert_eq!(cert.to_string().parse::<Certificate>().unwrap(), cert);
        cert.check_shape(2, 5).unwrap();
        assert_eq!(cert.claimed_class(), ParetoClass::TypeI);

        let t33: Certificate = "theorem=T33 mu=1,2,3,4,5 blocks=1|2|3,4|5".parse().unwrap();
        assert_eq!(t33.multipliers.blocks, Some(vec![vec![0], vec![1], vec![2, 3], vec![4]]));
        assert_eq!(t33.to_string().parse::<Certificate>().unwrap(), t33);
        t33.check_shape(2, 5).unwrap();

        let fine = Certificate {
            theorem: Theorem::T41,
            multipliers: Multipliers {
                lam: Some(vec![0.1 + 0.2, 1.0 / 3.0]),
                mu: Some(vec![]),
                ..Default::default()
            },
        };
        assert_eq!(fine.to_string().parse::<Certificate>().unwrap(), fine);
    }

    #[test]
    fn shape_errors() {
        let bad = |s: &str, l, t| s.parse::<Certificate>().unwrap().check_shape(l, t).unwrap_err();
        assert!(matches!(bad("theorem=T32a lamL=1 lamU=1,1 mu=0", 2, 1), KktError::Shape(_)));
        assert!(matches!(bad("theorem=T32a lamL=1 lamU=1", 1, 1), KktError::Shape(_)));
        assert!(matches!(bad("theorem=T35a lamL=1 lamU=2 mu=0", 1, 1), KktError::Shape(_)));
        assert!(matches!(bad("theorem=T35a c=3 lamL=1 lamU=2 mu=0", 2, 1), KktError::Shape(_)));
        assert!(matches!(bad("theorem=T37a c=1 mu=0", 1, 1), KktError::Shape(_)));
        assert!(matches!(bad("theorem=T37a c=1 bound=C mu=0", 1, 1), KktError::Shape(_)));
        assert!(matches!(bad("theorem=T33 mu=1,1,1 blocks=1|2|3", 2, 3), KktError::Shape(_)));
        assert!(matches!(
            bad("theorem=T33 mu=1,1,1,1 blocks=1|2|3|3", 2, 4),
            KktError::Decomposition(_)
        ));
        assert!(matches!(
            bad("theorem=T33 mu=1,1,1,1,1 blocks=1|2|3|4", 2, 5),
            KktError::Decomposition(_)
        ));
        assert!(matches!(bad("theorem=T41 lam=1 mu=0 muL=0", 1, 1), KktError::Shape(_)));
        assert!("theorem=T99".parse::<Certificate>().is_err());
        assert!("lam=1".parse::<Certificate>().is_err());
        assert!("theorem=T41 foo=1".parse::<Certificate>().is_err());
    }

    #[test]
    fn claimed_classes() {
        assert_eq!(Theorem::T34a.claimed_class(), ParetoClass::TypeI);
        assert_eq!(Theorem::T32c.claimed_class(), ParetoClass::TypeII);
        assert_eq!(Theorem::T36b.claimed_class(), ParetoClass::WeakII);
        assert_eq!(Theorem::T38a.claimed_class(), ParetoClass::StrongI);
        assert_eq!(Theorem::T37b.claimed_class(), ParetoClass::StrongII);
        assert_eq!(Theorem::T41.family(), Family::GeneralizedHukuhara);
    }
}
