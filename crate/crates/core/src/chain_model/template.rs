//! Templates: letter strings of length `L + 2`, with the validity automaton,
//! legality rules, labels and the step-to-gate map `g(t)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::symbol::Letter;
use crate::error::{Error, Result};

use Letter::*;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Template(pub Vec<Letter>);

impl Template {
    pub fn new(letters: Vec<Letter>) -> Self {
        Template(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Gate count `L` of the chain this template lives on.
    pub fn chain_l(&self) -> usize {
        self.0.len().saturating_sub(2)
    }

    /// Number of computation letters.
    pub fn m(&self) -> usize {
        self.0.iter().filter(|l| l.is_computation()).count()
    }

    /// Number of letters carrying a qubit (`S` excluded).
    pub fn bit_count(&self) -> usize {
        self.0.iter().filter(|l| l.has_bit()).count()
    }

    pub fn pair(&self, site: usize) -> (Letter, Letter) {
        (self.0[site], self.0[site + 1])
    }

    pub fn map(&self, f: impl Fn(Letter) -> Letter) -> Template {
        Template(self.0.iter().map(|&l| f(l)).collect())
    }

    /// `T_R Q^n N^(L-n+1)` or, with `start`, `T_R S^n N^(L-n+1)`.
    pub fn initial(n: usize, l: usize, start: bool) -> Template {
        let comp = if start { S } else { Q };
        let mut v = vec![TR];
        v.extend(std::iter::repeat(comp).take(n));
        v.extend(std::iter::repeat(N).take(l + 1 - n));
        Template(v)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            f.write_str(l.name())?;
        }
        Ok(())
    }
}

impl FromStr for Template {
    type Err = Error;

    /// Accepts space-separated letters (`T_R Q Q N`) or, when there are no
    /// spaces, a compact string where `T_R`/`T_L` may be written `TR`/`TL`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains(char::is_whitespace) {
            return s.split_whitespace().map(str::parse).collect::<Result<Vec<_>>>().map(Template);
        }
        let mut out = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let take = if rest.starts_with("T_") {
                3
            } else if rest.starts_with('T') {
                2
            } else {
                1
            };
            if rest.len() < take {
                return Err(Error::Input(format!("truncated letter in `{s}`")));
            }
            out.push(rest[..take].parse()?);
            rest = &rest[take..];
        }
        Ok(Template(out))
    }
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

/// The nearest-neighbour pairs a valid template may contain.
pub const ALLOWED_PAIRS: [(Letter, Letter); 22] = [
    (F, F),
    (F, B),
    (B, B),
    (F, R),
    (F, L),
    (F, G),
    (B, R),
    (B, L),
    (B, G),
    (R, Q),
    (G, Q),
    (L, Q),
    (Q, Q),
    (Q, N),
    (N, N),
    (R, N),
    (G, N),
    (L, N),
    (F, TR),
    (TR, Q),
    (B, TL),
    (TL, N),
];

pub fn pair_allowed(a: Letter, b: Letter) -> bool {
    ALLOWED_PAIRS.contains(&(a, b))
}

pub fn first_allowed(a: Letter) -> bool {
    matches!(a, F | TR)
}

pub fn last_allowed(a: Letter) -> bool {
    a == N
}

/// Number of violated validity constraints; zero iff the template is valid.
pub fn validity_penalty(t: &Template) -> usize {
    let v = t.letters();
    if v.is_empty() {
        return 0;
    }
    let mut p = 0;
    if !first_allowed(v[0]) {
        p += 1;
    }
    if !last_allowed(v[v.len() - 1]) {
        p += 1;
    }
    p + v.windows(2).filter(|w| !pair_allowed(w[0], w[1])).count()
}

/// A pair at sites `(p, p+1)` straddles a block boundary iff `p mod n = 0`.
pub fn is_boundary(p: usize, n: usize) -> bool {
    p % n == 0
}

/// Pairs forbidden across a block boundary.
pub const BOUNDARY_FORBIDDEN: [(Letter, Letter); 4] = [(R, N), (F, R), (G, Q), (B, G)];
/// Pairs forbidden away from a block boundary.
pub const INTERIOR_FORBIDDEN: [(Letter, Letter); 2] = [(G, N), (F, G)];

pub fn pair_illegal(a: Letter, b: Letter, p: usize, n: usize) -> bool {
    if is_boundary(p, n) {
        BOUNDARY_FORBIDDEN.contains(&(a, b))
    } else {
        INTERIOR_FORBIDDEN.contains(&(a, b))
    }
}

/// Number of forbidden pairs present; zero iff the template is legal.
pub fn legality_penalty(t: &Template, n: usize) -> usize {
    t.letters()
        .windows(2)
        .enumerate()
        .filter(|(p, w)| pair_illegal(w[0], w[1], *p, n))
        .count()
}

/// `T_m = (2m+3)(L-m)+m`, the index of the final template of an `m`-chain.
pub fn last_index(m: usize, l: usize) -> usize {
    (2 * m + 3) * (l - m) + m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TemplateLabel {
    pub m: usize,
    pub t: usize,
    pub i: usize,
    pub j: usize,
}

impl TemplateLabel {
    fn new(m: usize, i: usize, j: usize) -> Self {
        TemplateLabel {
            m,
            t: i * (2 * m + 3) + j,
            i,
            j,
        }
    }
}

/// Reads `(m, t)` off a valid template.
///
/// The four shapes are, with `i = k`:
/// `F^k T_R Q^m N+` (j = 0), `F^(k+1) B^l (G|R) Q^(m-l-1) N+` (j = l+1),
/// `F^(k+1) B^m T_L N+` (j = m+1), `F^(k+1) B^(m-l) L Q^l N+` (j = m+2+l).
pub fn label(t: &Template) -> Result<TemplateLabel> {
    if validity_penalty(t) != 0 {
        return Err(Error::Validation(format!("cannot label invalid template {t}")));
    }
    let v = t.letters();
    let run = |from: usize, l: Letter| v[from..].iter().take_while(|&&x| x == l).count();
    let f = run(0, F);
    let b = run(f, B);
    let ctrl = v[f + b];
    let q = run(f + b + 1, Q);
    let m = t.m();
    let lab = match ctrl {
        TR => TemplateLabel::new(m, f, 0),
        R | G => TemplateLabel::new(m, f - 1, b + 1),
        TL => TemplateLabel::new(m, f - 1, m + 1),
        L => TemplateLabel::new(m, f - 1, m + 2 + q),
        other => {
            return Err(Error::Integrity(format!(
                "valid template {t} has unexpected control letter {other}"
            )))
        }
    };
    if lab.t > last_index(m, t.chain_l()) {
        return Err(Error::Integrity(format!(
            "label t = {} of {t} exceeds T_m = {}",
            lab.t,
            last_index(m, t.chain_l())
        )));
    }
    Ok(lab)
}

fn check_block(n: usize, l: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Input(format!("block size n must be >= 2, got {n}")));
    }
    if l == 0 || l % n != 0 {
        return Err(Error::Input(format!(
            "gate count L = {l} must be a positive multiple of n = {n}"
        )));
    }
    Ok(())
}

pub(crate) fn check_chain_params(n: usize, l: usize) -> Result<()> {
    check_block(n, l)
}

/// Number of gates applied by step `t`.
pub fn g_of_t(n: usize, l: usize, t: usize) -> Result<usize> {
    check_block(n, l)?;
    let big_t = last_index(n, l);
    if t > big_t {
        return Err(Error::Input(format!("step {t} outside 0..={big_t}")));
    }
    let period = 2 * n + 3;
    let (i, j) = (t / period, t % period);
    Ok(if i % n == 0 {
        i + n.min(j)
    } else {
        n * i.div_ceil(n)
    })
}

/// Every template of length `L + 2` with validity penalty zero, in
/// lexicographic letter order.
pub fn valid_templates(l: usize) -> Vec<Template> {
    let len = l + 2;
    let letters: Vec<Letter> = Letter::ALL.iter().copied().filter(|&x| x != S).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn dfs(len: usize, letters: &[Letter], cur: &mut Vec<Letter>, out: &mut Vec<Template>) {
        if cur.len() == len {
            if last_allowed(*cur.last().unwrap()) {
                out.push(Template(cur.clone()));
            }
            return;
        }
        for &x in letters {
            let ok = match cur.last() {
                None => first_allowed(x),
                Some(&prev) => pair_allowed(prev, x),
            };
            if ok {
                cur.push(x);
                dfs(len, letters, cur, out);
                cur.pop();
            }
        }
    }
    dfs(len, &letters, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Template {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        let a = t("T_R Q Q N N N");
        assert_eq!(a, t("TRQQNNN"));
        assert_eq!(a.to_string(), "T_R Q Q N N N");
        assert_eq!(a.m(), 2);
        assert!("X Q".parse::<Template>().is_err());
    }

    #[test]
    fn validity_examples() {
        assert_eq!(validity_penalty(&t("F F B R Q N")), 0);
        assert_eq!(validity_penalty(&t("T_R Q Q N N N")), 0);
        // bad start, bad end, and the pair N F
        assert_eq!(validity_penalty(&t("N F F F F F")), 3);
        assert_eq!(validity_penalty(&t("F F B B T_R N")), 2);
    }

    #[test]
    fn legality_examples() {
        assert_eq!(legality_penalty(&t("F G Q N N N"), 2), 0);
        assert_eq!(legality_penalty(&t("F F F L N N"), 2), 0);
        // G Q across the boundary at site 2
        assert_eq!(legality_penalty(&t("F F G Q N N"), 2), 2);
        assert_eq!(legality_penalty(&t("T_R Q Q G N N"), 2), 1);
        // F G at sites 2-3 straddles the boundary at 2; this is a chain element
        assert_eq!(legality_penalty(&t("F F F G Q N"), 2), 0);
    }

    #[test]
    fn label_examples() {
        let lab = label(&t("T_R Q Q N N N")).unwrap();
        assert_eq!((lab.m, lab.t), (2, 0));
        let lab = label(&t("F B B T_L N N")).unwrap();
        assert_eq!((lab.m, lab.t), (2, 3));
        let lab = label(&t("F F B L Q N")).unwrap();
        assert_eq!((lab.m, lab.i, lab.j, lab.t), (2, 1, 5, 12));
        assert!(label(&t("N N N N N N")).is_err());
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_of_t(2, 4, 0).unwrap(), 0);
        assert_eq!(g_of_t(2, 4, 7).unwrap(), 2);
        assert_eq!(g_of_t(2, 4, 16).unwrap(), 4);
        assert!(g_of_t(2, 4, 17).is_err());
        assert!(g_of_t(2, 3, 0).is_err());
    }

    #[test]
    fn valid_enumeration_matches_brute_force() {
        let letters: Vec<Letter> = Letter::ALL.iter().copied().filter(|&x| x != S).collect();
        let l = 2;
        let mut brute = Vec::new();
        let k = letters.len();
        for code in 0..k.pow(4) {
            let mut c = code;
            let mut v = Vec::new();
            for _ in 0..4 {
                v.push(letters[c % k]);
                c /= k;
            }
            v.reverse();
            let tpl = Template(v);
            if validity_penalty(&tpl) == 0 {
                brute.push(tpl);
            }
        }
        brute.sort();
        let mut fast = valid_templates(l);
        fast.sort();
        assert_eq!(fast, brute);
    }
}
