//! Sparse multivariate polynomials over grouped variables, e.g. `(x, y, a, b)`
//! for running costs or `(x, a)` for a drift component.

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    /// One exponent vector per variable group; empty means all zeros.
    pub powers: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    group_dims: Vec<usize>,
    terms: Vec<Term>,
}

impl Polynomial {
    pub fn new(group_dims: Vec<usize>, terms: Vec<Term>) -> Result<Self, String> {
        for (t, term) in terms.iter().enumerate() {
            if term.powers.len() > group_dims.len() {
                return Err(format!("term {t}: too many exponent groups"));
            }
            for (g, pw) in term.powers.iter().enumerate() {
                if !pw.is_empty() && pw.len() != group_dims[g] {
                    return Err(format!(
                        "term {t}: exponent group {g} has {} entries, expected {}",
                        pw.len(),
                        group_dims[g]
                    ));
                }
            }
            if !term.coef.is_finite() {
                return Err(format!("term {t}: coefficient is not finite"));
            }
        }
        Ok(Self { group_dims, terms })
    }

    pub fn constant(group_dims: Vec<usize>, c: f64) -> Self {
        Self {
            group_dims,
            terms: vec![Term {
                coef: c,
                powers: Vec::new(),
            }],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, groups: &[&[f64]]) -> f64 {
        debug_assert_eq!(groups.len(), self.group_dims.len());
        self.terms
            .iter()
            .map(|term| {
                let mut v = term.coef;
                for (g, pw) in term.powers.iter().enumerate() {
                    for (i, &p) in pw.iter().enumerate() {
                        if p > 0 {
                            v *= groups[g][i].powi(p as i32);
                        }
                    }
                }
                v
            })
            .sum()
    }

    /// Whether some term with nonzero coefficient has a positive exponent in
    /// every group listed in `groups`.
    pub fn mixes(&self, groups: &[usize]) -> bool {
        self.terms.iter().any(|t| {
            t.coef != 0.0 && groups.iter().all(|&g| Self::touches(t, g))
        })
    }

    fn touches(t: &Term, g: usize) -> bool {
        t.powers.get(g).is_some_and(|pw| pw.iter().any(|&p| p > 0))
    }

    /// Whether any term with nonzero coefficient touches group `g`.
    pub fn depends_on(&self, g: usize) -> bool {
        self.terms
            .iter()
            .any(|t| t.coef != 0.0 && Self::touches(t, g))
    }

    /// Terms touching both some group in `left` and some group in `right`.
    pub fn couples(&self, left: &[usize], right: &[usize]) -> bool {
        self.terms.iter().any(|t| {
            t.coef != 0.0
                && left.iter().any(|&g| Self::touches(t, g))
                && right.iter().any(|&g| Self::touches(t, g))
        })
    }
}
