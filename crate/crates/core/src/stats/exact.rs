use crate::error::{Error, Result};

pub const MERGE_TOL: f64 = 1e-12;
pub const MASS_FLOOR: f64 = 1e-15;
pub const SUPPORT_LIMIT: usize = 10_000_000;

/// A finitely supported distribution on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    atoms: Vec<(f64, f64)>,
    deficit: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * a.abs().max(b.abs()).max(1.0)
}

impl ExactLaw {
    /// Sorts, merges values closer than the merge tolerance and drops atoms
    /// lighter than the mass floor. Dropped mass is kept as `deficit`.
    pub fn from_atoms(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|&(_, p)| p > 0.0);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (v, p) in raw {
            match atoms.last_mut() {
                Some(last) if close(last.0, v) => last.1 += p,
                _ => atoms.push((v, p)),
            }
        }
        let mut deficit = 0.0;
        atoms.retain(|&(_, p)| {
            if p < MASS_FLOOR {
                deficit += p;
                false
            } else {
                true
            }
        });
        ExactLaw { atoms, deficit }
    }

    pub fn point_mass(v: f64) -> Self {
        ExactLaw {
            atoms: vec![(v, 1.0)],
            deficit: 0.0,
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * f(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    /// Mass at the atom equal to `v` (within the merge tolerance).
    pub fn mass_at(&self, v: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| close(a.0, v))
            .map(|a| a.1)
            .sum()
    }

    /// `P{X <= x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.0 <= x)
            .map(|a| a.1)
            .sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = Self::from_atoms(self.atoms.iter().map(|&(v, p)| (f(v), p)).collect());
        out.deficit += self.deficit;
        out
    }

    /// Mixture of laws with the given weights.
    pub fn mixture(parts: &[(ExactLaw, f64)]) -> Self {
        let raw = parts
            .iter()
            .flat_map(|(l, p)| l.atoms.iter().map(move |&(v, q)| (v, p * q)))
            .collect();
        let mut out = Self::from_atoms(raw);
        out.deficit += parts.iter().map(|(l, p)| p * l.deficit).sum::<f64>();
        out
    }

    /// Law of `f(X, Y)` for independent `X ~ self`, `Y ~ other`.
    pub fn combine(&self, other: &ExactLaw, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let size = self.len().saturating_mul(other.len());
        if size > SUPPORT_LIMIT {
            return Err(Error::SupportExplosion { limit: SUPPORT_LIMIT });
        }
        let mut raw = Vec::with_capacity(size);
        for &(x, p) in &self.atoms {
            for &(y, q) in &other.atoms {
                raw.push((f(x, y), p * q));
            }
        }
        let mut out = Self::from_atoms(raw);
        out.deficit += self.deficit + other.deficit;
        Ok(out)
    }
}

/// Exact laws of `Z_n` and `Pi_n` for a finitely supported driver.
///
/// `support` lists `((m, q), probability)`. `Z_n` uses the distributional
/// recursion `Z_n = Q + M * Z_{n-1}` and `Pi_n` the product convolution.
pub fn dp_exact_zn(support: &[((f64, f64), f64)], n: usize) -> Result<(ExactLaw, ExactLaw)> {
    let mut z = ExactLaw::point_mass(0.0);
    let mut pi = ExactLaw::point_mass(1.0);
    let m_law = ExactLaw::from_atoms(support.iter().map(|&((m, _), p)| (m, p)).collect());
    for _ in 0..n {
        let size = z.len().saturating_mul(support.len());
        if size > SUPPORT_LIMIT {
            return Err(Error::SupportExplosion { limit: SUPPORT_LIMIT });
        }
        let mut raw = Vec::with_capacity(size);
        for &((m, q), p) in support {
            for &(v, w) in z.atoms() {
                raw.push((q + m * v, p * w));
            }
        }
        let d = z.deficit;
        z = ExactLaw::from_atoms(raw);
        z.deficit += d;
        pi = pi.combine(&m_law, |a, b| a * b)?;
    }
    Ok((z, pi))
}
