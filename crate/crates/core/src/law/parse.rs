//! Canonical text forms such as `const:m=0.5,q=1` or
//! `gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1`.

use std::collections::BTreeMap;

use super::mq::{MqKind, MqLaw};
use super::pp::{PpKind, PpLaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Mq(MqLaw),
    Pp(PpLaw),
}

impl Law {
    pub fn id(&self) -> &str {
        match self {
            Law::Mq(l) => &l.id,
            Law::Pp(l) => &l.id,
        }
    }
}

/// Splits `family:key=value,...` (with an optional `law=` or `b=` prefix).
pub fn split_spec<'a>(input: &'a str, prefix: &str) -> Result<(&'a str, BTreeMap<&'a str, &'a str>)> {
    let err = |reason: &str| Error::Parse {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let s = input.trim();
    let s = s.strip_prefix(prefix).unwrap_or(s);
    let (family, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut map = BTreeMap::new();
    for kv in rest.split(',').filter(|t| !t.trim().is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| err("expected key=value"))?;
        if map.insert(k.trim(), v.trim()).is_some() {
            return Err(err(&format!("duplicate key `{}`", k.trim())));
        }
    }
    Ok((family.trim(), map))
}

pub(crate) struct Fields<'a> {
    input: &'a str,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(input: &'a str, map: BTreeMap<&'a str, &'a str>) -> Self {
        Self { input, map }
    }

    fn err(&self, reason: String) -> Error {
        Error::Parse {
            input: self.input.to_string(),
            reason,
        }
    }

    pub(crate) fn num(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.map.remove(key) {
            Some(v) => v
                .parse::<f64>()
                .map_err(|e| self.err(format!("`{key}`: {e}"))),
            None => default.ok_or_else(|| self.err(format!("missing `{key}`"))),
        }
    }

    pub(crate) fn uint(&mut self, key: &str, default: Option<usize>) -> Result<usize> {
        match self.map.remove(key) {
            Some(v) => v
                .parse::<usize>()
                .map_err(|e| self.err(format!("`{key}`: {e}"))),
            None => default.ok_or_else(|| self.err(format!("missing `{key}`"))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>> {
        let raw = self.map.remove(key).ok_or_else(|| self.err(format!("missing `{key}`")))?;
        raw.split(';')
            .map(|t| t.trim().parse::<f64>().map_err(|e| self.err(format!("`{key}`: {e}"))))
            .collect()
    }

    fn raw(&mut self, key: &str) -> Result<&'a str> {
        self.map.remove(key).ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    pub(crate) fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(self.err(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn configs(f: &mut Fields) -> Result<Vec<(Vec<f64>, f64)>> {
    let raw = f.raw("configs")?;
    let probs = f.list("probs")?;
    let cfgs: Vec<Vec<f64>> = raw
        .split('/')
        .map(|c| {
            let c = c.trim();
            if c.is_empty() || c == "none" {
                Ok(Vec::new())
            } else {
                c.split('|')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| f.err(format!("configs: {e}"))))
                    .collect()
            }
        })
        .collect::<Result<_>>()?;
    if cfgs.len() != probs.len() {
        return Err(f.err("configs and probs differ in length".into()));
    }
    Ok(cfgs.into_iter().zip(probs).collect())
}

pub fn parse_law(input: &str) -> Result<Law> {
    let (family, map) = split_spec(input, "law=")?;
    let id = input.trim().strip_prefix("law=").unwrap_or(input.trim()).to_string();
    let mut f = Fields::new(input, map);
    let law = match family {
        "const" => {
            let kind = MqKind::Const {
                m: f.num("m", None)?,
                q: f.num("q", Some(1.0))?,
            };
            Law::Mq(MqLaw::new(id, kind)?)
        }
        "twopoint" => {
            let kind = MqKind::TwoPoint {
                m1: f.num("m1", None)?,
                p1: f.num("p1", None)?,
                m2: f.num("m2", None)?,
                q: f.num("q", Some(1.0))?,
            };
            Law::Mq(MqLaw::new(id, kind)?)
        }
        "uniform" => Law::Mq(MqLaw::new(id, MqKind::UniformM { q: f.num("q", Some(1.0))? })?),
        "lognormal" => {
            let kind = MqKind::LogNormalM {
                mu: f.num("mu", None)?,
                sigma: f.num("sigma", None)?,
                q: f.num("q", Some(1.0))?,
            };
            Law::Mq(MqLaw::new(id, kind)?)
        }
        "heavy" => Law::Mq(MqLaw::new(id, MqKind::HeavyLadder { q: f.num("q", Some(1.0))? })?),
        "logpareto_q" => {
            let kind = MqKind::LogParetoQ {
                m: f.num("m", None)?,
                beta: f.num("beta", None)?,
            };
            Law::Mq(MqLaw::new(id, kind)?)
        }
        "finite" => {
            let ms = f.list("m")?;
            let qs = f.list("q")?;
            let ps = f.list("p")?;
            if ms.len() != qs.len() || ms.len() != ps.len() {
                return Err(f.err("m, q and p lists differ in length".into()));
            }
            let atoms = ms.into_iter().zip(qs).zip(ps).collect();
            Law::Mq(MqLaw::new(id, MqKind::Finite { atoms })?)
        }
        "gw" => {
            let nmin = f.uint("nmin", None)?;
            let nmax = f.uint("nmax", None)?;
            let p = f.num("p", None)?;
            let x = f.num("x", Some(0.0))?;
            let gamma = f.num("gamma", Some(1.0))?;
            let configs = vec![(vec![x; nmin], p), (vec![x; nmax], 1.0 - p)];
            Law::Pp(PpLaw::new(id, gamma, PpKind::Finite { configs })?)
        }
        "binary" => {
            let x = f.num("x", Some(-std::f64::consts::LN_2))?;
            let gamma = f.num("gamma", Some(1.0))?;
            Law::Pp(PpLaw::new(id, gamma, PpKind::Finite { configs: vec![(vec![x, x], 1.0)] })?)
        }
        "poisson" => {
            let kind = PpKind::Poisson {
                lambda: f.num("lambda", None)?,
                x: f.num("x", Some(0.0))?,
            };
            Law::Pp(PpLaw::new(id, f.num("gamma", Some(1.0))?, kind)?)
        }
        "heavy_gw" => {
            let kind = PpKind::HeavyGw {
                beta: f.num("beta", None)?,
                p: f.num("p", Some(0.5))?,
            };
            Law::Pp(PpLaw::new(id, f.num("gamma", Some(1.0))?, kind)?)
        }
        "pp" => {
            let configs = configs(&mut f)?;
            Law::Pp(PpLaw::new(id, f.num("gamma", Some(1.0))?, PpKind::Finite { configs })?)
        }
        other => {
            return Err(Error::Parse {
                input: input.to_string(),
                reason: format!("unknown law family `{other}`"),
            })
        }
    };
    f.finish()?;
    Ok(law)
}

/// Law families with a one-line description, for listings.
pub const CATALOGUE: &[(&str, &str)] = &[
    ("const:m=0.5,q=1", "M and Q constant"),
    ("twopoint:m1=2,p1=0.5,m2=0.125,q=1", "M two-point, Q constant"),
    ("uniform:q=1", "M ~ Uniform(0,1), Q constant"),
    ("lognormal:mu=0.5,sigma=1,q=1", "-log M ~ Normal(mu, sigma), Q constant"),
    ("heavy:q=1", "-log M ~ Pareto(1/2) on [1,inf): E log M = -inf"),
    ("logpareto_q:m=0.5,beta=2.5", "M constant, P{log Q > t} = t^-beta for t >= 1"),
    ("finite:m=2;0.125,q=1;1,p=0.5;0.5", "joint finite support of (M, Q)"),
    ("gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1", "N in {nmin, nmax}, P{N = nmin} = p, displacements x"),
    ("binary:x=-0.6931471805599453,gamma=1", "two children displaced by x (default -log 2)"),
    ("poisson:lambda=2,x=0,gamma=1", "Poisson(lambda) children displaced by x"),
    ("heavy_gw:beta=4,p=0.5,gamma=1", "no displacement, size-biased count ceil(e^T), T ~ Pareto(beta)"),
    ("pp:configs=0|0/0,probs=0.5;0.5,gamma=1", "finite point process: configurations split by '/', points by '|'"),
];
