use serde::Serialize;

use super::path::PerpetuityPath;
use crate::error::{Error, Result};
use crate::law::{MqDraw, MqLaw};
use crate::rng::Stream;
use crate::stats::{mc_mean, EstimateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Epoch {
    At(usize),
    /// The path ended (after this many steps) before the event.
    NotReached(usize),
}

impl Epoch {
    pub fn index(self) -> Option<usize> {
        match self {
            Epoch::At(n) => Some(n),
            Epoch::NotReached(_) => None,
        }
    }
}

fn first(path: &PerpetuityPath, pred: impl Fn(usize) -> bool) -> Epoch {
    (1..=path.len())
        .find(|&n| pred(n))
        .map_or(Epoch::NotReached(path.len()), Epoch::At)
}

/// `inf{n >= 1 : |Pi_n| <= 1}`.
pub fn ladder_epoch(path: &PerpetuityPath) -> Epoch {
    first(path, |n| path.abs_pi_le(n, 1.0))
}

/// `inf{n >= 1 : |Pi_n| < x}` for `x` in `(0, 1]`.
pub fn sigma_x(path: &PerpetuityPath, x: f64) -> Result<Epoch> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidParameter(format!("x = {x} is outside (0, 1]")));
    }
    Ok(first(path, |n| path.abs_pi_lt(n, x)))
}

/// `inf{n >= 1 : |Pi_n| > 1}`.
pub fn dual_sigma_star(path: &PerpetuityPath) -> Epoch {
    first(path, |n| !path.abs_pi_le(n, 1.0))
}

/// Aggregates over consecutive ladder blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderDecomposition {
    /// Block lengths `sigma_j`.
    pub sigma_epochs: Vec<usize>,
    /// `|product of M over the block|`, in `(0, 1]`.
    pub mhat: Vec<f64>,
    /// `1 v sup` of in-block `|partial products|`.
    pub qtilde: Vec<f64>,
    /// In-block discounted sum of `Q`.
    pub qhat: Vec<f64>,
    /// Signed block products, used for reconstruction.
    pub block_pi: Vec<f64>,
}

impl LadderDecomposition {
    /// `sum_j Pihat_{j-1} Qhat_j`: `Z` at the end of the completed blocks.
    pub fn reconstruct(&self) -> f64 {
        let mut pi = 1.0;
        let mut z = 0.0;
        for (p, q) in self.block_pi.iter().zip(&self.qhat) {
            z += pi * q;
            pi *= p;
        }
        z
    }

    pub fn steps(&self) -> usize {
        self.sigma_epochs.iter().sum()
    }
}

/// Splits draws into completed ladder blocks; a trailing incomplete block
/// is dropped.
pub fn decompose_draws(draws: &[MqDraw]) -> LadderDecomposition {
    let mut out = LadderDecomposition {
        sigma_epochs: Vec::new(),
        mhat: Vec::new(),
        qtilde: Vec::new(),
        qhat: Vec::new(),
        block_pi: Vec::new(),
    };
    let mut block = PerpetuityPath::new();
    for d in draws {
        block.push(*d);
        let len = block.len();
        if block.abs_pi_le(len, 1.0) {
            let sup = (0..len).map(|k| block.pi_abs[k]).fold(1.0, f64::max);
            out.sigma_epochs.push(len);
            out.mhat.push(block.pi_abs[len]);
            out.qtilde.push(sup);
            out.qhat.push(block.z_partial[len]);
            out.block_pi.push(block.pi(len));
            block = PerpetuityPath::new();
        }
    }
    out
}

/// Simulates until `blocks` ladder blocks complete.
pub fn ladder_decompose(law: &MqLaw, blocks: usize, nmax: usize, rng: &mut Stream) -> Result<LadderDecomposition> {
    if blocks == 0 {
        return Err(Error::InvalidParameter("blocks must be at least 1".into()));
    }
    let mut draws = Vec::new();
    let mut done = 0;
    let mut log_pi = 0.0;
    let mut lin_pi = 1.0f64;
    let mut in_block = 0usize;
    while done < blocks {
        let d = law.sample(rng)?;
        draws.push(d);
        in_block += 1;
        log_pi += d.log_abs_m;
        lin_pi *= d.m.abs();
        let le_one = if lin_pi > 0.0 && lin_pi.is_finite() { lin_pi <= 1.0 } else { log_pi <= 0.0 };
        if le_one {
            done += 1;
            in_block = 0;
            log_pi = 0.0;
            lin_pi = 1.0;
        } else if in_block >= nmax {
            return Err(Error::NonConvergent {
                steps: nmax as u64,
                last_increment: f64::NAN,
            });
        }
    }
    Ok(decompose_draws(&draws))
}

/// Monte Carlo `E sigma(x)`; each replicate walks until `|Pi_n| < x`.
pub fn expected_sigma_x(law: &MqLaw, x: f64, nmax: usize, reps: usize, seed: u64, confidence: f64) -> Result<EstimateReport> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidParameter(format!("x = {x} is outside (0, 1]")));
    }
    let failure = std::sync::Mutex::new(None);
    let r = mc_mean(
        |_, s| {
            let mut path = PerpetuityPath::new();
            for n in 1..=nmax {
                match law.sample(s) {
                    Ok(d) => path.push(d),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        return f64::NAN;
                    }
                }
                if path.abs_pi_lt(n, x) {
                    return n as f64;
                }
            }
            failure.lock().unwrap().get_or_insert(Error::NonConvergent {
                steps: nmax as u64,
                last_increment: f64::NAN,
            });
            f64::NAN
        },
        reps,
        seed,
        &law.id,
        &format!("sigma-x:{x}"),
        confidence,
    );
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::MqKind;
    use proptest::prelude::*;

    fn path(ms: &[f64]) -> PerpetuityPath {
        PerpetuityPath::from_draws(ms.iter().map(|&m| MqDraw::linear(m, 1.0)))
    }

    #[test]
    fn epochs() {
        assert_eq!(ladder_epoch(&path(&[0.5; 5])), Epoch::At(1));
        assert_eq!(ladder_epoch(&path(&[2.0, 2.0, 0.125])), Epoch::At(3));
        assert_eq!(ladder_epoch(&path(&[2.0; 5])), Epoch::NotReached(5));
        assert_eq!(sigma_x(&path(&[0.5; 5]), 0.25).unwrap(), Epoch::At(3));
        assert_eq!(dual_sigma_star(&path(&[0.5; 5])), Epoch::NotReached(5));
        assert_eq!(dual_sigma_star(&path(&[2.0, 0.125])), Epoch::At(1));
        assert!(sigma_x(&path(&[0.5]), 0.0).is_err());
    }

    #[test]
    fn block_aggregates() {
        let d = decompose_draws(&path(&[2.0, 2.0, 0.125]).steps);
        assert_eq!(d.sigma_epochs, vec![3]);
        assert_eq!(d.mhat, vec![0.5]);
        assert_eq!(d.qtilde, vec![4.0]);
        assert_eq!(d.qhat, vec![7.0]);
        let c = ladder_decompose(&MqLaw::constant(0.5, 1.0), 4, 100, &mut Stream::new(0)).unwrap();
        assert_eq!(c.sigma_epochs, vec![1; 4]);
        assert_eq!(c.mhat, vec![0.5; 4]);
        assert_eq!(c.qtilde, vec![1.0; 4]);
        assert_eq!(c.qhat, vec![1.0; 4]);
    }

    #[test]
    fn block_overrun() {
        assert!(matches!(
            ladder_decompose(&MqLaw::constant(2.0, 1.0), 1, 50, &mut Stream::new(0)),
            Err(Error::NonConvergent { .. })
        ));
    }

    #[test]
    fn mean_block_length_is_finite() {
        let law = MqLaw::new("tp", MqKind::TwoPoint { m1: 2.0, p1: 0.5, m2: 0.125, q: 1.0 }).unwrap();
        let r = mc_mean(
            |_, s| ladder_decompose(&law, 1, 100_000, s).unwrap().sigma_epochs[0] as f64,
            20_000,
            3,
            &law.id,
            "sigma",
            0.99,
        );
        assert!(r.estimate >= 1.0 && r.estimate < 10.0 && r.stderr < 0.1, "{r:?}");
    }

    #[test]
    fn deterministic_sigma_x() {
        let r = expected_sigma_x(&MqLaw::constant(0.5, 1.0), 0.5, 1000, 100, 1, 0.99).unwrap();
        assert_eq!((r.estimate, r.stderr), (2.0, 0.0));
    }

    proptest! {
        #[test]
        fn blocks_partition_and_reconstruct(ms in proptest::collection::vec(0.1f64..3.0, 1..60),
                                            qs in proptest::collection::vec(-2.0f64..2.0, 60)) {
            let ds: Vec<MqDraw> = ms.iter().zip(&qs).map(|(&m, &q)| MqDraw::linear(m, q)).collect();
            let d = decompose_draws(&ds);
            let used = d.steps();
            let p = PerpetuityPath::from_draws(ds[..used].to_vec());
            let scale: f64 = 1.0 + (0..used).map(|k| p.pi_abs[k] * qs[k].abs()).sum::<f64>();
            prop_assert!((d.reconstruct() - p.z()).abs() <= 1e-10 * scale);
            prop_assert!(d.mhat.iter().all(|&m| m > 0.0 && m <= 1.0));
            prop_assert!(d.qtilde.iter().all(|&q| q >= 1.0));
        }
    }
}
