//! Classical temporal resources, free classical operations and the
//! deterministic-strategy bounds of Bell-type functionals.

use crate::correlations::{InequalityFunctional, ProbabilityTable};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::operations::BINARY_OUTCOMES;

const NORMALIZATION_TOL: f64 = 1e-9;

/// `P(a, l_out | x, l_in)`, stored as `[x][l_in][a][l_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalOperation {
    settings: usize,
    d_in: usize,
    outcomes: usize,
    d_out: usize,
    table: Vec<f64>,
}

impl ClassicalOperation {
    pub fn new(
        settings: usize,
        d_in: usize,
        outcomes: usize,
        d_out: usize,
        table: Vec<f64>,
    ) -> Result<Self> {
        let n = settings * d_in * outcomes * d_out;
        if n == 0 {
            return Err(Error::InvalidParameter("cardinalities must be positive".into()));
        }
        if table.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: table.len(),
            });
        }
        if let Some(&p) = table.iter().find(|&&p| p.is_nan() || p < 0.0) {
            return Err(Error::NegativeProbability(p));
        }
        for slice in table.chunks(outcomes * d_out) {
            let s: f64 = slice.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized(s));
            }
        }
        Ok(ClassicalOperation {
            settings,
            d_in,
            outcomes,
            d_out,
            table,
        })
    }

    /// Builds the table from a closure `(a, l_out, x, l_in) -> P`.
    pub fn from_fn(
        settings: usize,
        d_in: usize,
        outcomes: usize,
        d_out: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(settings * d_in * outcomes * d_out);
        for x in 0..settings {
            for l_in in 0..d_in {
                for a in 0..outcomes {
                    for l_out in 0..d_out {
                        table.push(f(a, l_out, x, l_in));
                    }
                }
            }
        }
        Self::new(settings, d_in, outcomes, d_out, table)
    }

    pub fn settings(&self) -> usize {
        self.settings
    }
    pub fn d_in(&self) -> usize {
        self.d_in
    }
    pub fn outcomes(&self) -> usize {
        self.outcomes
    }
    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn p(&self, a: usize, l_out: usize, x: usize, l_in: usize) -> f64 {
        self.table[((x * self.d_in + l_in) * self.outcomes + a) * self.d_out + l_out]
    }

    /// `(1/d_in) sum_{a, l_in} P(a, l_out | x, l_in) = 1/d_out` for all `x, l_out`.
    pub fn is_unbiased(&self, tol: f64) -> bool {
        let target = 1.0 / self.d_out as f64;
        (0..self.settings).all(|x| {
            (0..self.d_out).all(|l_out| {
                let mut s = 0.0;
                for a in 0..self.outcomes {
                    for l_in in 0..self.d_in {
                        s += self.p(a, l_out, x, l_in);
                    }
                }
                (s / self.d_in as f64 - target).abs() <= tol
            })
        })
    }
}

/// Classical channel `P(l_to | l_from)`, stored as `[l_from][l_to]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalResource {
    d_from: usize,
    d_to: usize,
    table: Vec<f64>,
}

impl ClassicalResource {
    pub fn new(d_from: usize, d_to: usize, table: Vec<f64>) -> Result<Self> {
        if d_from * d_to == 0 {
            return Err(Error::InvalidParameter("cardinalities must be positive".into()));
        }
        if table.len() != d_from * d_to {
            return Err(Error::DimensionMismatch {
                expected: d_from * d_to,
                found: table.len(),
            });
        }
        if let Some(&p) = table.iter().find(|&&p| p.is_nan() || p < 0.0) {
            return Err(Error::NegativeProbability(p));
        }
        for slice in table.chunks(d_to) {
            let s: f64 = slice.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized(s));
            }
        }
        Ok(ClassicalResource {
            d_from,
            d_to,
            table,
        })
    }

    pub fn identity(d: usize) -> Self {
        let table = (0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }).collect();
        ClassicalResource::new(d, d, table).expect("identity channel is normalized")
    }

    pub fn d_from(&self) -> usize {
        self.d_from
    }
    pub fn d_to(&self) -> usize {
        self.d_to
    }

    pub fn p(&self, l_to: usize, l_from: usize) -> f64 {
        self.table[l_from * self.d_to + l_to]
    }
}

fn outcome_values(n: usize) -> Vec<f64> {
    if n == 2 {
        BINARY_OUTCOMES.to_vec()
    } else {
        (0..n).map(|a| a as f64).collect()
    }
}

fn check_chain(a: &ClassicalOperation, res: &ClassicalResource, b: &ClassicalOperation) -> Result<()> {
    if a.d_in != 1 {
        return Err(Error::CardinalityMismatch("the first party must have trivial input".into()));
    }
    if b.d_out != 1 {
        return Err(Error::CardinalityMismatch("the second party must have trivial output".into()));
    }
    if a.d_out != res.d_from || res.d_to != b.d_in {
        return Err(Error::CardinalityMismatch(format!(
            "A outputs {}, resource maps {} -> {}, B reads {}",
            a.d_out, res.d_from, res.d_to, b.d_in
        )));
    }
    Ok(())
}

fn joint_table(
    a: &ClassicalOperation,
    b: &ClassicalOperation,
    entry: impl Fn(usize, usize, usize, usize) -> f64,
) -> Result<ProbabilityTable> {
    let mut values = Vec::with_capacity(a.settings * b.settings * a.outcomes * b.outcomes);
    for x in 0..a.settings {
        for y in 0..b.settings {
            for oa in 0..a.outcomes {
                for ob in 0..b.outcomes {
                    values.push(entry(x, y, oa, ob));
                }
            }
        }
    }
    ProbabilityTable::new(
        vec![a.settings, b.settings],
        vec![a.outcomes, b.outcomes],
        vec![outcome_values(a.outcomes), outcome_values(b.outcomes)],
        values,
    )
}

/// `P(a, b | x, y) = sum P_B(b | y, l_B) P_R(l_B | l_A) P_A(a, l_A | x)`.
pub fn classical_correlations(
    a: &ClassicalOperation,
    res: &ClassicalResource,
    b: &ClassicalOperation,
) -> Result<ProbabilityTable> {
    check_chain(a, res, b)?;
    joint_table(a, b, |x, y, oa, ob| {
        let mut s = 0.0;
        for la in 0..a.d_out {
            for lb in 0..b.d_in {
                s += b.p(ob, 0, y, lb) * res.p(lb, la) * a.p(oa, la, x, 0);
            }
        }
        s
    })
}

/// Local hidden-variable form of a classical temporal scenario with an
/// unbiased first party: `sum P_B(b|y,l_B) Pbar_A(a|x,l_A) Pbar_R(l_B,l_A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalModel {
    /// `Pbar_R(l_B, l_A) = P_R(l_B | l_A) / d_A`, stored `[l_B][l_A]`.
    pub shared: Vec<f64>,
    /// `Pbar_A(a | x, l_A) = d_A P_A(a, l_A | x)`, stored `[x][l_A][a]`.
    pub alice: Vec<f64>,
    pub bob: ClassicalOperation,
    d_a: usize,
    d_b: usize,
    settings_a: usize,
    outcomes_a: usize,
}

impl LocalModel {
    pub fn shared(&self, l_b: usize, l_a: usize) -> f64 {
        self.shared[l_b * self.d_a + l_a]
    }

    pub fn alice(&self, a: usize, x: usize, l_a: usize) -> f64 {
        self.alice[(x * self.d_a + l_a) * self.outcomes_a + a]
    }

    /// Largest deviation of the hidden-variable and response distributions
    /// from normalization.
    pub fn normalization_error(&self) -> f64 {
        let shared = (self.shared.iter().sum::<f64>() - 1.0).abs();
        let alice = (0..self.settings_a * self.d_a)
            .map(|k| {
                let s: f64 = self.alice[k * self.outcomes_a..(k + 1) * self.outcomes_a].iter().sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        shared.max(alice)
    }

    pub fn reassemble(&self) -> Result<ProbabilityTable> {
        let alice_op = ClassicalOperation::from_fn(self.settings_a, 1, self.outcomes_a, 1, |_, _, _, _| {
            1.0 / self.outcomes_a as f64
        })?;
        joint_table(&alice_op, &self.bob, |x, y, oa, ob| {
            let mut s = 0.0;
            for lb in 0..self.d_b {
                for la in 0..self.d_a {
                    s += self.bob.p(ob, 0, y, lb) * self.alice(oa, x, la) * self.shared(lb, la);
                }
            }
            s
        })
    }
}

pub fn bell_factorization(
    a: &ClassicalOperation,
    res: &ClassicalResource,
    b: &ClassicalOperation,
) -> Result<LocalModel> {
    check_chain(a, res, b)?;
    if !a.is_unbiased(NORMALIZATION_TOL) {
        return Err(Error::Biased);
    }
    let d_a = a.d_out as f64;
    let mut shared = Vec::with_capacity(res.d_to * res.d_from);
    for lb in 0..res.d_to {
        for la in 0..res.d_from {
            shared.push(res.p(lb, la) / d_a);
        }
    }
    let mut alice = Vec::with_capacity(a.settings * a.d_out * a.outcomes);
    for x in 0..a.settings {
        for la in 0..a.d_out {
            for oa in 0..a.outcomes {
                alice.push(d_a * a.p(oa, la, x, 0));
            }
        }
    }
    Ok(LocalModel {
        shared,
        alice,
        bob: b.clone(),
        d_a: a.d_out,
        d_b: res.d_to,
        settings_a: a.settings,
        outcomes_a: a.outcomes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DeterministicStrategy {
    /// `outcomes[party][setting]`.
    Local(Vec<Vec<f64>>),
    /// Two parties answer jointly (signalling allowed between them), the
    /// third alone. `joint[x_first * 2 + x_second] = (o_first, o_second)`.
    Biseparable {
        pair: [usize; 2],
        lone: usize,
        joint: Vec<[f64; 2]>,
        single: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundWitness {
    pub value: f64,
    pub strategy: DeterministicStrategy,
}

fn sign(bits: usize, k: usize) -> f64 {
    if (bits >> k) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maximizes `score(0..count)`; ties go to the lowest index.
fn argmax(exec: Execution, count: usize, score: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<(f64, usize)> {
    let chunks = count.clamp(1, 64);
    let per = count.div_ceil(chunks);
    let partial = exec::try_map_indexed(exec, chunks, |c| {
        let mut best: Option<(f64, usize)> = None;
        for i in c * per..((c + 1) * per).min(count) {
            let v = score(i)?;
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, i));
            }
        }
        Ok::<_, Error>(best)
    })?;
    partial
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, usize)>, (v, i)| match acc {
            Some((b, _)) if b >= v => acc,
            _ => Some((v, i)),
        })
        .ok_or_else(|| Error::InvalidParameter("nothing to enumerate".into()))
}

fn check_settings(f: &InequalityFunctional, n_settings: usize) -> Result<()> {
    if f.settings_shape().iter().any(|&s| s > n_settings) {
        return Err(Error::InvalidParameter(format!(
            "functional addresses more than {n_settings} settings"
        )));
    }
    Ok(())
}

/// Maximum of `f` over all local deterministic strategies with binary
/// outcomes, found by exhaustive enumeration.
pub fn local_bound(f: &InequalityFunctional, n_parties: usize, n_settings: usize) -> Result<f64> {
    local_optimum(f, n_parties, n_settings, Execution::default()).map(|w| w.value)
}

pub fn local_optimum(
    f: &InequalityFunctional,
    n_parties: usize,
    n_settings: usize,
    exec: Execution,
) -> Result<BoundWitness> {
    if n_parties != f.n_parties {
        return Err(Error::InvalidParameter(format!(
            "functional has {} parties, not {n_parties}",
            f.n_parties
        )));
    }
    check_settings(f, n_settings)?;
    let bits = n_parties * n_settings;
    if bits > 20 {
        return Err(Error::InstanceTooLarge(bits));
    }
    let (value, idx) = argmax(exec, 1 << bits, |s| {
        f.combine(|k| {
            Ok(k.iter()
                .enumerate()
                .map(|(party, &x)| sign(s, party * n_settings + x))
                .product())
        })
    })?;
    let outcomes = (0..n_parties)
        .map(|p| (0..n_settings).map(|x| sign(idx, p * n_settings + x)).collect())
        .collect();
    Ok(BoundWitness {
        value,
        strategy: DeterministicStrategy::Local(outcomes),
    })
}

/// Maximum of a three-party, two-setting functional over biseparable
/// deterministic strategies, all bipartitions included.
pub fn biseparable_bound(f: &InequalityFunctional) -> Result<f64> {
    biseparable_optimum(f, Execution::default()).map(|w| w.value)
}

pub fn biseparable_optimum(f: &InequalityFunctional, exec: Execution) -> Result<BoundWitness> {
    let mut best: Option<BoundWitness> = None;
    for lone in 0..3 {
        let w = bipartition_optimum(f, lone, exec)?;
        if best.as_ref().is_none_or(|b| w.value > b.value) {
            best = Some(w);
        }
    }
    Ok(best.expect("three bipartitions"))
}

/// Maximum for the bipartition where `lone` is separated from the other two.
pub fn bipartition_bound(f: &InequalityFunctional, lone: usize) -> Result<f64> {
    bipartition_optimum(f, lone, Execution::default()).map(|w| w.value)
}

fn bipartition_optimum(f: &InequalityFunctional, lone: usize, exec: Execution) -> Result<BoundWitness> {
    if f.n_parties != 3 {
        return Err(Error::InvalidParameter("biseparable bounds need three parties".into()));
    }
    if lone > 2 {
        return Err(Error::InvalidParameter(format!("party index {lone} out of range")));
    }
    check_settings(f, 2)?;
    let pair: Vec<usize> = (0..3).filter(|&k| k != lone).collect();
    let (p, q) = (pair[0], pair[1]);
    // 256 joint pair strategies x 4 lone strategies
    let (value, idx) = argmax(exec, 256 * 4, |s| {
        let (joint, single) = (s / 4, s % 4);
        f.combine(|k| {
            let code = (joint >> (2 * (k[p] * 2 + k[q]))) & 3;
            Ok(sign(code, 0) * sign(code, 1) * sign(single, k[lone]))
        })
    })?;
    let (joint, single) = (idx / 4, idx % 4);
    Ok(BoundWitness {
        value,
        strategy: DeterministicStrategy::Biseparable {
            pair: [p, q],
            lone,
            joint: (0..4)
                .map(|c| {
                    let code = (joint >> (2 * c)) & 3;
                    [sign(code, 0), sign(code, 1)]
                })
                .collect(),
            single: vec![sign(single, 0), sign(single, 1)],
        },
    })
}
