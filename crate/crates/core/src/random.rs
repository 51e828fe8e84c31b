//! Samplers for states, channels, instruments and classical tables.
//!
//! Used by the property and acceptance suites; every sampler takes the RNG
//! explicitly so draws are reproducible from a seed.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::classical::{ClassicalOperation, ClassicalResource};
use crate::operations::{choi_from_kraus, BlochSetting, Instrument, Povm};
use crate::tensor::{hermitian_map, CMatrix, SpaceLabel, C64};

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    isometry(rng, d, d)
}

/// Random isometry `V: C^cols -> C^rows`, `rows >= cols`.
pub fn isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let qr = ginibre(rng, rows, cols).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut v = q;
    for k in 0..cols {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = v.column_mut(k);
        col *= phase;
    }
    v
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    let g = ginibre(rng, d, 1);
    let n = g.norm();
    g.iter().map(|z| z / n).collect()
}

/// Full-rank density matrix `G G^dagger / tr`.
pub fn density_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = ginibre(rng, d, d);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Kraus operators of a random CPTP map `d_in -> d_out` with `n_kraus` terms;
/// needs `d_out * n_kraus >= d_in`.
pub fn channel_kraus<R: Rng + ?Sized>(
    rng: &mut R,
    d_in: usize,
    d_out: usize,
    n_kraus: usize,
) -> Vec<CMatrix> {
    let v = isometry(rng, d_out * n_kraus, d_in);
    (0..n_kraus)
        .map(|k| v.rows(k * d_out, d_out).into_owned())
        .collect()
}

pub fn bloch_setting<R: Rng + ?Sized>(rng: &mut R) -> BlochSetting {
    let z: f64 = rng.gen_range(-1.0..1.0);
    BlochSetting {
        theta: z.acos(),
        phi: rng.gen_range(0.0..std::f64::consts::TAU),
    }
}

/// POVM `E_a = S^{-1/2} G_a S^{-1/2}` with `G_a` random positive.
pub fn povm<R: Rng + ?Sized>(rng: &mut R, label: SpaceLabel, outcomes: usize) -> Povm {
    let d = label.dim;
    let gs: Vec<CMatrix> = (0..outcomes)
        .map(|_| {
            let a = ginibre(rng, d, d);
            &a * a.adjoint()
        })
        .collect();
    let s: CMatrix = gs.iter().sum();
    let s_inv_half = hermitian_map(&s, |x| 1.0 / x.sqrt());
    let elems = gs
        .iter()
        .map(|g| {
            let e = &s_inv_half * g * &s_inv_half;
            (&e + e.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect();
    Povm::new(label, elems).expect("normalized random POVM is valid")
}

/// Random instrument from a Stinespring isometry split into outcome groups.
/// Generally biased.
pub fn instrument<R: Rng + ?Sized>(
    rng: &mut R,
    setting: &str,
    input: SpaceLabel,
    output: SpaceLabel,
    outcomes: usize,
) -> Instrument {
    let per = 2;
    let kraus = channel_kraus(rng, input.dim, output.dim, outcomes * per);
    let branches = kraus
        .chunks(per)
        .map(|ks| choi_from_kraus(ks, Some(input.clone()), Some(output.clone())))
        .collect::<Result<Vec<_>, _>>()
        .expect("Kraus dimensions agree");
    Instrument::new(setting, branches).expect("isometry gives a CPTP sum")
}

/// Random unbiased instrument with equal input and output dimension: a
/// mixture of Lüders instruments of random POVMs, each followed by a random
/// unitary. Every component is unital, hence so is the sum.
pub fn unbiased_instrument<R: Rng + ?Sized>(
    rng: &mut R,
    setting: &str,
    input: SpaceLabel,
    output: SpaceLabel,
    outcomes: usize,
) -> Instrument {
    assert_eq!(input.dim, output.dim, "unbiased sampler needs d_in = d_out");
    let d = input.dim;
    let components = 2;
    let weights = simplex_point(rng, components);
    let mut kraus: Vec<Vec<CMatrix>> = vec![Vec::new(); outcomes];
    for &w in &weights {
        let f = povm(rng, SpaceLabel::plain("tmp", d), outcomes);
        let u = unitary(rng, d);
        for (a, e) in f.elements().iter().enumerate() {
            let root = hermitian_map(e.matrix(), |x| x.max(0.0).sqrt());
            kraus[a].push(&u * root * C64::new(w.sqrt(), 0.0));
        }
    }
    let branches = kraus
        .iter()
        .map(|ks| choi_from_kraus(ks, Some(input.clone()), Some(output.clone())))
        .collect::<Result<Vec<_>, _>>()
        .expect("Kraus dimensions agree");
    Instrument::new(setting, branches).expect("mixture of Lüders instruments is CPTP")
}

/// Uniform (flat Dirichlet) point on the probability simplex.
pub fn simplex_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// Unbiased classical preparation: `sum_a P(a, l | x) = 1 / d_out` for all
/// `x, l`.
pub fn unbiased_preparation<R: Rng + ?Sized>(
    rng: &mut R,
    settings: usize,
    outcomes: usize,
    d_out: usize,
) -> ClassicalOperation {
    let mut table = Vec::with_capacity(settings * outcomes * d_out);
    for _x in 0..settings {
        let mut slice = vec![0.0; outcomes * d_out];
        for l in 0..d_out {
            let p = simplex_point(rng, outcomes);
            for a in 0..outcomes {
                slice[a * d_out + l] = p[a] / d_out as f64;
            }
        }
        table.extend(slice);
    }
    ClassicalOperation::new(settings, 1, outcomes, d_out, table).expect("normalized by construction")
}

/// Classical channel with every conditional slice drawn uniformly.
pub fn resource<R: Rng + ?Sized>(rng: &mut R, d_from: usize, d_to: usize) -> ClassicalResource {
    let mut table = Vec::with_capacity(d_from * d_to);
    for _ in 0..d_from {
        table.extend(simplex_point(rng, d_to));
    }
    ClassicalResource::new(d_from, d_to, table).expect("normalized by construction")
}

/// Final classical measurement `P(b | y, l)` with trivial output.
pub fn measurement<R: Rng + ?Sized>(
    rng: &mut R,
    settings: usize,
    outcomes: usize,
    d_in: usize,
) -> ClassicalOperation {
    let mut table = Vec::with_capacity(settings * d_in * outcomes);
    for _ in 0..settings * d_in {
        table.extend(simplex_point(rng, outcomes));
    }
    ClassicalOperation::new(settings, d_in, outcomes, 1, table).expect("normalized by construction")
}
