//! Global operations on formal type data: rank-one twist, Moebius pullback,
//! Fourier transform, and middle convolution.
//!
//! The Fourier transform is assembled from local stationary-phase kernels.
//! All conventions are pinned by two global identities rather than copied
//! from tables: the Fourier transform of the Kummer datum with parameter
//! `lambda` is the Kummer datum with parameter `-lambda`, and applying the
//! transform twice equals pullback along `z -> -z`.

use std::collections::BTreeMap;
use std::fmt;

use num::{One, ToPrimitive, Zero};

use crate::batch;
use crate::datum::{FormalTypeDatum, PointP1};
use crate::disk::{Block, FormalType};
use crate::error::{Error, Result};
use crate::puiseux::{invert_dominant, CoordinateChange, ISeries, PhasePart};
use crate::scalar::{rat, rat_to_string, Rat, Scalar};

// ---- Moebius maps ----

/// An invertible fractional-linear map `z -> (a z + b)/(c z + d)` with
/// exact rational entries.
#[derive(Clone, PartialEq, Eq)]
pub struct MoebiusMap {
    a: Rat,
    b: Rat,
    c: Rat,
    d: Rat,
}

impl MoebiusMap {
    pub fn new(a: Rat, b: Rat, c: Rat, d: Rat) -> Result<MoebiusMap> {
        if (&a * &d - &b * &c).is_zero() {
            return Err(Error::NotInvertible);
        }
        Ok(MoebiusMap { a, b, c, d })
    }

    pub fn identity() -> MoebiusMap {
        MoebiusMap::new(Rat::one(), Rat::zero(), Rat::zero(), Rat::one()).unwrap()
    }

    /// `z -> -z`, the pullback implementing the inverse Fourier transform.
    pub fn negation() -> MoebiusMap {
        MoebiusMap::new(-Rat::one(), Rat::zero(), Rat::zero(), Rat::one()).unwrap()
    }

    /// The involution `z -> x + 1/z` moving the finite point `x` to
    /// infinity (plain inversion for `x = 0`).
    pub fn swap_with_infinity(x: &Rat) -> MoebiusMap {
        MoebiusMap::new(x.clone(), Rat::one(), Rat::one(), Rat::zero()).unwrap()
    }

    pub fn entries(&self) -> [&Rat; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap::new(self.d.clone(), -self.b.clone(), -self.c.clone(), self.a.clone())
            .expect("inverse of an invertible map")
    }

    pub fn is_identity(&self) -> bool {
        self.c.is_zero() && self.b.is_zero() && self.a == self.d
    }

    pub fn apply(&self, p: &PointP1) -> PointP1 {
        match p {
            PointP1::Finite(q) => {
                let den = &self.c * q + &self.d;
                if den.is_zero() {
                    PointP1::Infinity
                } else {
                    PointP1::Finite((&self.a * q + &self.b) / den)
                }
            }
            PointP1::Infinity => {
                if self.c.is_zero() {
                    PointP1::Infinity
                } else {
                    PointP1::Finite(&self.a / &self.c)
                }
            }
        }
    }

    /// The induced change of local coordinates at a source point `q` with
    /// image `p = phi(q)`: writing `u_p(phi(w)) = a u/(1 + b u)` in the
    /// local coordinate `u` at `q`.
    fn local_change(&self, q: &PointP1, p: &PointP1) -> CoordinateChange {
        let (sa, sb) = match (p, q) {
            (PointP1::Finite(p), PointP1::Finite(q)) => {
                let den = &self.c * q + &self.d;
                ((&self.a - p * &self.c) / &den, &self.c / &den)
            }
            (PointP1::Finite(p), PointP1::Infinity) => {
                ((&self.b - p * &self.d) / &self.c, &self.d / &self.c)
            }
            (PointP1::Infinity, PointP1::Finite(q)) => {
                let den = &self.a * q + &self.b;
                (&self.c / &den, &self.a / &den)
            }
            (PointP1::Infinity, PointP1::Infinity) => {
                (&self.d / &self.a, &self.b / &self.a)
            }
        };
        CoordinateChange::moebius_local(sa, sb).expect("moebius local scale is nonzero")
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "z -> ({}z + {})/({}z + {})",
            rat_to_string(&self.a),
            rat_to_string(&self.b),
            rat_to_string(&self.c),
            rat_to_string(&self.d)
        )
    }
}

impl fmt::Debug for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// ---- Rank-one twists and Kummer parameters ----

/// A global rank-one datum; its existence condition (integral residue sum)
/// is part of validity.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GlobalRankOne(FormalTypeDatum);

impl GlobalRankOne {
    pub fn new(datum: FormalTypeDatum) -> Result<GlobalRankOne> {
        if datum.rank() != 1 {
            return Err(Error::InvalidDatum("rank-one twist must have rank 1".into()));
        }
        datum.require_valid()?;
        for (p, t) in datum.entries() {
            if t.blocks().iter().any(|b| b.ram() != 1) {
                return Err(Error::InvalidDatum(format!(
                    "rank-one twist has a ramified block at {p}"
                )));
            }
        }
        Ok(GlobalRankOne(datum.normalized()))
    }

    /// Build from rank-one local pieces; the caller guarantees the residue
    /// sum is integral.
    pub fn from_blocks(blocks: BTreeMap<PointP1, Block>) -> Result<GlobalRankOne> {
        let entries = blocks
            .into_iter()
            .map(|(p, b)| (p, FormalType::new(vec![b])))
            .collect();
        GlobalRankOne::new(FormalTypeDatum::new(1, entries))
    }

    pub fn trivial() -> GlobalRankOne {
        GlobalRankOne(FormalTypeDatum::new(1, BTreeMap::new()))
    }

    /// The Kummer datum: residue `lambda` at 0 and `-lambda` at infinity in
    /// the local chart.
    pub fn kummer(lambda: &Scalar) -> GlobalRankOne {
        if lambda.is_integer() {
            return GlobalRankOne::trivial();
        }
        let entries: BTreeMap<PointP1, FormalType> = [
            (PointP1::zero(), FormalType::new(vec![Block::regular(lambda.clone(), 1, 1)])),
            (
                PointP1::Infinity,
                FormalType::new(vec![Block::regular(lambda.neg(), 1, 1)]),
            ),
        ]
        .into_iter()
        .collect();
        GlobalRankOne(FormalTypeDatum::new(1, entries))
    }

    pub fn datum(&self) -> &FormalTypeDatum {
        &self.0
    }

    pub fn dual(&self) -> GlobalRankOne {
        let entries = self
            .0
            .entries()
            .iter()
            .map(|(p, t)| {
                let b = &t.blocks()[0];
                (p.clone(), FormalType::new(vec![b.dual()]))
            })
            .collect();
        GlobalRankOne(FormalTypeDatum::new(1, entries))
    }

    /// The local rank-one block at a point (trivial when unlisted).
    pub fn block_at(&self, p: &PointP1) -> Block {
        self.0
            .entries()
            .get(p)
            .map(|t| t.blocks()[0].clone())
            .unwrap_or_else(|| Block::regular(Scalar::zero(), 1, 1))
    }
}

/// The parameter of a Kummer twist, meaningful modulo integers and
/// required to be non-integral.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KummerParam(Scalar);

impl KummerParam {
    pub fn new(value: Scalar) -> Result<KummerParam> {
        if value.is_integer() {
            return Err(Error::IntegerLambda);
        }
        Ok(KummerParam(value))
    }

    pub fn value(&self) -> &Scalar {
        &self.0
    }

    pub fn negated(&self) -> KummerParam {
        KummerParam(self.0.neg())
    }
}

// ---- Twist and Moebius pullback ----

/// Pointwise tensor by a global rank-one connection.
pub fn twist(d: &FormalTypeDatum, line: &GlobalRankOne) -> Result<FormalTypeDatum> {
    let mut points: Vec<PointP1> = d.points().cloned().collect();
    for p in line.datum().points() {
        if !points.contains(p) {
            points.push(p.clone());
        }
    }
    let entries = batch::try_map(&points, |p| {
        let t = d.entry(p).tensor_rank_one(&line.block_at(p))?;
        Ok((p.clone(), t))
    })?;
    Ok(FormalTypeDatum::new(d.rank(), entries.into_iter().collect()).normalized())
}

/// Pullback of a datum along a Moebius map: the entry at `p` moves to
/// `phi^{-1}(p)` and is rewritten in the induced local coordinate.
pub fn moebius(d: &FormalTypeDatum, phi: &MoebiusMap) -> Result<FormalTypeDatum> {
    let inv = phi.inverse();
    let items: Vec<(PointP1, FormalType)> =
        d.entries().iter().map(|(p, t)| (p.clone(), t.clone())).collect();
    let entries = batch::try_map(&items, |(p, t)| {
        let q = inv.apply(p);
        let change = phi.local_change(&q, p);
        let mut blocks = Vec::with_capacity(t.blocks().len());
        for b in t.blocks() {
            let (phase, _constant) = b.phase().substitute(&change)?;
            blocks.push(Block::new(phase, b.residue().clone(), b.unipotent(), b.mult())?);
        }
        Ok((q, FormalType::new(blocks)))
    })?;
    Ok(FormalTypeDatum::new(d.rank(), entries.into_iter().collect()))
}

// ---- Local Fourier kernels ----

/// Residue transport for a source block at a finite point with slope `s`:
/// `(2 lambda + s) / (2 (1 + s))`. Reduces to the identity for regular
/// blocks, which pins the Kummer identity.
fn residue_out_finite(lambda: &Scalar, s: &Rat) -> Scalar {
    let num = lambda.scale(&rat(2, 1)).add(&Scalar::from_rat(s.clone()));
    num.scale(&(Rat::one() / (rat(2, 1) * (Rat::one() + s))))
}

/// Residue transport for a source block at infinity with slope `s != 1`:
/// `(2 lambda - s) / (2 (1 - s))`, the inverse of the finite law under the
/// involution identity.
fn residue_out_infinity(lambda: &Scalar, s: &Rat) -> Scalar {
    let num = lambda.scale(&rat(2, 1)).sub(&Scalar::from_rat(s.clone()));
    num.scale(&(Rat::one() / (rat(2, 1) * (Rat::one() - s))))
}

/// The phase on the integer cover: exponent `q` becomes `q * ram`.
fn integerized_phase(phase: &PhasePart) -> ISeries {
    let r = phase.ram() as i64;
    ISeries::exact(phase.terms().map(|(e, c)| {
        let ie = (e * rat(r, 1)).to_integer().to_i64().expect("exponent in range");
        (ie, c.clone())
    }))
}

/// Emit the descended blocks of `Ind` of a rank-one object living on the
/// degree-`level` cover: phase orbit plus the `level/ram` residue twists.
fn emit_induced(
    phase: PhasePart,
    residue: Scalar,
    unipotent: u32,
    mult: u32,
    level: i64,
    out: &mut Vec<Block>,
) -> Result<()> {
    let rp = phase.ram() as i64;
    debug_assert_eq!(level % rp, 0);
    for j in 0..(level / rp) {
        let res = residue.add(&Scalar::from_rat(rat(j, level)));
        out.push(Block::new(phase.clone(), res.clone(), unipotent, mult)?);
    }
    Ok(())
}

/// Local Fourier transform of a nontrivial block at the finite point `x`,
/// landing at infinity of the dual line.
///
/// Regular blocks map to regular blocks tensored with the linear phase
/// `x zhat`; irregular blocks go through stationary phase on the cover:
/// the critical point of `f(u) + (x+u) zhat` has `zhat = -f'(u)`, and the
/// output phase is the principal part of `f + (x+u) zhat` there.
pub fn local_fourier_finite(x: &Rat, b: &Block) -> Result<Vec<Block>> {
    if b.is_trivial() {
        return Err(Error::TrivialBlock);
    }
    let mut out = Vec::new();
    let s = b.slope();
    if s.is_zero() {
        // Regular input: slope-one output direction encodes the point.
        let phase = linear_phase(x)?;
        let (unipotent, residue) = if b.residue().is_integer() {
            // J(lambda in Z, u >= 2): one Jordan step is eaten by the
            // horizontal line.
            (b.unipotent() - 1, b.residue().clone())
        } else {
            (b.unipotent(), b.residue().clone())
        };
        debug_assert!(unipotent >= 1);
        out.push(Block::new(phase, residue, unipotent, b.mult())?);
        return Ok(out);
    }
    let r = b.ram() as i64;
    let rs = (s.clone() * rat(r, 1)).to_integer().to_i64().expect("integral r*s");
    let n = r + rs;
    let f_t = integerized_phase(b.phase());
    // G(t) = -f_t'(t) / (r t^{r-1}): the critical equation is G(t) = zhat.
    let g = ISeries::exact(f_t.terms.iter().map(|(e, c)| {
        (e - r, c.scale(&rat(-*e, r)))
    }));
    let trunc = n + rs + 6;
    let t = invert_dominant(&g, trunc)?;
    // ghat = f_t(t) + (x + t^r) * zhat, with zhat = v^{-n}.
    let zhat = ISeries::monomial(-n, Scalar::one());
    let xs = ISeries::monomial(0, Scalar::from_rat(x.clone()));
    let ghat = f_t.compose(&t)?.add(&xs.add(&t.pow_i64(r)?).mul(&zhat));
    let phase = principal_part(&ghat, n, true)?;
    let residue = residue_out_finite(b.residue(), &s);
    emit_induced(phase, residue, b.unipotent(), b.mult(), n, &mut out)?;
    Ok(out)
}

/// Local Fourier transform at infinity for slopes greater than one,
/// landing at infinity of the dual line.
pub fn local_fourier_infty(b: &Block) -> Result<Vec<Block>> {
    let s = b.slope();
    if s <= Rat::one() {
        return Err(Error::SlopeNotGreaterThanOne(rat_to_string(&s)));
    }
    stationary_phase_at_infinity(b, &s)
}

/// Local Fourier transform at infinity for slopes strictly less than one,
/// landing at a finite point of the dual line (the caller removes the
/// slope-one linear term first). Returns the quotient modulo horizontal
/// parts; the global assembly restores the unipotent lift and padding.
fn local_fourier_infty_to_finite(b: &Block) -> Result<Vec<Block>> {
    let s = b.slope();
    debug_assert!(s < Rat::one());
    if s.is_zero() {
        // Regular blocks transport unchanged; the assembly lifts integer
        // residues.
        return Ok(vec![b.clone()]);
    }
    stationary_phase_at_infinity(b, &s)
}

/// Shared stationary-phase kernel for blocks at infinity: the critical
/// equation of `f(zeta) + zhat/zeta` is `zeta^2 f'(zeta) = zhat`, written
/// on the cover `zeta = tau^r`.
fn stationary_phase_at_infinity(b: &Block, s: &Rat) -> Result<Vec<Block>> {
    let r = b.ram() as i64;
    let rs = (s.clone() * rat(r, 1)).to_integer().to_i64().expect("integral r*s");
    // n = r(s-1) for slope > 1 (dominant -n), n = r(1-s) for slope < 1
    // (dominant +n); invert_dominant handles both signs uniformly.
    let f_tau = integerized_phase(b.phase());
    // G(tau) = tau^{r+1} f_tau'(tau) / r.
    let g = ISeries::exact(f_tau.terms.iter().map(|(e, c)| {
        (e + r, c.scale(&rat(*e, r)))
    }));
    let n = (rs - r).abs();
    let trunc = n + rs + 6;
    let tau = invert_dominant(&g, trunc)?;
    // ghat = f_tau(tau) + zhat tau^{-r}, zhat = v^{+-n} matching G's
    // dominant exponent.
    let d0 = rs >= r; // slope > 1 <=> dominant exponent negative
    let zhat = ISeries::monomial(if d0 { -n } else { n }, Scalar::one());
    let ghat = f_tau.compose(&tau)?.add(&zhat.mul(&tau.pow_i64(-r)?));
    let phase = principal_part(&ghat, n, d0)?;
    let residue = residue_out_infinity(b.residue(), s);
    let mut out = Vec::new();
    emit_induced(phase, residue, b.unipotent(), b.mult(), n, &mut out)?;
    Ok(out)
}

/// Extract the principal part of a stationary-phase output: terms with
/// negative auxiliary exponent, reinterpreted over the degree-`n` cover of
/// the target coordinate. `at_infinity` selects the chart orientation.
fn principal_part(ghat: &ISeries, n: i64, at_infinity: bool) -> Result<PhasePart> {
    if let Some(t) = ghat.trunc {
        if t < 0 {
            return Err(Error::InsufficientPrecision(format!(
                "stationary phase resolved only to order {t} of the cover"
            )));
        }
    }
    let _ = at_infinity; // both charts read negative cover exponents
    PhasePart::from_terms(
        ghat.terms
            .iter()
            .filter(|(e, _)| **e < 0)
            .map(|(e, c)| (rat(*e, n), c.clone())),
    )
}

fn linear_phase(x: &Rat) -> Result<PhasePart> {
    if x.is_zero() {
        return Ok(PhasePart::zero());
    }
    PhasePart::from_terms([(rat(-1, 1), Scalar::from_rat(x.clone()))])
}

// ---- Global Fourier transform ----

/// Outcome of the Fourier transform on a formal type datum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FourierOutcome {
    Datum(FormalTypeDatum),
    /// The transform is supported at a single point (rank one with only a
    /// second-order pole at infinity, and its degenerations).
    Skyscraper,
    /// The compatibility condition failed: a finite dual point needs more
    /// rank than the transform provides.
    Undefined { point: PointP1, needed: i64, available: i64 },
}

impl FourierOutcome {
    pub fn into_datum(self) -> Result<FormalTypeDatum> {
        match self {
            FourierOutcome::Datum(d) => Ok(d),
            FourierOutcome::Skyscraper => {
                Err(Error::InvalidDatum("Fourier transform is a skyscraper".into()))
            }
            FourierOutcome::Undefined { point, needed, available } => Err(Error::InvalidDatum(
                format!("Fourier transform undefined at {point}: needs rank {needed}, has {available}"),
            )),
        }
    }
}

/// The Fourier transform of a formal type datum.
///
/// The rank of the output is
/// `sum over finite x of delta(V_x) + irreg - rank of the slope>1 part at
/// infinity`; the type at dual infinity is the union of the finite local
/// transforms and the slope>1 transform; each finite dual point receives
/// the twisted slope<1 part of the type at infinity, lifted and padded
/// with trivial blocks up to the output rank.
pub fn fourier(d: &FormalTypeDatum) -> Result<FourierOutcome> {
    let d = d.normalized();
    let v_inf = d.entry(&PointP1::Infinity);

    // Output rank, from the input side.
    let mut rank_out: i64 = 0;
    for (p, t) in d.entries() {
        if !p.is_infinity() {
            rank_out += t.delta()?;
        }
    }
    for b in v_inf.blocks() {
        if b.slope() > Rat::one() {
            let irr = b.irreg();
            debug_assert!(irr.is_integer());
            rank_out += irr.to_integer().to_i64().expect("irregularity in range") - b.rank();
        }
    }
    if rank_out == 0 {
        return Ok(FourierOutcome::Skyscraper);
    }

    // Type at dual infinity.
    let mut inf_blocks: Vec<Block> = Vec::new();
    let finite_jobs: Vec<(Rat, Block)> = d
        .entries()
        .iter()
        .filter_map(|(p, t)| match p {
            PointP1::Finite(x) => Some((x, t)),
            PointP1::Infinity => None,
        })
        .flat_map(|(x, t)| {
            t.blocks()
                .iter()
                .filter(|b| !b.is_trivial())
                .map(|b| (x.clone(), b.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    let transformed = batch::try_map(&finite_jobs, |(x, b)| local_fourier_finite(x, b))?;
    for blocks in transformed {
        inf_blocks.extend(blocks);
    }
    for b in v_inf.blocks() {
        if b.slope() > Rat::one() {
            inf_blocks.extend(local_fourier_infty(b)?);
        }
    }
    let inf_type = FormalType::new(inf_blocks);
    if inf_type.rank() != rank_out {
        return Err(Error::InternalInconsistency(format!(
            "dual-infinity rank {} does not match the rank formula {}",
            inf_type.rank(),
            rank_out
        )));
    }

    // Finite dual points: group the slope<=1 part of the type at infinity
    // by the direction of its linear term.
    let mut groups: BTreeMap<Rat, Vec<Block>> = BTreeMap::new();
    let mut infinity_blocks: Vec<Block> = v_inf.blocks().to_vec();
    if !d.entries().contains_key(&PointP1::Infinity) {
        // The implicit trivial type at infinity still shapes the dual
        // unipotent structure.
        infinity_blocks = FormalType::trivial(d.rank()).blocks().to_vec();
    }
    for b in &infinity_blocks {
        if b.slope() > Rat::one() {
            continue;
        }
        let c = b.phase().linear_coeff();
        let y = match c.as_rational() {
            Some(q) => -q.clone(),
            None => {
                return Err(Error::FieldExtensionRequired(format!(
                    "dual singular point -({c}) is not rational"
                )))
            }
        };
        groups.entry(y).or_default().push(b.clone());
    }

    let mut entries: BTreeMap<PointP1, FormalType> = BTreeMap::new();
    entries.insert(PointP1::Infinity, inf_type);
    for (y, blocks) in groups {
        let mut quotient: Vec<Block> = Vec::new();
        for b in blocks {
            // Remove the linear term by twisting with y * zeta^{-1}.
            let twisted_phase = b
                .phase()
                .add(&PhasePart::from_terms([(rat(-1, 1), Scalar::from_rat(y.clone()))])?);
            let tb = Block::new(twisted_phase, b.residue().clone(), b.unipotent(), b.mult())?;
            debug_assert!(tb.slope() < Rat::one());
            quotient.extend(local_fourier_infty_to_finite(&tb)?);
        }
        // Lift: the quotient's integer-residue regular blocks each gain one
        // Jordan step; then pad with trivial lines up to the output rank.
        let mut lifted: Vec<Block> = Vec::new();
        for b in quotient {
            if b.phase().is_zero() && b.residue().is_integer() {
                lifted.push(Block::new(
                    PhasePart::zero(),
                    b.residue().clone(),
                    b.unipotent() + 1,
                    b.mult(),
                )?);
            } else {
                lifted.push(b);
            }
        }
        let t = FormalType::new(lifted);
        let pad = rank_out - t.rank();
        if pad < 0 {
            return Ok(FourierOutcome::Undefined {
                point: PointP1::Finite(y),
                needed: t.rank(),
                available: rank_out,
            });
        }
        let full = if pad > 0 {
            let mut bs = t.blocks().to_vec();
            bs.push(Block::regular(Scalar::zero(), 1, pad as u32));
            FormalType::new(bs)
        } else {
            t
        };
        entries.insert(PointP1::Finite(y), full);
    }

    let out = FormalTypeDatum::new(rank_out as u32, entries).normalized();
    Ok(FourierOutcome::Datum(out))
}

/// The inverse Fourier transform, derived rather than independently
/// implemented: pullback along `z -> -z` after the forward transform.
pub fn fourier_inverse(d: &FormalTypeDatum) -> Result<FourierOutcome> {
    match fourier(d)? {
        FourierOutcome::Datum(out) => Ok(FourierOutcome::Datum(moebius(&out, &MoebiusMap::negation())?)),
        other => Ok(other),
    }
}

// ---- Middle convolution ----

/// Outcome of middle convolution on a formal type datum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum McOutcome {
    Datum(FormalTypeDatum),
    Undefined { point: PointP1, needed: i64, available: i64 },
}

impl McOutcome {
    pub fn into_datum(self) -> Result<FormalTypeDatum> {
        match self {
            McOutcome::Datum(d) => Ok(d),
            McOutcome::Undefined { point, needed, available } => Err(Error::InvalidDatum(format!(
                "middle convolution undefined at {point}: needs rank {needed}, has {available}"
            ))),
        }
    }
}

/// Middle convolution with the Kummer object of parameter `lambda`:
/// Fourier transform, twist by the Kummer datum of `-lambda`, inverse
/// Fourier transform. The output rank is checked against the closed rank
/// formula; a mismatch is an internal bug trap, not a data error.
pub fn middle_convolution(d: &FormalTypeDatum, lambda: &KummerParam) -> Result<McOutcome> {
    let d = d.normalized();
    if is_excluded_mc_shape(&d, lambda) {
        return Err(Error::ExcludedTrivialCase);
    }

    // Closed rank formula: sum of finite deltas plus
    // delta(V_inf (x) Kummer(-lambda)) minus the rank.
    let mut expected: i64 = -(d.rank() as i64);
    for (p, t) in d.entries() {
        if !p.is_infinity() {
            expected += t.delta()?;
        }
    }
    let kummer_inf = Block::regular(lambda.value().neg(), 1, 1);
    expected += d
        .entry(&PointP1::Infinity)
        .tensor_rank_one(&kummer_inf)?
        .delta()?;

    let step1 = match fourier(&d)? {
        FourierOutcome::Datum(out) => out,
        FourierOutcome::Skyscraper => return Err(Error::ExcludedTrivialCase),
        FourierOutcome::Undefined { point, needed, available } => {
            return Ok(McOutcome::Undefined { point, needed, available })
        }
    };
    let step2 = twist(&step1, &GlobalRankOne::kummer(&lambda.value().neg()))?;
    let step3 = match fourier_inverse(&step2)? {
        FourierOutcome::Datum(out) => out,
        FourierOutcome::Skyscraper => {
            return Ok(McOutcome::Undefined {
                point: PointP1::Infinity,
                needed: 0,
                available: 0,
            })
        }
        FourierOutcome::Undefined { point, needed, available } => {
            return Ok(McOutcome::Undefined { point, needed, available })
        }
    };
    if step3.rank() as i64 != expected {
        return Err(Error::InternalInconsistency(format!(
            "middle convolution rank {} does not match the rank formula {}",
            step3.rank(),
            expected
        )));
    }
    Ok(McOutcome::Datum(step3))
}

/// The excluded rank-one shapes: the trivial datum, and two simple poles
/// at a finite point and infinity with residues `-lambda` and `lambda`.
fn is_excluded_mc_shape(d: &FormalTypeDatum, lambda: &KummerParam) -> bool {
    if d.rank() != 1 {
        return false;
    }
    if d.is_rank_one_trivial() {
        return true;
    }
    let entries = d.entries();
    if entries.len() != 2 || !entries.contains_key(&PointP1::Infinity) {
        return false;
    }
    let mut finite_res = None;
    let mut inf_res = None;
    for (p, t) in entries {
        let b = &t.blocks()[0];
        if !b.phase().is_zero() || b.unipotent() != 1 {
            return false;
        }
        if p.is_infinity() {
            inf_res = Some(b.residue().clone());
        } else {
            finite_res = Some(b.residue().clone());
        }
    }
    match (finite_res, inf_res) {
        (Some(fr), Some(ir)) => {
            fr.add(lambda.value()).is_integer() && ir.sub(lambda.value()).is_integer()
        }
        _ => false,
    }
}
