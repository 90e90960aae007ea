//! The block calculus on the punctured formal disk.
//!
//! A [`Block`] is one indecomposable formal summand: a ramification degree,
//! an exponential phase, a residue, a unipotent (Jordan) size, and a
//! multiplicity. A [`FormalType`] is a canonically sorted multiset of
//! blocks. The central operation is [`FormalType::hom`], which enumerates
//! Galois-conjugate line pairs over the common ramified extension and
//! descends them back to blocks over the base.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num::{Integer, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::puiseux::PhasePart;
use crate::scalar::{rat, Rat, Scalar};

/// One Levelt-Turrittin summand.
///
/// Invariants: `ram` equals the minimal ramification of `phase` (so the
/// Galois orbit of the phase has exactly `ram` elements and the block is
/// primitive), and the stored phase is the least element of its orbit.
#[derive(Clone, PartialEq, Eq)]
pub struct Block {
    ram: u32,
    phase: PhasePart,
    residue: Scalar,
    unipotent: u32,
    mult: u32,
}

impl Block {
    /// Canonical constructor: the phase is replaced by its orbit
    /// representative and the ramification is derived from it.
    pub fn new(phase: PhasePart, residue: Scalar, unipotent: u32, mult: u32) -> Result<Block> {
        if unipotent == 0 || mult == 0 {
            return Err(Error::Parse("unipotent size and multiplicity must be positive".into()));
        }
        let phase = phase.orbit_representative()?;
        Ok(Block { ram: phase.ram(), phase, residue, unipotent, mult })
    }

    /// Constructor for parsed data carrying an explicit ramification; a
    /// mismatch means the block is reducible and is rejected.
    pub fn with_declared_ram(
        ram: u32,
        phase: PhasePart,
        residue: Scalar,
        unipotent: u32,
        mult: u32,
    ) -> Result<Block> {
        if ram != phase.ram() {
            return Err(Error::ImprimitiveBlock);
        }
        Block::new(phase, residue, unipotent, mult)
    }

    /// A regular rank-one style block `(ram 1, phase 0, residue, u, m)`.
    pub fn regular(residue: Scalar, unipotent: u32, mult: u32) -> Block {
        Block::new(PhasePart::zero(), residue, unipotent, mult).expect("regular block is valid")
    }

    /// A rank-one block `(ram 1, unramified phase, residue)`.
    pub fn rank_one(phase: PhasePart, residue: Scalar) -> Result<Block> {
        let b = Block::new(phase, residue, 1, 1)?;
        if b.ram != 1 {
            return Err(Error::RamifiedChoice);
        }
        Ok(b)
    }

    pub fn ram(&self) -> u32 {
        self.ram
    }

    pub fn phase(&self) -> &PhasePart {
        &self.phase
    }

    pub fn residue(&self) -> &Scalar {
        &self.residue
    }

    pub fn unipotent(&self) -> u32 {
        self.unipotent
    }

    pub fn mult(&self) -> u32 {
        self.mult
    }

    pub fn with_mult(&self, mult: u32) -> Block {
        let mut b = self.clone();
        b.mult = mult;
        b
    }

    pub fn rank(&self) -> i64 {
        self.ram as i64 * self.unipotent as i64 * self.mult as i64
    }

    pub fn slope(&self) -> Rat {
        self.phase.slope()
    }

    pub fn irreg(&self) -> Rat {
        rat(self.rank(), 1) * self.slope()
    }

    /// Horizontal lines: one per Jordan block, for regular blocks with
    /// integer residue.
    pub fn hor(&self) -> i64 {
        if self.phase.is_zero() && self.residue.is_integer() {
            self.mult as i64
        } else {
            0
        }
    }

    /// Trivial means a full copy of `(O, d)`: no phase, integer residue,
    /// and no unipotent part.
    pub fn is_trivial(&self) -> bool {
        self.phase.is_zero() && self.residue.is_integer() && self.unipotent == 1
    }

    /// Dual block: negated phase and residue, same Jordan data.
    pub fn dual(&self) -> Block {
        Block::new(self.phase.neg(), self.residue.neg(), self.unipotent, self.mult)
            .expect("dual of a valid block is valid")
    }

    fn key(&self) -> (u32, Rat, &PhasePart, &Scalar, u32) {
        (self.ram, self.slope(), &self.phase, &self.residue, self.unipotent)
    }
}

impl PartialOrd for Block {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Block {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key()).then_with(|| self.mult.cmp(&other.mult))
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(ram {}, phase {}, res {}, u {}, m {})",
            self.ram, self.phase, self.residue, self.unipotent, self.mult
        )
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An irreducible object of the local category: a block with `u = m = 1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Component(Block);

impl Component {
    pub fn new(phase: PhasePart, residue: Scalar) -> Result<Component> {
        Ok(Component(Block::new(phase, residue, 1, 1)?))
    }

    pub fn of_block(b: &Block) -> Component {
        Component(Block { unipotent: 1, mult: 1, ..b.clone() })
    }

    pub fn ram(&self) -> u32 {
        self.0.ram
    }

    pub fn rank(&self) -> i64 {
        self.0.ram as i64
    }

    pub fn phase(&self) -> &PhasePart {
        &self.0.phase
    }

    pub fn residue(&self) -> &Scalar {
        &self.0.residue
    }

    pub fn as_block(&self) -> &Block {
        &self.0
    }

    pub fn as_type(&self) -> FormalType {
        FormalType::new(vec![self.0.clone()])
    }
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Numerical invariants of a formal type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invariants {
    pub rank: i64,
    pub irreg: i64,
    /// Slope multiset as (slope, total rank at that slope), ascending.
    pub slopes: Vec<(Rat, i64)>,
    pub hor: i64,
    pub delta: i64,
}

/// A multiset of blocks in canonical form: sorted, with equal
/// (ram, phase-orbit, residue, unipotent) keys merged by adding
/// multiplicities. Only exact residue matches merge.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FormalType {
    blocks: Vec<Block>,
}

impl FormalType {
    pub fn new(blocks: Vec<Block>) -> FormalType {
        let mut blocks = blocks;
        blocks.sort();
        let mut merged: Vec<Block> = Vec::with_capacity(blocks.len());
        for b in blocks {
            match merged.last_mut() {
                Some(last) if last.key() == b.key() => last.mult += b.mult,
                _ => merged.push(b),
            }
        }
        FormalType { blocks: merged }
    }

    /// The trivial type of the given rank.
    pub fn trivial(rank: u32) -> FormalType {
        if rank == 0 {
            return FormalType { blocks: Vec::new() };
        }
        FormalType::new(vec![Block::regular(Scalar::zero(), 1, rank)])
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn rank(&self) -> i64 {
        self.blocks.iter().map(Block::rank).sum()
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.iter().all(Block::is_trivial)
    }

    /// Rank, irregularity, slope multiset, horizontal rank, and delta.
    pub fn invariants(&self) -> Result<Invariants> {
        let rank: i64 = self.rank();
        let mut irreg = Rat::zero();
        let mut slopes: Vec<(Rat, i64)> = Vec::new();
        for b in &self.blocks {
            irreg += b.irreg();
            let s = b.slope();
            match slopes.iter_mut().find(|(sl, _)| *sl == s) {
                Some((_, r)) => *r += b.rank(),
                None => slopes.push((s, b.rank())),
            }
        }
        slopes.sort();
        if !irreg.is_integer() || irreg.is_negative() {
            return Err(Error::NonIntegralIrregularity);
        }
        let irreg = irreg
            .to_integer()
            .try_into()
            .map_err(|_| Error::NonIntegralIrregularity)?;
        let hor: i64 = self.blocks.iter().map(Block::hor).sum();
        Ok(Invariants { rank, irreg, slopes, hor, delta: irreg + rank - hor })
    }

    pub fn delta(&self) -> Result<i64> {
        Ok(self.invariants()?.delta)
    }

    /// The formal type of `HOM(V, W) = W (x) V^dual`.
    ///
    /// Conjugate line pairs over the common degree-lcm extension are grouped
    /// into diagonal Galois orbits; each orbit descends to the induced
    /// module of a rank-one object, which splits into twist blocks
    /// `(ram(d), d, rho + j/l)`. Jordan factors tensor by the
    /// Clebsch-Gordan rule.
    pub fn hom(&self, other: &FormalType) -> Result<FormalType> {
        let mut out = Vec::new();
        for bv in &self.blocks {
            for bw in &other.blocks {
                hom_block_pair(bv, bw, &mut out)?;
            }
        }
        Ok(FormalType::new(out))
    }

    pub fn end(&self) -> Result<FormalType> {
        self.hom(self)
    }

    /// Tensor with a rank-one block: phases and residues shift, Jordan data
    /// is unchanged.
    pub fn tensor_rank_one(&self, line: &Block) -> Result<FormalType> {
        debug_assert!(line.ram == 1 && line.unipotent == 1 && line.mult == 1);
        let mut out = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            out.push(Block::new(
                b.phase.add(&line.phase),
                b.residue.add(&line.residue),
                b.unipotent,
                b.mult,
            )?);
        }
        Ok(FormalType::new(out))
    }

    /// The distinct irreducible components (unipotent-free subquotients).
    pub fn components(&self) -> Vec<Component> {
        let set: BTreeSet<Component> = self.blocks.iter().map(Component::of_block).collect();
        set.into_iter().collect()
    }

    /// The set of irreducible components minimizing
    /// `delta(HOM(V', V)) / rank(V')`. The full tie set is returned in
    /// deterministic (ram, slope, phase, residue) order.
    pub fn min_delta_components(&self) -> Result<Vec<Component>> {
        let components = self.components();
        let mut best: Option<(i64, i64)> = None; // delta, rank as a fraction
        let mut winners: Vec<Component> = Vec::new();
        for c in components {
            let d = c.as_type().hom(self)?.delta()?;
            let r = c.rank();
            let better = match &best {
                None => true,
                // d/r < bd/br  <=>  d*br < bd*r
                Some((bd, br)) => match (d * br).cmp(&(bd * r)) {
                    Ordering::Less => true,
                    Ordering::Equal => {
                        winners.push(c.clone());
                        continue;
                    }
                    Ordering::Greater => continue,
                },
            };
            if better {
                best = Some((d, r));
                winners = vec![c];
            }
        }
        Ok(winners)
    }
}

/// Emit the descended blocks of `HOM` for one block pair into `out`.
fn hom_block_pair(bv: &Block, bw: &Block, out: &mut Vec<Block>) -> Result<()> {
    let r1 = bv.ram as i64;
    let r2 = bw.ram as i64;
    let l = r1.lcm(&r2);
    let c = r1.gcd(&r2);
    let mult = bv.mult * bw.mult;
    let rho = bw.residue.sub(&bv.residue);
    for j0 in 0..c {
        // Orbit representative (0, j0) of the diagonal action on index pairs.
        let g_j = bw.phase.conjugate_at_level(j0 as u64, l as u32)?;
        let d = g_j.sub(&bv.phase);
        let rp = d.ram() as i64;
        debug_assert_eq!(l % rp, 0, "difference ramification must divide the level");
        for j in 0..(l / rp) {
            let residue = rho.add(&Scalar::from_rat(rat(j, l)));
            for s in 1..=bv.unipotent.min(bw.unipotent) {
                let u = bv.unipotent + bw.unipotent + 1 - 2 * s;
                out.push(Block::new(d.clone(), residue.clone(), u, mult)?);
            }
        }
    }
    Ok(())
}

/// The best rank-one approximation of an irreducible component: the
/// integer-exponent sub-sum of its phase, residue left to the caller.
///
/// When the component is ramified, the slope of `HOM(line, component)` is
/// the leading fractional exponent of the phase, never an integer.
pub fn best_rank_one_approx(component: &Component) -> Block {
    let phase = component.phase().integer_part();
    Block::new(phase, Scalar::zero(), 1, 1).expect("integer part is unramified")
}

impl fmt::Display for FormalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for FormalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phase(terms: &[(i64, i64, i64)]) -> PhasePart {
        PhasePart::from_terms(
            terms
                .iter()
                .map(|&(n, d, c)| (rat(n, d), Scalar::from_int(c))),
        )
        .unwrap()
    }

    fn reg(num: i64, den: i64) -> Block {
        Block::regular(Scalar::rational(num, den), 1, 1)
    }

    #[test]
    fn trivial_invariants() {
        let t = FormalType::trivial(3);
        let inv = t.invariants().unwrap();
        assert_eq!(inv.rank, 3);
        assert_eq!(inv.irreg, 0);
        assert_eq!(inv.hor, 3);
        assert_eq!(inv.delta, 0);
    }

    #[test]
    fn regular_half_residue() {
        let t = FormalType::new(vec![reg(1, 2)]);
        let inv = t.invariants().unwrap();
        assert_eq!((inv.rank, inv.irreg, inv.hor, inv.delta), (1, 0, 0, 1));
    }

    #[test]
    fn single_irregular_block() {
        let b = Block::new(phase(&[(-1, 1, 1)]), Scalar::zero(), 1, 1).unwrap();
        let t = FormalType::new(vec![b]);
        let inv = t.invariants().unwrap();
        assert_eq!((inv.rank, inv.irreg, inv.hor, inv.delta), (1, 1, 0, 2));
    }

    #[test]
    fn integer_shifted_residues_stay_distinct() {
        let t = FormalType::new(vec![reg(0, 1), reg(1, 1)]);
        assert_eq!(t.blocks().len(), 2);
        // Both count as horizontal lines.
        assert_eq!(t.invariants().unwrap().hor, 2);
        // Exact matches do merge.
        let t2 = FormalType::new(vec![reg(1, 3), reg(1, 3)]);
        assert_eq!(t2.blocks().len(), 1);
        assert_eq!(t2.blocks()[0].mult(), 2);
    }

    #[test]
    fn hom_of_regular_blocks() {
        let v = FormalType::new(vec![reg(1, 3)]);
        let w = FormalType::new(vec![reg(1, 2)]);
        let h = v.hom(&w).unwrap();
        assert_eq!(h.blocks().len(), 1);
        assert_eq!(h.blocks()[0].residue(), &Scalar::rational(1, 6));
        assert_eq!(h.rank(), 1);
    }

    #[test]
    fn airy_end() {
        // B = (ram 2, z^{-3/2}, 0): END decomposes as the two descended
        // regular lines plus one ramified block.
        let b = Block::new(phase(&[(-3, 2, 1)]), Scalar::zero(), 1, 1).unwrap();
        let t = FormalType::new(vec![b]);
        let e = t.end().unwrap();
        let inv = e.invariants().unwrap();
        assert_eq!((inv.rank, inv.irreg, inv.hor, inv.delta), (4, 3, 1, 6));
        let residues: Vec<_> = e
            .blocks()
            .iter()
            .filter(|b| b.ram() == 1)
            .map(|b| b.residue().clone())
            .collect();
        assert_eq!(residues, vec![Scalar::zero(), Scalar::rational(1, 2)]);
        let ramified: Vec<_> = e.blocks().iter().filter(|b| b.ram() == 2).collect();
        assert_eq!(ramified.len(), 1);
        assert_eq!(ramified[0].slope(), rat(3, 2));
    }

    #[test]
    fn kummer_type_ramified_end() {
        // (ram 2, z^{-1/2}, 0): END has rank 4, irreg 1, hor 1, delta 4.
        let b = Block::new(phase(&[(-1, 2, 1)]), Scalar::zero(), 1, 1).unwrap();
        let t = FormalType::new(vec![b]);
        let inv = t.end().unwrap().invariants().unwrap();
        assert_eq!((inv.rank, inv.irreg, inv.hor, inv.delta), (4, 1, 1, 4));
    }

    #[test]
    fn unipotent_hom_clebsch_gordan() {
        // HOM(J(0,2), J(0,2)) = J(0,3) + J(0,1): rank 4, hor 2, delta 2.
        let j2 = Block::regular(Scalar::zero(), 2, 1);
        let t = FormalType::new(vec![j2]);
        let e = t.end().unwrap();
        let us: Vec<u32> = e.blocks().iter().map(|b| b.unipotent()).collect();
        assert_eq!(us, vec![1, 3]);
        let inv = e.invariants().unwrap();
        assert_eq!((inv.rank, inv.irreg, inv.hor, inv.delta), (4, 0, 2, 2));
    }

    #[test]
    fn tensor_rank_one_shifts() {
        let t = FormalType::trivial(2);
        let line = Block::rank_one(PhasePart::zero(), Scalar::rational(1, 2)).unwrap();
        let tw = t.tensor_rank_one(&line).unwrap();
        assert_eq!(tw.blocks().len(), 1);
        assert_eq!(tw.blocks()[0].residue(), &Scalar::rational(1, 2));
        assert_eq!(tw.blocks()[0].mult(), 2);
        // Phase cancellation back to the trivial type.
        let b = Block::new(phase(&[(-1, 1, 1)]), Scalar::zero(), 1, 1).unwrap();
        let line2 = Block::rank_one(phase(&[(-1, 1, -1)]), Scalar::zero()).unwrap();
        let tw2 = FormalType::new(vec![b]).tensor_rank_one(&line2).unwrap();
        assert!(tw2.is_trivial());
        // A ram-2 block absorbs an unramified phase.
        let airy = Block::new(phase(&[(-3, 2, 1)]), Scalar::zero(), 1, 1).unwrap();
        let line3 = Block::rank_one(phase(&[(-2, 1, 1)]), Scalar::zero()).unwrap();
        let tw3 = FormalType::new(vec![airy]).tensor_rank_one(&line3).unwrap();
        assert_eq!(tw3.blocks()[0].ram(), 2);
        assert_eq!(tw3.blocks()[0].slope(), rat(2, 1));
    }

    #[test]
    fn min_delta_regular_multiplicities() {
        // Eigenvalue 0 with multiplicity 2 beats eigenvalue 1/2.
        let t = FormalType::new(vec![Block::regular(Scalar::zero(), 1, 2), reg(1, 2)]);
        let winners = t.min_delta_components().unwrap();
        assert_eq!(winners.len(), 1);
        assert_eq!(winners[0].residue(), &Scalar::zero());
        // Check the two delta values directly.
        let c0 = Component::new(PhasePart::zero(), Scalar::zero()).unwrap();
        let c1 = Component::new(PhasePart::zero(), Scalar::rational(1, 2)).unwrap();
        assert_eq!(c0.as_type().hom(&t).unwrap().delta().unwrap(), 1);
        assert_eq!(c1.as_type().hom(&t).unwrap().delta().unwrap(), 2);
    }

    #[test]
    fn min_delta_tie_set() {
        // Distinct multiplicity-one eigenvalues tie.
        let t = FormalType::new(vec![reg(1, 3), reg(2, 3)]);
        let winners = t.min_delta_components().unwrap();
        assert_eq!(winners.len(), 2);
        // A single ramified block is its own minimizer.
        let airy = Block::new(phase(&[(-3, 2, 1)]), Scalar::zero(), 1, 1).unwrap();
        let t2 = FormalType::new(vec![airy.clone()]);
        let winners = t2.min_delta_components().unwrap();
        assert_eq!(winners.len(), 1);
        assert_eq!(winners[0].as_block().phase(), airy.phase());
    }

    #[test]
    fn best_approx() {
        let c = Component::new(phase(&[(-3, 2, 1)]), Scalar::zero()).unwrap();
        assert!(best_rank_one_approx(&c).phase().is_zero());
        let c2 = Component::new(phase(&[(-2, 1, 1), (-3, 2, 1)]), Scalar::zero()).unwrap();
        let line = best_rank_one_approx(&c2);
        assert_eq!(line.phase(), &phase(&[(-2, 1, 1)]));
        // The leftover difference has fractional slope 3/2.
        let diff = c2.phase().sub(line.phase());
        assert_eq!(diff.slope(), rat(3, 2));
        assert!(!diff.slope().is_integer());
        let c3 = Component::new(PhasePart::zero(), Scalar::rational(1, 3)).unwrap();
        let line3 = best_rank_one_approx(&c3);
        assert!(line3.phase().is_zero() && line3.residue().is_zero());
    }

    #[test]
    fn hom_identity_endomorphisms() {
        // hor(END(V)) >= number of blocks, equality iff multiplicity-free
        // and pairwise non-isomorphic.
        let v = FormalType::new(vec![reg(1, 5), reg(2, 5)]);
        let hor = v.end().unwrap().invariants().unwrap().hor;
        assert_eq!(hor, 2);
        let w = FormalType::new(vec![Block::regular(Scalar::rational(1, 5), 1, 2)]);
        let hor = w.end().unwrap().invariants().unwrap().hor;
        assert_eq!(hor, 4);
    }

    #[test]
    fn imprimitive_block_rejected() {
        // Declared ram 2 with an integer-exponent phase is reducible.
        let err = Block::with_declared_ram(
            2,
            phase(&[(-2, 1, 1)]),
            Scalar::zero(),
            1,
            1,
        );
        assert_eq!(err, Err(Error::ImprimitiveBlock));
    }
}
