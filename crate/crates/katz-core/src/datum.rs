//! Global formal type data on the projective line: validity, Euler
//! characteristic, rigidity index, moduli dimension, and twist existence.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num::Zero;

use crate::batch;
use crate::disk::{Block, Component, FormalType};
use crate::error::{Error, Result};
use crate::scalar::{rat, rat_from_str, rat_to_string, Rat, ResidueClass, Scalar};

/// A point of the projective line: a rational coordinate in the fixed
/// affine chart, or infinity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum PointP1 {
    Finite(Rat),
    Infinity,
}

impl PointP1 {
    pub fn zero() -> PointP1 {
        PointP1::Finite(Rat::zero())
    }

    pub fn from_int(n: i64) -> PointP1 {
        PointP1::Finite(rat(n, 1))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, PointP1::Infinity)
    }

    pub fn parse(s: &str) -> Result<PointP1> {
        if s == "inf" {
            Ok(PointP1::Infinity)
        } else {
            Ok(PointP1::Finite(rat_from_str(s)?))
        }
    }
}

impl PartialOrd for PointP1 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PointP1 {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (PointP1::Finite(a), PointP1::Finite(b)) => a.cmp(b),
            (PointP1::Finite(_), PointP1::Infinity) => Ordering::Less,
            (PointP1::Infinity, PointP1::Finite(_)) => Ordering::Greater,
            (PointP1::Infinity, PointP1::Infinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for PointP1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointP1::Finite(q) => write!(f, "{}", rat_to_string(q)),
            PointP1::Infinity => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for PointP1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A constraint violation found by [`FormalTypeDatum::validate`];
/// violations are data, not faults.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ConstantRank { point: PointP1, found: i64, expected: u32 },
    TrivialEntry { point: PointP1 },
    DeterminantNonIntegral { total: ResidueClass },
    CorruptBlock { point: PointP1, message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ConstantRank { point, found, expected } => write!(
                f,
                "constant-rank violated at {point}: type has rank {found}, datum has rank {expected}"
            ),
            Violation::TrivialEntry { point } => {
                write!(f, "listed entry at {point} is trivial; canonical data omit it")
            }
            Violation::DeterminantNonIntegral { total } => {
                write!(f, "determinant residue sum {total} is not an integer")
            }
            Violation::CorruptBlock { point, message } => {
                write!(f, "corrupt block at {point}: {message}")
            }
        }
    }
}

/// Classification of a datum by its rigidity index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RigClass {
    /// rig = 2: rigid candidate.
    RigidCandidate,
    /// rig = 0: two-dimensional moduli.
    RigidityZero,
    /// rig > 2: unrealizable.
    Overdetermined,
    /// any other value.
    Underdetermined,
}

pub fn rig_class(rig: i64) -> RigClass {
    match rig {
        2 => RigClass::RigidCandidate,
        0 => RigClass::RigidityZero,
        r if r > 2 => RigClass::Overdetermined,
        _ => RigClass::Underdetermined,
    }
}

/// A map from points of the projective line to formal types of constant
/// rank; unlisted points are implicitly trivial.
#[derive(Clone, PartialEq, Eq)]
pub struct FormalTypeDatum {
    rank: u32,
    entries: BTreeMap<PointP1, FormalType>,
}

impl FormalTypeDatum {
    pub fn new(rank: u32, entries: BTreeMap<PointP1, FormalType>) -> FormalTypeDatum {
        FormalTypeDatum { rank, entries }
    }

    /// The canonical form: trivial entries dropped.
    pub fn normalized(&self) -> FormalTypeDatum {
        let entries = self
            .entries
            .iter()
            .filter(|(_, t)| !t.is_trivial())
            .map(|(p, t)| (p.clone(), t.clone()))
            .collect();
        FormalTypeDatum { rank: self.rank, entries }
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn entries(&self) -> &BTreeMap<PointP1, FormalType> {
        &self.entries
    }

    /// The formal type at a point; trivial when unlisted.
    pub fn entry(&self, p: &PointP1) -> FormalType {
        self.entries
            .get(p)
            .cloned()
            .unwrap_or_else(|| FormalType::trivial(self.rank))
    }

    pub fn points(&self) -> impl Iterator<Item = &PointP1> {
        self.entries.keys()
    }

    pub fn is_rank_one_trivial(&self) -> bool {
        self.rank == 1 && self.normalized().entries.is_empty()
    }

    /// Check the three datum invariants, reporting every violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (p, t) in &self.entries {
            if t.rank() != self.rank as i64 {
                violations.push(Violation::ConstantRank {
                    point: p.clone(),
                    found: t.rank(),
                    expected: self.rank,
                });
            }
            if t.is_trivial() {
                violations.push(Violation::TrivialEntry { point: p.clone() });
            }
            if let Err(e) = t.invariants() {
                violations.push(Violation::CorruptBlock { point: p.clone(), message: e.to_string() });
            }
        }
        let total = self.determinant_residue_sum();
        if !total.is_integer() {
            violations.push(Violation::DeterminantNonIntegral { total: ResidueClass::new(&total) });
        }
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn require_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidDatum(msgs.join("; ")))
        }
    }

    /// Sum of determinant residues over all listed points.
    pub fn determinant_residue_sum(&self) -> Scalar {
        let mut total = Scalar::zero();
        for t in self.entries.values() {
            for b in t.blocks() {
                total = total.add(&block_detres(b));
            }
        }
        total
    }

    /// Euler characteristic `2 rank - sum of deltas`.
    pub fn euler_char(&self) -> Result<i64> {
        let deltas = batch::try_map(&self.entry_vec(), |(_, t)| t.delta())?;
        Ok(2 * self.rank as i64 - deltas.iter().sum::<i64>())
    }

    /// Rigidity index `2 rank^2 - sum of delta(END)`.
    pub fn rigidity_index(&self) -> Result<i64> {
        let deltas = batch::try_map(&self.entry_vec(), |(_, t)| t.end()?.delta())?;
        Ok(2 * (self.rank as i64) * (self.rank as i64) - deltas.iter().sum::<i64>())
    }

    pub fn rig_class(&self) -> Result<RigClass> {
        Ok(rig_class(self.rigidity_index()?))
    }

    /// Dimension of the moduli space of solutions, `2 - rig`.
    pub fn moduli_dimension(&self) -> Result<i64> {
        let rig = self.rigidity_index()?;
        if rig > 2 {
            return Err(Error::RigTooLarge(rig));
        }
        Ok(2 - rig)
    }

    /// The class of the residue sum of chosen rank-one components mod Z;
    /// zero exactly when a global rank-one twist with those local types
    /// exists.
    pub fn twist_residue_gap(
        &self,
        choices: &BTreeMap<PointP1, Component>,
    ) -> Result<ResidueClass> {
        let mut sum = Scalar::zero();
        for c in choices.values() {
            if c.ram() != 1 {
                return Err(Error::RamifiedChoice);
            }
            sum = sum.add(c.residue());
        }
        Ok(ResidueClass::new(&sum))
    }

    fn entry_vec(&self) -> Vec<(PointP1, FormalType)> {
        self.entries.iter().map(|(p, t)| (p.clone(), t.clone())).collect()
    }
}

/// Determinant residue of a block:
/// `m u (ram lambda) + m u (ram - 1)/2`, the second summand being the
/// discriminant shift of the determinant of an induced module.
pub fn block_detres(b: &Block) -> Scalar {
    let weight = rat((b.mult() as i64) * (b.unipotent() as i64), 1);
    let shift = rat(b.ram() as i64 - 1, 2);
    let res_part = b.residue().scale(&(weight.clone() * rat(b.ram() as i64, 1)));
    res_part.add(&Scalar::from_rat(weight * shift))
}

impl fmt::Display for FormalTypeDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rank {} datum:", self.rank)?;
        for (p, t) in &self.entries {
            writeln!(f, "  {p}: {t}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for FormalTypeDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puiseux::PhasePart;

    fn reg_type(residues: &[(i64, i64)]) -> FormalType {
        FormalType::new(
            residues
                .iter()
                .map(|&(n, d)| Block::regular(Scalar::rational(n, d), 1, 1))
                .collect(),
        )
    }

    fn datum(rank: u32, entries: Vec<(PointP1, FormalType)>) -> FormalTypeDatum {
        FormalTypeDatum::new(rank, entries.into_iter().collect())
    }

    #[test]
    fn validation() {
        // Rank-1 datum with residues 1/3, 2/3, 0: determinant sum 1.
        let d = datum(
            1,
            vec![
                (PointP1::zero(), reg_type(&[(1, 3)])),
                (PointP1::from_int(1), reg_type(&[(2, 3)])),
            ],
        );
        assert!(d.is_valid());
        // Residues 1/3, 1/3: sum 2/3 not integral.
        let bad = datum(
            1,
            vec![
                (PointP1::zero(), reg_type(&[(1, 3)])),
                (PointP1::from_int(1), reg_type(&[(1, 3)])),
            ],
        );
        let v = bad.validate();
        assert!(matches!(v.as_slice(), [Violation::DeterminantNonIntegral { .. }]));
        // Mixed ranks.
        let mixed = datum(
            2,
            vec![
                (PointP1::zero(), reg_type(&[(1, 2), (1, 3)])),
                (PointP1::from_int(1), reg_type(&[(1, 6)])),
            ],
        );
        assert!(mixed
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::ConstantRank { .. })));
    }

    #[test]
    fn euler_characteristic() {
        let trivial = datum(1, vec![]);
        assert_eq!(trivial.euler_char().unwrap(), 2);
        let two_halves = datum(
            1,
            vec![
                (PointP1::zero(), reg_type(&[(1, 2)])),
                (PointP1::Infinity, reg_type(&[(1, 2)])),
            ],
        );
        assert!(two_halves.is_valid());
        assert_eq!(two_halves.euler_char().unwrap(), 0);
        let irregular = datum(
            1,
            vec![(
                PointP1::zero(),
                FormalType::new(vec![Block::new(
                    PhasePart::from_terms([(rat(-1, 1), Scalar::one())]).unwrap(),
                    Scalar::zero(),
                    1,
                    1,
                )
                .unwrap()]),
            )],
        );
        assert_eq!(irregular.euler_char().unwrap(), 0);
    }

    #[test]
    fn rigidity_rank_one_always_two() {
        let d = datum(
            1,
            vec![
                (PointP1::zero(), reg_type(&[(1, 3)])),
                (PointP1::from_int(1), reg_type(&[(2, 3)])),
            ],
        );
        assert_eq!(d.rigidity_index().unwrap(), 2);
        assert_eq!(d.rig_class().unwrap(), RigClass::RigidCandidate);
        assert_eq!(d.moduli_dimension().unwrap(), 0);
    }

    #[test]
    fn rigidity_hypergeometric() {
        // Three regular points with eigenvalue pairs distinct mod Z:
        // delta(END) = 2 per point, rig = 8 - 6 = 2.
        let d = datum(
            2,
            vec![
                (PointP1::zero(), reg_type(&[(0, 1), (1, 4)])),
                (PointP1::from_int(1), reg_type(&[(0, 1), (1, 3)])),
                (PointP1::Infinity, reg_type(&[(1, 2), (11, 12)])),
            ],
        );
        assert!(d.is_valid(), "{:?}", d.validate());
        assert_eq!(d.rigidity_index().unwrap(), 2);
    }

    #[test]
    fn rigidity_kloosterman() {
        // J(0,2) at 0 and the ramified slope-1/2 block at infinity.
        let kl = datum(
            2,
            vec![
                (PointP1::zero(), FormalType::new(vec![Block::regular(Scalar::zero(), 2, 1)])),
                (
                    PointP1::Infinity,
                    FormalType::new(vec![Block::new(
                        PhasePart::from_terms([(rat(-1, 2), Scalar::one())]).unwrap(),
                        Scalar::rational(1, 4),
                        1,
                        1,
                    )
                    .unwrap()]),
                ),
            ],
        );
        assert!(kl.is_valid(), "{:?}", kl.validate());
        let end0 = kl.entry(&PointP1::zero()).end().unwrap().delta().unwrap();
        let endi = kl.entry(&PointP1::Infinity).end().unwrap().delta().unwrap();
        assert_eq!((end0, endi), (2, 4));
        assert_eq!(kl.rigidity_index().unwrap(), 2);
    }

    #[test]
    fn moduli_dimension_bounds() {
        // rig = 4: scalar local type at one point.
        let rig4 = datum(
            2,
            vec![
                (PointP1::zero(), FormalType::new(vec![Block::regular(Scalar::rational(1, 2), 1, 2)])),
                (PointP1::from_int(1), reg_type(&[(1, 3), (2, 3)])),
                (PointP1::Infinity, reg_type(&[(1, 5), (4, 5)])),
            ],
        );
        assert!(rig4.is_valid());
        assert_eq!(rig4.rigidity_index().unwrap(), 4);
        assert_eq!(rig4.moduli_dimension(), Err(Error::RigTooLarge(4)));
        // rig = 0: four regular points (a Painleve VI shape).
        let rig0 = datum(
            2,
            vec![
                (PointP1::zero(), reg_type(&[(0, 1), (1, 2)])),
                (PointP1::from_int(1), reg_type(&[(0, 1), (1, 2)])),
                (PointP1::from_int(2), reg_type(&[(0, 1), (1, 2)])),
                (PointP1::Infinity, reg_type(&[(0, 1), (1, 2)])),
            ],
        );
        assert!(rig0.is_valid());
        assert_eq!(rig0.rigidity_index().unwrap(), 0);
        assert_eq!(rig0.moduli_dimension().unwrap(), 2);
    }

    #[test]
    fn twist_gap() {
        let d = datum(1, vec![]);
        let comp = |n: i64, den: i64| {
            Component::new(PhasePart::zero(), Scalar::rational(n, den)).unwrap()
        };
        let choices: BTreeMap<PointP1, Component> = [
            (PointP1::zero(), comp(1, 3)),
            (PointP1::from_int(1), comp(2, 3)),
            (PointP1::Infinity, comp(0, 1)),
        ]
        .into_iter()
        .collect();
        assert!(d.twist_residue_gap(&choices).unwrap().is_zero());
        let choices2: BTreeMap<PointP1, Component> = [
            (PointP1::zero(), comp(1, 3)),
            (PointP1::from_int(1), comp(1, 3)),
        ]
        .into_iter()
        .collect();
        let gap = d.twist_residue_gap(&choices2).unwrap();
        assert_eq!(gap.representative(), &Scalar::rational(2, 3));
        // Ramified choices are rejected.
        let ram = Component::new(
            PhasePart::from_terms([(rat(-1, 2), Scalar::one())]).unwrap(),
            Scalar::zero(),
        )
        .unwrap();
        let choices3: BTreeMap<PointP1, Component> =
            [(PointP1::zero(), ram)].into_iter().collect();
        assert_eq!(d.twist_residue_gap(&choices3), Err(Error::RamifiedChoice));
    }

    #[test]
    fn detres_additivity() {
        // detres(V (x) line) = detres(V) + rank * res(line).
        let v = FormalType::new(vec![
            Block::new(
                PhasePart::from_terms([(rat(-3, 2), Scalar::one())]).unwrap(),
                Scalar::rational(1, 4),
                1,
                1,
            )
            .unwrap(),
            Block::regular(Scalar::rational(1, 3), 2, 1),
        ]);
        let line = Block::rank_one(PhasePart::zero(), Scalar::rational(2, 7)).unwrap();
        let twisted = v.tensor_rank_one(&line).unwrap();
        let before: Scalar = v.blocks().iter().map(block_detres).fold(Scalar::zero(), |a, b| a.add(&b));
        let after: Scalar = twisted
            .blocks()
            .iter()
            .map(block_detres)
            .fold(Scalar::zero(), |a, b| a.add(&b));
        let expected = before.add(&Scalar::rational(2, 7).scale(&rat(v.rank(), 1)));
        assert_eq!(after, expected);
    }
}
