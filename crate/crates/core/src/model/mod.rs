//! Instances, schedules, job classes and rounded sizes.

mod format;
mod instance;
mod schedule;

pub use format::{parse_instance, serialize_instance, ParseError, ParseErrorKind};
pub use instance::{Instance, Job, ModelError, ScaledInstance};
pub use schedule::{validate_partial_schedule, LoadKind, Schedule, ScheduleViolation};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Position of a job in the size-sorted order (0-based). Displayed and
/// serialized 1-based, which is also the job number used wherever the job
/// order matters (`min M_i`, tie-breaks, signature values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub usize);

impl JobId {
    pub fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.number())
    }
}

/// Machine index (0-based). Displayed and serialized 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MachineId(pub usize);

impl MachineId {
    pub fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for MachineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.number())
    }
}

macro_rules! one_based_serde {
    ($t:ident) => {
        impl Serialize for $t {
            fn serialize<Ser: serde::Serializer>(&self, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
                ser.serialize_u64(self.number() as u64)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let n = usize::deserialize(de)?;
                n.checked_sub(1)
                    .map($t)
                    .ok_or_else(|| serde::de::Error::custom("ids are numbered from 1"))
            }
        }
    };
}

one_based_serde!(JobId);
one_based_serde!(MachineId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobClass {
    Small,
    Medium,
    Huge,
}

impl JobClass {
    pub fn is_big(self) -> bool {
        !matches!(self, JobClass::Small)
    }
}

/// Class of a job from its scaled size: small `<= 1/2`, medium `<= 5/6`,
/// huge above that.
pub fn classify_job<S: Scalar>(p: &S) -> JobClass {
    if *p <= S::from_frac(1, 2) {
        JobClass::Small
    } else if *p <= S::from_frac(5, 6) {
        JobClass::Medium
    } else {
        JobClass::Huge
    }
}

/// `(p_up, p_down)`: huge sizes rounded up to 1 and down to 5/6, other sizes
/// unchanged.
pub fn rounded_sizes<S: Scalar>(p: &S) -> (S, S) {
    if *p > S::from_frac(5, 6) {
        (S::one(), S::from_frac(5, 6))
    } else {
        (p.clone(), p.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_frac(n, d)
    }

    #[test]
    fn class_boundaries() {
        assert_eq!(classify_job(&q(1, 2)), JobClass::Small);
        assert_eq!(classify_job(&q(5, 6)), JobClass::Medium);
        assert_eq!(classify_job(&q(9, 10)), JobClass::Huge);
        assert_eq!(classify_job(&q(51, 100)), JobClass::Medium);
    }

    #[test]
    fn rounding() {
        assert_eq!(rounded_sizes(&q(9, 10)), (q(1, 1), q(5, 6)));
        assert_eq!(rounded_sizes(&q(1, 3)), (q(1, 3), q(1, 3)));
        assert_eq!(rounded_sizes(&q(5, 6)), (q(5, 6), q(5, 6)));
    }

    proptest! {
        #[test]
        fn rounding_differs_exactly_for_huge(n in 1i64..400, d in 1i64..200) {
            let p = q(n, d);
            let (up, down) = rounded_sizes(&p);
            prop_assert_eq!(up != down, classify_job(&p) == JobClass::Huge);
            prop_assert!(down <= p);
        }
    }
}
