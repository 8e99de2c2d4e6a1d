use std::fmt;
use std::str::FromStr;

use foodprompt::Arm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How new sessions are assigned to a prompting arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmPolicy {
    Fixed(Arm),
    /// handcoded, generated, handcoded, ...
    Alternate,
    /// Fair coin from the seeded generator.
    Random,
}

impl FromStr for ArmPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alternate" => Ok(ArmPolicy::Alternate),
            "random" => Ok(ArmPolicy::Random),
            other => match other.strip_prefix("fixed:") {
                Some(arm) => arm.parse().map(ArmPolicy::Fixed),
                None => Err(format!(
                    "unknown arm policy '{other}' (expected alternate, random, fixed:handcoded or fixed:generated)"
                )),
            },
        }
    }
}

impl fmt::Display for ArmPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArmPolicy::Fixed(arm) => write!(f, "fixed:{arm}"),
            ArmPolicy::Alternate => f.write_str("alternate"),
            ArmPolicy::Random => f.write_str("random"),
        }
    }
}

#[derive(Debug)]
pub struct ArmAssigner {
    policy: ArmPolicy,
    issued: u64,
    rng: ChaCha8Rng,
}

impl ArmAssigner {
    pub fn new(policy: ArmPolicy, seed: u64) -> Self {
        ArmAssigner {
            policy,
            issued: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_arm(&mut self) -> Arm {
        let arm = match self.policy {
            ArmPolicy::Fixed(arm) => arm,
            ArmPolicy::Alternate if self.issued.is_multiple_of(2) => Arm::Handcoded,
            ArmPolicy::Alternate => Arm::Generated,
            ArmPolicy::Random if self.rng.random_bool(0.5) => Arm::Generated,
            ArmPolicy::Random => Arm::Handcoded,
        };
        self.issued += 1;
        arm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternate_starts_with_handcoded() {
        let mut a = ArmAssigner::new(ArmPolicy::Alternate, 0);
        let arms: Vec<Arm> = (0..3).map(|_| a.next_arm()).collect();
        assert_eq!(arms, vec![Arm::Handcoded, Arm::Generated, Arm::Handcoded]);
    }

    #[test]
    fn fixed_policy_parses_and_repeats() {
        let policy: ArmPolicy = "fixed:generated".parse().unwrap();
        let mut a = ArmAssigner::new(policy, 0);
        assert!((0..5).all(|_| a.next_arm() == Arm::Generated));
        assert!("fixed:other".parse::<ArmPolicy>().is_err());
        assert_eq!(policy.to_string(), "fixed:generated");
    }

    #[test]
    fn random_policy_is_reproducible_from_seed() {
        let draw = |seed| {
            let mut a = ArmAssigner::new(ArmPolicy::Random, seed);
            (0..32).map(|_| a.next_arm()).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        let arms = draw(9);
        assert!(arms.contains(&Arm::Handcoded) && arms.contains(&Arm::Generated));
    }
}
