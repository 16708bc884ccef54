//! Planted synthetic instances.
//!
//! Every label gets a latent direction. Each user owns a few label
//! combinations (one placement plus a small activity set); a combination's
//! prototype is the sum of its labels' directions. An instance is a
//! prototype plus its user's offset plus isotropic Gaussian noise.

use std::collections::BTreeSet;

use hhgnn_core::data::{InstanceTable, Label, LabeledInstance, Schema};
use hhgnn_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const PP_NAMES: [&str; 4] = ["InBag", "InHand", "InPocket", "OnTable"];
const ACT_NAMES: [&str; 13] = [
    "Bicycling",
    "Cooking",
    "Driving",
    "Eating",
    "Exercising",
    "LyingDown",
    "Running",
    "Shopping",
    "Sitting",
    "Sleeping",
    "Standing",
    "Talking",
    "Walking",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub num_pp: usize,
    pub num_act: usize,
    pub d_x: usize,
    pub num_instances: usize,
    pub noise_sigma: f64,
    pub combos_per_user: usize,
    /// Activities per combination are drawn uniformly from `1..=max_acts`.
    pub max_acts: usize,
    /// Standard deviation of the per-user offset.
    pub user_sigma: f64,
    /// Probability that a non-positive label is reported missing rather than negative.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_users: 10,
            num_pp: 4,
            num_act: 13,
            d_x: 32,
            num_instances: 2000,
            noise_sigma: 0.5,
            combos_per_user: 6,
            max_acts: 3,
            user_sigma: 0.5,
            missing_rate: 0.2,
            seed: 2024,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.num_users,
            self.num_pp,
            self.num_act,
            self.d_x,
            self.num_instances,
            self.combos_per_user,
            self.max_acts,
        ];
        if counts.contains(&0) {
            return Err(Error::InvalidConfig("synthetic counts must be positive".into()));
        }
        if self.max_acts > self.num_act {
            return Err(Error::InvalidConfig("synth.max_acts exceeds synth.num_act".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.user_sigma >= 0.0) {
            return Err(Error::InvalidConfig("synthetic sigmas must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::InvalidConfig("synth.missing_rate must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let name = |list: &[&str], n: usize, prefix: &str| -> Vec<String> {
            if n <= list.len() {
                list[..n].iter().map(|s| s.to_string()).collect()
            } else {
                (0..n).map(|i| format!("{prefix}{i:02}")).collect()
            }
        };
        Schema {
            features: (0..self.d_x).map(|i| format!("f{i:02}")).collect(),
            pp: name(&PP_NAMES, self.num_pp, "pp"),
            act: name(&ACT_NAMES, self.num_act, "act"),
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; d];
    }
    let n = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..d).map(|_| n.sample(rng)).collect()
}

/// Class indices (placement first) of one combination.
type Combo = Vec<usize>;

fn user_combos(spec: &SyntheticSpec, user: usize, rng: &mut ChaCha8Rng) -> Vec<Combo> {
    let mut combos = BTreeSet::new();
    for j in 0..spec.combos_per_user {
        // Rotating the first activity and placement keeps every label in use.
        let k = user * spec.combos_per_user + j;
        let pp = k % spec.num_pp;
        let mut acts = BTreeSet::from([k % spec.num_act]);
        let want = rng.random_range(1..=spec.max_acts);
        while acts.len() < want {
            acts.insert(rng.random_range(0..spec.num_act));
        }
        let mut combo = vec![pp];
        combo.extend(acts.iter().map(|a| spec.num_pp + a));
        combos.insert(combo);
    }
    combos.into_iter().collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<InstanceTable> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = spec.num_pp + spec.num_act;
    let latents: Vec<Vec<f64>> = (0..classes).map(|_| gaussian_vec(&mut rng, spec.d_x, 1.0)).collect();
    let offsets: Vec<Vec<f64>> = (0..spec.num_users)
        .map(|_| gaussian_vec(&mut rng, spec.d_x, spec.user_sigma))
        .collect();
    let combos: Vec<Vec<Combo>> = (0..spec.num_users)
        .map(|u| user_combos(spec, u, &mut rng))
        .collect();
    let prototypes: Vec<Vec<Vec<f64>>> = combos
        .iter()
        .zip(&offsets)
        .map(|(cs, off)| {
            cs.iter()
                .map(|c| {
                    let mut p = off.clone();
                    for &k in c {
                        p.iter_mut().zip(&latents[k]).for_each(|(a, b)| *a += b);
                    }
                    p
                })
                .collect()
        })
        .collect();

    let schema = spec.schema();
    let mut rows = Vec::with_capacity(spec.num_instances);
    for _ in 0..spec.num_instances {
        let user = rng.random_range(0..spec.num_users);
        let c = rng.random_range(0..combos[user].len());
        let noise = gaussian_vec(&mut rng, spec.d_x, spec.noise_sigma);
        let features = prototypes[user][c].iter().zip(&noise).map(|(p, e)| p + e).collect();
        let labels: Vec<Label> = (0..classes)
            .map(|k| {
                if combos[user][c].contains(&k) {
                    Label::Positive
                } else if rng.random::<f64>() < spec.missing_rate {
                    Label::Missing
                } else {
                    Label::Negative
                }
            })
            .collect();
        rows.push(LabeledInstance {
            user_id: format!("user{user:02}"),
            features,
            pp: labels[..spec.num_pp].to_vec(),
            act: labels[spec.num_pp..].to_vec(),
        });
    }
    InstanceTable::new(schema, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            num_users: 3,
            num_instances: 200,
            d_x: 8,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap().to_csv_bytes().unwrap();
        let b = generate(&small()).unwrap().to_csv_bytes().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_combo_instances_are_identical() {
        let spec = SyntheticSpec {
            noise_sigma: 0.0,
            ..small()
        };
        let t = generate(&spec).unwrap();
        for a in &t.rows {
            for b in &t.rows {
                if a.user_id == b.user_id && a.pp == b.pp && positives(a) == positives(b) {
                    assert_eq!(a.features, b.features);
                }
            }
        }
    }

    fn positives(r: &LabeledInstance) -> Vec<usize> {
        r.labels()
            .enumerate()
            .filter(|(_, l)| l.is_positive())
            .map(|(i, _)| i)
            .collect()
    }

    #[test]
    fn one_placement_and_every_label_used() {
        let t = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(t.len(), 2000);
        assert_eq!(t.schema.pp.len(), 4);
        assert_eq!(t.schema.act.len(), 13);
        for r in &t.rows {
            assert_eq!(r.pp.iter().filter(|l| l.is_positive()).count(), 1);
            let acts = r.act.iter().filter(|l| l.is_positive()).count();
            assert!((1..=3).contains(&acts));
        }
        for c in 0..t.schema.num_classes() {
            assert!(t.rows.iter().any(|r| r.label(c).is_positive()), "class {c} unused");
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(generate(&SyntheticSpec { num_act: 0, ..small() }).is_err());
        assert!(generate(&SyntheticSpec { noise_sigma: -1.0, ..small() }).is_err());
        assert!(generate(&SyntheticSpec { max_acts: 20, ..small() }).is_err());
    }
}
