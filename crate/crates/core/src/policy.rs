//! The ten intervention levers and their canonical unit-cube normalization.
//!
//! Coordinate order is fixed everywhere (designs, candidate files, model
//! inputs): PCR multiplier, antigen multiplier, vaccine threshold, booster
//! threshold, contact-tracing capacity, symptomatic testing odds ratio,
//! quarantine testing odds ratio, traced quarantine adherence, traced mask
//! duration, mask adherence. Normalized value 0 is the status quo for every
//! lever and 1 its maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_POLICIES: usize = 10;

/// Population size the absolute lever values (tracing capacity, test
/// supplies) are quoted for. Desk-scale runs rescale by `n_agents / FULL_SCALE_POPULATION`.
pub const FULL_SCALE_POPULATION: f64 = 2_400_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyCategory {
    Coverage,
    Behavior,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolicySpec {
    pub name: &'static str,
    pub description: &'static str,
    pub unit: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub range: &'static str,
    pub integer: bool,
    pub category: PolicyCategory,
}

impl PolicySpec {
    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v >= self.lower - 1e-9 && v <= self.upper + 1e-9
    }

    pub fn scale(&self, x: f64) -> f64 {
        let v = self.lower + x * (self.upper - self.lower);
        if self.integer {
            v.round()
        } else {
            v
        }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }
}

pub const POLICY_SPECS: [PolicySpec; N_POLICIES] = [
    PolicySpec {
        name: "pcr_mult",
        description: "PCR tests per day, multiplier from baseline",
        unit: "x",
        lower: 1.0,
        upper: 10.0,
        range: "1x - 10x",
        integer: false,
        category: PolicyCategory::Coverage,
    },
    PolicySpec {
        name: "antigen_mult",
        description: "Antigen tests per day, multiplier from baseline",
        unit: "x",
        lower: 1.0,
        upper: 10.0,
        range: "1x - 10x",
        integer: false,
        category: PolicyCategory::Coverage,
    },
    PolicySpec {
        name: "vaccine_threshold",
        description: "Minimum fraction of each age group (5 and older) vaccinated",
        unit: "fraction",
        lower: 0.0,
        upper: 0.75,
        range: "0 - 0.75",
        integer: false,
        category: PolicyCategory::Coverage,
    },
    PolicySpec {
        name: "booster_threshold",
        description: "Minimum fraction of each age group (5 and older) boosted",
        unit: "fraction",
        lower: 0.0,
        upper: 0.5,
        range: "0 - 0.5",
        integer: false,
        category: PolicyCategory::Coverage,
    },
    PolicySpec {
        name: "ct_capacity",
        description: "Contacts traced per day (quoted for 2.4M agents)",
        unit: "contacts/day",
        lower: 6000.0,
        upper: 60000.0,
        range: "6,000 - 60,000",
        integer: true,
        category: PolicyCategory::Coverage,
    },
    PolicySpec {
        name: "symptomatic_or",
        description: "Odds ratio to test symptomatic agents",
        unit: "OR",
        lower: 10.0,
        upper: 100.0,
        range: "10 - 100",
        integer: false,
        category: PolicyCategory::Behavior,
    },
    PolicySpec {
        name: "quarantine_test_or",
        description: "Odds ratio to test quarantined agents",
        unit: "OR",
        lower: 1.0,
        upper: 100.0,
        range: "1 - 100",
        integer: false,
        category: PolicyCategory::Behavior,
    },
    PolicySpec {
        name: "quarantine_adherence_ct",
        description: "Quarantine adherence when successfully contact traced",
        unit: "probability",
        lower: 0.7,
        upper: 1.0,
        range: "0.7 - 1.0",
        integer: false,
        category: PolicyCategory::Behavior,
    },
    PolicySpec {
        name: "mask_duration_ct",
        description: "Days a contact-traced agent wears a mask",
        unit: "days",
        lower: 0.0,
        upper: 14.0,
        range: "0 - 14",
        integer: true,
        category: PolicyCategory::Behavior,
    },
    PolicySpec {
        name: "mask_adherence",
        description: "Population-wide multiplier on mask efficacy",
        unit: "multiplier",
        lower: 0.0,
        upper: 0.2,
        range: "0 - 0.2",
        integer: false,
        category: PolicyCategory::Behavior,
    },
];

pub fn policy_index(name: &str) -> Option<usize> {
    POLICY_SPECS.iter().position(|s| s.name == name)
}

pub fn policy_labels() -> Vec<String> {
    POLICY_SPECS.iter().map(|s| s.name.to_string()).collect()
}

/// Intervention intensities in natural (Table-of-ranges) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyVector {
    pub pcr_mult: f64,
    pub antigen_mult: f64,
    pub vaccine_threshold: f64,
    pub booster_threshold: f64,
    pub ct_capacity: f64,
    pub symptomatic_or: f64,
    pub quarantine_test_or: f64,
    pub quarantine_adherence_ct: f64,
    pub mask_duration_ct: f64,
    pub mask_adherence: f64,
}

impl Default for PolicyVector {
    fn default() -> Self {
        Self::baseline()
    }
}

impl PolicyVector {
    pub fn baseline() -> Self {
        Self::from_array(POLICY_SPECS.map(|s| s.lower))
    }

    /// Policy `j` at its maximum, everything else at baseline.
    pub fn single_max(j: usize) -> Self {
        let mut x = [0.0; N_POLICIES];
        x[j] = 1.0;
        Self::from_normalized(&x)
    }

    pub fn to_array(&self) -> [f64; N_POLICIES] {
        [
            self.pcr_mult,
            self.antigen_mult,
            self.vaccine_threshold,
            self.booster_threshold,
            self.ct_capacity,
            self.symptomatic_or,
            self.quarantine_test_or,
            self.quarantine_adherence_ct,
            self.mask_duration_ct,
            self.mask_adherence,
        ]
    }

    pub fn from_array(a: [f64; N_POLICIES]) -> Self {
        Self {
            pcr_mult: a[0],
            antigen_mult: a[1],
            vaccine_threshold: a[2],
            booster_threshold: a[3],
            ct_capacity: a[4],
            symptomatic_or: a[5],
            quarantine_test_or: a[6],
            quarantine_adherence_ct: a[7],
            mask_duration_ct: a[8],
            mask_adherence: a[9],
        }
    }

    /// Affine map from the unit cube; integer-valued levers are rounded.
    /// Coordinates are clamped to [0, 1].
    pub fn from_normalized(x: &[f64]) -> Self {
        assert_eq!(x.len(), N_POLICIES, "policy point must have 10 coordinates");
        let mut a = [0.0; N_POLICIES];
        for j in 0..N_POLICIES {
            a[j] = POLICY_SPECS[j].scale(x[j].clamp(0.0, 1.0));
        }
        Self::from_array(a)
    }

    pub fn normalize(&self) -> [f64; N_POLICIES] {
        let a = self.to_array();
        let mut x = [0.0; N_POLICIES];
        for j in 0..N_POLICIES {
            x[j] = POLICY_SPECS[j].normalize(a[j]);
        }
        x
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        policy_index(name).map(|j| self.to_array()[j])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let j = policy_index(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{name}`")))?;
        let mut a = self.to_array();
        a[j] = value;
        *self = Self::from_array(a);
        Ok(())
    }

    /// Rejects the first lever found outside its range.
    pub fn validate(&self) -> Result<()> {
        for (v, s) in self.to_array().iter().zip(POLICY_SPECS.iter()) {
            if !s.contains(*v) {
                return Err(Error::PolicyOutOfRange {
                    field: s.name,
                    value: *v,
                    range: s.range,
                });
            }
        }
        Ok(())
    }
}

pub fn is_unit_point(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}
