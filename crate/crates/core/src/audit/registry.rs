//! The known-issues registry: one line per audited form,
//! `name, class, counterexample, date`.

use std::fmt;

use crate::catalog::{all_default_forms, make_structured, StructuredKind};
use crate::error::ScnError;
use crate::form::ScnForm;

use super::{audit_samples, identity_audit, GridSpec, IdentityClass, IdentityReport};

/// The registry shipped with the crate.
pub const KNOWN_ISSUES: &str = include_str!("../../data/known_issues.txt");

/// Sampling and grid budget of a registry audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub samples: usize,
    pub seed: u64,
    /// Grid points per x; the resolution is the largest that fits.
    pub budget: usize,
    pub max_resolution: usize,
    pub tol: f64,
}

/// The configuration the shipped registry was produced with.
pub const REGISTRY_AUDIT: AuditConfig = AuditConfig {
    samples: 4,
    seed: 2026,
    budget: 200_000,
    max_resolution: 2001,
    tol: 1e-2,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub name: String,
    pub class: IdentityClass,
    pub counterexample: String,
    pub date: String,
}

impl fmt::Display for RegistryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}",
            self.name,
            self.class.as_str(),
            self.counterexample,
            self.date
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Registry {
    pub entries: Vec<RegistryEntry>,
}

impl Registry {
    /// Parses registry text. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Registry, ScnError> {
        let mut entries = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |why: &str| ScnError::ProblemFile(format!("registry line {}: {why}", no + 1));
            let [name, class, counterexample, date] = fields[..] else {
                return Err(bad("expected 4 comma-separated fields"));
            };
            let class = IdentityClass::parse(class).ok_or_else(|| bad("unknown class"))?;
            entries.push(RegistryEntry {
                name: name.into(),
                class,
                counterexample: counterexample.into(),
                date: date.into(),
            });
        }
        Ok(Registry { entries })
    }

    pub fn shipped() -> Registry {
        Registry::parse(KNOWN_ISSUES).expect("shipped registry parses")
    }

    pub fn get(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn from_reports(reports: &[IdentityReport], date: &str) -> Registry {
        Registry {
            entries: reports
                .iter()
                .map(|r| RegistryEntry {
                    name: r.form.clone(),
                    class: r.class,
                    counterexample: r.counterexample_text(),
                    date: date.into(),
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# name, class, counterexample, date\n");
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

/// Every catalog entry at default parameters and every structured example.
pub fn registry_forms() -> Result<Vec<ScnForm>, ScnError> {
    let mut forms = all_default_forms()?;
    for kind in StructuredKind::ALL {
        forms.push(make_structured(kind, &kind.example_data())?);
    }
    Ok(forms)
}

pub fn audit_form(form: &ScnForm, config: &AuditConfig) -> Result<IdentityReport, ScnError> {
    let p = form.partition();
    let xs = audit_samples(form, config.samples, config.seed);
    let grid = GridSpec::budgeted(p.m1 + p.m2, config.budget, config.max_resolution);
    identity_audit(form, &xs, &grid, config.tol)
}

pub fn audit_all(config: &AuditConfig) -> Result<Vec<IdentityReport>, ScnError> {
    registry_forms()?
        .iter()
        .map(|f| audit_form(f, config))
        .collect()
}
