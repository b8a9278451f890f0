//! Column mapping and region-alias configuration, both loaded from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Maps logical record fields to CSV column names and carries parse options.
///
/// The defaults are the canonical column names that this crate itself writes,
/// so normalized output re-parses without any configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub firm_id: String,
    pub region: String,
    pub nic: String,
    pub incorporation_date: String,
    pub status: String,
    pub paid_up_capital: String,
    /// Status strings (case-insensitive) that count as Active.
    pub active_status_values: Vec<String>,
    /// Date formats tried in order (chrono syntax).
    pub date_formats: Vec<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            firm_id: "firm_id".into(),
            region: "region".into(),
            nic: "nic_full".into(),
            incorporation_date: "incorporation_date".into(),
            status: "status".into(),
            paid_up_capital: "paid_up_capital".into(),
            active_status_values: vec!["ACTV".into(), "ACTIVE".into()],
            date_formats: vec![
                "%Y-%m-%d".into(),
                "%d-%m-%Y".into(),
                "%d/%m/%Y".into(),
                "%d-%b-%Y".into(),
            ],
        }
    }
}

impl Schema {
    /// The mapping used for files written by [`crate::export::write_records_csv`].
    pub fn canonical() -> Self {
        Schema::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema =
            toml::from_str(text).map_err(|e| Error::Config(format!("schema file: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("firm_id", &self.firm_id),
            ("region", &self.region),
            ("nic", &self.nic),
            ("incorporation_date", &self.incorporation_date),
            ("status", &self.status),
            ("paid_up_capital", &self.paid_up_capital),
        ] {
            if value.trim().is_empty() {
                return Err(Error::Config(format!("schema maps `{name}` to an empty column name")));
            }
        }
        if self.date_formats.is_empty() {
            return Err(Error::Config("schema has no date formats".into()));
        }
        Ok(())
    }

    pub fn is_active_status(&self, raw: &str) -> bool {
        let folded = raw.trim().to_lowercase();
        self.active_status_values
            .iter()
            .any(|v| v.to_lowercase() == folded)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AliasFile {
    canonical: Vec<String>,
    aliases: BTreeMap<String, String>,
}

/// Canonical region names plus alias lookups.
///
/// Keys are matched after trimming, collapsing inner whitespace and case
/// folding. When a table is in use, a region label that resolves to nothing
/// is a reject, never a silent drop.
#[derive(Debug, Clone, Default)]
pub struct RegionAliases {
    map: BTreeMap<String, String>,
}

/// Trim, collapse runs of whitespace to single spaces.
pub(crate) fn normalize_label(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fold_key(raw: &str) -> String {
    normalize_label(raw).to_lowercase()
}

impl RegionAliases {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: AliasFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("alias file: {e}")))?;
        let mut map = BTreeMap::new();
        for canonical in &file.canonical {
            map.insert(fold_key(canonical), normalize_label(canonical));
        }
        for (alias, canonical) in &file.aliases {
            map.insert(fold_key(alias), normalize_label(canonical));
        }
        if map.is_empty() {
            return Err(Error::Config("alias file defines no regions".into()));
        }
        Ok(RegionAliases { map })
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Resolve a raw region label to its canonical spelling.
    pub fn resolve(&self, raw: &str) -> Option<&str> {
        self.map.get(&fold_key(raw)).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_round_trips_through_toml() {
        let schema = Schema::from_toml_str("firm_id = \"CIN\"\nstatus = \"COMPANY_STATUS\"\n").unwrap();
        assert_eq!(schema.firm_id, "CIN");
        assert_eq!(schema.status, "COMPANY_STATUS");
        // unspecified fields keep their defaults
        assert_eq!(schema.region, "region");
    }

    #[test]
    fn unknown_schema_key_is_a_config_error() {
        let err = Schema::from_toml_str("frim_id = \"CIN\"\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn empty_column_name_is_rejected() {
        let err = Schema::from_toml_str("region = \"  \"\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn alias_resolution_folds_case_and_whitespace() {
        let aliases = RegionAliases::from_toml_str(
            "canonical = [\"Maharashtra\", \"Tamil Nadu\"]\n[aliases]\n\"maharastra\" = \"Maharashtra\"\n",
        )
        .unwrap();
        assert_eq!(aliases.resolve("  MAHARASHTRA "), Some("Maharashtra"));
        assert_eq!(aliases.resolve("Maharastra"), Some("Maharashtra"));
        assert_eq!(aliases.resolve("tamil   nadu"), Some("Tamil Nadu"));
        assert_eq!(aliases.resolve("Kerala"), None);
    }

    #[test]
    fn active_status_matching_is_case_insensitive() {
        let schema = Schema::default();
        assert!(schema.is_active_status("ACTV"));
        assert!(schema.is_active_status("active "));
        assert!(!schema.is_active_status("STOF"));
    }
}
