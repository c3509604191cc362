use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    #[default]
    Feature,
    Label,
    Ignore,
}

/// How a feature column is encoded.
///
/// `Indicator` marks a column that is already a 0/1 encoding (the output of
/// one-hot expansion). It is imputed with the mode and otherwise passed
/// through, which makes preprocessing idempotent on its own output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    #[default]
    Continuous,
    Categorical,
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(default)]
    pub role: ColumnRole,
    #[serde(default)]
    pub kind: ColumnKind,
}

/// Column roles and kinds for a CSV file.
///
/// Serialized as TOML:
///
/// ```toml
/// [[column]]
/// name = "age"
/// role = "feature"      # feature | label | ignore (default feature)
/// kind = "continuous"   # continuous | categorical | indicator (default continuous)
///
/// [[column]]
/// name = "outcome"
/// role = "label"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSpec>,
}

impl ColumnSchema {
    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.role == ColumnRole::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column '{}'", c.name)));
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.role == ColumnRole::Label)
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Copy of this schema with `name` as the label and the previous label ignored.
    pub fn with_label(&self, name: &str) -> Result<ColumnSchema> {
        if self.get(name).is_none() {
            return Err(Error::Schema(format!("no column named '{name}'")));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let role = if c.name == name {
                    ColumnRole::Label
                } else if c.role == ColumnRole::Label {
                    ColumnRole::Ignore
                } else {
                    c.role
                };
                ColumnSpec { role, ..c.clone() }
            })
            .collect();
        Ok(ColumnSchema { columns })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: ColumnSchema =
            toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            [[column]]
            name = "age"

            [[column]]
            name = "color"
            kind = "categorical"

            [[column]]
            name = "y"
            role = "label"
        "#;
        let schema = ColumnSchema::from_toml_str(text).unwrap();
        assert_eq!(schema.columns[0].kind, ColumnKind::Continuous);
        assert_eq!(schema.columns[0].role, ColumnRole::Feature);
        assert_eq!(schema.label_column().unwrap().name, "y");
        let again = ColumnSchema::from_toml_str(&schema.to_toml_string()).unwrap();
        assert_eq!(again, schema);
    }

    #[test]
    fn requires_exactly_one_label() {
        let none = "[[column]]\nname = \"a\"\n";
        assert!(ColumnSchema::from_toml_str(none).is_err());
        let two = "[[column]]\nname = \"a\"\nrole = \"label\"\n[[column]]\nname = \"b\"\nrole = \"label\"\n";
        assert!(ColumnSchema::from_toml_str(two).is_err());
    }

    #[test]
    fn with_label_swaps_target() {
        let text = "[[column]]\nname = \"a\"\nkind = \"categorical\"\n[[column]]\nname = \"b\"\nrole = \"label\"\n";
        let s = ColumnSchema::from_toml_str(text)
            .unwrap()
            .with_label("a")
            .unwrap();
        assert_eq!(s.label_column().unwrap().name, "a");
        assert_eq!(s.get("b").unwrap().role, ColumnRole::Ignore);
    }
}
