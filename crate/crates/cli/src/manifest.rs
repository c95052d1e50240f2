//! Run manifests: everything needed to reproduce the outputs of one command.
//! Manifests carry no timestamps or host data, so a re-run writes the same
//! bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use phimin_core::weight::WeightConfig;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// arguments after the program name, verbatim
    pub argv: Vec<String>,
    /// `PHIMIN_THREADS`, when set; outputs do not depend on it
    pub threads: Option<usize>,
    pub weight: Option<WeightConfig>,
    pub parameters: Value,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub outputs: Vec<PathBuf>,
    /// process exit status of the run
    pub status: i32,
}

impl Manifest {
    pub fn new(command: &str, argv: Vec<String>, threads: Option<usize>) -> Self {
        Self {
            tool: "phimin",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            argv,
            threads,
            weight: None,
            parameters: Value::Null,
            tolerances: BTreeMap::new(),
            outputs: vec![],
            status: 0,
        }
    }

    /// Where the manifest goes: the explicit path, otherwise next to the first
    /// output file as `<name>.manifest.json`; `None` for stdout-only runs.
    pub fn destination(&self, explicit: Option<&Path>) -> Option<PathBuf> {
        if let Some(p) = explicit {
            return Some(p.to_owned());
        }
        let first = self.outputs.first()?;
        let mut name = first.file_name()?.to_os_string();
        name.push(".manifest.json");
        Some(first.with_file_name(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_destination_sits_next_to_first_output() {
        let mut m = Manifest::new("solve", vec![], None);
        assert_eq!(m.destination(None), None);
        m.outputs.push(PathBuf::from("runs/patch.json"));
        m.outputs.push(PathBuf::from("runs/report.json"));
        assert_eq!(
            m.destination(None),
            Some(PathBuf::from("runs/patch.json.manifest.json"))
        );
        assert_eq!(
            m.destination(Some(Path::new("m.json"))),
            Some(PathBuf::from("m.json"))
        );
    }
}
