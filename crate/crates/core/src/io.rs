//! JSON file formats for MDPs and policies.
//!
//! ```json
//! { "name": "optional", "n_states": 2,
//!   "states": [ { "actions": [ { "probs": [1.0, 0.0], "reward": 0.5 } ] }, ... ] }
//! ```
//!
//! Unknown keys are accepted; each one produces a warning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Mdp, Policy};

#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    n_states: usize,
    states: Vec<StateFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    actions: Vec<ActionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionFile {
    probs: Vec<f64>,
    reward: f64,
}

fn parse_json<'de, D: Deserialize<'de>>(bytes: &'de [u8]) -> Result<(D, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = {
        let mut record = |path: serde_ignored::Path| {
            warnings.push(format!("ignoring unknown key `{path}`"));
        };
        let ignoring = serde_ignored::Deserializer::new(&mut de, &mut record);
        serde_path_to_error::deserialize(ignoring).map_err(|e| Error::ParseError {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?
    };
    de.end().map_err(|e| Error::ParseError { path: ".".into(), message: e.to_string() })?;
    Ok((value, warnings))
}

/// Parses and validates an MDP, returning warnings for unknown keys.
pub fn load_mdp_with_warnings(bytes: &[u8]) -> Result<(Mdp<f64>, Vec<String>)> {
    let (file, warnings): (MdpFile, _) = parse_json(bytes)?;
    if file.states.len() != file.n_states {
        return Err(Error::ParseError {
            path: "states".into(),
            message: format!("{} state records for n_states = {}", file.states.len(), file.n_states),
        });
    }
    let actions = file
        .states
        .into_iter()
        .map(|st| {
            st.actions
                .into_iter()
                .map(|a| Action { probs: a.probs, reward: a.reward })
                .collect()
        })
        .collect();
    Ok((Mdp::new(file.name, actions)?, warnings))
}

/// Parses and validates an MDP; unknown keys are reported on standard error.
pub fn load_mdp(bytes: &[u8]) -> Result<Mdp<f64>> {
    let (mdp, warnings) = load_mdp_with_warnings(bytes)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(mdp)
}

pub fn save_mdp(mdp: &Mdp<f64>) -> Vec<u8> {
    let file = MdpFile {
        name: mdp.name().map(str::to_owned),
        n_states: mdp.n_states(),
        states: mdp
            .states()
            .iter()
            .map(|acts| StateFile {
                actions: acts
                    .iter()
                    .map(|a| ActionFile { probs: a.probs.clone(), reward: a.reward })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_vec_pretty(&file).expect("MDP serializes")
}

pub fn read_mdp(path: impl AsRef<std::path::Path>) -> Result<Mdp<f64>> {
    load_mdp(&std::fs::read(path)?)
}

pub fn write_mdp(path: impl AsRef<std::path::Path>, mdp: &Mdp<f64>) -> Result<()> {
    std::fs::write(path, save_mdp(mdp))?;
    Ok(())
}

/// Policy files hold `{"deterministic": [..]}` or `{"randomized": [[..], ..]}`.
pub fn load_policy(bytes: &[u8]) -> Result<Policy<f64>> {
    let (policy, warnings) = parse_json(bytes)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(policy)
}

pub fn save_policy(policy: &Policy<f64>) -> Vec<u8> {
    serde_json::to_vec(policy).expect("policy serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = r#"{
        "name": "toy",
        "n_states": 2,
        "states": [
            { "actions": [ { "probs": [0.5, 0.5], "reward": 0.1 }, { "probs": [0.0, 1.0], "reward": 1.0 } ] },
            { "actions": [ { "probs": [0.0, 1.0], "reward": 0.3 } ] }
        ]
    }"#;

    #[test]
    fn round_trip_is_value_exact() {
        let m = load_mdp(TWO_STATE.as_bytes()).unwrap();
        let m2 = load_mdp(&save_mdp(&m)).unwrap();
        assert_eq!(m, m2);
        assert_eq!(m.name(), Some("toy"));
    }

    #[test]
    fn missing_actions_key_reports_path() {
        let bad = r#"{ "n_states": 1, "states": [ { "acts": [] } ] }"#;
        match load_mdp_with_warnings(bad.as_bytes()) {
            Err(Error::ParseError { path, message }) => {
                assert!(path.starts_with("states[0]"), "path {path}");
                assert!(message.contains("actions"), "message {message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_warnings() {
        let extra = r#"{ "n_states": 1, "comment": "hi",
            "states": [ { "actions": [ { "probs": [1.0], "reward": 0.5, "label": "x" } ] } ] }"#;
        let (m, warnings) = load_mdp_with_warnings(extra.as_bytes()).unwrap();
        assert_eq!(m.n_states(), 1);
        assert_eq!(warnings.len(), 2);
        assert!(warnings.iter().any(|w| w.contains("comment")));
        assert!(warnings.iter().any(|w| w.contains("label")));
    }

    #[test]
    fn state_count_must_match() {
        let bad = r#"{ "n_states": 2, "states": [ { "actions": [ { "probs": [1.0, 0.0], "reward": 0 } ] } ] }"#;
        assert!(matches!(load_mdp(bad.as_bytes()), Err(Error::ParseError { .. })));
    }

    #[test]
    fn validation_errors_propagate() {
        let bad = r#"{ "n_states": 1, "states": [ { "actions": [ { "probs": [1.0], "reward": 1.5 } ] } ] }"#;
        assert!(matches!(load_mdp(bad.as_bytes()), Err(Error::RewardRangeError { .. })));
    }

    #[test]
    fn policy_files() {
        let p = load_policy(br#"{"deterministic":[0,2,1]}"#).unwrap();
        assert_eq!(p, Policy::Deterministic(vec![0, 2, 1]));
        let r = load_policy(br#"{"randomized":[[0.5,0.5]]}"#).unwrap();
        assert_eq!(load_policy(&save_policy(&r)).unwrap(), r);
    }
}
