//! `--config FILE`: a flat JSON object whose keys are flag names of the
//! chosen subcommand. Its flags are inserted ahead of the command-line flags,
//! so the command line wins when both set the same flag.

use std::path::Path;

use serde_json::Value;

use crate::error::{io_error, CliError, CliResult};

const GLOBAL_WITH_VALUE: [&str; 2] = ["--threads", "--config"];

/// Finds `--config` in `argv` and splices the file's flags in right after
/// the subcommand name.
pub fn apply_config_file(argv: Vec<String>) -> CliResult<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let Some(sub_at) = subcommand_position(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| io_error(Path::new(&path), e))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file {path} is not valid JSON: {e}")))?;
    let flags = flags_from_json(&doc)?;
    let mut out = argv[..=sub_at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[sub_at + 1..]);
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn subcommand_position(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if GLOBAL_WITH_VALUE.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

pub fn flags_from_json(doc: &Value) -> CliResult<Vec<String>> {
    let obj = doc
        .as_object()
        .ok_or_else(|| CliError::Usage("config file must hold a JSON object".into()))?;
    let mut flags = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if GLOBAL_WITH_VALUE.contains(&flag.as_str()) {
            return Err(CliError::Usage(format!("{flag} cannot be set from a config file")));
        }
        match value {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => flags.extend([flag, n.to_string()]),
            Value::String(s) => flags.extend([flag, s.clone()]),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        _ => Err(CliError::Usage(format!("unsupported list item for {key}"))),
                    })
                    .collect::<CliResult<_>>()?;
                flags.extend([flag, parts.join(",")]);
            }
            Value::Object(_) => return Err(CliError::Usage(format!("nested object for {key} is not supported"))),
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn subcommand_after_globals() {
        assert_eq!(subcommand_position(&args(&["g", "--threads", "2", "fit", "--x"])), Some(3));
        assert_eq!(subcommand_position(&args(&["g", "fit"])), Some(1));
    }

    #[test]
    fn json_to_flags() {
        let doc: Value = serde_json::from_str(r#"{"learning_rate": 0.1, "no_purify": true, "split": [0.6, 0.2, 0.2]}"#).unwrap();
        let flags = flags_from_json(&doc).unwrap();
        assert_eq!(flags, args(&["--learning-rate", "0.1", "--no-purify", "--split", "0.6,0.2,0.2"]));
        assert!(flags_from_json(&serde_json::json!([1])).is_err());
    }
}
