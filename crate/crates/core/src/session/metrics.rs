use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::schema::SpaceKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Executable,
    Abandoned,
}

/// Summary of a finished session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub environment: String,
    pub description_tokens: usize,
    /// `None` for abandoned sessions.
    pub trials_to_execution: Option<u32>,
    pub space_kind: Option<SpaceKind>,
    pub outcome: Outcome,
}

#[derive(Serialize)]
struct Row<'a> {
    environment: &'a str,
    space_kind: String,
    description_tokens: usize,
    trials_to_execution: String,
}

/// Writes the summary table; abandoned sessions leave the trial column blank.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[SessionMetrics]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in rows {
        w.serialize(Row {
            environment: &m.environment,
            space_kind: m.space_kind.map(|k| k.to_string()).unwrap_or_default(),
            description_tokens: m.description_tokens,
            trials_to_execution: m.trials_to_execution.map(|t| t.to_string()).unwrap_or_default(),
        })?;
    }
    if rows.is_empty() {
        w.write_record(["environment", "space_kind", "description_tokens", "trials_to_execution"])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = [
            SessionMetrics {
                environment: "Key-Lock".into(),
                description_tokens: 48,
                trials_to_execution: Some(2),
                space_kind: Some(SpaceKind::Discrete),
                outcome: Outcome::Executable,
            },
            SessionMetrics {
                environment: "Other".into(),
                description_tokens: 5,
                trials_to_execution: None,
                space_kind: None,
                outcome: Outcome::Abandoned,
            },
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "environment,space_kind,description_tokens,trials_to_execution\nKey-Lock,Discrete,48,2\nOther,,5,\n"
        );
        let mut empty = Vec::new();
        write_metrics_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "environment,space_kind,description_tokens,trials_to_execution\n");
    }
}
