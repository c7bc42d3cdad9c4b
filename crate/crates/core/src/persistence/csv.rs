//! Results export.

use super::row::ResultsRow;
use crate::model::SessionStatus;
use crate::points::Points;

pub const CSV_HEADER: &str = "result_id,diagonisma_id,first_name,second_name,am,etos_spoudon,tmima,time_submitted,status,final_score,successful";

/// Quotes a field when it holds a comma, a double quote or a line break;
/// inner quotes are doubled.
fn field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Renders rows (already ordered by result id) as a UTF-8 CSV document with
/// `\n` line endings.
pub fn render_results_csv<'a>(rows: impl IntoIterator<Item = &'a ResultsRow>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let score = match row.status.parse::<SessionStatus>() {
            Ok(SessionStatus::Checked) => row
                .final_score
                .parse::<Points>()
                .map(Points::fmt_2dp)
                .unwrap_or_default(),
            _ => String::new(),
        };
        let fields = [
            row.result_id.to_string(),
            row.diagonisma_id.to_string(),
            field(&row.first_name),
            field(&row.second_name),
            field(&row.am),
            field(&row.etos_spoudon),
            field(&row.tmima),
            field(&row.time_submitted),
            field(&row.status),
            score,
            row.successful.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
