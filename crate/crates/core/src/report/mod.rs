//! Coverage outputs: frequency tables, length densities, plots and the
//! master run report.

mod frequency;
mod kde;
mod svg;
mod table;
mod write;

pub use frequency::{frequency_table, FrequencyTable};
pub use kde::{kde, kde_at, silverman_bandwidth, Bandwidth, KdeCurve, DEFAULT_GRID_SIZE};
pub use svg::{emit_kde_plot, emit_scatter, ScatterFiles};
pub use table::Table;
pub use write::{
    validate_master_report, write_report, OutlierSummary, ReportFiles, RunReport, MASTER_REPORT,
    REPORT_SCHEMA_VERSION, REQUIRED_KEYS,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PromptRecord;
    use std::collections::BTreeMap;

    fn recs(rows: &[(&str, &str)]) -> Vec<PromptRecord> {
        rows.iter()
            .map(|(id, c)| PromptRecord::new(*id, *c, "x"))
            .collect()
    }

    #[test]
    fn two_by_two_table() {
        let r = recs(&[("a", "A"), ("b", "A"), ("c", "B"), ("d", "B")]);
        let t = frequency_table(&[0, 1, 0, 1], &BTreeMap::new(), &r).unwrap();
        assert_eq!(t.counts, vec![vec![1, 1], vec![1, 1]]);
        assert!(t.row_proportions.iter().flatten().all(|&p| p == 0.5));
    }

    #[test]
    fn degenerate_row_has_proportion_one() {
        let r = recs(&[("a", "A"), ("b", "A"), ("c", "B")]);
        let t = frequency_table(&[1, 1, 0], &BTreeMap::new(), &r).unwrap();
        assert_eq!(t.row_proportions[0], vec![0.0, 1.0]);
        assert_eq!(t.column_sums(), vec![1, 2]);
        assert!(frequency_table(&[0], &BTreeMap::new(), &r).is_err());
    }
}
