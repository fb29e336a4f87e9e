//! Entry listing of the configured dictionaries.

use super::build_dictionary;
use crate::artifacts::ArtifactSet;
use crate::config::ExperimentPlan;
use crate::error::Result;
use crate::table::{Cell, Table};

pub fn run(plan: &ExperimentPlan, out: &mut ArtifactSet) -> Result<()> {
    let q = plan.quench.as_ref();
    for &choice in &plan.dictionaries {
        let dict = build_dictionary(choice, &plan.chain, q)?;
        let mut slot_of = vec![None; dict.len()];
        for (&(_, slot), &row) in dict.layout() {
            slot_of[row] = Some(slot);
        }
        let mut table = Table::new(&[
            ("row", ""),
            ("name", ""),
            ("role", ""),
            ("slot", ""),
            ("word", ""),
            ("coefficient", ""),
        ])
        .meta("dictionary", choice.as_str())
        .meta("n_sites", plan.chain.n_sites.to_string())
        .meta("entries", dict.len().to_string());
        for (row, e) in dict.entries().iter().enumerate() {
            for (c, w) in e.terms() {
                table.push(vec![
                    row.into(),
                    e.name().into(),
                    e.role().as_str().into(),
                    slot_of[row].map_or(Cell::Empty, Cell::from),
                    w.label().into(),
                    (*c).into(),
                ]);
            }
        }
        out.write(&format!("dictionary_{}.csv", choice.as_str()), table)?;
    }
    Ok(())
}
