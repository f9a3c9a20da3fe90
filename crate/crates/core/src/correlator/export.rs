use std::io;

use super::CorrelatedEventInstance;

pub const CSV_HEADER: [&str; 6] = ["case_id", "timestamp", "activity", "trust", "lifecycle", "resource"];

/// Writes instances as CSV. Noise instances have empty `case_id` and `trust`.
pub fn write_csv<'a, W, I>(writer: W, instances: I) -> csv::Result<()>
where
    W: io::Write,
    I: IntoIterator<Item = &'a CorrelatedEventInstance>,
{
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for i in instances {
        out.write_record([
            i.case_id.map(|c| c.to_string()).unwrap_or_default(),
            i.timestamp.to_string(),
            i.activity.clone(),
            i.trust.map(|t| format!("{t:.2}")).unwrap_or_default(),
            i.lifecycle.to_string(),
            i.resource.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
