use crate::acquisition::{ExposureWindow, Session, SessionMeta};
use crate::error::{Error, Result};
use crate::tables::ExperimentTable;

use super::{simulate_session, ExposureProtocol, SimConfig};

/// Per-session seed derived from the run seed, the table and the session's
/// position, so each session owns an independent stream.
pub fn session_seed(seed: u64, table: &str, row: usize, rep: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in table.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut x = seed ^ h.rotate_left(17);
    for v in [row as u64, rep as u64] {
        x = splitmix64(x ^ v.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    x
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Simulates `per_row_samples` labeled sessions for every table row.
///
/// Repetition `j` of a row uses mixture variant `j % variants_per_row`, so
/// the published mixture and its role-swapped counterparts alternate.
pub fn generate_dataset(
    table: &ExperimentTable,
    per_row_samples: usize,
    seed: u64,
    sim: &SimConfig,
) -> Result<Vec<Session>> {
    if per_row_samples == 0 {
        return Err(Error::InvalidParameter("per_row_samples must be > 0".into()));
    }
    generate_with_counts(table, &vec![per_row_samples; table.rows.len()], seed, sim)
}

/// Like [`generate_dataset`] with an explicit session count per row.
pub fn generate_with_counts(
    table: &ExperimentTable,
    counts: &[usize],
    seed: u64,
    sim: &SimConfig,
) -> Result<Vec<Session>> {
    table.validate()?;
    sim.validate()?;
    if counts.len() != table.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: table.rows.len(),
            got: counts.len(),
        });
    }
    let window = ExposureWindow::from_timing(&sim.timing);
    let mut sessions = Vec::with_capacity(counts.iter().sum());
    for (row, &count) in counts.iter().enumerate() {
        for rep in 0..count {
            let mixture = table.variant(row, rep % table.variants_per_row());
            let proto = ExposureProtocol::exposure(mixture, &sim.timing, sim.sample_rate_hz);
            let frames = simulate_session(&sim.specs, &proto, session_seed(seed, &table.name, row, rep))?;
            sessions.push(Session::new(
                frames,
                SessionMeta {
                    label: ExperimentTable::label_of(&mixture),
                    mixture: Some(mixture),
                    sample_rate_hz: sim.sample_rate_hz,
                    exposure: Some(window),
                },
            )?);
        }
    }
    Ok(sessions)
}

pub use generate_with_counts as generate_sessions;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::TableId;

    #[test]
    fn session_counts_match_splits() {
        // short sessions keep the test fast; counts do not depend on timing
        let mut sim = SimConfig::default();
        sim.timing.air_s = 0.5;
        sim.timing.exposure_s = 0.5;
        sim.timing.recovery_s = 0.5;
        for (id, per_row, total) in [
            (TableId::BinaryEthanol, 85, 680),
            (TableId::BinaryMethanol, 100, 800),
            (TableId::Ternary, 75, 600),
        ] {
            let t = ExperimentTable::builtin(id);
            let s = generate_dataset(&t, per_row, 1, &sim).unwrap();
            assert_eq!(s.len(), total);
            assert_eq!(total, t.n_train + t.n_test);
        }
    }

    #[test]
    fn zero_per_row_rejected() {
        let t = ExperimentTable::builtin(TableId::Ternary);
        assert!(generate_dataset(&t, 0, 1, &SimConfig::default()).is_err());
    }

    #[test]
    fn labels_follow_variants() {
        let mut sim = SimConfig::default();
        sim.timing = crate::sim::SessionTiming {
            air_s: 0.5,
            exposure_s: 0.5,
            recovery_s: 0.5,
        };
        let t = ExperimentTable::builtin(TableId::Ternary);
        let s = generate_dataset(&t, 3, 5, &sim).unwrap();
        let labels: Vec<u8> = s.iter().take(3).map(|s| s.meta.label).collect();
        assert_eq!(labels, vec![1, 2, 3]);
    }

    #[test]
    fn seeds_differ_across_positions() {
        let a = session_seed(1, "ternary", 0, 0);
        assert_ne!(a, session_seed(1, "ternary", 0, 1));
        assert_ne!(a, session_seed(1, "ternary", 1, 0));
        assert_ne!(a, session_seed(1, "binary_ethanol", 0, 0));
        assert_ne!(a, session_seed(2, "ternary", 0, 0));
    }
}
