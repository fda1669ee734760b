//! Configuration files, binary snapshots, the norm ledger and the observers
//! that write them during a run.

mod config;
mod ledger;
mod observers;
mod snapshot;

pub use config::{load_config, parse_config, InitSpec, RunConfig, CONFIG_KEYS};
pub use ledger::{append_ledger_row, ledger_header, read_ledger, write_ledger_header, LedgerRow, CERTIFICATE_COLUMNS, LEDGER_VERSION};
pub use observers::{LedgerObserver, SnapshotObserver};
pub use snapshot::{decode_snapshot, read_snapshot, write_snapshot, Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
