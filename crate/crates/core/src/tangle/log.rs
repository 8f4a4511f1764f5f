//! Append-only transaction log, one JSON record per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Address, TangleError, Transaction, TxId};

/// Wire form of one transaction in the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub id: String,
    pub address: String,
    pub payload: String,
    pub fi: u32,
    pub ft: u32,
    pub trunk: String,
    pub branch: String,
    pub nonce: String,
    pub ts: u64,
}

impl From<&Transaction> for LogRecord {
    fn from(tx: &Transaction) -> Self {
        Self {
            id: tx.id.to_hex(),
            address: tx.address.to_hex(),
            payload: BASE64.encode(&tx.payload),
            fi: tx.fragment_index,
            ft: tx.fragment_total,
            trunk: tx.trunk.to_hex(),
            branch: tx.branch.to_hex(),
            nonce: hex::encode(tx.nonce),
            ts: tx.timestamp,
        }
    }
}

impl TryFrom<LogRecord> for Transaction {
    type Error = TangleError;

    fn try_from(r: LogRecord) -> Result<Self, Self::Error> {
        let bad = |field: &str| TangleError::Log(format!("bad {field} field"));
        let mut nonce = [0u8; 8];
        hex::decode_to_slice(&r.nonce, &mut nonce).map_err(|_| bad("nonce"))?;
        Ok(Transaction {
            id: r.id.parse::<TxId>().map_err(|_| bad("id"))?,
            address: r.address.parse::<Address>().map_err(|_| bad("address"))?,
            payload: BASE64.decode(&r.payload).map_err(|_| bad("payload"))?,
            fragment_index: r.fi,
            fragment_total: r.ft,
            trunk: r.trunk.parse::<TxId>().map_err(|_| bad("trunk"))?,
            branch: r.branch.parse::<TxId>().map_err(|_| bad("branch"))?,
            nonce,
            timestamp: r.ts,
        })
    }
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    /// Parses one log line into a transaction. The record must be
    /// self-consistent: its id has to match the digest of its fields.
    pub fn parse_line(line: &str) -> Result<Transaction, TangleError> {
        let record: LogRecord =
            serde_json::from_str(line).map_err(|e| TangleError::Log(e.to_string()))?;
        let tx = Transaction::try_from(record)?;
        if !tx.digest_matches() {
            return Err(TangleError::Log(format!("digest mismatch for {}", tx.id)));
        }
        Ok(tx)
    }
}

#[derive(Debug)]
pub struct TransactionLog {
    out: BufWriter<File>,
}

impl TransactionLog {
    pub fn open_append(path: &Path) -> Result<Self, TangleError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, tx: &Transaction) -> Result<(), TangleError> {
        writeln!(self.out, "{}", LogRecord::from(tx).to_line())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TangleError> {
        self.out.flush()?;
        Ok(())
    }

    /// Reads every record of an existing log. A missing file is an empty log.
    pub fn read_all(path: &Path) -> Result<Vec<Transaction>, TangleError> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tx = LogRecord::parse_line(&line)
                .map_err(|e| TangleError::Log(format!("line {}: {e}", n + 1)))?;
            out.push(tx);
        }
        Ok(out)
    }
}
