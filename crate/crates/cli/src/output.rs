//! CSV tables with fixed formatting and content digests.

use sha2::{Digest, Sha256};

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table built in memory so that its bytes can be digested before
/// they are written.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory cannot fail");
        Self { writer, width: header.len() }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let cells: Vec<S> = cells.into_iter().collect();
        assert_eq!(cells.len(), self.width, "row width does not match the header");
        self.writer.write_record(cells).expect("writing to memory cannot fail");
    }

    pub fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("writing to memory cannot fail")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
