//! Plain-text channel dumps, for replaying one realization elsewhere.
//!
//! Layout: one metadata line followed by a CSV table.
//!
//! ```text
//! # bdris-channels v1 antennas=4 elements=16 subcarriers=16 users_per_bs=1;1;1;1
//! link,tx,rx,k,row,col,re,im
//! direct,0,0,0,0,0,1.25e-6,-3.5e-7
//! ...
//! ```
//!
//! * `direct`: `tx` = BS, `rx` = user (global, cell-major), `row` = antenna, `col` = 0.
//! * `bs_ris`: `tx` = `rx` = BS/surface index, `row` = element, `col` = antenna.
//! * `ris_ue`: `tx` = surface, `rx` = user, `row` = element, `col` = 0.
//!
//! Rows are emitted link by link, subcarrier by subcarrier, row-major. Floats
//! are written in shortest round-trip form so a dump reloads bit-exactly.

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NetworkChannels;
use crate::error::{Error, Result};

const MAGIC: &str = "# bdris-channels v1";

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    link: String,
    tx: usize,
    rx: usize,
    k: usize,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

pub fn write_channels<W: Write>(channels: &NetworkChannels, mut out: W) -> Result<()> {
    let users: Vec<String> = channels.users_per_bs().iter().map(|l| l.to_string()).collect();
    writeln!(
        out,
        "{MAGIC} antennas={} elements={} subcarriers={} users_per_bs={}",
        channels.antennas(),
        channels.elements(),
        channels.subcarriers(),
        users.join(";")
    )?;
    let mut csv = csv::Writer::from_writer(out);
    let q = channels.num_bs();
    let u = channels.num_users();
    let kk = channels.subcarriers();
    let mut emit = |link: &str, tx: usize, rx: usize, k: usize, row: usize, col: usize, v: Complex64| {
        csv.serialize(Entry { link: link.into(), tx, rx, k, row, col, re: v.re, im: v.im })
    };
    for j in 0..q {
        for user in 0..u {
            for k in 0..kk {
                for (row, v) in channels.direct(j, user, k).iter().enumerate() {
                    emit("direct", j, user, k, row, 0, *v)?;
                }
            }
        }
    }
    for j in 0..q {
        for k in 0..kk {
            let h = channels.bs_ris(j, k);
            for row in 0..h.nrows() {
                for col in 0..h.ncols() {
                    emit("bs_ris", j, j, k, row, col, h[(row, col)])?;
                }
            }
        }
    }
    for j in 0..q {
        for user in 0..u {
            for k in 0..kk {
                for (row, v) in channels.ris_ue(j, user, k).iter().enumerate() {
                    emit("ris_ue", j, user, k, row, 0, *v)?;
                }
            }
        }
    }
    csv.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(usize, usize, usize, Vec<usize>)> {
    let rest = line
        .trim_end()
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::ChannelFormat(format!("missing `{MAGIC}` header")))?;
    let (mut n, mut m, mut k, mut users) = (None, None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::ChannelFormat(format!("bad header field `{field}`")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|e| Error::ChannelFormat(format!("header `{key}`: {e}")));
        match key {
            "antennas" => n = Some(num(value)?),
            "elements" => m = Some(num(value)?),
            "subcarriers" => k = Some(num(value)?),
            "users_per_bs" => users = Some(value.split(';').map(num).collect::<Result<Vec<_>>>()?),
            _ => return Err(Error::ChannelFormat(format!("unknown header field `{key}`"))),
        }
    }
    match (n, m, k, users) {
        (Some(n), Some(m), Some(k), Some(users)) if n > 0 && m > 0 && k > 0 && !users.is_empty() => {
            Ok((n, m, k, users))
        }
        _ => Err(Error::ChannelFormat("incomplete header".into())),
    }
}

pub fn read_channels<R: Read>(input: R) -> Result<NetworkChannels> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (n, m, kk, users_per_bs) = parse_header(&header)?;
    let mut channels = NetworkChannels::zeros(&users_per_bs, n, m, kk);
    let q = users_per_bs.len();
    let u = channels.num_users();
    let expected = q * u * kk * n + q * kk * m * n + q * u * kk * m;
    let mut seen = 0usize;

    for (line, record) in csv::Reader::from_reader(reader).deserialize::<Entry>().enumerate() {
        let e = record?;
        let bad = || Error::ChannelFormat(format!("record {}: index out of range", line + 1));
        if e.k >= kk || e.tx >= q {
            return Err(bad());
        }
        let v = Complex64::new(e.re, e.im);
        match e.link.as_str() {
            "direct" if e.rx < u && e.row < n && e.col == 0 => channels.direct_mut(e.tx, e.rx, e.k)[e.row] = v,
            "bs_ris" if e.rx == e.tx && e.row < m && e.col < n => channels.bs_ris_mut(e.tx, e.k)[(e.row, e.col)] = v,
            "ris_ue" if e.rx < u && e.row < m && e.col == 0 => channels.ris_ue_mut(e.tx, e.rx, e.k)[e.row] = v,
            "direct" | "bs_ris" | "ris_ue" => return Err(bad()),
            other => return Err(Error::ChannelFormat(format!("record {}: unknown link `{other}`", line + 1))),
        }
        seen += 1;
    }
    if seen != expected {
        return Err(Error::ChannelFormat(format!("expected {expected} entries, found {seen}")));
    }
    Ok(channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{ChannelParams, NetworkTopology};

    #[test]
    fn dump_reloads_bit_exactly() {
        let topo = NetworkTopology {
            bs: vec![[0.0, 0.0, 5.0], [60.0, 0.0, 5.0]],
            ris: vec![[-2.5, 8.5, 3.0], [62.5, 8.5, 3.0]],
            users: vec![[30.0, 60.0, 1.5], [32.5, 60.0, 1.5], [30.0, 62.5, 1.5]],
            users_per_bs: vec![2, 1],
            antennas: 2,
            elements: 3,
        };
        let ch = NetworkChannels::generate(&topo, &ChannelParams::default(), 16, 7).unwrap();
        let mut buf = Vec::new();
        write_channels(&ch, &mut buf).unwrap();
        let back = read_channels(buf.as_slice()).unwrap();
        assert_eq!(back, ch);
    }

    #[test]
    fn truncated_dump_rejected() {
        let ch = NetworkChannels::zeros(&[1], 1, 1, 2);
        let mut buf = Vec::new();
        write_channels(&ch, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().take(3).collect();
        let err = read_channels(cut.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::ChannelFormat(_)));
        assert!(read_channels("garbage\n".as_bytes()).is_err());
    }
}
