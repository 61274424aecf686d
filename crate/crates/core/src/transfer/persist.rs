//! Training history CSV and model checkpoints.
//!
//! A checkpoint is a sequence of sections, each introduced by a header line
//! `[name] key=value ...` and followed by one number per line:
//!
//! ```text
//! [network] pool_rows=8 pool_cols=8 hidden=64 classes=4 len=4420
//! ...
//! [theta0] beta=8 support=128 hop=16 len=185
//! ...
//! [theta1] beta=8 support=128 hop=16 len=185
//! ...
//! ```

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::transfer::classifier::{ClassifierShape, TinyClassifier};
use crate::transfer::train::HistoryRow;
use crate::window::WindowParams;

pub const HISTORY_HEADER: &str = "epoch,l_cl,l_m,l_sbsq,l_tbsq,lambda0,total,target_acc";

pub fn format_history(rows: &[HistoryRow]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        let vals = [r.l_cl, r.l_m, r.l_sbsq, r.l_tbsq, r.lambda0, r.total, r.target_acc];
        let cells: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&format!("{},{}\n", r.epoch, cells.join(",")));
    }
    out
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryRow>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == HISTORY_HEADER => {}
        Some((ln, _)) => return Err(Error::parse(ln, format!("expected header {HISTORY_HEADER:?}"))),
        None => return Err(Error::parse(1, "empty file")),
    }
    let mut out = Vec::new();
    for (ln, l) in lines {
        if l.is_empty() {
            continue;
        }
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != 8 {
            return Err(Error::parse(ln, format!("expected 8 fields, found {}", cells.len())));
        }
        let epoch = cells[0]
            .parse()
            .map_err(|_| Error::parse(ln, format!("bad epoch {:?}", cells[0])))?;
        let mut v = [0.0; 7];
        for (slot, c) in v.iter_mut().zip(&cells[1..]) {
            *slot = c.parse().map_err(|_| Error::parse(ln, format!("not a number: {c:?}")))?;
        }
        out.push(HistoryRow {
            epoch,
            l_cl: v[0],
            l_m: v[1],
            l_sbsq: v[2],
            l_tbsq: v[3],
            lambda0: v[4],
            total: v[5],
            target_acc: v[6],
        });
    }
    Ok(out)
}

/// Network and both window parameter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: TinyClassifier,
    pub theta0: WindowParams,
    pub theta1: WindowParams,
}

fn push_values(out: &mut String, v: &[f64]) {
    for x in v {
        out.push_str(&fmt_f64(*x));
        out.push('\n');
    }
}

fn window_header(name: &str, w: &WindowParams) -> String {
    format!(
        "[{name}] beta={} support={} hop={} len={}\n",
        fmt_f64(w.beta),
        w.support,
        w.hop,
        w.lengths.len()
    )
}

pub fn format_checkpoint(c: &Checkpoint) -> String {
    let s = c.net.shape;
    let mut out = format!(
        "[network] pool_rows={} pool_cols={} hidden={} classes={} len={}\n",
        s.pool_rows,
        s.pool_cols,
        s.hidden,
        s.classes,
        c.net.params.len()
    );
    push_values(&mut out, &c.net.params);
    out.push_str(&window_header("theta0", &c.theta0));
    push_values(&mut out, &c.theta0.lengths);
    out.push_str(&window_header("theta1", &c.theta1));
    push_values(&mut out, &c.theta1.lengths);
    out
}

struct Section {
    name: String,
    line: usize,
    keys: Vec<(String, String)>,
    values: Vec<f64>,
}

impl Section {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .keys
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::parse(self.line, format!("[{}] missing {key}", self.name)))?;
        v.parse()
            .map_err(|_| Error::parse(self.line, format!("[{}] bad {key}={v}", self.name)))
    }
}

fn sections(text: &str) -> Result<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let ln = i + 1;
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let (name, kv) = rest
                .split_once(']')
                .ok_or_else(|| Error::parse(ln, "unterminated section name"))?;
            let keys = kv
                .split_whitespace()
                .map(|p| {
                    p.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| Error::parse(ln, format!("expected key=value, found {p:?}")))
                })
                .collect::<Result<_>>()?;
            out.push(Section {
                name: name.to_string(),
                line: ln,
                keys,
                values: Vec::new(),
            });
            continue;
        }
        let sec = out
            .last_mut()
            .ok_or_else(|| Error::parse(ln, "value before first section"))?;
        let v: f64 = l.parse().map_err(|_| Error::parse(ln, format!("not a number: {l:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(ln, "non-finite value"));
        }
        sec.values.push(v);
    }
    if out.is_empty() {
        return Err(Error::parse(1, "empty file"));
    }
    Ok(out)
}

fn take<'a>(secs: &'a [Section], name: &str) -> Result<&'a Section> {
    let s = secs
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Format(format!("checkpoint lacks section [{name}]")))?;
    let len: usize = s.get("len")?;
    if len != s.values.len() {
        return Err(Error::parse(
            s.line,
            format!("[{name}] declares {len} values, found {}", s.values.len()),
        ));
    }
    Ok(s)
}

fn window_section(secs: &[Section], name: &str) -> Result<WindowParams> {
    let s = take(secs, name)?;
    WindowParams::new(s.values.clone(), s.get("beta")?, s.get("support")?, s.get("hop")?)
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let secs = sections(text)?;
    let n = take(&secs, "network")?;
    let shape = ClassifierShape {
        pool_rows: n.get("pool_rows")?,
        pool_cols: n.get("pool_cols")?,
        hidden: n.get("hidden")?,
        classes: n.get("classes")?,
    };
    Ok(Checkpoint {
        net: TinyClassifier::from_params(shape, n.values.clone())?,
        theta0: window_section(&secs, "theta0")?,
        theta1: window_section(&secs, "theta1")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_round_trip() {
        let rows = vec![HistoryRow {
            epoch: 0,
            l_cl: 1.25,
            l_m: 0.1,
            l_sbsq: 0.6,
            l_tbsq: 0.55,
            lambda0: 0.0,
            total: 1.855,
            target_acc: f64::NAN,
        }];
        let back = parse_history(&format_history(&rows)).unwrap();
        assert_eq!(back[0].epoch, 0);
        assert_eq!(back[0].l_tbsq, 0.55);
        assert!(back[0].target_acc.is_nan());
        assert!(parse_history("").is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let shape = ClassifierShape {
            pool_rows: 2,
            pool_cols: 2,
            hidden: 3,
            classes: 2,
        };
        let params = (0..shape.n_params()).map(|i| i as f64 * 0.1 - 1.0).collect();
        let c = Checkpoint {
            net: TinyClassifier::from_params(shape, params).unwrap(),
            theta0: WindowParams::new(vec![4.0, 2.5], 8.0, 4, 2).unwrap(),
            theta1: WindowParams::new(vec![1.5, 3.0], 8.0, 4, 2).unwrap(),
        };
        assert_eq!(parse_checkpoint(&format_checkpoint(&c)).unwrap(), c);
    }

    #[test]
    fn checkpoint_length_mismatch() {
        let text = "[network] pool_rows=1 pool_cols=1 hidden=1 classes=2 len=2\n1\n2\n";
        assert!(parse_checkpoint(text).is_err());
        assert!(parse_checkpoint("1.0\n").is_err());
    }
}
