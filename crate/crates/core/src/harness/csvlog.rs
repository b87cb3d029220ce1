//! Per-run CSV logs.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::record::IterationRecord;

pub const HEADER: [&str; 11] = [
    "run_id",
    "seed",
    "epoch",
    "t",
    "train_loss",
    "test_loss",
    "step_norm",
    "cert",
    "grad_samples_cum",
    "hess_samples_cum",
    "wall_ms",
];

/// 17 significant digits, enough to recover every `f64` exactly.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_run<W: Write>(out: W, run_id: &str, seed: u64, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            run_id.to_string(),
            seed.to_string(),
            r.epoch.to_string(),
            r.t.to_string(),
            float(r.train_loss),
            r.test_loss.map(float).unwrap_or_default(),
            float(r.step_norm),
            float(r.cert),
            r.grad_samples_cum.to_string(),
            r.hess_samples_cum.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A run log read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub run_id: String,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

pub fn read_run<R: Read>(input: R) -> Result<RunLog> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut run_id = None;
    let mut seed = 0;
    let mut records = Vec::new();
    for (k, row) in rd.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let field = |i: usize| &row[i];
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| Error::Parse {
                line,
                message: format!("{} = {:?} is not a number", HEADER[i], field(i)),
            })
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| Error::Parse {
                line,
                message: format!("{} = {:?} is not an integer", HEADER[i], field(i)),
            })
        };
        run_id.get_or_insert_with(|| field(0).to_string());
        seed = int(1)?;
        records.push(IterationRecord {
            epoch: field(2).parse().map_err(|_| Error::Parse {
                line,
                message: format!("epoch = {:?}", field(2)),
            })?,
            t: int(3)? as usize,
            train_loss: num(4)?,
            test_loss: if field(5).is_empty() { None } else { Some(num(5)?) },
            step_norm: num(6)?,
            cert: num(7)?,
            grad_samples_cum: int(8)?,
            hess_samples_cum: int(9)?,
            wall_ms: num(10)?,
        });
    }
    Ok(RunLog {
        run_id: run_id.ok_or(Error::EmptyDataset)?,
        seed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, loss: f64, test: Option<f64>) -> IterationRecord {
        IterationRecord {
            epoch: -1,
            t,
            train_loss: loss,
            test_loss: test,
            step_norm: 0.1 * t as f64,
            cert: 1e-300,
            grad_samples_cum: 2 * t as u64,
            hess_samples_cum: t as u64,
            wall_ms: 0.5,
        }
    }

    #[test]
    fn header_and_round_trip() {
        let records = vec![
            rec(0, 0.1 + 0.2, Some(std::f64::consts::PI)),
            rec(1, 1.0 / 3.0, None),
            rec(2, f64::MIN_POSITIVE, Some(-0.0)),
        ];
        let mut buf = Vec::new();
        write_run(&mut buf, "ascn-seed7", 7, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "run_id,seed,epoch,t,train_loss,test_loss,step_norm,cert,grad_samples_cum,hess_samples_cum,wall_ms"
        );
        assert!(!text.contains('\r'));
        let back = read_run(buf.as_slice()).unwrap();
        assert_eq!(back.run_id, "ascn-seed7");
        assert_eq!(back.seed, 7);
        assert_eq!(back.records, records);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_run("a,b\n1,2\n".as_bytes()).is_err());
    }
}
